"""Detecting biased users in online social networks from behavioral features."""

from .attitude import (AttitudeRecord, DistributionStats, aggregate_attitude,
                       classify_polarity, fit_stats, histogram, label_bias)
from .evaluation import ContingencyMatrix, accuracy, contingency, generalized_weights
from .features import (CorrelationMatrix, FeatureVector, correlation_matrix,
                       extract_features, min_max_normalize, pearson, spearman)
from .ingest import (FieldMap, RawPost, UserRecord, build_user_table,
                     read_posts, read_users)
from .mlp import (BiasClassifier, Network, TrainConfig, TrainHistory,
                  forward, gradient, init_network, predict, rprop_plus_step,
                  sse, train)
from .sentiment import Lexicon, load_lexicon, score_text, tokenize
from .synth import SynthConfig, generate_population, planted_truth

__version__ = "0.1.0"
