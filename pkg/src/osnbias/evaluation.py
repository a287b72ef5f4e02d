"""Contingency-matrix evaluation and generalized-weights feature attribution."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mlp import Network


@dataclass(frozen=True)
class ContingencyMatrix:
    """2x2 observed-vs-predicted table; rows observed {Neg, Pos}, cols predicted.

    In row-normalized form each row holds percentages summing to 100.
    """

    cells: tuple  # ((neg_neg, neg_pos), (pos_neg, pos_pos))
    row_normalized: bool = False


def contingency(pred, obs, row_normalize: bool = False) -> ContingencyMatrix:
    pred = list(pred)
    obs = list(obs)
    if len(pred) != len(obs):
        raise ValueError("length mismatch")
    if not pred:
        raise ValueError("empty input")
    counts = [[0.0, 0.0], [0.0, 0.0]]
    for p, o in zip(pred, obs):
        if p not in (0, 1) or o not in (0, 1):
            raise ValueError("labels must be 0/1")
        counts[o][p] += 1
    if row_normalize:
        for o in (0, 1):
            total = counts[o][0] + counts[o][1]
            if total == 0:
                raise ValueError(f"observed class {o} has no members")
            counts[o] = [100.0 * c / total for c in counts[o]]
    return ContingencyMatrix(cells=(tuple(counts[0]), tuple(counts[1])),
                             row_normalized=row_normalize)


def accuracy(m: ContingencyMatrix) -> float:
    """Diagonal mass over total mass, as a percentage.

    Applied to a row-normalized matrix this is the unweighted mean of the two
    per-class recalls; on raw counts it is plain accuracy.
    """
    (nn, np_), (pn, pp) = m.cells
    total = nn + np_ + pn + pp
    if total == 0:
        raise ValueError("all-zero matrix")
    return 100.0 * (nn + pp) / total


def generalized_weights(net: Network, X) -> np.ndarray:
    """Per-observation derivative of the output log-odds w.r.t. each input.

    Because the output unit is a sigmoid, the log-odds equal its
    pre-activation, so the derivative is computed by backpropagating from
    there (skipping the output nonlinearity). Shape: (n_obs, n_features).
    """
    from .mlp import forward_batch

    X = np.atleast_2d(np.asarray(X, dtype=float))
    _, activations = forward_batch(net, X)
    n = X.shape[0]
    # d(z_out)/d(a_last_hidden), broadcast per observation
    g = np.broadcast_to(net.weights[-1][:, 0], (n, net.weights[-1].shape[0])).copy()
    for k in range(len(net.weights) - 2, -1, -1):
        a = activations[k + 1]
        g = (g * a * (1.0 - a)) @ net.weights[k].T
    return g
