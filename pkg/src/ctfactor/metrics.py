"""Structure recovery metrics, invariant to factor (column) relabeling.

An estimated support is compared with a true support by matching columns
one-to-one so that matched supports overlap as much as possible. When the
factor counts differ, the short side is padded with empty columns, so an
unmatched column pays for its full support. The Hamming distance is the
minimized symmetric difference; the F1 score rewards the same overlap on a
0-1 scale. Both are solved exactly: a rectangular assignment solver for
real sizes, and explicit permutation enumeration as a small-size oracle.
"""

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DimensionMismatch, DomainError, TooLarge

__all__ = ["MetricReport", "hamming_distance", "f1_score", "brute_force_metric"]

#: Column-count guard for the brute-force permutation oracle.
BRUTE_FORCE_MAX_COLUMNS = 8


@dataclass(frozen=True)
class MetricReport:
    """Result of comparing an estimated support with a true one.

    ``best_permutation[a]`` is the true-column index matched to estimated
    column ``a``, or None when that column was matched to padding.
    """

    hd: int
    f1: float
    best_permutation: tuple
    d_hat: int
    d_true: int

    def to_json_dict(self):
        return {
            "hd": self.hd,
            "f1": self.f1,
            "best_permutation": [
                None if m is None else int(m) for m in self.best_permutation
            ],
            "d_hat": self.d_hat,
            "d_true": self.d_true,
        }


def _column_indicators(structure):
    cols = np.zeros((structure.p, structure.d), dtype=np.int64)
    for i, j in structure.support:
        cols[i, j] = 1
    return cols


def _compare(est, truth):
    if est.p != truth.p:
        raise DimensionMismatch(
            f"structures cover different variable counts: {est.p} vs {truth.p}"
        )
    est_cols = _column_indicators(est)
    true_cols = _column_indicators(truth)
    est_sizes = est_cols.sum(axis=0)
    true_sizes = true_cols.sum(axis=0)
    total = int(est_sizes.sum() + true_sizes.sum())

    m = max(est.d, truth.d)
    overlap = np.zeros((m, m), dtype=np.int64)
    overlap[: est.d, : truth.d] = est_cols.T @ true_cols
    # maximizing overlap simultaneously minimizes the symmetric difference,
    # since |A| + |B| is fixed across matchings
    rows, cols = linear_sum_assignment(overlap, maximize=True)
    matched = int(overlap[rows, cols].sum())

    hd = total - 2 * matched
    f1 = 0.0 if total == 0 else (2.0 * matched) / total
    mapping = [None] * est.d
    for a, b in zip(rows, cols):
        if a < est.d and b < truth.d:
            mapping[a] = int(b)
    return MetricReport(
        hd=int(hd),
        f1=float(f1),
        best_permutation=tuple(mapping),
        d_hat=est.d,
        d_true=truth.d,
    )


def hamming_distance(est, truth):
    """Minimum symmetric difference between supports over column matchings.

    Returns the full :class:`MetricReport`; the ``hd`` field is the metric.
    """
    return _compare(est, truth)


def f1_score(est, truth):
    """Best-matching F1 between supports (1.0 iff identical up to order)."""
    return _compare(est, truth)


def brute_force_metric(est, truth, which):
    """Oracle value by explicit enumeration of padded column permutations.

    Parameters
    ----------
    which : str
        ``"hd"`` or ``"f1"``.

    Guarded to ``max(d_hat, d_true) <= 8``.
    """
    if which not in ("hd", "f1"):
        raise DomainError(f"which must be 'hd' or 'f1', got {which!r}")
    if est.p != truth.p:
        raise DimensionMismatch(
            f"structures cover different variable counts: {est.p} vs {truth.p}"
        )
    m = max(est.d, truth.d)
    if m > BRUTE_FORCE_MAX_COLUMNS:
        raise TooLarge(
            f"brute-force metric capped at {BRUTE_FORCE_MAX_COLUMNS} columns, got {m}"
        )
    est_sets = list(est.child_sets()) + [frozenset()] * (m - est.d)
    true_sets = list(truth.child_sets()) + [frozenset()] * (m - truth.d)
    best_hd = None
    best_f1 = None
    for perm in itertools.permutations(range(m)):
        inter = 0
        diff = 0
        for a, b in enumerate(perm):
            ca, cb = est_sets[a], true_sets[b]
            common = len(ca & cb)
            inter += common
            diff += len(ca) + len(cb) - 2 * common
        f1 = 0.0 if (2 * inter + diff) == 0 else 2.0 * inter / (2 * inter + diff)
        best_hd = diff if best_hd is None else min(best_hd, diff)
        best_f1 = f1 if best_f1 is None else max(best_f1, f1)
    return best_hd if which == "hd" else best_f1
