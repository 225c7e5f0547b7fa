"""
Level-wise label extraction and external clustering metrics.

Level 1 is the root.  A path shorter than the requested level is extended by
repeating its last node, so every observation gets a label at every level.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, log, sqrt
from typing import Hashable, List, Sequence

import numpy as np


def level_labels(paths: Sequence[Sequence[Hashable]], level: int, max_level: int) -> List[Hashable]:
    if not 1 <= level <= max_level:
        raise ValueError(f"level must lie in 1..{max_level}, got {level}")
    labels = []
    for i, p in enumerate(paths):
        if len(p) == 0:
            raise ValueError(f"observation {i} has an empty path")
        labels.append(p[level - 1] if len(p) >= level else p[-1])
    return labels


def contingency(pred, truth) -> np.ndarray:
    """Counts table with predicted clusters as rows and true classes as columns."""
    if len(pred) != len(truth):
        raise ValueError(f"label lengths differ: {len(pred)} vs {len(truth)}")
    _, pi = np.unique(np.asarray(pred, dtype=object).astype(str), return_inverse=True)
    _, ti = np.unique(np.asarray(truth, dtype=object).astype(str), return_inverse=True)
    table = np.zeros((pi.max() + 1, ti.max() + 1), dtype=np.int64)
    np.add.at(table, (pi, ti), 1)
    return table


def purity(pred, truth) -> float:
    if len(pred) == 0:
        raise ValueError("purity needs at least one observation")
    table = contingency(pred, truth)
    return float(table.max(axis=1).sum() / table.sum())


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def nmi(pred, truth) -> float:
    """Mutual information over the geometric mean of the two entropies.

    Both labelings constant gives 1; exactly one constant gives 0.
    """
    table = contingency(pred, truth)
    n = int(table.sum())
    h_pred = _entropy(table.sum(axis=1), n)
    h_true = _entropy(table.sum(axis=0), n)
    if h_pred == 0 and h_true == 0:
        return 1.0
    if h_pred == 0 or h_true == 0:
        return 0.0
    rows = table.sum(axis=1, keepdims=True)
    cols = table.sum(axis=0, keepdims=True)
    nz = table > 0
    mi = float((table[nz] / n * np.log(n * table[nz] / (rows @ cols)[nz])).sum())
    return min(max(mi / sqrt(h_pred * h_true), 0.0), 1.0)


def ari(pred, truth) -> float:
    """Adjusted Rand index from the pair-counting contingency form.

    Evaluated in exact rational arithmetic, so rational fixtures come out exact.
    """
    table = contingency(pred, truth)
    n = int(table.sum())
    if n < 2:
        raise ValueError("ARI needs at least two observations")
    index = sum(comb(int(v), 2) for v in table.ravel())
    sum_rows = sum(comb(int(v), 2) for v in table.sum(axis=1))
    sum_cols = sum(comb(int(v), 2) for v in table.sum(axis=0))
    expected = Fraction(sum_rows * sum_cols, comb(n, 2))
    max_index = Fraction(sum_rows + sum_cols, 2)
    if max_index == expected:
        # both partitions trivial in the same way; agreement is perfect
        return 1.0
    return float((index - expected) / (max_index - expected))


def f_measure(pred, truth) -> float:
    """Class-weighted best-match F1: sum_i (n_i / N) max_j F1(class i, cluster j).

    F1 of class i and cluster j reduces to 2 n_ij / (n_i + n_j); the sum is
    kept rational until the end.
    """
    table = contingency(pred, truth)
    n = int(table.sum())
    cluster_sizes = table.sum(axis=1)
    total = Fraction(0)
    for i, size in enumerate(table.sum(axis=0)):
        best = max(Fraction(2 * int(o), int(size + c)) for o, c in zip(table[:, i], cluster_sizes))
        total += Fraction(int(size), n) * best
    return float(total)


@dataclass
class LevelReport:
    levels: List[int] = field(default_factory=list)
    purity: List[float] = field(default_factory=list)
    nmi: List[float] = field(default_factory=list)
    ari: List[float] = field(default_factory=list)
    f_measure: List[float] = field(default_factory=list)

    def rows(self):
        return [dict(level=l, purity=p, nmi=m, ari=a, f_measure=f)
                for l, p, m, a, f in zip(self.levels, self.purity, self.nmi, self.ari, self.f_measure)]


def level_report(pred_paths, truth_paths, max_level: int) -> LevelReport:
    if len(pred_paths) != len(truth_paths):
        raise ValueError(f"observation counts differ: {len(pred_paths)} vs {len(truth_paths)}")
    report = LevelReport()
    for level in range(1, max_level + 1):
        p = level_labels(pred_paths, level, max_level)
        t = level_labels(truth_paths, level, max_level)
        report.levels.append(level)
        report.purity.append(purity(p, t))
        report.nmi.append(nmi(p, t))
        report.ari.append(ari(p, t) if len(p) >= 2 else 1.0)
        report.f_measure.append(f_measure(p, t))
    return report
