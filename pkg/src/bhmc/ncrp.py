"""Path proposals and path densities under the nested CRP."""

from __future__ import annotations

from dataclasses import dataclass
from math import log
from typing import List, Optional, Sequence

import numpy as np

from .errors import HierarchyError
from .hierarchy import NEW, Hierarchy
from .stochastic import Rng


@dataclass
class PathProposal:
    """L decisions (child id or ``NEW``) and their log probability under the nCRP."""

    decisions: List[Optional[int]]
    log_q: float


def crp_predictive(child_counts: Sequence[int], alpha: float) -> np.ndarray:
    """Seat probabilities: one entry per existing child, the new child last."""
    counts = np.asarray(child_counts, dtype=float)
    probs = np.append(counts, alpha)
    return probs / (counts.sum() + alpha)


def sample_path(h: Hierarchy, alpha: float, rng: Rng) -> PathProposal:
    """Draw L sequential CRP decisions from the root without touching ``h``.

    Once a new child is opened every deeper step is new with probability one.
    """
    decisions: List[Optional[int]] = []
    log_q = 0.0
    node = h.root_node
    for _ in range(h.levels):
        if node is None or not node.children:
            decisions.append(NEW)
            node = None
            continue
        children = node.children
        counts = [h.nodes[c].n_thru for c in children]
        total = node.n_thru + alpha
        target = rng.random() * total
        acc = 0.0
        chosen = NEW
        for c, n in zip(children, counts):
            acc += n
            if target < acc:
                chosen = c
                break
        if chosen is NEW:
            log_q += log(alpha) - log(total)
            node = None
        else:
            log_q += log(h.nodes[chosen].n_thru) - log(total)
            node = h.nodes[chosen]
        decisions.append(chosen)
    return PathProposal(decisions, log_q)


def path_log_density(h: Hierarchy, decisions: Sequence[Optional[int]], alpha: float) -> float:
    """log nCRP probability of ``decisions`` against the counts in ``h``.

    Ids absent from ``h`` (for instance nodes pruned when the path was
    detached) count as the new-child branch.
    """
    if len(decisions) != h.levels:
        raise HierarchyError(f"expected {h.levels} decisions, got {len(decisions)}")
    log_q = 0.0
    node = h.root_node
    for d in decisions:
        if node is None:
            if d is not NEW and d in h.nodes:
                raise HierarchyError(f"node {d} cannot follow a newly opened node")
            continue
        total = node.n_thru + alpha
        if d is NEW or d not in h.nodes:
            log_q += log(alpha) - log(total)
            node = None
        else:
            child = h.nodes[d]
            if child.parent != node.id:
                raise HierarchyError(f"node {d} is not a child of node {node.id}")
            log_q += log(child.n_thru) - log(total)
            node = child
    return log_q
