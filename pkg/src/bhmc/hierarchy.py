"""
The tree of mixing nodes and its count bookkeeping.

Every observation owns a root-to-leaf path of length ``levels + 1``.  Nodes
carry the number of paths through them (``n_thru``) and per-component counts
for the observations in their subtree.  Empty nodes are pruned as soon as the
last path leaves them, and node ids are never reused.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from math import lgamma, log
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import HierarchyError
from .stochastic import StickWeights

NEW = None  # path decision meaning "open a new child here"


class Node:
    __slots__ = ("id", "parent", "children", "depth", "n_thru", "comp_counts", "mixing")

    def __init__(self, id: int, parent: Optional[int], depth: int, n_components: int):
        self.id = id
        self.parent = parent
        self.children: List[int] = []
        self.depth = depth
        self.n_thru = 0
        self.comp_counts = np.zeros(n_components, dtype=np.int64)
        self.mixing: Optional[StickWeights] = None

    def __repr__(self):
        return (f"Node(id={self.id}, parent={self.parent}, depth={self.depth}, "
                f"n_thru={self.n_thru}, children={self.children})")


@dataclass
class PrunedNode:
    """A node removed by :func:`detach_path`, kept so a rejected move can restore it."""

    node: Node
    position: int  # index in the parent's child list


class Hierarchy:
    def __init__(self, levels: int, n_components: int = 0):
        if levels < 1:
            raise ValueError(f"levels must be >= 1, got {levels}")
        self.levels = levels
        self.n_components = n_components
        self.nodes: Dict[int, Node] = {}
        self._next_id = 0
        self.root = self._new_node(None, 0).id

    def _new_node(self, parent: Optional[int], depth: int) -> Node:
        node = Node(self._next_id, parent, depth, self.n_components)
        self._next_id += 1
        self.nodes[node.id] = node
        return node

    def __len__(self):
        return len(self.nodes)

    def __getitem__(self, node_id: int) -> Node:
        return self.nodes[node_id]

    def __contains__(self, node_id) -> bool:
        return node_id in self.nodes

    @property
    def root_node(self) -> Node:
        return self.nodes[self.root]

    def leaves(self) -> List[int]:
        return [z for z, nd in self.nodes.items() if nd.depth == self.levels]

    def add_component(self):
        """Grow every node's count vector by one zero entry."""
        self.n_components += 1
        for nd in self.nodes.values():
            nd.comp_counts = np.append(nd.comp_counts, 0)

    def keep_components(self, keep: np.ndarray):
        """Restrict every count vector to the components flagged in ``keep``."""
        keep = np.asarray(keep, dtype=bool)
        self.n_components = int(keep.sum())
        for nd in self.nodes.values():
            nd.comp_counts = nd.comp_counts[keep]


def attach_path(h: Hierarchy, decisions: Sequence[Optional[int]]) -> List[int]:
    """Add one observation along ``decisions`` and return the realised path.

    Each decision is an existing child id of the previous node or ``NEW``.
    Freshly created nodes get ``mixing = None``; the caller fills them in.
    """
    if len(decisions) != h.levels:
        raise HierarchyError(f"expected {h.levels} decisions, got {len(decisions)}")
    # validate before mutating anything
    cur = h.root
    fresh = False
    for d in decisions:
        if d is NEW:
            fresh = True
        elif fresh or d not in h.nodes or h.nodes[d].parent != cur:
            raise HierarchyError(f"node {d} is not a live child of node {cur}")
        else:
            cur = d
    path = [h.root]
    cur = h.root_node
    cur.n_thru += 1
    for d in decisions:
        if d is NEW:
            child = h._new_node(cur.id, cur.depth + 1)
            cur.children.append(child.id)
        else:
            child = h.nodes[d]
        child.n_thru += 1
        path.append(child.id)
        cur = child
    return path


def detach_path(h: Hierarchy, path: Sequence[int], component: Optional[int] = None) -> List[PrunedNode]:
    """Remove one observation from ``path``; prune nodes that become empty.

    Returns the pruned nodes (deepest first) with their positions so that
    :func:`reattach_path` can undo the operation exactly.
    """
    for z in path:
        nd = h.nodes.get(z)
        if nd is None:
            raise HierarchyError(f"path references missing node {z}")
        if nd.n_thru < 1:
            raise HierarchyError(f"n_thru would go negative at node {z}")
        if component is not None and nd.comp_counts[component] < 1:
            raise HierarchyError(f"component count {component} would go negative at node {z}")
    for z in path:
        nd = h.nodes[z]
        nd.n_thru -= 1
        if component is not None:
            nd.comp_counts[component] -= 1
    pruned = []
    for z in reversed(path[1:]):
        nd = h.nodes[z]
        if nd.n_thru > 0:
            break
        siblings = h.nodes[nd.parent].children
        pos = siblings.index(z)
        del siblings[pos]
        del h.nodes[z]
        pruned.append(PrunedNode(nd, pos))
    return pruned


def reattach_path(h: Hierarchy, path: Sequence[int], pruned: Sequence[PrunedNode],
                  component: Optional[int] = None):
    """Inverse of :func:`detach_path`: reinstate pruned nodes and counts."""
    for p in reversed(pruned):
        h.nodes[p.node.id] = p.node
        h.nodes[p.node.parent].children.insert(p.position, p.node.id)
    for z in path:
        nd = h.nodes[z]
        nd.n_thru += 1
        if component is not None:
            nd.comp_counts[component] += 1


def add_component_counts(h: Hierarchy, path: Sequence[int], component: int, delta: int = 1):
    for z in path:
        nd = h.nodes[z]
        nd.comp_counts[component] += delta
        if nd.comp_counts[component] < 0:
            raise HierarchyError(f"component count {component} went negative at node {z}")


def tree_log_prior(h: Hierarchy, alpha: float) -> float:
    """log p(V | alpha) of the current tree under the nested CRP.

    Sum over internal nodes of log Gamma(alpha) + m_z log alpha
    - log Gamma(N_z + alpha), plus log Gamma(N_z') over every edge.
    """
    lg_alpha = lgamma(alpha)
    log_alpha = log(alpha)
    total = 0.0
    for nd in h.nodes.values():
        if not nd.children:
            continue
        total += lg_alpha + len(nd.children) * log_alpha - lgamma(nd.n_thru + alpha)
        for c in nd.children:
            total += lgamma(h.nodes[c].n_thru)
    return total


def topdown_order(h: Hierarchy) -> List[int]:
    """Breadth-first node order; every parent precedes its children."""
    order = []
    queue = deque([h.root])
    while queue:
        z = queue.popleft()
        order.append(z)
        queue.extend(h.nodes[z].children)
    return order


def recount(h: Hierarchy, paths: Sequence[Sequence[int]], assignments: Optional[Sequence[int]] = None):
    """Recompute ``(n_thru, comp_counts)`` per node from scratch.

    Returns two dicts keyed by node id; used to audit the incremental counts.
    """
    n_thru = {z: 0 for z in h.nodes}
    comp = {z: np.zeros(h.n_components, dtype=np.int64) for z in h.nodes}
    for i, path in enumerate(paths):
        for z in path:
            n_thru[z] += 1
            if assignments is not None and assignments[i] >= 0:
                comp[z][assignments[i]] += 1
    return n_thru, comp


def check_consistency(h: Hierarchy, paths, assignments=None):
    """Raise :class:`HierarchyError` if any structural or count invariant fails."""
    n_thru, comp = recount(h, paths, assignments)
    for z, nd in h.nodes.items():
        if nd.n_thru != n_thru[z]:
            raise HierarchyError(f"node {z}: n_thru {nd.n_thru} != recount {n_thru[z]}")
        if assignments is not None and not np.array_equal(nd.comp_counts, comp[z]):
            raise HierarchyError(f"node {z}: comp_counts {nd.comp_counts} != recount {comp[z]}")
        if z != h.root and nd.n_thru == 0:
            raise HierarchyError(f"empty non-root node {z}")
        for c in nd.children:
            if h.nodes[c].parent != z or h.nodes[c].depth != nd.depth + 1:
                raise HierarchyError(f"broken link {z} -> {c}")
        if nd.children and nd.depth < h.levels:
            if sum(h.nodes[c].n_thru for c in nd.children) != nd.n_thru:
                raise HierarchyError(f"node {z}: children n_thru do not add up")
        if nd.depth < h.levels and not nd.children and z != h.root:
            raise HierarchyError(f"internal node {z} at depth {nd.depth} has no children")
    for path in paths:
        if len(path) != h.levels + 1 or h.nodes[path[-1]].depth != h.levels:
            raise HierarchyError(f"path {path} does not end at depth {h.levels}")
