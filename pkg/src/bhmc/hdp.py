"""
Node mixing proportions linked by a multilevel HDP.

Each node's weights are a DP(gamma, parent) draw over the shared component
book; the root is a truncated GEM(gamma0).  Posterior redraws go top-down so
that each child conditions on its parent's fresh weights.
"""

from __future__ import annotations

import numpy as np

from .errors import HierarchyError
from .hierarchy import Hierarchy, topdown_order
from .stochastic import (Rng, StickWeights, dp_child_weights, log_dirichlet,
                         sample_beta)


def init_node_weights(h: Hierarchy, node: int, gamma: float, rng: Rng):
    nd = h.nodes[node]
    if nd.parent is None:
        raise HierarchyError("the root is initialised by stick-breaking, not from a parent")
    parent = h.nodes[nd.parent].mixing
    if parent is None:
        raise HierarchyError(f"parent of node {node} has no mixing weights yet")
    nd.mixing = dp_child_weights(parent, gamma, rng)


def init_path_weights(h: Hierarchy, path, gamma: float, rng: Rng):
    """Fill in weights for the nodes on ``path`` that were just created."""
    for z in path[1:]:
        if h.nodes[z].mixing is None:
            init_node_weights(h, z, gamma, rng)


def extend_for_new_component(h: Hierarchy, gamma0: float, gamma: float, rng: Rng,
                             root_fraction: float | None = None):
    """One more stick-breaking step at every node for a newly created component.

    The root breaks u ~ Beta(1, gamma0) off its remainder; every other node
    breaks u ~ Beta(gamma * parent_new, gamma * parent_remainder) off its own.
    """
    h.add_component()
    for z in topdown_order(h):
        nd = h.nodes[z]
        mix = nd.mixing
        if nd.parent is None:
            u = root_fraction if root_fraction is not None else sample_beta(1.0, gamma0, rng)
        else:
            pmix = h.nodes[nd.parent].mixing
            a = gamma * pmix.weights[-1]
            b = gamma * pmix.remainder
            u = 0.0 if a == 0 and b == 0 else sample_beta(a, b, rng)
        mix.weights = np.append(mix.weights, mix.remainder * u)
        mix.remainder = mix.remainder * (1.0 - u)


def _stick_from_log(logw: np.ndarray) -> StickWeights:
    w = np.exp(logw)
    return StickWeights(w[:-1], float(w[-1]))


def drop_empty_components(state) -> np.ndarray:
    """Remove components no observation uses; fold their weight into each remainder.

    Returns the old-index -> new-index table (-1 for removed components) and
    remaps ``state.assignments`` accordingly.
    """
    h = state.tree
    K = h.n_components
    used = h.root_node.comp_counts > 0
    remap = np.full(K, -1, dtype=np.int64)
    remap[used] = np.arange(int(used.sum()))
    if used.all():
        return remap
    for nd in h.nodes.values():
        mix = nd.mixing
        mix.remainder = mix.remainder + float(mix.weights[~used].sum())
        mix.weights = mix.weights[used]
    h.keep_components(used)
    state.means = state.means[used]
    a = state.assignments
    assigned = a >= 0
    a[assigned] = remap[a[assigned]]
    state.on_components_changed()
    return remap


def resample_all_weights(state, rng: Rng):
    """Posterior redraw of every node's weights given the component counts.

    Root: Dir(N_1, ..., N_K, gamma0) (finite mode: Dir(N_k + gamma0 / K)).
    Child of z: Dir(N_k + gamma * b_zk for each k, gamma * b_z*).
    """
    hp = state.hp
    h = state.tree
    if hp.finite_k is None:
        drop_empty_components(state)
    root = h.root_node
    if hp.finite_k is None:
        params = np.append(root.comp_counts.astype(float), hp.gamma0)
    else:
        params = np.append(root.comp_counts + hp.gamma0 / hp.finite_k, 0.0)
    root.mixing = _stick_from_log(log_dirichlet(params, rng))
    for z in topdown_order(h)[1:]:
        nd = h.nodes[z]
        pmix = h.nodes[nd.parent].mixing
        params = np.append(nd.comp_counts + hp.gamma * pmix.weights, hp.gamma * pmix.remainder)
        nd.mixing = _stick_from_log(log_dirichlet(params, rng))
