import numpy as np
import pytest

from bhmc.errors import HierarchyError
from bhmc.hdp import (drop_empty_components, extend_for_new_component, init_node_weights,
                      resample_all_weights)
from bhmc.hierarchy import NEW, Hierarchy, attach_path, topdown_order
from bhmc.model import Hyperparams, SamplerState
from bhmc.stochastic import StickWeights, make_rng
from builders import make_state, set_weights


def simplex_ok(h):
    for nd in h.nodes.values():
        m = nd.mixing
        assert np.all(m.weights >= 0) and m.remainder >= 0
        assert abs(m.total() - 1) <= 1e-12
        assert len(m) == h.n_components


def test_init_node_weights_degenerate_parents():
    h = Hierarchy(1, 1)
    h.root_node.mixing = StickWeights([1.0], 0.0)
    leaf = attach_path(h, [NEW])[1]
    init_node_weights(h, leaf, 0.5, make_rng(0))
    assert h[leaf].mixing.weights.tolist() == [1.0] and h[leaf].mixing.remainder == 0.0

    h = Hierarchy(1, 0)
    h.root_node.mixing = StickWeights([], 1.0)
    leaf = attach_path(h, [NEW])[1]
    init_node_weights(h, leaf, 0.5, make_rng(0))
    assert len(h[leaf].mixing) == 0 and h[leaf].mixing.remainder == 1.0


def test_init_node_weights_errors():
    h = Hierarchy(2, 0)
    with pytest.raises(HierarchyError):
        init_node_weights(h, h.root, 1.0, make_rng(0))
    path = attach_path(h, [NEW, NEW])
    with pytest.raises(HierarchyError):
        init_node_weights(h, path[2], 1.0, make_rng(0))  # parent not initialised


def test_init_node_weights_mean_is_parent():
    h = Hierarchy(1, 2)
    parent = StickWeights([0.5, 0.2], 0.3)
    h.root_node.mixing = parent
    leaf = attach_path(h, [NEW])[1]
    rng = make_rng(1)
    draws = []
    for _ in range(100_000):
        init_node_weights(h, leaf, 1.5, rng)
        draws.append(h[leaf].mixing.as_vector())
    draws = np.array(draws)
    se = draws.std(axis=0, ddof=1) / np.sqrt(len(draws))
    assert np.all(np.abs(draws.mean(axis=0) - parent.as_vector()) <= 3 * se)


def two_leaf_state(hp, labels=(0, 0, 1)):
    return make_state([0.0, 0.1, 0.2], hp, leaf_of=[0, 0, 1], labels=list(labels),
                      means=[[0.0], [1.0]], root=StickWeights([0.5, 0.3], 0.2))


def test_extend_root_stick_arithmetic():
    hp = Hyperparams(levels=1)
    st = two_leaf_state(hp)
    extend_for_new_component(st.tree, hp.gamma0, hp.gamma, make_rng(0), root_fraction=0.5)
    root = st.tree.root_node.mixing
    assert root.weights[-1] == pytest.approx(0.1, abs=1e-15)
    assert root.remainder == pytest.approx(0.1, abs=1e-15)


def test_extend_zero_parent_weight_gives_zero_child_weight():
    hp = Hyperparams(levels=2)
    st = make_state([0.0], hp, [0], [0], [[0.0]], root=StickWeights([1.0], 0.0))
    set_weights(st, st.paths[0][1], [0.6], 0.4)
    extend_for_new_component(st.tree, hp.gamma0, hp.gamma, make_rng(0))
    # root remainder 0: its new weight is 0, so every descendant's is 0 as well
    for z in st.paths[0]:
        assert st.tree[z].mixing.weights[-1] == 0.0


def test_extend_preserves_old_weights_and_never_grows_remainder():
    hp = Hyperparams(levels=3)
    rng = make_rng(3)
    st = make_state(np.zeros(6), hp, [0, 0, 1, 2, 2, 3], [0, 1, 0, 1, 1, 0], [[0.0], [1.0]],
                    root=StickWeights([0.4, 0.3], 0.3))
    for _ in range(5):
        before = {z: nd.mixing.copy() for z, nd in st.tree.nodes.items()}
        extend_for_new_component(st.tree, hp.gamma0, hp.gamma, rng)
        simplex_ok(st.tree)
        for z, old in before.items():
            new = st.tree[z].mixing
            assert np.array_equal(new.weights[:-1], old.weights)
            assert new.remainder <= old.remainder


def test_resample_empty_state():
    hp = Hyperparams(levels=1)
    h = Hierarchy(1, 0)
    h.root_node.mixing = StickWeights([], 1.0)
    st = SamplerState(np.zeros((0, 1)), hp, h, np.zeros((0, 1)))
    resample_all_weights(st, make_rng(0))
    assert len(h.root_node.mixing) == 0 and h.root_node.mixing.remainder == 1.0


def test_resample_root_dirichlet_mean():
    hp = Hyperparams(levels=1, gamma0=1.0)
    st = make_state(np.zeros(4), hp, [0, 0, 0, 1], [0, 0, 0, 1], [[0.0], [1.0]])
    rng = make_rng(4)
    draws = []
    for _ in range(100_000):
        resample_all_weights(st, rng)
        draws.append(st.tree.root_node.mixing.as_vector())
    draws = np.array(draws)
    se = draws.std(axis=0, ddof=1) / np.sqrt(len(draws))
    assert np.all(np.abs(draws.mean(axis=0) - [3 / 5, 1 / 5, 1 / 5]) <= 3 * se)


def test_resample_child_conditional_mean():
    # E[child | fresh parent] = (N + gamma * parent) / (n + gamma), so the
    # residual against that target has mean zero
    hp = Hyperparams(levels=1, gamma=0.8, finite_k=2)
    st = make_state(np.zeros(3), hp, [0, 0, 1], [-1, -1, -1], [[0.0], [1.0]])
    empty_leaf = st.paths[2][1]
    busy = make_state(np.zeros(3), hp, [0, 0, 1], [0, 1, 1], [[0.0], [1.0]])
    busy_leaf = busy.paths[0][1]
    rng = make_rng(5)
    res_empty, res_busy = [], []
    for _ in range(10_000):
        for _ in range(10):
            resample_all_weights(st, rng)
            parent = st.tree.root_node.mixing.as_vector()
            res_empty.append(st.tree[empty_leaf].mixing.as_vector() - parent)
            resample_all_weights(busy, rng)
            parent = busy.tree.root_node.mixing.as_vector()
            counts = np.append(busy.tree[busy_leaf].comp_counts, 0)
            target = (counts + hp.gamma * parent) / (counts.sum() + hp.gamma)
            res_busy.append(busy.tree[busy_leaf].mixing.as_vector() - target)
    for res in (np.array(res_empty), np.array(res_busy)):
        se = res.std(axis=0, ddof=1) / np.sqrt(len(res))
        assert np.all(np.abs(res.mean(axis=0)) <= 3 * se + 1e-15)


def test_resample_keeps_counts_and_simplex():
    hp = Hyperparams(levels=2)
    st = make_state(np.zeros(6), hp, [0, 0, 1, 2, 2, 3], [0, 1, 0, 1, 1, 0], [[0.0], [1.0]])
    counts = {z: nd.comp_counts.copy() for z, nd in st.tree.nodes.items()}
    rng = make_rng(6)
    for _ in range(200):
        resample_all_weights(st, rng)
        simplex_ok(st.tree)
    assert all(np.array_equal(st.tree[z].comp_counts, c) for z, c in counts.items())


def test_drop_empty_identity():
    hp = Hyperparams(levels=1)
    st = two_leaf_state(hp)
    before = {z: nd.mixing.copy() for z, nd in st.tree.nodes.items()}
    remap = drop_empty_components(st)
    assert remap.tolist() == [0, 1]
    for z, m in before.items():
        assert np.array_equal(st.tree[z].mixing.weights, m.weights)
        assert st.tree[z].mixing.remainder == m.remainder


def test_drop_empty_folds_mass_and_remaps():
    hp = Hyperparams(levels=2)
    st = make_state([0.0, 1.0, 2.0], hp, [0, 0, 1], [0, 2, 2], [[0.0], [5.0], [1.0]],
                    root=StickWeights([0.3, 0.25, 0.25], 0.2))
    before = {z: nd.mixing.copy() for z, nd in st.tree.nodes.items()}
    remap = drop_empty_components(st)
    assert remap.tolist() == [0, -1, 1]
    assert st.assignments.tolist() == [0, 1, 1]
    assert st.means[:, 0].tolist() == [0.0, 1.0]
    assert st.comp_ll.shape == (3, 2)
    for z, m in before.items():
        new = st.tree[z].mixing
        assert new.remainder == pytest.approx(m.remainder + m.weights[1], abs=1e-15)
        assert np.array_equal(new.weights, m.weights[[0, 2]])
    simplex_ok(st.tree)
    assert st.tree.root_node.comp_counts.tolist() == [1, 2]


def test_resample_finite_mode_keeps_empty_components():
    hp = Hyperparams(levels=1, finite_k=3)
    st = make_state(np.zeros(2), hp, [0, 1], [0, 0], [[0.0], [1.0], [2.0]],
                    root=StickWeights([0.4, 0.3, 0.3], 0.0))
    resample_all_weights(st, make_rng(0))
    assert st.n_components == 3
    for z in topdown_order(st.tree):
        assert st.tree[z].mixing.remainder == 0.0
