"""
The BHMC model: hyperparameters, sampler state, the generative process and
the densities used for scoring.

Components are Gaussians with known isotropic covariance ``sigma2 * I`` and
a diagonal Gaussian base measure ``N(mu0, diag(sigma0_diag))`` on their means.
Component indices are 0-based internally.
"""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field
from math import lgamma, log, pi
from typing import List, Optional, Sequence

import numpy as np

from .errors import HierarchyError
from .hdp import extend_for_new_component, init_path_weights
from .hierarchy import Hierarchy, add_component_counts, attach_path, tree_log_prior
from .ncrp import sample_path
from .stochastic import (Rng, StickWeights, gem_stick_breaking, sample_categorical,
                         sample_dirichlet, sample_gaussian_diag)

LOG_2PI = log(2.0 * pi)
# log of the smallest positive normal double; floor for weights that underflowed
LOG_TINY = float(np.log(np.finfo(float).tiny))


@dataclass
class Hyperparams:
    alpha: float = 0.4
    gamma0: float = 1.0
    gamma: float = 0.5
    sigma2: float = 1.0
    levels: int = 4
    mu0: Optional[List[float]] = None
    sigma0_diag: Optional[List[float]] = None
    epsilon: float = 1e-3
    seed: int = 0
    finite_k: Optional[int] = None

    def __post_init__(self):
        for name in ("alpha", "gamma0", "gamma", "sigma2"):
            v = getattr(self, name)
            if not (v > 0 and np.isfinite(v)):
                raise ValueError(f"{name} must be a positive finite number, got {v}")
        if int(self.levels) != self.levels or self.levels < 1:
            raise ValueError(f"levels must be an integer >= 1, got {self.levels}")
        self.levels = int(self.levels)
        if not 0 < self.epsilon <= 1:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if self.finite_k is not None and self.finite_k < 1:
            raise ValueError(f"finite_k must be >= 1, got {self.finite_k}")
        if self.sigma0_diag is not None and any(v <= 0 for v in self.sigma0_diag):
            raise ValueError("sigma0_diag entries must be positive")

    def base_mean(self, dim: int) -> np.ndarray:
        if self.mu0 is None:
            return np.zeros(dim)
        mu0 = np.asarray(self.mu0, dtype=float)
        if mu0.shape != (dim,):
            raise ValueError(f"mu0 has length {len(mu0)}, data has dimension {dim}")
        return mu0

    def base_var(self, dim: int) -> np.ndarray:
        if self.sigma0_diag is None:
            return np.ones(dim)
        s0 = np.asarray(self.sigma0_diag, dtype=float)
        if s0.shape != (dim,):
            raise ValueError(f"sigma0_diag has length {len(s0)}, data has dimension {dim}")
        return s0

    def to_dict(self) -> dict:
        return asdict(self)


def component_log_densities(X: np.ndarray, means: np.ndarray, sigma2: float) -> np.ndarray:
    """Matrix of log N(x_n; mean_k, sigma2 I), shape (N, K)."""
    X = np.atleast_2d(X)
    D = X.shape[1]
    if len(means) == 0:
        return np.zeros((X.shape[0], 0))
    sq = ((X[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
    return -0.5 * (D * (LOG_2PI + log(sigma2)) + sq / sigma2)


def component_log_density(x, k: int, means: np.ndarray, hp: Hyperparams) -> float:
    if not 0 <= k < len(means):
        raise IndexError(f"component {k} out of range for K={len(means)}")
    x = np.asarray(x, dtype=float)
    return float(component_log_densities(x[None, :], means[k:k + 1], hp.sigma2)[0, 0])


def new_component_log_densities(X: np.ndarray, hp: Hyperparams) -> np.ndarray:
    """log f*(x_n) = log N(x_n; mu0, Sigma0 + sigma2 I) for each row."""
    X = np.atleast_2d(X)
    D = X.shape[1]
    var = hp.base_var(D) + hp.sigma2
    diff = X - hp.base_mean(D)
    return -0.5 * (D * LOG_2PI + np.log(var).sum() + (diff ** 2 / var).sum(axis=1))


def new_component_log_density(x, hp: Hyperparams) -> float:
    x = np.asarray(x, dtype=float)
    return float(new_component_log_densities(x[None, :], hp)[0])


def mixture_log_likelihood(mixing: StickWeights, comp_ll: np.ndarray, new_ll: float) -> float:
    """log( sum_k b_k f_k + b* f* ) from per-component log densities."""
    with np.errstate(divide="ignore"):
        terms = np.append(np.log(mixing.weights) + comp_ll, log(mixing.remainder) + new_ll
                          if mixing.remainder > 0 else -np.inf)
    return float(np.logaddexp.reduce(terms))


def leaf_log_likelihood(x, leaf: int, h: Hierarchy, means: np.ndarray, hp: Hyperparams) -> float:
    nd = h.nodes[leaf]
    if nd.depth != h.levels:
        raise HierarchyError(f"node {leaf} is at depth {nd.depth}, not a leaf")
    x = np.asarray(x, dtype=float)
    comp_ll = component_log_densities(x[None, :], means, hp.sigma2)[0]
    return mixture_log_likelihood(nd.mixing, comp_ll, new_component_log_density(x, hp))


class SamplerState:
    """Everything one chain mutates: tree, component means, paths and labels.

    ``comp_ll`` caches log f(x_n; theta_k) for all n, k and ``new_ll`` caches
    log f*(x_n); both are refreshed whenever the means, K or sigma2 change.
    """

    def __init__(self, X: np.ndarray, hp: Hyperparams, tree: Hierarchy, means: np.ndarray,
                 paths: Optional[List[List[int]]] = None, assignments: Optional[np.ndarray] = None):
        self.X = np.asarray(X, dtype=float)
        self.hp = hp
        self.tree = tree
        self.means = np.asarray(means, dtype=float).reshape(-1, self.X.shape[1])
        n = len(self.X)
        self.paths: List[Optional[List[int]]] = paths if paths is not None else [None] * n
        self.assignments = (np.asarray(assignments, dtype=np.int64) if assignments is not None
                            else np.full(n, -1, dtype=np.int64))
        self.iteration = 0
        self.refresh_likelihoods()

    @property
    def n_obs(self) -> int:
        return len(self.X)

    @property
    def n_components(self) -> int:
        return len(self.means)

    def refresh_likelihoods(self):
        self.comp_ll = component_log_densities(self.X, self.means, self.hp.sigma2)
        self.new_ll = new_component_log_densities(self.X, self.hp)

    def on_components_changed(self):
        self.comp_ll = component_log_densities(self.X, self.means, self.hp.sigma2)

    def add_component(self, mean: np.ndarray, rng: Rng, root_fraction: float | None = None):
        """Append a component to the book and extend every node's sticks."""
        self.means = np.vstack([self.means, np.asarray(mean, dtype=float)[None, :]])
        extend_for_new_component(self.tree, self.hp.gamma0, self.hp.gamma, rng, root_fraction)
        self.comp_ll = np.hstack([self.comp_ll, component_log_densities(
            self.X, self.means[-1:], self.hp.sigma2)])

    def observation_log_likelihood(self, n: int, leaf: int) -> float:
        """log p(x_n | leaf weights, theta) with the component summed out."""
        return mixture_log_likelihood(self.tree.nodes[leaf].mixing, self.comp_ll[n], float(self.new_ll[n]))

    def copy(self) -> "SamplerState":
        return copy.deepcopy(self)


def _path_component_draw(state: SamplerState, n: int, rng: Rng) -> int:
    """Draw c_n from the leaf's weights (prior draw, used by the generative process)."""
    leaf = state.tree.nodes[state.paths[n][-1]].mixing
    idx = sample_categorical(leaf.as_vector(), rng)
    return idx


@dataclass
class GeneratedData:
    X: np.ndarray
    state: SamplerState = field(repr=False)

    @property
    def tree(self) -> Hierarchy:
        return self.state.tree

    @property
    def paths(self):
        return self.state.paths

    @property
    def assignments(self) -> np.ndarray:
        return self.state.assignments

    @property
    def means(self) -> np.ndarray:
        return self.state.means


def init_root(hp: Hyperparams, rng: Rng) -> StickWeights:
    if hp.finite_k is None:
        return gem_stick_breaking(hp.gamma0, hp.epsilon, rng)
    w = sample_dirichlet(np.full(hp.finite_k, hp.gamma0 / hp.finite_k), rng)
    return StickWeights(w, 0.0)


def generate(n_obs: int, hp: Hyperparams, rng: Rng, dim: int = 2) -> GeneratedData:
    """Run the generative process for ``n_obs`` observations.

    Infinite mode (``hp.finite_k is None``): truncated GEM root, and landing
    in a leaf's remainder creates a new component.  Finite mode: Dirichlet
    root over ``finite_k`` components and no remainder anywhere.
    """
    if n_obs < 1:
        raise ValueError(f"n_obs must be >= 1, got {n_obs}")
    if hp.mu0 is not None:
        dim = len(hp.mu0)
    mu0, var0 = hp.base_mean(dim), hp.base_var(dim)
    root_mix = init_root(hp, rng)
    K = len(root_mix)
    means = np.array([sample_gaussian_diag(mu0, var0, rng) for _ in range(K)]).reshape(K, dim)
    tree = Hierarchy(hp.levels, K)
    tree.root_node.mixing = root_mix
    state = SamplerState(np.zeros((n_obs, dim)), hp, tree, means)
    noise = np.full(dim, hp.sigma2)
    for n in range(n_obs):
        prop = sample_path(tree, hp.alpha, rng)
        path = attach_path(tree, prop.decisions)
        init_path_weights(tree, path, hp.gamma, rng)
        state.paths[n] = path
        k = _path_component_draw(state, n, rng)
        if k == state.n_components:
            state.add_component(sample_gaussian_diag(mu0, var0, rng), rng)
        add_component_counts(tree, path, k)
        state.assignments[n] = k
        state.X[n] = sample_gaussian_diag(state.means[k], noise, rng)
    state.refresh_likelihoods()
    return GeneratedData(state.X, state)


def complete_data_log_likelihood(state: SamplerState) -> float:
    """log p(X, c, V | B, theta): sum of log b_{leaf,c} + log f(x; theta_c), plus log p(V | alpha)."""
    a = state.assignments
    if np.any(a < 0):
        raise ValueError("complete-data likelihood needs every observation assigned")
    total = 0.0
    nodes = state.tree.nodes
    for n in range(state.n_obs):
        k = a[n]
        w = nodes[state.paths[n][-1]].mixing.weights[k]
        total += (log(w) if w > 0 else -np.inf) + state.comp_ll[n, k]
    return float(total + tree_log_prior(state.tree, state.hp.alpha))


def _dirichlet_logpdf(x: np.ndarray, a: np.ndarray) -> float:
    """Dirichlet log density over the coordinates with positive parameter."""
    pos = a > 0
    ap = a[pos]
    with np.errstate(divide="ignore"):
        lx = np.maximum(np.log(x[pos]), LOG_TINY)
    return float(lgamma(ap.sum()) - sum(lgamma(v) for v in ap) + ((ap - 1.0) * lx).sum())


def mixing_log_prior(state: SamplerState, gamma0: float | None = None, gamma: float | None = None) -> float:
    """log p(B | V, gamma0, gamma).

    Root: GEM(gamma0) stick density of the K instantiated sticks (only
    K log gamma0 + (gamma0 - 1) log b* depends on gamma0), or Dir(gamma0 / K)
    in finite mode.  Every other node: Dir(gamma * parent weights).
    """
    hp = state.hp
    gamma0 = hp.gamma0 if gamma0 is None else gamma0
    gamma = hp.gamma if gamma is None else gamma
    nodes = state.tree.nodes
    root = state.tree.root_node.mixing
    if hp.finite_k is None:
        w = root.weights
        rem_before = 1.0 - np.concatenate(([0.0], np.cumsum(w)[:-1]))
        rem_before = np.maximum(rem_before, np.finfo(float).tiny)
        total = (len(w) * log(gamma0) + (gamma0 - 1.0) * max(log(root.remainder) if root.remainder > 0
                                                           else LOG_TINY, LOG_TINY)
                 - float(np.log(rem_before).sum()))
    else:
        total = _dirichlet_logpdf(root.weights, np.full(len(root.weights), gamma0 / hp.finite_k))
    for nd in nodes.values():
        if nd.parent is None:
            continue
        pmix = nodes[nd.parent].mixing
        total += _dirichlet_logpdf(nd.mixing.as_vector(), gamma * pmix.as_vector())
    return total
