"""
Metropolis-Hastings within partially collapsed Gibbs sampling for BHMC.

One sweep visits the observations in shuffled order.  For each one the path
is resampled by an MH step that proposes from the nested CRP and scores the
leaf with the component label summed out; the label is then redrawn given the
(possibly new) leaf.  After the sweep all node weights, the component means
and, optionally, the hyperparameters are updated.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from math import exp, log
from typing import Callable, List, Optional, Tuple

import numpy as np

from .errors import InputError
from .hdp import init_path_weights, resample_all_weights
from .hierarchy import (NEW, Hierarchy, PrunedNode, add_component_counts, attach_path, detach_path,
                        reattach_path, tree_log_prior)
from .model import (Hyperparams, SamplerState, complete_data_log_likelihood, component_log_densities,
                    init_root, mixing_log_prior, mixture_log_likelihood)
from .ncrp import path_log_density, sample_path
from .stochastic import (Rng, dp_child_weights, make_rng, sample_gaussian_diag,
                         sample_log_categorical)

logger = logging.getLogger(__name__)


@dataclass
class Hyperpriors:
    """alpha ~ Ga(shape, rate), gamma0 ~ Ga(shape, rate), gamma ~ U(0, max), sigma2 ~ U(0, max)."""

    alpha_shape: float = 3.0
    alpha_rate: float = 1.0
    gamma0_shape: float = 3.5
    gamma0_rate: float = 1.0
    gamma_max: float = 1.5
    sigma2_max: float = 0.1


@dataclass
class SamplerConfig:
    burn_in: int = 500
    draws: int = 500
    hyper_sampling: bool = False
    hyperpriors: Hyperpriors = field(default_factory=Hyperpriors)
    trace_every: int = 1
    seed: int = 0
    update_components: bool = True

    def __post_init__(self):
        if isinstance(self.hyperpriors, dict):
            self.hyperpriors = Hyperpriors(**self.hyperpriors)
        if self.burn_in < 0:
            raise ValueError(f"burn_in must be >= 0, got {self.burn_in}")
        if self.draws < 1:
            raise ValueError(f"draws must be >= 1, got {self.draws}")
        if self.trace_every < 1:
            raise ValueError(f"trace_every must be >= 1, got {self.trace_every}")


@dataclass
class Trace:
    iteration: List[int] = field(default_factory=list)
    loglik: List[float] = field(default_factory=list)
    n_components: List[int] = field(default_factory=list)
    n_nodes: List[int] = field(default_factory=list)
    path_accepts: List[int] = field(default_factory=list)
    hyper_accept: List[int] = field(default_factory=list)

    def __len__(self):
        return len(self.loglik)

    def record(self, it, loglik, K, nodes, path_accepts, hyper_accept):
        self.iteration.append(it)
        self.loglik.append(loglik)
        self.n_components.append(K)
        self.n_nodes.append(nodes)
        self.path_accepts.append(path_accepts)
        self.hyper_accept.append(int(hyper_accept))


def _single_point_posterior(x: np.ndarray, hp: Hyperparams) -> Tuple[np.ndarray, np.ndarray]:
    D = len(x)
    var0 = hp.base_var(D)
    prec = 1.0 / var0 + 1.0 / hp.sigma2
    return (hp.base_mean(D) / var0 + x / hp.sigma2) / prec, 1.0 / prec


def gibbs_update_assignment(state: SamplerState, n: int, rng: Rng) -> int:
    """Draw c_n given its leaf: existing k with b_k f(x; theta_k), new with b* f*(x).

    A new component gets its mean from the conjugate posterior given x_n
    alone, and every node's sticks are extended by one break.
    """
    h = state.tree
    path = state.paths[n]
    mix = h.nodes[path[-1]].mixing
    with np.errstate(divide="ignore"):
        logits = np.append(np.log(mix.weights) + state.comp_ll[n],
                           log(mix.remainder) + state.new_ll[n] if mix.remainder > 0 else -np.inf)
    k = sample_log_categorical(logits, rng)
    if k == state.n_components:
        mean, var = _single_point_posterior(state.X[n], state.hp)
        state.add_component(sample_gaussian_diag(mean, var, rng), rng)
    add_component_counts(h, path, k)
    state.assignments[n] = k
    return k


class PathMove:
    """A proposed path change for one observation, pending accept or reject.

    Construction performs the cleanup (detaching the old path and label),
    draws the proposal from the nested CRP, attaches it and scores it.
    """

    def __init__(self, state: SamplerState, n: int, rng: Rng):
        self.state = state
        self.n = n
        h = state.tree
        alpha = state.hp.alpha
        self.old_path = state.paths[n]
        k = int(state.assignments[n])

        lp_old = tree_log_prior(h, alpha)
        ll_old = state.observation_log_likelihood(n, self.old_path[-1])
        self.pruned: List[PrunedNode] = detach_path(h, self.old_path, k if k >= 0 else None)
        state.assignments[n] = -1

        # both proposal densities are taken against the same reduced tree
        log_q_rev = path_log_density(h, self.old_path[1:], alpha)
        prop = sample_path(h, alpha, rng)
        self.new_path = attach_path(h, prop.decisions)
        init_path_weights(h, self.new_path, state.hp.gamma, rng)
        state.paths[n] = self.new_path

        lp_new = tree_log_prior(h, alpha)
        ll_new = state.observation_log_likelihood(n, self.new_path[-1])
        self.log_accept = (ll_new + lp_new + log_q_rev) - (ll_old + lp_old + prop.log_q)

    def accept(self):
        pass

    def reject(self):
        h = self.state.tree
        detach_path(h, self.new_path)
        reattach_path(h, self.old_path, self.pruned)
        self.state.paths[self.n] = self.old_path


def mh_update_path(state: SamplerState, n: int, rng: Rng) -> bool:
    """MH path update for observation n followed by the Gibbs label step."""
    move = PathMove(state, n, rng)
    accepted = move.log_accept >= 0 or rng.random() < exp(move.log_accept)
    if accepted:
        move.accept()
    else:
        move.reject()
    gibbs_update_assignment(state, n, rng)
    return accepted


def component_posteriors(state: SamplerState) -> Tuple[np.ndarray, np.ndarray]:
    """Posterior means and diagonal variances of every theta_k given the labels."""
    X = state.X
    D = X.shape[1]
    K = state.n_components
    hp = state.hp
    counts = np.bincount(state.assignments, minlength=K).astype(float)
    sums = np.zeros((K, D))
    np.add.at(sums, state.assignments, X)
    var0 = hp.base_var(D)
    prec = 1.0 / var0[None, :] + counts[:, None] / hp.sigma2
    var = 1.0 / prec
    mean = var * (hp.base_mean(D)[None, :] / var0[None, :] + sums / hp.sigma2)
    return mean, var


def resample_components(state: SamplerState, rng: Rng):
    if np.any(state.assignments < 0):
        raise ValueError("component update needs every observation assigned")
    mean, var = component_posteriors(state)
    state.means = mean + np.sqrt(var) * rng.standard_normal(mean.shape)
    state.on_components_changed()


def hyper_log_acceptance(state: SamplerState, alpha: float, gamma0: float, gamma: float,
                         sigma2: float) -> float:
    """log MH ratio for replacing (alpha, gamma0, gamma, sigma2) with the given values.

    With proposals drawn from the hyperpriors the prior terms cancel, leaving
    the sigma2-dependent data terms, the tree prior in alpha and the mixing
    prior in (gamma0, gamma).
    """
    hp = state.hp
    rows = np.arange(state.n_obs)
    a = state.assignments
    ll_cur = state.comp_ll[rows, a].sum()
    if sigma2 == hp.sigma2:
        ll_new = ll_cur
    else:
        diff = state.X - state.means[a]
        D = state.X.shape[1]
        sq = (diff ** 2).sum(axis=1)
        ll_new = float((-0.5 * (D * (np.log(2 * np.pi) + log(sigma2)) + sq / sigma2)).sum())
    d_tree = tree_log_prior(state.tree, alpha) - tree_log_prior(state.tree, hp.alpha)
    d_mix = mixing_log_prior(state, gamma0, gamma) - mixing_log_prior(state)
    return float(ll_new - ll_cur + d_tree + d_mix)


def propose_hyperparameters(priors: Hyperpriors, rng: Rng) -> dict:
    return dict(
        alpha=rng.gamma(priors.alpha_shape, 1.0 / priors.alpha_rate),
        gamma0=rng.gamma(priors.gamma0_shape, 1.0 / priors.gamma0_rate),
        gamma=rng.uniform(0.0, priors.gamma_max),
        sigma2=rng.uniform(0.0, priors.sigma2_max),
    )


def resample_hyperparameters(state: SamplerState, cfg: SamplerConfig, rng: Rng) -> bool:
    """Independence MH step on (alpha, gamma0, gamma, sigma2) proposing from the hyperpriors."""
    if not cfg.hyper_sampling:
        return False
    prop = propose_hyperparameters(cfg.hyperpriors, rng)
    if min(prop.values()) <= 0:
        return False
    log_a = hyper_log_acceptance(state, **prop)
    if log_a >= 0 or rng.random() < exp(log_a):
        state.hp = dataclasses.replace(state.hp, **{k: float(v) for k, v in prop.items()})
        state.refresh_likelihoods()
        return True
    return False


def initialize_state(X: np.ndarray, hp: Hyperparams, rng: Rng,
                     means: Optional[np.ndarray] = None) -> SamplerState:
    """Root weights by stick-breaking, then one generative pass in data order.

    Paths come from the nested CRP prior; labels from the Gibbs conditional.
    ``means`` fixes the initial component means (its length sets K).  Without
    it a component's mean is drawn from its single-point posterior when the
    component is first chosen; a prior draw up front strands most of them far
    from the data and the chain starts collapsed onto one.
    """
    X = np.asarray(X, dtype=float)
    D = X.shape[1]
    root_mix = init_root(hp, rng)
    K = len(root_mix)
    lazy = np.zeros(K, dtype=bool)
    if means is None:
        # means of components nobody has used yet are still distributed as H,
        # so they score with f* and are drawn when first chosen
        means = np.tile(hp.base_mean(D), (K, 1))
        lazy[:] = True
    else:
        means = np.asarray(means, dtype=float).reshape(-1, D)
        if len(means) != K:
            raise ValueError(f"{len(means)} initial means given for {K} root components")
    tree = Hierarchy(hp.levels, K)
    tree.root_node.mixing = root_mix
    state = SamplerState(X, hp, tree, means)
    state.comp_ll[:, lazy] = state.new_ll[:, None]
    for n in range(len(X)):
        path = attach_path(state.tree, sample_path(state.tree, hp.alpha, rng).decisions)
        init_path_weights(state.tree, path, hp.gamma, rng)
        state.paths[n] = path
        k = gibbs_update_assignment(state, n, rng)
        if k < K and lazy[k]:
            lazy[k] = False
            mean, var = _single_point_posterior(X[n], hp)
            state.means[k] = sample_gaussian_diag(mean, var, rng)
            state.comp_ll[:, k] = component_log_densities(X, state.means[k:k + 1], hp.sigma2)[:, 0]
    if lazy.any():
        state.means[np.flatnonzero(lazy)] = [sample_gaussian_diag(hp.base_mean(D), hp.base_var(D), rng)
                             for _ in range(int(lazy.sum()))]
        state.on_components_changed()
    return state


def sweep(state: SamplerState, cfg: SamplerConfig, rng: Rng, sample_hyper: bool = False) -> Tuple[int, bool]:
    """One full iteration; returns (accepted path moves, hyper move accepted)."""
    accepts = 0
    for n in rng.permutation(state.n_obs):
        accepts += mh_update_path(state, int(n), rng)
    resample_all_weights(state, rng)
    if cfg.update_components:
        resample_components(state, rng)
    hyper = resample_hyperparameters(state, cfg, rng) if sample_hyper else False
    state.iteration += 1
    return accepts, hyper


def validate_data(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise InputError(f"data must be a non-empty N x D matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        bad = np.argwhere(~np.isfinite(X))[0]
        raise InputError(f"non-finite value at row {bad[0]}, column {bad[1]}")
    return X


def run_sampler(X, hp: Hyperparams, cfg: SamplerConfig, init_means: Optional[np.ndarray] = None,
                callback: Optional[Callable[[SamplerState, int], None]] = None,
                rng: Optional[Rng] = None) -> Tuple[SamplerState, Trace]:
    """Run burn-in plus draws and return the best post-burn-in state and the trace.

    The best state is the one with the largest complete-data log likelihood.
    Hyperparameters are only resampled during burn-in.
    """
    X = validate_data(X)
    rng = make_rng(cfg.seed) if rng is None else rng
    state = initialize_state(X, hp, rng, init_means)
    trace = Trace()
    best, best_ll = None, -np.inf
    for it in range(cfg.burn_in + cfg.draws):
        in_burn_in = it < cfg.burn_in
        accepts, hyper = sweep(state, cfg, rng, sample_hyper=cfg.hyper_sampling and in_burn_in)
        ll = complete_data_log_likelihood(state)
        if it % cfg.trace_every == 0:
            trace.record(it, ll, state.n_components, len(state.tree), accepts, hyper)
        if not in_burn_in and ll > best_ll:
            best, best_ll = state.copy(), ll
        if callback is not None:
            callback(state, it)
        if (it + 1) % 100 == 0:
            logger.debug("iter %d loglik %.3f K %d nodes %d", it + 1, ll, state.n_components, len(state.tree))
    if best is None:
        # every draw scored -inf (for example a zero leaf weight underflow)
        best = state.copy()
    best.best_loglik = best_ll
    return best, trace
