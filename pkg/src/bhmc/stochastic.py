"""
Seeded random primitives and stick-breaking constructions.

All draws that feed a simplex are made in log space so that very small
concentration parameters (which the multilevel HDP produces routinely) do not
underflow to an all-zero gamma vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .errors import DegenerateDistributionError

Rng = np.random.Generator


def make_rng(seed: int, stream: int = 0) -> Rng:
    """Independent generator for ``(seed, stream)``; same pair, same draws."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass
class StickWeights:
    """Mixing proportions over the K global components plus the unallocated mass."""

    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    remainder: float = 1.0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.remainder = float(self.remainder)

    def __len__(self):
        return len(self.weights)

    def total(self) -> float:
        return float(self.weights.sum()) + self.remainder

    def copy(self) -> "StickWeights":
        return StickWeights(self.weights.copy(), self.remainder)

    def as_vector(self) -> np.ndarray:
        """Weights with the remainder appended as the last entry."""
        return np.append(self.weights, self.remainder)


def _log_gamma_variates(shape: np.ndarray, rng: Rng) -> np.ndarray:
    # For shape < 1 use Gamma(a) = Gamma(a + 1) * U**(1/a), evaluated in logs.
    small = shape < 1.0
    g = rng.standard_gamma(np.where(small, shape + 1.0, shape))
    out = np.log(g)
    if small.any():
        u = rng.random(shape.shape)
        with np.errstate(over="ignore", divide="ignore"):
            out = out + np.where(small, np.log(u) / np.where(small, shape, 1.0), 0.0)
    return out


def log_dirichlet(params, rng: Rng, size: Optional[int] = None) -> np.ndarray:
    """Log of a Dirichlet draw; zero parameters give ``-inf`` coordinates.

    With ``size`` the result has one independent draw per row.
    """
    a = np.asarray(params, dtype=float)
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise ValueError(f"Dirichlet parameters must be finite and non-negative, got {a}")
    pos = a > 0
    if not pos.any():
        raise DegenerateDistributionError("Dirichlet with all-zero parameters")
    rows = 1 if size is None else int(size)
    out = np.full((rows, len(a)), -np.inf)
    lg = _log_gamma_variates(np.tile(a[pos], (rows, 1)), rng)
    lost = ~np.isfinite(lg.max(axis=1))
    for r in np.flatnonzero(lost):
        # every variate underflowed even in logs; the Dirichlet is then a point
        # mass on coordinate i with probability a_i / sum(a)
        lg[r] = -np.inf
        lg[r, sample_categorical(a[pos], rng)] = 0.0
    out[:, pos] = lg - np.logaddexp.reduce(lg, axis=1, keepdims=True)
    return out[0] if size is None else out


def sample_dirichlet(params, rng: Rng, size: Optional[int] = None) -> np.ndarray:
    """Dirichlet draw. Coordinates with parameter exactly 0 are exactly 0."""
    return np.exp(log_dirichlet(params, rng, size))


def sample_beta(a: float, b: float, rng: Rng) -> float:
    """Beta draw with point-mass conventions Beta(a, 0) = 1 and Beta(0, b) = 0."""
    if a < 0 or b < 0:
        raise ValueError(f"Beta parameters must be non-negative, got ({a}, {b})")
    if a == 0 and b == 0:
        raise DegenerateDistributionError("Beta(0, 0)")
    if b == 0:
        return 1.0
    if a == 0:
        return 0.0
    log_u, _ = _log_beta_pairs(np.array([a]), np.array([b]), rng)
    return float(np.exp(log_u[0]))


def _log_beta_pairs(a: np.ndarray, b: np.ndarray, rng: Rng):
    """Vectorised ``(log u, log(1 - u))`` for u ~ Beta(a, b) with point-mass conventions.

    A pair with a = b = 0 yields u = 0; it only occurs once the stick is spent.
    """
    log_u = np.full(a.shape, -np.inf)
    log_1mu = np.zeros(a.shape)
    both = (a > 0) & (b > 0)
    only_a = (a > 0) & (b == 0)
    log_u[only_a] = 0.0
    log_1mu[only_a] = -np.inf
    if both.any():
        ab, bb = a[both], b[both]
        la = _log_gamma_variates(ab, rng)
        lb = _log_gamma_variates(bb, rng)
        lost = ~np.isfinite(np.maximum(la, lb))
        if lost.any():
            # both variates underflowed: u is 1 with probability a / (a + b), else 0
            hit = rng.random(int(lost.sum())) * (ab[lost] + bb[lost]) < ab[lost]
            la[lost] = np.where(hit, 0.0, -np.inf)
            lb[lost] = np.where(hit, -np.inf, 0.0)
        log_u[both] = -np.logaddexp(0.0, lb - la)
        log_1mu[both] = -np.logaddexp(0.0, la - lb)
    return log_u, log_1mu


def gem_stick_breaking(gamma0: float, epsilon: float, rng: Rng,
                       fractions: Optional[Iterable[float]] = None,
                       max_sticks: int = 100000) -> StickWeights:
    """Truncated GEM(gamma0) weights.

    Sticks are broken until the remaining length is at most ``epsilon``.
    ``fractions`` replaces the Beta(1, gamma0) break fractions (used by tests).
    """
    if gamma0 <= 0:
        raise ValueError(f"gamma0 must be positive, got {gamma0}")
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    forced = iter(fractions) if fractions is not None else None
    weights = []
    remainder = 1.0
    while remainder > epsilon and len(weights) < max_sticks:
        u = next(forced) if forced is not None else sample_beta(1.0, gamma0, rng)
        weights.append(remainder * u)
        remainder = remainder * (1.0 - u)
    return StickWeights(np.array(weights, dtype=float), remainder)


def dp_child_weights(parent: StickWeights, gamma: float, rng: Rng) -> StickWeights:
    """Draw child weights from DP(gamma, parent) over the parent's K components.

    Uses u_k ~ Beta(gamma * b_k, gamma * (1 - sum_{l<=k} b_l)) and
    c_k = u_k * prod_{l<k} (1 - u_l); the tail mass is accumulated from the
    remainder side to avoid cancellation in ``1 - cumsum``.
    """
    w = parent.weights
    K = len(w)
    if K == 0:
        return StickWeights(np.zeros(0), 1.0)
    tail = parent.remainder + np.concatenate((np.cumsum(w[::-1])[::-1][1:], [0.0]))
    log_u, log_1mu = _log_beta_pairs(gamma * w, gamma * tail, rng)
    log_left = np.concatenate(([0.0], np.cumsum(log_1mu)))
    weights = np.exp(log_u + log_left[:-1])
    return StickWeights(weights, float(np.exp(log_left[-1])))


def sample_gaussian_diag(mean, variances, rng: Rng) -> np.ndarray:
    mean = np.asarray(mean, dtype=float)
    variances = np.asarray(variances, dtype=float)
    if mean.shape != variances.shape:
        raise ValueError(f"shape mismatch: mean {mean.shape} vs variances {variances.shape}")
    if np.any(variances <= 0):
        raise ValueError("variances must be strictly positive")
    return mean + np.sqrt(variances) * rng.standard_normal(mean.shape)


def sample_categorical(weights, rng: Rng) -> int:
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    if not total > 0:
        raise DegenerateDistributionError("categorical weights sum to zero")
    cdf = np.cumsum(w)
    idx = int(np.searchsorted(cdf, rng.random() * total, side="right"))
    # guard against landing past the end through rounding, or on a zero-weight slot
    idx = min(idx, len(w) - 1)
    while w[idx] == 0:
        idx -= 1
    return idx


def sample_log_categorical(log_weights, rng: Rng) -> int:
    """Categorical draw from unnormalised log weights."""
    lw = np.asarray(log_weights, dtype=float)
    m = lw.max()
    if not np.isfinite(m):
        raise DegenerateDistributionError("categorical weights sum to zero")
    return sample_categorical(np.exp(lw - m), rng)
