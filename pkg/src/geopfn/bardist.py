"""Piecewise-constant ("bar") predictive distribution over target bins.

The distribution stores n_bins+1 strictly increasing finite edges. Bins
1..n-2 carry constant density mass/width; bins 0 and n-1 are unbounded tail
bins whose mass is spread as a half-Normal beyond edges[1] (leftward) and
edges[-2] (rightward). Mean, CDF, quantiles and log-density are all closed
form, so independent quadrature oracles can check them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, erfcinv

from .errors import ContractError

_SQRT2 = math.sqrt(2.0)
_HALF_NORMAL_MEAN = math.sqrt(2.0 / math.pi)  # E|N(0, 1)|


def _tail_pdf(d: np.ndarray | float, scale: float) -> np.ndarray | float:
    """Half-Normal density at distance d >= 0 from the anchoring edge."""
    return _HALF_NORMAL_MEAN / scale * np.exp(-0.5 * (d / scale) ** 2)


@dataclass(frozen=True)
class PredictiveDistribution:
    """Bar distribution in target units.

    edges: n_bins+1 strictly increasing reals; masses: n_bins non-negative
    reals summing to 1; tail_lo/tail_hi: half-Normal scales of the two
    unbounded outer bins.
    """

    edges: np.ndarray
    masses: np.ndarray
    tail_lo: float
    tail_hi: float

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.float64)
        masses = np.asarray(self.masses, dtype=np.float64)
        if edges.ndim != 1 or masses.ndim != 1 or edges.size != masses.size + 1:
            raise ContractError("need n_bins+1 edges for n_bins masses")
        if masses.size < 2:
            raise ContractError("need at least 2 bins")
        if not np.all(np.diff(edges) > 0):
            raise ContractError("bin edges must be strictly increasing")
        if np.any(masses < -1e-9) or abs(masses.sum() - 1.0) > 1e-6:
            raise ContractError("bin masses must be non-negative and sum to 1")
        if self.tail_lo <= 0 or self.tail_hi <= 0:
            raise ContractError("tail scales must be positive")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "masses", np.maximum(masses, 0.0))

    @property
    def n_bins(self) -> int:
        return self.masses.size

    def _cum(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.masses)])

    def mean(self) -> float:
        e, m = self.edges, self.masses
        # interior bins 1..n-2 contribute mass * centroid
        interior = float(np.dot(m[1:-1], 0.5 * (e[1:-2] + e[2:-1]))) if m.size > 2 else 0.0
        lo = m[0] * (e[1] - self.tail_lo * _HALF_NORMAL_MEAN)
        hi = m[-1] * (e[-2] + self.tail_hi * _HALF_NORMAL_MEAN)
        return float(interior + lo + hi)

    def cdf(self, y):
        y = np.asarray(y, dtype=np.float64)
        e, m = self.edges, self.masses
        cum = self._cum()
        out = np.empty_like(y, dtype=np.float64)
        left = y < e[1]
        right = y >= e[-2]
        mid = ~(left | right)
        out[left] = m[0] * erfc((e[1] - y[left]) / (_SQRT2 * self.tail_lo))
        out[right] = 1.0 - m[-1] * erfc((y[right] - e[-2]) / (_SQRT2 * self.tail_hi))
        if np.any(mid):
            idx = np.clip(np.searchsorted(e, y[mid], side="right") - 1, 1, m.size - 2)
            w = e[idx + 1] - e[idx]
            out[mid] = cum[idx] + m[idx] * (y[mid] - e[idx]) / w
        return out if out.ndim else float(out)

    def quantile(self, p):
        scalar = np.isscalar(p)
        p = np.atleast_1d(np.asarray(p, dtype=np.float64))
        if np.any(p <= 0.0) or np.any(p >= 1.0):
            raise ContractError("quantile probability must lie in (0, 1)")
        e, m = self.edges, self.masses
        cum = self._cum()
        idx = np.clip(np.searchsorted(cum, p, side="right") - 1, 0, m.size - 1)
        out = np.empty_like(p)
        for j, (pi, i) in enumerate(zip(p, idx)):
            if i == 0 and pi < cum[1]:
                d = _SQRT2 * self.tail_lo * erfcinv(pi / m[0])
                out[j] = e[1] - d
            elif i >= m.size - 1 or pi >= cum[-2]:
                tail = m[-1]
                if (1.0 - pi) < tail:  # strictly in the upper tail
                    d = _SQRT2 * self.tail_hi * erfcinv((1.0 - pi) / tail)
                    out[j] = e[-2] + d
                else:  # exactly at (or numerically on) the last interior boundary
                    out[j] = e[-2]
            else:
                if m[i] <= 0:
                    out[j] = e[i]
                else:
                    out[j] = e[i] + (pi - cum[i]) / m[i] * (e[i + 1] - e[i])
        return float(out[0]) if scalar else out

    def log_density(self, y) -> float | np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        e, m = self.edges, self.masses
        out = np.empty_like(y, dtype=np.float64)
        with np.errstate(divide="ignore"):
            left = y < e[1]
            right = y >= e[-2]
            mid = ~(left | right)
            out[left] = np.log(m[0] * _tail_pdf(e[1] - y[left], self.tail_lo))
            out[right] = np.log(m[-1] * _tail_pdf(y[right] - e[-2], self.tail_hi))
            if np.any(mid):
                idx = np.clip(np.searchsorted(e, y[mid], side="right") - 1, 1, m.size - 2)
                out[mid] = np.log(m[idx] / (e[idx + 1] - e[idx]))
        return out if out.ndim else float(out)

    def affine(self, a: float, b: float) -> "PredictiveDistribution":
        """Map the distribution of Y to that of a*Y + b, a > 0 (exact)."""
        if a <= 0:
            raise ContractError("affine scale must be positive")
        return PredictiveDistribution(
            edges=a * self.edges + b,
            masses=self.masses.copy(),
            tail_lo=a * self.tail_lo,
            tail_hi=a * self.tail_hi,
        )


def bin_index(edges: np.ndarray, y) -> np.ndarray:
    """Index of the bin containing y; outer bins catch everything beyond."""
    n = len(edges) - 1
    idx = np.searchsorted(edges, np.asarray(y, dtype=np.float64), side="right") - 1
    return np.clip(idx, 0, n - 1)


def log_density_constants(edges: np.ndarray, y: np.ndarray, tail_scale: float) -> np.ndarray:
    """Per-row geometric term of log p(y): -log(width) inside interior bins,
    log half-Normal pdf inside tail bins. Adding the log bin mass gives the
    full log-density; the masses are the only part that carries gradient.
    """
    edges = np.asarray(edges, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    idx = bin_index(edges, y)
    n = len(edges) - 1
    out = np.empty_like(y, dtype=np.float64)
    # log half-Normal pdf evaluated in log space so far-out targets cannot
    # underflow to log(0)
    log_tail_at = (lambda d: math.log(_HALF_NORMAL_MEAN / tail_scale)
                   - 0.5 * (d / tail_scale) ** 2)
    for j, (yi, i) in enumerate(zip(y, idx)):
        if i == 0:
            out[j] = log_tail_at(max(edges[1] - yi, 0.0))
        elif i == n - 1:
            out[j] = log_tail_at(max(yi - edges[-2], 0.0))
        else:
            out[j] = -math.log(edges[i + 1] - edges[i])
    return out


def equal_mass_edges(y_std: np.ndarray, n_bins: int, clamp: float = 4.0) -> np.ndarray:
    """Per-task edges at equal-mass quantiles of standardized train targets,
    clamped to [-clamp, clamp] and forced strictly increasing."""
    if n_bins < 2:
        raise ContractError("need at least 2 bins")
    qs = np.quantile(np.asarray(y_std, dtype=np.float64), np.linspace(0.0, 1.0, n_bins + 1))
    edges = np.clip(qs, -clamp, clamp)
    edges[0] = -clamp
    edges[-1] = clamp
    gap = 1e-4
    for i in range(1, n_bins + 1):
        if edges[i] <= edges[i - 1] + gap:
            edges[i] = edges[i - 1] + gap
    return edges


def uniform_edges(bound: float, n_bins: int) -> np.ndarray:
    """Fixed equal-width edges over [-bound, bound]."""
    if n_bins < 2:
        raise ContractError("need at least 2 bins")
    if bound <= 0:
        raise ContractError("bound must be positive")
    return np.linspace(-bound, bound, n_bins + 1)
