"""Simplified hierarchical Bayesian baseline fitted by conjugate Gibbs
sampling.

Model, in log-target space: log y = alpha + beta * depth + u_b + eps with
borehole random intercepts u_b ~ N(0, tau2) and noise eps ~ N(0, sigma2).
Priors: Normal on (alpha, beta), inverse-gamma on both variances. All
conditional updates are closed-form conjugate posteriors, exposed as
standalone functions so spot checks can verify them independently.

This single-target model is deliberately weaker than a joint multivariate
HBM; runtime comparisons against it carry a caveat flag in reports.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DataError
from .geodata import SiteTable
from .infer import Prediction


@dataclass
class HBMSpec:
    trend_prior_mean: tuple[float, float] = (0.0, 0.0)
    trend_prior_var: float = 100.0
    effect_var_a: float = 2.0   # inverse-gamma shape for tau2
    effect_var_b: float = 0.1   # inverse-gamma scale for tau2
    noise_var_a: float = 2.0
    noise_var_b: float = 0.1
    burn_in: int = 200
    kept_draws: int = 500
    thinning: int = 1
    seed: int = 0

    def validate(self) -> None:
        if self.burn_in < 0:
            raise ContractError("burn_in must be >= 0")
        if self.kept_draws < 100:
            raise ContractError("kept_draws must be >= 100")
        if self.thinning < 1:
            raise ContractError("thinning must be >= 1")
        if min(self.trend_prior_var, self.effect_var_a, self.effect_var_b,
               self.noise_var_a, self.noise_var_b) <= 0:
            raise ContractError("prior scales must be positive")


@dataclass
class HBMPosterior:
    alpha: np.ndarray   # (S,)
    beta: np.ndarray    # (S,)
    tau2: np.ndarray    # (S,)
    sigma2: np.ndarray  # (S,)
    u: np.ndarray       # (S, B)
    borehole_ids: list[str]  # order of first appearance in the training table
    target: str
    spec: HBMSpec


def trend_posterior(X: np.ndarray, resid: np.ndarray, sigma2: float,
                    prior_mean: np.ndarray, prior_var: float
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form Normal posterior (mean, covariance) of the trend coefficients."""
    prec = X.T @ X / sigma2 + np.eye(X.shape[1]) / prior_var
    cov = np.linalg.inv(prec)
    mean = cov @ (X.T @ resid / sigma2 + np.asarray(prior_mean) / prior_var)
    return mean, cov


def effect_posterior(resid_sum: float, n: int, sigma2: float,
                     tau2: float) -> tuple[float, float]:
    """Closed-form Normal posterior (mean, variance) of one random intercept."""
    prec = n / sigma2 + 1.0 / tau2
    return (resid_sum / sigma2) / prec, 1.0 / prec


def variance_posterior(a: float, b: float, values: np.ndarray) -> tuple[float, float]:
    """Closed-form inverse-gamma posterior (shape, scale) given centered values."""
    v = np.asarray(values, dtype=float)
    return a + 0.5 * v.size, b + 0.5 * float(v @ v)


def _inv_gamma(rng: np.random.Generator, shape: float, scale: float) -> float:
    return scale / rng.gamma(shape)


def fit(spec: HBMSpec, train: SiteTable, target: str) -> HBMPosterior:
    """Gibbs chain over (trend, random effects, variances); deterministic
    under the spec seed."""
    spec.validate()
    rows = [r for r in train if r.value(target) is not None]
    bh_ids = []
    for r in rows:
        if r.borehole_id not in bh_ids:
            bh_ids.append(r.borehole_id)
    if len(bh_ids) < 2:
        raise ContractError(f"need >= 2 boreholes with observed {target}, "
                            f"got {len(bh_ids)}")
    ly = np.log([r.value(target) for r in rows])
    depth = np.array([r.depth for r in rows])
    bidx = np.array([bh_ids.index(r.borehole_id) for r in rows])
    if np.std(ly) < 1e-12:
        raise DataError(f"degenerate data: log {target} has zero variance")

    n_bh = len(bh_ids)
    X = np.column_stack([np.ones_like(depth), depth])
    prior_mean = np.asarray(spec.trend_prior_mean, dtype=float)
    rng = np.random.default_rng(spec.seed)

    alpha, beta = float(ly.mean()), 0.0
    u = np.zeros(n_bh)
    tau2 = 1.0
    sigma2 = max(float(ly.var()), 1e-6)

    kept = {k: [] for k in ("alpha", "beta", "tau2", "sigma2")}
    kept_u = []
    total = spec.burn_in + spec.kept_draws * spec.thinning
    counts = np.bincount(bidx, minlength=n_bh)
    for it in range(total):
        # trend | u, variances
        mean, cov = trend_posterior(X, ly - u[bidx], sigma2, prior_mean,
                                    spec.trend_prior_var)
        chol = np.linalg.cholesky(cov)
        alpha, beta = mean + chol @ rng.normal(size=2)
        # random intercepts | trend, variances
        resid = ly - (alpha + beta * depth)
        sums = np.bincount(bidx, weights=resid, minlength=n_bh)
        for bh in range(n_bh):
            m, v = effect_posterior(float(sums[bh]), int(counts[bh]), sigma2, tau2)
            u[bh] = m + np.sqrt(v) * rng.normal()
        # variances | everything else
        tau2 = _inv_gamma(rng, *variance_posterior(spec.effect_var_a,
                                                   spec.effect_var_b, u))
        eps = resid - u[bidx]
        sigma2 = _inv_gamma(rng, *variance_posterior(spec.noise_var_a,
                                                     spec.noise_var_b, eps))
        if it >= spec.burn_in and (it - spec.burn_in) % spec.thinning == 0:
            kept["alpha"].append(alpha)
            kept["beta"].append(beta)
            kept["tau2"].append(tau2)
            kept["sigma2"].append(sigma2)
            kept_u.append(u.copy())
    return HBMPosterior(
        alpha=np.array(kept["alpha"]), beta=np.array(kept["beta"]),
        tau2=np.array(kept["tau2"]), sigma2=np.array(kept["sigma2"]),
        u=np.array(kept_u), borehole_ids=bh_ids, target=target, spec=spec)


def predict(posterior: HBMPosterior, records, predict_seed: int = 0,
            include_noise: bool = True) -> list[Prediction]:
    """Posterior-predictive draws per record, pooled into empirical mean and
    [q025, q975]. Unseen boreholes draw their intercept from the random-effect
    prior predictive."""
    rng = np.random.default_rng(predict_seed)
    S = posterior.alpha.size
    idx_of = {b: i for i, b in enumerate(posterior.borehole_ids)}
    out = []
    for r in records:
        i = idx_of.get(r.borehole_id)
        if i is not None:
            u = posterior.u[:, i]
        else:
            u = rng.normal(size=S) * np.sqrt(posterior.tau2)
        mu = posterior.alpha + posterior.beta * r.depth + u
        if include_noise:
            mu = mu + rng.normal(size=S) * np.sqrt(posterior.sigma2)
        draws = np.exp(mu)
        q025, q500, q975 = np.quantile(draws, [0.025, 0.5, 0.975])
        out.append(Prediction(mean=float(draws.mean()), q025=float(q025),
                              q500=float(q500), q975=float(q975), dist=None,
                              row_id=f"{r.site_id}/{r.borehole_id}/{r.depth}"))
    return out


def psrf(chains: np.ndarray) -> float:
    """Potential-scale-reduction statistic over (n_chains, n_draws) samples."""
    chains = np.asarray(chains, dtype=float)
    m, n = chains.shape
    if m < 2 or n < 2:
        raise ContractError("need >= 2 chains with >= 2 draws each")
    means = chains.mean(axis=1)
    W = chains.var(axis=1, ddof=1).mean()
    B = n * means.var(ddof=1)
    var_hat = (n - 1) / n * W + B / n
    return float(np.sqrt(var_hat / W))


def export_draws_csv(posterior: HBMPosterior, path) -> None:
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w", newline="") as f:
        w = csv.writer(f)
        header = ["draw", "alpha", "beta", "tau2", "sigma2"]
        header += [f"u_{b}" for b in posterior.borehole_ids]
        w.writerow(header)
        for s in range(posterior.alpha.size):
            row = [s, repr(posterior.alpha[s]), repr(posterior.beta[s]),
                   repr(posterior.tau2[s]), repr(posterior.sigma2[s])]
            row += [repr(v) for v in posterior.u[s]]
            w.writerow(row)
    os.replace(tmp, path)
