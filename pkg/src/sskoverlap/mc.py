"""Self-normalised importance sampling of the Gibbs measure on the sphere of radius sqrt(N).

Works in eigen-coordinates c_i = u_i . sigma, where

    -beta H(sigma) = (beta / 2) sum lambda_i c_i^2 + beta h sum n_i c_i,
    sqrt(N) M      = sum n_i c_i / sqrt(N).

Proposals are uniform on the sphere; weights are the Gibbs factors.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .contour import MgfResult
from .rmt import DisorderSample
from .saddle import ModelParams

MIN_ESS = 100.0


class EffectiveSampleSizeError(RuntimeError):
    pass


@dataclass(frozen=True)
class McConfig:
    n_samples: int
    seed: int
    batch: int = 100_000

    def __post_init__(self):
        if self.n_samples < 1 or self.batch < 1:
            raise ValueError("n_samples and batch must be positive")


def uniform_sphere(rng: np.random.Generator, n: int, N: int) -> np.ndarray:
    v = rng.standard_normal((n, N))
    return math.sqrt(N) * v / np.linalg.norm(v, axis=1, keepdims=True)


def log_gibbs_weight(c: np.ndarray, sample: DisorderSample, params: ModelParams) -> np.ndarray:
    """-beta H(sigma) in eigen-coordinates, one value per row of c."""
    beta = params.beta
    return 0.5 * beta * (c * c) @ sample.lambdas + beta * params.h * (c @ sample.projections)


def hamiltonian_matrix(sigma: np.ndarray, M: np.ndarray, g: np.ndarray, h: float) -> np.ndarray:
    """H(sigma) = -(1/2) sigma.M.sigma - h g.sigma, rows of sigma."""
    return -0.5 * np.einsum("ki,ij,kj->k", sigma, M, sigma) - h * sigma @ g


def _batch_rngs(cfg: McConfig) -> list[np.random.Generator]:
    n_batches = -(-cfg.n_samples // cfg.batch)
    seqs = np.random.SeedSequence(cfg.seed).spawn(n_batches)
    return [np.random.default_rng(s) for s in seqs]


def _self_normalised(logw: np.ndarray, f: np.ndarray) -> tuple[float, float, float]:
    """Estimate, delta-method standard error and ESS for E_w[f]."""
    lw = logw - logw.max()
    w = np.exp(lw)
    sw = math.fsum(w)
    est = math.fsum(w * f) / sw
    se = math.sqrt(math.fsum(w * w * (f - est) ** 2)) / sw
    ess = sw * sw / math.fsum(w * w)
    return est, se, ess


def _mc_result(value, se, ess, n, seed, extra=None) -> MgfResult:
    diag = {"std_error": se, "ess": ess, "n_samples": float(n), "seed": float(seed)}
    if extra:
        diag.update(extra)
    return MgfResult(value, "monte-carlo", se, diag)


def mc_mgf(sample: DisorderSample, params: ModelParams, cfg: McConfig) -> MgfResult:
    """Estimate <exp(xi sqrt(N) M)> under the Gibbs measure."""
    N = sample.dim
    logw_parts, obs_parts = [], []
    remaining = cfg.n_samples
    for rng in _batch_rngs(cfg):
        n = min(cfg.batch, remaining)
        remaining -= n
        c = uniform_sphere(rng, n, N)
        logw_parts.append(log_gibbs_weight(c, sample, params))
        obs_parts.append(c @ sample.projections / math.sqrt(N))
    logw = np.concatenate(logw_parts)
    m = np.concatenate(obs_parts)
    # weight of the ratio estimator: Gibbs factor only
    lw = logw - logw.max()
    w = np.exp(lw)
    ess = math.fsum(w) ** 2 / math.fsum(w * w)
    if ess < MIN_ESS:
        raise EffectiveSampleSizeError(
            f"effective sample size {ess:.1f} < {MIN_ESS:.0f}; use smaller N or beta")
    if params.xi == 0.0:
        return _mc_result(1.0, 0.0, ess, cfg.n_samples, cfg.seed)
    # exp(xi m) is folded into the log domain to keep large xi m finite
    log_num = logsumexp(lw + params.xi * m)
    log_den = logsumexp(lw)
    value = math.exp(log_num - log_den)
    f = np.exp(params.xi * m - (log_num - log_den))  # f / value
    _, se_rel, _ = _self_normalised(logw, f)
    return _mc_result(value, value * se_rel, ess, cfg.n_samples, cfg.seed,
                      {"mean_overlap": float(np.sum(w * m) / np.sum(w))})


def mc_replica_mgf(sample: DisorderSample, params: ModelParams, cfg: McConfig,
                   xi_r: float) -> MgfResult:
    """Estimate <exp(xi_r R / (1 - T))> for R = sigma1 . sigma2 / N, two independent replicas."""
    if params.beta == 1.0:
        raise ValueError("the replica scaling 1/(1 - T) is singular at T = 1")
    N = sample.dim
    scale = 1.0 / (1.0 - params.T)
    logw_parts, r_parts = [], []
    remaining = cfg.n_samples
    for rng in _batch_rngs(cfg):
        n = min(cfg.batch, remaining)
        remaining -= n
        c1 = uniform_sphere(rng, n, N)
        c2 = uniform_sphere(rng, n, N)
        logw_parts.append(log_gibbs_weight(c1, sample, params) + log_gibbs_weight(c2, sample, params))
        r_parts.append(np.einsum("ki,ki->k", c1, c2) / N)
    logw = np.concatenate(logw_parts)
    R = np.concatenate(r_parts)
    mean_r, se_r, ess = _self_normalised(logw, R)
    if ess < MIN_ESS:
        raise EffectiveSampleSizeError(
            f"effective sample size {ess:.1f} < {MIN_ESS:.0f}; use smaller N or beta")
    var_r, _, _ = _self_normalised(logw, (R - mean_r) ** 2)
    extra = {"mean_replica_overlap": mean_r, "mean_replica_overlap_se": se_r,
             "var_replica_overlap": var_r}
    if xi_r == 0.0:
        return _mc_result(1.0, 0.0, ess, cfg.n_samples, cfg.seed, extra)
    value, se, _ = _self_normalised(logw, np.exp(xi_r * scale * R))
    return _mc_result(value, se, ess, cfg.n_samples, cfg.seed, extra)


def mc_to_json(result: MgfResult) -> str:
    d = result.diagnostics
    return json.dumps({"value": result.value, "std_error": d["std_error"], "ess": d["ess"],
                       "n_samples": int(d["n_samples"]), "seed": int(d["seed"])})
