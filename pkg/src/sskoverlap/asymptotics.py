"""Leading-order closed forms for the overlap laws in the microscopic-field regime.

Everything is written in the (T, H, xi, |n_1|) parameterisation in which the
MGF argument multiplies sqrt(N) M directly.  In that parameterisation the
field-shift seen by G_M is T xi, not xi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .saddle import ModelParams


def _check_T(T: float) -> None:
    if not 0.0 < T < 1.0:
        raise ValueError(f"closed forms need 0 < T < 1, got T = {T}")


def _check_n1(n1_abs: float) -> None:
    if not n1_abs >= 0:
        raise ValueError(f"|n_1| must be non-negative, got {n1_abs}")


def _log_cosh(x: float) -> float:
    x = abs(x)
    return x + math.log1p(math.exp(-2.0 * x)) - math.log(2.0)


def atom(T: float, n1_abs: float) -> float:
    """Half-distance |n_1| sqrt(1 - T) between the two Bernoulli atoms."""
    return n1_abs * math.sqrt(1.0 - T)


def mgf_theorem_T(T: float, H: float, xi: float, n1_abs: float) -> float:
    """e^(H xi + T xi^2 / 2) cosh((H + T xi) t / T) / cosh(H t / T), t = |n_1| sqrt(1 - T)."""
    _check_T(T)
    _check_n1(n1_abs)
    t = atom(T, n1_abs)
    log_val = H * xi + 0.5 * T * xi * xi + _log_cosh((H + T * xi) * t / T) - _log_cosh(H * t / T)
    return math.exp(log_val)


def mgf_theorem(params: ModelParams, n1_abs: float) -> float:
    """Limit of <exp(xi sqrt(N) M)> for the disorder sample's |n_1|."""
    return mgf_theorem_T(params.T, params.H, params.xi, n1_abs)


def mgf_theorem_beta(beta: float, H: float, eta: float, n1_abs: float) -> float:
    """The same limit for <exp(beta eta sqrt(N) M)>, i.e. xi = beta eta."""
    return mgf_theorem_T(1.0 / beta, H, beta * eta, n1_abs)


def overlap_moments_T(T: float, H: float, n1_abs: float) -> tuple[float, float, float]:
    """(mean, variance) of sqrt(N) M and the susceptibility <M>/h."""
    _check_T(T)
    _check_n1(n1_abs)
    t = atom(T, n1_abs)
    th = math.tanh(H * t / T)
    mean = H + t * th
    var = T + t * t * (1.0 - th * th)
    if H == 0.0:
        chi = 1.0 + n1_abs * n1_abs * (1.0 - T) / T
    else:
        chi = 1.0 + (t / H) * th
    return mean, var, chi


def overlap_moments(params: ModelParams, n1_abs: float) -> tuple[float, float, float]:
    return overlap_moments_T(params.T, params.H, n1_abs)


def susceptibility_limit(T: float, n1_abs: float) -> float:
    """H -> 0 value of the susceptibility."""
    _check_T(T)
    return 1.0 + n1_abs * n1_abs * (1.0 - T) / T


@dataclass(frozen=True)
class OverlapLaw:
    """Gaussian(gauss_mean, gauss_var) plus an independent two-atom law on +-atom."""

    gauss_mean: float
    gauss_var: float
    atom: float
    p_plus: float
    kind: Literal["field-overlap", "replica-overlap"] = "field-overlap"

    def mgf(self, xi):
        xi = np.asarray(xi, dtype=float)
        gauss = np.exp(self.gauss_mean * xi + 0.5 * self.gauss_var * xi * xi)
        bern = self.p_plus * np.exp(self.atom * xi) + (1.0 - self.p_plus) * np.exp(-self.atom * xi)
        return gauss * bern

    def mean(self) -> float:
        return self.gauss_mean + self.atom * (2.0 * self.p_plus - 1.0)

    def variance(self) -> float:
        m = 2.0 * self.p_plus - 1.0
        return self.gauss_var + self.atom ** 2 * (1.0 - m * m)


def bias_probability(T: float, H: float, n1_abs: float) -> float:
    """P = e^x / (e^x + e^-x) with x = (H / T) |n_1| sqrt(1 - T)."""
    _check_T(T)
    x = H * atom(T, n1_abs) / T
    return 0.5 * (1.0 + math.tanh(x))


def bernoulli_gauss_decomposition(params: ModelParams, n1_abs: float) -> OverlapLaw:
    T = params.T
    _check_T(T)
    _check_n1(n1_abs)
    return OverlapLaw(params.H, T, atom(T, n1_abs), bias_probability(T, params.H, n1_abs))


def prefactor_exponent(p: float, p_m: float, params: ModelParams) -> float:
    """Leading order of N (G_M(gamma_M) - G(gamma)).

    -log(p_m / p) + 2 (beta - 1)(p_m - p) + (2 H s + s^2) beta, with s = T xi
    the field shift.  The MGF prefactor is exp of half this value.
    """
    if not (p > 0 and p_m > 0):
        raise ValueError("p and p_m must be positive")
    beta = params.beta
    if beta <= 1.0:
        raise ValueError("prefactor exponent needs beta > 1")
    s = params.shift_H
    return -math.log(p_m / p) + 2.0 * (beta - 1.0) * (p_m - p) + (2.0 * params.H * s + s * s) * beta


def replica_bias(T: float, H: float, n1_abs: float) -> float:
    """P = cosh(c) / (cosh(c) + 1), c = 2 sqrt(1 - T) H |n_1| / T."""
    _check_T(T)
    _check_n1(n1_abs)
    c = 2.0 * math.sqrt(1.0 - T) * H * n1_abs / T
    # cosh(c)/(cosh(c)+1) = 1 - 1/(2 cosh^2(c/2)), stable for large c
    return 1.0 - 0.5 / math.cosh(0.5 * c) ** 2 if c < 1400.0 else 1.0


def replica_mgf_theorem_T(T: float, H: float, xi_r: float, n1_abs: float) -> float:
    """Limit of <exp(xi_r R / (1 - T))>: P e^xi_r + (1 - P) e^-xi_r."""
    P = replica_bias(T, H, n1_abs)
    if H == 0.0:
        return math.cosh(xi_r)
    return P * math.exp(xi_r) + (1.0 - P) * math.exp(-xi_r)


def replica_mgf_theorem(params: ModelParams, n1_abs: float, xi_r: float | None = None) -> float:
    """Replica-overlap limit; ``xi_r`` defaults to params.xi."""
    return replica_mgf_theorem_T(params.T, params.H, params.xi if xi_r is None else xi_r, n1_abs)


def replica_law(params: ModelParams, n1_abs: float) -> OverlapLaw:
    """Two atoms at +-1 for R / (1 - T); no Gaussian part."""
    P = replica_bias(params.T, params.H, n1_abs)
    return OverlapLaw(0.0, 0.0, 1.0, P, "replica-overlap")
