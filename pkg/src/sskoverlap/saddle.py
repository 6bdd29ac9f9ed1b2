"""The exponent G(z), its field-shifted twin and their critical points right of lambda_1.

With h the field strength,

    G(z) = beta z - (1/N) sum log(z - lambda_i) + (h^2 beta / N) sum n_i^2 / (z - lambda_i).

Critical points are parameterised as gamma = lambda_1 + p / N.  Everything
on the real axis is computed from D_i = N (lambda_1 - lambda_i), so that
gamma - lambda_i = (D_i + p) / N never suffers cancellation.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .rmt import DisorderSample


class CriticalPointError(RuntimeError):
    pass


class PoleError(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    """Model parameters.

    ``H`` is the microscopic field scale (h = H N^(-1/2)) and ``xi`` the
    argument of <exp(xi sqrt(N) M)>.  Written in terms of G, that MGF shifts
    the field H -> H + T xi; ``shift_H`` exposes this T xi.
    """

    dim: int
    beta: float
    H: float = 0.0
    xi: float = 0.0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.H >= 0:
            raise ValueError(f"H must be non-negative, got {self.H}")

    @classmethod
    def from_temperature(cls, dim: int, T: float, H: float = 0.0, xi: float = 0.0):
        return cls(dim, 1.0 / T, H, xi)

    @classmethod
    def from_field(cls, dim: int, beta: float, h: float, xi: float = 0.0):
        return cls(dim, beta, h * math.sqrt(dim), xi)

    @property
    def T(self) -> float:
        return 1.0 / self.beta

    @property
    def h(self) -> float:
        return self.H / math.sqrt(self.dim)

    @property
    def shift_H(self) -> float:
        return self.xi / self.beta

    @property
    def field_shift(self) -> float:
        """Shift of h that turns G into G_M for this MGF argument."""
        return self.shift_H / math.sqrt(self.dim)

    def with_xi(self, xi: float) -> "ModelParams":
        return replace(self, xi=xi)


@dataclass(frozen=True)
class CriticalPoints:
    gamma: float
    p: float
    gamma_m: float
    p_m: float
    residual_g: float
    residual_gm: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def solver_tolerance(beta: float) -> float:
    return 1e-12 * max(1.0, beta)


def _check_z(z: complex, sample: DisorderSample) -> complex:
    z = complex(z)
    d = np.abs(z - sample.lambdas)
    if np.min(d) <= 1e-14 * max(1.0, abs(z)):
        raise PoleError(f"z = {z} is at a pole of G")
    if z.imag == 0.0 and z.real <= sample.lambdas[0]:
        raise PoleError(f"z = {z} lies on a branch cut of G")
    return z


def eval_G(z: complex, sample: DisorderSample, params: ModelParams,
           field_shift: float = 0.0) -> complex:
    """G(z) with h replaced by h + field_shift; principal-branch logs term by term."""
    z = _check_z(z, sample)
    N = sample.dim
    dz = z - sample.lambdas
    hs = params.h + field_shift
    n2 = sample.projections ** 2
    return complex(params.beta * z - np.sum(np.log(dz)) / N
                   + hs * hs * params.beta / N * np.sum(n2 / dz))


def eval_G_derivatives(z: complex, sample: DisorderSample, params: ModelParams,
                       field_shift: float = 0.0) -> tuple[complex, complex]:
    z = _check_z(z, sample)
    N = sample.dim
    dz = z - sample.lambdas
    hs = params.h + field_shift
    n2 = sample.projections ** 2
    c = hs * hs * params.beta / N
    g1 = params.beta - np.sum(1.0 / dz) / N - c * np.sum(n2 / dz ** 2)
    g2 = np.sum(1.0 / dz ** 2) / N + 2.0 * c * np.sum(n2 / dz ** 3)
    return complex(g1), complex(g2)


def scaled_gaps(sample: DisorderSample) -> np.ndarray:
    """D_i = N (lambda_1 - lambda_i)."""
    return sample.dim * (sample.lambdas[0] - sample.lambdas)


def _gprime(p: float, D: np.ndarray, n2: np.ndarray, beta: float, H_eff: float) -> float:
    x = 1.0 / (D + p)
    return beta - math.fsum(x) - H_eff * H_eff * beta * math.fsum(n2 * x * x)


def _gsecond(p: float, D: np.ndarray, n2: np.ndarray, beta: float, H_eff: float) -> float:
    x = 1.0 / (D + p)
    return math.fsum(x * x) + 2.0 * H_eff * H_eff * beta * math.fsum(n2 * x ** 3)


def critical_p(sample: DisorderSample, beta: float, H_eff: float,
               p_start: float = 10.0, max_expansions: int = 200) -> tuple[float, float]:
    """Unique p > 0 with G'(lambda_1 + p/N) = 0 at field scale H_eff; returns (p, |G'|).

    Bisection on a geometrically grown bracket, then safeguarded Newton.
    G' increases strictly on (lambda_1, inf), from -inf to beta.
    """
    D = scaled_gaps(sample)
    n2 = sample.projections ** 2
    tol = solver_tolerance(beta)

    def g(p):
        return _gprime(p, D, n2, beta, H_eff)

    hi = p_start
    for _ in range(max_expansions):
        if g(hi) > 0:
            break
        hi *= 2.0
    else:
        raise CriticalPointError("no critical point right of lambda_1")
    lo = 0.5 * hi
    for _ in range(4 * max_expansions):
        if g(lo) < 0:
            break
        hi = lo
        lo *= 0.5
    else:
        raise CriticalPointError("could not bracket the critical point from the left")

    while hi - lo > 1e-6 * hi:
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    p = 0.5 * (lo + hi)
    r = g(p)
    for _ in range(60):
        if abs(r) <= 0.01 * tol:
            break
        step = r / _gsecond(p, D, n2, beta, H_eff)
        new = p - step
        if not lo < new < hi:
            new = 0.5 * (lo + hi)
        p = new
        r = g(p)
        if r < 0:
            lo = p
        else:
            hi = p
        if abs(step) <= 4 * np.finfo(float).eps * p:
            break
    return p, abs(r)


def solve_critical(sample: DisorderSample, params: ModelParams) -> CriticalPoints:
    """Critical points of G (field H) and G_M (field H + T xi) right of lambda_1."""
    N = sample.dim
    lam1 = float(sample.lambdas[0])
    p, rg = critical_p(sample, params.beta, params.H)
    if params.xi == 0.0:
        p_m, rgm = p, rg
    else:
        p_m, rgm = critical_p(sample, params.beta, params.H + params.shift_H)
    return CriticalPoints(gamma=lam1 + p / N, p=p, gamma_m=lam1 + p_m / N, p_m=p_m,
                          residual_g=rg, residual_gm=rgm)


def reduced_critical(params: ModelParams, n1_abs: float, with_xi: bool = False) -> float:
    """Positive root of (beta - 1) s^2 - s - A = 0, A = H_eff^2 beta n1^2.

    H_eff = H, or H + T xi when ``with_xi``.
    """
    beta = params.beta
    if beta <= 1.0:
        raise ValueError("reduced critical equation needs beta > 1 (T < 1)")
    H_eff = params.H + params.shift_H if with_xi else params.H
    A = H_eff * H_eff * beta * n1_abs * n1_abs
    b = beta - 1.0
    if A == 0.0:
        return 1.0 / b
    return (1.0 + math.sqrt(1.0 + 4.0 * b * A)) / (2.0 * b)


def log_prefactor(sample: DisorderSample, params: ModelParams,
                  points: CriticalPoints) -> float:
    """(N/2)(G_M(gamma_M) - G(gamma)), assembled from differences term by term."""
    D = scaled_gaps(sample)
    n2 = sample.projections ** 2
    beta = params.beta
    p, pm = points.p, points.p_m
    H, Hm = params.H, params.H + params.shift_H
    logs = np.log1p((pm - p) / (D + p))
    field = Hm * Hm * math.fsum(n2 / (D + pm)) - H * H * math.fsum(n2 / (D + p))
    return 0.5 * beta * (pm - p) - 0.5 * math.fsum(logs) + 0.5 * beta * field
