"""Exact finite-N contour integrals for the partition function and the overlap MGF.

All integrals are computed in the rescaled variable w = N (z - lambda_1), in
which the saddle sits at w = p and the integrand exp((N/2)(G(z) - G(gamma)))
equals 1 there.  The path, traversed upward, is

    lower ray  ->  lower tail  ->  C1  ->  C2  ->  C3  ->  C4 tail  ->  upper ray

C2 is the half circle r e^{i theta}, |theta| <= pi/2, through the saddle;
C1 and C3 are the vertical legs Re w = 0 between heights r and W; C4 is
w = -f(t) + i(W + t) with f(t) = (t+1)^Delta - 1 for 0 <= t <= t_max.
Beyond t_max the path either stops (truncation, bounded by tail_estimate) or
continues along the horizontal ray w(t_max) - s, s >= 0, which closes the
contour exactly because exp(beta w / 2) decays to the left.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Literal

import numpy as np
from scipy import special

from .quadrature import (QuadratureError, geometric_breakpoints, integrate_adaptive,
                         integrate_fixed)
from .rmt import DisorderSample
from .saddle import (CriticalPoints, ModelParams, log_prefactor, scaled_gaps,
                     solve_critical)


DEFAULT_EPSILON = 0.1


class ContourError(ValueError):
    pass


class ExponentOverflowError(ArithmeticError):
    pass


@dataclass(frozen=True)
class ContourSpec:
    """Contour and quadrature settings.

    ``e_hat`` sets the leg height W = N^e_hat in w units unless ``window``
    gives W directly.  ``t_max=None`` means 2 (gamma - lambda_N) N.
    """

    e_hat: float = 0.1  # (1 - 3 eps) / 7 at eps = DEFAULT_EPSILON
    delta: float = 0.25
    t_max: float | None = None
    quad_tol: float = 1e-10
    arc_points: int = 64
    window: float | None = None
    close_tail: bool = True

    def __post_init__(self):
        if not 0.0 < self.e_hat < 1.0 / 6.0:
            raise ValueError(f"e_hat must lie in (0, 1/6), got {self.e_hat}")
        if not 0.0 < self.delta < 1.0 / 3.0:
            raise ValueError(f"delta must lie in (0, 1/3), got {self.delta}")
        if not self.quad_tol > 0:
            raise ValueError("quad_tol must be positive")
        if self.arc_points < 4:
            raise ValueError("arc_points must be at least 4")
        if self.window is not None and not self.window > 0:
            raise ValueError("window must be positive")
        if self.t_max is not None and not self.t_max > 0:
            raise ValueError("t_max must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Contour:
    """A concrete deformed path in w = N (z - lambda_1) coordinates."""

    dim: int
    lam1: float
    radius: float
    window: float
    delta: float
    t_max: float
    close_tail: bool
    # panels on [0, t_base] match the contour truncated at t_base
    t_base: float | None = None

    def f(self, t):
        return np.power(np.asarray(t, dtype=float) + 1.0, self.delta) - 1.0

    def df(self, t):
        return self.delta * np.power(np.asarray(t, dtype=float) + 1.0, self.delta - 1.0)

    def arc(self, theta):
        return self.radius * np.exp(1j * np.asarray(theta, dtype=float))

    def leg(self, y):
        return 1j * np.asarray(y, dtype=float)

    def tail(self, t):
        t = np.asarray(t, dtype=float)
        return -self.f(t) + 1j * (self.window + t)

    def tail_speed(self, t):
        return -self.df(t) + 1j

    @property
    def tail_end(self) -> complex:
        return complex(self.tail(self.t_max))

    def ray(self, s):
        return self.tail_end - np.asarray(s, dtype=float)

    def to_z(self, w):
        return self.lam1 + np.asarray(w) / self.dim

    def sample_path(self, n: int = 200) -> list[tuple[str, float, complex]]:
        """(piece, parameter, w) triples along the upper half of the path."""
        out = []
        for th in np.linspace(0.0, math.pi / 2, n):
            out.append(("C2", float(th), complex(self.arc(th))))
        for y in np.linspace(self.radius, self.window, n):
            out.append(("C3", float(y), complex(self.leg(y))))
        for t in np.concatenate([[0.0], np.geomspace(1e-3, self.t_max, n)]):
            out.append(("C4", float(t), complex(self.tail(t))))
        if self.close_tail:
            for s in np.concatenate([[0.0], np.geomspace(1e-3, 1e3, n)]):
                out.append(("ray", float(s), complex(self.ray(s))))
        return out


def default_window(N: int, spec: ContourSpec) -> float:
    return spec.window if spec.window is not None else N ** spec.e_hat


def build_contour(sample: DisorderSample, points: CriticalPoints, spec: ContourSpec,
                  shifted: bool = True) -> Contour:
    """Contour through gamma_M (``shifted``) or gamma."""
    N = sample.dim
    r = points.p_m if shifted else points.p
    W = default_window(N, spec)
    if r >= W:
        raise ContourError(
            f"arc radius {r:.4g} reaches the leg height {W:.4g}; "
            "increase e_hat or pass an explicit window")
    D_N = float(scaled_gaps(sample)[-1])
    t_max = spec.t_max if spec.t_max is not None else 2.0 * (r + D_N)
    return Contour(N, float(sample.lambdas[0]), float(r), float(W), spec.delta,
                   float(t_max), spec.close_tail)


def _auto_contour(sample, points, spec, shifted):
    """build_contour, widening the legs to 2r when N^e_hat is too short."""
    try:
        return build_contour(sample, points, spec, shifted), False
    except ContourError:
        if spec.window is not None:
            raise
        r = points.p_m if shifted else points.p
        return build_contour(sample, points, replace(spec, window=2.0 * r), shifted), True


class ShiftedExponent:
    """E(w) = (N/2)(G_s(z) - G_s(gamma_s)) with z = lambda_1 + w/N.

    E(w) = (beta/2)(w - p) - (1/2) sum log1p((w - p)/(D_i + p))
           + (beta Hs^2 / 2)(p - w) sum n_i^2 / ((D_i + w)(D_i + p))
    """

    _CHUNK = 1 << 21

    def __init__(self, sample: DisorderSample, beta: float, H_eff: float, p: float):
        self.D = scaled_gaps(sample)
        self.inv = 1.0 / (self.D + p)
        self.n2inv = sample.projections ** 2 * self.inv
        self.beta = beta
        self.c = 0.5 * beta * H_eff * H_eff
        self.p = p

    def __call__(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=complex)
        shape = w.shape
        w = w.ravel()
        out = np.empty(w.size, dtype=complex)
        step = max(1, self._CHUNK // self.D.size)
        for s in range(0, w.size, step):
            wc = w[s:s + step, None]
            u = wc - self.p
            logs = np.log1p(u * self.inv[None, :]).sum(axis=1)
            field = (self.n2inv[None, :] / (self.D[None, :] + wc)).sum(axis=1)
            out[s:s + step] = 0.5 * self.beta * u[:, 0] - 0.5 * logs - self.c * u[:, 0] * field
        return out.reshape(shape)

    def integrand(self, w) -> np.ndarray:
        e = self(w)
        if np.any(e.real > 700.0):
            raise ExponentOverflowError("shifted exponent exceeds exp range on the contour")
        return np.exp(e)


@dataclass(frozen=True)
class ShiftedIntegral:
    """Integral in z units with its bookkeeping."""

    value: complex
    error: float
    pieces: dict = field(default_factory=dict)
    contour: Contour | None = None
    window_adapted: bool = False
    n_evals: int = 0

    @property
    def imag_residue(self) -> float:
        return abs(self.value.real) / abs(self.value.imag) if self.value.imag else math.inf


def _ray_breakpoints(beta: float) -> np.ndarray:
    # exp(-beta s / 2) < e^-60 at the far end
    return geometric_breakpoints(0.0, 120.0 / beta + 8.0)


def _tail_breakpoints(contour: Contour) -> np.ndarray:
    tb = contour.t_base
    if tb is None or tb >= contour.t_max:
        return geometric_breakpoints(0.0, contour.t_max)
    return np.concatenate([geometric_breakpoints(0.0, tb),
                           geometric_breakpoints(tb, contour.t_max, first=tb)[1:]])


def _integrate_path(F, contour: Contour, beta: float, spec: ContourSpec) -> tuple[complex, float, dict, int]:
    """Integral of F(w) dw over the whole path (w units)."""
    r, W = contour.radius, contour.window
    n_ev = 0
    # fixed rule on the arc, a coarser one as the error proxy
    arc = lambda th: F(contour.arc(th)) * 1j * contour.arc(th)
    c2 = integrate_fixed(arc, -math.pi / 2, math.pi / 2, spec.arc_points)
    c2_coarse = integrate_fixed(arc, -math.pi / 2, math.pi / 2, max(4, spec.arc_points * 3 // 4))
    n_ev += spec.arc_points + max(4, spec.arc_points * 3 // 4)
    scale = max(abs(c2), 1e-300)
    tol = spec.quad_tol * scale / 64.0

    legs = integrate_adaptive(lambda y: 1j * (F(1j * y) + F(-1j * y)),
                              np.linspace(r, W, 3), tol)

    def tail_pair(t):
        wu, su = contour.tail(t), contour.tail_speed(t)
        return F(wu) * su - F(np.conj(wu)) * np.conj(su)

    tails = integrate_adaptive(tail_pair, _tail_breakpoints(contour), tol)
    pieces = {"arc": c2, "legs": legs.value, "tails": tails.value}
    err = abs(c2 - c2_coarse) + legs.error + tails.error
    ok = legs.converged and tails.converged
    n_ev += legs.n_evals + tails.n_evals
    if contour.close_tail:
        wT = contour.tail_end
        rays = integrate_adaptive(lambda s: F(np.conj(wT) - s) - F(wT - s),
                                  _ray_breakpoints(beta), tol)
        pieces["rays"] = rays.value
        err += rays.error
        ok = ok and rays.converged
        n_ev += rays.n_evals
    if not ok:
        raise QuadratureError("adaptive quadrature did not reach the requested tolerance")
    total = complex(math.fsum(v.real for v in pieces.values()),
                    math.fsum(v.imag for v in pieces.values()))
    return total, err, pieces, n_ev


def integrate_shifted_detail(sample: DisorderSample, params: ModelParams, field_shift: float,
                             points: CriticalPoints, spec: ContourSpec | None = None,
                             contour: Contour | None = None) -> ShiftedIntegral:
    spec = spec or ContourSpec()
    N = sample.dim
    H_eff = params.H + field_shift * math.sqrt(N)
    shifted = field_shift != 0.0
    if shifted and points.p_m == points.p and params.xi == 0.0:
        shifted = False
    p = points.p_m if shifted else points.p
    adapted = False
    if contour is None:
        contour, adapted = _auto_contour(sample, points, spec, shifted)
    expo = ShiftedExponent(sample, params.beta, H_eff, p)
    total, err, pieces, n_ev = _integrate_path(expo.integrand, contour, params.beta, spec)
    return ShiftedIntegral(total / N, err / N, pieces, contour, adapted, n_ev)


def integrate_shifted(sample: DisorderSample, params: ModelParams, field_shift: float,
                      points: CriticalPoints, spec: ContourSpec | None = None) -> complex:
    """Integral of exp((N/2)(G_s(z) - G_s(gamma_s))) dz over the deformed contour.

    ``field_shift`` is added to h; 0 gives the plain G, params.field_shift
    gives G_M.  Purely imaginary up to quadrature error.
    """
    return integrate_shifted_detail(sample, params, field_shift, points, spec).value


@dataclass(frozen=True)
class MgfResult:
    value: float
    method: Literal["contour-exact", "closed-form", "monte-carlo"]
    abs_error_estimate: float
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"value": self.value, "method": self.method,
                "abs_error_estimate": self.abs_error_estimate,
                "diagnostics": dict(self.diagnostics)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def mgf_exact(sample: DisorderSample, params: ModelParams,
              spec: ContourSpec | None = None,
              points: CriticalPoints | None = None) -> MgfResult:
    """<exp(xi sqrt(N) M)> at finite N from the ratio of two contour integrals."""
    spec = spec or ContourSpec()
    if params.xi == 0.0:
        return MgfResult(1.0, "contour-exact", 0.0, {"short_circuit": 1.0})
    points = points or solve_critical(sample, params)
    num = integrate_shifted_detail(sample, params, params.field_shift, points, spec)
    den = integrate_shifted_detail(sample, params, 0.0, points, spec)
    log_pref = log_prefactor(sample, params, points)
    ratio_c = num.value / den.value
    ratio = abs(num.value) / abs(den.value)
    value = math.exp(log_pref) * ratio
    rel_q = num.error / abs(num.value) + den.error / abs(den.value)
    diag = {
        "log_prefactor": log_pref,
        "p": points.p,
        "p_m": points.p_m,
        "quad_error": value * rel_q,
        "imag_residue": abs(ratio_c.imag) / abs(ratio_c.real),
        "window_num": num.contour.window,
        "window_den": den.contour.window,
        "window_adapted": float(num.window_adapted or den.window_adapted),
        "t_max_num": num.contour.t_max,
        "t_max_den": den.contour.t_max,
        "n_evals": float(num.n_evals + den.n_evals),
    }
    abs_err = value * rel_q
    if not spec.close_tail:
        tb_num = _tail_log_bound(sample, params, num.contour, params.field_shift)
        tb_den = _tail_log_bound(sample, params, den.contour, 0.0)
        rel_tail = (math.exp(tb_num.log_bound) / abs(num.value)
                    + math.exp(tb_den.log_bound) / abs(den.value))
        diag["tail_mass"] = value * rel_tail
        abs_err += value * rel_tail
    return MgfResult(value, "contour-exact", abs_err, diag)


# ---------------------------------------------------------------- tails


@dataclass(frozen=True)
class TailBound:
    log_bound: float  # log of the two-sided bound, z units
    c_fit: float
    numeric_part: float
    envelope_part: float


def _log_integral_modulus(logF, contour: Contour, a: float, b: float, n: int = 32) -> float:
    """log of the integral of |F| |w'(t)| over C4 between a and b (panelled GL, log domain)."""
    x, wts = np.polynomial.legendre.leggauss(n)
    bps = np.geomspace(max(a, 1e-12), b, max(2, int(math.ceil(math.log2(b / max(a, 1e-12)))) + 1))
    terms = []
    for lo, hi in zip(bps[:-1], bps[1:]):
        t = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x
        lf = logF(contour.tail(t)) + np.log(np.abs(contour.tail_speed(t)))
        terms.append(lf + np.log(0.5 * (hi - lo) * wts))
    return float(special.logsumexp(np.concatenate(terms)))


def _log_upper_gamma(s: float, x: float) -> float:
    q = special.gammaincc(s, x)
    if q > 1e-290:
        return math.log(q) + special.gammaln(s)
    # Gamma(s, x) <= x^(s-1) e^-x * x / (x - s + 1) for x > s - 1, s >= 1
    return (s - 1.0) * math.log(x) - x + math.log(x / (x - s + 1.0))


def _tail_log_bound(sample: DisorderSample, params: ModelParams, contour: Contour,
                    field_shift: float, decades: int = 2) -> TailBound:
    N = sample.dim
    H_eff = params.H + field_shift * math.sqrt(N)
    expo = ShiftedExponent(sample, params.beta, H_eff, contour.radius)
    logF = lambda w: expo(w).real
    t0 = contour.t_max
    t_far = t0 * 10.0 ** decades
    log_num = _log_integral_modulus(logF, contour, t0, t_far)

    # fit log|F| = a - C ((t+1)^Delta - 1) on the last decade
    t = np.geomspace(t_far / 10.0, t_far, 64)
    x = contour.f(t)
    y = logF(contour.tail(t))
    slope, _ = np.polyfit(x, y, 1)
    c_fit = -float(slope)
    if not c_fit > 0 or not np.all(np.isfinite(y)):
        raise ContourError("integrand modulus does not decay along C4; contour misconfigured")
    # the asymptotic rate in f is beta/2 and the log-modulus is convex in f,
    # so a rate capped at beta/2 anchored at t_far dominates the remainder
    c_env = min(c_fit, 0.5 * params.beta)
    s = 1.0 / contour.delta
    U = (t_far + 1.0) ** contour.delta
    log_env = (float(y[-1]) + c_env * float(x[-1]) + math.log(math.sqrt(2.0))
               + c_env - math.log(contour.delta) - s * math.log(c_env)
               + _log_upper_gamma(s, c_env * U))
    log_one_side = float(np.logaddexp(log_num, log_env))
    # both half-planes, converted to z units
    log_bound = log_one_side + math.log(2.0) - math.log(N)
    return TailBound(log_bound, c_fit, log_num, log_env)


def tail_estimate(sample: DisorderSample, params: ModelParams, points: CriticalPoints,
                  spec: ContourSpec | None = None) -> float:
    """Upper bound on the mass the truncated C4 tails (t > t_max) discard, numerator integral."""
    return math.exp(log_tail_estimate(sample, params, points, spec))


def log_tail_estimate(sample: DisorderSample, params: ModelParams, points: CriticalPoints,
                      spec: ContourSpec | None = None) -> float:
    spec = spec or ContourSpec()
    contour, _ = _auto_contour(sample, points, spec, shifted=params.xi != 0.0)
    shift = params.field_shift if params.xi != 0.0 else 0.0
    return _tail_log_bound(sample, params, contour, shift).log_bound


ROUNDOFF_ULPS = 8


@dataclass(frozen=True)
class TruncationCheck:
    """Truncated-contour MGF at t_max and 2 t_max with the propagated tail bound."""

    value: float
    value_doubled: float
    log_bound: float  # natural log, MGF units

    @property
    def change(self) -> float:
        return abs(self.value_doubled - self.value)

    @property
    def bound(self) -> float:
        return math.exp(self.log_bound)

    @property
    def roundoff(self) -> float:
        """Floor below which a change is floating-point noise in the final ratio."""
        return ROUNDOFF_ULPS * np.finfo(float).eps * self.value

    @property
    def dominated(self) -> bool:
        return self.change <= self.roundoff or math.log(self.change) < self.log_bound


def _doubled(contour: Contour) -> Contour:
    return replace(contour, t_max=2.0 * contour.t_max, t_base=contour.t_max)


def truncation_check(sample: DisorderSample, params: ModelParams, points: CriticalPoints | None = None,
                     spec: ContourSpec | None = None) -> TruncationCheck:
    """Compare the truncated contour at t_max and 2 t_max; bound the change by the tail estimate.

    The bound is value * (tail_num / |num| + tail_den / |den|), kept in log form
    because it underflows for N beyond a few hundred.
    """
    spec = replace(spec or ContourSpec(), close_tail=False)
    points = points or solve_critical(sample, params)
    if params.xi == 0.0:
        return TruncationCheck(1.0, 1.0, -math.inf)
    num = integrate_shifted_detail(sample, params, params.field_shift, points, spec)
    den = integrate_shifted_detail(sample, params, 0.0, points, spec)
    pref = math.exp(log_prefactor(sample, params, points))
    value = pref * abs(num.value) / abs(den.value)
    logs = []
    for d, shift in ((num, params.field_shift), (den, 0.0)):
        tb = _tail_log_bound(sample, params, d.contour, shift)
        logs.append(tb.log_bound - math.log(abs(d.value)))
    log_bound = math.log(value) + float(np.logaddexp(*logs))
    # each integral doubles its own t_max and keeps the panels below the old one
    num2 = integrate_shifted_detail(sample, params, params.field_shift, points, spec,
                                    contour=_doubled(num.contour))
    den2 = integrate_shifted_detail(sample, params, 0.0, points, spec,
                                    contour=_doubled(den.contour))
    value2 = pref * abs(num2.value) / abs(den2.value)
    return TruncationCheck(value, value2, log_bound)


def mgf_tail_bound(sample: DisorderSample, params: ModelParams, points: CriticalPoints,
                   spec: ContourSpec | None = None) -> float:
    """Tail bound propagated to MGF units (may underflow to 0; see truncation_check)."""
    return truncation_check(sample, params, points, spec).bound


# ---------------------------------------------------------------- partition function


def log_partition(sample: DisorderSample, params: ModelParams,
                  spec: ContourSpec | None = None) -> float:
    """log Z_N from Z_N = C_N * integral of exp((N/2) G(z)) dz, C_N = Gamma(N/2) / (2 pi i (N beta/2)^(N/2-1))."""
    N = sample.dim
    beta = params.beta
    points = solve_critical(sample, params.with_xi(0.0))
    den = integrate_shifted_detail(sample, params, 0.0, points, spec)
    gamma_gaps = (scaled_gaps(sample) + points.p) / N  # gamma - lambda_i > 0
    n2 = sample.projections ** 2
    half_G = (0.5 * N * beta * points.gamma - 0.5 * math.fsum(np.log(gamma_gaps))
              + 0.5 * beta * params.h ** 2 * math.fsum(n2 / gamma_gaps))
    log_cn = special.gammaln(N / 2.0) - math.log(2 * math.pi) - (N / 2.0 - 1.0) * math.log(N * beta / 2.0)
    return float(log_cn + half_G + math.log(abs(den.value.imag)))


# ---------------------------------------------------------------- Bessel self-test


def bessel_closed_form(a: complex, b: complex) -> complex:
    a, b = complex(a), complex(b)
    return 2j * math.sqrt(math.pi) / np.sqrt(a) * np.cosh(2.0 * np.sqrt(a * b))


def bessel_identity(a: complex, b: complex, spec: ContourSpec | None = None) -> tuple[complex, complex]:
    """Quadrature and closed form of the integral of w^(-1/2) exp(a w + b/w) over Re w = 0+.

    The vertical line is deformed into a half circle of radius
    max(sqrt(|b|/|a|), 1/|a|) joined to two horizontal rays running to
    Re w = -inf, on which exp(a w) decays.
    """
    spec = spec or ContourSpec()
    a, b = complex(a), complex(b)
    if not a.real > 0:
        raise ValueError("Re a must be positive")
    r = max(math.sqrt(abs(b) / abs(a)), 1.0 / abs(a))

    def F(w):
        w = np.asarray(w, dtype=complex)
        return np.exp(a * w + b / w) / np.sqrt(w)

    arc = lambda th: F(r * np.exp(1j * th)) * 1j * r * np.exp(1j * th)
    c2 = integrate_fixed(arc, -math.pi / 2, math.pi / 2, max(spec.arc_points, 96))
    tol = spec.quad_tol * max(abs(c2), 1e-300) * 1e-2
    s_max = 80.0 / a.real + 2.0 * r
    rays = integrate_adaptive(lambda s: F(-1j * r - s) - F(1j * r - s),
                              geometric_breakpoints(0.0, s_max, first=min(1.0, r)), tol)
    if not rays.converged:
        raise QuadratureError("ray quadrature did not converge")
    value = complex(math.fsum([c2.real, rays.value.real]), math.fsum([c2.imag, rays.value.imag]))
    return value, complex(bessel_closed_form(a, b))


def contour_rows(sample: DisorderSample, params: ModelParams, points: CriticalPoints,
                 spec: ContourSpec | None = None, n: int = 200) -> list[dict]:
    """Sampled upper half of both paths with the integrand modulus, for offline plotting."""
    spec = spec or ContourSpec()
    rows = []
    targets = [("denominator", 0.0, False)]
    if params.xi != 0.0:
        targets.insert(0, ("numerator", params.field_shift, True))
    for name, shift, shifted in targets:
        contour, _ = _auto_contour(sample, points, spec, shifted)
        H_eff = params.H + shift * math.sqrt(sample.dim)
        expo = ShiftedExponent(sample, params.beta, H_eff, contour.radius)
        path = contour.sample_path(n)
        w = np.array([p[2] for p in path])
        logmod = expo(w).real
        z = contour.to_z(w)
        for (piece, par, wk), zk, lm in zip(path, z, logmod):
            rows.append({"integral": name, "piece": piece, "param": par,
                         "re_w": wk.real, "im_w": wk.imag, "re_z": float(zk.real), "im_z": float(zk.imag),
                         "abs_integrand": math.exp(lm) if lm < 700 else math.inf})
    return rows
