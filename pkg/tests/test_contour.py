import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate
from scipy.special import logsumexp

from sskoverlap import contour as cq
from sskoverlap.contour import (Contour, ContourError, ContourSpec, ShiftedExponent,
                                bessel_identity, build_contour, integrate_shifted,
                                integrate_shifted_detail, log_partition, log_tail_estimate,
                                mgf_exact, tail_estimate, truncation_check)
from sskoverlap.disorder import check_event
from sskoverlap.mc import McConfig, log_gibbs_weight, mc_mgf, uniform_sphere
from sskoverlap.rmt import sample_goe_dense, sample_spectrum_fast
from sskoverlap.saddle import ModelParams, eval_G, solve_critical

from conftest import synthetic


def vertical_line_integral(sample, params, shift, points, offset=1.0):
    """Integral of exp((N/2)(G_s(z) - G_s(gamma_s))) dz on Re z = gamma_s + offset.

    QUADPACK's Fourier-weight rule: on the line the integrand is
    e^{i N beta y / 2} R(y) with R slowly varying, and conjugate symmetry
    leaves 2i * integral_0^inf Re(e^{i w y} R(y)) dy.
    """
    N = sample.dim
    g = points.gamma_m if shift else points.gamma
    g_crit = eval_G(g, sample, params, shift).real
    c, om = g + offset, 0.5 * N * params.beta

    def R(y):
        return np.exp(0.5 * N * (eval_G(c + 1j * y, sample, params, shift) - g_crit) - 1j * om * y)

    re = integrate.quad(lambda y: R(y).real, 0, np.inf, weight="cos", wvar=om, limlst=200)[0]
    im = integrate.quad(lambda y: R(y).imag, 0, np.inf, weight="sin", wvar=om, limlst=200)[0]
    return 2j * (re - im)


def _on_event(N, count, eps=0.25, start=0):
    out, k = [], start
    while len(out) < count:
        s = sample_spectrum_fast(N, k)
        k += 1
        if check_event(s, eps).member:
            out.append(s)
    return out


# ---------------------------------------------------------------- spec and path


@pytest.mark.parametrize("kw", [dict(e_hat=0.0), dict(e_hat=1 / 6), dict(delta=0.4),
                                dict(quad_tol=0.0), dict(arc_points=2)])
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        ContourSpec(**kw)


def test_default_spec():
    spec = ContourSpec()
    assert spec.e_hat == pytest.approx(0.1)
    assert spec.delta == 0.25 and spec.quad_tol == 1e-10 and spec.arc_points == 64


def test_path_geometry():
    s = sample_spectrum_fast(2000, 1)
    p = ModelParams(2000, 2.0, 1.0, 1.0)
    pts = solve_critical(s, p)
    c = build_contour(s, pts, ContourSpec(window=2 * pts.p_m))
    assert c.to_z(c.arc(0.0)) == pytest.approx(pts.gamma_m, abs=1e-14)
    assert c.tail(0.0) == c.leg(c.window)
    assert c.t_max == pytest.approx(2 * (pts.gamma_m - s.lambdas[-1]) * 2000, rel=1e-12)
    # upper pieces never reach the real axis left of lambda_1
    w = np.array([q[2] for q in c.sample_path(50)])
    assert np.all((w.imag > 0) | (w.real > 0))


def test_arc_swallowing_legs_is_an_error():
    s = sample_spectrum_fast(100, 2)
    pts = solve_critical(s, ModelParams(100, 2.0, 1.0, 1.0))
    with pytest.raises(ContourError):
        build_contour(s, pts, ContourSpec(window=0.5 * pts.p_m))


def test_conjugate_half_gives_conjugate_integrand():
    s = sample_spectrum_fast(30, 2)
    e = ShiftedExponent(s, 2.0, 1.0, 1.3)
    w = np.array([0.3 + 2j, -5 + 40j, 1.3 * np.exp(0.4j)])
    np.testing.assert_allclose(e(w.conj()), e(w).conj(), rtol=1e-13)


# ---------------------------------------------------------------- integrals


def test_imaginary_dominance():
    s = sample_spectrum_fast(50, 3)
    p = ModelParams(50, 2.0, 1.0, 0.5)
    pts = solve_critical(s, p)
    for shift in (0.0, p.field_shift):
        val = integrate_shifted(s, p, shift, pts)
        assert abs(val.real) / abs(val.imag) <= 1e-6


def test_n1_against_vertical_line_and_closed_form():
    s = synthetic([0.0], [1.0])
    p = ModelParams(1, 2.0, 1.0)
    pts = solve_critical(s, p)
    val = integrate_shifted(s, p, 0.0, pts)
    assert val == pytest.approx(vertical_line_integral(s, p, 0.0, pts), rel=1e-8)
    # at N = 1 the integral is the Bessel identity with a = beta/2, b = (beta H n)^2 / 2
    g_crit = eval_G(pts.gamma, s, p).real
    closed = 2j * math.sqrt(math.pi) / math.sqrt(1.0) * math.cosh(2.0) * math.exp(-0.5 * g_crit)
    assert val == pytest.approx(closed, rel=1e-10)


@pytest.mark.parametrize("shifted", [False, True])
def test_n6_against_vertical_line(shifted):
    s = sample_goe_dense(6, 3)
    p = ModelParams(6, 0.8, 1.0, 0.7)
    pts = solve_critical(s, p)
    shift = p.field_shift if shifted else 0.0
    assert integrate_shifted(s, p, shift, pts) == pytest.approx(
        vertical_line_integral(s, p, shift, pts, offset=2.0), rel=1e-8)


def test_leading_order_integral_at_large_n():
    # exact integral against its leading-order closed form, beta = 2, H = 1,
    # field shift 1/2 (xi = 1 in the MGF parameterisation)
    ratios = []
    for s in _on_event(2000, 10):
        p = ModelParams(2000, 2.0, 1.0, 1.0)
        pts = solve_critical(s, p)
        val = integrate_shifted(s, p, p.field_shift, pts)
        sm, n1, b = pts.p_m, abs(s.projections[0]), p.beta
        lead = (2j * math.sqrt(2 * math.pi * sm) * math.exp(-(b - 1) * sm + 0.5)
                / (2000 * math.sqrt(b - 1)) * math.cosh((p.H + p.shift_H) * n1 * math.sqrt(b * (b - 1))))
        ratios.append((val / lead).real)
    assert abs(np.median(ratios) - 1) <= 0.15


# ---------------------------------------------------------------- MGF


def test_mgf_xi_zero_is_exactly_one():
    s = sample_spectrum_fast(80, 5)
    res = mgf_exact(s, ModelParams(80, 2.0, 1.0, 0.0))
    assert res.value == 1.0 and res.method == "contour-exact"


def test_mgf_matches_monte_carlo_n6():
    s = sample_goe_dense(6, 7)
    p = ModelParams(6, 0.8, 1.0, 0.7)
    exact = mgf_exact(s, p)
    mc = mc_mgf(s, p, McConfig(10 ** 6, 7))
    assert abs(exact.value - mc.value) <= 3 * mc.abs_error_estimate
    assert exact.diagnostics["imag_residue"] <= 1e-6


@pytest.mark.parametrize("N, seed", [(8, 1), (50, 2), (500, 3)])
def test_contour_independence(N, seed):
    s = sample_spectrum_fast(N, seed)
    p = ModelParams(N, 2.0, 1.0, 1.0)
    pts = solve_critical(s, p)
    ref = mgf_exact(s, p, ContourSpec(), pts).value
    r = max(pts.p, pts.p_m)
    variants = [ContourSpec(e_hat=0.05), ContourSpec(e_hat=0.15), ContourSpec(delta=0.125),
                ContourSpec(delta=0.15), ContourSpec(window=1.5 * r), ContourSpec(window=6 * r),
                ContourSpec(window=3 * r, delta=0.29)]
    for spec in variants:
        assert mgf_exact(s, p, spec, pts).value == pytest.approx(ref, rel=1e-6)


def test_mgf_json_round_trip():
    import json
    s = sample_spectrum_fast(30, 1)
    d = json.loads(mgf_exact(s, ModelParams(30, 2.0, 1.0, 0.5)).to_json())
    assert d["value"] > 0 and "imag_residue" in d["diagnostics"]


# ---------------------------------------------------------------- Bessel


@pytest.mark.parametrize("a, b, expected", [
    (0.5, 0.0, 2j * math.sqrt(2 * math.pi)),
    (1.0, 1.0, 2j * math.sqrt(math.pi) * math.cosh(2.0)),
])
def test_bessel_examples(a, b, expected):
    q, c = bessel_identity(a, b)
    assert c == pytest.approx(expected, rel=1e-14)
    assert abs(q - c) / abs(c) <= 1e-8


def test_bessel_reference_values():
    assert abs(bessel_identity(0.5, 0.0)[1]) == pytest.approx(5.01326, abs=1e-5)
    assert abs(bessel_identity(1.0, 1.0)[1]) == pytest.approx(13.3366, abs=1e-4)


@pytest.mark.parametrize("a", [0.1, 0.7, 3.0 + 2.0j, 10.0])
def test_bessel_power_law_at_b_zero(a):
    q, _ = bessel_identity(a, 0.0)
    assert q == pytest.approx(2j * math.sqrt(math.pi) / np.sqrt(complex(a)), rel=1e-8)


@pytest.mark.parametrize("a", [0.1, 0.5, 2.0 + 1.0j, 10.0])
@pytest.mark.parametrize("b", [-10.0, -1.0, 1.0 + 1.0j, 10.0])
def test_bessel_grid(a, b):
    q, c = bessel_identity(a, b)
    assert abs(q - c) / abs(c) <= 1e-8


def test_bessel_rejects_bad_a():
    with pytest.raises(ValueError):
        bessel_identity(-1.0, 1.0)


# ---------------------------------------------------------------- tails


@pytest.mark.parametrize("N, seed", [(6, 1), (6, 2), (12, 3), (20, 1)])
def test_doubling_t_max_is_dominated_by_tail_bound(N, seed):
    s = sample_spectrum_fast(N, seed)
    p = ModelParams(N, 2.0, 1.0, 1.0)
    tc = truncation_check(s, p)
    assert tc.change > 0  # small N: truncation is visible
    assert tc.dominated


def test_truncated_and_closed_agree_within_bound():
    s = sample_spectrum_fast(6, 2)
    p = ModelParams(6, 2.0, 1.0, 1.0)
    tc = truncation_check(s, p)
    closed = mgf_exact(s, p).value
    assert abs(closed - tc.value) <= tc.bound


def test_tail_estimate_decreases_in_n():
    meds = []
    for N in (250, 500, 1000, 2000):
        vals = []
        for k in range(20):
            s = sample_spectrum_fast(N, k)
            p = ModelParams(N, 2.0, 1.0, 1.0)
            vals.append(log_tail_estimate(s, p, solve_critical(s, p)))
        meds.append(np.median(vals))
    assert all(b < a for a, b in zip(meds, meds[1:]))


def test_tail_estimate_order_at_n1000():
    s = sample_spectrum_fast(1000, 4)
    p = ModelParams(1000, 2.0, 1.0, 1.0)
    est = tail_estimate(s, p, solve_critical(s, p))
    assert 0.0 <= est <= 1000 ** (-0.1 / 3)


def test_non_decaying_tail_is_flagged(monkeypatch):
    s = sample_spectrum_fast(20, 1)
    p = ModelParams(20, 2.0, 1.0, 1.0)
    pts = solve_critical(s, p)
    monkeypatch.setattr(ShiftedExponent, "__call__", lambda self, w: np.zeros(np.shape(w), complex))
    with pytest.raises(ContourError):
        log_tail_estimate(s, p, pts)


def test_modulus_monotone_along_tail():
    s = sample_spectrum_fast(200, 6)
    p = ModelParams(200, 2.0, 1.0, 1.0)
    pts = solve_critical(s, p)
    c = build_contour(s, pts, ContourSpec(window=2 * pts.p_m))
    e = ShiftedExponent(s, p.beta, p.H + p.shift_H, pts.p_m)
    t = np.linspace(0, c.t_max, 4000)
    lm = e(c.tail(t)).real
    peak = int(np.argmax(lm))
    assert np.all(np.diff(lm[peak:]) < 1e-12)


def test_exponent_overflow_guard():
    e = ShiftedExponent(synthetic([0.0], [1.0]), 2.0, 0.0, 1.0)
    with pytest.raises(ArithmeticError):
        e.integrand(np.array([2000.0 + 0j]))


# ---------------------------------------------------------------- partition function


@pytest.mark.parametrize("g", [0.3, 1.0, -2.0])
def test_log_partition_n1(g):
    s = synthetic([0.0], [g])
    assert log_partition(s, ModelParams(1, 1.0, 1.0)) == pytest.approx(math.log(math.cosh(g)), abs=1e-6)


def test_log_partition_high_temperature():
    s = sample_spectrum_fast(5, 1)
    assert log_partition(s, ModelParams(5, 1e-7, 1.0)) == pytest.approx(0.0, abs=1e-5)


def test_log_partition_shift():
    s = sample_spectrum_fast(10, 2)
    p = ModelParams(10, 1.3, 0.7)
    c = 0.37
    lz = log_partition(s, p)
    lz_shift = log_partition(synthetic(s.lambdas + c, s.projections), p)
    assert lz_shift - lz == pytest.approx(10 * 1.3 * c / 2, abs=1e-9)


def test_log_partition_against_uniform_average():
    s = sample_goe_dense(4, 1)
    p = ModelParams(4, 0.8, 1.0)
    lw = log_gibbs_weight(uniform_sphere(np.random.default_rng(0), 10 ** 6, 4), s, p)
    w = np.exp(lw - lw.max())
    est = logsumexp(lw) - math.log(lw.size)
    se = np.std(w) / np.mean(w) / math.sqrt(lw.size)  # delta method on the log
    assert abs(log_partition(s, p) - est) <= 4 * se
