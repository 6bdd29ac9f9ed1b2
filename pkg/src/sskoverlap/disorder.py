"""Resolvent sums at the top eigenvalue, the Xi_N statistic and the event E_eps."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .rmt import DisorderSample


class DegenerateSampleError(ValueError):
    """The top gap is too small for the resolvent sums to be meaningful."""


def _top_gaps(sample: DisorderSample) -> np.ndarray:
    if sample.dim < 2:
        raise ValueError("resolvent sums need N >= 2")
    lam = sample.lambdas
    gaps = lam[0] - lam[1:]
    if gaps[0] <= 1e-14 * max(abs(lam[0]), 1e-300):
        raise DegenerateSampleError(
            f"top gap lambda_1 - lambda_2 = {gaps[0]:.3e} is degenerate")
    return gaps


def resolvent_sum(sample: DisorderSample, m: int, weighted: bool = False) -> float:
    """Sum over i >= 2 of w_i / (gap_i)^m with w_i = 1 or n_i^2.

    For m = 1 the gaps are on the lambda scale and the sum is divided by N.
    For m >= 2 the gaps are on the edge scale a_i = N^(2/3)(lambda_i - 2)
    and the sum is not normalised.
    """
    if int(m) != m or m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    gaps = _top_gaps(sample)
    w = sample.projections[1:] ** 2 if weighted else np.ones_like(gaps)
    N = sample.dim
    if m == 1:
        return math.fsum(w / gaps) / N
    scaled = N ** (2.0 / 3.0) * gaps
    return math.fsum(w / scaled ** m)


def xi_statistic(sample: DisorderSample) -> float:
    return sample.dim ** (1.0 / 3.0) * (resolvent_sum(sample, 1, False) - 1.0)


@dataclass(frozen=True)
class EventReport:
    epsilon: float
    dim: int
    clause_n1: bool
    clause_sum1_plain: bool
    clause_sum1_weighted: bool
    clause_m2_plain: bool
    clause_m2_weighted: bool
    clause_m3_plain: bool
    clause_m3_weighted: bool
    n1_sq: float
    sum1_plain: float
    sum1_weighted: float
    m2_plain: float
    m2_weighted: float
    m3_plain: float
    m3_weighted: float
    # implied constant used for the two "1 + O(N^(-1/3+eps))" clauses
    o_constant: float = 1.0

    @property
    def clauses(self) -> dict[str, bool]:
        return {k: v for k, v in asdict(self).items() if k.startswith("clause_")}

    @property
    def values(self) -> dict[str, float]:
        keys = ("n1_sq", "sum1_plain", "sum1_weighted", "m2_plain",
                "m2_weighted", "m3_plain", "m3_weighted")
        return {k: getattr(self, k) for k in keys}

    @property
    def member(self) -> bool:
        return all(self.clauses.values())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["member"] = self.member
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def check_event(sample: DisorderSample, epsilon: float,
                o_constant: float = 1.0) -> EventReport:
    """Evaluate every clause of E_eps literally.

    The O(.) clauses pass iff |sum - 1| <= o_constant * N^(-1/3 + eps).
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    N = sample.dim
    n1_sq = float(sample.projections[0] ** 2)
    s1p = resolvent_sum(sample, 1, False)
    s1w = resolvent_sum(sample, 1, True)
    m2p = resolvent_sum(sample, 2, False)
    m2w = resolvent_sum(sample, 2, True)
    m3p = resolvent_sum(sample, 3, False)
    m3w = resolvent_sum(sample, 3, True)
    window = o_constant * N ** (-1.0 / 3.0 + epsilon)
    cap = N ** epsilon
    return EventReport(
        epsilon=epsilon,
        dim=N,
        clause_n1=N ** (-epsilon) < n1_sq < epsilon * math.log(N),
        clause_sum1_plain=abs(s1p - 1.0) <= window,
        clause_sum1_weighted=abs(s1w - 1.0) <= window,
        clause_m2_plain=m2p <= cap,
        clause_m2_weighted=m2w <= cap,
        clause_m3_plain=m3p <= cap,
        clause_m3_weighted=m3w <= cap,
        n1_sq=n1_sq,
        sum1_plain=s1p,
        sum1_weighted=s1w,
        m2_plain=m2p,
        m2_weighted=m2w,
        m3_plain=m3p,
        m3_weighted=m3w,
        o_constant=o_constant,
    )


def event_probability_bound(N: int, epsilon: float) -> float:
    """Lower bound 1 - N^(-eps/10) on P(E_eps)."""
    return 1.0 - N ** (-epsilon / 10.0)
