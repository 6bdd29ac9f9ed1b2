"""GOE disorder samples and semicircle / soft-edge reference quantities.

A disorder sample is the pair (eigenvalues of the coupling matrix M,
projections of the field vector g onto the eigenbasis).  Two samplers are
provided: a dense one that actually builds M and g, and a fast one based on
the tridiagonal beta=1 Hermite model, which has the same joint law of
(eigenvalues, projections) by orthogonal invariance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.linalg import LinAlgError, eigvalsh_tridiagonal

Provenance = Literal["dense-goe", "fast-spectral", "synthetic"]

_MAX_RESAMPLES = 16


class SamplingError(RuntimeError):
    """Raised when an eigen-solve fails or a usable sample cannot be drawn."""


@dataclass(frozen=True)
class DisorderSample:
    """One draw of the quenched randomness.

    ``lambdas`` is sorted non-increasingly and ``projections[i]`` is
    ``g . u_i`` for the eigenvector belonging to ``lambdas[i]``.
    """

    dim: int
    lambdas: np.ndarray
    projections: np.ndarray
    seed: int = 0
    provenance: Provenance = "synthetic"

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        proj = np.asarray(self.projections, dtype=float)
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if lam.shape != (self.dim,) or proj.shape != (self.dim,):
            raise ValueError("lambdas and projections must both have length dim")
        if np.any(np.diff(lam) > 0):
            raise ValueError("lambdas must be sorted in non-increasing order")
        lam.setflags(write=False)
        proj.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "projections", proj)

    @property
    def top_gaps(self) -> np.ndarray:
        """lambda_1 - lambda_i for every i (first entry is 0)."""
        return self.lambdas[0] - self.lambdas

    def shifted(self, c: float) -> "DisorderSample":
        return DisorderSample(self.dim, self.lambdas + c, self.projections,
                              self.seed, "synthetic")

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "seed": int(self.seed),
            "provenance": self.provenance,
            "lambdas": [float(x) for x in self.lambdas],
            "projections": [float(x) for x in self.projections],
        }

    def to_json(self) -> str:
        # float repr is the shortest round-trip decimal
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "DisorderSample":
        return cls(int(d["dim"]), np.array(d["lambdas"], dtype=float),
                   np.array(d["projections"], dtype=float),
                   int(d.get("seed", 0)), d.get("provenance", "synthetic"))

    @classmethod
    def from_json(cls, text: str) -> "DisorderSample":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class EdgeProfile:
    a: np.ndarray
    gaps: np.ndarray
    classical: np.ndarray
    reference: np.ndarray = field(repr=False)


def _check_dim(N: int) -> None:
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")


def _rng(seed: int, attempt: int) -> np.random.Generator:
    if attempt == 0:
        return np.random.default_rng(seed)
    return np.random.default_rng([seed, attempt])


def draw_goe_matrix(N: int, seed: int, attempt: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Draw (M, g) with M from GOE (off-diagonal variance 1/N, diagonal 2/N)."""
    _check_dim(N)
    rng = _rng(seed, attempt)
    a = rng.standard_normal((N, N)) / math.sqrt(N)
    m = np.triu(a, 1)
    m = m + m.T + np.diag(math.sqrt(2.0) * np.diag(a))
    g = rng.standard_normal(N)
    return m, g


def _has_ties(lam: np.ndarray) -> bool:
    return lam.size > 1 and bool(np.any(np.diff(lam) >= 0))


def sample_goe_dense(N: int, seed: int) -> DisorderSample:
    """Sample by building the GOE matrix and diagonalising it (N up to a few thousand)."""
    _check_dim(N)
    for attempt in range(_MAX_RESAMPLES):
        m, g = draw_goe_matrix(N, seed, attempt)
        try:
            w, u = np.linalg.eigh(m)
        except np.linalg.LinAlgError as exc:
            raise SamplingError(f"symmetric eigen-solve failed: {exc}") from exc
        order = np.argsort(w)[::-1]
        lam = w[order]
        if _has_ties(lam):
            continue
        proj = u[:, order].T @ g
        return DisorderSample(N, lam, proj, seed, "dense-goe")
    raise SamplingError(f"could not draw a tie-free spectrum in {_MAX_RESAMPLES} attempts")


def sample_spectrum_fast(N: int, seed: int) -> DisorderSample:
    """Sample via the tridiagonal beta=1 model; projections are drawn i.i.d. N(0, 1).

    Diagonal entries are N(0, 2/N) and the k-th off-diagonal entry is
    chi_{N-k} / sqrt(N), which reproduces the eigenvalue law of the dense
    sampler at O(N^2) cost.
    """
    _check_dim(N)
    for attempt in range(_MAX_RESAMPLES):
        rng = _rng(seed, attempt)
        diag = rng.standard_normal(N) * math.sqrt(2.0 / N)
        dof = np.arange(N - 1, 0, -1, dtype=float)
        off = np.sqrt(rng.chisquare(dof)) / math.sqrt(N) if N > 1 else np.empty(0)
        proj = rng.standard_normal(N)
        try:
            if N == 1:
                w = diag.copy()
            else:
                w = eigvalsh_tridiagonal(diag, off)
        except LinAlgError as exc:
            raise SamplingError(f"tridiagonal eigen-solve failed: {exc}") from exc
        lam = w[::-1].copy()
        if _has_ties(lam):
            continue
        return DisorderSample(N, lam, proj, seed, "fast-spectral")
    raise SamplingError(f"could not draw a tie-free spectrum in {_MAX_RESAMPLES} attempts")


def semicircle_cdf(x):
    """CDF of the semicircle law on [-2, 2]."""
    x = np.clip(np.asarray(x, dtype=float), -2.0, 2.0)
    return 0.5 + x * np.sqrt(4.0 - x * x) / (4.0 * np.pi) + np.arcsin(x / 2.0) / np.pi


def semicircle_density(x):
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 2.0
    return np.where(inside, np.sqrt(np.clip(4.0 - x * x, 0.0, None)) / (2.0 * np.pi), 0.0)


def classical_locations(N: int, tol: float = 1e-12) -> np.ndarray:
    """Classical eigenvalue locations: mass i/N of the semicircle lies to the right.

    Bisection on [-2, 2]; vectorised over i.
    """
    _check_dim(N)
    target = 1.0 - np.arange(1, N + 1) / N  # CDF value at the i-th location
    lo = np.full(N, -2.0)
    hi = np.full(N, 2.0)
    # bisection halves [-2, 2] each step; 60 steps is below double resolution
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        below = semicircle_cdf(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.max(hi - lo) < tol:
            break
    out = 0.5 * (lo + hi)
    out[-1] = -2.0
    return out


def airy_reference(i) -> np.ndarray:
    """Heuristic soft-edge location -(3 pi i / 2)^(2/3)."""
    i = np.asarray(i, dtype=float)
    return -np.power(1.5 * np.pi * i, 2.0 / 3.0)


def edge_profile(sample: DisorderSample) -> EdgeProfile:
    N = sample.dim
    a = N ** (2.0 / 3.0) * (sample.lambdas - 2.0)
    return EdgeProfile(
        a=a,
        gaps=a[0] - a[1:],
        classical=classical_locations(N),
        reference=airy_reference(np.arange(1, N + 1)),
    )


def edge_gap_check(sample: DisorderSample, c: float = 0.5, j_min: int = 10) -> bool:
    """True if a_1 - a_j >= c j^(2/3) for every j_min <= j <= N^(2/5)."""
    prof = edge_profile(sample)
    j_max = int(math.floor(sample.dim ** 0.4))
    if j_max < j_min:
        return True
    j = np.arange(j_min, j_max + 1)
    return bool(np.all(prof.a[0] - prof.a[j - 1] >= c * j ** (2.0 / 3.0)))
