"""Dense Gaussian machinery: covariance assembly, rank-aware factorization,
conditioning, truncated-normal sampling, and the bivariate orthant probability.

Ball covariances of the wave process are singular by construction (one exact
linear constraint per interior vertex), so everything here is written against
possibly rank-deficient matrices: factorization keeps only eigenvalues above a
relative cutoff and conditioning uses the matching eigenvalue-clamped
pseudo-inverse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtr, ndtri

from .errors import NumericalError, ValidationError
from .spectral import CovarianceProfile
from .tree import VertexId, pairwise_distances

# Eigenvalues below RANK_RTOL * (largest eigenvalue) count as zero, both when
# factoring and when inverting for conditioning.
RANK_RTOL = 1e-9
# Any eigenvalue below this absolute floor means the input was never a
# covariance matrix; that is an upstream bug, not data.
NEGATIVE_EIGENVALUE_FLOOR = -1e-6
# Standardized truncation point beyond which inverse-CDF sampling gives way to
# tail rejection.
_INVERSE_CDF_MAX = 4.0

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _norm_q(x):
    """Upper tail Q(x) = P(N(0,1) > x)."""
    return ndtr(-x)


def assemble_covariance(
    profile: CovarianceProfile, vertices: Sequence[VertexId]
) -> np.ndarray:
    """Covariance matrix phi(distance(u, v)) over an ordered vertex set."""
    if len(vertices) == 0:
        raise ValidationError("assemble_covariance needs at least one vertex")
    dist = pairwise_distances(tuple(vertices))
    top = int(dist.max())
    profile.require(top)  # fails loudly when the profile is too short
    return profile.phi[dist]


@dataclass(frozen=True)
class PsdFactor:
    """Semidefinite square root: factor has shape (n, rank), factor @ factor.T
    reconstructs the input up to the rank cutoff."""

    factor: np.ndarray
    rank: int

    def draw(self, rng: np.random.Generator, reps: int = 1) -> np.ndarray:
        """reps zero-mean Gaussian vectors with this covariance, shape (reps, n)."""
        z = rng.standard_normal((reps, self.rank))
        return z @ self.factor.T


def factor_psd(matrix: np.ndarray) -> PsdFactor:
    """Eigenvalue factorization of a positive semidefinite matrix.

    Eigenvalues below RANK_RTOL * max eigenvalue are clamped to zero and
    excluded from the factor; an eigenvalue below NEGATIVE_EIGENVALUE_FLOOR is
    rejected outright.
    """
    c = np.asarray(matrix, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {c.shape}")
    if not np.allclose(c, c.T, rtol=0.0, atol=1e-12):
        raise ValidationError("covariance matrix must be symmetric")
    w, v = np.linalg.eigh(0.5 * (c + c.T))
    if w[-1] <= 0.0:
        if w[0] < NEGATIVE_EIGENVALUE_FLOOR:
            raise NumericalError(f"eigenvalue {w[0]:.3e} below the PSD floor")
        return PsdFactor(factor=np.zeros((c.shape[0], 0)), rank=0)
    if w[0] < NEGATIVE_EIGENVALUE_FLOOR:
        raise NumericalError(
            f"eigenvalue {w[0]:.3e} below the PSD floor; not a covariance matrix"
        )
    keep = w > RANK_RTOL * w[-1]
    factor = v[:, keep] * np.sqrt(w[keep])
    return PsdFactor(factor=factor, rank=int(np.count_nonzero(keep)))


@dataclass(frozen=True)
class ConditionalGaussian:
    """Conditional law of the target block given the conditioning block:
    mean = coeff @ given_values, covariance = residual."""

    coeff: np.ndarray
    residual: np.ndarray


def conditional(
    matrix: np.ndarray, given: Sequence[int], target: Sequence[int]
) -> ConditionalGaussian:
    """Schur-complement conditioning with an eigenvalue-clamped pseudo-inverse.

    The pseudo-inverse cutoff matches the factorization cutoff (RANK_RTOL
    relative), so conditioning on a singular block is well defined as long as
    the conditioning values respect the block's exact linear constraints.
    """
    c = np.asarray(matrix, dtype=float)
    given = list(int(i) for i in given)
    target = list(int(i) for i in target)
    if len(target) == 0:
        raise ValidationError("conditional requires a nonempty target block")
    if set(given) & set(target):
        raise ValidationError("given and target blocks must be disjoint")
    n = c.shape[0]
    for i in given + target:
        if i < 0 or i >= n:
            raise ValidationError(f"index {i} outside matrix of size {n}")
    c22 = c[np.ix_(target, target)]
    if len(given) == 0:
        return ConditionalGaussian(
            coeff=np.zeros((len(target), 0)), residual=c22.copy()
        )
    c11 = c[np.ix_(given, given)]
    c21 = c[np.ix_(target, given)]
    w, v = np.linalg.eigh(0.5 * (c11 + c11.T))
    top = max(float(w[-1]), 0.0)
    inv_w = np.where(w > RANK_RTOL * top, 1.0 / np.where(w > 0, w, 1.0), 0.0)
    coeff = (c21 @ v) * inv_w @ v.T
    residual = c22 - coeff @ c21.T
    residual = 0.5 * (residual + residual.T)
    return ConditionalGaussian(coeff=coeff, residual=residual)


@dataclass(frozen=True)
class TruncatedGaussian:
    """Normal(mean, variance) conditioned on exceeding `lower`."""

    mean: float
    variance: float
    lower: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.mean) or not math.isfinite(self.lower):
            raise ValidationError("truncated normal needs finite mean and lower bound")
        if not self.variance >= 0.0:
            raise ValidationError(f"variance must be >= 0, got {self.variance!r}")


def _truncated_standard_vec(a: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draws of a standard normal conditioned on exceeding a, elementwise.

    Inverse CDF on the survival scale for a <= 4 (well conditioned there);
    shifted-exponential rejection beyond (acceptance -> 1 as a grows).
    """
    a = np.asarray(a, dtype=float)
    out = np.empty_like(a)
    easy = a <= _INVERSE_CDF_MAX
    if np.any(easy):
        q = _norm_q(a[easy])
        u = rng.random(q.shape)
        # (1 - u) lies in (0, 1], so the argument stays inside (0, q].
        out[easy] = -ndtri(np.minimum((1.0 - u) * q, np.nextafter(1.0, 0.0)))
    hard = ~easy
    if np.any(hard):
        ah = a[hard]
        lam = 0.5 * (ah + np.sqrt(ah * ah + 4.0))
        vals = np.empty_like(ah)
        pending = np.ones(ah.shape, dtype=bool)
        while np.any(pending):
            k = int(pending.sum())
            x = ah[pending] + rng.exponential(size=k) / lam[pending]
            accept = rng.random(k) <= np.exp(-0.5 * (x - lam[pending]) ** 2)
            idx = np.flatnonzero(pending)[accept]
            vals[idx] = x[accept]
            pending[idx] = False
        out[hard] = vals
    return out


def sample_truncated(t: TruncatedGaussian, rng: np.random.Generator) -> float:
    """One draw from a lower-truncated normal."""
    sd = math.sqrt(t.variance)
    if sd == 0.0:
        if t.mean >= t.lower:
            return t.mean
        raise ValidationError(
            "degenerate truncated normal: zero variance with mean below the bound"
        )
    a = (t.lower - t.mean) / sd
    return t.mean + sd * float(_truncated_standard_vec(np.array([a]), rng)[0])


def orthant_edge_probability(rho: float, alpha: float) -> float:
    """P(X > alpha, Y > alpha) for a standard bivariate normal with correlation rho.

    Computed by 1-D adaptive quadrature of
        integral_alpha^inf  pdf(x) * Q((alpha - rho x) / sqrt(1 - rho^2)) dx,
    accurate to about 1e-10 absolute.  |rho| = 1 reduces to the exact limits
    (X = Y, respectively Y = -X).
    """
    rho = float(rho)
    alpha = float(alpha)
    if not math.isfinite(alpha):
        raise ValidationError(f"alpha must be finite, got {alpha!r}")
    if not math.isfinite(rho) or abs(rho) > 1.0:
        raise ValidationError(f"correlation must lie in [-1, 1], got {rho!r}")
    if rho == 1.0:
        return float(_norm_q(alpha))
    if rho == -1.0:
        return max(0.0, 1.0 - 2.0 * float(ndtr(alpha)))
    s = math.sqrt(1.0 - rho * rho)

    def integrand(x: float) -> float:
        return math.exp(-0.5 * x * x) / _SQRT_2PI * float(_norm_q((alpha - rho * x) / s))

    # For |rho| near 1 the inner factor switches on a short scale around
    # x = alpha / rho; splitting there keeps the adaptive rule honest.
    pieces = [alpha, math.inf]
    if rho != 0.0 and alpha / rho > alpha:
        pieces = [alpha, alpha / rho, math.inf]
    total = 0.0
    for lo, hi in zip(pieces[:-1], pieces[1:]):
        val, _ = quad(integrand, lo, hi, epsabs=1e-12, epsrel=1e-11, limit=200)
        total += val
    return min(max(total, 0.0), 1.0)
