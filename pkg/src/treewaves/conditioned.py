"""Gibbs sampling of the wave process on a geodesic conditioned to stay above
a level.

Conditioning a path coordinate on the rest of the path reduces, by the order-2
Markov property, to conditioning on its neighbors within distance two.  The
full conditionals are therefore lower-truncated normals whose means are short
linear stencils:

    interior:  a1/2 * (nearest sum) - a2/2 * (second-nearest sum)
    ends:      (lambda * (next) - (next-next)) / (d-1)   and its mirror
    2nd/2nd-last: ((d-1) lambda psi_out + d lambda psi_in - (d-1) psi_in2)
                  / (lambda^2 + (d-1)^2)

`build_gibbs_plan` derives every stencil twice, from the closed forms above
and from Schur complements of the local covariance window, and refuses to
proceed if they disagree; `gibbs_run` then runs a systematic-scan sampler,
optionally vectorized across independent chains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .gaussian import _truncated_standard_vec, conditional
from .spectral import CovarianceProfile, repulsion_coefficients

# Max |closed form - Schur| tolerated across plan coefficients.
PLAN_AGREEMENT_TOL = 1e-10

DEFAULT_BURNIN = 1000
DEFAULT_THIN = 10


@dataclass(frozen=True)
class GibbsPlan:
    """Precomputed full-conditional stencils for a path of n coordinates.

    neighbors[k] / coeffs[k] give the conditional mean of coordinate k (0-based)
    as a dot product over neighboring coordinates; sigma2[k] is the residual
    variance.  Stencils depend only on (d, lambda, n), not on the level.
    """

    profile: CovarianceProfile
    n: int
    neighbors: tuple[np.ndarray, ...]
    coeffs: tuple[np.ndarray, ...]
    sigma2: np.ndarray


def _closed_form_stencil(
    profile: CovarianceProfile, n: int, k: int
) -> np.ndarray | None:
    """Closed-form conditional-mean coefficients at 0-based position k.

    Returns None when the position's full stencil does not fit in the path
    (short paths near the ends), in which case only the Schur route applies.
    Coefficients align with ascending neighbor index.
    """
    d, lam = profile.point.d, profile.point.lam
    if k == 0 and n >= 3:
        return np.array([lam, -1.0]) / (d - 1.0)
    if k == n - 1 and n >= 3:
        return np.array([-1.0, lam]) / (d - 1.0)
    denom = lam * lam + (d - 1.0) ** 2
    if k == 1 and n >= 4:
        return np.array([(d - 1.0) * lam, d * lam, -(d - 1.0)]) / denom
    if k == n - 2 and n >= 4:
        return np.array([-(d - 1.0), d * lam, (d - 1.0) * lam]) / denom
    if 2 <= k <= n - 3:
        rep = repulsion_coefficients(profile.point)
        return np.array([-rep.a2, rep.a1, rep.a1, -rep.a2]) / 2.0
    return None


def build_gibbs_plan(profile: CovarianceProfile, n: int) -> GibbsPlan:
    """Derive and cross-check the full-conditional stencils for an n-path."""
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise ValidationError(f"path length must be an integer, got {n!r}")
    if n < 1:
        raise ValidationError(f"path length must be >= 1, got {n}")
    n = int(n)
    profile.require(min(4, n - 1) if n > 1 else 0)
    neighbors: list[np.ndarray] = []
    coeffs: list[np.ndarray] = []
    sigma2 = np.empty(n)
    for k in range(n):
        nbrs = np.array(
            [j for j in range(max(0, k - 2), min(n, k + 3)) if j != k], dtype=np.int64
        )
        window = np.concatenate(([k], nbrs))
        dist = np.abs(window[:, None] - window[None, :])
        cov = profile.phi[dist]
        cond = conditional(cov, given=range(1, len(window)), target=[0])
        coef = cond.coeff[0]
        var = float(cond.residual[0, 0])
        closed = _closed_form_stencil(profile, n, k)
        if closed is not None:
            gap = float(np.max(np.abs(coef - closed)))
            if gap > PLAN_AGREEMENT_TOL:
                raise NumericalError(
                    f"conditional stencil mismatch at position {k + 1}: "
                    f"closed form and Schur complement differ by {gap:.3e}"
                )
        neighbors.append(nbrs)
        coeffs.append(coef)
        sigma2[k] = var
    return GibbsPlan(
        profile=profile,
        n=n,
        neighbors=tuple(neighbors),
        coeffs=tuple(coeffs),
        sigma2=sigma2,
    )


@dataclass(frozen=True)
class ConditionedPathState:
    """One retained Gibbs state of the conditioned path (all values > alpha)."""

    n: int
    alpha: float
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.n,):
            raise ValidationError(
                f"state shape {vals.shape} does not match path length {self.n}"
            )
        if vals.min(initial=math.inf) <= self.alpha:
            raise ValidationError("conditioned state must lie strictly above alpha")
        object.__setattr__(self, "values", vals)


def _gibbs_run_matrix(
    plan: GibbsPlan,
    alpha: float,
    sweeps: int,
    burnin: int,
    thin: int,
    rng: np.random.Generator,
    chains: int,
) -> np.ndarray:
    """Systematic-scan Gibbs, vectorized across chains.

    Returns retained states as an array of shape (chains, kept, n); sweep
    `burnin + i * thin` is the i-th retained state (1-based i).
    """
    if not math.isfinite(alpha):
        raise ValidationError(f"alpha must be finite, got {alpha!r}")
    if sweeps < 1:
        raise ValidationError(f"sweeps must be >= 1, got {sweeps}")
    if burnin < 0 or thin < 1 or chains < 1:
        raise ValidationError("need burnin >= 0, thin >= 1, chains >= 1")
    if sweeps <= burnin:
        raise ValidationError(f"sweeps ({sweeps}) must exceed burnin ({burnin})")
    n = plan.n
    sd = np.sqrt(plan.sigma2)
    state = np.full((chains, n), max(alpha, 0.0) + 1.0)
    kept = (sweeps - burnin) // thin
    out = np.empty((chains, kept, n))
    stored = 0
    for sweep in range(1, sweeps + 1):
        for k in range(n):
            nbrs = plan.neighbors[k]
            if nbrs.size:
                mean = state[:, nbrs] @ plan.coeffs[k]
            else:
                mean = np.zeros(chains)
            a = (alpha - mean) / sd[k]
            state[:, k] = mean + sd[k] * _truncated_standard_vec(a, rng)
        if sweep > burnin and (sweep - burnin) % thin == 0 and stored < kept:
            out[:, stored, :] = state
            stored += 1
    return out[:, :stored, :]


def gibbs_run(
    plan: GibbsPlan,
    alpha: float,
    sweeps: int,
    burnin: int = DEFAULT_BURNIN,
    thin: int = DEFAULT_THIN,
    rng: np.random.Generator | None = None,
    chains: int = 1,
) -> list[ConditionedPathState]:
    """Run the conditioned-path Gibbs sampler and return retained states.

    With several chains the states come back chain-major: every retained sweep
    of chain 0, then of chain 1, and so on, so batch statistics over contiguous
    stretches respect the serial structure.
    """
    if rng is None:
        raise ValidationError("gibbs_run requires an explicit random generator")
    mat = _gibbs_run_matrix(plan, alpha, sweeps, burnin, thin, rng, chains)
    states: list[ConditionedPathState] = []
    for c in range(mat.shape[0]):
        for t in range(mat.shape[1]):
            states.append(
                ConditionedPathState(n=plan.n, alpha=alpha, values=mat[c, t].copy())
            )
    return states


def batch_means_ess(series: np.ndarray) -> float:
    """Effective sample size by the batch-means method (sqrt(N) batches)."""
    y = np.asarray(series, dtype=float)
    n = y.size
    if n < 4:
        return float(n)
    nb = int(math.isqrt(n))
    m = n // nb
    trimmed = y[: nb * m].reshape(nb, m)
    var_total = float(y.var(ddof=1))
    if var_total == 0.0:
        return float(n)
    var_batch = float(trimmed.mean(axis=1).var(ddof=1))
    tau = m * var_batch / var_total
    return float(n / max(tau, 1e-12))


@dataclass(frozen=True)
class TailPoint:
    x: float
    p_hat: float
    stderr: float


@dataclass(frozen=True)
class RepulsionTail:
    """Empirical upper-tail curve of one conditioned coordinate."""

    k: int
    points: tuple[TailPoint, ...]
    ess: float


def repulsion_tail(
    states: list[ConditionedPathState], k: int, x_grid
) -> RepulsionTail:
    """Tail estimates P(value at position k >= x) over a grid of levels.

    `k` is the 1-based path position.  Standard errors are binomial with the
    batch-means effective sample size in place of the raw count.
    """
    if not states:
        raise ValidationError("repulsion_tail needs at least one state")
    n = states[0].n
    if any(s.n != n for s in states):
        raise ValidationError("states mix different path lengths")
    if k < 1 or k > n:
        raise ValidationError(f"position k={k} outside 1..{n}")
    series = np.array([s.values[k - 1] for s in states])
    ess = batch_means_ess(series)
    points = []
    for x in np.asarray(x_grid, dtype=float):
        p = float(np.mean(series >= x))
        se = math.sqrt(max(p * (1.0 - p), 0.0) / ess) if ess > 0 else math.inf
        points.append(TailPoint(x=float(x), p_hat=p, stderr=se))
    return RepulsionTail(k=int(k), points=tuple(points), ess=ess)
