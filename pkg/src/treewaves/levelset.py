"""Level-set percolation of the wave process: cluster extraction, path
survival estimators, the pair transfer operator, and the critical threshold.

The quantity driving everything is the path survival probability
P(n) = P(all n geodesic coordinates > alpha).  Its exponential decay rate
r(alpha) = lim P(n+1)/P(n) equals the leading eigenvalue of the positive
transfer operator

    (T g)(x, y) = integral_alpha^inf  p(z | x, y) g(y, z) dz

acting on functions of the last two surviving coordinates, with p the order-2
Markov step density.  The level set on the tree percolates when branching
beats decay, so the critical level alpha_c solves r(alpha) = 1/(d-1); it is
bracketed below by the two-sided edge-survival rule (orthant probability
reaching 2/d) and above by the union bound from the summed covariance profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import brentq

from .errors import NumericalError, ValidationError
from .gaussian import orthant_edge_probability
from .sampler import BallSample, _sample_path_many, path_step_kernel
from .spectral import CovarianceProfile

# Power iteration control for the transfer operator.
_POWER_RTOL = 1e-10
_POWER_MAX_ITER = 10_000
_POWER_MIN_ITER = 10

_BOOTSTRAP_RESAMPLES = 500


@dataclass(frozen=True)
class Component:
    """One connected cluster of the level set within a ball."""

    size: int
    reach: int  # max vertex depth in the cluster
    touches_boundary: bool
    contains_root: bool


@dataclass(frozen=True)
class ComponentSummary:
    """Clusters of {value > alpha} in a ball sample, largest first."""

    alpha: float
    components: tuple[Component, ...]
    root_size: int  # 0 when the root misses the level set
    root_reach: int  # -1 when the root misses the level set


class _UnionFind:
    def __init__(self, n: int) -> None:
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return
        if self.size[ri] < self.size[rj]:
            ri, rj = rj, ri
        self.parent[rj] = ri
        self.size[ri] += self.size[rj]


def extract_components(sample: BallSample, alpha: float) -> ComponentSummary:
    """Connected components of {value > alpha} within the sampled ball."""
    if not math.isfinite(alpha):
        raise ValidationError(f"alpha must be finite, got {alpha!r}")
    ball = sample.ball
    above = sample.values > alpha
    uf = _UnionFind(len(ball))
    for i, j in ball.edges():
        if above[i] and above[j]:
            uf.union(i, j)
    members: dict[int, list[int]] = {}
    for i in range(len(ball)):
        if above[i]:
            members.setdefault(uf.find(i), []).append(i)
    comps = []
    for idxs in members.values():
        depths = [ball.vertices[i].depth for i in idxs]
        comps.append(
            Component(
                size=len(idxs),
                reach=max(depths),
                touches_boundary=max(depths) == ball.radius,
                contains_root=0 in idxs,
            )
        )
    comps.sort(key=lambda c: (-c.size, c.reach, not c.contains_root))
    root_comp = next((c for c in comps if c.contains_root), None)
    return ComponentSummary(
        alpha=alpha,
        components=tuple(comps),
        root_size=root_comp.size if root_comp else 0,
        root_reach=root_comp.reach if root_comp else -1,
    )


@dataclass(frozen=True)
class SurvivalEstimate:
    """Monte Carlo estimate of a path survival probability."""

    n: int
    alpha: float
    p_hat: float
    stderr: float
    method: str
    reps: int
    collapsed: bool = False


def survival_direct(
    profile: CovarianceProfile,
    n: int,
    alpha: float,
    reps: int,
    rng: np.random.Generator,
) -> SurvivalEstimate:
    """Plain Monte Carlo: fraction of exact path draws staying above alpha."""
    if n < 1:
        raise ValidationError(f"path length must be >= 1, got {n}")
    if reps < 1:
        raise ValidationError(f"reps must be >= 1, got {reps}")
    if not math.isfinite(alpha):
        raise ValidationError(f"alpha must be finite, got {alpha!r}")
    survivors = 0
    remaining = reps
    chunk = max(1, (1 << 22) // max(n, 1))
    while remaining > 0:
        m = min(chunk, remaining)
        vals = _sample_path_many(profile, n, m, rng)
        survivors += int(np.count_nonzero(np.all(vals > alpha, axis=1)))
        remaining -= m
    p = survivors / reps
    se = math.sqrt(p * (1.0 - p) / reps)
    return SurvivalEstimate(
        n=n, alpha=alpha, p_hat=p, stderr=se, method="direct", reps=reps,
        collapsed=(survivors == 0),
    )


@dataclass(frozen=True)
class SurvivalCurve:
    """SMC survival estimates for every length 1..n_max in one pass.

    batch_estimates holds the per-batch prefix-product estimators, one row per
    independent batch; p_hat averages them and stderr is a bootstrap over
    batches.
    """

    alpha: float
    particles: int
    batches: int
    p_hat: np.ndarray
    stderr: np.ndarray
    batch_estimates: np.ndarray

    def estimate(self, n: int, method: str = "smc") -> SurvivalEstimate:
        if n < 1 or n > self.p_hat.size:
            raise ValidationError(f"length {n} outside curve range 1..{self.p_hat.size}")
        p = float(self.p_hat[n - 1])
        return SurvivalEstimate(
            n=n, alpha=self.alpha, p_hat=p, stderr=float(self.stderr[n - 1]),
            method=method, reps=self.particles, collapsed=(p == 0.0),
        )


def survival_curve_smc(
    profile: CovarianceProfile,
    n_max: int,
    alpha: float,
    particles: int,
    rng: np.random.Generator,
    batches: int = 16,
) -> SurvivalCurve:
    """Sequential Monte Carlo along the path with multinomial resampling.

    Particles carry the last two surviving coordinates; each step multiplies
    the estimator by the surviving fraction and resamples within each of the
    independent batches.  The per-step fraction estimator makes every batch's
    prefix product unbiased for P(n).
    """
    if n_max < 1:
        raise ValidationError(f"n_max must be >= 1, got {n_max}")
    if particles < 100:
        raise ValidationError(f"particles must be >= 100, got {particles}")
    if not math.isfinite(alpha):
        raise ValidationError(f"alpha must be finite, got {alpha!r}")
    if batches < 2:
        raise ValidationError(f"batches must be >= 2, got {batches}")
    nbat = max(2, min(batches, particles // 50))
    per = particles // nbat
    factors = np.zeros((nbat, n_max))
    dead = np.zeros(nbat, dtype=bool)

    cur = rng.standard_normal((nbat, per))
    alive = cur > alpha
    factors[:, 0] = alive.mean(axis=1)
    prev = np.zeros_like(cur)

    def resample(step_alive: np.ndarray) -> None:
        for b in range(nbat):
            if dead[b]:
                continue
            idx = np.flatnonzero(step_alive[b])
            if idx.size == 0:
                dead[b] = True
                continue
            pick = idx[rng.integers(0, idx.size, per)]
            cur[b] = cur[b, pick]
            prev[b] = prev[b, pick]

    resample(alive)
    if n_max >= 2:
        phi1 = profile.require(1)
        nxt = phi1 * cur + math.sqrt(1.0 - phi1 * phi1) * rng.standard_normal((nbat, per))
        alive = nxt > alpha
        factors[:, 1] = np.where(dead, 0.0, alive.mean(axis=1))
        prev, cur = cur, nxt
        resample(alive)
    if n_max >= 3:
        kern = path_step_kernel(profile)
        sd = math.sqrt(kern.sigma2)
        for k in range(2, n_max):
            nxt = kern.b1 * prev + kern.b2 * cur + sd * rng.standard_normal((nbat, per))
            alive = nxt > alpha
            factors[:, k] = np.where(dead, 0.0, alive.mean(axis=1))
            prev, cur = cur, nxt
            resample(alive)

    batch_estimates = np.cumprod(factors, axis=1)
    p_hat = batch_estimates.mean(axis=0)
    draws = rng.integers(0, nbat, (_BOOTSTRAP_RESAMPLES, nbat))
    boot = batch_estimates[draws].mean(axis=1)
    stderr = boot.std(axis=0, ddof=1)
    return SurvivalCurve(
        alpha=alpha,
        particles=per * nbat,
        batches=nbat,
        p_hat=p_hat,
        stderr=stderr,
        batch_estimates=batch_estimates,
    )


def survival_smc(
    profile: CovarianceProfile,
    n: int,
    alpha: float,
    particles: int,
    rng: np.random.Generator,
    batches: int = 16,
) -> SurvivalEstimate:
    """SMC estimate of P(n); exact-in-expectation at every intermediate length."""
    curve = survival_curve_smc(profile, n, alpha, particles, rng, batches)
    return curve.estimate(n)


def conditioned_survival(
    profile: CovarianceProfile,
    n: int,
    alpha: float,
    x1: float,
    x2: float,
    particles: int,
    rng: np.random.Generator,
    batches: int = 16,
) -> SurvivalEstimate:
    """SMC estimate of survival beyond a fixed first pair (x1, x2) above alpha.

    Estimates F(n) = P(coordinates 3..n stay above alpha | first two equal
    (x1, x2)); F(2) = 1 by convention.  Averaging F(n) over the conditioned
    law of the first pair recovers P(n) / P(2).
    """
    if n < 2:
        raise ValidationError(f"conditioned survival needs n >= 2, got {n}")
    if particles < 100:
        raise ValidationError(f"particles must be >= 100, got {particles}")
    if not (x1 > alpha and x2 > alpha):
        raise ValidationError("the conditioning pair must lie strictly above alpha")
    nbat = max(2, min(batches, particles // 50))
    per = particles // nbat
    if n == 2:
        return SurvivalEstimate(
            n=n, alpha=alpha, p_hat=1.0, stderr=0.0, method="smc-conditioned",
            reps=per * nbat, collapsed=False,
        )
    kern = path_step_kernel(profile)
    sd = math.sqrt(kern.sigma2)
    factors = np.zeros((nbat, n - 2))
    dead = np.zeros(nbat, dtype=bool)
    prev = np.full((nbat, per), float(x1))
    cur = np.full((nbat, per), float(x2))
    for k in range(n - 2):
        nxt = kern.b1 * prev + kern.b2 * cur + sd * rng.standard_normal((nbat, per))
        alive = nxt > alpha
        factors[:, k] = np.where(dead, 0.0, alive.mean(axis=1))
        prev, cur = cur, nxt
        for b in range(nbat):
            if dead[b]:
                continue
            idx = np.flatnonzero(alive[b])
            if idx.size == 0:
                dead[b] = True
                continue
            pick = idx[rng.integers(0, idx.size, per)]
            cur[b] = cur[b, pick]
            prev[b] = prev[b, pick]
    batch_estimates = np.prod(factors, axis=1)
    p = float(batch_estimates.mean())
    draws = rng.integers(0, nbat, (_BOOTSTRAP_RESAMPLES, nbat))
    se = float(batch_estimates[draws].mean(axis=1).std(ddof=1))
    return SurvivalEstimate(
        n=n, alpha=alpha, p_hat=p, stderr=se, method="smc-conditioned",
        reps=per * nbat, collapsed=(p == 0.0),
    )


def transfer_rate(
    profile: CovarianceProfile,
    alpha: float,
    m: int = 64,
    u_max_offset: float = 8.0,
) -> float:
    """Survival decay rate r(alpha) from the discretized transfer operator.

    Parameters
    ----------
    profile : CovarianceProfile
        Spectral point; only phi(1), phi(2) enter through the step kernel.
    alpha : float
        Level; the operator acts on (alpha, u_max) with
        u_max = max(alpha, 0) + u_max_offset.
    m : int
        Gauss-Legendre nodes per axis, at least 16.
    u_max_offset : float
        Domain headroom above the level.  The conditioned chain concentrates
        within O(1) of alpha, so the truncation error decays like a Gaussian
        tail in the offset.

    Returns
    -------
    float
        Leading eigenvalue of the discretized operator, found by power
        iteration on the positive cone to relative tolerance 1e-10.
    """
    if m < 16:
        raise ValidationError(f"quadrature size m must be >= 16, got {m}")
    if not math.isfinite(alpha):
        raise ValidationError(f"alpha must be finite, got {alpha!r}")
    if u_max_offset <= 0.0:
        raise ValidationError(f"u_max_offset must be > 0, got {u_max_offset}")
    u_max = max(alpha, 0.0) + u_max_offset
    kern = path_step_kernel(profile)
    sd = math.sqrt(kern.sigma2)
    nodes, weights = leggauss(m)
    half = 0.5 * (u_max - alpha)
    x = alpha + half * (nodes + 1.0)
    w = half * weights
    mean = kern.b1 * x[:, None] + kern.b2 * x[None, :]
    z = (x[None, None, :] - mean[:, :, None]) / sd
    kmat = w[None, None, :] * np.exp(-0.5 * z * z) / (sd * math.sqrt(2.0 * math.pi))
    g = np.ones((m, m))
    den = float(w @ g @ w)
    prev_ray = math.inf
    hits = 0
    for it in range(_POWER_MAX_ITER):
        h = np.einsum("ijk,jk->ij", kmat, g)
        num = float(w @ h @ w)
        ray = num / den
        if it >= _POWER_MIN_ITER and abs(ray - prev_ray) <= _POWER_RTOL * abs(ray):
            hits += 1
            if hits >= 2:
                return ray
        else:
            hits = 0
        prev_ray = ray
        top = h.max()
        if top <= 0.0 or not math.isfinite(top):
            raise NumericalError("transfer operator iterate collapsed to zero")
        g = h / top
        den = float(w @ g @ w)
    raise NumericalError(
        f"power iteration did not converge in {_POWER_MAX_ITER} iterations"
    )


def haggstrom_alpha(profile: CovarianceProfile) -> float:
    """Level at which two-sided edge survival equals 2/d (percolation below)."""
    phi1 = profile.require(1)
    d = profile.point.d
    target = 2.0 / d

    def f(a: float) -> float:
        return orthant_edge_probability(phi1, a) - target

    lo, hi = -12.0, 12.0
    if not (f(lo) > 0.0 > f(hi)):
        raise NumericalError("edge-survival root not bracketed in [-12, 12]")
    return float(brentq(f, lo, hi, xtol=1e-12, rtol=8.9e-16))


def expdec_alpha(profile: CovarianceProfile) -> float:
    """Level above which the union bound kills boundary connection.

    Survival decays at least like exp(-alpha^2 n / (2 big_phi)); spheres grow
    like (d-1)^n, so alpha > sqrt(2 (d-1) big_phi) forces extinction, making
    this an upper bound for the critical level.
    """
    d = profile.point.d
    return math.sqrt(2.0 * (d - 1.0) * profile.big_phi)


def critical_threshold(
    profile: CovarianceProfile,
    tol: float = 1e-4,
    m: int = 64,
    u_max_offset: float = 8.0,
) -> float:
    """Critical level alpha_c: where the decay rate crosses 1/(d-1).

    Bisection of transfer_rate(alpha) - 1/(d-1) over the widened rigorous
    bracket [haggstrom - 1, expdec + 1]; the rate is strictly decreasing in
    alpha, so the sign change is unique.
    """
    if not (tol > 0.0) or not math.isfinite(tol):
        raise ValidationError(f"tol must be > 0, got {tol!r}")
    d = profile.point.d
    target = 1.0 / (d - 1.0)
    lo = haggstrom_alpha(profile) - 1.0
    hi = expdec_alpha(profile) + 1.0
    f_lo = transfer_rate(profile, lo, m, u_max_offset) - target
    f_hi = transfer_rate(profile, hi, m, u_max_offset) - target
    if not (f_lo > 0.0 > f_hi):
        raise NumericalError(
            f"rate does not cross 1/(d-1) on [{lo:.6g}, {hi:.6g}]: "
            f"f(lo)={f_lo:.3e}, f(hi)={f_hi:.3e}"
        )
    while hi - lo > 2.0 * tol:
        mid = 0.5 * (lo + hi)
        if transfer_rate(profile, mid, m, u_max_offset) - target > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class RatioEntry:
    n: int
    m: int
    ratio: float
    stderr: float


@dataclass(frozen=True)
class RatioBoundsReport:
    """Empirical submultiplicativity ratios P(n+m) / (P(n) P(m)).

    Every ratio lies in [1/bound, bound] with `bound` estimated from the data
    (the max of ratio and 1/ratio over the grid).
    """

    alpha: float
    entries: tuple[RatioEntry, ...]
    bound: float


def survival_ratio_bounds(
    profile: CovarianceProfile,
    alpha: float,
    n_list: Sequence[int],
    m_list: Sequence[int],
    reps: int,
    rng: np.random.Generator,
    batches: int = 16,
) -> RatioBoundsReport:
    """Estimate P(n+m) / (P(n) P(m)) over a grid with jackknife errors.

    One SMC curve run covers every length; ratios use the per-batch prefix
    products so shared factors cancel within a batch, and the stderr is a
    leave-one-batch-out jackknife.
    """
    n_list = [int(v) for v in n_list]
    m_list = [int(v) for v in m_list]
    if not n_list or not m_list:
        raise ValidationError("n_list and m_list must be nonempty")
    if min(n_list + m_list) < 1:
        raise ValidationError("path lengths must be >= 1")
    top = max(n_list) + max(m_list)
    curve = survival_curve_smc(profile, top, alpha, reps, rng, batches)
    be = curve.batch_estimates
    nbat = be.shape[0]
    entries = []
    for n in n_list:
        for mm in m_list:
            num = be[:, n + mm - 1]
            den_a = be[:, n - 1]
            den_b = be[:, mm - 1]
            full = num.mean() / (den_a.mean() * den_b.mean())
            jack = np.array(
                [
                    np.delete(num, b).mean()
                    / (np.delete(den_a, b).mean() * np.delete(den_b, b).mean())
                    for b in range(nbat)
                ]
            )
            se = math.sqrt((nbat - 1) / nbat * float(((jack - jack.mean()) ** 2).sum()))
            entries.append(
                RatioEntry(n=n, m=mm, ratio=float(full), stderr=se)
            )
    bound = max(max(e.ratio, 1.0 / e.ratio) for e in entries)
    return RatioBoundsReport(alpha=alpha, entries=tuple(entries), bound=bound)
