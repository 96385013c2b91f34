"""Machine-count planning rules for four waiting-time service classes.

Given a hyper-exponential service law, an arrival coefficient of variation c,
and a target traffic intensity rho, each service class pins down how much
slack capacity (1 - rho_n) * f(n) the system must hold, which inverts to a
machine count n:

* zero wait (zwt):      1 - rho_n = n**(-k1)          -> n = ceil((1-rho)**(-1/k1))
* minimal wait (mwt):   (1 - rho_n) * sqrt(n) in [L, U] -> n in [ceil((L/(1-rho))**2), ceil((U/(1-rho))**2)]
* bounded wait (bwt):   (1 - rho_n) * n = tau * n**p   -> n = ceil((tau/(1-rho))**(1/(1-p)))
* probabilistic (pwt):  (1 - rho_n) * n = gamma        -> n = ceil(gamma/(1-rho))

The mwt pair [L, U] comes from sandwiching the real system between two
artificial split systems of independent single-branch queues; both bounds
scale a per-branch slack coefficient beta_i = (1 + (c^2 - 1) p_i / 2) * psi
by sqrt(p_i / r_i), where psi solves the square-root-staffing delay relation
(upper bound at target alpha/k, lower bound at alpha).  Two refinements of
the upper bound are provided for Poisson arrivals: a tighter per-queue
target 1 - (1-alpha)**(1/k), and numerical optimization of the per-queue
wait-probability split, either on the exact budget sum(alpha_j) <= alpha or
against a Monte Carlo estimate of the limiting queue-content tail.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri

from .halfin_whitt import HwSolution, hw_solve_psi, normal_cdf
from .models import HyperExpService, RngStream

__all__ = [
    "ZeroWait",
    "MinimalWait",
    "BoundedWait",
    "ProbabilisticWait",
    "MwtBounds",
    "LevyUpperBound",
    "NormalizedQueueDensity",
    "SizingResult",
    "mwt_bounds",
    "mwt_upper_poisson",
    "mwt_upper_optimized",
    "mwt_upper_levy",
    "bwt_tau",
    "pwt_gamma",
    "kingman_wait_tail",
    "machines_for",
    "machines_for_rate",
    "tightness_ratio",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


# --------------------------------------------------------------------------
# service classes


@dataclass(frozen=True)
class ZeroWait:
    """Wait probability must vanish as the system grows.

    The planner holds 1 - rho_n = n**(-k1) with 0 < k1 < 1/2, which keeps
    the slack coefficient (1 - rho_n) * sqrt(n) = n**(1/2 - k1) growing, so
    the limiting wait probability drops to zero.
    """

    k1: float

    def __post_init__(self):
        if not (math.isfinite(self.k1) and 0.0 < self.k1 < 0.5):
            raise ValueError(f"decay exponent k1 must be in (0, 1/2), got {self.k1}")


@dataclass(frozen=True)
class MinimalWait:
    """Wait probability pinned at a small constant alpha in (0, 1)."""

    alpha: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and 0.0 < self.alpha < 1.0):
            raise ValueError(f"wait probability target must be in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class BoundedWait:
    """Waits must stay below t1 with probability -> 1, with the tail
    P{W > t1} shrinking like exp(-n**p) for some 0 < p < 1/2."""

    t1: float
    p: float

    def __post_init__(self):
        if not (math.isfinite(self.t1) and self.t1 > 0.0):
            raise ValueError(f"wait bound t1 must be positive, got {self.t1}")
        if not (math.isfinite(self.p) and 0.0 < self.p < 0.5):
            raise ValueError(f"tail exponent p must be in (0, 1/2), got {self.p}")


@dataclass(frozen=True)
class ProbabilisticWait:
    """P{W > t2} pinned at a constant level delta in (0, 1)."""

    t2: float
    delta: float

    def __post_init__(self):
        if not (math.isfinite(self.t2) and self.t2 > 0.0):
            raise ValueError(f"wait bound t2 must be positive, got {self.t2}")
        if not (math.isfinite(self.delta) and 0.0 < self.delta < 1.0):
            raise ValueError(f"tail level delta must be in (0, 1), got {self.delta}")


QosRequirement = ZeroWait | MinimalWait | BoundedWait | ProbabilisticWait

_QOS_TAGS = {ZeroWait: "zwt", MinimalWait: "mwt", BoundedWait: "bwt", ProbabilisticWait: "pwt"}


# --------------------------------------------------------------------------
# shared helpers


def _check_cv(c: float) -> float:
    c = float(c)
    if not math.isfinite(c) or c < 0.0:
        raise ValueError(f"arrival cv must be finite and non-negative, got {c}")
    return c


def _check_rho(rho: float) -> float:
    rho = float(rho)
    if not math.isfinite(rho) or not 0.0 < rho < 1.0:
        raise ValueError(f"traffic intensity must be in (0, 1), got {rho}")
    return rho


def _guarded_ceil(x: float) -> int:
    """Ceiling with a small relative guard: values within ~1e-9 (relative)
    below an integer are treated as that integer, so float noise in
    expressions like (1/(1-0.9))**4 cannot inflate the count by one."""
    return math.ceil(x - 1e-9 * max(1.0, abs(x)))


def _count(x: float) -> int:
    """Machine counts are guarded ceilings floored at one server."""
    return max(1, _guarded_ceil(x))


def _branch_load_factors(svc: HyperExpService, c: float) -> list[float]:
    """Per-branch slack adjustment (1 + (c^2 - 1) * p_i / 2): the thinned
    substream seen by branch i has squared cv 1 + (c^2 - 1) * p_i, and the
    slack coefficient scales with (1 + cv_i^2) / 2."""
    return [1.0 + (c * c - 1.0) * p / 2.0 for p in svc.weights]


def _branch_scales(svc: HyperExpService) -> list[float]:
    """sqrt(p_i / r_i): each branch's share of the offered load enters the
    machine count through the square root of its per-branch load."""
    return [math.sqrt(p / r) for p, r in zip(svc.weights, svc.rates)]


# --------------------------------------------------------------------------
# minimal-wait slack bounds


@dataclass(frozen=True)
class MwtBounds:
    """Sandwich [lower, upper] for the slack coefficient (1 - rho_n) * sqrt(n)
    required to pin the wait probability at alpha.

    ``beta_lower`` / ``beta_upper`` are the per-branch slack coefficients;
    ``argmax_branch`` is the (smallest) branch index attaining the lower
    bound's maximum.
    """

    lower: float
    upper: float
    psi_lower: HwSolution
    psi_upper: HwSolution
    beta_lower: tuple[float, ...]
    beta_upper: tuple[float, ...]
    argmax_branch: int


def mwt_bounds(svc: HyperExpService, c: float, alpha: float) -> MwtBounds:
    """Slack sandwich for the minimal-wait class.

    The upper bound provisions every branch of an artificial split system at
    per-queue target alpha/k and adds the branch requirements; the lower
    bound lets one branch carry the whole target alpha and takes the worst
    branch.  For a single branch the two coincide.
    """
    c = _check_cv(c)
    if not (math.isfinite(alpha) and 0.0 < alpha < 1.0):
        raise ValueError(f"wait probability target must be in (0, 1), got {alpha}")
    psi_u = hw_solve_psi(alpha / svc.k)
    psi_l = hw_solve_psi(alpha)
    load = _branch_load_factors(svc, c)
    scale = _branch_scales(svc)
    sqrt_mu = math.sqrt(svc.mu)
    beta_u = tuple(li * psi_u.psi for li in load)
    beta_l = tuple(li * psi_l.psi for li in load)
    terms_l = [b * s for b, s in zip(beta_l, scale)]
    m = terms_l.index(max(terms_l))
    upper = sqrt_mu * math.fsum(b * s for b, s in zip(beta_u, scale))
    lower = sqrt_mu * terms_l[m]
    return MwtBounds(
        lower=lower,
        upper=upper,
        psi_lower=psi_l,
        psi_upper=psi_u,
        beta_lower=beta_l,
        beta_upper=beta_u,
        argmax_branch=m,
    )


def mwt_upper_poisson(svc: HyperExpService, alpha: float) -> float:
    """Tighter minimal-wait upper bound for Poisson arrivals.

    With independent Poisson substreams the split system misses the target
    only if every queue does, so each queue can run at the larger per-queue
    target 1 - (1 - alpha)**(1/k) instead of alpha/k.
    """
    if not (math.isfinite(alpha) and 0.0 < alpha < 1.0):
        raise ValueError(f"wait probability target must be in (0, 1), got {alpha}")
    if svc.k == 1:
        per_queue = alpha
    else:
        per_queue = -math.expm1(math.log1p(-alpha) / svc.k)
    psi = hw_solve_psi(per_queue).psi
    scale = _branch_scales(svc)
    return math.sqrt(svc.mu) * math.fsum(psi * s for s in scale)


def _allocation_objective(load, scale, psis) -> float:
    # same association order as mwt_bounds' upper sum, so the uniform
    # allocation reproduces it bit for bit
    return math.fsum((li * pi) * si for li, pi, si in zip(load, psis, scale))


def _golden_min(g, lo: float, hi: float, iters: int = 32) -> float:
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    g1, g2 = g(x1), g(x2)
    for _ in range(iters):
        if g1 <= g2:
            hi, x2, g2 = x2, x1, g1
            x1 = hi - _GOLDEN * (hi - lo)
            g1 = g(x1)
        else:
            lo, x1, g1 = x1, x2, g2
            x2 = lo + _GOLDEN * (hi - lo)
            g2 = g(x2)
    return 0.5 * (lo + hi)


def _optimize_allocation(load, scale, total: float):
    """Minimize sum_j load_j * psi(a_j) * scale_j subject to sum_j a_j = total,
    a_j > 0, by pairwise-transfer coordinate descent with golden-section line
    searches.  Seeded at the uniform split, so the result never exceeds it.

    Returns (objective, allocations, psis).
    """
    k = len(load)
    a = [total / k] * k
    psis = [hw_solve_psi(x).psi for x in a]
    value = _allocation_objective(load, scale, psis)
    if k == 1:
        return value, a, psis
    floor = 1e-9 * total
    for _ in range(200):
        before = value
        for i in range(k):
            for j in range(i + 1, k):
                lo = -(a[j] - floor)
                hi = a[i] - floor
                if hi <= lo:
                    continue

                def pair(t, i=i, j=j):
                    return (
                        load[i] * hw_solve_psi(a[i] - t).psi * scale[i]
                        + load[j] * hw_solve_psi(a[j] + t).psi * scale[j]
                    )

                t = _golden_min(pair, lo, hi)
                cand_i, cand_j = a[i] - t, a[j] + t
                psi_i = hw_solve_psi(cand_i).psi
                psi_j = hw_solve_psi(cand_j).psi
                trial = list(psis)
                trial[i], trial[j] = psi_i, psi_j
                cand_value = _allocation_objective(load, scale, trial)
                if cand_value < value:
                    a[i], a[j] = cand_i, cand_j
                    psis = trial
                    value = cand_value
        if before - value < 1e-9:
            break
    return value, a, psis


def mwt_upper_optimized(svc: HyperExpService, c: float, alpha: float):
    """Minimal-wait upper bound with an optimized per-queue target split.

    Allocates the wait-probability budget sum_j alpha_j <= alpha across the
    artificial system's queues to minimize the resulting slack requirement.
    The budget constraint is active at the optimum (more allocation always
    helps), so the search runs on the simplex sum_j alpha_j = alpha, seeded
    at the uniform split alpha/k whose value is exactly the plain upper
    bound.

    Returns ``(value, alphas)``.
    """
    c = _check_cv(c)
    if not (math.isfinite(alpha) and 0.0 < alpha < 1.0):
        raise ValueError(f"wait probability target must be in (0, 1), got {alpha}")
    load = _branch_load_factors(svc, c)
    scale = _branch_scales(svc)
    value, a, _ = _optimize_allocation(load, scale, alpha)
    return math.sqrt(svc.mu) * value, tuple(a)


# --------------------------------------------------------------------------
# Monte Carlo certified upper bound (Poisson arrivals)


@dataclass(frozen=True)
class NormalizedQueueDensity:
    """Limiting law of a queue's scaled content seen in the square-root
    staffing regime: an Exp(beta) tail above zero holding mass ``alpha``
    and a normal(-beta, 1) body below zero truncated to carry the rest,

        f(x) = alpha * beta * exp(-beta * x)            for x > 0,
        f(x) = (1 - alpha) * phi(x + beta) / Phi(beta)  for x < 0,

    so P(X > 0) = alpha exactly.
    """

    alpha: float
    beta: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and 0.0 < self.alpha < 1.0):
            raise ValueError(f"positive-part mass must be in (0, 1), got {self.alpha}")
        if not (math.isfinite(self.beta) and self.beta > 0.0):
            raise ValueError(f"slack coefficient must be positive, got {self.beta}")

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        pos = self.alpha * self.beta * np.exp(-self.beta * np.maximum(x, 0.0))
        neg = (1.0 - self.alpha) * np.exp(-0.5 * (np.minimum(x, 0.0) + self.beta) ** 2) / (
            math.sqrt(2.0 * math.pi) * normal_cdf(self.beta)
        )
        out = np.where(x >= 0.0, pos, neg)
        return float(out) if out.ndim == 0 else out

    def sample(self, rng: RngStream, size: int | None = None):
        """Draw via one branch uniform and one body uniform per point:
        branch < alpha gives the exponential tail, otherwise the inverse CDF
        of the truncated normal body."""
        m = 1 if size is None else int(size)
        u_branch = rng.generator.random(m)
        u_body = np.clip(rng.generator.random(m), 1e-16, 1.0 - 1e-16)
        out = _queue_density_transform(u_branch, u_body, self.alpha, self.beta)
        return float(out[0]) if size is None else out


def _queue_density_transform(u_branch, u_body, alpha, beta):
    pos = u_branch < alpha
    out = np.where(
        pos,
        -np.log(u_body) / beta,
        ndtri(u_body * ndtr(beta)) - beta,
    )
    return out


@dataclass(frozen=True)
class LevyUpperBound:
    """Result of ``mwt_upper_levy``: the bound ``value``, the per-queue
    wait-probability targets behind it, and whether a Monte-Carlo-certified
    allocation was found (``certified``).  When certification fails at the
    given sample budget the analytically safe Poisson-product allocation is
    returned instead and ``certified`` is False."""

    value: float
    alphas: tuple[float, ...]
    certified: bool


# ladder of budget multipliers tried above the exact-sum allocation; the
# weighted-sum tail constraint is weaker than the per-queue union bound, so
# totals above alpha can remain feasible
_LEVY_SCALE_LADDER = (1.0, 1.5, 2.25, 3.4, 5.0)


def mwt_upper_levy(
    svc: HyperExpService,
    alpha: float,
    mc_samples: int = 200_000,
    rng: RngStream | None = None,
) -> LevyUpperBound:
    """Minimal-wait upper bound certified against the joint queue-content law
    (Poisson arrivals).

    The split system misses the aggregate target only when the weighted sum
    of the per-queue scaled contents sum_j sqrt(p_j/r_j) * X_j is
    non-negative, which is strictly rarer than any queue being busy, so the
    per-queue targets alpha_j may sum past alpha.  Candidate allocations
    (the optimized exact-sum split scaled by a small ladder of budget
    multipliers) are accepted when the Monte Carlo estimate of
    P(sum >= 0) clears alpha with a three-standard-error margin; the best
    certified candidate is returned unless the analytic product-rule
    allocation alpha_j = 1 - (1-alpha)**(1/k) (always feasible) is better.
    """
    if not (math.isfinite(alpha) and 0.0 < alpha < 1.0):
        raise ValueError(f"wait probability target must be in (0, 1), got {alpha}")
    mc_samples = int(mc_samples)
    if mc_samples < 100_000:
        raise ValueError(f"at least 100000 Monte Carlo samples are required, got {mc_samples}")
    if rng is None:
        rng = RngStream(20_24, 0)

    k = svc.k
    scale = _branch_scales(svc)
    sqrt_mu = math.sqrt(svc.mu)
    ones = [1.0] * k

    if k == 1:
        # single queue: the weighted-sum event is exactly the queue-busy
        # event, P(X >= 0) = alpha_1, so the full budget is optimal
        psi = hw_solve_psi(alpha).psi
        return LevyUpperBound(
            value=sqrt_mu * _allocation_objective(ones, scale, [psi]),
            alphas=(alpha,),
            certified=True,
        )

    fallback_value = mwt_upper_poisson(svc, alpha)
    fallback_alphas = (-math.expm1(math.log1p(-alpha) / k),) * k

    # shape of the optimized exact-sum split, reused at every ladder step
    _, base_alloc, _ = _optimize_allocation(ones, scale, alpha)
    shape = [ai / alpha for ai in base_alloc]

    gen = rng.generator
    u_branch = gen.random((mc_samples, k))
    u_body = np.clip(gen.random((mc_samples, k)), 1e-16, 1.0 - 1e-16)
    weights = np.asarray(scale)

    def certify(alphas: list[float]):
        """Monte Carlo feasibility of P(weighted queue-content sum >= 0) <= alpha;
        returns the per-queue slack coefficients when certified, else None."""
        if any(not 0.0 < aj < 0.999 for aj in alphas):
            return None
        betas = np.array([hw_solve_psi(aj).psi for aj in alphas])
        x = _queue_density_transform(u_branch, u_body, np.asarray(alphas), betas)
        tail = float(np.mean(x @ weights >= 0.0))
        stderr = math.sqrt(max(tail * (1.0 - tail), 1e-300) / mc_samples)
        if tail + 3.0 * stderr <= alpha:
            return betas
        return None

    best_value = fallback_value
    best_alphas = fallback_alphas
    certified = False
    for mult in _LEVY_SCALE_LADDER:
        alphas = [mult * alpha * sj for sj in shape]
        betas = certify(alphas)
        if betas is None:
            if mult > 1.0:
                break  # the tail only grows with the budget
            continue
        value = sqrt_mu * _allocation_objective(ones, scale, betas.tolist())
        if value < best_value:
            best_value = value
            best_alphas = tuple(alphas)
            certified = True
    return LevyUpperBound(value=best_value, alphas=best_alphas, certified=certified)


# --------------------------------------------------------------------------
# bounded / probabilistic wait constants


def bwt_tau(svc: HyperExpService, c: float, t1: float) -> float:
    """Slack constant tau = (mu^2 sigma^2 + c^2) / (2 mu t1) for the
    bounded-wait class.  For exponential service mu^2 sigma^2 = 1 and this
    reduces to (1 + c^2) / (2 mu t1); mixtures only push it above that
    floor (Jensen), never below."""
    c = _check_cv(c)
    if not (math.isfinite(t1) and t1 > 0.0):
        raise ValueError(f"wait bound t1 must be positive, got {t1}")
    # mu^2 sigma^2 is the service scv; computing it as such keeps the
    # exponential case at exactly (1 + c^2) / (2 mu t1)
    return (svc.scv + c * c) / (2.0 * svc.mu * t1)


def pwt_gamma(svc: HyperExpService, c: float, t2: float, delta: float) -> float:
    """Slack constant gamma = -(mu^2 sigma^2 + c^2) * ln(delta) / (2 mu t2)
    for the probabilistic-wait class."""
    c = _check_cv(c)
    if not (math.isfinite(t2) and t2 > 0.0):
        raise ValueError(f"wait bound t2 must be positive, got {t2}")
    if not (math.isfinite(delta) and 0.0 < delta < 1.0):
        raise ValueError(f"tail level delta must be in (0, 1), got {delta}")
    return -(svc.scv + c * c) * math.log(delta) / (2.0 * svc.mu * t2)


def kingman_wait_tail(svc: HyperExpService, c: float, rho: float, n: float, t: float) -> float:
    """Heavy-traffic waiting-time tail approximation

        P{W > t} ~ exp(-2 mu (1 - rho) n t / (mu^2 sigma^2 + c^2)),

    exact in the limit rho -> 1 where the wait becomes exponential and the
    probability of waiting at all tends to one."""
    c = _check_cv(c)
    rho = _check_rho(rho)
    if not (math.isfinite(n) and n >= 1):
        raise ValueError(f"server count must be >= 1, got {n}")
    if not (math.isfinite(t) and t >= 0.0):
        raise ValueError(f"threshold must be non-negative, got {t}")
    return math.exp(-2.0 * svc.mu * (1.0 - rho) * n * t / (svc.scv + c * c))


# --------------------------------------------------------------------------
# machine counts


@dataclass(frozen=True)
class SizingResult:
    """Machine count for one service class at one operating point.

    ``n`` is the provisioned count (for the minimal-wait class this is the
    conservative upper-bound count ``n_hi``; ``n_lo`` is the matching lower
    bound).  ``constants`` records every intermediate used, so the count can
    be recomputed from the result alone.
    """

    qos: str
    rho: float
    n: int
    n_lo: int | None = None
    n_hi: int | None = None
    constants: dict | None = None


def machines_for(qos: QosRequirement, svc: HyperExpService, c: float, rho: float) -> SizingResult:
    """Smallest machine count meeting ``qos`` at traffic intensity ``rho``."""
    c = _check_cv(c)
    rho = _check_rho(rho)
    slack = 1.0 - rho
    if isinstance(qos, ZeroWait):
        n = _count(slack ** (-1.0 / qos.k1))
        return SizingResult("zwt", rho=rho, n=n, constants={"k1": qos.k1})
    if isinstance(qos, MinimalWait):
        b = mwt_bounds(svc, c, qos.alpha)
        n_lo = _count((b.lower / slack) ** 2)
        n_hi = _count((b.upper / slack) ** 2)
        constants = {
            "alpha": qos.alpha,
            "mu": svc.mu,
            "c": c,
            "psi_lower": b.psi_lower.psi,
            "psi_upper": b.psi_upper.psi,
            "L": b.lower,
            "U": b.upper,
        }
        return SizingResult("mwt", rho=rho, n=n_hi, n_lo=n_lo, n_hi=n_hi, constants=constants)
    if isinstance(qos, BoundedWait):
        tau = bwt_tau(svc, c, qos.t1)
        n = _count((tau / slack) ** (1.0 / (1.0 - qos.p)))
        constants = {
            "t1": qos.t1,
            "p": qos.p,
            "tau": tau,
            "mu": svc.mu,
            "sigma2": svc.variance,
            "c": c,
        }
        return SizingResult("bwt", rho=rho, n=n, constants=constants)
    if isinstance(qos, ProbabilisticWait):
        gamma = pwt_gamma(svc, c, qos.t2, qos.delta)
        n = _count(gamma / slack)
        constants = {
            "t2": qos.t2,
            "delta": qos.delta,
            "gamma": gamma,
            "mu": svc.mu,
            "sigma2": svc.variance,
            "c": c,
        }
        return SizingResult("pwt", rho=rho, n=n, constants=constants)
    raise ValueError(f"unknown service class {qos!r}")


def _expand_root(f, lo: float) -> float:
    """Bracket and solve f = 0 on [lo, inf) for f increasing with f(lo) <= 0."""
    hi = max(2.0 * lo, lo + 1.0)
    for _ in range(200):
        if f(hi) >= 0.0:
            return brentq(f, lo, hi, xtol=1e-12, rtol=1e-14)
        hi *= 2.0
    raise ValueError("machine-count equation failed to bracket a root")


def machines_for_rate(qos: QosRequirement, svc: HyperExpService, c: float, lam: float) -> SizingResult:
    """Machine count meeting ``qos`` at arrival rate ``lam``.

    The class rules couple the intensity to the count through
    rho_n = lam / (n * mu), so this solves the class relation in n directly;
    the achieved rho is reported in the result.
    """
    c = _check_cv(c)
    if not (math.isfinite(lam) and lam > 0.0):
        raise ValueError(f"arrival rate must be finite and positive, got {lam}")
    offered = lam / svc.mu

    if isinstance(qos, ZeroWait):
        # n - n**(1 - k1) = offered, increasing in n on [1, inf)
        f = lambda x: x - x ** (1.0 - qos.k1) - offered
        x = 1.0 if f(1.0) >= 0.0 else _expand_root(f, 1.0)
        n = _count(x)
        result = SizingResult("zwt", rho=lam / (n * svc.mu), n=n, constants={"k1": qos.k1, "lambda": lam})
        return result
    if isinstance(qos, MinimalWait):
        b = mwt_bounds(svc, c, qos.alpha)

        def staffed(beta: float) -> float:
            # n - beta*sqrt(n) = offered  =>  sqrt(n) = (beta + sqrt(beta^2 + 4*offered)) / 2
            root = 0.5 * (beta + math.sqrt(beta * beta + 4.0 * offered))
            return root * root

        n_lo = _count(staffed(b.lower))
        n_hi = _count(staffed(b.upper))
        constants = {
            "alpha": qos.alpha,
            "mu": svc.mu,
            "c": c,
            "psi_lower": b.psi_lower.psi,
            "psi_upper": b.psi_upper.psi,
            "L": b.lower,
            "U": b.upper,
            "lambda": lam,
        }
        return SizingResult(
            "mwt", rho=lam / (n_hi * svc.mu), n=n_hi, n_lo=n_lo, n_hi=n_hi, constants=constants
        )
    if isinstance(qos, BoundedWait):
        tau = bwt_tau(svc, c, qos.t1)
        f = lambda x: x - tau * x ** qos.p - offered
        # f dips below zero near the origin; the meaningful root sits on the
        # increasing branch beyond the stationary point
        stationary = (tau * qos.p) ** (1.0 / (1.0 - qos.p))
        lo = max(1.0, stationary)
        x = lo if f(lo) >= 0.0 else _expand_root(f, lo)
        n = _count(x)
        constants = {
            "t1": qos.t1,
            "p": qos.p,
            "tau": tau,
            "mu": svc.mu,
            "sigma2": svc.variance,
            "c": c,
            "lambda": lam,
        }
        return SizingResult("bwt", rho=lam / (n * svc.mu), n=n, constants=constants)
    if isinstance(qos, ProbabilisticWait):
        gamma = pwt_gamma(svc, c, qos.t2, qos.delta)
        n = _count(offered + gamma)
        constants = {
            "t2": qos.t2,
            "delta": qos.delta,
            "gamma": gamma,
            "mu": svc.mu,
            "sigma2": svc.variance,
            "c": c,
            "lambda": lam,
        }
        return SizingResult("pwt", rho=lam / (n * svc.mu), n=n, constants=constants)
    raise ValueError(f"unknown service class {qos!r}")


# --------------------------------------------------------------------------
# bound tightness


def tightness_ratio(svc: HyperExpService, c: float, alpha: float) -> tuple[float, float, float]:
    """How loose the minimal-wait sandwich can be: returns ``(r, r1, r2)``
    with r = upper/lower = r1 * r2, where r1 = psi(alpha/k)/psi(alpha)
    compares the per-queue targets and r2 compares the branch-weight sum to
    its maximum.  r2 always lies in [1, k]; r1 grows only logarithmically
    in k."""
    c = _check_cv(c)
    if not (math.isfinite(alpha) and 0.0 < alpha < 1.0):
        raise ValueError(f"wait probability target must be in (0, 1), got {alpha}")
    psi_u = hw_solve_psi(alpha / svc.k).psi
    psi_l = hw_solve_psi(alpha).psi
    r1 = psi_u / psi_l
    load = _branch_load_factors(svc, c)
    scale = _branch_scales(svc)
    terms = [li * si for li, si in zip(load, scale)]
    r2 = math.fsum(terms) / max(terms)
    return r1 * r2, r1, r2
