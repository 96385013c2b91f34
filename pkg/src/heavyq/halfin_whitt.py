"""Square-root staffing kernel: the many-server delay relation and its inverse.

For a large FCFS queue operated in the quality-and-efficiency-driven regime,
the probability that an arriving job has to wait converges to a function of
the slack coefficient psi = (1 - rho_n) * sqrt(n):

    alpha(psi) = 1 / (1 + sqrt(2*pi) * psi * Phi(psi) * exp(psi**2 / 2))

where Phi is the standard normal CDF.  alpha is strictly decreasing from 1
(psi = 0, no slack) toward 0, so the relation can be inverted: given a wait
probability target alpha, psi = alpha^{-1}(alpha) is the slack the system
must provision.

The exp(psi**2 / 2) factor overflows double precision near psi = 38, so both
directions work in log space: the forward map computes
log(alpha^{-1} - 1) = log(sqrt(2*pi) * psi * Phi(psi)) + psi**2 / 2 and the
inverse solves that monotone equation by bisection plus Newton polish.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["HwSolution", "normal_cdf", "normal_pdf", "hw_delay_probability", "hw_solve_psi"]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT2 = math.sqrt(2.0)

# alpha below this cannot be represented as exp(psi**2/2)-style targets
# without losing all precision; the solver refuses rather than guessing.
_ALPHA_FLOOR = 1e-300

_BRACKET_HI = 50.0  # alpha(50) underflows to 0, so every representable
                    # positive alpha has its root inside [0, 50]


def normal_cdf(x: float) -> float:
    """Standard normal CDF via the complementary error function.

    erfc keeps full relative accuracy in the tails, so the absolute error is
    far below 1e-12 everywhere on the real line.
    """
    return 0.5 * math.erfc(-x / _SQRT2)


def normal_pdf(x: float) -> float:
    """Standard normal density."""
    return math.exp(-0.5 * x * x - _LOG_SQRT_2PI)


@dataclass(frozen=True)
class HwSolution:
    """Root returned by ``hw_solve_psi``: the slack coefficient ``psi``, the
    requested wait probability ``alpha``, and the achieved forward residual
    ``|alpha(psi) - alpha|``."""

    psi: float
    alpha: float
    residual: float


def _log_odds(psi: float) -> float:
    """log(1/alpha(psi) - 1), i.e. log(sqrt(2*pi) * psi * Phi(psi)) + psi^2/2."""
    return _LOG_SQRT_2PI + math.log(psi) + math.log(normal_cdf(psi)) + 0.5 * psi * psi


def hw_delay_probability(psi: float) -> float:
    """Limiting wait probability alpha(psi) for slack coefficient psi >= 0.

    Evaluates in log space, so large psi simply underflows to 0.0 instead of
    overflowing; psi = 0 returns exactly 1.0.
    """
    psi = float(psi)
    if not math.isfinite(psi) or psi < 0.0:
        raise ValueError(f"slack coefficient must be finite and >= 0, got {psi}")
    if psi == 0.0:
        return 1.0
    t = _log_odds(psi)
    # alpha = 1 / (1 + exp(t)) evaluated without overflow on either side.
    if t >= 0.0:
        e = math.exp(-t)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(t))


def hw_solve_psi(alpha: float) -> HwSolution:
    """Invert the delay relation: find psi with alpha(psi) = alpha.

    Valid targets are 0 < alpha <= 1 (and above the 1e-300 representability
    floor).  Bisection on [0, 50] localizes the root of the monotone
    log-odds equation; a few Newton steps polish it to ~1e-13 relative,
    which keeps the forward residual below 1e-10.
    """
    alpha = float(alpha)
    if not math.isfinite(alpha) or not 0.0 < alpha <= 1.0:
        raise ValueError(f"wait probability target must be in (0, 1], got {alpha}")
    if alpha < _ALPHA_FLOOR:
        raise ValueError(f"wait probability target {alpha} is below the {_ALPHA_FLOOR} floor")
    if alpha == 1.0:
        return HwSolution(psi=0.0, alpha=1.0, residual=0.0)

    # target = log(1/alpha - 1), formed from log1p to stay exact near alpha = 1
    target = math.log1p(-alpha) - math.log(alpha)

    lo, hi = 0.0, _BRACKET_HI
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _log_odds(mid) < target:
            lo = mid
        else:
            hi = mid
    psi = 0.5 * (lo + hi)

    if psi > 0.0:
        for _ in range(8):
            f = _log_odds(psi) - target
            fp = 1.0 / psi + normal_pdf(psi) / normal_cdf(psi) + psi
            step = f / fp
            psi -= step
            if psi <= lo or psi >= hi:  # keep the bracket; fall back to its midpoint
                psi = 0.5 * (lo + hi)
                break
            if abs(step) <= 1e-13 * max(psi, 1.0):
                break

    residual = abs(hw_delay_probability(psi) - alpha)
    return HwSolution(psi=psi, alpha=alpha, residual=residual)
