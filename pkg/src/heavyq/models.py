"""Service-time and arrival-process models for many-server capacity planning.

The service law is a k-branch hyper-exponential mixture: a job picks branch i
with probability p_i and its duration is then exponential with rate r_i, so

    P(V > t) = sum_i p_i * exp(-r_i * t),    0 < r_1 < r_2 < ... < r_k.

Mixtures of exponentials always have squared coefficient of variation >= 1
(equality only for a single branch), which makes them a natural fit for the
highly variable job sizes seen in shared compute clusters.

Arrival processes are renewal streams described by their inter-arrival law.
The supported kinds (Poisson, Erlang, deterministic, hyper-exponential) cover
inter-arrival coefficients of variation 0, 1/sqrt(m), 1, and >= 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PROB_SUM_TOL",
    "RngStream",
    "HyperExpService",
    "RenewalArrival",
    "service_moments",
    "sample_service",
    "sample_interarrival",
    "split_cv",
]

# Branch probabilities must sum to 1 within this tolerance; they are then
# renormalized so downstream sums are exact.
PROB_SUM_TOL = 1e-12

_MAX_SEED = 2**64


class RngStream:
    """A reproducible random stream addressed by ``(seed, stream)``.

    Each stream wraps a counter-based Philox generator keyed through numpy's
    ``SeedSequence`` with the stream id as spawn key.  Two consequences,
    both part of the numpy generator contract:

    * identical ``(seed, stream)`` pairs reproduce bitwise identical sample
      sequences, and
    * distinct stream ids under the same seed yield statistically
      independent streams.

    Simulations give each purpose (arrival gaps, branch picks, durations)
    its own stream so that systems sharing a seed can be coupled on
    identical arrival sequences.
    """

    __slots__ = ("seed", "stream", "generator")

    def __init__(self, seed: int, stream: int = 0):
        if int(seed) != seed or int(stream) != stream:
            raise ValueError(f"seed and stream must be integers, got ({seed!r}, {stream!r})")
        seed = int(seed)
        stream = int(stream)
        if not 0 <= seed < _MAX_SEED:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        if stream < 0:
            raise ValueError(f"stream id must be non-negative, got {stream}")
        self.seed = seed
        self.stream = stream
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(stream,))
        self.generator = np.random.Generator(np.random.Philox(ss))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream={self.stream})"


def _validated_branches(rates, weights) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Sort branches by rate, enforce the mixture invariants, renormalize."""
    rates = [float(r) for r in rates]
    weights = [float(w) for w in weights]
    if not rates:
        raise ValueError("at least one branch is required")
    if len(rates) != len(weights):
        raise ValueError(
            f"got {len(rates)} rates but {len(weights)} branch probabilities"
        )
    for r in rates:
        if not math.isfinite(r) or r <= 0.0:
            raise ValueError(f"branch rates must be finite and positive, got {r}")
    for w in weights:
        if not math.isfinite(w) or w <= 0.0:
            raise ValueError(f"branch probabilities must be positive, got {w}")
    total = math.fsum(weights)
    if abs(total - 1.0) > PROB_SUM_TOL:
        raise ValueError(
            f"branch probabilities must sum to 1 within {PROB_SUM_TOL}, got {total!r}"
        )
    order = sorted(range(len(rates)), key=lambda i: rates[i])
    rates = [rates[i] for i in order]
    weights = [weights[i] / total for i in order]
    for a, b in zip(rates, rates[1:]):
        if a == b:
            raise ValueError(
                f"branch rates must be strictly increasing; duplicate rate {a}"
            )
    return tuple(rates), tuple(weights)


@dataclass(frozen=True)
class HyperExpService:
    """Hyper-exponential service law with branch ``rates`` and ``weights``.

    Branches are stored sorted by rate ascending.  Weights must be positive
    and sum to one within ``PROB_SUM_TOL`` (they are renormalized exactly).
    """

    rates: tuple[float, ...]
    weights: tuple[float, ...]

    def __init__(self, rates, weights):
        r, w = _validated_branches(rates, weights)
        object.__setattr__(self, "rates", r)
        object.__setattr__(self, "weights", w)

    @classmethod
    def exponential(cls, rate: float) -> "HyperExpService":
        """Single-branch (plain exponential) service with the given rate."""
        return cls((rate,), (1.0,))

    @property
    def k(self) -> int:
        """Number of branches."""
        return len(self.rates)

    @property
    def mean(self) -> float:
        """Mean job duration E[V] = sum_i p_i / r_i."""
        return math.fsum(w / r for w, r in zip(self.weights, self.rates))

    @property
    def mu(self) -> float:
        """Aggregate service rate, the reciprocal of the mean duration."""
        return 1.0 / self.mean

    @property
    def variance(self) -> float:
        """Var[V] = 2 * sum_i p_i / r_i^2 - (sum_i p_i / r_i)^2."""
        if len(self.rates) == 1:
            # exponential: exactly mean^2, keeping scv == 1.0 bitwise
            return self.mean * self.mean
        second = 2.0 * math.fsum(w / (r * r) for w, r in zip(self.weights, self.rates))
        return second - self.mean**2

    @property
    def scv(self) -> float:
        """Squared coefficient of variation mu^2 * sigma^2 (>= 1)."""
        return self.variance / (self.mean * self.mean)

    def survival(self, t):
        """P(V > t) = sum_i p_i * exp(-r_i * t); accepts scalars or arrays."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for w, r in zip(self.weights, self.rates):
            out = out + w * np.exp(-r * t)
        return float(out) if out.ndim == 0 else out

    def cdf(self, t):
        return 1.0 - self.survival(t)

    def sample_branches(self, rng: RngStream, size: int) -> np.ndarray:
        """Draw branch indices i with probability p_i each."""
        cum = np.cumsum(self.weights)
        cum[-1] = 1.0  # guard against round-off at the top
        u = rng.generator.random(size)
        return np.searchsorted(cum, u, side="right")

    def sample(self, rng: RngStream, size: int | None = None):
        """Draw service durations (branch pick, then exponential)."""
        m = 1 if size is None else int(size)
        branch = self.sample_branches(rng, m)
        unit = rng.generator.exponential(1.0, m)
        durations = unit / np.asarray(self.rates)[branch]
        return float(durations[0]) if size is None else durations


@dataclass(frozen=True)
class RenewalArrival:
    """Renewal arrival stream defined by its inter-arrival law.

    ``kind`` is one of ``poisson``, ``erlang``, ``deterministic``,
    ``hyperexp``; ``rate`` is the long-run arrival rate (mean inter-arrival
    time ``1/rate``).  Erlang streams carry a stage count; hyper-exponential
    streams carry a branch mixture whose rates are rescaled so the mean
    inter-arrival time matches ``1/rate``.
    """

    kind: str
    rate: float
    stages: int | None = None
    branches: HyperExpService | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("poisson", "erlang", "deterministic", "hyperexp"):
            raise ValueError(f"unknown arrival kind {self.kind!r}")
        if not math.isfinite(self.rate) or self.rate <= 0.0:
            raise ValueError(f"arrival rate must be finite and positive, got {self.rate}")
        if self.kind == "erlang":
            if self.stages is None or int(self.stages) < 1:
                raise ValueError("erlang arrivals need a stage count >= 1")
            object.__setattr__(self, "stages", int(self.stages))
        if self.kind == "hyperexp" and self.branches is None:
            raise ValueError("hyperexp arrivals need a branch mixture")

    @classmethod
    def poisson(cls, rate: float) -> "RenewalArrival":
        return cls("poisson", rate)

    @classmethod
    def erlang(cls, stages: int, rate: float) -> "RenewalArrival":
        return cls("erlang", rate, stages=stages)

    @classmethod
    def deterministic(cls, rate: float) -> "RenewalArrival":
        return cls("deterministic", rate)

    @classmethod
    def hyperexp(cls, rate: float, rates, weights) -> "RenewalArrival":
        """Hyper-exponential inter-arrivals; the branch mixture sets the
        shape and is rescaled to mean 1/rate."""
        shape = HyperExpService(rates, weights)
        scale = shape.mean * float(rate)  # multiply rates by this => mean 1/rate
        scaled = HyperExpService([r * scale for r in shape.rates], shape.weights)
        return cls("hyperexp", rate, branches=scaled)

    @property
    def cv(self) -> float:
        """Coefficient of variation of the inter-arrival time."""
        if self.kind == "poisson":
            return 1.0
        if self.kind == "deterministic":
            return 0.0
        if self.kind == "erlang":
            return 1.0 / math.sqrt(self.stages)
        return math.sqrt(self.branches.variance) * self.branches.mu

    def with_rate(self, rate: float) -> "RenewalArrival":
        """Same inter-arrival shape, different rate."""
        if self.kind == "hyperexp":
            return RenewalArrival.hyperexp(rate, self.branches.rates, self.branches.weights)
        return RenewalArrival(self.kind, rate, stages=self.stages)

    def sample(self, rng: RngStream, size: int | None = None):
        """Draw inter-arrival gaps."""
        m = 1 if size is None else int(size)
        if self.kind == "poisson":
            gaps = rng.generator.exponential(1.0 / self.rate, m)
        elif self.kind == "deterministic":
            gaps = np.full(m, 1.0 / self.rate)
        elif self.kind == "erlang":
            gaps = rng.generator.gamma(self.stages, 1.0 / (self.stages * self.rate), m)
        else:
            gaps = self.branches.sample(rng, m)
        return float(gaps[0]) if size is None else gaps


def service_moments(svc: HyperExpService) -> tuple[float, float]:
    """Return ``(mu, sigma2)``: the aggregate service rate and the variance
    of the job duration."""
    return svc.mu, svc.variance


def sample_service(svc: HyperExpService, rng: RngStream, size: int | None = None):
    """Draw service durations from the mixture (see ``HyperExpService.sample``)."""
    return svc.sample(rng, size)


def sample_interarrival(arr: RenewalArrival, rng: RngStream, size: int | None = None):
    """Draw inter-arrival gaps (see ``RenewalArrival.sample``)."""
    return arr.sample(rng, size)


def split_cv(c: float, p: float) -> float:
    """Coefficient of variation of a renewal stream thinned by probability p.

    If a renewal stream with inter-arrival cv ``c`` is split by marking each
    arrival independently with probability ``p``, the marked substream is
    again renewal with inter-arrival cv

        c' = sqrt(1 + (c**2 - 1) * p).

    Poisson streams (c = 1) stay Poisson; deterministic streams (c = 0) give
    sqrt(1 - p); the marked stream is always closer to Poisson than the base.
    """
    if not math.isfinite(c) or c < 0.0:
        raise ValueError(f"cv must be finite and non-negative, got {c}")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"thinning probability must be in (0, 1], got {p}")
    return math.sqrt(1.0 + (c * c - 1.0) * p)
