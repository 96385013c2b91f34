"""Discrete-event simulation of n-server FCFS queues with renewal input.

Jobs enter service in arrival order (FCFS with identical servers), so each
job simply takes the server that frees up earliest.  The engine therefore
keeps a min-heap of the n server free times and computes every job's exact
waiting time in one pass:

    start_j = max(arrival_j, earliest free time),  wait_j = start_j - arrival_j

This is sample-path identical to an event-calendar simulation of the same
queue (the tests cross-check against one) while staying fast enough for
multi-million-job validation runs.  A job waits if and only if it arrives
while all n servers are busy, so the fraction of arrivals with positive
wait estimates the probability that an arrival finds the system full.

Warm-up jobs are discarded; measured-window statistics carry 95% confidence
half-widths from batch means over equal job-count batches.

Randomness is split over three dedicated streams per run (arrival gaps,
service-branch picks, unit-exponential durations), so a split system run
with the same seed sees the identical arrival sequence and job material as
the pooled system it is compared against.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import t as student_t

from .models import HyperExpService, RenewalArrival, RngStream
from .planner import BoundedWait, MinimalWait, QosRequirement, machines_for

__all__ = [
    "SimulationError",
    "SimConfig",
    "SimMetrics",
    "SplitConfig",
    "SplitMetrics",
    "ValidationRow",
    "simulate",
    "simulate_split",
    "validate_class",
]


class SimulationError(RuntimeError):
    """Raised when a simulation run cannot produce valid statistics."""


@dataclass(frozen=True)
class SimConfig:
    """One simulation run.

    ``measured`` jobs are scored after ``warmup`` discarded jobs (default
    warm-up: 20% of the measured count, at least 10 jobs per server).
    ``stream_base`` offsets the three random streams so independent runs can
    share one seed.  ``tail_thresholds`` are the wait levels t at which
    P{W > t} is estimated.
    """

    arrival: RenewalArrival
    service: HyperExpService
    servers: int
    measured: int
    warmup: int | None = None
    batches: int = 32
    seed: int = 0
    stream_base: int = 0
    tail_thresholds: tuple[float, ...] = ()

    def __post_init__(self):
        if int(self.servers) < 1:
            raise ValueError(f"server count must be >= 1, got {self.servers}")
        object.__setattr__(self, "servers", int(self.servers))
        if int(self.batches) < 10:
            raise ValueError(f"at least 10 batches are required, got {self.batches}")
        object.__setattr__(self, "batches", int(self.batches))
        if int(self.measured) < self.batches:
            raise ValueError(
                f"measured horizon {self.measured} is too short for {self.batches} batches"
            )
        object.__setattr__(self, "measured", int(self.measured))
        if self.warmup is not None:
            if int(self.warmup) < 0:
                raise ValueError(f"warmup must be non-negative, got {self.warmup}")
            object.__setattr__(self, "warmup", int(self.warmup))
        thresholds = tuple(float(t) for t in self.tail_thresholds)
        if any(not math.isfinite(t) or t <= 0.0 for t in thresholds):
            raise ValueError(f"tail thresholds must be positive, got {self.tail_thresholds}")
        if tuple(sorted(set(thresholds))) != thresholds:
            raise ValueError("tail thresholds must be strictly increasing")
        object.__setattr__(self, "tail_thresholds", thresholds)

    @property
    def resolved_warmup(self) -> int:
        if self.warmup is not None:
            return self.warmup
        return max(10 * self.servers, self.measured // 5)


@dataclass(frozen=True)
class SimMetrics:
    """Measured-window statistics of one run.

    ``wait_probability`` is the arrival-average estimate (fraction of scored
    arrivals that wait); ``wait_probability_time_avg`` is the time-average
    fraction of the window during which all servers were busy.  The two
    agree for Poisson input but can differ for other renewal streams, so
    both are always reported.  ``*_ci`` fields are 95% half-widths from
    batch means; ``batch_means`` keeps the per-batch values behind them.
    """

    jobs_measured: int
    servers: int
    window: tuple[float, float]
    arrival_rate: float
    wait_probability: float
    wait_probability_ci: float
    wait_probability_time_avg: float
    mean_wait: float
    mean_wait_ci: float
    tail_thresholds: tuple[float, ...]
    tail_probabilities: tuple[float, ...]
    tail_cis: tuple[float, ...]
    utilization: float
    utilization_ci: float
    mean_queue_length: float
    batch_means: dict

    def tail(self, threshold: float) -> float:
        """P{W > threshold} for one of the configured thresholds."""
        return self.tail_probabilities[self.tail_thresholds.index(float(threshold))]


def _three_streams(seed: int, base: int) -> tuple[RngStream, RngStream, RngStream]:
    return (RngStream(seed, base), RngStream(seed, base + 1), RngStream(seed, base + 2))


def _fcfs_wait_times(arrivals: np.ndarray, services: np.ndarray, servers: int) -> np.ndarray:
    """Exact FCFS waiting times for identical servers via a free-time heap."""
    free = [0.0] * servers
    waits = np.empty(len(arrivals))
    heapreplace = heapq.heapreplace
    i = 0
    for t, s in zip(arrivals.tolist(), services.tolist()):
        earliest = free[0]
        if earliest > t:
            waits[i] = earliest - t
            heapreplace(free, earliest + s)
        else:
            waits[i] = 0.0
            heapreplace(free, t + s)
        i += 1
    return waits


def _all_busy_time_fraction(
    arrivals: np.ndarray, departures: np.ndarray, servers: int, t0: float, t1: float
) -> float:
    """Fraction of [t0, t1] during which at least ``servers`` jobs are in the
    system (work conservation makes that the all-busy condition)."""
    times = np.concatenate([arrivals, departures])
    deltas = np.concatenate([np.ones(len(arrivals)), -np.ones(len(departures))])
    order = np.argsort(times, kind="stable")
    times = times[order]
    level = np.cumsum(deltas[order])
    seg_lo = np.clip(times[:-1], t0, t1)
    seg_hi = np.clip(times[1:], t0, t1)
    dur = seg_hi - seg_lo
    total = t1 - t0
    if total <= 0.0:
        return 0.0
    return float(dur[level[:-1] >= servers].sum() / total)


def _batch_ci(values: np.ndarray, tcrit: float) -> float:
    if len(values) < 2:
        return 0.0
    return float(tcrit * values.std(ddof=1) / math.sqrt(len(values)))


def _window_integral(lo: np.ndarray, hi: np.ndarray, w0: float, w1: float) -> float:
    """Total overlap of the intervals [lo_i, hi_i] with the window [w0, w1]."""
    return float(np.clip(np.minimum(hi, w1) - np.maximum(lo, w0), 0.0, None).sum())


def _metrics_from_run(
    arrivals: np.ndarray,
    services: np.ndarray,
    waits: np.ndarray,
    servers: int,
    warmup: int,
    measured: int,
    batches: int,
    thresholds: tuple[float, ...],
) -> SimMetrics:
    if measured < batches:
        raise SimulationError(
            f"only {measured} jobs fall in the measured window; {batches} batches requested"
        )
    sl = slice(warmup, warmup + measured)
    w = waits[sl]
    t_meas = arrivals[sl]
    t0 = float(t_meas[0])
    t1 = float(t_meas[-1])
    if not math.isfinite(t1) or t1 <= t0:
        raise SimulationError("degenerate measurement window")

    starts = arrivals + waits
    departures = starts + services

    waiting = w > 0.0
    wait_probability = float(waiting.mean())
    mean_wait = float(w.mean())
    tail_probabilities = tuple(float((w > t).mean()) for t in thresholds)

    window = t1 - t0
    busy = _window_integral(starts, departures, t0, t1)
    utilization = busy / (servers * window)
    queue = _window_integral(arrivals, starts, t0, t1)
    mean_queue_length = queue / window
    arrival_rate = (measured - 1) / window
    wait_probability_time_avg = _all_busy_time_fraction(arrivals, departures, servers, t0, t1)

    # batch means over equal job-count batches (any remainder past
    # batches * m jobs contributes to the point estimates above but not
    # to the confidence intervals)
    m = measured // batches
    used = batches * m
    wb = w[:used].reshape(batches, m)
    batch_wait_prob = (wb > 0.0).mean(axis=1)
    batch_mean_wait = wb.mean(axis=1)
    batch_tails = [(wb > t).mean(axis=1) for t in thresholds]
    edge_idx = warmup + m * np.arange(batches + 1)
    edge_idx[-1] = warmup + used - 1
    edges = arrivals[edge_idx]
    batch_util = np.empty(batches)
    batch_queue = np.empty(batches)
    batch_rate = np.empty(batches)
    for b in range(batches):
        b0, b1 = float(edges[b]), float(edges[b + 1])
        span = b1 - b0
        if span <= 0.0:
            raise SimulationError("degenerate batch window")
        batch_util[b] = _window_integral(starts, departures, b0, b1) / (servers * span)
        batch_queue[b] = _window_integral(arrivals, starts, b0, b1) / span
        batch_rate[b] = m / span

    tcrit = float(student_t.ppf(0.975, batches - 1))
    return SimMetrics(
        jobs_measured=measured,
        servers=servers,
        window=(t0, t1),
        arrival_rate=arrival_rate,
        wait_probability=wait_probability,
        wait_probability_ci=_batch_ci(batch_wait_prob, tcrit),
        wait_probability_time_avg=wait_probability_time_avg,
        mean_wait=mean_wait,
        mean_wait_ci=_batch_ci(batch_mean_wait, tcrit),
        tail_thresholds=thresholds,
        tail_probabilities=tail_probabilities,
        tail_cis=tuple(_batch_ci(bt, tcrit) for bt in batch_tails),
        utilization=utilization,
        utilization_ci=_batch_ci(batch_util, tcrit),
        mean_queue_length=mean_queue_length,
        batch_means={
            "wait_probability": tuple(batch_wait_prob.tolist()),
            "mean_wait": tuple(batch_mean_wait.tolist()),
            "utilization": tuple(batch_util.tolist()),
            "queue_length": tuple(batch_queue.tolist()),
            "arrival_rate": tuple(batch_rate.tolist()),
            **{f"tail_{t:g}": tuple(bt.tolist()) for t, bt in zip(thresholds, batch_tails)},
        },
    )


def _job_material(
    arrival: RenewalArrival,
    service: HyperExpService,
    total: int,
    seed: int,
    stream_base: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Arrival times, branch picks and unit-exponential draws for ``total``
    jobs, from the three dedicated streams."""
    rng_gaps, rng_branch, rng_unit = _three_streams(seed, stream_base)
    gaps = arrival.sample(rng_gaps, total)
    arrivals = np.cumsum(gaps)
    branches = service.sample_branches(rng_branch, total)
    unit = rng_unit.generator.exponential(1.0, total)
    if not np.isfinite(arrivals[-1]):
        raise SimulationError("arrival times overflowed")
    return arrivals, branches, unit


def simulate(cfg: SimConfig) -> SimMetrics:
    """Run one pooled n-server queue and return its measured statistics.

    Identical configs produce identical metrics bit for bit.  Unstable
    operating points (rho >= 1) simulate fine over a finite horizon; the
    statistics then describe the transient backlog growth.
    """
    warmup = cfg.resolved_warmup
    total = warmup + cfg.measured
    arrivals, branches, unit = _job_material(
        cfg.arrival, cfg.service, total, cfg.seed, cfg.stream_base
    )
    services = unit / np.asarray(cfg.service.rates)[branches]
    waits = _fcfs_wait_times(arrivals, services, cfg.servers)
    return _metrics_from_run(
        arrivals, services, waits, cfg.servers, warmup, cfg.measured,
        cfg.batches, cfg.tail_thresholds,
    )


@dataclass(frozen=True)
class SplitConfig:
    """Artificial split system: arrivals are marked with branch i with
    probability p_i and routed to a dedicated ``servers[i]``-machine queue
    that serves exponentially at the branch rate."""

    arrival: RenewalArrival
    service: HyperExpService
    servers: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(n) for n in self.servers)
        if len(counts) != self.service.k:
            raise ValueError(
                f"need one server count per branch: got {len(counts)} counts "
                f"for {self.service.k} branches"
            )
        if any(n < 1 for n in counts):
            raise ValueError(f"server counts must be >= 1, got {counts}")
        object.__setattr__(self, "servers", counts)


@dataclass(frozen=True)
class SplitMetrics:
    """Per-branch queue statistics plus the aggregate union event: the
    fraction of base-stream arrival epochs at which the split system as a
    whole held at least sum(servers) jobs."""

    per_type: tuple[SimMetrics, ...]
    union_event_frequency: float
    epochs: int
    total_servers: int


def simulate_split(
    cfg: SplitConfig,
    measured: int,
    seed: int,
    *,
    warmup: int | None = None,
    batches: int = 32,
    tail_thresholds: tuple[float, ...] = (),
    stream_base: int = 0,
) -> SplitMetrics:
    """Simulate the split system on the same job material as ``simulate``.

    ``measured``/``warmup`` count base-stream jobs; each branch queue scores
    its own jobs inside the base measured window.  With a single branch the
    split system is the pooled system, and the same seed reproduces
    ``simulate``'s metrics exactly.
    """
    measured = int(measured)
    if warmup is None:
        warmup = max(10 * max(cfg.servers), measured // 5)
    warmup = int(warmup)
    total = warmup + measured
    arrivals, marks, unit = _job_material(cfg.arrival, cfg.service, total, seed, stream_base)

    per_type = []
    departures_by_type = []
    arrivals_by_type = []
    for i, n_i in enumerate(cfg.servers):
        sel = marks == i
        t_i = arrivals[sel]
        s_i = unit[sel] / cfg.service.rates[i]
        warm_i = int(np.count_nonzero(sel[:warmup]))
        meas_i = int(np.count_nonzero(sel[warmup:]))
        w_i = _fcfs_wait_times(t_i, s_i, n_i)
        per_type.append(
            _metrics_from_run(t_i, s_i, w_i, n_i, warm_i, meas_i, batches, tail_thresholds)
        )
        arrivals_by_type.append(t_i)
        departures_by_type.append(np.sort(t_i + w_i + s_i))

    epochs = arrivals[warmup:]
    in_system = np.zeros(len(epochs))
    for t_i, d_i in zip(arrivals_by_type, departures_by_type):
        # jobs strictly before the epoch minus departures strictly before it:
        # the state the arriving job finds
        in_system += np.searchsorted(t_i, epochs, side="left")
        in_system -= np.searchsorted(d_i, epochs, side="left")
    total_servers = sum(cfg.servers)
    union = float(np.mean(in_system >= total_servers))
    return SplitMetrics(
        per_type=tuple(per_type),
        union_event_frequency=union,
        epochs=len(epochs),
        total_servers=total_servers,
    )


@dataclass(frozen=True)
class ValidationRow:
    """One operating point of a validation sweep: the planned count ``n``
    (tagged ``lo``/``hi`` for the minimal-wait pair), the class prediction,
    and the simulated estimate with its 95% half-width.  For minimal-wait
    rows ``simulated_time_avg`` also reports the time-average all-busy
    fraction (relevant for non-Poisson input, chiefly deterministic)."""

    rho: float
    n: int
    bound: str
    predicted: float
    simulated: float
    ci_halfwidth: float
    simulated_time_avg: float | None


def _validation_points(
    qos: QosRequirement,
    svc: HyperExpService,
    arr: RenewalArrival,
    rho_grid,
) -> list[tuple[float, int, str]]:
    points = []
    for rho in rho_grid:
        sizing = machines_for(qos, svc, arr.cv, float(rho))
        if isinstance(qos, MinimalWait):
            points.append((float(rho), sizing.n_lo, "lo"))
            points.append((float(rho), sizing.n_hi, "hi"))
        else:
            points.append((float(rho), sizing.n, ""))
    return points


def _run_validation_point(args) -> ValidationRow:
    qos, svc, arr, rho, n, bound, measured, warmup, batches, seed, stream_base = args
    lam = rho * n * svc.mu
    if isinstance(qos, MinimalWait):
        cfg = SimConfig(
            arrival=arr.with_rate(lam), service=svc, servers=n, measured=measured,
            warmup=warmup, batches=batches, seed=seed, stream_base=stream_base,
        )
        met = simulate(cfg)
        return ValidationRow(
            rho=rho, n=n, bound=bound, predicted=qos.alpha,
            simulated=met.wait_probability, ci_halfwidth=met.wait_probability_ci,
            simulated_time_avg=met.wait_probability_time_avg,
        )
    if isinstance(qos, BoundedWait):
        cfg = SimConfig(
            arrival=arr.with_rate(lam), service=svc, servers=n, measured=measured,
            warmup=warmup, batches=batches, seed=seed, stream_base=stream_base,
            tail_thresholds=(qos.t1,),
        )
        met = simulate(cfg)
        return ValidationRow(
            rho=rho, n=n, bound=bound, predicted=math.exp(-(n ** qos.p)),
            simulated=met.tail_probabilities[0], ci_halfwidth=met.tail_cis[0],
            simulated_time_avg=None,
        )
    raise ValueError(f"validation supports the minimal-wait and bounded-wait classes, not {qos!r}")


def validate_class(
    qos: QosRequirement,
    svc: HyperExpService,
    arr: RenewalArrival,
    rho_grid,
    *,
    measured: int,
    warmup: int | None = None,
    batches: int = 32,
    seed: int = 0,
    jobs: int = 1,
) -> list[ValidationRow]:
    """Compare a class's prediction against simulation over a rho grid.

    For the minimal-wait class the planner's lower and upper machine counts
    are both simulated (at lam = rho * n * mu each) against the target
    alpha; for the bounded-wait class the planned count is simulated against
    the tail level exp(-n**p).  Each grid point gets its own random-stream
    block derived from ``seed``, so results do not depend on evaluation
    order or worker count.
    """
    if not isinstance(qos, (MinimalWait, BoundedWait)):
        raise ValueError(
            f"validation supports the minimal-wait and bounded-wait classes, not {qos!r}"
        )
    points = _validation_points(qos, svc, arr, rho_grid)
    tasks = [
        (qos, svc, arr, rho, n, bound, int(measured), warmup, batches, seed, 3 * idx)
        for idx, (rho, n, bound) in enumerate(points)
    ]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_validation_point, tasks))
    return [_run_validation_point(t) for t in tasks]
