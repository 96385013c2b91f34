"""Plain-text experiment configs.

A config is a line-oriented ``key = value`` file.  Keys may be written with
dots (``service.mu``) or grouped under an INI-style ``[section]`` header that
prefixes the keys below it; both spellings produce the same dotted key.
Values are ints, floats, bare strings, or bracketed float lists
(``[1.0, 8.0, 20.0]``).  ``#`` starts a comment.

Parse-level problems (bad syntax, missing or mistyped keys) raise
:class:`ConfigError`; semantically invalid models (probabilities out of
range, non-increasing grids, ...) raise ``ValueError`` from the model
constructors so the CLI can map the two to distinct exit codes.
"""

from __future__ import annotations

import math

from .models import HyperExpService, RenewalArrival
from .planner import BoundedWait, MinimalWait, ProbabilisticWait, QosRequirement, ZeroWait

_REQUIRED = object()


class ConfigError(Exception):
    """A config file or config value could not be parsed."""


def _parse_scalar(text: str, where: str):
    text = text.strip()
    if text.startswith("["):
        if not text.endswith("]"):
            raise ConfigError(f"{where}: unterminated list {text!r}")
        body = text[1:-1].strip()
        items = [s.strip() for s in body.split(",")] if body else []
        try:
            return tuple(float(s) for s in items)
        except ValueError:
            raise ConfigError(f"{where}: list entries must be numbers, got {text!r}") from None
    if (text.startswith('"') and text.endswith('"')) or (
        text.startswith("'") and text.endswith("'")
    ):
        return text[1:-1]
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_config(text: str) -> dict:
    """Parse config ``text`` into a flat dict keyed by dotted names."""
    values: dict = {}
    section = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if not section:
                raise ConfigError(f"line {lineno}: empty section header")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: missing key before '='")
        if section and "." not in key:
            key = f"{section}.{key}"
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_scalar(value, f"line {lineno}")
    return values


def load_config(path: str) -> dict:
    """Read and parse the config file at ``path``."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc


def _get(cfg: dict, key: str, kind, default=_REQUIRED):
    if key not in cfg:
        if default is _REQUIRED:
            raise ConfigError(f"missing config key {key!r}")
        return default
    value = cfg[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"config key {key!r} must be a number, got {value!r}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"config key {key!r} must be an integer, got {value!r}")
        return value
    if kind is tuple:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return (float(value),)
        if not isinstance(value, tuple):
            raise ConfigError(f"config key {key!r} must be a list, got {value!r}")
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"config key {key!r} must be a string, got {value!r}")
        return value
    raise AssertionError(kind)


def get_float(cfg: dict, key: str, default=_REQUIRED) -> float:
    """Fetch a numeric config value as a float."""
    return _get(cfg, key, float, default)


def get_int(cfg: dict, key: str, default=_REQUIRED) -> int:
    """Fetch an integer config value."""
    return _get(cfg, key, int, default)


def service_from(cfg: dict) -> HyperExpService:
    """Build the service model from ``service.mu`` / ``service.p``."""
    rates = _get(cfg, "service.mu", tuple)
    if len(rates) == 1:
        return HyperExpService.exponential(rates[0])
    probs = _get(cfg, "service.p", tuple)
    return HyperExpService(rates, probs)


_ARRIVAL_KINDS = ("poisson", "erlang", "deterministic")


def arrival_from(cfg: dict, rate: float = 1.0) -> RenewalArrival:
    """Build the arrival model from ``arrival.*`` keys.

    ``rate`` is a placeholder when the config gives no ``arrival.rate``;
    sweeps re-rate the returned process per grid point via ``with_rate``.
    """
    kind = _get(cfg, "arrival.kind", str, "poisson").lower()
    rate = _get(cfg, "arrival.rate", float, rate)
    if kind == "poisson":
        return RenewalArrival.poisson(rate)
    if kind == "erlang":
        return RenewalArrival.erlang(_get(cfg, "arrival.stages", int, 2), rate)
    if kind == "deterministic":
        return RenewalArrival.deterministic(rate)
    raise ConfigError(f"arrival.kind must be one of {_ARRIVAL_KINDS}, got {kind!r}")


_QOS_CLASSES = ("zwt", "mwt", "bwt", "pwt")


def qos_from(cfg: dict, cls: str | None = None) -> QosRequirement:
    """Build the QoS requirement for ``cls`` (default: ``qos.class``)."""
    if cls is None:
        cls = _get(cfg, "qos.class", str)
    cls = cls.lower()
    if cls == "zwt":
        return ZeroWait(_get(cfg, "qos.k1", float))
    if cls == "mwt":
        return MinimalWait(_get(cfg, "qos.alpha", float))
    if cls == "bwt":
        return BoundedWait(_get(cfg, "qos.t1", float), _get(cfg, "qos.p", float))
    if cls == "pwt":
        return ProbabilisticWait(_get(cfg, "qos.t2", float), _get(cfg, "qos.delta", float))
    raise ConfigError(f"QoS class must be one of {_QOS_CLASSES}, got {cls!r}")


def seed_from(cfg: dict, override: int | None = None) -> int:
    """Resolve the experiment seed: a flag override wins, then ``seed``, then 0."""
    if override is not None:
        return override
    return _get(cfg, "seed", int, 0)


def sim_params_from(cfg: dict) -> tuple[int, int | None, int]:
    """(measured, warmup, batches) for validation sweeps, with defaults."""
    measured = _get(cfg, "sim.measured", int, 200_000)
    warmup = _get(cfg, "sim.warmup", int, None)
    batches = _get(cfg, "sim.batches", int, 32)
    return measured, warmup, batches


def parse_grid(text: str) -> tuple[float, ...]:
    """Parse ``a:b:step`` (or a single value) into a strictly increasing grid."""
    parts = text.split(":")
    try:
        numbers = [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"grid {text!r}: entries must be numbers") from None
    if not all(math.isfinite(x) for x in numbers):
        raise ConfigError(f"grid {text!r}: entries must be finite")
    if len(parts) == 1:
        return (numbers[0],)
    if len(parts) != 3:
        raise ConfigError(f"grid {text!r}: expected 'a:b:step' or a single value")
    start, stop, step = numbers
    if step <= 0.0:
        raise ConfigError(f"grid {text!r}: step must be positive")
    if stop < start:
        raise ConfigError(f"grid {text!r}: stop must be >= start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    grid = tuple(start + i * step for i in range(count))
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError(f"grid {text!r}: values must be strictly increasing")
    return grid


def grid_from(cfg: dict, flag: str | None, key: str = "grid") -> tuple[float, ...]:
    """Resolve a sweep grid from a ``--grid`` flag or the config ``grid`` key."""
    if flag is not None:
        return parse_grid(flag)
    if key not in cfg:
        raise ConfigError(f"missing grid: pass --grid or set config key {key!r}")
    value = cfg[key]
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return (float(value),)
    if isinstance(value, str):
        return parse_grid(value)
    if isinstance(value, tuple):
        if not value:
            raise ConfigError(f"config key {key!r}: grid must be non-empty")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ConfigError(f"config key {key!r}: grid must be strictly increasing")
        return value
    raise ConfigError(f"config key {key!r} must be a grid, got {value!r}")
