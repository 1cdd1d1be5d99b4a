"""Flat key-value configuration: one `key = value` per line, # comments.

Every tunable named in the module defaults is overridable here; unknown keys
are errors so typos fail loudly, with the line number in the message. Bed
sources use dotted keys (bed.<id>.source = replay:path | tail:path |
socket:host:port | synthetic:seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .engine import ThresholdConfig, VerdictKind
from .tuning import MatchPolicy
from .validity import ParameterSchema


class ConfigError(Exception):
    """Carries the offending line number when one applies."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class BedSource:
    bed: str
    kind: str  # replay | tail | socket | synthetic
    target: str  # path, host:port, or seed


@dataclass
class Settings:
    """Everything a run needs, with the documented defaults filled in."""

    password: str = "PW123"
    schema_names: tuple[str, ...] = ("hr", "spo2", "nbp_sys", "nbp_dia")
    schema_use: tuple[int, ...] | None = None
    schema_zero_ok: tuple[int, ...] = ()

    nu1: float = 0.07
    nu2: float = 0.16
    ell: int = 20
    sigma: float = 1.0
    lam: float = 0.98
    d_similar: float = 0.9
    epsilon_frac: float = 0.2
    prune_period: int = 100
    usage_floor: float = 1e-4
    max_size: int = 50

    warmup: int = 50
    var_floor: float = 1e-6
    train_steps: int = 50
    warn_threshold: int = 5

    poll_interval: float = 12.0
    speedup: float = math.inf
    refresh: float = 2.0

    window_w: int = 5
    counted_kinds: tuple[str, ...] = ("red1", "red2")
    grid: tuple[tuple[float, float], ...] = (
        (0.03, 0.08),
        (0.07, 0.16),
        (0.11, 0.24),
    )
    grid_sigma: tuple[float, ...] = ()
    grid_ell: tuple[int, ...] = ()

    archive_dir: str = "archives"
    beds: list[BedSource] = field(default_factory=list)

    def schema(self) -> ParameterSchema:
        return ParameterSchema(
            names=self.schema_names,
            use=self.schema_use,
            zero_ok=frozenset(self.schema_zero_ok),
        )

    def threshold_config(self, **overrides) -> ThresholdConfig:
        base = dict(
            nu1=self.nu1,
            nu2=self.nu2,
            ell=self.ell,
            sigma=self.sigma,
            lam=self.lam,
            d_similar=self.d_similar,
            epsilon_frac=self.epsilon_frac,
            prune_period=self.prune_period,
            usage_floor=self.usage_floor,
            max_size=self.max_size,
        )
        base.update(overrides)
        try:
            return ThresholdConfig(**base)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def match_policy(self) -> MatchPolicy:
        kinds = []
        for name in self.counted_kinds:
            try:
                kinds.append(VerdictKind(name))
            except ValueError:
                raise ConfigError(f"unknown alarm kind {name!r}") from None
        return MatchPolicy(window_w=self.window_w, counted_kinds=frozenset(kinds))

    def tuning_grid(self) -> list[ThresholdConfig]:
        """Cartesian product of threshold pairs with any sigma/ell sweeps."""
        sigmas = self.grid_sigma or (self.sigma,)
        ells = self.grid_ell or (self.ell,)
        configs = []
        for nu1, nu2 in self.grid:
            for sigma in sigmas:
                for ell in ells:
                    configs.append(
                        self.threshold_config(nu1=nu1, nu2=nu2, sigma=sigma, ell=ell)
                    )
        return configs


def _parse_float(raw: str, line: int) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"expected a number, got {raw!r}", line) from None
    if math.isnan(value):
        raise ConfigError("nan is not a valid setting", line)
    return value


def _parse_int(raw: str, line: int) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"expected an integer, got {raw!r}", line) from None


def _parse_names(raw: str) -> tuple[str, ...]:
    return tuple(token.strip() for token in raw.split(",") if token.strip())


def _parse_indices(raw: str, line: int) -> tuple[int, ...]:
    return tuple(_parse_int(token.strip(), line) for token in raw.split(",") if token.strip())


def _parse_grid(raw: str, line: int) -> tuple[tuple[float, float], ...]:
    """Threshold pairs like `0.03:0.08, 0.07:0.16, 0.11:0.24`."""
    pairs = []
    for chunk in raw.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(":")
        if len(parts) != 2:
            raise ConfigError(f"grid entries look like nu1:nu2, got {chunk!r}", line)
        pairs.append((_parse_float(parts[0], line), _parse_float(parts[1], line)))
    if not pairs:
        raise ConfigError("grid must contain at least one nu1:nu2 pair", line)
    return tuple(pairs)


_FLOAT_KEYS = {
    "nu1", "nu2", "sigma", "lambda", "d_similar", "epsilon_frac", "usage_floor",
    "var_floor", "poll_interval", "speedup", "refresh",
}
_INT_KEYS = {
    "ell", "prune_period", "max_size", "warmup", "train_steps", "warn_threshold",
    "window_w",
}
_FIELD_FOR_KEY = {"lambda": "lam"}

_SOURCE_KINDS = ("replay", "tail", "socket", "synthetic")


def parse_settings(text: str) -> Settings:
    settings = Settings()
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError("expected `key = value`", line_no)
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if not key:
            raise ConfigError("missing key before `=`", line_no)

        if key in _FLOAT_KEYS:
            setattr(settings, _FIELD_FOR_KEY.get(key, key), _parse_float(raw, line_no))
        elif key in _INT_KEYS:
            setattr(settings, key, _parse_int(raw, line_no))
        elif key == "password":
            if not raw or "," in raw:
                raise ConfigError("password must be a non-empty comma-free token", line_no)
            settings.password = raw
        elif key == "schema.names":
            names = _parse_names(raw)
            if not names:
                raise ConfigError("schema.names must list at least one name", line_no)
            settings.schema_names = names
        elif key == "schema.use":
            settings.schema_use = _parse_indices(raw, line_no)
        elif key == "schema.zero_ok":
            settings.schema_zero_ok = _parse_indices(raw, line_no)
        elif key == "counted_kinds":
            settings.counted_kinds = _parse_names(raw)
        elif key == "grid":
            settings.grid = _parse_grid(raw, line_no)
        elif key == "grid_sigma":
            settings.grid_sigma = tuple(
                _parse_float(tok.strip(), line_no) for tok in raw.split(",") if tok.strip()
            )
        elif key == "grid_ell":
            settings.grid_ell = _parse_indices(raw, line_no)
        elif key == "archive_dir":
            settings.archive_dir = raw
        elif key.startswith("bed."):
            parts = key.split(".")
            if len(parts) != 3 or parts[2] != "source":
                raise ConfigError(f"unknown bed key {key!r}", line_no)
            bed = parts[1]
            kind, _, target = raw.partition(":")
            if kind not in _SOURCE_KINDS:
                raise ConfigError(
                    f"source kind must be one of {', '.join(_SOURCE_KINDS)}", line_no
                )
            if not target:
                raise ConfigError("source needs a target after the colon", line_no)
            if any(b.bed == bed for b in settings.beds):
                raise ConfigError(f"bed {bed!r} configured twice", line_no)
            settings.beds.append(BedSource(bed=bed, kind=kind, target=target))
        else:
            raise ConfigError(f"unknown setting {key!r}", line_no)

    # cross-field validation with the real constructors, so messages agree
    settings.threshold_config()
    settings.match_policy()
    settings.schema()
    if settings.poll_interval <= 0:
        raise ConfigError("poll_interval must be > 0")
    if settings.speedup <= 0:
        raise ConfigError("speedup must be > 0")
    if settings.refresh <= 0:
        raise ConfigError("refresh must be > 0")
    if settings.warmup < 1:
        raise ConfigError("warmup must be >= 1")
    if settings.train_steps < 1:
        raise ConfigError("train_steps must be >= 1")
    if settings.warn_threshold < 1:
        raise ConfigError("warn_threshold must be >= 1")
    if len(settings.beds) > 5:
        raise ConfigError("at most 5 beds supported")
    return settings


def load_settings(path: str | Path | None) -> Settings:
    if path is None:
        return Settings()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_settings(text)
