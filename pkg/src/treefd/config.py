"""Flat key=value run configuration with dotted section prefixes.

Example::

    model.kappa = 2.0
    model.theta = 0.1
    model.sigma = 0.5
    model.rho = -0.5
    model.r = 0.0953101798
    model.delta = 0.0
    model.s0 = 100
    model.v0 = 0.1
    option.kind = put
    option.style = european
    option.strike = 100
    option.maturity = 1.0
    option.barrier = none
    numerics.n_time = 400
    numerics.n_space = 400
    numerics.boundary = neumann
    policy.k_width = 5.0

Blank lines and '#' comments are skipped; unknown keys are rejected with
their line number.
"""

from __future__ import annotations

from dataclasses import dataclass

from .fd import BoundaryKind, GridPolicy
from .model import HestonParams
from .pricing import ExerciseStyle, OptionKind, OptionSpec, UpOutBarrier


class ConfigError(ValueError):
    """Malformed or incomplete run configuration."""


_MODEL_KEYS = ("kappa", "theta", "sigma", "rho", "r", "delta", "s0", "v0")
_OPTION_KEYS = ("kind", "style", "strike", "maturity", "barrier")
_NUMERICS_KEYS = ("n_time", "n_space", "boundary")
_POLICY_KEYS = ("k_width", "half_width", "eps", "adapt")
_OUTPUT_KEYS = ("path",)


@dataclass(frozen=True)
class RunConfig:
    params: HestonParams
    spec: OptionSpec
    n_time: int
    n_space: int
    boundary: BoundaryKind
    policy: GridPolicy
    out_path: str | None = None


def parse_config_text(text: str) -> RunConfig:
    """Parse configuration text; raises ConfigError with line numbers."""
    raw: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if "." not in key:
            raise ConfigError(f"line {lineno}: key {key!r} is missing its section prefix")
        section, _, name = key.partition(".")
        known = {"model": _MODEL_KEYS, "option": _OPTION_KEYS,
                 "numerics": _NUMERICS_KEYS, "policy": _POLICY_KEYS,
                 "output": _OUTPUT_KEYS}.get(section)
        if known is None:
            raise ConfigError(f"line {lineno}: unknown section {section!r}")
        if name not in known:
            raise ConfigError(f"line {lineno}: unknown key {name!r} in section {section!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = (value, lineno)
    return _assemble(raw)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    return parse_config_text(text)


def _take(raw: dict, key: str, conv, required: bool = True, default=None):
    if key not in raw:
        if required:
            raise ConfigError(f"missing required key {key!r}")
        return default
    value, lineno = raw.pop(key)
    try:
        return conv(value)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc


def _as_bool(value: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ValueError(f"expected a boolean, got {value!r}")


def _assemble(raw: dict[str, tuple[str, int]]) -> RunConfig:
    raw = dict(raw)
    try:
        params = HestonParams(**{k: _take(raw, f"model.{k}", float) for k in _MODEL_KEYS})
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc

    kind = _take(raw, "option.kind", lambda s: OptionKind(s.lower()))
    style = _take(raw, "option.style", lambda s: ExerciseStyle(s.lower()))
    strike = _take(raw, "option.strike", float)
    maturity = _take(raw, "option.maturity", float)
    barrier_raw = _take(raw, "option.barrier", str, required=False, default="none")
    barrier = None if barrier_raw.lower() in ("none", "") else UpOutBarrier(float(barrier_raw))
    try:
        spec = OptionSpec(kind=kind, style=style, strike=strike,
                          maturity=maturity, barrier=barrier)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    n_time = _take(raw, "numerics.n_time", int)
    n_space = _take(raw, "numerics.n_space", int)
    boundary = _take(raw, "numerics.boundary", lambda s: BoundaryKind(s.lower()),
                     required=False, default=BoundaryKind.NEUMANN)

    policy = GridPolicy(
        k_width=_take(raw, "policy.k_width", float, required=False, default=5.0),
        half_width=_take(raw, "policy.half_width", float, required=False, default=None),
        eps=_take(raw, "policy.eps", float, required=False, default=None),
        adapt=_take(raw, "policy.adapt", _as_bool, required=False, default=True),
    )
    out_path = _take(raw, "output.path", str, required=False, default=None)

    if raw:
        leftover = ", ".join(sorted(raw))
        raise ConfigError(f"unused keys: {leftover}")
    return RunConfig(params=params, spec=spec, n_time=n_time, n_space=n_space,
                     boundary=boundary, policy=policy, out_path=out_path)
