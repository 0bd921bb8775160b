"""Flat key = value configuration files and provenance fingerprints.

Parameter files use one ``key = value`` pair per line, ``#`` comments, and
keys that match the :class:`~optograv.params.PhysicalParams` field names.
A ``units`` key ("si", the default, or "dimensionless") selects the mode.
Scan plans use the same syntax with their own key set (see
:func:`load_scan_plan`).
"""

from __future__ import annotations

import hashlib
import json

from .errors import ConfigError
from .params import UNITS_DIMENSIONLESS, UNITS_SI, PhysicalParams

_REQUIRED_SI = (
    "mass_m",
    "mass_M",
    "separation_h",
    "cavity_length_d",
    "bare_freq_a",
    "bare_freq_b",
    "light_freq_c",
    "light_freq_d",
)
_REQUIRED_DIMENSIONLESS = (
    "bare_freq_a",
    "bare_freq_b",
    "direct_gamma",
    "direct_lambda_m",
    "direct_lambda_M",
)
_FLOAT_KEYS = _REQUIRED_SI + (
    "rod_half_length_L",
    "grav_constant_G",
    "hbar",
    "direct_gamma",
    "direct_lambda_m",
    "direct_lambda_M",
)
_COMPLEX_KEYS = ("beta_m", "beta_M")
_STRING_KEYS = ("units", "frequency_convention")
PARAM_KEYS = frozenset(_FLOAT_KEYS + _COMPLEX_KEYS + _STRING_KEYS)

_PLAN_KEYS = frozenset(
    ("axes", "observables", "t", "oracle_enabled", "seed", "n_max", "mode")
)


def parse_kv_text(text: str, label: str = "<config>") -> dict[str, tuple[int, str]]:
    """Parse ``key = value`` lines into {key: (line_number, raw_value)}."""
    entries: dict[str, tuple[int, str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{label}: line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{label}: line {lineno}: empty key")
        if key in entries:
            raise ConfigError(f"{label}: line {lineno}: duplicate key {key!r}")
        entries[key] = (lineno, value)
    return entries


def _unquote(value: str) -> str:
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
        return value[1:-1]
    return value


def _parse_float(label, key, lineno, raw):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(
            f"{label}: line {lineno}: cannot parse value for {key!r}: {raw!r}"
        ) from None


def _parse_complex(label, key, lineno, raw):
    try:
        return complex(raw.replace(" ", ""))
    except ValueError:
        raise ConfigError(
            f"{label}: line {lineno}: cannot parse value for {key!r}: {raw!r}"
        ) from None


def params_from_text(text: str, label: str = "<config>") -> PhysicalParams:
    """Build :class:`PhysicalParams` from config text, with line-numbered errors."""
    entries = parse_kv_text(text, label)
    for key, (lineno, _) in entries.items():
        if key not in PARAM_KEYS:
            raise ConfigError(f"{label}: line {lineno}: unknown key {key!r}")
    units = UNITS_SI
    if "units" in entries:
        units = _unquote(entries["units"][1])
    if units not in (UNITS_SI, UNITS_DIMENSIONLESS):
        lineno = entries["units"][0]
        raise ConfigError(f"{label}: line {lineno}: units must be 'si' or 'dimensionless'")
    required = _REQUIRED_SI if units == UNITS_SI else _REQUIRED_DIMENSIONLESS
    for key in required:
        if key not in entries:
            raise ConfigError(f"{label}: missing required key {key!r} for units={units!r}")
    kwargs: dict = {"units": units}
    for key, (lineno, raw) in entries.items():
        if key == "units":
            continue
        if key in _STRING_KEYS:
            kwargs[key] = _unquote(raw)
        elif key in _COMPLEX_KEYS:
            kwargs[key] = _parse_complex(label, key, lineno, raw)
        else:
            kwargs[key] = _parse_float(label, key, lineno, raw)
    if units == UNITS_DIMENSIONLESS:
        kwargs.setdefault("mass_m", 1.0)
        kwargs.setdefault("mass_M", 1.0)
        kwargs.setdefault("separation_h", 1.0)
        kwargs.setdefault("cavity_length_d", 1.0)
        kwargs.setdefault("light_freq_c", 1.0)
        kwargs.setdefault("light_freq_d", 1.0)
        kwargs.setdefault("hbar", 1.0)
    return PhysicalParams(**kwargs)


def load_params(path) -> PhysicalParams:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read parameter file {path}: {exc}") from None
    return params_from_text(text, label=str(path))


def plan_from_text(text: str, label: str = "<plan>") -> dict:
    """Parse a scan-plan config into a plain dict of plan settings.

    Keys: ``axes`` (comma-separated parameter names), one ``values_<axis>``
    comma-separated number list per axis, ``observables`` (comma-separated),
    and optional ``t`` (seconds), ``oracle_enabled`` (true/false), ``seed``,
    ``n_max``, ``mode``.
    """
    entries = parse_kv_text(text, label)
    if "axes" not in entries:
        raise ConfigError(f"{label}: missing required key 'axes'")
    if "observables" not in entries:
        raise ConfigError(f"{label}: missing required key 'observables'")
    axes_raw = entries["axes"][1].strip()
    axis_names = [a.strip() for a in axes_raw.split(",") if a.strip()] if axes_raw else []
    axes = []
    for name in axis_names:
        key = f"values_{name}"
        if key not in entries:
            raise ConfigError(f"{label}: missing {key!r} for axis {name!r}")
        lineno, raw = entries[key]
        values = tuple(
            _parse_float(label, key, lineno, item.strip()) for item in raw.split(",")
        )
        axes.append((name, values))
    observables = tuple(
        o.strip() for o in entries["observables"][1].split(",") if o.strip()
    )
    plan = {"axes": tuple(axes), "observables": observables}
    known = _PLAN_KEYS | {f"values_{name}" for name in axis_names}
    for key, (lineno, raw) in entries.items():
        if key not in known:
            raise ConfigError(f"{label}: line {lineno}: unknown key {key!r}")
        if key in ("axes", "observables") or key.startswith("values_"):
            continue
        if key == "t":
            plan["observable_time"] = _parse_float(label, key, lineno, raw)
        elif key == "oracle_enabled":
            lowered = raw.strip().lower()
            if lowered not in ("true", "false", "1", "0"):
                raise ConfigError(f"{label}: line {lineno}: oracle_enabled must be true/false")
            plan["oracle_enabled"] = lowered in ("true", "1")
        elif key in ("seed", "n_max"):
            try:
                plan[key] = int(raw)
            except ValueError:
                raise ConfigError(
                    f"{label}: line {lineno}: cannot parse integer for {key!r}: {raw!r}"
                ) from None
        elif key == "mode":
            plan["mode"] = _unquote(raw)
    return plan


def load_scan_plan(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read scan plan {path}: {exc}") from None
    return plan_from_text(text, label=str(path))


def fingerprint(payload: dict) -> str:
    """Stable hex digest of a JSON-serialisable mapping."""
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def fingerprint_params(p: PhysicalParams) -> str:
    return fingerprint(p.as_dict())
