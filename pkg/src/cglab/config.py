"""Run-configuration files.

Flat ``key = value`` text, one entry per line, ``#`` starts a comment::

    # eight branch points: "re, im", "x, y, z" (unit vector) or "inf"
    point = 0.10, 0.05
    point = 0.0, 0.6, 0.8
    ...
    alpha_prime = 1.0
    mesh_level = 3
    pairing = 1-2, 3-4, 5-6, 7-8
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .sphere import INFINITY
from .surface import BranchConfig, validate_config

__all__ = ["RunConfig", "parse_config", "load_config", "canonical_bytes", "config_hash"]

_KEYS = {"point", "alpha_prime", "mesh_level", "pairing"}


@dataclass(frozen=True)
class RunConfig:
    branch: BranchConfig
    raw_points: tuple
    options: dict = field(default_factory=dict)


def _parse_point(value: str, lineno: int):
    v = value.strip()
    if v.lower() in {"inf", "infinity"}:
        return INFINITY
    parts = [p.strip() for p in v.split(",")]
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"line {lineno}: point must be 're, im', 'x, y, z' or 'inf', got {value!r}") from None
    if not all(np.isfinite(nums)):
        raise ConfigError(f"line {lineno}: point has a non-finite component")
    if len(nums) == 2:
        return complex(nums[0], nums[1])
    if len(nums) == 3:
        n = float(np.linalg.norm(nums))
        if abs(n - 1.0) > 1e-9:
            raise ConfigError(f"line {lineno}: point {value!r} is not a unit vector (norm {n:.6g})")
        return tuple(nums)
    raise ConfigError(f"line {lineno}: point needs 2 or 3 components, got {len(nums)}")


def _parse_pairing(value: str, lineno: int):
    pairs = []
    for chunk in value.split(","):
        ends = chunk.strip().split("-")
        try:
            a, b = (int(e) - 1 for e in ends)
        except ValueError:
            raise ConfigError(f"line {lineno}: pairing entries look like '1-2', got {chunk.strip()!r}") from None
        pairs.append((a, b))
    return tuple(pairs)


def parse_config(text: str) -> RunConfig:
    """Parse configuration text into a validated :class:`RunConfig`."""
    points, scalars = [], {}
    point_lines = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {body!r}")
        key, value = (s.strip() for s in body.split("=", 1))
        key = key.lower()
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r} (allowed: {', '.join(sorted(_KEYS))})")
        if key == "point":
            points.append(_parse_point(value, lineno))
            point_lines.append(lineno)
            continue
        if key in scalars:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if key == "alpha_prime":
            try:
                scalars[key] = float(value)
            except ValueError:
                raise ConfigError(f"line {lineno}: alpha_prime must be a number, got {value!r}") from None
        elif key == "mesh_level":
            try:
                scalars[key] = int(value)
            except ValueError:
                raise ConfigError(f"line {lineno}: mesh_level must be an integer, got {value!r}") from None
        else:
            scalars[key] = _parse_pairing(value, lineno)
    if len(points) != 8:
        raise ConfigError(f"field 'point': expected 8 branch points, found {len(points)}")
    try:
        branch = validate_config(points, scalars.get("alpha_prime", 1.0), scalars.get("mesh_level", 3),
                                 scalars.get("pairing"))
    except ConfigError as exc:
        lines = ", ".join(str(n) for n in point_lines)
        raise ConfigError(f"{exc} (point entries are on lines {lines})") from None
    return RunConfig(branch=branch, raw_points=tuple(points))


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    return parse_config(text)


def canonical_bytes(branch: BranchConfig, extra: dict | None = None) -> bytes:
    """Deterministic serialisation of everything that affects a run."""
    payload = {
        "points": [[float(f"{c:.15e}") for c in p] for p in np.asarray(branch.points)],
        "alpha_prime": float(f"{branch.alpha_prime:.15e}"),
        "mesh_level": branch.mesh_level,
        "pairing": [list(p) for p in branch.pairing],
        "extra": extra or {},
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()


def config_hash(branch: BranchConfig, extra: dict | None = None) -> str:
    return hashlib.sha256(canonical_bytes(branch, extra)).hexdigest()
