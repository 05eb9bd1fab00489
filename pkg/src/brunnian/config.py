"""JSON configuration: system specs, solver settings, parameter substitution.

A system block looks like::

    {
      "dimension": 3,
      "particles": [{"species": "a", "mass": 1.0, "statistics": "boson", "count": 3}],
      "potentials": {"Vaa": {"form": "gaussian", "depth": -2.4, "range": 1.0}},
      "pairs": {"a-a": "Vaa"}
    }

Potential forms: ``gaussian`` (depth, range), ``yukawa`` (strength,
screening_length, n_terms, r_window, tolerance), ``core_pocket_tail`` (six
parameters), ``custom`` (terms: [[strength, range], ...]) and ``zero``.
"""

from __future__ import annotations

import copy
import json
import math
from pathlib import Path
from typing import Any, Mapping

from .model import ParticleSpec, SystemSpec, validate_system
from .potentials import PotentialError, from_config
from .solver import SolverSettings


class ConfigError(ValueError):
    pass


def load_json(path: str | Path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: cannot parse {path}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc


def _pair(key: str) -> tuple[str, str]:
    parts = key.replace(",", "-").split("-")
    if len(parts) != 2 or not all(parts):
        raise ConfigError(f"config: pair key {key!r} must look like 'a-b'")
    return parts[0].strip(), parts[1].strip()


def system_from_dict(block: Mapping[str, Any], validate: bool = True) -> SystemSpec:
    try:
        particles = []
        for entry in block["particles"]:
            p = ParticleSpec(str(entry["species"]), float(entry.get("mass", 1.0)), entry.get("statistics", "boson"))
            particles.extend([p] * int(entry.get("count", 1)))
        potentials = {name: from_config(decl) for name, decl in block.get("potentials", {}).items()}
        pairs = {_pair(k): v for k, v in block.get("pairs", {}).items()}
        spec = SystemSpec.build(particles, int(block.get("dimension", 3)), potentials, pairs)
    except KeyError as exc:
        raise ConfigError(f"config: missing field {exc}") from exc
    except (TypeError, PotentialError) as exc:
        raise ConfigError(f"config: {exc}") from exc
    if validate:
        validate_system(spec)
    return spec


def settings_from_dict(block: Mapping[str, Any] | None, **overrides) -> SolverSettings:
    values = dict(block or {})
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "width_window" in values:
        values["width_window"] = tuple(values["width_window"])
    known = set(SolverSettings.__dataclass_fields__)
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"config: unknown solver settings {sorted(unknown)}")
    try:
        return SolverSettings(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config: invalid solver settings: {exc}") from exc


def assign(block: Mapping[str, Any], values: Mapping[str, float]) -> dict:
    """Copy of ``block`` with dotted paths (e.g. ``potentials.Vaa.depth``) replaced."""
    out = copy.deepcopy(dict(block))
    for path, value in values.items():
        node = out
        keys = path.split(".")
        for k in keys[:-1]:
            if k not in node:
                raise ConfigError(f"config: parameter path {path!r} not found")
            node = node[k]
        if keys[-1] not in node:
            raise ConfigError(f"config: parameter path {path!r} not found")
        node[keys[-1]] = value
    return out


def dumps(obj: Any) -> str:
    """Deterministic JSON text used for every emitted report (non-finite floats become strings)."""
    return json.dumps(_finite(obj), indent=2, sort_keys=True, default=_default, allow_nan=False) + "\n"


def _finite(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def _default(obj):
    import numpy as np

    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")
