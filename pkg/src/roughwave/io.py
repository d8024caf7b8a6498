"""Scenario configs and deterministic artifact files.

Configs are JSON objects with the blocks ``profile``, ``medium``,
``incidence``, ``mesh``, ``solver``, ``outputs`` and (for probes) ``probe``;
see the README for the schema. Relative paths are taken from the folder of
the config file. Every CSV starts with one ``#`` metadata line
carrying the tool version and the SHA-256 of the canonical config, then an
RFC 4180 header row. Floats are written with 17 significant digits so that
identical inputs give byte-identical files.
"""

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .model import MediumParams
from .solve import HypersingularSource, PlaneWave, PointSource
from .surface import PROFILE_KINDS, RULES, make_profile

FIELD_HEADER = ["x1", "x2", "re_u", "im_u", "region", "masked"]
DENSITY_HEADER = ["x1", "f(x1)", "re_phi", "im_phi", "re_psi", "im_psi"]


class ConfigError(ValueError):
    """Malformed or inconsistent scenario configuration."""


# --------------------------------------------------------------------------
# scenario configuration
# --------------------------------------------------------------------------

_DEFAULTS = {
    "medium": {"margin": None},
    "mesh": {"rule": "trapezoid"},
    "solver": {"method": "lu", "tol": 1e-10},
    "outputs": {"dir": ".", "densities": "densities.csv", "diagnostics": "diagnostics.json",
                "grid": None},
}

_PROBE_DEFAULTS = {"x0": 0.0, "delta": 0.2, "j_max": 16, "N": 1201, "A": 3.0, "growth": 1.06,
                   "max_spacing": None, "decoy_profile": None, "segment": [1.0, 10.0], "n": 21}


def _number(block, key, positive=False, integer=False):
    v = block.get(key)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{key!r} must be a finite number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(f"{key!r} must be an integer, got {v!r}")
    if positive and v <= 0:
        raise ConfigError(f"{key!r} must be > 0, got {v!r}")
    return int(v) if integer else float(v)


def _vector(block, key):
    v = block.get(key)
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise ConfigError(f"{key!r} must be a 2-vector, got {v!r}")
    return tuple(_number({"c": c}, "c") for c in v)


def _merged(raw, name):
    block = raw.get(name, {})
    if not isinstance(block, dict):
        raise ConfigError(f"block {name!r} must be an object")
    return {**_DEFAULTS.get(name, {}), **block}


def build_profile(spec, base_dir="."):
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("profile needs a 'kind'")
    kind = spec["kind"]
    if kind not in PROFILE_KINDS:
        raise ConfigError(f"unknown profile kind {kind!r}; expected one of {PROFILE_KINDS}")
    params = {k: v for k, v in spec.items() if k != "kind"}
    if kind == "custom_spline" and "path" in params:
        params["path"] = os.path.join(base_dir, params["path"])
    try:
        return make_profile(kind, **params)
    except (TypeError, ValueError, OSError) as exc:
        raise ConfigError(f"bad profile: {exc}") from exc


def build_incidence(spec):
    if not isinstance(spec, dict):
        raise ConfigError("incidence must be an object")
    kind = spec.get("type")
    try:
        if kind == "plane_wave":
            return PlaneWave(_vector(spec, "direction"))
        if kind == "point_source":
            return PointSource(_vector(spec, "y"))
        if kind == "hypersingular":
            return HypersingularSource(_vector(spec, "y"), _vector(spec, "direction"))
    except ValueError as exc:
        raise ConfigError(f"bad incidence: {exc}") from exc
    raise ConfigError(f"unknown incidence type {kind!r}")


@dataclass
class ScenarioConfig:
    """Validated scenario; ``raw`` keeps the normalized JSON for hashing.

    Relative output paths resolve against ``base_dir``, the config's folder.
    """

    raw: dict
    profile: object
    params: MediumParams
    incidence: object
    N: int
    A: float
    A_core: float
    rule: str
    method: str
    tol: float
    outputs: dict
    probe: dict = field(default_factory=dict)
    base_dir: str = "."

    @property
    def config_hash(self):
        return config_hash(self.raw)


def parse_config(raw, base_dir=".", need_incidence=True):
    """Validate a config dict and build the objects it describes."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    profile = build_profile(raw.get("profile"), base_dir)
    med = _merged(raw, "medium")
    margin = med.get("margin")
    if margin is not None:
        margin = _number(med, "margin", positive=True)
    try:
        params = MediumParams.for_profile(profile, _number(med, "k_plus", True),
                                          _number(med, "k_minus", True), _number(med, "mu", True),
                                          margin)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    incidence = build_incidence(raw.get("incidence")) if need_incidence or "incidence" in raw else None

    mesh = _merged(raw, "mesh")
    N, A = _number(mesh, "N", True, integer=True), _number(mesh, "A", True)
    A_core = _number(mesh, "A_core", True) if "A_core" in mesh else A / 4
    if A_core >= A:
        raise ConfigError("need A_core < A")
    if mesh["rule"] not in RULES:
        raise ConfigError(f"unknown rule {mesh['rule']!r}")
    if mesh["rule"] != "trapezoid":
        raise ConfigError("the solver assembles on the trapezoid rule only")

    sol = _merged(raw, "solver")
    if sol["method"] not in ("lu", "gmres"):
        raise ConfigError("solver.method must be 'lu' or 'gmres'")
    tol = _number(sol, "tol", True)

    out = _merged(raw, "outputs")
    grid = out.get("grid")
    if grid is not None:
        for key in ("x1", "x2"):
            lo, hi = _vector(grid, key)
            if not lo <= hi:
                raise ConfigError(f"grid.{key} must be increasing")
        for key in ("n1", "n2"):
            _number(grid, key, True, integer=True)
        grid.setdefault("path", "field.csv")

    probe = {}
    if "probe" in raw:
        probe = {**_PROBE_DEFAULTS, **raw["probe"]}
        for key in ("delta", "A", "growth"):
            _number(probe, key, True)
        _number(probe, "x0")
        _number(probe, "j_max", True, integer=True)
        _number(probe, "N", True, integer=True)
        if probe["j_max"] < 2:
            raise ConfigError("probe.j_max must be at least 2")

    normalized = {**raw, "medium": med, "mesh": {**mesh, "A_core": A_core}, "solver": sol,
                  "outputs": out}
    if probe:
        normalized["probe"] = probe
    return ScenarioConfig(normalized, profile, params, incidence, N, A, A_core, mesh["rule"],
                          sol["method"], tol, out, probe, base_dir)


def load_config(path, need_incidence=True):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(raw, os.path.dirname(os.path.abspath(path)), need_incidence)


def config_hash(raw):
    """SHA-256 of the canonical JSON form (sorted keys, no whitespace)."""
    text = json.dumps(raw, sort_keys=True, separators=(",", ":"), default=_jsonable)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# --------------------------------------------------------------------------
# writers
# --------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def metadata(cfg_hash, **extra):
    return {"tool": "roughwave", "version": __version__, "config_sha256": cfg_hash, **extra}


def write_csv(path, header, rows, cfg_hash):
    """RFC 4180 CSV with LF line ends after a single ``#`` metadata line."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# roughwave {__version__} config_sha256={cfg_hash}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _jsonable(v):
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, complex):
        return [_jsonable(v.real), _jsonable(v.imag)]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def write_json(path, payload, cfg_hash):
    """Sorted-key JSON with a ``meta`` block; non-finite floats become null."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    body = {"meta": metadata(cfg_hash), **_jsonable(payload)}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(body, fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")


def density_rows(sol):
    mesh, d = sol.mesh, sol.densities
    return [[t, f, p.real, p.imag, s.real, s.imag]
            for t, f, p, s in zip(mesh.params, mesh.nodes[:, 1], d.phi, d.psi)]


def field_rows(table):
    return [[x1, x2, u.real, u.imag, r, m]
            for x1, x2, u, r, m in zip(table.x1, table.x2, table.u, table.region, table.masked)]
