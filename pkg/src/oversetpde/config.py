"""Experiment configuration: JSON schema validation and object builders.

Configs are plain JSON documents; matrices are row-major nested arrays.
Validation errors name the offending field path.  See the README for the
full schema and examples/ configs for working documents.
"""

from __future__ import annotations

import json

import numpy as np

from . import coupling as cpl
from .exact import gaussian
from .geometry import build_overset_1d, build_overset_2d
from .linalg import SymmetryError, as_sym, normal_matrix

SIM_MODES = (
    "scalar1d-char",
    "system1d-char",
    "system1d-penalty",
    "system2d-boundary",
    "system2d-overlap",
    "single-domain-ref",
)
MODES = SIM_MODES + ("certify-coupling", "convergence-study")

MODE_2D = ("system2d-boundary", "system2d-overlap")


class ConfigError(ValueError):
    """Validation failure; the message carries the config field path."""


def _need(cfg: dict, key: str, path: str):
    if key not in cfg:
        raise ConfigError(f"{path}.{key}: required field is missing")
    return cfg[key]


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    return float(value)


def _matrix(value, path: str) -> np.ndarray:
    try:
        return as_sym(value)
    except (SymmetryError, ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: not a valid symmetric matrix ({exc})") from exc


def load_config(path) -> dict:
    with open(path) as fh:
        cfg = json.load(fh)
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    if not isinstance(cfg, dict):
        raise ConfigError("config: expected a JSON object")
    mode = _need(cfg, "mode", "config")
    if mode not in MODES:
        raise ConfigError(f"config.mode: unknown mode {mode!r}; choose from {MODES}")
    if mode == "convergence-study":
        base = _need(cfg, "base", "config")
        validate_config(base)
        if base["mode"] == "convergence-study":
            raise ConfigError("config.base.mode: studies cannot nest")
        levels = _need(cfg, "levels", "config")
        if not isinstance(levels, list) or len(levels) < 3:
            raise ConfigError("config.levels: need at least 3 refinement levels")
        return
    if mode == "certify-coupling":
        _matrix(_need(cfg, "system", "config").get("A"), "config.system.A")
        _number(_need(cfg, "beta", "config"), "config.beta")
        return
    # simulation modes
    system = _need(cfg, "system", "config")
    if mode == "scalar1d-char":
        if _number(_need(system, "alpha", "config.system"), "config.system.alpha") <= 0:
            raise ConfigError("config.system.alpha: the scalar problem requires alpha > 0")
    elif mode in MODE_2D:
        _matrix(_need(system, "A1", "config.system"), "config.system.A1")
        _matrix(_need(system, "A2", "config.system"), "config.system.A2")
    elif mode == "single-domain-ref":
        if "A" not in system and "A1" not in system and "alpha" not in system:
            raise ConfigError("config.system: need alpha, A, or A1/A2")
        if "A1" in system:
            _matrix(system["A1"], "config.system.A1")
            _matrix(_need(system, "A2", "config.system"), "config.system.A2")
    else:
        _matrix(_need(system, "A", "config.system"), "config.system.A")

    geom = _need(cfg, "geometry", "config")
    for key in ("a", "b", "c", "d"):
        _number(_need(geom, key, "config.geometry"), f"config.geometry.{key}")
    if not geom["a"] < geom["b"] < geom["c"] < geom["d"]:
        raise ConfigError("config.geometry: need a < b < c < d")
    order = geom.get("order", 4)
    if order not in (2, 4):
        raise ConfigError(f"config.geometry.order: must be 2 or 4, got {order}")
    for key in ("h_u", "h_v"):
        if _number(_need(geom, key, "config.geometry"), f"config.geometry.{key}") <= 0:
            raise ConfigError(f"config.geometry.{key}: must be positive")
    if mode in MODE_2D or (mode == "single-domain-ref" and "A1" in system):
        for key in ("ly", "h_y"):
            if _number(_need(geom, key, "config.geometry"), f"config.geometry.{key}") <= 0:
                raise ConfigError(f"config.geometry.{key}: must be positive")
        aprime = _number(geom.get("a_prime", geom["a"]), "config.geometry.a_prime")
        if not geom["a"] <= aprime < geom["b"]:
            raise ConfigError("config.geometry.a_prime: need a <= a_prime < b")

    if "eta" in cfg:
        eta = _number(cfg["eta"], "config.eta")
        if not 0.0 < eta < 1.0:
            raise ConfigError(f"config.eta: must lie in (0, 1), got {eta}")

    if _number(_need(cfg, "t_final", "config"), "config.t_final") < 0:
        raise ConfigError("config.t_final: must be nonnegative")
    if "cfl" in cfg and not 0 < _number(cfg["cfl"], "config.cfl") <= 1.0:
        raise ConfigError("config.cfl: must lie in (0, 1]")

    ic = _need(cfg, "ic", "config")
    kind = _need(ic, "type", "config.ic")
    if kind == "gaussian":
        _number(_need(ic, "x0", "config.ic"), "config.ic.x0")
        if _number(_need(ic, "sigma", "config.ic"), "config.ic.sigma") <= 0:
            raise ConfigError("config.ic.sigma: must be positive")
    elif kind == "planewave":
        int(_need(ic, "m_x", "config.ic"))
    elif kind != "random-gaussians":
        raise ConfigError(f"config.ic.type: unknown type {kind!r}")

    reference = cfg.get("reference", "none")
    if reference not in ("none", "oracle", "single-domain"):
        raise ConfigError(f"config.reference: unknown reference {reference!r}")


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def system_matrix(cfg: dict) -> np.ndarray:
    system = cfg["system"]
    if "alpha" in system and "A" not in system:
        return np.array([[float(system["alpha"])]])
    return as_sym(system["A"])


def system_pair(cfg: dict):
    return as_sym(cfg["system"]["A1"]), as_sym(cfg["system"]["A2"])


def geometry_1d(cfg: dict):
    g = cfg["geometry"]
    return build_overset_1d(
        g["a"], g["b"], g["c"], g["d"], g["h_u"], g["h_v"], g.get("order", 4)
    )


def geometry_2d(cfg: dict, with_points: bool):
    g = cfg["geometry"]
    spec = g.get("overlap_points", "uniform 3x3") if with_points else "none"
    return build_overset_2d(
        g.get("a_prime", g["a"]),
        g["a"],
        g["b"],
        g["c"],
        g["d"],
        g["ly"],
        g["h_u"],
        g["h_v"],
        g["h_y"],
        g.get("order", 4),
        overlap_point_spec=spec,
    )


def interface_couplings(cfg: dict, two_d: bool):
    """The pair of interface couplings at the left/right interface lines.

    In 2D these are expressed with the geometric outward normals of the
    base-grid overlap boundary (A.n with n = -x at the left interface) and
    the matching beta = -eta there, +(1 - eta) at the right interface.
    Returns (coupling_b, coupling_c, witness_or_None).
    """
    eta = float(cfg.get("eta", 0.5))
    spec = cfg.get("coupling", "upwind")
    if two_d:
        a1, a2 = system_pair(cfg)
        an_b = normal_matrix((a1, a2), (-1.0, 0.0))
        an_c = normal_matrix((a1, a2), (1.0, 0.0))
        beta_b, beta_c = -eta, 1.0 - eta
    else:
        an_b = an_c = system_matrix(cfg)
        beta_b, beta_c = eta, 1.0 - eta
    if spec == "upwind":
        return cpl.make_upwind_coupling(an_b, beta_b), cpl.make_upwind_coupling(an_c, beta_c), None
    if spec == "antidissipative":
        strength = float(cfg.get("demo_strength", 1.0))
        broken, witness = cpl.make_antidissipative_coupling(an_b, beta_b, strength)
        return broken, cpl.make_upwind_coupling(an_c, beta_c), witness
    if isinstance(spec, dict):
        cb = cpl.InterfaceCoupling.from_dict(
            {"A_n": an_b.tolist(), "beta": beta_b, "SigmaU": spec["SigmaU_b"], "SigmaV": spec["SigmaV_b"]}
        )
        cc = cpl.InterfaceCoupling.from_dict(
            {"A_n": an_c.tolist(), "beta": beta_c, "SigmaU": spec["SigmaU_c"], "SigmaV": spec["SigmaV_c"]}
        )
        return cb, cc, None
    raise ConfigError(f"config.coupling: unknown coupling {spec!r}")


def overlap_coupling(cfg: dict):
    eta = float(cfg.get("eta", 0.5))
    spec = cfg.get("overlap_coupling", {"scale": 0.5})
    if "SigmaUm" in spec:
        su = as_sym(spec["SigmaUm"])
        if "SigmaVm" in spec:
            sv = as_sym(spec["SigmaVm"])
            verdict = cpl.check_overlap_coupling(eta, su, sv)
            return cpl.OverlapCoupling(su, sv, eta, verdict)
        return cpl.make_overlap_coupling(eta, su)
    n = as_sym(cfg["system"]["A1"]).shape[0]
    return cpl.make_overlap_coupling(eta, float(spec.get("scale", 0.5)) * np.eye(n))


def initial_condition(cfg: dict, n: int, two_d: bool, rng=None):
    """Callable profile: x -> (N, n) in 1D, (x, y) -> (Nx, Ny, n) in 2D."""
    ic = cfg["ic"]
    kind = ic["type"]
    geom = cfg["geometry"]
    if kind == "gaussian":
        weights = np.asarray(ic.get("weights", [1.0] * n), dtype=float)
        if weights.shape != (n,):
            raise ConfigError(f"config.ic.weights: expected {n} entries")
        g = gaussian(float(ic["x0"]), float(ic["sigma"]))
        if not two_d:
            return lambda x: np.multiply.outer(g(x), weights)
        k = int(ic.get("y_mode", 0))
        amp = float(ic.get("y_amplitude", 0.3))
        ly = float(geom["ly"])

        def profile2(x, y):
            mod = 1.0 + (amp * np.cos(2.0 * np.pi * k * y / ly) if k else 0.0)
            return np.multiply.outer(g(x) * mod, weights)

        return profile2
    if kind == "planewave":
        if not two_d:
            raise ConfigError("config.ic: planewave initial data is 2D only")
        weights = np.asarray(ic.get("weights", [1.0] * n), dtype=float)
        ly = float(geom["ly"])
        span = float(geom["d"]) - float(geom["a"])
        kap = np.array([2.0 * np.pi * int(ic["m_x"]) / span, 2.0 * np.pi * int(ic.get("m_y", 0)) / ly])

        def wave(x, y):
            return np.multiply.outer(np.cos(kap[0] * x + kap[1] * y), weights)

        return wave
    if kind == "random-gaussians":
        if rng is None:
            rng = np.random.default_rng(0)
        count = int(ic.get("count", 3))
        lo = float(geom["b"]) - 0.3 * (float(geom["b"]) - float(geom["a"]))
        hi = float(geom["c"]) + 0.3 * (float(geom["d"]) - float(geom["c"]))
        parts = []
        for _ in range(count):
            x0 = rng.uniform(lo, hi)
            sig = rng.uniform(0.08, 0.2) * (float(geom["d"]) - float(geom["a"]))
            w = rng.normal(size=n)
            parts.append((gaussian(x0, sig), w))
        if not two_d:
            return lambda x: sum(np.multiply.outer(g(x), w) for g, w in parts)
        ly = float(geom["ly"])

        def rand2(x, y):
            mod = 1.0 + 0.2 * np.cos(2.0 * np.pi * y / ly)
            return sum(np.multiply.outer(g(x) * mod, w) for g, w in parts)

        return rand2
    raise ConfigError(f"config.ic.type: unknown type {kind!r}")
