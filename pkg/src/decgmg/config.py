"""JSON run configuration: schema, loading and translation to solver configs."""

from __future__ import annotations

import json

import jsonschema

from .physics.convection import ConvectionConfig
from .physics.poisson import POISSON_SOLVERS, PoissonConfig

__all__ = ["CONFIG_SCHEMA", "ConfigError", "load_config", "validate_config", "poisson_config", "convection_config"]


class ConfigError(ValueError):
    pass


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int = {"type": "integer"}
_nat = {"type": "integer", "minimum": 0}
_smoother = {"enum": ["gauss_seidel", "symmetric_gauss_seidel", "weighted_jacobi", "cg_smoother"]}
_cycle = {"enum": ["V", "W", "F", "v", "w", "f"]}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


CONFIG_SCHEMA = _obj(
    {
        "mesh": _obj(
            {
                "kind": {"enum": ["equilateral", "grid", "obj"]},
                "rows": {"type": "integer", "minimum": 1},
                "cols": {"type": "integer", "minimum": 1},
                "side": _pos,
                "nx": {"type": "integer", "minimum": 1},
                "ny": {"type": "integer", "minimum": 1},
                "lx": _pos,
                "ly": _pos,
                "origin": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                "path": {"type": "string"},
            }
        ),
        "tower": _obj(
            {
                "scheme": {"enum": ["binary", "cubic"]},
                "levels": _nat,
                "mg_levels": {"type": ["integer", "null"], "minimum": 1},
            }
        ),
        "solver": _obj(
            {
                "kind": {"enum": list(POISSON_SOLVERS)},
                "plan": _cycle,
                "cycles": {"type": "integer", "minimum": 1},
                "smoother": _smoother,
                "iters": _obj({"pre": _nat, "post": _nat}),
                "tol": _pos,
                "maxiter": {"type": "integer", "minimum": 1},
                "restart": {"type": "integer", "minimum": 1},
                "precond_plan": _cycle,
                "precond_cycles": {"type": "integer", "minimum": 1},
                "gmres_preconditioner": {"enum": ["none", "gmg"]},
            }
        ),
        "poisson": _obj({"rhs": {"enum": ["random", "divrho"]}, "seed": _nat}),
        "convection": _obj(
            {
                "lx": _pos,
                "ly": _pos,
                "g": _pos,
                "alpha_rho0": _pos,
                "phi": _pos,
                "Ra": _pos,
                "k_eta": _pos,
                "delta_T": _pos,
                "T_top": _num,
                "T_bottom": _num,
                "ic_scale": _pos,
                "ic_variance": _pos,
                "t_final": {"type": "number", "minimum": 0},
                "n_samples": {"type": "integer", "minimum": 1},
                "rtol": _pos,
                "atol": _pos,
                "advection": {"type": "boolean"},
                "diffusion": {"type": "boolean"},
                "diffusivity": {"type": ["number", "null"], "minimum": 0},
            }
        ),
        "output": _obj({"dir": {"type": "string"}, "formats": {"type": "array", "items": {"enum": ["csv", "json", "obj"]}}}),
    }
)


def validate_config(doc: dict) -> dict:
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None
    return doc


def load_config(path) -> dict:
    """Read and validate a JSON config.  ``OSError`` propagates for missing files."""
    with open(path) as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return validate_config(doc)


def poisson_config(doc: dict) -> PoissonConfig:
    kw = {}
    if "mesh" in doc:
        kw["mesh"] = dict(doc["mesh"])
    tower = doc.get("tower", {})
    for k in ("scheme", "levels", "mg_levels"):
        if k in tower:
            kw[k] = tower[k]
    kw.update(_solver_kw(doc.get("solver", {})))
    kw.pop("gmres_preconditioner", None)
    p = doc.get("poisson", {})
    for k in ("rhs", "seed"):
        if k in p:
            kw[k] = p[k]
    return PoissonConfig(**kw)


def _solver_kw(s: dict) -> dict:
    kw = {}
    rename = {"kind": "solver", "plan": "cycle", "precond_plan": "precond_cycle"}
    for k, v in s.items():
        if k == "iters":
            kw.update(v)
        elif k in ("plan", "precond_plan"):
            kw[rename[k]] = v.upper()
        else:
            kw[rename.get(k, k)] = v
    return kw


def convection_config(doc: dict) -> ConvectionConfig:
    kw = dict(doc.get("convection", {}))
    mesh = doc.get("mesh", {})
    if mesh.get("kind", "grid") != "grid":
        raise ConfigError("convection runs need a rectangular 'grid' mesh")
    for k in ("nx", "ny", "lx", "ly"):
        if k in mesh:
            kw[k] = mesh[k]
    tower = doc.get("tower", {})
    for k in ("scheme", "levels"):
        if k in tower:
            kw[k] = tower[k]
    s = _solver_kw(doc.get("solver", {}))
    if "solver" in s:
        kind = s.pop("solver")
        if kind not in ("direct", "gmg", "gmres"):
            raise ConfigError(f"convection pressure solver must be direct, gmg or gmres, not {kind!r}")
        kw["pressure_solver"] = kind
    if "tol" in s:
        kw["pressure_tol"] = s.pop("tol")
    if "cycles" in s:
        kw["max_cycles"] = s.pop("cycles")
    if "restart" in s:
        kw["gmres_restart"] = s.pop("restart")
    if "maxiter" in s:
        kw["gmres_maxiter"] = s.pop("maxiter")
    for k in ("cycle", "pre", "post", "smoother", "gmres_preconditioner"):
        if k in s:
            kw[k] = s.pop(k)
    try:
        return ConvectionConfig.from_dict(kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
