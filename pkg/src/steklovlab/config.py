"""Run configuration: TOML schema, loading, and validation.

Schema (all keys in one file; see README for the full reference)::

    k = 1                       # component count, >= 1

    [domain]                    # exactly one shape
    kind = "unit_disk"          # "unit_square" | "unit_disk" | "file"
    sectors = 64                # unit_disk
    rings = 16                  # unit_disk
    # n = 8                     # unit_square
    # path = "mesh.txt"         # file

    [weights.A]                 # A, Sigma, M, P; missing section = zero field
    constant = [0.0]            # k*k row-major numbers, or a scalar
    # entries = [["x1 + 1"]]    # alternatively, k rows of k expression strings

    [eigensolver]
    count = 8
    shift = "auto"              # or a nonnegative number
    kernel_threshold = 1e-10

    [certify]
    j = 1
    alpha = 1.2                 # number or x-only expression string ...
    beta = 1.8
    # a = 1.2                   # ... or both bounds from the boundary weight:
    # b = 1.8                   #     alpha = a*lambda_min(P), beta = b*lambda_max(P)

    [solve]
    g = ["1.5*u1 + atan(u1)"]   # k components
    j = 1                       # gap index for delta, or explicit delta = 1.5
    steps = 10
    newton_tol = 1e-10
    newton_maxit = 25
    # cap = 1e6

    [output]
    directory = "out"
    formats = ["json", "csv", "svg"]
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from .errors import ConfigError
from .mesh import Mesh, make_unit_disk, make_unit_square, read_mesh
from .weights import BOUNDARY, INTERIOR, MatrixField

__all__ = ["RunConfig", "load_config", "build_mesh", "build_weights"]

_SUPPORT_OF = {"A": INTERIOR, "Sigma": BOUNDARY, "M": INTERIOR, "P": BOUNDARY}


@dataclass
class RunConfig:
    k: int
    domain: dict
    weights: dict          # name -> MatrixField (A, Sigma, M, P always present)
    eigensolver: dict
    certify: dict | None
    solve: dict | None
    output: dict
    base_dir: Path = field(default_factory=Path)


def _require(table: dict, key: str, kind, path: str):
    if key not in table:
        raise ConfigError(f"{path}.{key}", "missing required key")
    val = table[key]
    kinds = kind if isinstance(kind, tuple) else (kind,)
    if float in kinds and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if not isinstance(val, kinds) or isinstance(val, bool):
        names = "/".join(k.__name__ for k in kinds)
        raise ConfigError(f"{path}.{key}", f"expected {names}, got {type(val).__name__}")
    return val


def _optional(table: dict, key: str, kind, default, path: str):
    if key not in table:
        return default
    return _require(table, key, kind, path)


def _reject_unknown(table: dict, allowed, path: str):
    for key in table:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}", f"unknown key (allowed: {sorted(allowed)})")


def _parse_weight(name: str, section, k: int) -> MatrixField:
    path = f"weights.{name}"
    support = _SUPPORT_OF[name]
    if section is None:
        return MatrixField.zero(name, k, support)
    if not isinstance(section, dict):
        raise ConfigError(path, "must be a table")
    _reject_unknown(section, {"constant", "entries"}, path)
    if ("constant" in section) == ("entries" in section):
        raise ConfigError(path, "needs exactly one of 'constant' or 'entries'")
    if "constant" in section:
        val = section["constant"]
        if isinstance(val, (int, float)) and not isinstance(val, bool):
            return MatrixField.constant(name, k, float(val), support)
        if isinstance(val, list):
            if len(val) != k * k:
                raise ConfigError(f"{path}.constant",
                                  f"needs k*k = {k * k} row-major numbers, got {len(val)}")
            try:
                mat = [[float(val[i * k + j]) for j in range(k)] for i in range(k)]
            except (TypeError, ValueError):
                raise ConfigError(f"{path}.constant", "entries must be numbers") from None
            return MatrixField.constant(name, k, mat, support)
        raise ConfigError(f"{path}.constant", "must be a number or a flat list of k*k numbers")
    rows = section["entries"]
    if (not isinstance(rows, list) or len(rows) != k
            or any(not isinstance(r, list) or len(r) != k for r in rows)):
        raise ConfigError(f"{path}.entries", f"must be {k} rows of {k} expression strings")
    try:
        return MatrixField.from_exprs(name, k, rows, support)
    except Exception as err:
        raise ConfigError(f"{path}.entries", str(err)) from None


def load_config(path) -> RunConfig:
    """Load and validate a TOML run configuration."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(str(path), "config file not found")
    with open(path, "rb") as f:
        try:
            raw = _toml.load(f)
        except _toml.TOMLDecodeError as err:
            raise ConfigError(str(path), f"TOML parse error: {err}") from None

    _reject_unknown(raw, {"k", "domain", "weights", "eigensolver", "certify", "solve", "output"}, "config")
    k = _require(raw, "k", int, "config")
    if k < 1:
        raise ConfigError("config.k", f"component count must be >= 1, got {k}")

    domain = _require(raw, "domain", dict, "config")
    kind = _require(domain, "kind", str, "domain")
    if kind == "unit_square":
        _reject_unknown(domain, {"kind", "n"}, "domain")
        n = _require(domain, "n", int, "domain")
        if n < 1:
            raise ConfigError("domain.n", f"must be >= 1, got {n}")
    elif kind == "unit_disk":
        _reject_unknown(domain, {"kind", "sectors", "rings"}, "domain")
        s = _require(domain, "sectors", int, "domain")
        r = _require(domain, "rings", int, "domain")
        if s < 3 or r < 1:
            raise ConfigError("domain", f"needs sectors >= 3 and rings >= 1, got {s}, {r}")
    elif kind == "file":
        _reject_unknown(domain, {"kind", "path"}, "domain")
        rel = _require(domain, "path", str, "domain")
        if not (path.parent / rel).exists():
            raise ConfigError("domain.path", f"mesh file not found: {rel}")
    else:
        raise ConfigError("domain.kind", f"unknown domain kind {kind!r}")

    wsec = _optional(raw, "weights", dict, {}, "config")
    _reject_unknown(wsec, set(_SUPPORT_OF), "weights")
    weights = {name: _parse_weight(name, wsec.get(name), k) for name in _SUPPORT_OF}

    esec = _optional(raw, "eigensolver", dict, {}, "config")
    _reject_unknown(esec, {"count", "shift", "kernel_threshold"}, "eigensolver")
    shift = esec.get("shift", "auto")
    if not (shift == "auto" or isinstance(shift, (int, float))):
        raise ConfigError("eigensolver.shift", "must be 'auto' or a nonnegative number")
    eigensolver = {
        "count": _optional(esec, "count", int, 8, "eigensolver"),
        "shift": shift if shift == "auto" else float(shift),
        "kernel_threshold": float(_optional(esec, "kernel_threshold", float, 1e-10, "eigensolver")),
    }
    if eigensolver["count"] < 1:
        raise ConfigError("eigensolver.count", "must be >= 1")

    certify_cfg = None
    if "certify" in raw:
        csec = _require(raw, "certify", dict, "config")
        _reject_unknown(csec, {"j", "alpha", "beta", "a", "b"}, "certify")
        j = _require(csec, "j", int, "certify")
        has_ab = "a" in csec or "b" in csec
        has_bounds = "alpha" in csec or "beta" in csec
        if has_ab == has_bounds:
            raise ConfigError("certify", "give either both 'alpha' and 'beta', or both 'a' and 'b'")
        if has_ab:
            certify_cfg = {"j": j,
                           "a": float(_require(csec, "a", (int, float), "certify")),
                           "b": float(_require(csec, "b", (int, float), "certify"))}
        else:
            for key in ("alpha", "beta"):
                if key not in csec:
                    raise ConfigError(f"certify.{key}", "missing required key")
                if not isinstance(csec[key], (int, float, str)):
                    raise ConfigError(f"certify.{key}", "must be a number or an expression string")
            certify_cfg = {"j": j, "alpha": csec["alpha"], "beta": csec["beta"]}

    solve_cfg = None
    if "solve" in raw:
        ssec = _require(raw, "solve", dict, "config")
        _reject_unknown(ssec, {"g", "j", "delta", "steps", "newton_tol", "newton_maxit", "cap"}, "solve")
        g = _require(ssec, "g", list, "solve")
        if len(g) != k or any(not isinstance(s, str) for s in g):
            raise ConfigError("solve.g", f"needs {k} expression strings")
        if ("j" in ssec) == ("delta" in ssec):
            raise ConfigError("solve", "give exactly one of 'j' (gap index) or 'delta'")
        solve_cfg = {
            "g": list(g),
            "j": ssec.get("j"),
            "delta": float(ssec["delta"]) if "delta" in ssec else None,
            "steps": _optional(ssec, "steps", int, 10, "solve"),
            "newton_tol": float(_optional(ssec, "newton_tol", float, 1e-10, "solve")),
            "newton_maxit": _optional(ssec, "newton_maxit", int, 25, "solve"),
            "cap": float(ssec["cap"]) if "cap" in ssec else None,
        }
        if solve_cfg["steps"] < 1:
            raise ConfigError("solve.steps", "must be >= 1")

    osec = _optional(raw, "output", dict, {}, "config")
    _reject_unknown(osec, {"directory", "formats"}, "output")
    formats = _optional(osec, "formats", list, ["json"], "output")
    for fmt in formats:
        if fmt not in ("json", "csv", "svg"):
            raise ConfigError("output.formats", f"unknown format {fmt!r}")
    output = {"directory": _optional(osec, "directory", str, "out", "output"),
              "formats": list(formats)}

    return RunConfig(k=k, domain=domain, weights=weights, eigensolver=eigensolver,
                     certify=certify_cfg, solve=solve_cfg, output=output,
                     base_dir=path.parent)


def build_mesh(cfg: RunConfig) -> Mesh:
    """Construct the mesh described by the domain section."""
    d = cfg.domain
    if d["kind"] == "unit_square":
        return make_unit_square(d["n"])
    if d["kind"] == "unit_disk":
        return make_unit_disk(d["sectors"], d["rings"])
    return read_mesh(cfg.base_dir / d["path"])


def build_weights(cfg: RunConfig):
    """The four weight fields in assembly order (A, Sigma, M, P)."""
    return (cfg.weights["A"], cfg.weights["Sigma"], cfg.weights["M"], cfg.weights["P"])
