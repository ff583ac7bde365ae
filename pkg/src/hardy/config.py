"""Job configuration: YAML file + CLI overrides, strictly validated.

Unknown keys are rejected with their full path; every numeric knob is
range-checked here so pipeline code can trust the values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import yaml

from .exprlang import compile_expr, ExprError
from .grid import Interval

__all__ = ["JobConfig", "ConfigError", "load_config", "apply_overrides",
           "MODES"]

MODES = ("verify-1d", "ep-family", "a-family", "series", "nd-example", "rellich")


class ConfigError(ValueError):
    pass


_SCHEMA = {
    "mode": str,
    "problem": {
        "p": str,
        "q": str,
        "interval": list,
    },
    "family": {
        "kind": str,
        "a": (int, float),
        "c1": (int, float),
        "c2": (int, float),
        "c3": (int, float),
        "k": (int, float),
        "L": (int, float),
        "m": (int, float),
        "depth": int,
        "anchor_policy": str,
        "w": str,
        "f": str,
        "f_prime": str,
    },
    "certify": {
        "windows": int,
        "ratio": (int, float),
        "xis": list,
        "osc_shrinks": list,
        "lambda0_mesh": int,
        "lambda0_cutoffs": list,
    },
    "nd": {
        "n": int,
        "phi": str,
        "R_phi": (int, float),
        "u": str,
        "u_prime": str,
        "a": (int, float),
        "grid_n": int,
    },
    "rellich": {
        "count": int,
    },
    "output": {
        "csv": bool,
        "samples": int,
    },
}


def _check_keys(data, schema, path=""):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping")
    for key, value in data.items():
        here = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"unknown key {here!r}")
        spec = schema[key]
        if isinstance(spec, dict):
            _check_keys(value, spec, here)
        elif spec is list:
            if not isinstance(value, (list, tuple)):
                raise ConfigError(f"{here}: expected a list")
        elif not isinstance(value, spec) or isinstance(value, bool) and spec != bool:
            want = spec if isinstance(spec, type) else spec[0]
            raise ConfigError(f"{here}: expected {want.__name__}, got {value!r}")


def _num(x, path):
    if isinstance(x, str):
        if x.lower() in ("inf", "+inf", "infinity"):
            return math.inf
        if x.lower() in ("-inf", "-infinity"):
            return -math.inf
        raise ConfigError(f"{path}: not a number: {x!r}")
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return float(x)
    raise ConfigError(f"{path}: not a number: {x!r}")


@dataclass
class JobConfig:
    mode: str
    raw: dict = field(default_factory=dict)

    # problem
    p_src: str = "1"
    q_src: str = "0"
    interval: tuple = (0.0, math.inf)

    # family
    family_kind: str = "classical"
    a: float | None = None
    c1: float | None = None
    c2: float = 0.0
    c3: float | None = None
    k: float = 1.0
    L: float | None = None
    m: float | None = None
    depth: int = 1
    anchor_policy: str = "shrinking"
    w_src: str | None = None
    f_src: str | None = None
    f_prime_src: str | None = None

    # certification
    windows: int = 8
    ratio: float = 0.25
    xis: tuple = (0.5, 1.0)
    osc_shrinks: tuple = (1e-2, 1e-3, 1e-4)
    lambda0_mesh: int = 0
    lambda0_cutoffs: tuple | None = None

    # nd
    n_dim: int = 3
    phi_src: str | None = None
    r_phi: float = 1.0
    u_src: str | None = None
    u_prime_src: str | None = None
    nd_a: float | None = None
    nd_grid: int = 1201

    # rellich
    rellich_count: int = 20

    # output
    emit_csv: bool = True
    csv_samples: int = 400

    def make_interval(self) -> Interval:
        a, b = self.interval
        left = "infinite" if math.isinf(a) else ("singular" if a == 0.0 else "regular")
        right = "infinite" if math.isinf(b) else "regular"
        return Interval(a, b, left, right)

    def compile(self, src, path):
        try:
            return compile_expr(src)
        except ExprError as exc:
            raise ConfigError(f"{path}: {exc}") from exc


def load_config(path_or_text, mode=None) -> JobConfig:
    """Parse and validate a YAML job config (path or literal text)."""
    if isinstance(path_or_text, str) and "\n" not in path_or_text and \
            (path_or_text.endswith((".yml", ".yaml")) or "/" in path_or_text):
        with open(path_or_text, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    else:
        data = yaml.safe_load(path_or_text)
    if data is None:
        data = {}
    return build_config(data, mode=mode)


def build_config(data: dict, mode=None) -> JobConfig:
    _check_keys(data, _SCHEMA)
    mode = mode or data.get("mode")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    cfg = JobConfig(mode=mode, raw=data)

    prob = data.get("problem", {})
    cfg.p_src = prob.get("p", cfg.p_src)
    cfg.q_src = prob.get("q", cfg.q_src)
    if "interval" in prob:
        iv = prob["interval"]
        if len(iv) != 2:
            raise ConfigError("problem.interval: expected [a, b]")
        cfg.interval = (_num(iv[0], "problem.interval[0]"),
                        _num(iv[1], "problem.interval[1]"))
        if not cfg.interval[0] < cfg.interval[1]:
            raise ConfigError("problem.interval: need a < b")

    fam = data.get("family", {})
    cfg.family_kind = fam.get("kind", cfg.family_kind)
    if cfg.family_kind not in ("classical", "a-family", "ep", "series", "external"):
        raise ConfigError(f"family.kind: unknown kind {cfg.family_kind!r}")
    for key, attr in (("a", "a"), ("c1", "c1"), ("c2", "c2"), ("c3", "c3"),
                      ("k", "k"), ("L", "L"), ("m", "m")):
        if key in fam:
            setattr(cfg, attr, _num(fam[key], f"family.{key}"))
    if "depth" in fam:
        cfg.depth = int(fam["depth"])
        if cfg.depth < 1:
            raise ConfigError("family.depth: must be >= 1")
    cfg.anchor_policy = fam.get("anchor_policy", cfg.anchor_policy)
    if cfg.anchor_policy not in ("shrinking", "fixed"):
        raise ConfigError("family.anchor_policy: 'shrinking' or 'fixed'")
    cfg.w_src = fam.get("w", cfg.w_src)
    cfg.f_src = fam.get("f", cfg.f_src)
    cfg.f_prime_src = fam.get("f_prime", cfg.f_prime_src)
    if cfg.family_kind == "a-family" and (cfg.a is None or cfg.a <= 0):
        raise ConfigError("family.a: required positive for the a-family")
    if cfg.family_kind == "external" and not (cfg.w_src and cfg.f_src):
        raise ConfigError("family: external kind needs w and f expressions")

    cert = data.get("certify", {})
    if "windows" in cert:
        cfg.windows = int(cert["windows"])
        if cfg.windows < 4:
            raise ConfigError("certify.windows: must be >= 4")
    if "ratio" in cert:
        cfg.ratio = float(cert["ratio"])
        if not 0 < cfg.ratio < 1:
            raise ConfigError("certify.ratio: must lie in (0, 1)")
    if "xis" in cert:
        cfg.xis = tuple(_num(x, "certify.xis") for x in cert["xis"])
        if any(x <= 0 for x in cfg.xis):
            raise ConfigError("certify.xis: must be positive")
    if "osc_shrinks" in cert:
        cfg.osc_shrinks = tuple(_num(x, "certify.osc_shrinks")
                                for x in cert["osc_shrinks"])
    if "lambda0_mesh" in cert:
        cfg.lambda0_mesh = int(cert["lambda0_mesh"])
        if cfg.lambda0_mesh and cfg.lambda0_mesh < 16:
            raise ConfigError("certify.lambda0_mesh: 0 (off) or >= 16")
    if "lambda0_cutoffs" in cert:
        lc = cert["lambda0_cutoffs"]
        cfg.lambda0_cutoffs = (_num(lc[0], "certify.lambda0_cutoffs"),
                               _num(lc[1], "certify.lambda0_cutoffs"))

    nd = data.get("nd", {})
    if "n" in nd:
        cfg.n_dim = int(nd["n"])
        if cfg.n_dim < 3:
            raise ConfigError("nd.n: need dimension >= 3")
    cfg.phi_src = nd.get("phi", cfg.phi_src)
    if "R_phi" in nd:
        cfg.r_phi = _num(nd["R_phi"], "nd.R_phi")
        if cfg.r_phi <= 0:
            raise ConfigError("nd.R_phi: must be positive")
    cfg.u_src = nd.get("u", cfg.u_src)
    cfg.u_prime_src = nd.get("u_prime", cfg.u_prime_src)
    if "a" in nd:
        cfg.nd_a = _num(nd["a"], "nd.a")
    if "grid_n" in nd:
        cfg.nd_grid = int(nd["grid_n"])
        if cfg.nd_grid < 64:
            raise ConfigError("nd.grid_n: must be >= 64")
    if cfg.mode in ("nd-example", "rellich") and not cfg.phi_src:
        raise ConfigError("nd.phi: required for this mode")
    if cfg.u_src and not cfg.u_prime_src:
        raise ConfigError("nd.u_prime: required together with nd.u")

    rel = data.get("rellich", {})
    if "count" in rel:
        cfg.rellich_count = int(rel["count"])
        if cfg.rellich_count < 1:
            raise ConfigError("rellich.count: must be >= 1")

    out = data.get("output", {})
    cfg.emit_csv = bool(out.get("csv", cfg.emit_csv))
    if "samples" in out:
        cfg.csv_samples = int(out["samples"])
        if cfg.csv_samples < 16:
            raise ConfigError("output.samples: must be >= 16")
    return cfg


def apply_overrides(data: dict, overrides) -> dict:
    """Apply ``key.path=value`` overrides (values parsed as YAML scalars)."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key=value")
        key, _, raw = item.partition("=")
        value = yaml.safe_load(raw)
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r}: {part} is not a mapping")
        node[parts[-1]] = value
    return data
