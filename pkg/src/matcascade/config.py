"""Strict YAML experiment configs with line-anchored errors.

The document is read as a YAML node graph so every value keeps its source
line.  Unknown keys, missing required keys and out-of-range values raise
:class:`ConfigError` before any computation starts.  Seeds are required.

Example::

    seed: 7
    tree: {type: constant, b: 2}
    law:
      type: iid_entries
      d: 2
      entry: {type: uniform, lo: 0.1, hi: 0.4}
    estimate_k:
      s: [0, 0.5, 1]
      n_list: [20, 40, 80]
      replicas: 4096
"""

import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import DomainError
from .matenv import (FiniteSupport, Fixed, IIDEntries, LogNormal, PointMass, RateLaw, Scaled,
                     TwoPoint, Uniform)
from .tree import Constant, Explicit, Periodic


class ConfigError(ValueError):
    def __init__(self, source, line, path, message):
        self.source, self.line, self.path = source, line, path
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {path or '<document>'}: {message}")


class _Val:
    """A YAML node with its dotted path, for validation."""

    def __init__(self, node, path, source):
        self.node, self.path, self.source = node, path, source

    @property
    def line(self):
        return self.node.start_mark.line + 1

    def fail(self, message):
        raise ConfigError(self.source, self.line, self.path, message)

    def _sub(self, node, key):
        path = f"{self.path}.{key}" if self.path else str(key)
        return _Val(node, path, self.source)

    # scalars
    def _scalar(self):
        if not isinstance(self.node, yaml.ScalarNode):
            self.fail("expected a scalar")
        return yaml.safe_load(yaml.serialize(self.node))

    def integer(self, lo=None, hi=None):
        v = self._scalar()
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(f"expected an integer, got {v!r}")
        if (lo is not None and v < lo) or (hi is not None and v > hi):
            self.fail(f"{v} is out of range [{lo if lo is not None else '-inf'}, "
                      f"{hi if hi is not None else 'inf'}]")
        return v

    def real(self, lo=None, hi=None, open_lo=False):
        v = self._scalar()
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(f"expected a number, got {v!r}")
        v = float(v)
        if not math.isfinite(v):
            self.fail("expected a finite number")
        if lo is not None and (v < lo or (open_lo and v == lo)):
            self.fail(f"{v} must be {'>' if open_lo else '>='} {lo}")
        if hi is not None and v > hi:
            self.fail(f"{v} must be <= {hi}")
        return v

    def string(self, choices=None):
        v = self._scalar()
        if not isinstance(v, str):
            self.fail(f"expected a string, got {v!r}")
        if choices is not None and v not in choices:
            self.fail(f"{v!r} is not one of {', '.join(sorted(choices))}")
        return v

    def items(self):
        if not isinstance(self.node, yaml.SequenceNode):
            self.fail("expected a list")
        return [self._sub(n, i) for i, n in enumerate(self.node.value)]

    def nonempty_items(self):
        out = self.items()
        if not out:
            self.fail("list must not be empty")
        return out

    def mapping(self, allowed, required=()):
        """Child values by key; rejects unknown and missing keys."""
        if not isinstance(self.node, yaml.MappingNode):
            self.fail("expected a mapping")
        out = {}
        for knode, vnode in self.node.value:
            key = yaml.safe_load(yaml.serialize(knode)) if isinstance(knode, yaml.ScalarNode) else None
            sub = self._sub(vnode, key)
            if key not in allowed:
                raise ConfigError(self.source, knode.start_mark.line + 1, sub.path,
                                  f"unknown key (allowed: {', '.join(sorted(allowed))})")
            if key in out:
                raise ConfigError(self.source, knode.start_mark.line + 1, sub.path, "duplicate key")
            out[key] = sub
        for key in required:
            if key not in out:
                self.fail(f"missing required key {key!r}")
        return out


# ----------------------------------------------------------------- pieces

def _guard(val, build):
    try:
        return build()
    except DomainError as exc:
        val.fail(str(exc))


def parse_tree(val):
    kind = val.mapping({"type", "b", "levels", "counts", "default"}, ("type",))
    t = kind["type"].string({"constant", "periodic", "explicit"})
    if t == "constant":
        keys = val.mapping({"type", "b"}, ("type", "b"))
        return Constant(keys["b"].integer(lo=1))
    if t == "periodic":
        keys = val.mapping({"type", "levels"}, ("type", "levels"))
        return Periodic(tuple(v.integer(lo=1) for v in keys["levels"].nonempty_items()))
    keys = val.mapping({"type", "counts", "default"}, ("type",))
    default = keys["default"].integer(lo=1) if "default" in keys else 1
    counts = {}
    for item in keys["counts"].items() if "counts" in keys else []:
        entry = item.mapping({"word", "count"}, ("word", "count"))
        word = tuple(v.integer(lo=1) for v in entry["word"].items())
        if word in counts:
            item.fail(f"word {list(word)} listed twice")
        counts[word] = entry["count"].integer(lo=1)
    return Explicit(counts, default)


def parse_entry(val):
    keys = val.mapping({"type", "lo", "hi", "a", "p", "b", "m", "s", "value"}, ("type",))
    t = keys["type"].string({"uniform", "two_point", "lognormal", "fixed"})
    need = {"uniform": ("lo", "hi"), "two_point": ("a", "p", "b"),
            "lognormal": ("m", "s"), "fixed": ("value",)}[t]
    val.mapping({"type", *need}, ("type", *need))
    if t == "uniform":
        lo = keys["lo"].real(lo=0)
        hi = keys["hi"].real(lo=0)
        if hi < lo:
            keys["hi"].fail("hi must be >= lo")
        return Uniform(lo, hi)
    if t == "two_point":
        return _guard(val, lambda: TwoPoint(keys["a"].real(lo=0), keys["p"].real(lo=0, hi=1),
                                            keys["b"].real(lo=0)))
    if t == "lognormal":
        return LogNormal(keys["m"].real(), keys["s"].real(lo=0))
    return Fixed(keys["value"].real(lo=0))


def _matrix(val, d=None):
    rows = val.nonempty_items()
    mat = [[x.real(lo=0) for x in r.nonempty_items()] for r in rows]
    n = len(mat)
    if any(len(r) != n for r in mat):
        val.fail("matrix must be square")
    if d is not None and n != d:
        val.fail(f"matrix must be {d}x{d}")
    return np.array(mat)


def _rate_entry(val):
    law = parse_entry(val)
    if not isinstance(law, LogNormal) and law.support()[0] <= 0:
        val.fail(f"rates must be strictly positive; {law!r} reaches 0")
    return law


def _entry_or_grid(val, shape):
    if isinstance(val.node, yaml.MappingNode):
        return _rate_entry(val)
    items = val.items()
    if len(items) != shape[0]:
        val.fail(f"expected {shape[0]} entries")
    if len(shape) == 1:
        return [_rate_entry(v) for v in items]
    grid = []
    for row in items:
        cells = row.items()
        if len(cells) != shape[1]:
            row.fail(f"expected {shape[1]} entries")
        grid.append([_rate_entry(c) for c in cells])
    return grid


MATRIX_LAW_TYPES = {"point_mass", "finite_support", "iid_entries", "scaled"}


def parse_law(val, allow_rates=True):
    keys = val.mapping({"type", "matrix", "atoms", "probs", "d", "entry", "base", "c", "nu", "mu"},
                       ("type",))
    types = MATRIX_LAW_TYPES | ({"rates"} if allow_rates else set())
    t = keys["type"].string(types)
    if t == "point_mass":
        val.mapping({"type", "matrix"}, ("type", "matrix"))
        return PointMass(_matrix(keys["matrix"]))
    if t == "finite_support":
        val.mapping({"type", "atoms", "probs"}, ("type", "atoms", "probs"))
        atoms = [_matrix(a) for a in keys["atoms"].nonempty_items()]
        if len({a.shape for a in atoms}) != 1:
            keys["atoms"].fail("atoms must share one shape")
        probs = [p.real(lo=0, hi=1) for p in keys["probs"].nonempty_items()]
        if len(probs) != len(atoms):
            keys["probs"].fail("one probability per atom is required")
        return _guard(keys["probs"], lambda: FiniteSupport(atoms, probs))
    if t == "iid_entries":
        val.mapping({"type", "d", "entry"}, ("type", "d", "entry"))
        return IIDEntries(keys["d"].integer(lo=1), parse_entry(keys["entry"]))
    if t == "scaled":
        val.mapping({"type", "base", "c"}, ("type", "base", "c"))
        base = parse_law(keys["base"], allow_rates=False)
        return _guard(val, lambda: Scaled(base, keys["c"].real(lo=0)))
    val.mapping({"type", "d", "nu", "mu"}, ("type", "d", "nu", "mu"))
    d = keys["d"].integer(lo=1)
    nu = _entry_or_grid(keys["nu"], (d, d))
    mu = _entry_or_grid(keys["mu"], (d,))
    return _guard(val, lambda: RateLaw(d, nu, mu))


def _reals(val, lo=None, hi=None):
    return [v.real(lo=lo, hi=hi) for v in val.nonempty_items()]


def _ints(val, lo=None):
    return [v.integer(lo=lo) for v in val.nonempty_items()]


# ---------------------------------------------------------------- sections

@dataclass
class EstimateK:
    s: list = field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0])
    n_list: list = field(default_factory=lambda: [20, 40, 80, 160])
    replicas: int = 4096
    method: str = "cloning"


@dataclass
class Classify:
    n_list: list = field(default_factory=lambda: [20, 40, 80, 160])
    replicas: int = 4096
    grid: int = 11
    tol: float = 1e-3
    method: str = "cloning"
    tree_depth: int = 20
    z: float = 2.0
    use_shortcut: bool = True


@dataclass
class CascadeCfg:
    n_max: int = 10
    width_cap: int = 2 ** 22


@dataclass
class BindweedCfg:
    mode: str = "simulate"
    replicas: int = 8
    t_max: float = None
    jump_max: int = None
    depth: int = 3
    max_states: int = 10 ** 6


@dataclass
class ChaosCfg:
    b: int = 2
    iters: int = 20
    population: int = 10_000
    eps: float = 1e-2
    init: np.ndarray = None
    lambda_hat: float = None


@dataclass
class ExperimentConfig:
    seed: int
    tree: object = None
    law: object = None
    estimate_k: EstimateK = None
    classify: Classify = None
    cascade: CascadeCfg = None
    bindweed: BindweedCfg = None
    chaos: ChaosCfg = None


_METHODS = {"cloning", "direct"}


def _estimate_k(val):
    keys = val.mapping({"s", "n_list", "replicas", "method"})
    out = EstimateK()
    if "s" in keys:
        out.s = _reals(keys["s"], lo=0)
    if "n_list" in keys:
        out.n_list = _ints(keys["n_list"], lo=1)
    if "replicas" in keys:
        out.replicas = keys["replicas"].integer(lo=2)
    if "method" in keys:
        out.method = keys["method"].string(_METHODS)
    return out


def _classify(val):
    keys = val.mapping({"n_list", "replicas", "grid", "tol", "method", "tree_depth", "z",
                        "use_shortcut"})
    out = Classify()
    if "n_list" in keys:
        out.n_list = _ints(keys["n_list"], lo=1)
    if "replicas" in keys:
        out.replicas = keys["replicas"].integer(lo=2)
    if "grid" in keys:
        out.grid = keys["grid"].integer(lo=3)
    if "tol" in keys:
        out.tol = keys["tol"].real(lo=0, open_lo=True)
    if "method" in keys:
        out.method = keys["method"].string(_METHODS)
    if "tree_depth" in keys:
        out.tree_depth = keys["tree_depth"].integer(lo=1, hi=200)
    if "z" in keys:
        out.z = keys["z"].real(lo=0)
    if "use_shortcut" in keys:
        v = keys["use_shortcut"]._scalar()
        if not isinstance(v, bool):
            keys["use_shortcut"].fail("expected true or false")
        out.use_shortcut = v
    return out


def _cascade(val):
    keys = val.mapping({"n_max", "width_cap"})
    out = CascadeCfg()
    if "n_max" in keys:
        out.n_max = keys["n_max"].integer(lo=1)
    if "width_cap" in keys:
        out.width_cap = keys["width_cap"].integer(lo=1)
    return out


def _bindweed(val):
    keys = val.mapping({"mode", "replicas", "t_max", "jump_max", "depth", "max_states"})
    out = BindweedCfg()
    if "mode" in keys:
        out.mode = keys["mode"].string({"simulate", "exact"})
    if "replicas" in keys:
        out.replicas = keys["replicas"].integer(lo=1)
    if "t_max" in keys:
        out.t_max = keys["t_max"].real(lo=0, open_lo=True)
    if "jump_max" in keys:
        out.jump_max = keys["jump_max"].integer(lo=1)
    if "depth" in keys:
        out.depth = keys["depth"].integer(lo=0)
    if "max_states" in keys:
        out.max_states = keys["max_states"].integer(lo=1)
    if out.mode == "simulate" and out.t_max is None and out.jump_max is None:
        val.fail("simulate mode needs t_max or jump_max")
    return out


def _chaos(val):
    keys = val.mapping({"b", "iters", "population", "eps", "init", "lambda_hat"})
    out = ChaosCfg()
    if "b" in keys:
        out.b = keys["b"].integer(lo=1)
    if "iters" in keys:
        out.iters = keys["iters"].integer(lo=1)
    if "population" in keys:
        out.population = keys["population"].integer(lo=1)
    if "eps" in keys:
        out.eps = keys["eps"].real(lo=0)
    if "init" in keys:
        out.init = _matrix(keys["init"])
    if "lambda_hat" in keys:
        out.lambda_hat = keys["lambda_hat"].real(lo=0)
    return out


_SECTIONS = {"estimate_k": _estimate_k, "classify": _classify, "cascade": _cascade,
             "bindweed": _bindweed, "chaos": _chaos}

#: what each command needs besides the seed
REQUIREMENTS = {
    "estimate-k": ("law", "estimate_k"),
    "classify": ("law", "tree", "classify"),
    "cascade": ("law", "tree", "cascade"),
    "bindweed": ("law", "tree", "bindweed"),
    "chaos": ("law", "chaos"),
}


def load_config(text, command=None, source="<config>"):
    """Parse and validate a config document.

    With ``command`` set, the sections that command needs must be present.
    """
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(source, mark.line + 1 if mark else None, "", f"invalid YAML: {exc}") from None
    if root is None:
        raise ConfigError(source, None, "", "empty config")
    top = _Val(root, "", source)
    keys = top.mapping({"seed", "tree", "law"} | set(_SECTIONS), ("seed",))
    cfg = ExperimentConfig(seed=keys["seed"].integer(lo=0, hi=2 ** 64 - 1))
    if "tree" in keys:
        cfg.tree = parse_tree(keys["tree"])
    if "law" in keys:
        cfg.law = parse_law(keys["law"])
    for name, parse in _SECTIONS.items():
        if name in keys:
            setattr(cfg, name, parse(keys[name]))
    if command is not None:
        for need in REQUIREMENTS[command]:
            if getattr(cfg, need) is None:
                if need in _SECTIONS:
                    # sections with only defaults may be omitted
                    setattr(cfg, need, _SECTIONS[need](_Val(yaml.compose("{}"), need, source)))
                else:
                    top.fail(f"command {command!r} needs a {need!r} section")
        if command in ("bindweed",) and not isinstance(cfg.law, RateLaw):
            keys["law"].fail("the bindweed walk needs a law of type 'rates'")
        if command == "chaos" and isinstance(cfg.law, RateLaw):
            keys["law"].fail("the chaos iteration needs a matrix law")
        if command == "chaos" and cfg.chaos.init is not None and cfg.chaos.init.shape[0] != cfg.law.d:
            keys["chaos"].fail(f"init must be {cfg.law.d}x{cfg.law.d}")
    return cfg


def load_config_file(path, command=None):
    with open(path, encoding="utf-8") as fh:
        return load_config(fh.read(), command, source=str(path))
