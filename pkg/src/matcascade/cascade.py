"""Matrix multiplicative cascades streamed level by level.

For a vertex ``v`` with root path ``a_1 ... a_n`` the path product is
``xi[v] = xi_{a_n} ... xi_{a_1}``: each new edge multiplies on the left.
A level is stored as unit-l1-norm matrices plus log scales, so products
over deep paths neither overflow nor underflow.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _seeding
from .errors import CapacityError, DomainError
from .lyap import operator_norm_l1
from .matenv import Environment
from .tree import Constant, level_size

DEFAULT_WIDTH_CAP = 2 ** 22


@dataclass(frozen=True)
class CascadeFrame:
    """One complete tree level.

    ``words[i]`` is the vertex word of entry ``i`` (shape (kappa_n, n)),
    ``keys[i]`` its environment key, and ``exp(log_scale[i]) * unit[i]``
    its path product.
    """

    level: int
    words: np.ndarray
    keys: list
    unit: np.ndarray
    log_scale: np.ndarray

    def __len__(self):
        return len(self.keys)

    def products(self):
        """Path products as plain matrices (only safe for shallow levels)."""
        return np.exp(self.log_scale)[:, None, None] * self.unit

    def entries(self):
        for i in range(len(self)):
            yield tuple(int(x) for x in self.words[i]), self.unit[i], float(self.log_scale[i])


def root_frame(env):
    d = env.d
    return CascadeFrame(0, np.zeros((1, 0), dtype=np.int64), [env.root.key],
                        np.eye(d)[None].copy(), np.zeros(1))


def _normalize(mats):
    norms = operator_norm_l1(mats)
    safe = np.where(norms > 0, norms, 1.0)
    with np.errstate(divide="ignore"):
        logs = np.log(norms)
    return mats / safe[:, None, None], logs


def step_level(frame, env, spec, width_cap=DEFAULT_WIDTH_CAP):
    """Next level: every child ``w`` of ``u`` gets ``xi_{a(w)} @ xi[u]``."""
    n = frame.level
    if spec.spherically_symmetric:
        counts = np.full(len(frame), spec.count(tuple(frame.words[0])), dtype=np.int64)
    else:
        counts = np.array([spec.count(tuple(int(x) for x in w)) for w in frame.words], dtype=np.int64)
    total = int(counts.sum())
    if total > width_cap:
        raise CapacityError(f"level {n + 1} has {total} vertices, above the width cap {width_cap}",
                            level=n)
    parent = np.repeat(np.arange(len(frame)), counts)
    child_index = np.concatenate([np.arange(1, c + 1) for c in counts]) if total else np.empty(0, np.int64)
    keys = [_seeding.child_key(frame.keys[p], i) for p, i in zip(parent.tolist(), child_index.tolist())]
    edge = env.matrices_for_keys(keys)
    unit, logs = _normalize(edge @ frame.unit[parent])
    words = np.empty((total, n + 1), dtype=np.int64)
    words[:, :n] = frame.words[parent]
    words[:, n] = child_index
    return CascadeFrame(n + 1, words, keys, unit, frame.log_scale[parent] + logs)


def psi_quadform(frame):
    """log of (chi, psi_n chi) = log sum_v (chi, xi[v] chi)."""
    if len(frame) == 0:
        raise DomainError("empty frame")
    sums = frame.unit.sum(axis=(1, 2))
    with np.errstate(divide="ignore"):
        logs = frame.log_scale + np.log(sums)
    top = float(np.max(logs))
    if not np.isfinite(top):
        return -math.inf
    return top + math.log(float(np.sum(np.exp(logs - top))))


@dataclass
class CascadeSeries:
    """Per-level log (chi, psi_n chi), log partial sums Z_n and widths.

    Level 0 is the root, whose path product is the identity, so
    ``Z_n = sum_{k=0}^{n} (chi, psi_k chi)`` starts at ``d``.
    """

    log_psi: list = field(default_factory=list)
    log_Z: list = field(default_factory=list)
    kappa: list = field(default_factory=list)

    @property
    def n_max(self):
        return len(self.log_psi) - 1

    def running_slopes(self):
        """Tail slope of log(chi, psi_n chi) against n, up to each level."""
        out = [math.nan]
        for n in range(1, len(self.log_psi)):
            out.append(tail_slope(self.log_psi[:n + 1]))
        return out

    @property
    def tail_slope(self):
        return tail_slope(self.log_psi)


def tail_slope(log_psi):
    """Least-squares slope over the last ceil(n_max/2) levels (at least 2 points)."""
    n_max = len(log_psi) - 1
    if n_max < 1:
        return math.nan
    first = n_max - max(math.ceil(n_max / 2), 1)
    x = np.arange(first, n_max + 1, dtype=float)
    y = np.asarray(log_psi[first:], dtype=float)
    if not np.all(np.isfinite(y)):
        return -math.inf
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))


def _as_env(law_or_env, seed):
    if isinstance(law_or_env, Environment):
        return law_or_env
    if seed is None:
        raise DomainError("a seed is required to build an environment")
    return Environment(law_or_env, seed)


def run_cascade(spec, law, seed=None, n_max=10, width_cap=DEFAULT_WIDTH_CAP):
    """Exact quenched series up to level ``n_max``.

    ``law`` is a matrix law, a rate law, or a ready :class:`Environment`.
    If a level exceeds ``width_cap`` a :class:`CapacityError` is raised;
    its ``partial`` attribute holds the series computed so far.
    """
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    env = _as_env(law, seed)
    frame = root_frame(env)
    series = CascadeSeries()
    log_z = -math.inf
    for n in range(n_max + 1):
        if n > 0:
            try:
                frame = step_level(frame, env, spec, width_cap)
            except CapacityError as exc:
                exc.partial = series
                raise
        lp = psi_quadform(frame)
        log_z = float(np.logaddexp(log_z, lp))
        series.log_psi.append(lp)
        series.log_Z.append(log_z)
        series.kappa.append(len(frame))
    return series


def level_frame(spec, env, n, width_cap=DEFAULT_WIDTH_CAP):
    frame = root_frame(env)
    for _ in range(n):
        frame = step_level(frame, env, spec, width_cap)
    return frame


@dataclass
class McMean:
    mean: float
    std_err: float
    reps: int
    values: np.ndarray = field(repr=False, default=None)


def mc_mean_psi(spec, law, n, reps, seed, width_cap=DEFAULT_WIDTH_CAP, threads=1):
    """Monte Carlo mean of (chi, psi_n chi) over ``reps`` independent environments.

    Environment ``r`` uses the global seed derived from (seed, r).
    """
    if not isinstance(spec, Constant):
        raise DomainError("mc_mean_psi is defined for Constant branching")
    if reps < 2:
        raise DomainError("reps must be >= 2")
    if level_size(spec, n) > width_cap:
        raise CapacityError(f"level {n} exceeds width cap {width_cap}", level=0)

    def one(r):
        env_seed = int(_seeding.derive_rng(seed, _seeding.STREAM_CASCADE, r).integers(2 ** 63))
        env = Environment(law, env_seed)
        return psi_quadform(level_frame(spec, env, n, width_cap))

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            logs = np.array(list(pool.map(one, range(reps))))
    else:
        logs = np.array([one(r) for r in range(reps)])
    values = np.exp(logs)
    return McMean(float(values.mean()), float(values.std(ddof=1) / math.sqrt(reps)), reps, values)


def expected_psi(law, b, n):
    """Closed form E (chi, psi_n chi) = (chi, (b E g)^n chi) on Constant(b)."""
    m = np.linalg.matrix_power(b * law.mean(), n)
    return float(m.sum())
