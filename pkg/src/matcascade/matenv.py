"""Laws of random matrices and rate vectors, and the quenched edge environment.

Every law draws its samples by transforming a fixed number of uniforms
(``n_uniforms``) through inverse distribution functions.  The same
transform serves plain Monte Carlo (uniforms from a numpy Generator) and
the tree environment (uniforms hashed from the edge's vertex word), so a
law has exactly one sampling code path.
"""

import threading
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.special import ndtri

from . import _seeding
from .errors import DomainError


# ---------------------------------------------------------------- entry laws


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not 0 <= self.lo <= self.hi:
            raise DomainError(f"Uniform needs 0 <= lo <= hi, got ({self.lo}, {self.hi})")

    def ppf(self, u):
        return self.lo + (self.hi - self.lo) * u

    def mean(self):
        return 0.5 * (self.lo + self.hi)

    def mean_reciprocal(self):
        if self.lo == 0:
            return np.inf
        if self.lo == self.hi:
            return 1.0 / self.lo
        return np.log(self.hi / self.lo) / (self.hi - self.lo)

    def support(self):
        return self.lo, self.hi

    def scaled(self, c):
        return Uniform(c * self.lo, c * self.hi)


@dataclass(frozen=True)
class TwoPoint:
    """Value ``a`` with probability ``p``, ``b`` otherwise."""

    a: float
    p: float
    b: float

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise DomainError(f"TwoPoint probability must lie in [0, 1], got {self.p}")
        if self.a < 0 or self.b < 0:
            raise DomainError("TwoPoint values must be nonnegative")

    def ppf(self, u):
        return np.where(u < self.p, self.a, self.b)

    def mean(self):
        return self.p * self.a + (1 - self.p) * self.b

    def moment(self, s):
        return self.p * self.a ** s + (1 - self.p) * self.b ** s

    def mean_reciprocal(self):
        terms = [(self.p, self.a), (1 - self.p, self.b)]
        if any(w > 0 and x == 0 for w, x in terms):
            return np.inf
        return sum(w / x for w, x in terms if w > 0)

    def support(self):
        pts = [x for w, x in ((self.p, self.a), (1 - self.p, self.b)) if w > 0]
        return min(pts), max(pts)

    def scaled(self, c):
        return TwoPoint(c * self.a, self.p, c * self.b)


@dataclass(frozen=True)
class LogNormal:
    """``exp(m + s * N(0, 1))``."""

    m: float
    s: float

    def __post_init__(self):
        if self.s < 0:
            raise DomainError("LogNormal scale must be >= 0")

    def ppf(self, u):
        return np.exp(self.m + self.s * ndtri(u))

    def mean(self):
        return float(np.exp(self.m + 0.5 * self.s ** 2))

    def mean_reciprocal(self):
        return float(np.exp(-self.m + 0.5 * self.s ** 2))

    def support(self):
        if self.s == 0:
            v = float(np.exp(self.m))
            return v, v
        return 0.0, np.inf

    def scaled(self, c):
        if c <= 0:
            raise DomainError("LogNormal can only be scaled by c > 0")
        return LogNormal(self.m + float(np.log(c)), self.s)


@dataclass(frozen=True)
class Fixed:
    """Deterministic entry."""

    value: float

    def __post_init__(self):
        if self.value < 0:
            raise DomainError("Fixed entries must be nonnegative")

    def ppf(self, u):
        return np.full(np.shape(u), float(self.value))

    def mean(self):
        return float(self.value)

    def mean_reciprocal(self):
        return np.inf if self.value == 0 else 1.0 / self.value

    def support(self):
        return float(self.value), float(self.value)

    def scaled(self, c):
        return Fixed(c * self.value)


ENTRY_LAWS = (Uniform, TwoPoint, LogNormal, Fixed)


# --------------------------------------------------------------- matrix laws


class MatrixLaw:
    """Base for laws on nonnegative d x d matrices."""

    d = 1
    n_uniforms = 0

    def transform(self, u):
        """Map uniforms of shape (..., n_uniforms) to matrices (..., d, d)."""
        raise NotImplementedError

    def sample(self, rng, size=None):
        shape = () if size is None else ((size,) if np.isscalar(size) else tuple(size))
        return self.transform(rng.random(shape + (self.n_uniforms,)))

    def mean(self):
        raise NotImplementedError

    def entry_bounds(self):
        """Entrywise (lower, upper) bounds of the support."""
        raise NotImplementedError

    def atoms(self):
        """Declared support atoms, or an empty list for continuous laws."""
        return []

    def scaled(self, c):
        return Scaled(self, c)


def _as_matrix(m, d=None):
    a = np.array(m, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {a.shape}")
    if d is not None and a.shape[0] != d:
        raise DomainError(f"expected a {d}x{d} matrix, got {a.shape}")
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise DomainError("matrix entries must be finite and nonnegative")
    return a


class PointMass(MatrixLaw):
    def __init__(self, matrix):
        self.matrix = _as_matrix(matrix)
        self.matrix.setflags(write=False)
        self.d = self.matrix.shape[0]

    def transform(self, u):
        u = np.asarray(u)
        return np.broadcast_to(self.matrix, u.shape[:-1] + (self.d, self.d)).copy()

    def mean(self):
        return self.matrix.copy()

    def entry_bounds(self):
        return self.matrix.copy(), self.matrix.copy()

    def atoms(self):
        return [self.matrix.copy()]

    def __repr__(self):
        return f"PointMass({self.matrix.tolist()})"


class FiniteSupport(MatrixLaw):
    def __init__(self, atoms, probs):
        mats = [_as_matrix(a) for a in atoms]
        if not mats:
            raise DomainError("FiniteSupport needs at least one atom")
        d = mats[0].shape[0]
        for a in mats:
            if a.shape != (d, d):
                raise DomainError("all atoms must share one dimension")
        probs = np.asarray(probs, dtype=float)
        if probs.shape != (len(mats),):
            raise DomainError("one probability per atom is required")
        if np.any(probs <= 0) or abs(probs.sum() - 1) > 1e-12:
            raise DomainError(f"probabilities must be positive and sum to 1, got {probs.tolist()}")
        self.d = d
        self.n_uniforms = 1
        self._atoms = np.stack(mats)
        self.probs = probs
        self._cdf = np.cumsum(probs)
        self._cdf[-1] = 1.0

    def transform(self, u):
        u = np.asarray(u)[..., 0]
        idx = np.minimum(np.searchsorted(self._cdf, u, side="right"), len(self.probs) - 1)
        return self._atoms[idx]

    def mean(self):
        return np.einsum("i,ijk->jk", self.probs, self._atoms)

    def entry_bounds(self):
        return self._atoms.min(axis=0), self._atoms.max(axis=0)

    def atoms(self):
        return [a.copy() for a in self._atoms]

    def __repr__(self):
        return f"FiniteSupport({len(self.probs)} atoms, d={self.d})"


class IIDEntries(MatrixLaw):
    """Independent entries, all drawn from one entry law."""

    def __init__(self, d, entry):
        if int(d) != d or d < 1:
            raise DomainError(f"dimension must be a positive integer, got {d!r}")
        if not isinstance(entry, ENTRY_LAWS):
            raise DomainError(f"unsupported entry law {entry!r}")
        self.d = int(d)
        self.entry = entry
        self.n_uniforms = self.d * self.d

    def transform(self, u):
        u = np.asarray(u)
        return self.entry.ppf(u).reshape(u.shape[:-1] + (self.d, self.d))

    def mean(self):
        return np.full((self.d, self.d), self.entry.mean())

    def entry_bounds(self):
        lo, hi = self.entry.support()
        return np.full((self.d, self.d), lo), np.full((self.d, self.d), hi)

    def __repr__(self):
        return f"IIDEntries(d={self.d}, {self.entry!r})"


class Scaled(MatrixLaw):
    """The law of ``c * g`` for ``g`` drawn from ``base``; same uniforms."""

    def __init__(self, base, c):
        if c <= 0:
            raise DomainError("scale factor must be positive")
        self.base = base
        self.c = float(c)
        self.d = base.d
        self.n_uniforms = base.n_uniforms

    def transform(self, u):
        return self.c * self.base.transform(u)

    def mean(self):
        return self.c * self.base.mean()

    def entry_bounds(self):
        lo, hi = self.base.entry_bounds()
        return self.c * lo, self.c * hi

    def atoms(self):
        return [self.c * a for a in self.base.atoms()]


# ----------------------------------------------------------------- rate laws


@dataclass(frozen=True)
class Rates:
    """Rates attached to one edge: ``nu[y, z]`` downward, ``mu[y]`` upward."""

    nu: np.ndarray
    mu: np.ndarray

    @property
    def d(self):
        return self.mu.shape[0]


def _entry_grid(spec, shape, name):
    if isinstance(spec, ENTRY_LAWS):
        return np.full(shape, spec, dtype=object)
    grid = np.empty(shape, dtype=object)
    try:
        grid[...] = [list(r) for r in spec] if len(shape) == 2 else list(spec)
    except (TypeError, ValueError) as exc:
        raise DomainError(f"{name} laws must be one entry law or an array of shape {shape}") from exc
    for law in grid.flat:
        if not isinstance(law, ENTRY_LAWS):
            raise DomainError(f"{name}: unsupported entry law {law!r}")
    return grid


class RateLaw:
    """Law of the rate vector (nu_yz, mu_y) carried by each edge.

    ``nu`` and ``mu`` take either a single entry law (used for every
    component) or a nested list of entry laws of shape (d, d) and (d,).
    """

    def __init__(self, d, nu, mu):
        if int(d) != d or d < 1:
            raise DomainError(f"dimension must be a positive integer, got {d!r}")
        self.d = d = int(d)
        self.nu = _entry_grid(nu, (d, d), "nu")
        self.mu = _entry_grid(mu, (d,), "mu")
        for law in list(self.nu.flat) + list(self.mu.flat):
            if law.support()[0] <= 0 and not isinstance(law, LogNormal):
                raise DomainError(f"rates must be strictly positive; {law!r} reaches 0")
        self.n_uniforms = d * d + d

    def transform(self, u):
        u = np.asarray(u)
        d = self.d
        nu = np.empty(u.shape[:-1] + (d, d))
        mu = np.empty(u.shape[:-1] + (d,))
        for idx, law in np.ndenumerate(self.nu):
            nu[..., idx[0], idx[1]] = law.ppf(u[..., idx[0] * d + idx[1]])
        for (y,), law in np.ndenumerate(self.mu):
            mu[..., y] = law.ppf(u[..., d * d + y])
        return nu, mu

    def sample(self, rng):
        nu, mu = self.transform(rng.random(self.n_uniforms))
        return Rates(nu, mu)

    def matrix_law(self):
        return RatioLaw(self)


def rates_to_matrix(rates):
    """Edge matrix ``xi[x, y] = nu[x, y] / mu[y]``."""
    nu = np.asarray(rates.nu, dtype=float)
    mu = np.asarray(rates.mu, dtype=float)
    if np.any(mu <= 0) or not np.all(np.isfinite(mu)):
        raise DomainError(f"upward rates must be positive, got {mu.tolist()}")
    return nu / mu[..., None, :]


def cascade_matrix(rates):
    """Matrix the cascade multiplies for an edge carrying ``rates``.

    It is the transpose of :func:`rates_to_matrix`.  With ``xi`` in the
    (old symbol, new symbol) orientation, the walk's depth-n mass is
    ``(chi, xi_{a_1} ... xi_{a_n} chi)`` (root edge leftmost), while the
    cascade builds products with the newest edge on the left.  Transposing
    makes the two agree path by path; growth rates of norms, and hence
    k(s) and lambda, are unchanged by transposition.
    """
    return np.swapaxes(rates_to_matrix(rates), -1, -2)


def _entry_stat(grid, fn):
    return np.vectorize(fn, otypes=[float])(grid)


class RatioLaw(MatrixLaw):
    """Law of ``cascade_matrix(r)`` for ``r`` drawn from a :class:`RateLaw`.

    Entry ``[z, y]`` is ``nu[y, z] / mu[z]``.
    """

    def __init__(self, rate_law):
        self.rate_law = rate_law
        self.d = rate_law.d
        self.n_uniforms = rate_law.n_uniforms

    def transform(self, u):
        nu, mu = self.rate_law.transform(u)
        return cascade_matrix(Rates(nu, mu))

    def mean(self):
        nu_mean = _entry_stat(self.rate_law.nu, lambda law: law.mean())
        inv_mu = _entry_stat(self.rate_law.mu, lambda law: law.mean_reciprocal())
        return (nu_mean * inv_mu[None, :]).T

    def entry_bounds(self):
        nu_lo = _entry_stat(self.rate_law.nu, lambda law: law.support()[0])
        nu_hi = _entry_stat(self.rate_law.nu, lambda law: law.support()[1])
        mu_lo = _entry_stat(self.rate_law.mu, lambda law: law.support()[0])
        mu_hi = _entry_stat(self.rate_law.mu, lambda law: law.support()[1])
        with np.errstate(divide="ignore"):
            return (nu_lo / mu_hi[None, :]).T, (nu_hi / mu_lo[None, :]).T

    def atoms(self):
        lo, hi = self.entry_bounds()
        return [lo] if np.array_equal(lo, hi) else []


# --------------------------------------------------------------- environment


class _Node:
    __slots__ = ("key", "depth", "parent", "index", "children", "value")

    def __init__(self, key, depth, parent, index):
        self.key = key
        self.depth = depth
        self.parent = parent
        self.index = index
        self.children = {}
        self.value = None

    def word(self):
        out = []
        node = self
        while node.parent is not None:
            out.append(node.index)
            node = node.parent
        return tuple(reversed(out))


class Environment:
    """Lazy quenched assignment of an i.i.d. sample to every tree edge.

    Edge ``a(v)`` joins ``v`` to its parent.  Its sample is a pure function
    of ``(global_seed, v)``; realized edges are cached in a trie.  Reads
    and writes are guarded by a lock, so concurrent callers see one value
    per edge.
    """

    def __init__(self, law, global_seed):
        self.law = law
        self.global_seed = _seeding.check_seed(global_seed)
        self._root = _Node(_seeding.root_key(self.global_seed), 0, None, 0)
        self._lock = threading.Lock()

    @property
    def d(self):
        return self.law.d

    @property
    def root(self):
        return self._root

    def child(self, node, index):
        """Trie node for child ``index`` of ``node``, created on first use."""
        try:
            return node.children[index]
        except KeyError:
            pass
        with self._lock:
            got = node.children.get(index)
            if got is None:
                got = _Node(_seeding.child_key(node.key, index), node.depth + 1, node, index)
                node.children[index] = got
        return got

    def node(self, word):
        node = self._root
        for letter in word:
            node = self.child(node, int(letter))
        return node

    def _realize(self, node):
        value = node.value
        if value is None:
            u = _seeding.key_uniforms(node.key, self.law.n_uniforms)
            value = self._from_uniforms(u)
            with self._lock:
                if node.value is None:
                    node.value = value
                value = node.value
        return value

    def _from_uniforms(self, u):
        if isinstance(self.law, RateLaw):
            nu, mu = self.law.transform(u)
            return Rates(nu, mu)
        return self.law.transform(u)

    def node_sample(self, node):
        if node.parent is None:
            raise DomainError("the root carries no edge")
        return self._realize(node)

    def edge_sample(self, v):
        """Sample on edge ``a(v)``: a matrix, or :class:`Rates` for rate laws."""
        v = tuple(v)
        if not v:
            raise DomainError("the root carries no edge")
        return self._realize(self.node(v))

    def edge_matrix(self, v):
        """Cascade matrix of edge ``a(v)`` (see :func:`cascade_matrix` for rates)."""
        sample = self.edge_sample(v)
        return cascade_matrix(sample) if isinstance(sample, Rates) else sample

    def matrices_for_keys(self, keys):
        """Cascade matrices for a batch of trie keys, without caching."""
        u = _seeding.keys_uniforms(keys, self.law.n_uniforms)
        return self.matrix_law().transform(u)

    def matrix_law(self):
        return self.law.matrix_law() if isinstance(self.law, RateLaw) else self.law


def sample_matrix(law, rng):
    return law.sample(rng)


# ----------------------------------------------------------------- conditions


@dataclass
class Verdict:
    status: str
    detail: str


@dataclass
class ConditionsReport:
    integrability: Verdict
    positivity: Verdict
    irreducibility: Verdict
    note: str = ("Condition 3' is referenced by the transience theorem but never "
                 "defined; only Conditions 1-3 are checked.")

    @property
    def all_pass(self):
        return all(v.status == "PASS" for v in (self.integrability, self.positivity, self.irreducibility))


def _uses_lognormal(law):
    if isinstance(law, Scaled):
        return _uses_lognormal(law.base)
    if isinstance(law, IIDEntries):
        return isinstance(law.entry, LogNormal)
    if isinstance(law, RatioLaw):
        return any(isinstance(x, LogNormal) for x in list(law.rate_law.nu.flat) + list(law.rate_law.mu.flat))
    return False


def check_conditions(law, n_samples=1000, seed=0):
    """Check integrability, strict positivity and (heuristically) irreducibility."""
    if n_samples < 1:
        raise DomainError("n_samples must be >= 1")
    if _uses_lognormal(law):
        integ = Verdict("PASS", "log-normal entries have finite moments of every order "
                                "(unbounded support, but E||g||^s < inf for all s >= 0)")
    else:
        lo, hi = law.entry_bounds()
        if np.all(np.isfinite(hi)):
            integ = Verdict("PASS", f"bounded support, entries <= {float(np.max(hi)):.6g}")
        else:
            integ = Verdict("FAIL", "unbounded support without a moment guarantee")

    rng = _seeding.derive_rng(seed, _seeding.STREAM_CHECK)
    samples = law.sample(rng, n_samples)
    bad_samples = int(np.sum(np.any(samples <= 0, axis=(-2, -1))))
    bad_atoms = [a for a in law.atoms() if np.any(a <= 0)]
    if bad_samples == 0 and not bad_atoms:
        pos = Verdict("PASS", f"all {n_samples} samples and {len(law.atoms())} atoms are entrywise > 0")
    else:
        pos = Verdict("FAIL", f"{bad_samples} of {n_samples} samples and {len(bad_atoms)} atoms "
                              f"have a zero entry")

    mean = samples.mean(axis=0)
    n_comp, _ = connected_components(mean > 0, directed=True, connection="strong")
    if n_comp == 1:
        irr = Verdict("PASS", "HEURISTIC: positivity pattern of the sample mean is strongly connected")
    else:
        irr = Verdict("FAIL", f"HEURISTIC: positivity pattern of the sample mean splits into "
                              f"{n_comp} strongly connected components (invariant subspaces)")
    return ConditionsReport(integ, pos, irr)
