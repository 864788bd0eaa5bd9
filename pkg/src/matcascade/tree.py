"""Rooted trees given by branching functions.

A vertex is a tuple of positive child indices read from the root; the root
is the empty tuple.  Trees are never materialized: every query is answered
from the branching spec and the vertex word alone.
"""

import math
from dataclasses import dataclass, field

from .errors import CapabilityError, CountOverflowError, DomainError

#: largest level size reported exactly (signed 64-bit range)
MAX_COUNT = 2 ** 63 - 1


@dataclass(frozen=True)
class Constant:
    """Every vertex has ``b`` children."""

    b: int

    def __post_init__(self):
        if int(self.b) != self.b or self.b < 1:
            raise DomainError(f"Constant branching needs an integer b >= 1, got {self.b!r}")

    def count(self, word):
        return self.b

    def count_at_depth(self, depth):
        return self.b

    @property
    def spherically_symmetric(self):
        return True


@dataclass(frozen=True)
class Periodic:
    """Child count depends on depth only, cycling through ``levels``."""

    levels: tuple

    def __post_init__(self):
        levels = tuple(self.levels)
        if not levels or any(int(c) != c or c < 1 for c in levels):
            raise DomainError(f"Periodic branching needs a nonempty list of integers >= 1, got {self.levels!r}")
        object.__setattr__(self, "levels", levels)

    def count(self, word):
        return self.levels[len(word) % len(self.levels)]

    def count_at_depth(self, depth):
        return self.levels[depth % len(self.levels)]

    @property
    def spherically_symmetric(self):
        return True


@dataclass(frozen=True)
class Explicit:
    """Child counts listed per vertex word, ``default`` everywhere else."""

    counts: dict = field(default_factory=dict)
    default: int = 1

    def __post_init__(self):
        if int(self.default) != self.default or self.default < 1:
            raise DomainError(f"default child count must be an integer >= 1, got {self.default!r}")
        counts = {}
        for word, c in dict(self.counts).items():
            word = tuple(int(x) for x in word)
            if int(c) != c or c < 1:
                raise DomainError(f"child count at {word} must be an integer >= 1, got {c!r}")
            counts[word] = int(c)
        object.__setattr__(self, "counts", counts)
        # every prefix of a listed word: outside this set subtrees are default-regular
        prefixes = set()
        for word in counts:
            for i in range(len(word) + 1):
                prefixes.add(word[:i])
        object.__setattr__(self, "_prefixes", frozenset(prefixes))

    def __hash__(self):
        return hash((tuple(sorted(self.counts.items())), self.default))

    def count(self, word):
        return self.counts.get(tuple(word), self.default)

    def is_regular_below(self, word):
        """True when no listed word lies in the subtree rooted at ``word``."""
        return tuple(word) not in self._prefixes

    @property
    def spherically_symmetric(self):
        return not self.counts


BranchingSpec = (Constant, Periodic, Explicit)


def check_vertex(spec, v):
    v = tuple(v)
    for i, letter in enumerate(v):
        if int(letter) != letter or not 1 <= letter <= spec.count(v[:i]):
            raise DomainError(f"{v} is not a vertex: entry {i} = {letter!r} "
                              f"exceeds child count {spec.count(v[:i])} of {v[:i]}")
    return v


def children(spec, v):
    """Children of ``v`` in index order."""
    v = check_vertex(spec, v)
    return [v + (i,) for i in range(1, spec.count(v) + 1)]


def _check_count(n, value):
    if value > MAX_COUNT:
        raise CountOverflowError(f"level {n} holds more than 2**63 - 1 vertices")
    return value


def level_size(spec, n):
    """Exact number of depth-``n`` vertices."""
    if n < 0:
        raise DomainError(f"level must be >= 0, got {n}")
    if isinstance(spec, Constant):
        # bound the exponent before building a huge integer
        if n * math.log2(spec.b) > 64:
            raise CountOverflowError(f"level {n} holds more than 2**63 - 1 vertices")
        return _check_count(n, spec.b ** n)
    if isinstance(spec, Periodic):
        total = 1
        for k in range(n):
            total = _check_count(n, total * spec.count_at_depth(k))
        return total
    return _check_count(n, _explicit_level_size(spec, (), n))


def _explicit_level_size(spec, word, n):
    if n == 0:
        return 1
    if spec.is_regular_below(word):
        if n * math.log2(max(spec.default, 1)) > 64:
            raise CountOverflowError(f"level count below {word} exceeds 2**63 - 1")
        return spec.default ** n
    total = 0
    for i in range(1, spec.count(word) + 1):
        total += _explicit_level_size(spec, word + (i,), n - 1)
        _check_count(len(word) + n, total)
    return total


def _limit_growth(spec):
    """Exact growth rate for depth-only specs: geometric mean over one period."""
    if isinstance(spec, Constant):
        return float(spec.b)
    if isinstance(spec, Periodic):
        logs = [math.log(c) for c in spec.levels]
        return math.exp(sum(logs) / len(logs))
    if spec.spherically_symmetric:
        return float(spec.default)
    return None


def growth_rates(spec, n_max):
    """(lower, upper) growth rate.

    Depth-only specs get the exact limit.  Explicit specs are summarized by
    the min and max of ``kappa_n ** (1/n)`` over ``n`` in
    ``[ceil(n_max/2), n_max]``.
    """
    if n_max < 1:
        raise DomainError(f"n_max must be >= 1, got {n_max}")
    exact = _limit_growth(spec)
    if exact is not None:
        return exact, exact
    rates = [math.exp(math.log(level_size(spec, n)) / n)
             for n in range(math.ceil(n_max / 2), n_max + 1)]
    return min(rates), max(rates)


def _log_min_cut(spec, word, depth, n_max, log_lam, memo):
    # cut value at v: min(lam^-|v|, sum of children's cut values), leaves at n_max
    own = -depth * log_lam
    if depth == n_max:
        return own
    if spec.is_regular_below(word):
        key = depth
        if key not in memo:
            memo[key] = _regular_log_cut(spec.default, depth, n_max, log_lam)
        return memo[key]
    logs = [_log_min_cut(spec, word + (i,), depth + 1, n_max, log_lam, memo)
            for i in range(1, spec.count(word) + 1)]
    top = max(logs)
    below = top + math.log(sum(math.exp(x - top) for x in logs))
    return min(own, below)


def _regular_log_cut(c, depth, n_max, log_lam):
    value = -n_max * log_lam
    log_c = math.log(c)
    for k in range(n_max - 1, depth - 1, -1):
        value = min(-k * log_lam, log_c + value)
    return value


def _depth_log_cut(spec, n_max, log_lam):
    value = -n_max * log_lam
    for k in range(n_max - 1, -1, -1):
        value = min(-k * log_lam, math.log(spec.count_at_depth(k)) + value)
    return value


def min_cutset_value(spec, n_max, lam):
    """Minimum over cutsets of the depth-``n_max`` truncation of sum lam^-|v|."""
    if lam <= 0:
        raise DomainError("lam must be positive")
    if n_max < 0:
        raise DomainError("n_max must be >= 0")
    if not isinstance(spec, Explicit):
        return math.exp(_depth_log_cut(spec, n_max, math.log(lam)))
    return math.exp(_log_min_cut(spec, (), 0, n_max, math.log(lam), {}))


def branching_number(spec, n_max=30, tol=1e-6, max_vertices=10 ** 6):
    """Branching number of the tree.

    Depth-only specs return the lower growth rate, which equals the
    branching number for such trees.  Explicit specs get a bisection
    estimate on the depth-``n_max`` truncation: the largest ``lam`` whose
    min-cutset value stays at or above 1.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    exact = _limit_growth(spec)
    if exact is not None:
        return exact
    special = sum(1 for w in spec._prefixes if len(w) <= n_max)
    if special * max(spec.counts.values()) > max_vertices:
        raise CapabilityError(f"explicit truncation to depth {n_max} needs more than "
                              f"{max_vertices} enumerated vertices")
    hi = float(max(max(spec.counts.values()), spec.default))
    lo = 1.0
    eps = 1e-9
    if _log_min_cut(spec, (), 0, n_max, math.log(hi), {}) >= -eps:
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _log_min_cut(spec, (), 0, n_max, math.log(mid), {}) >= -eps:
            lo = mid
        else:
            hi = mid
    return lo
