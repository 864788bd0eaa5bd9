"""The bindweed walk: a word of internal symbols growing and shrinking on a tree.

A state is either EMPTY (nothing on the tree) or a vertex ``v`` of depth
``n`` together with symbols ``sigma_0 ... sigma_n`` in ``{1, ..., d}`` laid
along the root path of ``v``.  With ``y`` the last symbol the walk

* grows into child ``w`` of ``v`` with new symbol ``z`` at rate
  ``nu[y, z]`` of edge ``a(w)``,
* shrinks back to the parent at rate ``mu[y]`` of edge ``a(v)`` (n >= 1),
* exchanges EMPTY <-> (root, sigma_0) at rate 1 in both directions.

Rates come from a quenched :class:`~matcascade.matenv.Environment` over a
:class:`~matcascade.matenv.RateLaw`.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from . import _seeding
from .errors import CapabilityError, DomainError
from .matenv import RateLaw, rates_to_matrix
from .tree import branching_number, check_vertex, growth_rates, level_size


@dataclass(frozen=True)
class State:
    vertex: tuple = ()
    symbols: tuple = ()

    @property
    def is_empty(self):
        return not self.symbols

    @property
    def depth(self):
        """Vertex depth; -1 for EMPTY."""
        return -1 if self.is_empty else len(self.vertex)

    def __str__(self):
        if self.is_empty:
            return "EMPTY"
        v = ".".join(map(str, self.vertex)) or "root"
        return f"{v}:{''.join(map(str, self.symbols)) if max(self.symbols) < 10 else self.symbols}"


EMPTY = State()


def at(vertex, symbols):
    vertex, symbols = tuple(vertex), tuple(symbols)
    if len(symbols) != len(vertex) + 1:
        raise DomainError(f"a state at depth {len(vertex)} carries {len(vertex) + 1} symbols, "
                          f"got {len(symbols)}")
    return State(vertex, symbols)


@dataclass(frozen=True)
class Transition:
    target: State
    rate: float


def _check_env(env):
    if not isinstance(env.law, RateLaw):
        raise DomainError("the bindweed walk needs an environment over a RateLaw")


def enabled_transitions(state, env, spec, max_depth=None):
    """All transitions out of ``state`` with their rates.

    ``max_depth`` truncates the walk: growth out of that depth is removed.
    """
    _check_env(env)
    d = env.d
    if state.is_empty:
        return [Transition(State((), (x,)), 1.0) for x in range(1, d + 1)]
    v = check_vertex(spec, state.vertex)
    y = state.symbols[-1]
    if not 1 <= y <= d or any(not 1 <= x <= d for x in state.symbols):
        raise DomainError(f"symbols must lie in 1..{d}")
    out = []
    if not v:
        out.append(Transition(EMPTY, 1.0))
    else:
        out.append(Transition(State(v[:-1], state.symbols[:-1]),
                              float(env.edge_sample(v).mu[y - 1])))
    if max_depth is None or len(v) < max_depth:
        for i in range(1, spec.count(v) + 1):
            w = v + (i,)
            nu = env.edge_sample(w).nu
            for z in range(1, d + 1):
                out.append(Transition(State(w, state.symbols + (z,)), float(nu[y - 1, z - 1])))
    return out


@dataclass
class Trajectory:
    """Statistics of one simulated path.

    ``return_times`` are the absolute times at which EMPTY was re-entered.
    ``depth_at`` maps each requested checkpoint time to the depth occupied
    then (None if the run stopped earlier).  Depth -1 means EMPTY.
    """

    total_time: float
    jumps: int
    return_times: list
    max_depth: int
    final_state: State
    toward_root: int = 0  # jumps from depth >= 1 toward the root
    away_from_root: int = 0  # jumps from depth >= 1 away from it
    started_empty: bool = True
    depth_at: dict = field(default_factory=dict)
    occupation: dict = None

    @property
    def returns(self):
        return len(self.return_times)

    @property
    def final_depth(self):
        return self.final_state.depth

    @property
    def return_intervals(self):
        times = ([0.0] if self.started_empty else []) + list(self.return_times)
        return np.diff(times)

    @property
    def censored(self):
        """1 if the path ended away from EMPTY (an unfinished excursion)."""
        return 0 if self.final_state.is_empty else 1


class _Clock:
    """Buffered exponential and uniform draws from one generator."""

    def __init__(self, rng, size=4096):
        self.rng = rng
        self.size = size
        self._e = self._u = None
        self._i = size

    def next(self):
        if self._i == self.size:
            self._e = self.rng.standard_exponential(self.size).tolist()
            self._u = self.rng.random(self.size).tolist()
            self._i = 0
        i = self._i
        self._i += 1
        return self._e[i], self._u[i]


def simulate(env, spec, seed, t_max=None, jump_max=None, start=EMPTY, stop_at_empty=False,
             max_depth=None, checkpoints=(), record_occupation=False, stream=()):
    """Simulate the walk in the quenched environment ``env``.

    Holding times are exponential with the total enabled rate; the next
    state is picked proportionally to the rates.  Runs until ``t_max``,
    ``jump_max`` jumps, or (with ``stop_at_empty``) the first entry into
    EMPTY after leaving it.  The path depends only on the environment and
    (seed, *stream).
    """
    _check_env(env)
    if t_max is None and jump_max is None and not stop_at_empty:
        raise DomainError("give t_max, jump_max or stop_at_empty")
    if (t_max is not None and t_max <= 0) or (jump_max is not None and jump_max <= 0):
        raise DomainError("stop criteria must be positive")
    d = env.d
    clock = _Clock(_seeding.derive_rng(seed, _seeding.STREAM_WALK, *stream))
    symmetric = spec.spherically_symmetric
    count_memo = {}

    def n_children(node):
        if symmetric:
            return spec.count_at_depth(node.depth) if hasattr(spec, "count_at_depth") else spec.default
        c = count_memo.get(node)
        if c is None:
            c = count_memo[node] = spec.count(node.word())
        return c

    # walker: node of the current vertex, symbols and empty flag
    if start.is_empty:
        node, symbols, empty = env.root, [], True
    else:
        check_vertex(spec, start.vertex)
        node, symbols, empty = env.node(start.vertex), list(start.symbols), False
    t = 0.0
    jumps = 0
    returns = []
    max_d = -1 if empty else node.depth
    up_moves = down_moves = 0
    pending = sorted(float(c) for c in checkpoints)
    depth_at = {}
    occupation = {} if record_occupation else None
    t_stop = math.inf if t_max is None else float(t_max)
    j_stop = math.inf if jump_max is None else int(jump_max)

    while jumps < j_stop:
        if empty:
            total = float(d)
            up = 0.0
            down = None
        else:
            y = symbols[-1] - 1
            up = 1.0 if node.depth == 0 else float(env.node_sample(node).mu[y])
            down = []
            if max_depth is None or node.depth < max_depth:
                for i in range(1, n_children(node) + 1):
                    child = env.child(node, i)
                    row = env.node_sample(child).nu[y]
                    for z in range(d):
                        down.append((child, z, float(row[z])))
            total = up + sum(r for _, _, r in down)
        e, u = clock.next()
        hold = e / total
        while pending and pending[0] < t + hold and pending[0] <= t_stop:
            depth_at[pending.pop(0)] = -1 if empty else node.depth
        if t + hold > t_stop:
            if occupation is not None:
                _occupy(occupation, node, symbols, empty, t_stop - t)
            t = t_stop
            break
        if occupation is not None:
            _occupy(occupation, node, symbols, empty, hold)
        t += hold
        jumps += 1
        target = u * total
        if empty:
            symbols = [min(int(target) + 1, d)]
            node = env.root
            empty = False
            max_d = max(max_d, 0)
        elif target < up:
            if node.depth == 0:
                symbols = []
                empty = True
                returns.append(t)
            else:
                node = node.parent
                symbols.pop()
                up_moves += 1
        else:
            target -= up
            pick = down[-1]
            for entry in down:
                if target < entry[2]:
                    pick = entry
                    break
                target -= entry[2]
            if node.depth >= 1:
                down_moves += 1
            node = pick[0]
            symbols.append(pick[1] + 1)
            max_d = max(max_d, node.depth)
        if stop_at_empty and empty:
            break
    for c in pending:
        depth_at[c] = None if (stop_at_empty and empty) or t < c else (-1 if empty else node.depth)
    final = EMPTY if empty else State(node.word(), tuple(symbols))
    return Trajectory(t, jumps, returns, max_d, final, up_moves, down_moves,
                      start.is_empty, depth_at, occupation)


def _occupy(occupation, node, symbols, empty, dt):
    key = EMPTY if empty else State(node.word(), tuple(symbols))
    occupation[key] = occupation.get(key, 0.0) + dt


# ------------------------------------------------------- truncated chain


@dataclass
class TruncatedStationary:
    """Stationary measure of the walk truncated at depth ``depth``.

    ``pi`` comes from the reversibility recursion, ``pi_solve`` from a
    sparse solve of the global balance equations; both are normalized.
    ``level_mass[n]`` is the unnormalized depth-``n`` mass with
    pi(EMPTY) = 1.
    """

    depth: int
    d: int
    states: list
    pi: np.ndarray
    pi_solve: np.ndarray
    level_mass: np.ndarray
    edges: tuple = field(repr=False)

    @property
    def tv_discrepancy(self):
        return 0.5 * float(np.abs(self.pi - self.pi_solve).sum())

    @property
    def max_discrepancy(self):
        return float(np.max(np.abs(self.pi - self.pi_solve)))

    def detailed_balance_error(self, pi=None):
        """Largest relative gap |pi(x) q(x,y) - pi(y) q(y,x)| over all edges."""
        pi = self.pi if pi is None else pi
        src, dst, fwd, back = self.edges
        flow_out = pi[src] * fwd
        flow_in = pi[dst] * back
        scale = np.maximum(np.abs(flow_out), np.abs(flow_in))
        rel = np.abs(flow_out - flow_in) / np.where(scale > 0, scale, 1.0)
        return float(rel.max())

    def mean_return_time(self):
        """Expected return time to EMPTY: 1 / (pi(EMPTY) * total rate out of EMPTY)."""
        return 1.0 / (self.pi[0] * self.d)

    def as_dict(self):
        return dict(zip(self.states, self.pi))


def truncated_state_count(spec, d, depth):
    return 1 + sum(level_size(spec, n) * d ** (n + 1) for n in range(depth + 1))


def exact_stationary_truncated(env, spec, depth, max_states=10 ** 6):
    """Exact stationary law of the walk with growth out of ``depth`` removed."""
    _check_env(env)
    if depth < 0:
        raise DomainError("depth must be >= 0")
    d = env.d
    count = truncated_state_count(spec, d, depth)
    if count > max_states:
        raise CapabilityError(f"the depth-{depth} truncation has {count} states, above {max_states}")

    states = [EMPTY]
    weight = [1.0]
    src, dst, fwd, back = [], [], [], []
    # level 0
    frontier = []
    for x in range(1, d + 1):
        states.append(State((), (x,)))
        weight.append(1.0)
        src.append(0)
        dst.append(len(states) - 1)
        fwd.append(1.0)
        back.append(1.0)
        frontier.append((env.root, (), len(states) - 1))
    level_mass = [float(d)]
    for n in range(1, depth + 1):
        nxt = []
        mass = 0.0
        for node, vertex, idx in frontier:
            sym = states[idx].symbols
            x = sym[-1] - 1
            for i in range(1, spec.count(vertex) + 1):
                child = env.child(node, i)
                rates = env.node_sample(child)
                xi = rates_to_matrix(rates)
                w = vertex + (i,)
                for z in range(d):
                    states.append(State(w, sym + (z + 1,)))
                    j = len(states) - 1
                    pi_j = xi[x, z] * weight[idx]
                    weight.append(pi_j)
                    mass += pi_j
                    src.append(idx)
                    dst.append(j)
                    fwd.append(float(rates.nu[x, z]))
                    back.append(float(rates.mu[z]))
                    nxt.append((child, w, j))
        level_mass.append(mass)
        frontier = nxt

    weight = np.array(weight)
    pi = weight / weight.sum()
    src, dst = np.array(src), np.array(dst)
    fwd, back = np.array(fwd), np.array(back)
    pi_solve = _balance_solve(len(states), src, dst, fwd, back)
    return TruncatedStationary(depth, d, states, pi, pi_solve, np.array(level_mass),
                               (src, dst, fwd, back))


def _balance_solve(n, src, dst, fwd, back):
    rows = np.concatenate([src, dst])
    cols = np.concatenate([dst, src])
    vals = np.concatenate([fwd, back])
    q = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    out = np.asarray(q.sum(axis=1)).ravel()
    q = q - sp.diags(out)
    a = q.T.tolil()
    a[0, :] = np.ones(n)
    rhs = np.zeros(n)
    rhs[0] = 1.0
    pi = spsolve(a.tocsr(), rhs)
    return pi / pi.sum()


# ------------------------------------------------------------ experiments


def run_replicas(env, spec, seed, reps, t_max=None, jump_max=None, threads=1, **kwargs):
    """Independent walks in one environment; replica ``r`` uses stream (r,)."""

    def one(r):
        return simulate(env, spec, seed, t_max=t_max, jump_max=jump_max, stream=(r,), **kwargs)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(one, range(reps)))
    return [one(r) for r in range(reps)]


@dataclass
class HorizonRow:
    horizon: float
    excursions: int
    returned: int
    censored_fraction: float
    mean_return_time: float  # over excursions that returned within the horizon
    mean_truncated_time: float  # mean of min(T, horizon)
    mean_depth_alive: float  # mean depth at the horizon of unfinished excursions


@dataclass
class RecurrenceReport:
    lambda_hat: float
    lambda_std_err: float
    growth_upper: float
    branching: float
    predicted: str
    rows: list
    exact_mean_return: dict

    @property
    def lambda_gr(self):
        return self.lambda_hat * self.growth_upper

    @property
    def lambda_br(self):
        return self.lambda_hat * self.branching


def excursions(env, spec, seed, reps, horizon, checkpoints=(), threads=1):
    """``reps`` excursions from EMPTY, each censored at ``horizon``."""
    return run_replicas(env, spec, seed, reps, t_max=horizon, stop_at_empty=True,
                        checkpoints=checkpoints, threads=threads)


def summarize_excursions(trajs, horizons):
    """Per-horizon statistics of excursions simulated to max(horizons).

    Every horizon is evaluated on the same excursions, so the statistics
    across horizons are directly comparable.
    """
    rows = []
    times = np.array([tr.return_times[0] if tr.return_times else math.inf for tr in trajs])
    for h in horizons:
        done = times <= h
        alive_depths = [tr.depth_at.get(float(h)) for tr, ok in zip(trajs, done) if not ok]
        alive_depths = [x for x in alive_depths if x is not None]
        rows.append(HorizonRow(
            horizon=float(h),
            excursions=len(trajs),
            returned=int(done.sum()),
            censored_fraction=float(1 - done.mean()),
            mean_return_time=float(times[done].mean()) if done.any() else math.nan,
            mean_truncated_time=float(np.minimum(times, h).mean()),
            mean_depth_alive=float(np.mean(alive_depths)) if alive_depths else math.nan,
        ))
    return rows


def recurrence_experiment(env, spec, horizons, reps, seed, depths=(), lambda_hat=None,
                          lambda_std_err=0.0, n_max=20, threads=1, **lyap_kwargs):
    """Empirical positive-recurrence probe next to the predicted phase.

    Runs ``reps`` excursions from EMPTY in the quenched environment up to
    ``max(horizons)`` and summarizes them per horizon.  For each truncation
    depth in ``depths`` the exact mean return time of the truncated chain is
    reported.  The predicted phase uses ``lambda_hat`` (estimated from the
    induced matrix law when not given) against the tree's growth rate and
    branching number.
    """
    from . import lyap

    _check_env(env)
    horizons = sorted(float(h) for h in horizons)
    if lambda_hat is None:
        law = env.matrix_law()
        try:
            lambda_hat = lyap.lambda_shortcut(law)
            lambda_std_err = 0.0
        except CapabilityError:
            est = lyap.estimate_lambda(law, seed=seed, threads=threads, **lyap_kwargs)
            lambda_hat, lambda_std_err = est.lambda_hat, est.std_err
    _, gr_up = growth_rates(spec, n_max)
    br = branching_number(spec, n_max)
    predicted = classify_phase(lambda_hat, lambda_std_err, gr_up, br)
    trajs = excursions(env, spec, seed, reps, horizons[-1], checkpoints=horizons, threads=threads)
    rows = summarize_excursions(trajs, horizons)
    exact = {D: exact_stationary_truncated(env, spec, D).mean_return_time() for D in depths}
    return RecurrenceReport(lambda_hat, lambda_std_err, gr_up, br, predicted, rows, exact)


def classify_phase(lambda_hat, std_err, growth_upper, branching, z=2.0):
    """RECURRENT, TRANSIENT, GAP or NEAR-CRITICAL from lambda and tree rates."""
    margin = z * std_err
    if (lambda_hat + margin) * growth_upper < 1:
        return "RECURRENT"
    if (lambda_hat - margin) * branching > 1:
        return "TRANSIENT"
    if branching < growth_upper and lambda_hat * branching < 1 < lambda_hat * growth_upper:
        return "GAP"
    return "NEAR-CRITICAL"
