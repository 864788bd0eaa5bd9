import math

import numpy as np
import pytest

from matcascade.bindweed import (EMPTY, State, at, classify_phase, enabled_transitions,
                                 exact_stationary_truncated, excursions, recurrence_experiment,
                                 run_replicas, simulate, summarize_excursions,
                                 truncated_state_count)
from matcascade.cascade import run_cascade
from matcascade.errors import CapabilityError, DomainError
from matcascade.lyap import lambda_shortcut
from matcascade.matenv import Environment, Fixed, IIDEntries, LogNormal, RateLaw, Uniform
from matcascade.tree import Constant, Explicit, Periodic
from oracles import birth_death_return_time, null_vector_stationary, truncated_generator

RAY = Explicit({}, default=1)


def rate_env(d=2, seed=1, nu=Uniform(0.2, 1.0), mu=Uniform(0.5, 2.0)):
    return Environment(RateLaw(d, nu, mu), seed)


def test_state_invariants():
    assert EMPTY.is_empty and EMPTY.depth == -1 and str(EMPTY) == "EMPTY"
    s = at((1, 2), (1, 2, 1))
    assert s.depth == 2 and str(s) == "1.2:121"
    with pytest.raises(DomainError):
        at((1,), (1,))


def test_transitions_from_empty():
    out = enabled_transitions(EMPTY, rate_env(d=3), Constant(2))
    assert len(out) == 3 and all(t.rate == 1.0 for t in out)
    assert {t.target for t in out} == {State((), (x,)) for x in (1, 2, 3)}


def test_transitions_from_root():
    env = rate_env(d=2)
    out = enabled_transitions(at((), (2,)), env, Constant(2))
    assert len(out) == 5
    assert out[0].target == EMPTY and out[0].rate == 1.0
    for t in out[1:]:
        w, z = t.target.vertex, t.target.symbols[-1]
        assert t.rate == env.edge_sample(w).nu[1, z - 1]


def test_transitions_depth_one_ray():
    env = rate_env(d=1, seed=4)
    out = enabled_transitions(at((1,), (1, 1)), env, RAY)
    up, down = out
    assert up.target == at((), (1,)) and up.rate == env.edge_sample((1,)).mu[0]
    assert down.target == at((1, 1), (1, 1, 1)) and down.rate == env.edge_sample((1, 1)).nu[0, 0]
    assert all(t.rate > 0 for t in out)


def test_transitions_truncated():
    out = enabled_transitions(at((1,), (1, 1)), rate_env(d=1), Constant(2), max_depth=1)
    assert len(out) == 1


def test_symmetric_ray_embedded_chain():
    env = Environment(RateLaw(1, Fixed(1.0), Fixed(1.0)), 0)
    tr = simulate(env, RAY, seed=3, jump_max=100_000)
    moves = tr.toward_root + tr.away_from_root
    assert abs(tr.toward_root / moves - 0.5) < 0.01


def test_recurrent_regime_occupation():
    env = Environment(RateLaw(1, Fixed(0.1), Fixed(1.0)), 2)
    tr = simulate(env, Constant(2), seed=1, t_max=20_000, record_occupation=True)
    shallow = sum(t for s, t in tr.occupation.items() if s.depth <= 2)
    assert shallow / tr.total_time > 0.9


def test_simulation_deterministic():
    env = rate_env()
    a = simulate(env, Constant(2), seed=9, jump_max=2000)
    b = simulate(rate_env(), Constant(2), seed=9, jump_max=2000)
    assert a.return_times == b.return_times and a.final_state == b.final_state
    assert a.total_time == b.total_time
    c = simulate(env, Constant(2), seed=10, jump_max=2000)
    assert c.total_time != a.total_time


def test_trajectory_invariants():
    tr = simulate(rate_env(), Periodic([1, 2]), seed=4, t_max=500.0)
    assert tr.returns <= tr.jumps
    assert np.all(np.diff(tr.return_times) > 0)
    assert tr.total_time == 500.0
    assert tr.max_depth >= tr.final_depth


def test_simulate_errors():
    with pytest.raises(DomainError):
        simulate(rate_env(), Constant(2), seed=0)
    with pytest.raises(DomainError):
        simulate(rate_env(), Constant(2), seed=0, t_max=-1.0)
    with pytest.raises(DomainError):
        simulate(Environment(IIDEntries(2, Uniform(0, 1)), 0), Constant(2), seed=0, t_max=1.0)


def test_replicas_thread_invariant():
    env = rate_env()
    a = run_replicas(env, Constant(2), 5, reps=6, t_max=50.0)
    b = run_replicas(rate_env(), Constant(2), 5, reps=6, t_max=50.0, threads=3)
    assert [x.return_times for x in a] == [x.return_times for x in b]


def test_exact_d0_uniform():
    st = exact_stationary_truncated(rate_env(d=2), Constant(2), 0)
    assert len(st.states) == 3
    assert np.allclose(st.pi, 1 / 3, atol=1e-15)


def test_exact_d1_ratio():
    env = rate_env(d=1, seed=8)
    st = exact_stationary_truncated(env, RAY, 1)
    r = env.edge_sample((1,))
    pi = st.as_dict()
    assert pi[at((1,), (1, 1))] / pi[at((), (1,))] == pytest.approx(r.nu[0, 0] / r.mu[0], rel=1e-12)
    assert st.tv_discrepancy < 1e-10


@pytest.mark.parametrize("seed", range(6))
def test_exact_against_dense_generator(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 3))
    spec = [Constant(2), Periodic([1, 2]), Explicit({(): 2, (1,): 3}, 1)][seed % 3]
    env = Environment(RateLaw(d, LogNormal(-0.5, 0.5), Uniform(0.5, 2.0)), seed)
    depth = 3 if d == 1 else 2
    st = exact_stationary_truncated(env, spec, depth)
    states, q = truncated_generator(env, spec, depth)
    dense = null_vector_stationary(q)
    lookup = {EMPTY if s is None else State(*s): p for s, p in zip(states, dense)}
    ours = st.as_dict()
    assert set(lookup) == set(ours)
    assert sum(abs(ours[s] - lookup[s]) for s in ours) / 2 < 1e-9
    assert st.detailed_balance_error() < 1e-12


def test_level_mass_matches_cascade():
    env = rate_env(d=2, seed=21)
    st = exact_stationary_truncated(env, Constant(2), 4)
    series = run_cascade(Constant(2), env, n_max=4)
    assert np.allclose(np.log(st.level_mass), series.log_psi, rtol=0, atol=1e-12)


def test_state_count_cap():
    assert truncated_state_count(Constant(2), 2, 1) == 1 + 2 + 8
    with pytest.raises(CapabilityError):
        exact_stationary_truncated(rate_env(), Constant(3), 6, max_states=1000)


@pytest.mark.slow
def test_occupation_converges_to_exact():
    env = Environment(RateLaw(1, Uniform(0.3, 0.9), Uniform(0.5, 1.5)), 3)
    tr = simulate(env, Constant(2), seed=1, jump_max=10 ** 6, max_depth=2, record_occupation=True)
    st = exact_stationary_truncated(env, Constant(2), 2)
    emp = np.array([tr.occupation.get(s, 0.0) for s in st.states]) / tr.total_time
    assert 0.5 * np.abs(emp - st.pi).sum() < 0.05


def test_mean_return_time_point_mass_rates():
    nu = [[Fixed(0.2), Fixed(0.1)], [Fixed(0.1), Fixed(0.2)]]
    env = Environment(RateLaw(2, nu, Fixed(1.0)), 0)
    spec = Constant(2)
    assert lambda_shortcut(env.matrix_law()) * 2 < 1
    exact = exact_stationary_truncated(env, spec, 6).mean_return_time()
    trajs = excursions(env, spec, seed=3, reps=3000, horizon=1e4)
    rows = summarize_excursions(trajs, [1e4])
    assert rows[0].returned == 3000
    assert abs(rows[0].mean_return_time - exact) / exact < 0.2


def test_recurrence_report_recurrent():
    env = Environment(RateLaw(1, Fixed(0.1), Fixed(1.0)), 0)
    rep = recurrence_experiment(env, Constant(2), horizons=[100, 200], reps=300, seed=1, depths=(4,))
    assert rep.predicted == "RECURRENT"
    assert rep.lambda_gr == pytest.approx(0.2)
    assert rep.rows[-1].returned >= 297
    assert rep.exact_mean_return[4] == pytest.approx(birth_death_return_time(0.1, 2, depth_cap=5), rel=1e-12)


@pytest.mark.parametrize("lam,se,gr,br,expected", [
    (0.1, 0.0, 2.0, 2.0, "RECURRENT"),
    (1.0, 0.0, 2.0, 2.0, "TRANSIENT"),
    (0.5, 0.0, 2.0, 2.0, "NEAR-CRITICAL"),
    (0.45, 0.1, 2.0, 2.0, "NEAR-CRITICAL"),
    (0.5, 0.0, 3.0, 1.5, "GAP"),
])
def test_classify_phase(lam, se, gr, br, expected):
    assert classify_phase(lam, se, gr, br) == expected
