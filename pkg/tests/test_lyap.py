import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from matcascade.errors import CapabilityError, DomainError
from matcascade.lyap import (estimate_k, estimate_lambda, lambda_shortcut, logmeanexp,
                             operator_norm_l1, spectral_radius)
from matcascade.matenv import FiniteSupport, IIDEntries, PointMass, TwoPoint, Uniform
from oracles import charpoly_radius, dense_grid_min, scalar_k

M = np.array([[0.2, 0.1], [0.1, 0.2]])


def test_operator_norm_examples():
    assert operator_norm_l1(np.eye(2)) == 1
    assert operator_norm_l1([[1, 3], [2, 4]]) == 7
    assert operator_norm_l1(M) == pytest.approx(0.3)
    stack = np.stack([np.eye(2), np.array([[1.0, 3], [2, 4]])])
    assert list(operator_norm_l1(stack)) == [1, 7]


def test_logmeanexp_stable():
    assert logmeanexp([1000.0, 1000.0]) == pytest.approx(1000.0)
    assert logmeanexp([-1e4, -1e4 + math.log(3)]) == pytest.approx(-1e4 + math.log(2))


def test_k_point_mass():
    est = estimate_k(PointMass(M), 1.0, m=64)
    assert est.k_hat == pytest.approx(0.3, rel=0.01)


@pytest.mark.parametrize("method", ["cloning", "direct"])
@pytest.mark.parametrize("law", [PointMass(M), IIDEntries(3, Uniform(0.1, 2.0)),
                                 FiniteSupport([M, 3 * M.T], [0.5, 0.5])])
def test_k_at_zero_exact(law, method):
    est = estimate_k(law, 0.0, n_list=(5, 10), m=32, seed=3, method=method)
    assert est.k_hat == 1.0 and est.std_err == 0.0


@pytest.mark.parametrize("method", ["cloning", "direct"])
def test_scalar_two_point(method):
    law = IIDEntries(1, TwoPoint(0.5, 0.5, 2.0))
    est = estimate_k(law, 1.0, n_list=(10, 20, 40), m=8192, seed=2, method=method)
    assert est.k_hat == pytest.approx(1.25, rel=0.02)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75, 1.0])
def test_scalar_within_4_se(s):
    law = IIDEntries(1, TwoPoint(0.5, 0.5, 2.0))
    est = estimate_k(law, s, seed=7)
    truth = scalar_k(0.5, 0.5, 2.0, s)
    assert abs(est.k_hat - truth) <= 4 * est.std_err


def test_k_errors():
    law = PointMass(M)
    with pytest.raises(DomainError):
        estimate_k(law, 1.0, n_list=[])
    with pytest.raises(DomainError):
        estimate_k(law, 1.0, m=1)
    with pytest.raises(DomainError):
        estimate_k(law, -0.5)
    with pytest.raises(DomainError):
        estimate_k(law, 0.5, method="bogus")
    with pytest.raises(CapabilityError):
        estimate_k(PointMass([[0.0, 1.0], [0.0, 0.0]]), 1.0, n_list=(3, 4), m=4)


def test_deep_products_stay_finite():
    law = IIDEntries(2, Uniform(4.0, 6.0))  # ||g|| about 10
    for method in ("cloning", "direct"):
        est = estimate_k(law, 1.0, n_list=(10_000,), m=16, method=method)
        assert np.isfinite(est.k_hat) and 9 < est.k_hat < 11


def test_threads_do_not_change_estimates():
    law = IIDEntries(2, Uniform(0.1, 1.0))
    for method in ("cloning", "direct"):
        a = estimate_k(law, 0.6, m=2048, seed=4, method=method)
        b = estimate_k(law, 0.6, m=2048, seed=4, method=method, threads=4)
        assert a.k_hat == b.k_hat and a.std_err == b.std_err


def test_lambda_point_masses():
    est = estimate_lambda(IIDEntries(1, Uniform(0.4, 0.4)), m=16)
    assert est.lambda_hat == pytest.approx(0.4, rel=1e-9)
    assert est.s_star == 1.0
    est = estimate_lambda(PointMass([[2.0]]), m=16)
    assert est.lambda_hat == 1.0 and est.s_star == 0.0


def test_lambda_scalar_interior():
    law = IIDEntries(1, TwoPoint(0.25, 0.5, 2.0))
    truth, s_true = dense_grid_min(lambda s: scalar_k(0.25, 0.5, 2.0, s))
    est = estimate_lambda(law, seed=1)
    assert abs(est.lambda_hat - truth) <= 1e-3 + 3 * est.std_err
    assert 0 < est.s_star < 1
    assert any(e.s == 0.0 for e in est.curve) and any(e.s == 1.0 for e in est.curve)
    assert est.lambda_hat == min(e.k_hat for e in est.curve)


def test_lambda_errors():
    with pytest.raises(DomainError):
        estimate_lambda(PointMass(M), grid=2)
    with pytest.raises(DomainError):
        estimate_lambda(PointMass(M), tol=0)


def test_spectral_radius_examples():
    assert spectral_radius(M) == pytest.approx(0.3, rel=1e-10)
    assert spectral_radius(np.eye(3)) == pytest.approx(1.0)
    perm = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert spectral_radius(perm) == pytest.approx(charpoly_radius(perm), rel=1e-10)
    assert spectral_radius(np.zeros((3, 3))) == 0.0
    with pytest.raises(DomainError):
        spectral_radius(-M)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2 ** 32 - 1))
def test_spectral_radius_matches_charpoly(d, seed):
    m = np.random.default_rng(seed).uniform(0.01, 1.0, (d, d))
    assert spectral_radius(m) == pytest.approx(charpoly_radius(m), rel=1e-8)


def test_shortcut_examples():
    assert lambda_shortcut(IIDEntries(2, Uniform(0.1, 0.4))) == pytest.approx(0.5, rel=1e-12)
    assert lambda_shortcut(PointMass(M)) == pytest.approx(0.3, rel=1e-12)
    with pytest.raises(CapabilityError, match="0.6"):
        lambda_shortcut(PointMass([[0.1, 0.6], [0.1, 0.1]]))


@pytest.mark.slow
def test_shortcut_consistency():
    law = FiniteSupport([M, np.array([[0.4, 0.05], [0.3, 0.1]])], [0.5, 0.5])
    lam = lambda_shortcut(law)
    est = estimate_lambda(law, m=4096, seed=9)
    assert abs(est.lambda_hat - lam) <= max(0.05 * lam, 4 * est.std_err)


def test_log_convexity_soft():
    law = IIDEntries(2, Uniform(0.05, 1.5))
    ests = [estimate_k(law, s, m=2048, seed=5) for s in (0.2, 0.5, 0.8)]
    logs = [math.log(e.k_hat) for e in ests]
    se = sum(e.std_err / e.k_hat for e in ests)
    assert logs[1] <= 0.5 * (logs[0] + logs[2]) + 3 * se
