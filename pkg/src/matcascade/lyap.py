"""Growth rates of norm moments of random matrix products.

``k(s)`` is the exponential growth rate of ``E ||g_n ... g_1||^s`` and the
classification parameter is ``lambda = min over s in [0, 1] of k(s)``.
All products are carried as (unit-norm matrix, log scale) pairs.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _seeding
from .errors import CapabilityError, DomainError

DEFAULT_N_LIST = (20, 40, 80, 160)
_GOLDEN = (math.sqrt(5) - 1) / 2


def operator_norm_l1(m):
    """Operator norm induced by the l1 vector norm: the largest column abs-sum.

    Accepts a stack of matrices and reduces over the last two axes.
    """
    return np.abs(np.asarray(m, dtype=float)).sum(axis=-2).max(axis=-1)


def logmeanexp(x, axis=None):
    x = np.asarray(x, dtype=float)
    top = np.max(x, axis=axis, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.mean(np.exp(x - top), axis=axis, keepdims=True)) + top
    return out.squeeze() if axis is None else np.squeeze(out, axis=axis)


@dataclass
class KsEstimate:
    s: float
    k_hat: float
    std_err: float
    n_window: tuple
    replicas: int
    log_moments: list = field(default_factory=list, repr=False)


@dataclass
class LambdaEstimate:
    lambda_hat: float
    s_star: float
    curve: list

    @property
    def std_err(self):
        best = min(self.curve, key=lambda e: e.k_hat)
        return best.std_err


_BLOCK = 1024


def _direct(law, s, n, m, seed):
    """log of the mean of ||product||^s over ``m`` independent products.

    Products are drawn in fixed blocks of ``_BLOCK`` replicas, block ``j``
    from stream (seed, n, j).  Returns the estimate and its delta-method
    variance.
    """
    d = law.d
    log_norm = np.zeros(m)
    for j, start in enumerate(range(0, m, _BLOCK)):
        size = min(_BLOCK, m - start)
        rng = _seeding.derive_rng(seed, _seeding.STREAM_LYAP, n, j)
        prod = np.broadcast_to(np.eye(d), (size, d, d)).copy()
        acc = np.zeros(size)
        for _ in range(n):
            prod = law.sample(rng, size) @ prod
            norms = operator_norm_l1(prod)
            with np.errstate(divide="ignore"):
                acc += np.log(norms)
            prod /= np.where(norms > 0, norms, 1.0)[:, None, None]
        log_norm[start:start + size] = acc
    if s == 0:
        return 0.0, 0.0
    vals = s * log_norm
    y = float(logmeanexp(vals))
    if not np.isfinite(y):
        return -np.inf, 0.0
    rel = np.exp(vals - y)
    return y, float(np.var(rel, ddof=1)) / m


def _cloning(law, s, n, m, seed):
    """Population estimate of log E ||product x||^s with x = chi / d.

    Each step multiplies every particle by a fresh matrix, weighs it by
    ||g x||^s and resamples directions proportionally to the weights.  The
    running sum of log mean weights estimates the log moment; its variance
    is the sum of per-step relative weight variances over ``m``.
    """
    d = law.d
    rng = _seeding.derive_rng(seed, _seeding.STREAM_LYAP, n)
    x = np.full((m, d), 1.0 / d)
    total = 0.0
    var = 0.0
    for _ in range(n):
        y = np.einsum("ijk,ik->ij", law.sample(rng, m), x)
        norms = np.abs(y).sum(axis=1)
        x = y / np.where(norms > 0, norms, 1.0)[:, None]
        if s == 0:
            continue
        with np.errstate(divide="ignore"):
            logw = s * np.log(norms)
        step = float(logmeanexp(logw))
        if not np.isfinite(step):
            return -np.inf, 0.0
        total += step
        w = np.exp(logw - step)
        var += float(np.var(w, ddof=1)) / m
        x = x[_systematic_resample(w / w.sum(), rng)]
    return total, var


def _systematic_resample(w, rng):
    size = len(w)
    positions = (rng.random() + np.arange(size)) / size
    cdf = np.cumsum(w)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, positions, side="right").clip(max=size - 1)


_METHODS = {"cloning": _cloning, "direct": _direct}


def _fit_slope(n_list, y, var):
    x = np.asarray(n_list, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    sxx = float(np.dot(xc, xc))
    slope = float(np.dot(xc, y - y.mean()) / sxx)
    se_mc = math.sqrt(float(np.dot(xc ** 2, var)) / sxx ** 2)
    if len(x) > 2:
        resid = y - y.mean() - slope * xc
        se_ols = math.sqrt(float(np.dot(resid, resid)) / (len(x) - 2) / sxx)
    else:
        se_ols = 0.0
    return slope, max(se_mc, se_ols)


def estimate_k(law, s, n_list=DEFAULT_N_LIST, m=4096, seed=0, method="cloning", threads=1):
    """Monte Carlo estimate of k(s).

    For each depth ``n`` the log-moment ``y_n = log E||g_n ... g_1||^s`` is
    estimated from ``m`` replicas, then ``y_n ~ c + n log k`` is fitted by
    least squares.  ``method="direct"`` averages ``||product||^s`` over
    independent products.  ``method="cloning"`` (default) propagates a
    resampled population of directions; it stays accurate at depths where
    the direct average is dominated by rare products.

    ``std_err`` is the standard error of ``k_hat`` (delta method on the
    fitted slope, taking the larger of block-to-block Monte Carlo spread and
    regression residual).
    """
    n_list = [int(n) for n in n_list]
    if not n_list:
        raise DomainError("n_list must not be empty")
    if any(n < 1 for n in n_list):
        raise DomainError("all depths in n_list must be >= 1")
    if m < 2:
        raise DomainError("at least two replicas are required")
    if s < 0:
        raise DomainError("s must be >= 0")
    if method not in _METHODS:
        raise DomainError(f"unknown method {method!r}")
    run = _METHODS[method]
    # depth n draws from its own stream, so threads only change scheduling
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(lambda n: run(law, s, n, m, seed), n_list))
    else:
        results = [run(law, s, n, m, seed) for n in n_list]
    ys = [y for y, _ in results]
    vs = [v for _, v in results]
    if not all(np.isfinite(ys)):
        raise CapabilityError(f"the law produces vanishing products at s={s}; k(s) is 0")
    if len(set(n_list)) == 1:
        n = n_list[0]
        slope = float(np.mean(ys)) / n
        se = math.sqrt(float(np.mean(vs)) / len(vs)) / n
    else:
        slope, se = _fit_slope(n_list, ys, vs)
    k_hat = math.exp(slope)
    return KsEstimate(float(s), k_hat, k_hat * se, (min(n_list), max(n_list)), m, ys)


def estimate_lambda(law, grid=11, tol=1e-3, m=4096, n_list=DEFAULT_N_LIST, seed=0,
                    method="cloning", threads=1):
    """Minimize the estimated k over [0, 1].

    A grid scan (endpoints included) brackets the minimum, then golden
    section search narrows the bracket to ``tol``.  Every evaluation reuses
    ``seed`` so the estimated curve is built from common random numbers.
    """
    if grid < 3:
        raise DomainError("grid must have at least 3 points")
    if tol <= 0:
        raise DomainError("tol must be positive")
    cache = {}

    def k_at(s):
        s = float(min(max(s, 0.0), 1.0))
        if s not in cache:
            cache[s] = estimate_k(law, s, n_list, m, seed, method, threads)
        return cache[s]

    grid_s = np.linspace(0.0, 1.0, grid)
    values = [math.log(k_at(s).k_hat) for s in grid_s]
    i = int(np.argmin(values))
    lo = grid_s[max(i - 1, 0)]
    hi = grid_s[min(i + 1, grid - 1)]
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    e = a + _GOLDEN * (b - a)
    fc, fe = k_at(c).k_hat, k_at(e).k_hat
    while b - a > tol:
        if fc <= fe:
            b, e, fe = e, c, fc
            c = b - _GOLDEN * (b - a)
            fc = k_at(c).k_hat
        else:
            a, c, fc = c, e, fe
            e = a + _GOLDEN * (b - a)
            fe = k_at(e).k_hat
    curve = [cache[s] for s in sorted(cache)]
    best = min(curve, key=lambda est: est.k_hat)
    return LambdaEstimate(best.k_hat, best.s, curve)


def spectral_radius(m, tol=1e-12, max_iter=100_000):
    """Largest eigenvalue modulus of a nonnegative matrix by power iteration.

    The iterate is l1-normalized; the growth ratio of successive iterates is
    averaged (geometrically) over two steps so that period-2 patterns such
    as ``[[0, 1], [1, 0]]`` converge.
    """
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError("spectral_radius needs a square matrix")
    if np.any(a < 0):
        raise DomainError("spectral_radius needs a nonnegative matrix")
    if not np.any(a):
        return 0.0
    d = a.shape[0]
    x = np.linspace(1.0, 2.0, d)
    x /= x.sum()
    prev_ratio = None
    prev_est = None
    for _ in range(max_iter):
        y = a @ x
        ratio = y.sum()
        if ratio == 0:
            # nilpotent direction; restart from the all-ones vector
            return _spectral_radius_fallback(a)
        x = y / ratio
        if prev_ratio is not None:
            est = math.sqrt(ratio * prev_ratio)
            if prev_est is not None and abs(est - prev_est) <= tol * est:
                return est
            prev_est = est
        prev_ratio = ratio
    return prev_est


def _spectral_radius_fallback(a):
    return float(np.max(np.abs(np.linalg.eigvals(a))))


def lambda_shortcut(law):
    """Classification parameter for laws whose entries stay below 1/d.

    Under that bound lambda is the largest eigenvalue of the mean matrix.
    """
    _, hi = law.entry_bounds()
    bound = 1.0 / law.d
    worst = float(np.max(hi))
    if not worst < bound:
        i, j = np.unravel_index(int(np.argmax(hi)), hi.shape)
        raise CapabilityError(f"entry ({i}, {j}) reaches {worst:.6g}, not strictly below 1/d = {bound:.6g}")
    return spectral_radius(law.mean())
