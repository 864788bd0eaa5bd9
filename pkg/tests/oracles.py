"""Independent reference computations used by the tests.

Nothing here calls into the estimators or streamers under test; each
oracle recomputes its quantity the slow, obvious way.
"""

import itertools

import numpy as np
import scipy.linalg


def enumerate_level(spec, n):
    """All depth-n words by breadth-first expansion of the branching function."""
    level = [()]
    for _ in range(n):
        level = [w + (i,) for w in level for i in range(1, spec.count(w) + 1)]
    return level


def reverse_product(env, word):
    """xi_{a_n} ... xi_{a_1} multiplied out left to right from the deepest edge."""
    d = env.d
    out = np.eye(d)
    for k in range(len(word), 0, -1):
        out = out @ env.edge_matrix(word[:k])
    return out


def scalar_k(a, p, b, s):
    return p * a ** s + (1 - p) * b ** s


def dense_grid_min(fn, n=200_001):
    s = np.linspace(0.0, 1.0, n)
    vals = fn(s)
    i = int(np.argmin(vals))
    return float(vals[i]), float(s[i])


def charpoly_radius(m):
    return float(np.max(np.abs(np.roots(np.poly(np.asarray(m, dtype=float))))))


def truncated_generator(env, spec, depth):
    """Dense generator of the truncated walk built by direct state enumeration.

    Rates are read straight from ``edge_sample``; states are listed by
    depth then lexicographically.
    """
    d = env.d
    states = [None]
    for n in range(depth + 1):
        for w in enumerate_level(spec, n):
            for sym in itertools.product(range(1, d + 1), repeat=n + 1):
                states.append((w, sym))
    index = {s: i for i, s in enumerate(states)}
    q = np.zeros((len(states), len(states)))
    for (w, sym), i in ((s, index[s]) for s in states[1:]):
        y = sym[-1]
        if not w:
            q[i, 0] = 1.0
            q[0, i] = 1.0
        else:
            q[i, index[(w[:-1], sym[:-1])]] = env.edge_sample(w).mu[y - 1]
        if len(w) < depth:
            for c in range(1, spec.count(w) + 1):
                nu = env.edge_sample(w + (c,)).nu
                for z in range(1, d + 1):
                    q[i, index[(w + (c,), sym + (z,))]] = nu[y - 1, z - 1]
    np.fill_diagonal(q, -q.sum(axis=1))
    return states, q


def null_vector_stationary(q):
    v = scipy.linalg.null_space(q.T)[:, 0]
    return v / v.sum()


def birth_death_return_time(ratio, b, depth_cap=200):
    """Mean return time to EMPTY for d=1, Constant(b), constant nu/mu = ratio.

    Level masses (pi(EMPTY) = 1) are (b * ratio)^n; the Kac relation with
    exit rate 1 from EMPTY gives sum of masses.
    """
    r = b * ratio
    return 1.0 + sum(r ** n for n in range(depth_cap))


ACCEPTANCE_LINES = []


def report(label, ok, detail):
    line = f"{label}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok

