"""Particle iteration of the matrix chaos equation ``Y = sum_j Y'_j xi_j``.

A population of matrices stands for the law of ``Y``.  One iteration
builds each output particle from ``b`` parents drawn with replacement and
``b`` fresh matrices from the driving law, parent on the left.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _seeding
from .cascade import tail_slope
from .errors import CapabilityError, DomainError
from .lyap import estimate_lambda, lambda_shortcut, operator_norm_l1

DEFAULT_POPULATION = 10_000
_BLOCK = 1024


@dataclass(frozen=True)
class ParticlePopulation:
    particles: np.ndarray
    generation: int = 0

    def __post_init__(self):
        p = np.asarray(self.particles, dtype=float)
        if p.ndim == 2:
            p = p[None]
        if p.ndim != 3 or p.shape[1] != p.shape[2]:
            raise DomainError(f"particles must be a stack of square matrices, got shape {p.shape}")
        object.__setattr__(self, "particles", p)

    def __len__(self):
        return len(self.particles)

    @property
    def d(self):
        return self.particles.shape[1]

    def mean(self):
        return self.particles.mean(axis=0)

    @classmethod
    def constant(cls, matrix, m):
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        return cls(np.broadcast_to(matrix, (m,) + matrix.shape).copy())


def _block(particles, law, b, size, rng):
    d = particles.shape[1]
    parents = rng.integers(len(particles), size=(size, b))
    xi = law.sample(rng, size * b).reshape(size, b, d, d)
    # products and the b-fold sum in extended precision, rounded once:
    # b copies of M @ (I / b) then land back on M exactly
    ext = particles[parents].astype(np.longdouble) @ xi.astype(np.longdouble)
    return ext.sum(axis=1).astype(float)


def chaos_iterate(pop, law, b, m_out, seed, threads=1):
    """One application of the smoothing map to a particle population.

    Output block ``j`` (of 1024 particles) draws from stream
    (seed, generation, j), so the result does not depend on ``threads``.
    """
    if len(pop) == 0:
        raise DomainError("empty population")
    if int(b) != b or b < 1:
        raise DomainError(f"b must be an integer >= 1, got {b!r}")
    if m_out < 1:
        raise DomainError("m_out must be >= 1")
    if pop.d != law.d:
        raise DomainError(f"population is {pop.d}x{pop.d} but the law is {law.d}x{law.d}")
    starts = list(range(0, m_out, _BLOCK))

    def one(j):
        rng = _seeding.derive_rng(seed, _seeding.STREAM_CHAOS, pop.generation, j)
        return _block(pop.particles, law, int(b), min(_BLOCK, m_out - starts[j]), rng)

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(one, range(len(starts))))
    else:
        parts = [one(j) for j in range(len(starts))]
    return ParticlePopulation(np.concatenate(parts), pop.generation + 1)


@dataclass
class ChaosReport:
    b: int
    d: int
    log_mean_norm: list
    slope_running: list
    slope: float
    verdict: str
    eps: float
    lambda_hat: float = None
    lambda_source: str = None
    final: ParticlePopulation = field(default=None, repr=False)

    @property
    def lambda_b(self):
        return None if self.lambda_hat is None else self.lambda_hat * self.b

    @property
    def lambda_d(self):
        return None if self.lambda_hat is None else self.lambda_hat * self.d

    def rows(self):
        for t, (y, s) in enumerate(zip(self.log_mean_norm, self.slope_running)):
            yield t, y, s


def _context_lambda(law, lambda_hat, seed):
    if lambda_hat is not None:
        return float(lambda_hat), "given"
    try:
        return lambda_shortcut(law), "shortcut"
    except CapabilityError:
        pass
    try:
        est = estimate_lambda(law, m=1024, n_list=(10, 20, 40), tol=1e-2, seed=seed)
    except CapabilityError:
        return None, None
    return est.lambda_hat, "estimate"


def chaos_diagnose(law, b, iters, m=DEFAULT_POPULATION, seed=0, init=None, lambda_hat=None,
                   eps=1e-2, threads=1):
    """Drift of ``log E||Y_t||`` under repeated particle iteration.

    ``init`` is a population, a single matrix (replicated ``m`` times) or
    None for the identity.  The population is rescaled by powers of two when
    its mean norm leaves ``[2**-32, 2**32]``, which is exact and tracked in
    the log.  The verdict compares the tail slope with ``eps``.  The
    classification parameter is reported times both ``b`` and ``d``; no
    claim is made about existence of a fixed point.
    """
    if iters < 1:
        raise DomainError("iters must be >= 1")
    if init is None:
        pop = ParticlePopulation.constant(np.eye(law.d), m)
    elif isinstance(init, ParticlePopulation):
        pop = init
    else:
        pop = ParticlePopulation.constant(init, m)
    log_shift = 0.0
    logs = []
    for t in range(iters + 1):
        if t > 0:
            pop = chaos_iterate(pop, law, b, m, seed, threads)
        mean_norm = float(operator_norm_l1(pop.particles).mean())
        if mean_norm == 0:
            logs.append(-math.inf)
            break
        logs.append(log_shift + math.log(mean_norm))
        e = math.frexp(mean_norm)[1]
        if abs(e) > 32:
            pop = ParticlePopulation(np.ldexp(pop.particles, -e), pop.generation)
            log_shift += e * math.log(2.0)
    running = [math.nan] + [tail_slope(logs[:t + 1]) for t in range(1, len(logs))]
    slope = running[-1]
    if slope < -eps:
        verdict = "CONTRACTING"
    elif slope > eps:
        verdict = "EXPANDING"
    else:
        verdict = "MARGINAL"
    lam, source = _context_lambda(law, lambda_hat, seed)
    return ChaosReport(int(b), law.d, logs, running, slope, verdict, eps, lam, source, pop)
