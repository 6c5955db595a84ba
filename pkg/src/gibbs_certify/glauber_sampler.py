"""Heat-bath Glauber dynamics: seeded sampling and the identical-randomness coupling.

Randomness contract: every step consumes two doubles ``(u0, u1)`` from a
``numpy.random.Generator``; the site is ``floor(u0 * n)`` and spin i flips iff
``u1 <= c(i, x)``. Blocks of steps draw ``rng.random((k, 2))``, which yields the
same stream as k single steps, so trajectories do not depend on block sizes.
Independent trials use ``SeedSequence(seed).spawn(trials)``, one child per trial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import ContractError
from .observable import Observable
from .spin_model import Region, SpinConfig, SpinSystem, spin_to_bit

_BLOCK = 1 << 16


@dataclass(frozen=True)
class _Graph:
    n: int
    ptr: np.ndarray
    nbr: np.ndarray
    tab: np.ndarray
    beta: float


def _graph(sys: SpinSystem) -> _Graph:
    sys.require_finite("Glauber dynamics")
    n = sys.n
    ptr = np.zeros(n + 1, dtype=np.int64)
    nbr, tab = [], []
    for i in range(n):
        inc = sys.incident(i)
        ptr[i + 1] = ptr[i] + len(inc)
        for j, t in inc:
            nbr.append(j)
            tab.append(t)
    tab = np.array(tab, dtype=float).reshape(-1, 2, 2)
    return _Graph(n, ptr, np.array(nbr, dtype=np.int64), tab, float(sys.beta))


@numba.njit(cache=True)
def _flip_prob(bits, i, ptr, nbr, tab, beta):
    xi = bits[i]
    g = 0.0
    for k in range(ptr[i], ptr[i + 1]):
        xj = bits[nbr[k]]
        g += tab[k, 1 - xi, xj] - tab[k, xi, xj]
    g *= beta
    if g >= 0.0:
        e = math.exp(-g)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(g))


@numba.njit(cache=True)
def _advance(bits, u, n, ptr, nbr, tab, beta):
    for s in range(u.shape[0]):
        i = min(int(u[s, 0] * n), n - 1)
        if u[s, 1] <= _flip_prob(bits, i, ptr, nbr, tab, beta):
            bits[i] ^= 1


@numba.njit(cache=True)
def _advance_sampling(bits, u, thin, phase, n, ptr, nbr, tab, beta, supp, fvals, out):
    """Advance and record f after every ``thin``-th step; returns the new phase."""
    k = 0
    for s in range(u.shape[0]):
        i = min(int(u[s, 0] * n), n - 1)
        if u[s, 1] <= _flip_prob(bits, i, ptr, nbr, tab, beta):
            bits[i] ^= 1
        phase += 1
        if phase == thin:
            phase = 0
            w = 0
            for q in range(supp.shape[0]):
                w = (w << 1) | bits[supp[q]]
            out[k] = fvals[w]
            k += 1
    return phase


@numba.njit(cache=True)
def _advance_counting(bits, u, n, ptr, nbr, tab, beta, counts):
    for s in range(u.shape[0]):
        i = min(int(u[s, 0] * n), n - 1)
        if u[s, 1] <= _flip_prob(bits, i, ptr, nbr, tab, beta):
            bits[i] ^= 1
        w = 0
        for q in range(n):
            w = (w << 1) | bits[q]
        counts[w] += 1


@numba.njit(cache=True)
def _coupled(x, y, u, checkpoints, supp, n, ptr, nbr, tab, beta, out):
    """Run X and Y with shared draws; ``out[k]`` = 1 if they differ on supp at checkpoint k."""
    k = 0
    for s in range(u.shape[0] + 1):
        while k < checkpoints.shape[0] and checkpoints[k] == s:
            d = 0
            for q in range(supp.shape[0]):
                if x[supp[q]] != y[supp[q]]:
                    d = 1
            out[k] = d
            k += 1
        if s == u.shape[0]:
            break
        i = min(int(u[s, 0] * n), n - 1)
        if u[s, 1] <= _flip_prob(x, i, ptr, nbr, tab, beta):
            x[i] ^= 1
        if u[s, 1] <= _flip_prob(y, i, ptr, nbr, tab, beta):
            y[i] ^= 1


@dataclass
class ChainState:
    """X_t together with its step count and the generator that drives it.

    ``bits[i]`` is 1 for spin +1. ``seed`` is the seed the generator was built
    from; ``(seed, step_count)`` reproduces the state.
    """

    bits: np.ndarray
    step_count: int
    seed: int | None
    rng: np.random.Generator = field(repr=False)

    @classmethod
    def start(cls, sys: SpinSystem, seed: int | None = None,
              init: SpinConfig | str = "random") -> "ChainState":
        """Fresh chain. ``init`` is a full configuration, ``"plus"``, ``"minus"`` or ``"random"``."""
        sys.require_finite("Glauber dynamics")
        rng = np.random.default_rng(seed)
        n = sys.n
        if isinstance(init, SpinConfig):
            if not init.covers(range(n)):
                raise ContractError("initial configuration must cover every site")
            bits = np.array([spin_to_bit(init[i]) for i in range(n)], dtype=np.int8)
        elif init == "plus":
            bits = np.ones(n, dtype=np.int8)
        elif init == "minus":
            bits = np.zeros(n, dtype=np.int8)
        elif init == "random":
            bits = rng.integers(0, 2, size=n).astype(np.int8)
        else:
            raise ContractError(f"unknown initial state {init!r}")
        return cls(bits, 0, seed, rng)

    @property
    def config(self) -> SpinConfig:
        return SpinConfig(tuple(range(self.bits.size)), 2 * self.bits.astype(int) - 1)

    def copy(self) -> "ChainState":
        rng = np.random.Generator(type(self.rng.bit_generator)())
        rng.bit_generator.state = self.rng.bit_generator.state
        return ChainState(self.bits.copy(), self.step_count, self.seed, rng)


def step(sys: SpinSystem, state: ChainState) -> ChainState:
    """One heat-bath update; returns a new state and leaves ``state`` untouched."""
    return run(sys, state, 1)


def run(sys: SpinSystem, state: ChainState, steps: int) -> ChainState:
    """``steps`` heat-bath updates on a copy of ``state``."""
    g = _graph(sys)
    new = state.copy()
    left = int(steps)
    while left > 0:
        k = min(left, _BLOCK)
        _advance(new.bits, new.rng.random((k, 2)), g.n, g.ptr, g.nbr, g.tab, g.beta)
        left -= k
    new.step_count += int(steps)
    return new


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    meta: dict

    def __iter__(self):
        return iter((self.mean, self.stderr))


def estimate(sys: SpinSystem, f: Observable, burn_in: int, samples: int, thin: int = 1,
             seed: int | None = None, batches: int = 20) -> Estimate:
    """Time average of f along one chain with a batch-means standard error.

    f is recorded after every ``thin``-th step following ``burn_in`` steps.
    The ``samples`` values are cut into ``batches`` consecutive blocks and the
    standard error is the spread of the block means over sqrt(batches).
    """
    g = _graph(sys)
    if samples < batches or batches < 2:
        raise ContractError("need at least two batches and one sample per batch")
    if not set(f.support) <= set(range(g.n)):
        raise ContractError(f"support {f.support} is not inside the system")
    state = run(sys, ChainState.start(sys, seed), burn_in)
    bits, rng = state.bits, state.rng
    supp = np.array(f.support, dtype=np.int64)
    fvals = np.asarray(f.values, dtype=float)
    out = np.empty(samples)
    filled, phase = 0, 0
    while filled < samples:
        want = min(samples - filled, max(1, _BLOCK // thin))
        u = rng.random((want * thin - phase, 2))
        phase = _advance_sampling(bits, u, thin, phase, g.n, g.ptr, g.nbr, g.tab, g.beta, supp,
                                  fvals, out[filled:])
        filled += want
    per = samples // batches
    means = out[:per * batches].reshape(batches, per).mean(axis=1)
    stderr = float(np.std(means, ddof=1) / math.sqrt(batches))
    meta = {"burn_in": burn_in, "samples": samples, "thin": thin, "seed": seed, "batches": batches,
            "beta": sys.beta, "steps": burn_in + samples * thin}
    return Estimate(float(np.mean(out)), stderr, meta)


def visit_frequencies(sys: SpinSystem, steps: int, seed: int | None = None, burn_in: int = 0) -> np.ndarray:
    """Fraction of time spent in each full configuration (word order); n <= 20."""
    g = _graph(sys)
    if g.n > 20:
        raise ContractError("visit histogram limited to 20 sites")
    state = run(sys, ChainState.start(sys, seed), burn_in)
    counts = np.zeros(1 << g.n, dtype=np.int64)
    left = int(steps)
    while left > 0:
        k = min(left, _BLOCK)
        _advance_counting(state.bits, state.rng.random((k, 2)), g.n, g.ptr, g.nbr, g.tab, g.beta, counts)
        left -= k
    return counts / counts.sum()


def _coupling_start(sys: SpinSystem, region: Region) -> tuple[np.ndarray, np.ndarray]:
    # agree (+1) on Lambda; X is +1 and Y is -1 everywhere else
    n = sys.n
    inside = np.zeros(n, dtype=bool)
    inside[list(region.lam)] = True
    x = np.ones(n, dtype=np.int8)
    y = np.where(inside, 1, 0).astype(np.int8)
    return x, y


def coupled_disagreement_curve(sys: SpinSystem, region: Region, B, ts, trials: int,
                               seed: int | None = None) -> dict:
    """P(X_t != Y_t on B) at every t in ``ts`` (single-site steps).

    X starts all +1, Y agrees with X on Lambda and is -1 outside it; both are
    driven by the same site and uniform at every step. Returns the
    probabilities, their binomial standard errors, and t both in steps and in
    sweeps (t / n).
    """
    g = _graph(sys)
    B = tuple(B)
    if not set(B) <= set(region.lam):
        raise ContractError("B must lie inside Lambda")
    ts = np.asarray(sorted(set(int(t) for t in ts)), dtype=np.int64)
    if ts.size and ts[0] < 0:
        raise ContractError("times must be nonnegative")
    horizon = int(ts[-1]) if ts.size else 0
    x0, y0 = _coupling_start(sys, region)
    supp = np.array(B, dtype=np.int64)
    hits = np.zeros(ts.size, dtype=np.int64)
    out = np.zeros(ts.size, dtype=np.int64)
    for child in np.random.SeedSequence(seed).spawn(trials):
        u = np.random.default_rng(child).random((horizon, 2))
        _coupled(x0.copy(), y0.copy(), u, ts, supp, g.n, g.ptr, g.nbr, g.tab, g.beta, out)
        hits += out
    p = hits / trials
    return {"t_steps": ts, "t_sweeps": ts / g.n, "probability": p,
            "stderr": np.sqrt(p * (1 - p) / trials), "trials": trials, "seed": seed}


def coupled_disagreement_probability(sys: SpinSystem, region: Region, B, t: int, trials: int,
                                     seed: int | None = None) -> float:
    return float(coupled_disagreement_curve(sys, region, B, [t], trials, seed)["probability"][0])


def propagation_envelope(sys: SpinSystem, B, t: float, r: float) -> float:
    """8|B| exp(v t / n - r) with v = e^2 (Delta - 1); t in single-site steps."""
    v = math.e ** 2 * (sys.max_degree - 1)
    return 8 * len(tuple(B)) * math.exp(v * t / sys.n - r)
