"""Markov-chain (stationarity) relaxation built from single-site Glauber dynamics.

For each configuration sigma of Lambda the LP imposes

    sum_{x : x_Lambda = sigma} sum_{i in Lambda} nu(x^i) c(i, x^i) - nu(x) c(i, x) = 0,

i.e. stationarity nu(Pg) = nu(g) for g the indicator of sigma. The common
1/n factor of the transition probabilities P_{x,x^i} = c(i, x)/n is dropped
from every row, which leaves the feasible set unchanged.

Two ways to get the optimum:

* ``raw`` assembles the LP and hands it to :mod:`lp_solver`;
* ``dual`` reads the LP as the occupation-measure program of an average-cost
  control problem (state sigma, control eta = the boundary spins) and
  iterates on the dual potential y. For any y,

      min_x [f(x) + sum_i c(i, x) (y(sigma^i) - y(sigma))]

  is a lower bound on the LP minimum (weak duality), and the max over sigma
  of the inner min over eta is an upper bound on it, so every iterate gives a
  certified enclosure of the optimum and the iteration stops once the two
  meet within ``tol``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numba
import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .dlr_hierarchy import (MAX_RAW_CLOSURE, CertifiedInterval, check_support, interval_from_lp,
                            region_distance)
from .errors import ContractError, GuardError
from .lp_solver import LpProblem, Sense, SolverConfig, solve_both
from .observable import MAX_SUPPORT, Observable, indicator
from .spin_model import (Region, SpinConfig, SpinSystem, enumerate_bits, grad_H, make_region,
                         region_gradients)

RateFunction = Callable[[SpinSystem, SpinConfig, object], float]

# the stationarity LPs stall HiGHS presolve; the interior-point path with
# crossover and no presolve is the fastest exact route
RAW_CONFIG = SolverConfig(highs_method="highs-ipm", highs_presolve=False)


class Method(str, Enum):
    RAW = "raw"
    DUAL = "dual"
    AUTO = "auto"


@dataclass(frozen=True)
class DualConfig:
    """Stopping rule and acceleration for the potential iteration."""

    tol: float = 1e-10
    max_iter: int = 50_000
    # Anderson mixing depth; 0 gives plain relative value iteration
    memory: int = 10


def heat_bath_rate(sys: SpinSystem, x: SpinConfig, i) -> float:
    """Flip probability e^{-g} / (1 + e^{-g}) with g = grad_H(x, i)."""
    return float(expit(-grad_H(sys, x, i)))


def rate_table(sys: SpinSystem, region: Region, bits: np.ndarray | None = None,
               rate: RateFunction | None = None) -> np.ndarray:
    """``c[x, k]`` = rate of flipping lam[k] from closure configuration x."""
    if bits is None:
        bits = enumerate_bits(len(region.closure))
    if rate is None or rate is heat_bath_rate:
        return expit(-region_gradients(sys, region, bits))
    out = np.empty((bits.shape[0], len(region.lam)))
    for r in range(bits.shape[0]):
        x = SpinConfig(region.closure, 2 * bits[r] - 1)
        for k, i in enumerate(region.lam):
            out[r, k] = rate(sys, x, i)
    return out


def validate_rate(sys: SpinSystem, region: Region, rate: RateFunction, tol: float = 1e-12) -> None:
    """Check a rate function on Sigma^closure for every i in Lambda.

    Requires 0 <= c <= 1, dependence on the closed neighbourhood of i only,
    and reversibility c(i, x) = c(i, x^i) e^{-grad_H(x, i)}. Raises
    ContractError on the first violation.
    """
    m = len(region.closure)
    if m > MAX_RAW_CLOSURE:
        raise GuardError(f"rate validation limited to |closure| <= {MAX_RAW_CLOSURE}")
    bits = enumerate_bits(m)
    c = rate_table(sys, region, bits, rate)
    g = region_gradients(sys, region, bits)
    if np.any(c < -tol) or np.any(c > 1 + tol):
        raise ContractError("rate outside [0, 1]")
    idx = np.arange(1 << m)
    for k, (i, p) in enumerate(zip(region.lam, region.lam_positions)):
        flipped = idx ^ (1 << (m - 1 - p))
        if not np.allclose(c[:, k], c[flipped, k] * np.exp(-g[:, k]), rtol=1e-9, atol=tol):
            raise ContractError(f"rate is not reversible at site {i!r}")
        near = {i, *sys.neighbors(i)}
        for q, s in enumerate(region.closure):
            if s in near:
                continue
            other = idx ^ (1 << (m - 1 - q))
            if not np.allclose(c[:, k], c[other, k], rtol=0, atol=tol):
                raise ContractError(f"rate at site {i!r} depends on far site {s!r}")


def apply_P(sys: SpinSystem, f: Observable, rate: RateFunction | None = None) -> Observable:
    """One Glauber step: Pf = f + sum_{i in supp f} (c(i, x) / n) grad_i f.

    The result lives on the closure of supp(f).
    """
    n = sys.n
    if not f.support:
        return f
    region = make_region(sys, f.support)
    m = len(region.closure)
    if m > MAX_SUPPORT:
        raise GuardError(f"Pf would need a table over {m} sites (cap {MAX_SUPPORT})")
    bits = enumerate_bits(m)
    c = rate_table(sys, region, bits, rate)
    fx = f.values_on(region.closure, bits)
    out = fx.copy()
    for k, p in enumerate(region.lam_positions):
        flipped = bits.copy()
        flipped[:, p] ^= 1
        out += c[:, k] / n * (f.values_on(region.closure, flipped) - fx)
    return Observable(region.closure, out, f"P({f.label})")


def build_mc_lp(sys: SpinSystem, region: Region, f: Observable, sense: Sense | str = Sense.MIN,
                rate: RateFunction | None = None) -> LpProblem:
    """Normalisation row followed by one stationarity row per sigma in Sigma^Lambda (word order)."""
    sys.require_finite("the Markov-chain hierarchy")
    check_support(region, f, within="closure")
    m = len(region.closure)
    if m > MAX_RAW_CLOSURE:
        raise GuardError(f"MC LP limited to |closure| <= {MAX_RAW_CLOSURE}, got {m}")
    L = len(region.lam)
    N = 1 << m
    bits = enumerate_bits(m)
    c = rate_table(sys, region, bits, rate)
    idx = np.arange(N, dtype=np.int64)
    sigma = np.zeros(N, dtype=np.int64)
    for p in region.lam_positions:
        sigma = (sigma << 1) | bits[:, p]
    sigma += 1
    rows, cols, vals = [np.zeros(N, dtype=np.int64)], [idx], [np.ones(N)]
    for k, p in enumerate(region.lam_positions):
        flipped = idx ^ (1 << (m - 1 - p))
        rows += [sigma, sigma]
        cols += [flipped, idx]
        vals += [c[flipped, k], -c[:, k]]
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(1 + (1 << L), N))
    b = np.zeros(1 + (1 << L))
    b[0] = 1.0
    return LpProblem(f.values_on(region.closure, bits), A, b, sense)


def indicator_stationarity_rows(sys: SpinSystem, region: Region,
                                rate: RateFunction | None = None) -> np.ndarray:
    """Rows n * (P g - g) on Sigma^closure for g the indicator of each sigma in Sigma^Lambda.

    Goes through :func:`apply_P` instead of the explicit flip sums of
    :func:`build_mc_lp`, so the two assemblies can be compared entrywise.
    """
    n = sys.n
    bits = enumerate_bits(len(region.closure))
    rows = []
    for sigma in itertools.product((-1, 1), repeat=len(region.lam)):
        g = indicator(SpinConfig(region.lam, sigma))
        Pg = apply_P(sys, g, rate)
        if tuple(Pg.support) != region.closure:
            raise ContractError("closure of the indicator support differs from the region closure")
        rows.append(n * (Pg.values_on(region.closure, bits) - g.values_on(region.closure, bits)))
    return np.array(rows)


def solve_mc_raw(sys: SpinSystem, region: Region, f: Observable, strict: bool = False,
                 config: SolverConfig | None = None, rate: RateFunction | None = None) -> CertifiedInterval:
    p = build_mc_lp(sys, region, f, rate=rate)
    lo, hi = solve_both(p, config=config or RAW_CONFIG)
    return interval_from_lp(p, lo, hi, "mc", Method.RAW.value, region,
                            region_distance(sys, region, f.support), strict,
                            meta={"dropped_rate_scale": f"1/n with n={sys.n}"})


def control_arrays(sys: SpinSystem, region: Region, f: Observable,
                   rate: RateFunction | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Rates ``c[sigma, eta, k]`` and objective ``f[sigma, eta]`` in word order.

    sigma is the word of x on Lambda and eta the word of x on the external
    boundary; flipping lam[k] toggles bit ``L - 1 - k`` of sigma.
    """
    sys.require_finite("the Markov-chain hierarchy")
    check_support(region, f, within="closure")
    m = len(region.closure)
    if m > MAX_RAW_CLOSURE:
        raise GuardError(f"MC hierarchy limited to |closure| <= {MAX_RAW_CLOSURE}, got {m}")
    bits = enumerate_bits(m)
    sigma = np.zeros(1 << m, dtype=np.int64)
    eta = np.zeros(1 << m, dtype=np.int64)
    for p in region.lam_positions:
        sigma = (sigma << 1) | bits[:, p]
    for p in region.boundary_positions:
        eta = (eta << 1) | bits[:, p]
    order = np.empty((1 << len(region.lam), 1 << len(region.boundary)), dtype=np.int64)
    order[sigma, eta] = np.arange(1 << m)
    c = rate_table(sys, region, bits, rate)[order]
    fv = f.values_on(region.closure, bits)[order]
    return np.ascontiguousarray(c), np.ascontiguousarray(fv)


@numba.njit(cache=True)
def _bellman(y, f, c, phi):
    S, A, L = c.shape
    d = np.empty(L)
    for s in range(S):
        ys = y[s]
        for k in range(L):
            d[k] = y[s ^ (1 << (L - 1 - k))] - ys
        best = np.inf
        for a in range(A):
            q = f[s, a]
            for k in range(L):
                q += c[s, a, k] * d[k]
            if q < best:
                best = q
        phi[s] = best


def potential_bounds(c: np.ndarray, f: np.ndarray, config: DualConfig | None = None) -> dict:
    """Certified enclosure of min over the stationarity polytope of nu(f).

    Relative value iteration on the uniformised chain (step 1/(L+1)), with
    Anderson mixing. Returns ``lower``/``upper`` bounds on the LP minimum, the
    potential y that certifies ``lower`` and the iteration count.
    """
    cfg = config or DualConfig()
    S, _, L = c.shape
    h = 1.0 / (L + 1)
    y = np.zeros(S)
    phi = np.empty(S)
    best = (np.inf, -np.inf, np.inf, y)
    dxs, dgs = [], []
    prev = None
    it = 0
    for it in range(cfg.max_iter + 1):
        _bellman(y, f, c, phi)
        lo, hi = float(phi.min()), float(phi.max())
        if hi - lo < best[2]:
            best = (lo, hi, hi - lo, y)
        elif hi - lo > 10 * best[2]:
            # mixing went astray: restart from the best potential seen so far
            y = best[3]
            dxs, dgs, prev = [], [], None
            _bellman(y, f, c, phi)
        if best[2] <= cfg.tol or it == cfg.max_iter:
            break
        g = h * phi
        g -= g[0]
        nxt = y + g
        if cfg.memory:
            if prev is not None:
                dxs.append(y - prev[0])
                dgs.append(g - prev[1])
                if len(dxs) > cfg.memory:
                    dxs.pop(0)
                    dgs.pop(0)
            prev = (y, g)
            if dxs:
                # least squares through the small Gram system; y only needs to be a
                # good guess, the bounds are certified whatever it is
                dg = np.array(dgs)
                gamma = np.linalg.lstsq(dg @ dg.T, dg @ g, rcond=1e-12)[0]
                nxt = nxt - gamma @ (np.array(dxs) + dg)
                nxt -= nxt[0]
        y = nxt
    lo, hi, gap, y = best
    return {"lower": lo, "upper": hi, "gap": gap, "potential": y, "iterations": it,
            "converged": gap <= cfg.tol}


def _rounding_pad(c: np.ndarray, f: np.ndarray, y: np.ndarray) -> float:
    # crude bound on floating-point error in one evaluation of f + L y
    L = c.shape[2]
    scale = float(np.max(np.abs(f))) + 2.0 * L * float(np.max(np.abs(y)))
    return 4.0 * (L + 2) * np.finfo(float).eps * scale


def solve_mc_dual(sys: SpinSystem, region: Region, f: Observable, strict: bool = False,
                  config: DualConfig | None = None, rate: RateFunction | None = None) -> CertifiedInterval:
    c, fv = control_arrays(sys, region, f, rate)
    low = potential_bounds(c, fv, config)
    high = potential_bounds(c, -fv, config)
    lower, upper = low["lower"], -high["lower"]
    pad = 0.0
    if strict:
        pad = max(_rounding_pad(c, fv, low["potential"]), _rounding_pad(c, fv, high["potential"]))
        lower, upper = lower - pad, upper + pad
    S, A, _ = c.shape
    return CertifiedInterval(
        lower=lower, upper=upper, hierarchy="mc", method=Method.DUAL.value,
        lambda_size=len(region.lam), boundary_size=len(region.boundary),
        dist=region_distance(sys, region, f.support), residual=max(low["gap"], high["gap"]),
        residual_widening=pad, n_vars=S * A, n_rows=S + 1, backend="potential",
        meta={"iterations": (low["iterations"], high["iterations"]),
              "gap": (low["gap"], high["gap"]),
              "converged": bool(low["converged"] and high["converged"]),
              "dropped_rate_scale": f"1/n with n={sys.n}"})


def solve_mc(sys: SpinSystem, region: Region, f: Observable, method: Method | str = Method.AUTO,
             strict: bool = False, config: SolverConfig | DualConfig | None = None,
             rate: RateFunction | None = None) -> CertifiedInterval:
    """MC interval for mu(f); ``auto`` picks the potential iteration."""
    method = Method(method)
    if method is Method.RAW:
        return solve_mc_raw(sys, region, f, strict, config, rate)
    return solve_mc_dual(sys, region, f, strict, config, rate)
