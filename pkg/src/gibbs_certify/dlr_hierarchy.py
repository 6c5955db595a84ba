"""Spin-flip (DLR) relaxation: LP over distributions on the closure of a region.

Two routes to the same interval:

* ``raw`` builds the LP over nu in D(Sigma^closure) with one spin-flip
  equality per (i in Lambda, x with x_i = +1) and solves it twice;
* ``reduced`` uses the fact that every feasible nu is a mixture of local
  Gibbs states over boundary conditions, so the extremes are attained at
  single boundary conditions and can be found by enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
import scipy.sparse as sp

from . import exact_oracle
from .errors import ContractError, GuardError, SolverError
from .lp_solver import LpProblem, LpSolution, Sense, SolverConfig, Status, solve_both
from .observable import Observable
from .spin_model import Region, SpinSystem, distance_to_complement, enumerate_bits, region_gradients

MAX_RAW_CLOSURE = 16


class Method(str, Enum):
    RAW = "raw"
    REDUCED = "reduced"
    AUTO = "auto"


@dataclass(frozen=True)
class CertifiedInterval:
    """[lower, upper] guaranteed to contain mu(f), with provenance."""

    lower: float
    upper: float
    hierarchy: str
    method: str
    lambda_size: int
    boundary_size: int
    dist: float
    residual: float = 0.0
    residual_widening: float = 0.0
    n_vars: int = 0
    n_rows: int = 0
    backend: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.lower > self.upper:
            # vertex optima of the same LP can cross by rounding only
            if self.lower - self.upper > 1e-9 * max(1.0, abs(self.lower)):
                raise SolverError(f"lower bound {self.lower} exceeds upper bound {self.upper}")
            lo, hi = self.upper, self.lower
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.upper + self.lower)

    def contains(self, value: float, slack: float = 0.0) -> bool:
        return self.lower - slack <= value <= self.upper + slack

    def widened(self, objective_l1: float) -> "CertifiedInterval":
        """Strict mode: pad both ends by residual * ||c||_1."""
        pad = self.residual * objective_l1
        return replace(self, lower=self.lower - pad, upper=self.upper + pad, residual_widening=pad)


def check_support(region: Region, f: Observable, within: str = "lam") -> None:
    allowed = set(region.lam) if within == "lam" else set(region.closure)
    if not set(f.support) <= allowed:
        where = "Lambda" if within == "lam" else "the closure of Lambda"
        raise ContractError(f"support {f.support} is not contained in {where}")


def region_distance(sys: SpinSystem, region: Region, B) -> float:
    B = tuple(B)
    if not B:
        return math.nan
    if not set(B) <= set(region.lam):
        return 0.0
    return distance_to_complement(sys, region, B)


def build_dlr_lp(sys: SpinSystem, region: Region, f: Observable, sense: Sense | str = Sense.MIN) -> LpProblem:
    """Normalisation row plus one spin-flip row per (i in Lambda, x with x_i = +1).

    The row nu(x) - e^{g} nu(x^i) = 0 (g = grad_H(x, i)) is divided by
    max(1, e^{g}) so no coefficient exceeds 1 in magnitude.
    """
    check_support(region, f)
    m = len(region.closure)
    if m > MAX_RAW_CLOSURE:
        raise GuardError(f"raw LP limited to |closure| <= {MAX_RAW_CLOSURE}, got {m}")
    N = 1 << m
    bits = enumerate_bits(m)
    grads = region_gradients(sys, region, bits)
    idx = np.arange(N, dtype=np.int64)
    rows = [np.zeros(N, dtype=np.int64)]
    cols = [idx]
    vals = [np.ones(N)]
    next_row = 1
    for k, p in enumerate(region.lam_positions):
        sel = idx[bits[:, p] == 1]
        partner = sel ^ (1 << (m - 1 - p))
        g = grads[sel, k]
        r = np.arange(next_row, next_row + sel.size, dtype=np.int64)
        rows += [r, r]
        cols += [sel, partner]
        vals += [np.exp(-np.maximum(g, 0.0)), -np.exp(np.minimum(g, 0.0))]
        next_row += sel.size
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(next_row, N))
    b = np.zeros(next_row)
    b[0] = 1.0
    return LpProblem(f.values_on(region.closure, bits), A, b, sense)


def interval_from_lp(p: LpProblem, lo: LpSolution, hi: LpSolution, hierarchy: str, method: str,
                     region: Region, dist: float, strict: bool, meta: dict | None = None) -> CertifiedInterval:
    for sol in (lo, hi):
        if sol.status is not Status.OPTIMAL:
            raise SolverError(f"{hierarchy} LP reported {sol.status.value}; the true marginal should be feasible")
    interval = CertifiedInterval(
        lower=lo.value, upper=hi.value, hierarchy=hierarchy, method=method,
        lambda_size=len(region.lam), boundary_size=len(region.boundary), dist=dist,
        residual=max(lo.primal_residual, hi.primal_residual, lo.bound_violation, hi.bound_violation),
        n_vars=p.num_vars, n_rows=p.num_rows, backend=f"{lo.backend}", meta=dict(meta or {}))
    if strict:
        interval = interval.widened(float(np.sum(np.abs(p.objective))))
    return interval


def solve_dlr_raw(sys: SpinSystem, region: Region, f: Observable, strict: bool = False,
                  config: SolverConfig | None = None) -> CertifiedInterval:
    p = build_dlr_lp(sys, region, f)
    lo, hi = solve_both(p, config=config)
    return interval_from_lp(p, lo, hi, "dlr", Method.RAW.value, region,
                            region_distance(sys, region, f.support), strict)


def solve_dlr_reduced(sys: SpinSystem, region: Region, f: Observable) -> CertifiedInterval:
    """Extremes over boundary conditions of the local Gibbs expectation of f."""
    check_support(region, f)
    values = exact_oracle.local_gibbs_expectations(sys, region, f)
    lo_w, hi_w = int(np.argmin(values)), int(np.argmax(values))
    return CertifiedInterval(
        lower=float(values[lo_w]), upper=float(values[hi_w]), hierarchy="dlr",
        method=Method.REDUCED.value, lambda_size=len(region.lam), boundary_size=len(region.boundary),
        dist=region_distance(sys, region, f.support), n_vars=values.size,
        meta={"argmin_boundary_word": lo_w, "argmax_boundary_word": hi_w})


def solve_dlr(sys: SpinSystem, region: Region, f: Observable, method: Method | str = Method.AUTO,
              strict: bool = False, config: SolverConfig | None = None) -> CertifiedInterval:
    method = Method(method)
    if method is Method.AUTO:
        method = Method.REDUCED if len(region.boundary) <= exact_oracle.MAX_BOUNDARY else Method.RAW
    if method is Method.RAW:
        return solve_dlr_raw(sys, region, f, strict, config)
    return solve_dlr_reduced(sys, region, f)
