"""Linear programs in standard form: optimise c.x subject to A x = b, x >= 0.

Two backends sit behind :func:`solve`:

* ``simplex`` -- a dense two-phase tableau simplex (Dantzig pricing with a
  lexicographic ratio test, or Bland's rule), written here and used for
  small problems;
* ``highs`` -- scipy's HiGHS, used for the large sparse LPs that the
  hierarchies produce at |closure| >= ~8.

Whatever the backend, the returned point is re-checked against the original
(un-preprocessed) problem and an OPTIMAL status is only reported when the
primal residual and bound violation are within ``feas_tol``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .errors import InputError, IterationLimitError, SolverError


class Sense(str, Enum):
    MIN = "min"
    MAX = "max"


class Status(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True, eq=False)
class LpProblem:
    """Equality-constrained LP over nonnegative variables.

    ``A`` may be a dense array or a scipy sparse matrix. ``row_map`` and
    ``infeasible`` are filled in by :func:`preprocess`.
    """

    objective: np.ndarray
    A: np.ndarray | sp.spmatrix
    b: np.ndarray
    sense: Sense = Sense.MIN
    row_map: tuple | None = None
    infeasible: bool = False

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).reshape(-1)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if sp.issparse(self.A):
            A = sp.csr_matrix(self.A, dtype=float)
            data = A.data
        else:
            A = np.asarray(self.A, dtype=float)
            if A.ndim != 2:
                A = A.reshape(b.shape[0], c.shape[0])
            data = A
        if A.shape != (b.shape[0], c.shape[0]):
            raise InputError(f"A has shape {A.shape}, expected ({b.shape[0]}, {c.shape[0]})")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(b)) and np.all(np.isfinite(data))):
            raise InputError("LP data must be finite")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "sense", Sense(self.sense))

    @property
    def num_vars(self) -> int:
        return self.objective.shape[0]

    @property
    def num_rows(self) -> int:
        return self.b.shape[0]


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: Status
    value: float
    point: np.ndarray
    primal_residual: float
    bound_violation: float
    iterations: int = 0
    backend: str = ""


@dataclass(frozen=True)
class SolverConfig:
    feas_tol: float = 1e-8
    backend: str = "auto"
    # largest rows*cols handed to the dense simplex when backend="auto"
    dense_limit: int = 50_000
    iteration_factor: int = 50
    pivot_tol: float = 1e-9
    redundancy_tol: float = 1e-8
    optimality_tol: float = 1e-11
    refresh_every: int = 25
    # "dantzig": most negative reduced cost + lexicographic ratio test; "bland": Bland's rule
    pricing: str = "dantzig"
    highs_tol: float = 1e-10
    highs_method: str = "highs-ds"
    # HiGHS presolve is very slow on the stationarity LPs; switch it off there
    highs_presolve: bool = True


def residuals(p: LpProblem, x: np.ndarray) -> tuple[float, float]:
    """(max |A x - b|, max(0, -min x)) recomputed from scratch."""
    x = np.asarray(x, dtype=float)
    r = p.A @ x - p.b
    primal = float(np.max(np.abs(r))) if r.size else 0.0
    bound = float(max(0.0, -np.min(x))) if x.size else 0.0
    return primal, bound


def preprocess(p: LpProblem) -> LpProblem:
    """Drop zero and duplicate rows and scale each row to unit max-|coefficient|.

    An all-zero row with nonzero right-hand side marks the result
    ``infeasible``. ``row_map[k]`` is the original index of kept row k.
    """
    A = sp.csr_matrix(p.A)
    keep, scales, infeasible = [], [], False
    seen = set()
    for r in range(A.shape[0]):
        lo, hi = A.indptr[r], A.indptr[r + 1]
        idx, data = A.indices[lo:hi], A.data[lo:hi]
        nz = data != 0
        idx, data = idx[nz], data[nz]
        if data.size == 0:
            if p.b[r] != 0:
                infeasible = True
            continue
        order = np.argsort(idx)
        idx, data = idx[order], data[order]
        scale = 1.0 / np.max(np.abs(data))
        if data[0] < 0:
            scale = -scale
        key = (idx.tobytes(), np.round(data * scale, 12).tobytes(), round(float(p.b[r] * scale), 12))
        if key in seen:
            continue
        seen.add(key)
        keep.append(r)
        scales.append(scale)
    keep = np.asarray(keep, dtype=np.intp)
    D = sp.diags(np.asarray(scales, dtype=float))
    A2 = D @ A[keep] if keep.size else sp.csr_matrix((0, A.shape[1]))
    b2 = p.b[keep] * np.asarray(scales) if keep.size else np.zeros(0)
    if not sp.issparse(p.A):
        A2 = A2.toarray()
    return LpProblem(p.objective, A2, b2, p.sense, tuple(int(k) for k in keep), infeasible)


def _pivot(T: np.ndarray, basis: np.ndarray, r: int, j: int) -> None:
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])
    T[:, j] = 0.0
    T[r, j] = 1.0
    basis[r] = j


class _Counter:
    def __init__(self, cap: int):
        self.cap = cap
        self.n = 0

    def tick(self) -> None:
        self.n += 1
        if self.n > self.cap:
            raise IterationLimitError(f"simplex iteration cap {self.cap} exceeded")


class _Tableau:
    """Dense tableau for ``M x = rhs`` with a cost vector.

    ``M`` ends with an identity block (the artificial columns), whose image
    B^{-1} drives the lexicographic ratio test; only the first ``n_enter``
    columns may enter the basis. The body is rebuilt as B^{-1}[M | rhs] from
    the untouched data every ``refresh_every`` pivots so round-off does not
    pile up over long degenerate pivot sequences.
    """

    def __init__(self, M: np.ndarray, rhs: np.ndarray, cost: np.ndarray, basis: np.ndarray,
                 n_enter: int, cfg: SolverConfig, counter: _Counter):
        self.M, self.rhs, self.cost = M, rhs, cost
        self.basis = basis
        self.n_enter = n_enter
        self.lex = np.arange(M.shape[1] - M.shape[0], M.shape[1])
        self.cfg = cfg
        self.counter = counter
        self.T = np.zeros((M.shape[0] + 1, M.shape[1] + 1))
        self.refresh()

    def refresh(self) -> None:
        T = self.T
        try:
            T[:-1] = np.linalg.solve(self.M[:, self.basis], np.column_stack([self.M, self.rhs]))
        except np.linalg.LinAlgError:
            if not T[:-1].any():
                raise SolverError("singular starting basis") from None
        cb = self.cost[self.basis]
        T[-1, :-1] = self.cost - cb @ T[:-1, :-1]
        T[-1, -1] = -cb @ T[:-1, -1]

    def pivot(self, r: int, j: int) -> None:
        _pivot(self.T, self.basis, r, j)
        self.counter.tick()
        if self.counter.n % self.cfg.refresh_every == 0:
            self.refresh()

    def _entering(self) -> int | None:
        d = self.T[-1, :self.n_enter]
        if self.cfg.pricing == "bland":
            cand = np.flatnonzero(d < -self.cfg.optimality_tol)
            return int(cand[0]) if cand.size else None
        j = int(np.argmin(d))
        return j if d[j] < -self.cfg.optimality_tol else None

    def _leaving(self, j: int) -> int | None:
        T = self.T
        col = T[:-1, j]
        cand = np.flatnonzero(col > self.cfg.pivot_tol)
        if cand.size == 0:
            return None
        # round-off can leave rhs entries at -1e-17; a negative ratio would break feasibility
        keys = [np.maximum(T[:-1, -1], 0.0)]
        if self.cfg.pricing != "bland":
            keys += [T[:-1, k] for k in self.lex]
        for key in keys:
            ratios = key[cand] / col[cand]
            best = ratios.min()
            cand = cand[ratios <= best + 1e-12 * (1.0 + abs(best))]
            if cand.size == 1:
                return int(cand[0])
        return int(cand[np.argmin(self.basis[cand])])

    def run(self) -> Status:
        while True:
            j = self._entering()
            if j is None:
                self.refresh()
                if self._entering() is not None:
                    continue
                return Status.OPTIMAL
            r = self._leaving(j)
            if r is None:
                return Status.UNBOUNDED
            self.pivot(r, j)


def _dense_simplex(A: np.ndarray, b: np.ndarray, c: np.ndarray, feas_tol: float,
                   cfg: SolverConfig) -> tuple[Status, np.ndarray, int]:
    m, n = A.shape
    counter = _Counter(cfg.iteration_factor * (m + n))
    if m == 0:
        if np.any(c < -cfg.optimality_tol):
            return Status.UNBOUNDED, np.zeros(n), 0
        return Status.OPTIMAL, np.zeros(n), 0
    A = A.copy()
    b = b.copy()
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    # phase 1: minimise the sum of one artificial per row
    cost1 = np.concatenate([np.zeros(n), np.ones(m)])
    tab = _Tableau(np.hstack([A, np.eye(m)]), b, cost1, np.arange(n, n + m), n + m, cfg, counter)
    tab.run()
    if -tab.T[-1, -1] > feas_tol:
        return Status.INFEASIBLE, np.zeros(n), counter.n

    # pivot zero-level artificials out; an artificial stuck in an all-zero row
    # marks its own original constraint as a combination of the others
    stuck = []
    for r in range(m):
        if tab.basis[r] >= n:
            row = np.abs(tab.T[r, :n])
            j = int(np.argmax(row))
            if row[j] > cfg.redundancy_tol:
                tab.pivot(r, j)
            else:
                stuck.append(r)
    keep = np.ones(m, dtype=bool)
    keep[tab.basis[stuck] - n] = False
    rows = np.flatnonzero(keep)
    basis2 = np.delete(tab.basis, stuck)

    # phase 2 keeps an identity block (never entering) for the lexicographic rule
    k = rows.size
    M2 = np.hstack([A[rows], np.eye(k)])
    tab2 = _Tableau(M2, b[rows], np.concatenate([c, np.zeros(k)]), basis2, n, cfg, counter)
    status = tab2.run()
    if status is Status.UNBOUNDED:
        return status, np.zeros(n), counter.n
    x = np.zeros(n)
    x[tab2.basis] = tab2.T[:-1, -1]
    return Status.OPTIMAL, x, counter.n


def _highs(A, b: np.ndarray, c: np.ndarray, cfg: SolverConfig) -> tuple[Status, np.ndarray, int]:
    opts = {"primal_feasibility_tolerance": cfg.highs_tol,
            "dual_feasibility_tolerance": cfg.highs_tol, "presolve": cfg.highs_presolve}
    res = linprog(c, A_eq=A if A.shape[0] else None, b_eq=b if A.shape[0] else None,
                  bounds=(0, None), method=cfg.highs_method, options=opts)
    iters = int(getattr(res, "nit", 0) or 0)
    if res.status == 0:
        return Status.OPTIMAL, np.asarray(res.x, dtype=float), iters
    if res.status == 2:
        return Status.INFEASIBLE, np.zeros(len(c)), iters
    if res.status == 3:
        return Status.UNBOUNDED, np.zeros(len(c)), iters
    if res.status == 1:
        raise IterationLimitError(f"HiGHS iteration limit: {res.message}")
    raise SolverError(f"HiGHS failed: {res.message}")


def _pick_backend(p: LpProblem, cfg: SolverConfig) -> str:
    if cfg.backend != "auto":
        return cfg.backend
    return "simplex" if p.num_rows * p.num_vars <= cfg.dense_limit else "highs"


def solve_preprocessed(original: LpProblem, pre: LpProblem, sense: Sense | str,
                       feas_tol: float | None = None, config: SolverConfig | None = None) -> LpSolution:
    """Solve ``pre`` (the output of :func:`preprocess`) and verify on ``original``."""
    cfg = config or SolverConfig()
    tol = cfg.feas_tol if feas_tol is None else feas_tol
    sense = Sense(sense)
    n = original.num_vars
    if pre.infeasible:
        return LpSolution(Status.INFEASIBLE, float("nan"), np.zeros(n), float("nan"), float("nan"),
                          0, "preprocess")
    c = original.objective if sense is Sense.MIN else -original.objective
    backend = _pick_backend(pre, cfg)
    if backend == "simplex":
        A = pre.A.toarray() if sp.issparse(pre.A) else pre.A
        status, x, iters = _dense_simplex(A, pre.b, c, tol, cfg)
    elif backend == "highs":
        status, x, iters = _highs(sp.csr_matrix(pre.A), pre.b, c, cfg)
    else:
        raise InputError(f"unknown LP backend {backend!r}")
    if status is not Status.OPTIMAL:
        return LpSolution(status, float("nan"), x, float("nan"), float("nan"), iters, backend)
    primal, bound = residuals(original, x)
    if primal > tol or bound > tol:
        raise SolverError(f"{backend} returned a point with residual {primal:.3g} / "
                          f"bound violation {bound:.3g} above feas_tol {tol:.1g}")
    value = float(original.objective @ x)
    return LpSolution(status, value, x, primal, bound, iters, backend)


def solve(p: LpProblem, feas_tol: float | None = None, config: SolverConfig | None = None) -> LpSolution:
    return solve_preprocessed(p, preprocess(p), p.sense, feas_tol, config)


def solve_both(p: LpProblem, feas_tol: float | None = None,
               config: SolverConfig | None = None) -> tuple[LpSolution, LpSolution]:
    """(minimum, maximum) of the same LP, preprocessing once."""
    pre = preprocess(p)
    return (solve_preprocessed(p, pre, Sense.MIN, feas_tol, config),
            solve_preprocessed(p, pre, Sense.MAX, feas_tol, config))


def with_sense(p: LpProblem, sense: Sense | str) -> LpProblem:
    return replace(p, sense=Sense(sense))


def _mps_num(v: float) -> str:
    s = f"{v:.12g}"
    return s if len(s) <= 12 else f"{v:.5e}"


def write_mps(p: LpProblem, path, name: str = "GIBBSLP") -> None:
    """Fixed-column MPS dump for cross-checking with external solvers.

    Rows are named R0000001..., columns C0000001...; variables keep the
    default lower bound 0 and no upper bound. Numbers are limited to the
    12-character field, so very long mantissas are rounded.
    """
    A = sp.csc_matrix(p.A)
    lines = [f"NAME          {name[:8]}"]
    if p.sense is Sense.MAX:
        lines += ["OBJSENSE", "    MAX"]
    lines += ["ROWS", " N  OBJ"]
    lines += [f" E  R{r + 1:07d}" for r in range(p.num_rows)]
    lines.append("COLUMNS")
    for j in range(p.num_vars):
        col = f"C{j + 1:07d}"
        entries = []
        if p.objective[j] != 0:
            entries.append(("OBJ", p.objective[j]))
        lo, hi = A.indptr[j], A.indptr[j + 1]
        entries += [(f"R{r + 1:07d}", v) for r, v in zip(A.indices[lo:hi], A.data[lo:hi]) if v != 0]
        if not entries:
            entries = [("OBJ", 0.0)]
        for k in range(0, len(entries), 2):
            pair = entries[k:k + 2]
            line = f"    {col:<8}  {pair[0][0]:<8}  {_mps_num(pair[0][1]):>12}"
            if len(pair) == 2:
                line += f"   {pair[1][0]:<8}  {_mps_num(pair[1][1]):>12}"
            lines.append(line)
    lines.append("RHS")
    for r in range(p.num_rows):
        if p.b[r] != 0:
            lines.append(f"    {'RHS':<8}  R{r + 1:07d}  {_mps_num(p.b[r]):>12}")
    lines.append("ENDATA")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
