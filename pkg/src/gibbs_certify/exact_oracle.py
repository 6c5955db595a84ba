"""Exact ground truth by enumeration, plus a transfer-matrix fast path for 1D.

All Boltzmann sums subtract the running maximum exponent so that large
beta * |Lambda| never overflows. Enumeration runs in fixed-size blocks in a
fixed order, so results are deterministic.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ContractError, GuardError
from .observable import Observable, is_spin_product
from .spin_model import (BoundaryCondition, Region, SpinSystem, enumerate_bits, index_bits,
                         spin_to_bit)

MAX_SITES = 24
MAX_BOUNDARY = 22
_BLOCK = 1 << 18


class _Accumulator:
    """Streaming log-sum-exp of weights and weighted observable sums."""

    def __init__(self):
        self.shift = -math.inf
        self.z = 0.0
        self.fz = 0.0

    def add(self, logw: np.ndarray, fvals: np.ndarray | None) -> None:
        m = float(np.max(logw))
        w = np.exp(logw - m)
        s = float(np.sum(w))
        fs = float(np.dot(w, fvals)) if fvals is not None else 0.0
        if m > self.shift:
            scale = math.exp(self.shift - m) if self.shift > -math.inf else 0.0
            self.z, self.fz, self.shift = self.z * scale + s, self.fz * scale + fs, m
        else:
            scale = math.exp(m - self.shift)
            self.z += s * scale
            self.fz += fs * scale

    @property
    def log_z(self) -> float:
        return self.shift + math.log(self.z)

    @property
    def mean(self) -> float:
        return self.fz / self.z


def _word_values(f: Observable, idx: np.ndarray, m: int, positions: dict) -> np.ndarray:
    w = np.zeros(idx.shape[0], dtype=np.int64)
    for s in f.support:
        w = (w << 1) | index_bits(idx, m, positions[s])
    return f.values[w]


def _enumerate(m: int, pairs, unary, beta: float, f: Observable | None, positions: dict) -> _Accumulator:
    """Sum e^{-beta E(x)} (and f-weighted) over all x in Sigma^m.

    ``pairs`` are ``(p, q, table)`` and ``unary`` are ``(p, vec)`` terms with
    ``vec[bit]`` the single-site energy.
    """
    acc = _Accumulator()
    total = 1 << m
    for start in range(0, total, _BLOCK):
        idx = np.arange(start, min(start + _BLOCK, total), dtype=np.int64)
        energy = np.zeros(idx.shape[0])
        for p, q, t in pairs:
            energy += t[index_bits(idx, m, p), index_bits(idx, m, q)]
        for p, vec in unary:
            energy += vec[index_bits(idx, m, p)]
        fvals = _word_values(f, idx, m, positions) if f is not None else None
        acc.add(-beta * energy, fvals)
    return acc


def _global_sums(sys: SpinSystem, f: Observable | None) -> _Accumulator:
    sys.require_finite("brute-force Gibbs sums")
    n = sys.n
    if n > MAX_SITES:
        raise GuardError(f"brute force limited to {MAX_SITES} sites, system has {n}")
    positions = {s: s for s in range(n)}
    if f is not None and not all(s in positions for s in f.support):
        raise ContractError(f"support {f.support} is not inside the system")
    pairs = [(i, j, t) for (i, j), t in zip(sys.edges, sys.tables)]
    return _enumerate(n, pairs, (), sys.beta, f, positions)


def partition_function(sys: SpinSystem) -> float:
    """log Z of the whole finite system."""
    return _global_sums(sys, None).log_z


def expectation(sys: SpinSystem, f: Observable) -> float:
    return _global_sums(sys, f).mean


def _check_local(region: Region, f: Observable) -> None:
    if not set(f.support) <= set(region.lam):
        raise ContractError(f"support {f.support} is not contained in the region")
    if len(region.lam) > MAX_SITES:
        raise GuardError(f"local enumeration limited to {MAX_SITES} sites, region has {len(region.lam)}")


def local_gibbs_expectation(sys: SpinSystem, region: Region, eta: BoundaryCondition,
                            f: Observable) -> float:
    """Expectation of f in the Gibbs state on Lambda with boundary spins eta."""
    _check_local(region, f)
    if tuple(eta.sites) != region.boundary:
        raise ContractError("boundary condition must cover exactly the external boundary")
    lam_index = {s: k for k, s in enumerate(region.lam)}
    closure_to_lam = {region.index[s]: k for s, k in lam_index.items()}
    pairs = [(closure_to_lam[p], closure_to_lam[q], t) for p, q, t in region.inner_edges]
    unary = []
    for p, q, t in region.boundary_edges:
        b = spin_to_bit(eta[region.closure[q]])
        unary.append((closure_to_lam[p], t[:, b]))
    return _enumerate(len(region.lam), pairs, unary, sys.beta, f, lam_index).mean


def local_gibbs_expectations(sys: SpinSystem, region: Region, f: Observable) -> np.ndarray:
    """mu_Lambda^eta(f) for every boundary condition, indexed by the word of eta."""
    _check_local(region, f)
    nb = len(region.boundary)
    if nb > MAX_BOUNDARY:
        raise GuardError(f"boundary enumeration limited to {MAX_BOUNDARY} sites, boundary has {nb}")
    L = len(region.lam)
    if L > 20:
        return np.array([
            local_gibbs_expectation(sys, region, BoundaryCondition.from_word(region.boundary, w), f)
            for w in range(1 << nb)])
    closure_to_lam = {region.index[s]: k for k, s in enumerate(region.lam)}
    xbits = enumerate_bits(L)
    inner = np.zeros(1 << L)
    for p, q, t in region.inner_edges:
        inner += t[xbits[:, closure_to_lam[p]], xbits[:, closure_to_lam[q]]]
    boundary_pos = {q: k for k, q in enumerate(region.boundary_positions)}
    fields = np.zeros((nb, 1 << L, 2))
    for p, q, t in region.boundary_edges:
        fields[boundary_pos[q]] += t[xbits[:, closure_to_lam[p]]]
    fvals = f.values_on(region.lam, xbits)
    out = np.empty(1 << nb)
    block = max(1, (1 << 22) >> L)
    for start in range(0, 1 << nb, block):
        words = np.arange(start, min(start + block, 1 << nb), dtype=np.int64)
        energy = np.broadcast_to(inner, (words.shape[0], 1 << L)).copy()
        for k in range(nb):
            eb = index_bits(words, nb, k)
            energy += fields[k][:, eb].T
        logw = -sys.beta * energy
        logw -= logw.max(axis=1, keepdims=True)
        w = np.exp(logw)
        out[start:start + words.shape[0]] = (w @ fvals) / w.sum(axis=1)
    return out


def boundary_gap(sys: SpinSystem, region: Region, f: Observable) -> float:
    """sup over boundary pairs (eta, tau) of |mu^eta(f) - mu^tau(f)|, one eta at a time."""
    _check_local(region, f)
    nb = len(region.boundary)
    if nb > MAX_BOUNDARY:
        raise GuardError(f"boundary enumeration limited to {MAX_BOUNDARY} sites, boundary has {nb}")
    lo, hi = math.inf, -math.inf
    for w in range(1 << nb):
        v = local_gibbs_expectation(sys, region, BoundaryCondition.from_word(region.boundary, w), f)
        lo, hi = min(lo, v), max(hi, v)
    return hi - lo


def transfer_matrix_expectation(sys: SpinSystem, f: Observable) -> float:
    """Exact spin-product expectation on an open chain or a cycle via 2x2 transfer matrices."""
    if sys.lattice not in ("chain", "cycle"):
        raise ContractError(f"transfer matrices need a chain or cycle, got {sys.lattice}")
    if not is_spin_product(f):
        raise ContractError("transfer_matrix_expectation supports spin products only")
    n = sys.n
    marked = set(f.support)
    if not marked <= set(range(n)):
        raise ContractError(f"support {f.support} is not inside the system")
    transfer = [np.exp(-sys.beta * t) for t in sys.tables]
    diag = np.array([-1.0, 1.0])

    def site_weight(k, with_f):
        return diag if (with_f and k in marked) else np.ones(2)

    def open_chain(with_f):
        v = site_weight(0, with_f).copy()
        log_scale = 0.0
        for k in range(n - 1):
            v = (v @ transfer[k]) * site_weight(k + 1, with_f)
            m = np.max(np.abs(v))
            if m == 0.0:
                return 0.0, 0.0
            v /= m
            log_scale += math.log(m)
        return float(np.sum(v)), log_scale

    def closed_chain(with_f):
        M = np.eye(2)
        log_scale = 0.0
        for k in range(n):
            M = (M * site_weight(k, with_f)) @ transfer[k]
            m = np.max(np.abs(M))
            if m == 0.0:
                return 0.0, 0.0
            M /= m
            log_scale += math.log(m)
        return float(np.trace(M)), log_scale

    run = open_chain if sys.lattice == "chain" else closed_chain
    num, ln = run(True)
    den, ld = run(False)
    if num == 0.0:
        return 0.0
    return num / den * math.exp(ln - ld)
