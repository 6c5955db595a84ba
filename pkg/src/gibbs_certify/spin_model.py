"""Spin systems with symmetric two-site interactions, configurations and regions.

Spins take values in {-1, +1}. Internally a spin is stored as a bit
(0 <-> -1, 1 <-> +1) so that interaction tables can be indexed directly:
``table[bit(x_i), bit(x_j)] == h_ij(x_i, x_j)``.

Configurations over a site tuple are enumerated lexicographically with the
first (smallest) site as the most significant bit and -1 ordered before +1,
i.e. in the same order as ``itertools.product((-1, 1), repeat=m)``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from .errors import ContractError, ImplicitLatticeError, InputError

Site = Hashable

FERRO = np.array([[-1.0, 1.0], [1.0, -1.0]])
ANTIFERRO = -FERRO

FINITE_LATTICES = ("chain", "cycle", "grid2d", "explicit")
IMPLICIT_LATTICES = ("infinite_chain", "infinite_grid2d")


def ising_table(coupling: float = 1.0) -> np.ndarray:
    """Table of ``h(a, b) = -coupling * a * b`` (ferromagnetic for coupling > 0)."""
    return coupling * FERRO


def as_table(values) -> np.ndarray:
    """Coerce a 2x2 array or a flat ``[h(-,-), h(-,+), h(+,-), h(+,+)]`` list."""
    arr = np.array(values, dtype=float)
    if arr.shape == (4,):
        arr = arr.reshape(2, 2)
    if arr.shape != (2, 2):
        raise InputError(f"interaction table must have 4 entries, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError("interaction table entries must be finite")
    if arr[0, 1] != arr[1, 0]:
        raise InputError(f"interaction table is not symmetric: h(-,+)={arr[0, 1]} != h(+,-)={arr[1, 0]}")
    arr.setflags(write=False)
    return arr


def spin_to_bit(s: int) -> int:
    return (s + 1) >> 1


@dataclass(frozen=True, eq=False)
class SpinSystem:
    """Graph, symmetric two-site interaction tables and inverse temperature.

    Finite systems have sites ``0..n_sites-1`` and an explicit edge list with
    one table per edge. Implicit lattices (``infinite_chain`` with integer
    sites, ``infinite_grid2d`` with ``(row, col)`` sites) carry a single
    translation-invariant ``bulk_table`` and only support region-local work.
    """

    beta: float
    lattice: str
    edges: tuple = ()
    tables: tuple = ()
    n_sites: int | None = None
    dims: tuple | None = None
    bulk_table: np.ndarray | None = None

    def __post_init__(self):
        beta = float(self.beta)
        if not math.isfinite(beta) or beta < 0:
            raise InputError(f"beta must be a finite nonnegative number, got {self.beta}")
        object.__setattr__(self, "beta", beta)
        if self.lattice in IMPLICIT_LATTICES:
            if self.bulk_table is None:
                raise InputError("implicit lattices need a bulk_table")
            object.__setattr__(self, "bulk_table", as_table(self.bulk_table))
            object.__setattr__(self, "_adj", None)
            return
        if self.lattice not in FINITE_LATTICES:
            raise InputError(f"unknown lattice type {self.lattice!r}")
        n = self.n_sites
        if n is None or int(n) != n or n < 1:
            raise InputError(f"finite systems need n_sites >= 1, got {n}")
        edges = tuple((int(i), int(j)) for i, j in self.edges)
        if len(self.tables) != len(edges):
            raise InputError(f"{len(edges)} edges but {len(self.tables)} tables")
        tables = tuple(as_table(t) for t in self.tables)
        adj: dict[int, list] = {i: [] for i in range(n)}
        seen = set()
        for (i, j), t in zip(edges, tables):
            if i == j:
                raise InputError(f"self-loop at site {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise InputError(f"edge ({i}, {j}) has an endpoint outside 0..{n - 1}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise InputError(f"duplicate edge {key}")
            seen.add(key)
            adj[i].append((j, t))
            adj[j].append((i, t))
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "tables", tables)
        object.__setattr__(self, "_adj", {i: tuple(v) for i, v in adj.items()})

    @property
    def is_finite(self) -> bool:
        return self.lattice in FINITE_LATTICES

    def require_finite(self, what: str = "this operation") -> None:
        if not self.is_finite:
            raise ImplicitLatticeError(f"{what} needs a finite site set; {self.lattice} has none")

    @property
    def sites(self) -> tuple:
        self.require_finite("enumerating all sites")
        return tuple(range(self.n_sites))

    @property
    def n(self) -> int:
        self.require_finite("the system size n")
        return self.n_sites

    def has_site(self, i) -> bool:
        if self.lattice == "infinite_chain":
            return isinstance(i, (int, np.integer)) and not isinstance(i, bool)
        if self.lattice == "infinite_grid2d":
            return (isinstance(i, tuple) and len(i) == 2
                    and all(isinstance(c, (int, np.integer)) and not isinstance(c, bool) for c in i))
        return isinstance(i, (int, np.integer)) and not isinstance(i, bool) and 0 <= i < self.n_sites

    def incident(self, i) -> tuple:
        """Pairs ``(j, table)`` for every edge {i, j}."""
        if self.lattice == "infinite_chain":
            return ((i - 1, self.bulk_table), (i + 1, self.bulk_table))
        if self.lattice == "infinite_grid2d":
            r, c = i
            t = self.bulk_table
            return (((r - 1, c), t), ((r, c - 1), t), ((r, c + 1), t), ((r + 1, c), t))
        return self._adj[i]

    def neighbors(self, i) -> tuple:
        return tuple(j for j, _ in self.incident(i))

    @property
    def max_degree(self) -> int:
        if self.lattice == "infinite_chain":
            return 2
        if self.lattice == "infinite_grid2d":
            return 4
        return max((len(v) for v in self._adj.values()), default=0)

    def effective_coupling(self) -> float:
        """Largest |J_e| with ``J_e = (h(+,-) + h(-,+) - h(+,+) - h(-,-)) / 4``.

        For Ising tables ``-J x_i x_j`` this is |J|; it feeds the
        ``Delta * tanh(beta * J) < 1`` fast-mixing flag.
        """
        tables = (self.bulk_table,) if not self.is_finite else self.tables
        return max((abs(t[1, 0] + t[0, 1] - t[1, 1] - t[0, 0]) / 4 for t in tables), default=0.0)

    def fast_mixing_flag(self) -> bool:
        return self.max_degree * math.tanh(self.beta * self.effective_coupling()) < 1


def _per_edge(tables, m: int) -> list:
    # a lone 2x2 or flat 4-entry table is shared by every edge
    if np.shape(tables) in ((2, 2), (4,)):
        return [tables] * m
    tables = list(tables)
    if len(tables) != m:
        raise InputError(f"expected {m} per-edge tables, got {len(tables)}")
    return tables


def from_edges(n: int, edges: Sequence, beta: float, tables=FERRO, lattice: str = "explicit",
               dims: tuple | None = None) -> SpinSystem:
    """Finite system from an explicit edge list (one table, or one per edge)."""
    edges = [tuple(e) for e in edges]
    return SpinSystem(beta=beta, lattice=lattice, edges=tuple(edges),
                      tables=tuple(_per_edge(tables, len(edges))), n_sites=n, dims=dims)


def chain(n: int, beta: float, tables=FERRO) -> SpinSystem:
    """Open chain 0-1-...-(n-1); edge k joins sites k and k+1."""
    return from_edges(n, [(k, k + 1) for k in range(n - 1)], beta, tables, "chain", (n,))


def cycle(n: int, beta: float, tables=FERRO) -> SpinSystem:
    """Periodic chain; edge k joins k and k+1, the last edge closes (n-1, 0)."""
    if n < 3:
        raise InputError("a cycle needs at least 3 sites")
    return from_edges(n, [(k, (k + 1) % n) for k in range(n)], beta, tables, "cycle", (n,))


def grid2d(rows: int, cols: int, beta: float, tables=FERRO) -> SpinSystem:
    """Open rows x cols grid, site id ``r * cols + c``; edges listed right then down per site."""
    edges = []
    for r in range(rows):
        for c in range(cols):
            s = r * cols + c
            if c + 1 < cols:
                edges.append((s, s + 1))
            if r + 1 < rows:
                edges.append((s, s + cols))
    return from_edges(rows * cols, edges, beta, tables, "grid2d", (rows, cols))


def infinite_chain(beta: float, table=FERRO) -> SpinSystem:
    return SpinSystem(beta=beta, lattice="infinite_chain", bulk_table=table, dims=(1,))


def infinite_grid2d(beta: float, table=FERRO) -> SpinSystem:
    return SpinSystem(beta=beta, lattice="infinite_grid2d", bulk_table=table, dims=(2,))


@dataclass(frozen=True)
class SpinConfig:
    """Assignment of +-1 to a finite set of sites, stored in ascending site order."""

    sites: tuple
    values: tuple

    def __post_init__(self):
        sites = tuple(self.sites)
        values = tuple(int(v) for v in self.values)
        if len(sites) != len(values):
            raise ContractError(f"{len(sites)} sites but {len(values)} values")
        if any(v not in (-1, 1) for v in values):
            raise ContractError("spin values must be -1 or +1")
        order = sorted(range(len(sites)), key=lambda k: sites[k])
        sites = tuple(sites[k] for k in order)
        values = tuple(values[k] for k in order)
        index = {s: k for k, s in enumerate(sites)}
        if len(index) != len(sites):
            raise ContractError("duplicate site in configuration")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_mapping(cls, mapping: Mapping) -> "SpinConfig":
        return cls(tuple(mapping.keys()), tuple(mapping.values()))

    @classmethod
    def from_word(cls, sites: Sequence, word: int) -> "SpinConfig":
        sites = tuple(sorted(sites))
        m = len(sites)
        return cls(sites, tuple(1 if (word >> (m - 1 - k)) & 1 else -1 for k in range(m)))

    @classmethod
    def uniform(cls, sites: Iterable, value: int = 1) -> "SpinConfig":
        sites = tuple(sites)
        return cls(sites, (value,) * len(sites))

    @property
    def word(self) -> int:
        w = 0
        for v in self.values:
            w = (w << 1) | spin_to_bit(v)
        return w

    def __getitem__(self, site) -> int:
        try:
            return self.values[self._index[site]]
        except KeyError:
            raise ContractError(f"site {site!r} is not covered by this configuration") from None

    def __contains__(self, site) -> bool:
        return site in self._index

    def __len__(self) -> int:
        return len(self.sites)

    def covers(self, sites: Iterable) -> bool:
        return all(s in self._index for s in sites)

    def flip(self, i) -> "SpinConfig":
        k = self._index.get(i)
        if k is None:
            raise ContractError(f"cannot flip site {i!r}: not covered")
        values = list(self.values)
        values[k] = -values[k]
        return SpinConfig(self.sites, tuple(values))

    def restrict(self, sites: Iterable) -> "SpinConfig":
        sites = tuple(sites)
        return SpinConfig(sites, tuple(self[s] for s in sites))

    def merge(self, other: "SpinConfig") -> "SpinConfig":
        """Union of two configurations on disjoint site sets."""
        if any(s in self._index for s in other.sites):
            raise ContractError("cannot merge configurations with overlapping sites")
        return SpinConfig(self.sites + other.sites, self.values + other.values)

    def as_dict(self) -> dict:
        return dict(zip(self.sites, self.values))


BoundaryCondition = SpinConfig


@dataclass(frozen=True, eq=False)
class Region:
    """A finite set Lambda with its external boundary and closure.

    ``index`` maps each closure site to its position in ``closure`` (sorted).
    ``inner_edges`` hold ``(p, q, table)`` closure positions of edges inside
    Lambda; ``boundary_edges`` hold ``(p, q, table)`` with p in Lambda and q on
    the boundary. Edges between two boundary sites never enter a local
    Hamiltonian and are not stored.
    """

    lam: tuple
    boundary: tuple
    closure: tuple
    index: dict
    inner_edges: tuple
    boundary_edges: tuple

    @property
    def lam_positions(self) -> tuple:
        return tuple(self.index[s] for s in self.lam)

    @property
    def boundary_positions(self) -> tuple:
        return tuple(self.index[s] for s in self.boundary)

    def __len__(self) -> int:
        return len(self.lam)


def make_region(sys: SpinSystem, lam: Iterable) -> Region:
    lam = tuple(sorted(set(lam)))
    if not lam:
        raise ContractError("a region needs at least one site")
    for s in lam:
        if not sys.has_site(s):
            raise ContractError(f"unknown site {s!r}")
    lamset = set(lam)
    boundary = set()
    for i in lam:
        for j in sys.neighbors(i):
            if j not in lamset:
                boundary.add(j)
    boundary = tuple(sorted(boundary))
    closure = tuple(sorted(lamset | set(boundary)))
    index = {s: k for k, s in enumerate(closure)}
    inner, outer = [], []
    for i in lam:
        p = index[i]
        for j, t in sys.incident(i):
            q = index.get(j)
            if j in lamset:
                if p < q:
                    inner.append((p, q, t))
            else:
                outer.append((p, q, t))
    return Region(lam, boundary, closure, index, tuple(inner), tuple(outer))


def bfs_distances(sys: SpinSystem, sources: Iterable, max_radius: int | None = None,
                  stop=None) -> dict:
    """Graph distances from a source set, truncated at ``max_radius``.

    ``stop(site)`` returning True ends the search once that site is reached.
    Implicit lattices need ``max_radius`` or a ``stop`` that eventually fires.
    """
    dist = {}
    queue = deque()
    for s in sources:
        if not sys.has_site(s):
            raise ContractError(f"unknown site {s!r}")
        if s not in dist:
            dist[s] = 0
            queue.append(s)
    while queue:
        i = queue.popleft()
        d = dist[i]
        if stop is not None and stop(i):
            return dist
        if max_radius is not None and d >= max_radius:
            continue
        for j in sys.neighbors(i):
            if j not in dist:
                dist[j] = d + 1
                queue.append(j)
    return dist


def ball_region(sys: SpinSystem, B: Iterable, radius: int) -> Region:
    """Region of all sites within graph distance ``radius`` of B."""
    B = tuple(B)
    if not B:
        raise ContractError("ball_region needs a nonempty centre set")
    if int(radius) != radius or radius < 0:
        raise ContractError(f"radius must be a nonnegative integer, got {radius}")
    return make_region(sys, bfs_distances(sys, B, max_radius=int(radius)).keys())


def distance_to_complement(sys: SpinSystem, region: Region, B: Iterable) -> float:
    """dist(B, Lambda^c) in the ambient graph; ``inf`` when Lambda^c is empty."""
    lamset = set(region.lam)
    B = tuple(B)
    if not set(B) <= lamset:
        raise ContractError("B must lie inside the region")
    if not region.boundary:
        return math.inf
    dist = bfs_distances(sys, B, stop=lambda s: s not in lamset)
    return min(d for s, d in dist.items() if s not in lamset)


def _check_covers(x: SpinConfig, sites: Iterable, what: str) -> None:
    missing = [s for s in sites if s not in x]
    if missing:
        raise ContractError(f"{what}: configuration does not cover sites {missing[:5]}")


def hamiltonian(sys: SpinSystem, x: SpinConfig) -> float:
    """H(x) = beta * sum over edges of h_e(x_i, x_j)."""
    sys.require_finite("whole-system Hamiltonian evaluation")
    _check_covers(x, sys.sites, "hamiltonian")
    total = 0.0
    for (i, j), t in zip(sys.edges, sys.tables):
        total += t[spin_to_bit(x[i]), spin_to_bit(x[j])]
    return sys.beta * total


def grad_H(sys: SpinSystem, x: SpinConfig, i) -> float:
    """H(x^i) - H(x), evaluated from the edges at i only."""
    if i not in x:
        raise ContractError(f"site {i!r} not covered")
    bi = spin_to_bit(x[i])
    total = 0.0
    for j, t in sys.incident(i):
        if j not in x:
            raise ContractError(f"neighbourhood of {i!r} not covered (missing {j!r})")
        bj = spin_to_bit(x[j])
        total += t[1 - bi, bj] - t[bi, bj]
    return sys.beta * total


def local_hamiltonian(sys: SpinSystem, region: Region, eta: BoundaryCondition, x: SpinConfig) -> float:
    """Hamiltonian truncated to Lambda with boundary spins frozen to eta (beta included)."""
    _check_covers(x, region.lam, "local_hamiltonian")
    if tuple(eta.sites) != region.boundary:
        raise ContractError("boundary condition must cover exactly the external boundary")
    bits = {}
    for s in region.lam:
        bits[region.index[s]] = spin_to_bit(x[s])
    for s in region.boundary:
        bits[region.index[s]] = spin_to_bit(eta[s])
    total = 0.0
    for p, q, t in region.inner_edges:
        total += t[bits[p], bits[q]]
    for p, q, t in region.boundary_edges:
        total += t[bits[p], bits[q]]
    return sys.beta * total


def enumerate_bits(m: int) -> np.ndarray:
    """All 2**m bit rows in lexicographic order; column k is site k (1 <-> +1)."""
    idx = np.arange(1 << m, dtype=np.int64)
    shifts = np.arange(m - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts) & 1).astype(np.intp)


def index_bits(idx: np.ndarray, m: int, k: int) -> np.ndarray:
    """Bit of position k (of m) for every configuration index in ``idx``."""
    return ((idx >> (m - 1 - k)) & 1).astype(np.intp)


def region_gradients(sys: SpinSystem, region: Region, bits: np.ndarray | None = None) -> np.ndarray:
    """Array ``g[x, k] = grad_H(x, lam[k])`` for every x in Sigma^closure."""
    if bits is None:
        bits = enumerate_bits(len(region.closure))
    lam_pos = region.lam_positions
    out = np.zeros((bits.shape[0], len(lam_pos)))
    for k, i in enumerate(region.lam):
        bi = bits[:, lam_pos[k]]
        acc = np.zeros(bits.shape[0])
        for j, t in sys.incident(i):
            bj = bits[:, region.index[j]]
            acc += t[1 - bi, bj] - t[bi, bj]
        out[:, k] = sys.beta * acc
    return out
