"""Local observables tabulated over their (small) support."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ContractError, GuardError, InputError
from .spin_model import SpinConfig, spin_to_bit

MAX_SUPPORT = 20


@dataclass(frozen=True, eq=False)
class Observable:
    """Real function of the spins in ``support``.

    ``values[w]`` is the value at the support configuration with lexicographic
    word ``w`` (first support site most significant, -1 before +1).
    """

    support: tuple
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        support = tuple(self.support)
        if len(set(support)) != len(support):
            raise InputError("duplicate site in observable support")
        if len(support) > MAX_SUPPORT:
            raise GuardError(f"support of size {len(support)} exceeds the table cap {MAX_SUPPORT}")
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.size != 1 << len(support):
            raise InputError(f"support of size {len(support)} needs {1 << len(support)} values, got {values.size}")
        if not np.all(np.isfinite(values)):
            raise InputError("observable values must be finite")
        order = sorted(range(len(support)), key=lambda k: support[k])
        if order != list(range(len(support))):
            # re-order table axes so the support is ascending
            values = values.reshape((2,) * len(support)).transpose(order).reshape(-1)
            support = tuple(support[k] for k in order)
        values.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "values", values)

    def __call__(self, x: SpinConfig) -> float:
        return eval_observable(self, x)

    def word_of(self, x: SpinConfig) -> int:
        w = 0
        for s in self.support:
            w = (w << 1) | spin_to_bit(x[s])
        return w

    def values_on(self, sites: Sequence, bits: np.ndarray) -> np.ndarray:
        """Vectorised evaluation: ``bits`` rows are configurations of ``sites``."""
        pos = {s: k for k, s in enumerate(sites)}
        try:
            cols = [pos[s] for s in self.support]
        except KeyError as exc:
            raise ContractError(f"site {exc.args[0]!r} of the support is not covered") from None
        w = np.zeros(bits.shape[0], dtype=np.int64)
        for c in cols:
            w = (w << 1) | bits[:, c]
        return self.values[w]


def eval_observable(f: Observable, x: SpinConfig) -> float:
    if not x.covers(f.support):
        raise ContractError(f"configuration does not cover the support {f.support}")
    return float(f.values[f.word_of(x)])


def grad_f(f: Observable, x: SpinConfig, i) -> float:
    """f(x^i) - f(x); zero for sites outside the support."""
    if not x.covers(f.support):
        raise ContractError(f"configuration does not cover the support {f.support}")
    if i not in f.support:
        return 0.0
    return eval_observable(f, x.flip(i)) - eval_observable(f, x)


def tighten(f: Observable) -> Observable:
    """Drop support sites the table does not depend on."""
    m = len(f.support)
    cube = f.values.reshape((2,) * m) if m else f.values
    keep = []
    for k in range(m):
        if not np.array_equal(np.take(cube, 0, axis=k), np.take(cube, 1, axis=k)):
            keep.append(k)
    if len(keep) == m:
        return f
    index = tuple(slice(None) if k in keep else 0 for k in range(m))
    return Observable(tuple(f.support[k] for k in keep), np.asarray(cube[index]).reshape(-1), f.label)


def sup_norm(f: Observable) -> float:
    return float(np.max(np.abs(f.values)))


def spin_product(sites: Iterable) -> Observable:
    sites = tuple(sorted(sites))
    table = [float(np.prod(c)) for c in itertools.product((-1, 1), repeat=len(sites))]
    label = "*".join(f"x{s}" for s in sites) or "1"
    return Observable(sites, table, label)


def indicator(config: SpinConfig) -> Observable:
    """1 at the given configuration of its sites, 0 elsewhere."""
    values = np.zeros(1 << len(config.sites))
    values[config.word] = 1.0
    return Observable(config.sites, values, f"1[{config.as_dict()}]")


def constant(value: float, support: Iterable = ()) -> Observable:
    support = tuple(support)
    return Observable(support, np.full(1 << len(support), float(value)), f"const({value})")


def from_function(support: Iterable, fn: Callable[[SpinConfig], float], label: str = "") -> Observable:
    support = tuple(sorted(support))
    values = [fn(SpinConfig(support, c)) for c in itertools.product((-1, 1), repeat=len(support))]
    return Observable(support, values, label)


def is_spin_product(f: Observable) -> bool:
    return np.array_equal(f.values, spin_product(f.support).values)
