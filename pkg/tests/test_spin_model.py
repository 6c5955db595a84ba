import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles as O
from gibbs_certify import spin_model as sm
from gibbs_certify.errors import ContractError, ImplicitLatticeError, InputError


def cfg(values):
    return sm.SpinConfig(tuple(range(len(values))), values)


def random_system(seed, n=6, kind="chain", beta=0.7):
    rng = np.random.default_rng(seed)
    base = {"chain": lambda: sm.chain(n, beta), "cycle": lambda: sm.cycle(n, beta),
            "grid": lambda: sm.grid2d(2, n // 2, beta)}[kind]()
    tables = []
    for _ in base.edges:
        a, b, d = rng.uniform(-1, 1, 3)
        tables.append([[d, a], [a, b]])
    return sm.from_edges(base.n, base.edges, beta, tables, base.lattice, base.dims)


class TestHamiltonian:
    def test_single_edge_aligned(self):
        assert sm.hamiltonian(sm.chain(2, 1.0), cfg([1, 1])) == -1.0

    def test_chain_of_three(self):
        assert sm.hamiltonian(sm.chain(3, 1.0), cfg([1, -1, 1])) == 2.0

    def test_beta_zero(self):
        s = random_system(0, beta=0.0)
        assert sm.hamiltonian(s, cfg([1, -1, -1, 1, 1, -1])) == 0.0

    def test_needs_full_cover(self):
        with pytest.raises(ContractError):
            sm.hamiltonian(sm.chain(3, 1.0), sm.SpinConfig((0, 1), (1, 1)))

    def test_implicit_lattice_rejected(self):
        with pytest.raises(ImplicitLatticeError):
            sm.hamiltonian(sm.infinite_chain(1.0), cfg([1, 1]))

    @pytest.mark.parametrize("kind", ["chain", "cycle", "grid"])
    def test_matches_oracle(self, kind):
        s = random_system(3, n=6, kind=kind)
        for x in O.configs(range(6)):
            got = sm.hamiltonian(s, sm.SpinConfig.from_mapping(x))
            assert got == pytest.approx(O.edge_energy(s, x), abs=1e-12)


class TestGradient:
    def test_single_edge(self):
        assert sm.grad_H(sm.chain(2, 1.0), cfg([1, 1]), 1) == 2.0

    def test_beta_zero(self):
        assert sm.grad_H(sm.chain(4, 0.0), cfg([1, -1, 1, 1]), 2) == 0.0

    def test_requires_neighbourhood(self):
        with pytest.raises(ContractError):
            sm.grad_H(sm.chain(4, 1.0), sm.SpinConfig((1, 2), (1, 1)), 2)

    @pytest.mark.parametrize("kind", ["chain", "cycle", "grid"])
    def test_local_equals_global_exhaustive(self, kind):
        s = random_system(11, n=8, kind=kind)
        for vals in itertools.product((-1, 1), repeat=8):
            x = cfg(vals)
            for i in range(8):
                diff = sm.hamiltonian(s, x.flip(i)) - sm.hamiltonian(s, x)
                assert sm.grad_H(s, x, i) == pytest.approx(diff, abs=1e-12)

    @given(st.integers(0, 2**10 - 1), st.integers(0, 9), st.integers(0, 1000))
    def test_antisymmetric(self, word, i, seed):
        s = random_system(seed, n=10, kind="cycle")
        x = sm.SpinConfig.from_word(tuple(range(10)), word)
        assert sm.grad_H(s, x.flip(i), i) == pytest.approx(-sm.grad_H(s, x, i), abs=1e-12)

    @given(st.integers(0, 2**10 - 1), st.integers(0, 9), st.integers(0, 9))
    def test_ignores_far_spins(self, word, i, j):
        s = random_system(5, n=10, kind="grid")
        if j == i or j in s.neighbors(i):
            return
        x = sm.SpinConfig.from_word(tuple(range(10)), word)
        assert sm.grad_H(s, x, i) == sm.grad_H(s, x.flip(j), i)

    def test_infinite_grid_is_local(self):
        s = sm.infinite_grid2d(0.5)
        x = sm.SpinConfig.from_mapping({(0, 0): 1, (0, 1): 1, (1, 0): 1, (0, -1): -1, (-1, 0): 1})
        assert sm.grad_H(s, x, (0, 0)) == pytest.approx(0.5 * (2 + 2 + 2 - 2))


class TestLocalHamiltonian:
    def test_single_site_with_plus_boundary(self):
        s = sm.chain(5, 1.0)
        reg = sm.make_region(s, [2])
        eta = sm.SpinConfig((1, 3), (1, 1))
        assert sm.local_hamiltonian(s, reg, eta, sm.SpinConfig((2,), (1,))) == -2.0

    def test_beta_zero(self):
        s = sm.chain(5, 0.0)
        reg = sm.make_region(s, [1, 2])
        assert sm.local_hamiltonian(s, reg, sm.SpinConfig((0, 3), (1, -1)),
                                    sm.SpinConfig((1, 2), (-1, 1))) == 0.0

    def test_full_region_equals_hamiltonian(self):
        s = random_system(2, n=8, kind="grid")
        reg = sm.make_region(s, range(8))
        empty = sm.SpinConfig((), ())
        for vals in itertools.product((-1, 1), repeat=8):
            x = cfg(vals)
            assert sm.local_hamiltonian(s, reg, empty, x) == pytest.approx(sm.hamiltonian(s, x), abs=1e-12)

    def test_boundary_mismatch(self):
        s = sm.chain(5, 1.0)
        reg = sm.make_region(s, [2])
        with pytest.raises(ContractError):
            sm.local_hamiltonian(s, reg, sm.SpinConfig((1,), (1,)), sm.SpinConfig((2,), (1,)))


class TestRegions:
    def test_chain_single_site(self):
        reg = sm.make_region(sm.chain(5, 1.0), [2])
        assert reg.boundary == (1, 3) and reg.closure == (1, 2, 3)

    def test_full_region_has_no_boundary(self):
        reg = sm.make_region(sm.cycle(6, 1.0), range(6))
        assert reg.boundary == ()

    def test_grid_block(self):
        s = sm.grid2d(5, 5, 1.0)
        block = [r * 5 + c for r in range(1, 4) for c in range(1, 4)]
        assert len(sm.make_region(s, block).boundary) == 12

    def test_unknown_site(self):
        with pytest.raises(ContractError):
            sm.make_region(sm.chain(4, 1.0), [7])

    @pytest.mark.parametrize("radius,expected", [(0, (5,)), (2, (3, 4, 5, 6, 7)), (20, tuple(range(10)))])
    def test_ball(self, radius, expected):
        assert sm.ball_region(sm.chain(10, 1.0), [5], radius).lam == expected

    @given(st.sets(st.integers(0, 11), min_size=1, max_size=11))
    def test_boundary_matches_scan(self, lam):
        s = sm.grid2d(3, 4, 1.0)
        assert list(sm.make_region(s, lam).boundary) == O.scan_boundary(s, lam)

    @given(st.integers(0, 15), st.integers(0, 5))
    def test_ball_distance_guarantee(self, centre, radius):
        s = sm.grid2d(4, 4, 1.0)
        reg = sm.ball_region(s, [centre], radius)
        d = sm.distance_to_complement(s, reg, [centre])
        assert d >= radius + 1 or (math.isinf(d) and not reg.boundary)

    def test_infinite_ball(self):
        reg = sm.ball_region(sm.infinite_grid2d(1.0), [(0, 0)], 1)
        assert len(reg.lam) == 5 and len(reg.boundary) == 8


class TestConstruction:
    def test_rejects_asymmetric_table(self):
        with pytest.raises(InputError):
            sm.chain(3, 1.0, [[0, 1], [2, 0]])

    def test_rejects_negative_beta(self):
        with pytest.raises(InputError):
            sm.chain(3, -1.0)

    def test_rejects_duplicate_edge(self):
        with pytest.raises(InputError):
            sm.from_edges(3, [(0, 1), (1, 0)], 1.0)

    def test_rejects_self_loop(self):
        with pytest.raises(InputError):
            sm.from_edges(3, [(1, 1)], 1.0)

    def test_fast_mixing_flag(self):
        assert sm.chain(24, 0.3).fast_mixing_flag()
        assert not sm.grid2d(4, 4, 1.0).fast_mixing_flag()

    def test_config_word_order(self):
        x = sm.SpinConfig.from_word((3, 7, 9), 0b101)
        assert x.as_dict() == {3: 1, 7: -1, 9: 1}
        assert x.word == 0b101
