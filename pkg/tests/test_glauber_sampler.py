import math

import numpy as np
import pytest

import oracles as O
from gibbs_certify import dlr_hierarchy as dlr
from gibbs_certify import glauber_sampler as gs
from gibbs_certify import observable as ob
from gibbs_certify import spin_model as sm
from gibbs_certify.errors import ContractError, ImplicitLatticeError


def test_step_is_pure():
    s = sm.chain(5, 0.4)
    st0 = gs.ChainState.start(s, seed=1)
    before = st0.bits.copy()
    st1 = gs.step(s, st0)
    np.testing.assert_array_equal(st0.bits, before)
    assert (st0.step_count, st1.step_count) == (0, 1)


def test_same_seed_same_trajectory():
    s = sm.grid2d(3, 3, 0.6)
    a = gs.run(s, gs.ChainState.start(s, seed=42), 5000)
    b = gs.run(s, gs.ChainState.start(s, seed=42), 5000)
    np.testing.assert_array_equal(a.bits, b.bits)
    others = [gs.run(s, gs.ChainState.start(s, seed=k), 5000).bits for k in range(43, 48)]
    assert any(not np.array_equal(a.bits, o) for o in others)


def test_block_size_does_not_matter():
    s = sm.cycle(7, 0.8)
    st = gs.ChainState.start(s, seed=9)
    one_go = gs.run(s, st, 300)
    stepped = st
    for _ in range(300):
        stepped = gs.step(s, stepped)
    np.testing.assert_array_equal(one_go.bits, stepped.bits)
    split = gs.run(s, gs.run(s, st, 123), 177)
    np.testing.assert_array_equal(one_go.bits, split.bits)


def test_stream_rule_by_hand():
    s = sm.chain(4, 0.9)
    st = gs.ChainState.start(s, seed=3, init="plus")
    rng = np.random.default_rng(3)
    x = {i: 1 for i in range(4)}
    for _ in range(200):
        u0, u1 = rng.random(2)
        i = int(u0 * 4)
        if u1 <= O.heat_bath(s, x, i):
            x[i] = -x[i]
    out = gs.run(s, st, 200)
    assert [out.config[i] for i in range(4)] == [x[i] for i in range(4)]


def test_zero_beta_acceptance_half():
    s = sm.chain(6, 0.0)
    st = gs.ChainState.start(s, seed=0, init="plus")
    flips = 0
    for _ in range(4000):
        new = gs.step(s, st)
        flips += int(np.any(new.bits != st.bits))
        st = new
    assert abs(flips / 4000 - 0.5) < 5 * math.sqrt(0.25 / 4000)


def test_aligned_ferromagnet_acceptance():
    beta = 1.5
    s = sm.cycle(5, beta)
    deg = 2
    expected = math.exp(-2 * beta * deg) / (1 + math.exp(-2 * beta * deg))
    flips, trials = 0, 20000
    base = gs.ChainState.start(s, seed=5, init="plus")
    # restart from all +1 every time, so each step sees the aligned neighbourhood
    rng = np.random.default_rng(11)
    for seed in rng.integers(0, 2 ** 31, trials):
        flips += int(np.any(gs.step(s, gs.ChainState.start(s, seed=int(seed), init="plus")).bits == 0))
    assert base.bits.all()
    assert abs(flips / trials - expected) < 5 * math.sqrt(expected * (1 - expected) / trials)


def test_init_options():
    s = sm.chain(4, 1.0)
    assert gs.ChainState.start(s, init="minus").bits.sum() == 0
    cfg = sm.SpinConfig((0, 1, 2, 3), (1, -1, -1, 1))
    assert gs.ChainState.start(s, init=cfg).config == cfg
    with pytest.raises(ContractError):
        gs.ChainState.start(s, init=sm.SpinConfig((0,), (1,)))
    with pytest.raises(ContractError):
        gs.ChainState.start(s, init="sideways")
    with pytest.raises(ImplicitLatticeError):
        gs.ChainState.start(sm.infinite_chain(0.3))


def test_estimate_zero_beta_symmetric():
    s = sm.chain(6, 0.0)
    m, se = gs.estimate(s, ob.spin_product([2]), burn_in=100, samples=100_000, seed=1)
    assert abs(m) <= 5 * se


def test_estimate_single_edge():
    s = sm.chain(2, 0.5)
    est = gs.estimate(s, ob.spin_product([0, 1]), burn_in=1000, samples=200_000, seed=7)
    assert abs(est.mean - math.tanh(0.5)) <= 5 * est.stderr
    assert est.meta["samples"] == 200_000 and est.meta["seed"] == 7


def test_estimate_thinning_deterministic():
    s = sm.grid2d(2, 3, 0.4)
    f = ob.spin_product([0, 5])
    a = gs.estimate(s, f, 50, 2000, thin=3, seed=2)
    b = gs.estimate(s, f, 50, 2000, thin=3, seed=2)
    assert a == b
    assert a.meta["steps"] == 50 + 6000


def test_estimate_inside_dlr_interval():
    s = sm.chain(10, 0.6)
    f = ob.spin_product([4, 5])
    reg = sm.ball_region(s, [4, 5], 1)
    iv = dlr.solve_dlr(s, reg, f)
    est = gs.estimate(s, f, 1000, 100_000, seed=3)
    assert iv.width > 10 * est.stderr
    assert iv.contains(est.mean)


def test_visit_frequencies_tv():
    rng = np.random.default_rng(21)
    base = sm.grid2d(2, 4, 0.7)
    tables = [sm.as_table([d, a, a, b]) for a, b, d in rng.uniform(-1, 1, (len(base.edges), 3))]
    s = sm.from_edges(8, base.edges, 0.7, tables)
    freq = gs.visit_frequencies(s, 1_000_000, seed=8, burn_in=1000)
    logw = np.array([-O.edge_energy(s, x) for x in O.configs(range(8))])
    mu = np.exp(logw - logw.max())
    mu /= mu.sum()
    assert 0.5 * np.abs(freq - mu).sum() <= 0.02


def test_coupling_zero_at_start_and_full_region():
    s = sm.chain(12, 0.5)
    reg = sm.ball_region(s, [6], 3)
    assert gs.coupled_disagreement_probability(s, reg, [6], 0, 500, seed=1) == 0.0
    full = sm.make_region(s, range(12))
    curve = gs.coupled_disagreement_curve(s, full, [6], [0, 10, 100, 1000], 300, seed=1)
    assert np.all(curve["probability"] == 0)


def test_coupling_curve_shape():
    s = sm.chain(12, 0.5)
    reg = sm.ball_region(s, [6], 3)
    curve = gs.coupled_disagreement_curve(s, reg, [6], [0, 12, 48, 96], 4000, seed=4)
    p = curve["probability"]
    assert p[0] == 0
    assert p[-1] > p[1]
    np.testing.assert_allclose(curve["t_sweeps"], [0, 1, 4, 8])
    again = gs.coupled_disagreement_curve(s, reg, [6], [0, 12, 48, 96], 4000, seed=4)
    np.testing.assert_array_equal(p, again["probability"])


def test_coupling_agreement_persists():
    # once the pair coalesces on all of V it never separates
    s = sm.cycle(6, 0.4)
    reg = sm.make_region(s, [0, 1])
    x, y = gs._coupling_start(s, reg)
    g = gs._graph(s)
    u = np.random.default_rng(0).random((20_000, 2))
    met = None
    for t in range(u.shape[0]):
        gs._advance(x, u[t:t + 1], g.n, g.ptr, g.nbr, g.tab, g.beta)
        gs._advance(y, u[t:t + 1], g.n, g.ptr, g.nbr, g.tab, g.beta)
        same = np.array_equal(x, y)
        if met is not None:
            assert same
        elif same:
            met = t
    assert met is not None


def test_coupling_b_must_be_in_lambda():
    s = sm.chain(8, 0.5)
    with pytest.raises(ContractError):
        gs.coupled_disagreement_curve(s, sm.make_region(s, [3]), [4], [1], 10)


def test_envelope():
    s = sm.chain(12, 0.5)
    v = math.e ** 2
    assert gs.propagation_envelope(s, [6], 12, 3) == pytest.approx(8 * math.exp(v - 3))
