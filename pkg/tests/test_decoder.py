import numpy as np
import pytest

from bplab.decoder import (
    InconsistentSyndromeError,
    RelayConfig,
    bp_min_sum,
    bp_osd_decode,
    leg_strengths,
    logical_flip,
    osd0,
    relay_decode,
)
from bplab.gf2core import SparseBitMatrix, indicator, mat_vec_mod2
from bplab.modelio import GROSS_CODE, DecodingModel, generate_bb_code_capacity, generate_random_model

from oracles import min_weight_solution, random_full_rank


def dense_model(D, prior=0.01, L=None):
    D = np.asarray(D, dtype=np.uint8)
    L = np.zeros((1, D.shape[1]), dtype=np.uint8) if L is None else L
    return DecodingModel(SparseBitMatrix.from_dense(D), np.full(D.shape[1], prior), SparseBitMatrix.from_dense(L))


def random_tree_model(rng, n_vars, n_checks):
    """Tanner graph that is a tree: every new node links to one earlier node of the other kind."""
    D = np.zeros((n_checks, n_vars), dtype=np.uint8)
    D[0, 0] = 1
    v, c = 1, 1
    while v < n_vars or c < n_checks:
        if v < n_vars and (c == n_checks or rng.random() < 0.5):
            D[rng.integers(0, c), v] = 1
            v += 1
        else:
            D[c, rng.integers(0, v)] = 1
            c += 1
    return dense_model(D)


@pytest.fixture
def gross():
    return generate_bb_code_capacity(**GROSS_CODE, prior=0.01)


def test_zero_syndrome_costs_no_iterations(gross):
    s = np.zeros(gross.n_checks, dtype=np.uint8)
    res, _ = bp_min_sum(gross, s, 10)
    assert res.converged and res.iterations == 0 and not res.estimate.any()
    for seed in (0, 1, 99):
        r = relay_decode(gross, s, RelayConfig(seed=seed))
        assert r.converged and r.iterations == 0


def test_tree_model_single_fault(rng):
    checked = 0
    for _ in range(20):
        m = random_tree_model(rng, 12, 9)
        D = m.H.to_dense()
        for j in range(m.n_faults):
            col = D[:, j]
            # indicator(j) must be the only weight-1 solution for the claim to apply
            if sum(np.array_equal(D[:, k], col) for k in range(m.n_faults)) != 1:
                continue
            res, _ = bp_min_sum(m, col, 2)
            assert res.converged and res.iterations <= 2
            assert np.array_equal(res.estimate, indicator(m.n_faults, [j]))
            checked += 1
    assert checked > 50


def test_dimension_checks(gross):
    with pytest.raises(ValueError):
        bp_min_sum(gross, np.zeros(5), 3)
    with pytest.raises(ValueError):
        bp_min_sum(gross, np.zeros(72), 3, memory_strengths=np.zeros(3))
    with pytest.raises(ValueError):
        osd0(gross, np.zeros(72), np.zeros(3))
    with pytest.raises(ValueError):
        logical_flip(gross, np.zeros(3), np.zeros(144))


def test_relay_config_validation():
    with pytest.raises(ValueError):
        RelayConfig(gamma_min=0.5, gamma_max=0.1)
    with pytest.raises(ValueError):
        RelayConfig(max_legs=2, iters_per_leg=5, global_iteration_cap=100)
    cfg = RelayConfig()
    assert cfg.global_iteration_cap == 5000 and cfg.warmup_iters == 25
    assert RelayConfig(iters_per_leg=50).global_iteration_cap == 10000
    assert cfg.replace(iters_per_leg=50).global_iteration_cap == 10000


def test_leg_strengths():
    cfg = RelayConfig(seed=5)
    assert not leg_strengths(cfg, 0, 10).any()
    g = leg_strengths(cfg, 3, 1000)
    assert g.min() >= -0.24 and g.max() <= 0.66
    assert np.array_equal(g, leg_strengths(cfg, 3, 1000))
    assert not np.array_equal(g, leg_strengths(cfg, 4, 1000))


def test_relay_deterministic(gross, rng):
    e = indicator(144, rng.choice(144, 9, replace=False))
    s = mat_vec_mod2(gross.H, e)
    cfg = RelayConfig(max_legs=20, seed=42)
    a = relay_decode(gross, s, cfg, record_trace=True)
    b = relay_decode(gross, s, cfg, record_trace=True)
    assert a.iterations == b.iterations and a.converged == b.converged
    assert a.estimate.tobytes() == b.estimate.tobytes()
    assert np.array_equal(a.trace.matrix(), b.trace.matrix())
    assert a.trace.leg_starts == b.trace.leg_starts


def test_relay_single_zero_leg_is_plain_bp(gross, rng):
    cfg = RelayConfig(max_legs=1, iters_per_leg=30, gamma_min=0, gamma_max=0, seed=3)
    for _ in range(20):
        e = indicator(144, rng.choice(144, 8, replace=False))
        s = mat_vec_mod2(gross.H, e)
        r = relay_decode(gross, s, cfg)
        p, _ = bp_min_sum(gross, s, 30, np.zeros(144), None, cfg.min_sum_scale)
        assert r.estimate.tobytes() == p.estimate.tobytes()
        assert (r.iterations, r.converged) == (p.iterations, p.converged)


def test_relay_respects_cap_and_leg_boundaries(gross, rng):
    cfg = RelayConfig(max_legs=6, iters_per_leg=4, warmup_iters=7, global_iteration_cap=20, seed=1)
    for _ in range(30):
        e = (rng.random(144) < 0.12).astype(np.uint8)
        r = relay_decode(gross, mat_vec_mod2(gross.H, e), cfg, record_trace=True)
        assert r.iterations <= 20
        assert r.trace.n_iterations == r.iterations
        assert r.trace.leg_starts[:3] == [0, 7, 11][: len(r.trace.leg_starts)]


def test_relay_best_of_all_legs(gross, rng):
    e = indicator(144, rng.choice(144, 6, replace=False))
    s = mat_vec_mod2(gross.H, e)
    r = relay_decode(gross, s, RelayConfig(max_legs=5, stop_on_first_valid=False, seed=2))
    assert r.converged and np.array_equal(mat_vec_mod2(gross.H, r.estimate), s)
    assert r.legs == 5


def test_relay_beats_plain_bp_on_dense_errors(gross):
    rng = np.random.default_rng(7)
    bp_fail = relay_fail = 0
    for k in range(60):
        e = (rng.random(144) < 0.07).astype(np.uint8)
        s = mat_vec_mod2(gross.H, e)
        bp_fail += not bp_min_sum(gross, s, 500)[0].converged
        relay_fail += not relay_decode(gross, s, RelayConfig(max_legs=40, seed=k)).converged
    assert relay_fail < bp_fail


def test_osd0_basic():
    m = dense_model([[1, 1, 0], [0, 1, 1]])
    assert not osd0(m, [0, 0], np.zeros(3)).estimate.any()
    r = osd0(m, [1, 1], np.array([5.0, -5.0, 5.0]))
    assert r.estimate.tolist() == [0, 1, 0]


def test_osd0_inconsistent():
    m = dense_model([[1, 1], [1, 1]])
    with pytest.raises(InconsistentSyndromeError):
        osd0(m, [1, 0], np.zeros(2))


def test_osd0_matches_exhaustive_min_weight(rng):
    for _ in range(10):
        D = random_full_rank(rng, 10, 20)
        m = dense_model(D)
        e = (rng.random(20) < 0.25).astype(np.uint8)
        s = D.astype(int) @ e % 2
        best = min_weight_solution(D, s)
        soft = np.where(best == 1, -1.0, 1.0)
        r = osd0(m, s, soft)
        assert np.array_equal(mat_vec_mod2(m.H, r.estimate), s)
        assert r.estimate.sum() == best.sum()


def test_bp_osd_always_compatible(gross, rng):
    for _ in range(10):
        e = (rng.random(144) < 0.08).astype(np.uint8)
        s = mat_vec_mod2(gross.H, e)
        r = bp_osd_decode(gross, s, max_iters=20)
        assert r.converged and np.array_equal(mat_vec_mod2(gross.H, r.estimate), s)
        assert r.iterations <= 20


def test_logical_flip():
    L = np.array([[1, 0, 1, 0]], dtype=np.uint8)
    m = dense_model(np.eye(4, dtype=np.uint8), L=L)
    e = np.array([1, 1, 0, 0], dtype=np.uint8)
    assert not logical_flip(m, e, e).any()
    assert not logical_flip(m, e, np.array([1, 0, 0, 0])).any()
    assert logical_flip(m, e, np.array([0, 1, 0, 0])).tolist() == [1]


def test_logical_flip_dense_oracle(rng):
    m = generate_random_model(10, 30, 3, 20, seed=2, n_observables=4)
    Ld = m.L.to_dense().astype(int)
    for _ in range(20):
        a = (rng.random(30) < 0.3).astype(np.uint8)
        b = (rng.random(30) < 0.3).astype(np.uint8)
        assert np.array_equal(logical_flip(m, a, b), Ld @ ((a + b) % 2) % 2)
