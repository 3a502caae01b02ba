import numpy as np
import pytest

from slotauction.core import Instance, MNL, mnl_ctr
from slotauction.mnl_wdp import (
    dinkelbach_check,
    max_weight_matching,
    solve_mnl_wdp,
)
from slotauction.oracle import brute_force_wdp_mnl
from conftest import rand_bids, rand_mnl_instance


def test_lone_ad():
    inst = Instance(n=1, m=1, k=1, p=[[0.5]], model=MNL)
    result = solve_mnl_wdp(inst, [1.0])
    assert result.allocation.assignment == {0: 0}
    assert result.objective == pytest.approx(0.5, abs=1e-9)


def test_zero_bid_yields_empty_allocation():
    inst = Instance(n=1, m=1, k=1, p=[[0.5]], model=MNL)
    result = solve_mnl_wdp(inst, [0.0])
    assert result.allocation.assignment == {}
    assert result.objective == 0.0


def test_single_slot_goes_to_higher_bid():
    inst = Instance(n=2, m=1, k=1, p=[[0.5], [0.5]], model=MNL)
    result = solve_mnl_wdp(inst, [2.0, 1.0])
    assert result.allocation.assignment == {0: 0}
    assert result.objective == pytest.approx(1.0, abs=1e-9)


def test_negative_bidders_are_excluded_not_fatal():
    inst = Instance(n=2, m=2, k=2, p=np.full((2, 2), 0.5), model=MNL)
    result = solve_mnl_wdp(inst, [-3.0, 1.0])
    assert 0 not in result.allocation.assignment
    assert result.ctrs[0] == 0.0


def test_objective_consistent_with_ctrs():
    rng = np.random.default_rng(3)
    for _ in range(30):
        inst = rand_mnl_instance(rng, nmax=5, mmax=5)
        bids = rand_bids(rng, inst.n)
        result = solve_mnl_wdp(inst, bids)
        recomputed = float(bids @ mnl_ctr(inst, result.allocation))
        assert result.objective == pytest.approx(recomputed, abs=1e-9)


def test_dinkelbach_lone_ad_converges_immediately():
    inst = Instance(n=1, m=1, k=1, p=[[0.5]], model=MNL)
    result = dinkelbach_check(inst, [1.0])
    assert result.objective == pytest.approx(0.5, abs=1e-9)
    assert result.allocation.assignment == {0: 0}


def test_dinkelbach_agrees_with_lp_on_random_pack():
    rng = np.random.default_rng(5)
    for _ in range(60):
        inst = rand_mnl_instance(rng, nmax=5, mmax=5)
        bids = rand_bids(rng, inst.n)
        lp = solve_mnl_wdp(inst, bids)
        dk = dinkelbach_check(inst, bids)
        assert lp.objective == pytest.approx(dk.objective, abs=1e-6)


def test_symmetric_ties_agree_on_value():
    inst = Instance(n=3, m=2, k=2, p=np.full((3, 2), 0.4), model=MNL)
    bids = [2.0, 2.0, 2.0]
    lp = solve_mnl_wdp(inst, bids)
    dk = dinkelbach_check(inst, bids)
    brute = brute_force_wdp_mnl(inst, bids)
    assert lp.objective == pytest.approx(brute.objective, abs=1e-9)
    assert dk.objective == pytest.approx(brute.objective, abs=1e-9)
    assert lp.allocation.size == min(3, 2, 2)
    assert dk.allocation.size == min(3, 2, 2)


def test_bid_scaling_scales_objective():
    rng = np.random.default_rng(9)
    inst = rand_mnl_instance(rng, nmax=4, mmax=4)
    bids = rand_bids(rng, inst.n)
    base = solve_mnl_wdp(inst, bids)
    for lam in (0.5, 3.0):
        scaled = solve_mnl_wdp(inst, lam * bids)
        assert scaled.objective == pytest.approx(lam * base.objective,
                                                 rel=1e-9)


def test_ctr_monotone_in_own_bid_small_sweep():
    rng = np.random.default_rng(17)
    for _ in range(15):
        inst = rand_mnl_instance(rng, nmax=4, mmax=4)
        bids = rand_bids(rng, inst.n)
        for i in range(inst.n):
            last = -1.0
            for b in np.linspace(0.25, 10.0, 8):
                bids_i = bids.copy()
                bids_i[i] = b
                pi = solve_mnl_wdp(inst, bids_i).ctrs[i]
                assert pi >= last - 1e-9
                last = pi


def _brute_matching(weights, cap):
    """Max-weight matching by enumerating edge subsets (tiny graphs only)."""
    edges = list(weights)
    best = 0.0
    for mask in range(1 << len(edges)):
        chosen = [edges[t] for t in range(len(edges)) if mask >> t & 1]
        if len(chosen) > cap:
            continue
        if len({i for i, _ in chosen}) < len(chosen):
            continue
        if len({j for _, j in chosen}) < len(chosen):
            continue
        best = max(best, sum(weights[e] for e in chosen))
    return best


def test_max_weight_matching_matches_enumeration():
    rng = np.random.default_rng(23)
    for _ in range(80):
        n = int(rng.integers(1, 5))
        m = int(rng.integers(1, 5))
        cap = int(rng.integers(1, m + 1))
        weights = {}
        for i in range(n):
            for j in range(m):
                if rng.random() < 0.7:
                    weights[(i, j)] = float(rng.uniform(0.05, 4.0))
        got = max_weight_matching(weights, cap)
        assert len(got) <= cap
        assert len(set(got.values())) == len(got)
        value = sum(weights[(i, j)] for i, j in got.items())
        assert value == pytest.approx(_brute_matching(weights, cap), abs=1e-9)


def test_max_weight_matching_respects_cap():
    weights = {(0, 0): 1.0, (1, 1): 0.9, (2, 2): 0.8}
    assert max_weight_matching(weights, 1) == {0: 0}
    got = max_weight_matching(weights, 2)
    assert len(got) == 2 and got[0] == 0 and got[1] == 1
