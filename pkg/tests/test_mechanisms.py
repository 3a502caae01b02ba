import numpy as np
import pytest

from slotauction.core import CASCADE, Instance, MNL
from slotauction.distributions import Exponential, Uniform
from slotauction.mechanisms import (
    IrregularDistributionError,
    NonMonotoneSolverError,
    brute_cascade_solver,
    exact_mnl_solver,
    greedy_cascade_solver,
    monotone_grid_sum,
    monotonicity_audit,
    myerson,
    threshold_dropping_solver,
    vcg,
    virtual_value,
)
from conftest import rand_bids, rand_cascade_instance, rand_mnl_instance
from test_distributions import bimodal_fixture


def textbook_slot(n=2):
    """n bidders, one certain-click slot, cascade model."""
    return Instance(n=n, m=1, k=1, p=np.ones((n, 1)), model=CASCADE)


# ----------------------------------------------------------------------- vcg


def test_vcg_single_advertiser_pays_nothing():
    inst = Instance(n=1, m=1, k=1, p=[[0.5]], model=MNL)
    out = vcg(inst, [4.0], exact_mnl_solver())
    assert out.payments[0] == 0.0
    assert out.utilities[0] == pytest.approx(2.0)


def test_vcg_charges_displaced_welfare():
    inst = Instance(n=2, m=1, k=1, p=[[0.5], [0.5]], model=MNL)
    out = vcg(inst, [2.0, 1.0], exact_mnl_solver())
    assert out.augmented.allocation.assignment == {0: 0}
    np.testing.assert_allclose(out.payments, [0.5, 0.0], atol=1e-9)


def test_vcg_identical_twins_pay_each_others_contribution():
    inst = Instance(n=2, m=1, k=1, p=[[0.6], [0.6]], model=MNL)
    out = vcg(inst, [3.0, 3.0], exact_mnl_solver())
    winner = next(iter(out.augmented.allocation.assignment))
    # the twin would have produced exactly the same welfare
    assert out.payments[winner] == pytest.approx(3.0 * 0.6, abs=1e-9)
    assert out.utilities[winner] == pytest.approx(0.0, abs=1e-9)


def test_vcg_rejects_non_exact_solver():
    inst = rand_cascade_instance(np.random.default_rng(1))
    greedy = greedy_cascade_solver(np.random.default_rng(0))
    with pytest.raises(NonMonotoneSolverError):
        vcg(inst, np.ones(inst.n), greedy)


def test_vcg_truthful_on_random_instances():
    rng = np.random.default_rng(107)
    solver = exact_mnl_solver()
    for _ in range(8):
        inst = rand_mnl_instance(rng, nmax=4, mmax=4)
        values = rand_bids(rng, inst.n)
        truthful = vcg(inst, values, solver)
        assert np.all(truthful.payments >= 0.0)
        assert np.all(truthful.utilities >= -1e-9)
        for i in range(inst.n):
            for lie in rng.uniform(0.01, 10.0, 4):
                bids = values.copy()
                bids[i] = lie
                outcome = vcg(inst, bids, solver)
                lie_utility = values[i] * outcome.ctrs[i] - outcome.payments[i]
                assert lie_utility <= truthful.utilities[i] + 1e-9


# ------------------------------------------------------------ virtual values


def test_virtual_value_closed_forms():
    assert virtual_value(Uniform(0.0, 1.0), 0.75) == pytest.approx(0.5)
    assert virtual_value(Uniform(0.0, 1.0), 0.5) == pytest.approx(0.0)
    assert virtual_value(Exponential(1.0), 2.0) == pytest.approx(1.0)


# -------------------------------------------------------------------- grids


def test_monotone_grid_sum_equals_naive_sum():
    rng = np.random.default_rng(109)
    for _ in range(40):
        size = int(rng.integers(1, 600))
        jumps = sorted(rng.uniform(0, size, size=int(rng.integers(0, 5))))
        levels = np.cumsum(rng.uniform(0, 1, size=len(jumps) + 1))

        def curve(g: int) -> float:
            level = 0
            for t, jump in enumerate(jumps):
                if g > jump:
                    level = t + 1
            return float(levels[level])

        naive = sum(curve(g) for g in range(1, size + 1))
        assert monotone_grid_sum(curve, size) == pytest.approx(naive, rel=1e-12)


# ------------------------------------------------------------------- myerson


def test_myerson_single_bidder_converges_to_reserve():
    inst = textbook_slot(1)
    payments = {}
    for grid in (512, 1024, 4096):
        out = myerson(inst, [0.75], [Uniform(0.0, 1.0)],
                      brute_cascade_solver(), grid_size=grid)
        assert out.ctrs[0] == pytest.approx(1.0)
        payments[grid] = out.payments[0]
        assert abs(out.payments[0] - 0.5) <= 0.75 / grid
    assert abs(payments[4096] - 0.5) < abs(payments[512] - 0.5) + 1e-12


def test_myerson_below_reserve_unallocated():
    out = myerson(textbook_slot(1), [0.4], [Uniform(0.0, 1.0)],
                  brute_cascade_solver(), grid_size=512)
    assert out.ctrs[0] == 0.0
    assert out.payments[0] == 0.0


def test_myerson_two_bidders_price_at_second_or_reserve():
    inst = textbook_slot(2)
    dists = [Uniform(0.0, 1.0)] * 2
    out = myerson(inst, [0.9, 0.7], dists, brute_cascade_solver(), 2048)
    assert out.ctrs[0] == pytest.approx(1.0)
    assert abs(out.payments[0] - 0.7) <= 0.9 / 2048
    out = myerson(inst, [0.9, 0.3], dists, brute_cascade_solver(), 2048)
    assert abs(out.payments[0] - 0.5) <= 0.9 / 2048
    assert out.payments[1] == 0.0


def test_myerson_is_individually_rational():
    rng = np.random.default_rng(113)
    inst = textbook_slot(3)
    dists = [Uniform(0.0, 1.0)] * 3
    for _ in range(25):
        values = rng.uniform(0.0, 1.0, 3)
        out = myerson(inst, values, dists, brute_cascade_solver(), 256)
        assert np.all(out.payments >= 0.0)
        assert np.all(out.payments <= values * out.ctrs + 1e-12)


def test_myerson_rejects_irregular_distribution():
    inst = textbook_slot(1)
    with pytest.raises(IrregularDistributionError):
        myerson(inst, [1.0], [bimodal_fixture()], brute_cascade_solver(), 128)


def test_myerson_audits_approximate_solvers():
    inst = rand_cascade_instance(np.random.default_rng(3), nmax=3, mmax=3)
    values = np.full(inst.n, 2.0)
    dists = [Exponential(1.0)] * inst.n
    broken = threshold_dropping_solver(
        greedy_cascade_solver(np.random.default_rng(0)), threshold=1.0
    )
    with pytest.raises(NonMonotoneSolverError):
        myerson(inst, values, dists, broken, grid_size=64)
    # the honest greedy passes the same audit
    honest = greedy_cascade_solver(np.random.default_rng(0))
    out = myerson(inst, values, dists, honest, grid_size=64)
    assert np.all(out.payments >= 0.0)


def test_myerson_mnl_route_works_end_to_end():
    inst = Instance(n=2, m=2, k=2, p=[[0.6, 0.3], [0.4, 0.2]], model=MNL)
    out = myerson(inst, [0.9, 0.8], [Uniform(0.0, 1.0)] * 2,
                  exact_mnl_solver(), grid_size=256)
    assert np.all(out.payments >= 0.0)
    assert np.all(out.utilities >= -1e-9)


def test_myerson_epsilon_ic_shrinks_with_grid():
    inst = textbook_slot(2)
    dists = [Uniform(0.0, 1.0)] * 2
    values = np.array([0.83, 0.61])
    misreports = np.linspace(0.01, 1.0, 64)
    gains = {}
    for grid in (256, 512):
        truthful = myerson(inst, values, dists, brute_cascade_solver(), grid)
        base = values * truthful.ctrs - truthful.payments
        worst = 0.0
        for i in range(2):
            for lie in misreports:
                reported = values.copy()
                reported[i] = lie
                out = myerson(inst, reported, dists,
                              brute_cascade_solver(), grid)
                utility = values[i] * out.ctrs[i] - out.payments[i]
                worst = max(worst, utility - base[i])
        gains[grid] = worst
        assert worst <= 1.0 / grid + 1e-9
    assert gains[512] <= gains[256] + 1e-12


# ---------------------------------------------------------------- audit tool


def test_audit_passes_exact_solver():
    rng = np.random.default_rng(127)
    inst = rand_mnl_instance(rng, nmax=4, mmax=4)
    bids = rand_bids(rng, inst.n)
    grid = np.linspace(0.25, 10.0, 10)
    for i in range(inst.n):
        assert monotonicity_audit(exact_mnl_solver(), inst, bids, i, grid) is None


def test_audit_passes_greedy_cascade():
    rng = np.random.default_rng(131)
    solver = greedy_cascade_solver(np.random.default_rng(0))
    grid = np.linspace(0.25, 10.0, 10)
    for _ in range(10):
        inst = rand_cascade_instance(rng, nmax=4, mmax=4)
        bids = rand_bids(rng, inst.n, top=5.0)
        for i in range(inst.n):
            assert monotonicity_audit(solver, inst, bids, i, grid) is None


def test_audit_catches_planted_bug():
    inst = Instance(n=2, m=1, k=1, p=[[0.5], [0.5]], model=MNL)
    broken = threshold_dropping_solver(exact_mnl_solver(), threshold=5.0)
    hit = monotonicity_audit(
        broken, inst, np.array([1.0, 0.5]), 0, np.linspace(1.0, 10.0, 10)
    )
    assert hit is not None
    b_lo, b_hi, pi_lo, pi_hi = hit
    assert pi_hi < pi_lo
    assert b_hi > 5.0
