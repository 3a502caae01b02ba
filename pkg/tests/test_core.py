import numpy as np
import pytest

from slotauction.core import (
    Allocation,
    AugmentedAllocation,
    CASCADE,
    Instance,
    InfeasibleAllocationError,
    MNL,
    Permutation,
    ValidationError,
    cascade_ctr,
    check_feasible,
    instance_from_dict,
    instance_to_dict,
    mnl_ctr,
    validate_instance,
    welfare,
)
from conftest import rand_cascade_instance, rand_mnl_instance, rand_allocation


def test_validate_minimal_instance_ok():
    inst = Instance(n=1, m=1, k=1, p=[[0.5]], model=MNL)
    assert validate_instance(inst) is None


def test_validate_ctr_out_of_range():
    inst = Instance(n=1, m=1, k=1, p=[[1.2]], model=MNL)
    assert "out of range" in validate_instance(inst)


def test_validate_mnl_rejects_certain_click():
    inst = Instance(n=1, m=1, k=1, p=[[1.0]], model=MNL)
    assert "log-odds" in validate_instance(inst)
    # the same matrix is fine under the cascade model
    assert validate_instance(Instance(1, 1, 1, [[1.0]], CASCADE)) is None


def test_validate_k_bounds():
    assert "K=2" in validate_instance(Instance(1, 1, 2, [[0.5]], MNL))
    assert "K=0" in validate_instance(Instance(1, 1, 0, [[0.5]], MNL))


def test_allocation_rejects_position_reuse():
    with pytest.raises(ValidationError):
        Allocation({0: 1, 1: 1})


def test_check_feasible_enforces_cap_and_range():
    inst = Instance(n=2, m=2, k=1, p=[[0.5, 0.5]] * 2, model=MNL)
    with pytest.raises(InfeasibleAllocationError):
        check_feasible(inst, Allocation({0: 0, 1: 1}))
    with pytest.raises(InfeasibleAllocationError):
        check_feasible(inst, Allocation({0: 5}))


def test_permutation_must_be_contiguous_ranks():
    with pytest.raises(ValidationError):
        Permutation({3: 1, 4: 3})
    assert Permutation({3: 2, 4: 1}).order() == [4, 3]


def test_augmented_allocation_domains_must_match():
    with pytest.raises(ValidationError):
        AugmentedAllocation(Allocation({0: 0}), Permutation({1: 1}))


def test_mnl_lone_ad_recovers_standalone_rate():
    inst = Instance(n=1, m=1, k=1, p=[[0.5]], model=MNL)
    pi = mnl_ctr(inst, Allocation({0: 0}))
    assert pi[0] == pytest.approx(0.5, abs=1e-12)


def test_mnl_two_symmetric_ads_split_to_thirds():
    inst = Instance(n=2, m=2, k=2, p=[[0.5, 0.5]] * 2, model=MNL)
    pi = mnl_ctr(inst, Allocation({0: 0, 1: 1}))
    np.testing.assert_allclose(pi, [1 / 3, 1 / 3])


def test_mnl_two_by_two_example():
    # odds are 4 and 0.25, so rates are 4/5.25 and 0.25/5.25
    inst = Instance(n=2, m=2, k=2, p=[[0.8, 0.5], [0.5, 0.2]], model=MNL)
    pi = mnl_ctr(inst, Allocation({0: 0, 1: 1}))
    np.testing.assert_allclose(pi, [4 / 5.25, 0.25 / 5.25], atol=1e-12)


def test_mnl_total_rate_stays_below_one():
    rng = np.random.default_rng(7)
    for _ in range(50):
        inst = rand_mnl_instance(rng)
        alloc = rand_allocation(rng, inst)
        pi = mnl_ctr(inst, alloc)
        assert pi.sum() < 1.0
        for i in range(inst.n):
            if alloc.position_of(i) is None:
                assert pi[i] == 0.0


def test_mnl_newcomer_dilutes_incumbents():
    inst = Instance(n=2, m=2, k=2, p=[[0.6, 0.6], [0.3, 0.3]], model=MNL)
    before = mnl_ctr(inst, Allocation({0: 0}))
    after = mnl_ctr(inst, Allocation({0: 0, 1: 1}))
    assert after[0] < before[0]


def test_cascade_lone_ad_no_discount():
    inst = Instance(n=1, m=1, k=1, p=[[0.5]], model=CASCADE)
    chi = AugmentedAllocation(Allocation({0: 0}), Permutation({0: 1}))
    assert cascade_ctr(inst, chi)[0] == pytest.approx(0.5)


def test_cascade_order_matters():
    inst = Instance(n=2, m=2, k=2, p=[[0.5, 0.0], [0.0, 0.4]], model=CASCADE)
    alloc = Allocation({0: 0, 1: 1})
    first = AugmentedAllocation(alloc, Permutation({0: 1, 1: 2}))
    np.testing.assert_allclose(cascade_ctr(inst, first), [0.5, 0.2])
    swapped = AugmentedAllocation(alloc, Permutation({0: 2, 1: 1}))
    np.testing.assert_allclose(cascade_ctr(inst, swapped), [0.3, 0.4])


def test_cascade_total_rate_at_most_one():
    rng = np.random.default_rng(11)
    for _ in range(50):
        inst = rand_cascade_instance(rng)
        alloc = rand_allocation(rng, inst)
        ranks = {j: r + 1 for r, j in enumerate(alloc.assignment.values())}
        chi = AugmentedAllocation(alloc, Permutation(ranks))
        pi = cascade_ctr(inst, chi)
        assert np.all(pi >= 0.0)
        assert pi.sum() <= 1.0 + 1e-12


def test_cascade_relabeling_permutes_consistently():
    rng = np.random.default_rng(13)
    inst = rand_cascade_instance(rng, nmax=4, mmax=4)
    alloc = Allocation({i: i for i in range(min(inst.n, inst.m, inst.k))})
    positions = list(alloc.assignment.values())
    base = None
    for shift in range(len(positions)):
        rolled = positions[shift:] + positions[:shift]
        chi = AugmentedAllocation(
            alloc, Permutation({j: r + 1 for r, j in enumerate(rolled)})
        )
        pi = cascade_ctr(inst, chi)
        assert pi.sum() <= 1.0 + 1e-12
        if base is None:
            base = pi
        elif shift and len(positions) > 1:
            assert not np.allclose(pi, base) or np.allclose(
                inst.p, inst.p[0, 0]
            )


def test_welfare_is_dot_product():
    assert welfare([2.0, 1.0], [0.5, 0.2]) == pytest.approx(1.2)
    assert welfare([1.0, 1.0], [0.8, 0.16]) == pytest.approx(0.96)
    assert welfare([5.0, 3.0], [0.0, 0.0]) == 0.0


def test_welfare_length_mismatch():
    with pytest.raises(ValidationError):
        welfare([1.0], [0.5, 0.5])


def test_empty_allocation_is_feasible_and_worthless():
    inst = Instance(n=2, m=2, k=2, p=[[0.5, 0.5]] * 2, model=MNL)
    pi = mnl_ctr(inst, Allocation({}))
    assert welfare([3.0, 4.0], pi) == 0.0


def test_instance_json_round_trip():
    inst = Instance(n=2, m=3, k=2, p=np.full((2, 3), 0.25), model=CASCADE)
    again = instance_from_dict(instance_to_dict(inst))
    assert again.n == 2 and again.m == 3 and again.k == 2
    assert again.model == CASCADE
    np.testing.assert_array_equal(again.p, inst.p)


def test_instance_from_dict_validates():
    with pytest.raises(ValidationError):
        instance_from_dict({"n": 1, "m": 1, "k": 1, "model": "mnl",
                            "p": [[1.0]]})
    with pytest.raises(ValidationError):
        instance_from_dict({"n": 1, "m": 1, "model": "mnl", "p": [[0.5]]})


def test_instance_matrix_is_read_only():
    inst = Instance(n=1, m=1, k=1, p=[[0.5]], model=MNL)
    with pytest.raises(ValueError):
        inst.p[0, 0] = 0.9
