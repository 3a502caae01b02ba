"""Truthful mechanisms on top of the winner-determination solvers.

VCG maximizes welfare with an exact solver and charges each advertiser the
externality it imposes (n + 1 solver calls).  The revenue mechanism solves
winner determination with virtual values as bids, excludes advertisers whose
virtual value is non-positive, and prices by the envelope rule

    t_i = v_i * y_i(v) - integral_0^{v_i} y_i(z, v_-i) dz,

where y_i is advertiser i's click probability as a function of its own
report.  The integral is a right-endpoint Riemann sum on a uniform grid:
for a monotone allocation curve the right endpoints over-count the integral,
so payments err on the low side, keeping individual rationality exact and
conceding only an O(v_max / grid_size) incentive slack.

Exact solvers are monotone automatically; approximate ones are admitted
only after a monotonicity audit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (
    Allocation,
    AugmentedAllocation,
    CtrVector,
    Instance,
    Permutation,
    cascade_ctr,
)
from .cascade_wdp import bucketize, combined_cascade_candidates
from .distributions import ValueDistribution, is_regular
from .mnl_wdp import solve_mnl_wdp
from .oracle import brute_force_wdp_cascade

EXACT_MNL = "exact_mnl"
BRUTE_CASCADE = "brute_cascade"
GREEDY_CASCADE = "greedy_cascade"

DEFAULT_GRID_SIZE = 1024
MONOTONE_TOL = 1e-9

SolveFn = Callable[[Instance, np.ndarray], tuple[AugmentedAllocation, CtrVector]]


class IrregularDistributionError(ValueError):
    """Virtual values decrease somewhere; ironing is out of scope here."""


def _clip_dust(payment: float, tol: float = 1e-9) -> float:
    """Zero out sub-tolerance negative payments (leave-one-out subtraction
    dust); anything genuinely negative stays visible."""
    return 0.0 if -tol < payment < 0.0 else payment


class NonMonotoneSolverError(ValueError):
    """An approximate solver failed its monotonicity audit."""


@dataclass(frozen=True)
class SolverHandle:
    """A winner-determination routine plus what kind of guarantee it carries.

    ``solve(inst, bids)`` must never allocate an advertiser whose bid is
    non-positive, must be deterministic in its reported CTR curve, and for
    the greedy cascade kind the CTRs are the uniform average over the
    per-bucket outcomes (the sampled allocation is representative only).
    """

    solve: SolveFn
    kind: str

    @property
    def is_exact(self) -> bool:
        return self.kind in (EXACT_MNL, BRUTE_CASCADE)


@dataclass(frozen=True)
class MechanismOutcome:
    augmented: AugmentedAllocation
    payments: np.ndarray
    ctrs: CtrVector
    utilities: np.ndarray


def exact_mnl_solver() -> SolverHandle:
    def solve(inst: Instance, bids: np.ndarray):
        result = solve_mnl_wdp(inst, bids)
        sigma = Permutation(
            {j: r + 1 for r, (_, j) in enumerate(result.allocation.pairs())}
        )
        return AugmentedAllocation(result.allocation, sigma), result.ctrs

    return SolverHandle(solve=solve, kind=EXACT_MNL)


def brute_cascade_solver() -> SolverHandle:
    def solve(inst: Instance, bids: np.ndarray):
        bids = np.asarray(bids, dtype=float)
        active = {i for i in range(inst.n) if bids[i] > 0.0}
        chi, _w = brute_force_wdp_cascade(inst, bids, active=active)
        return chi, cascade_ctr(inst, chi)

    return SolverHandle(solve=solve, kind=BRUTE_CASCADE)


def greedy_cascade_solver(rng: np.random.Generator) -> SolverHandle:
    """Randomized bucket solver wrapped for mechanism use: CTRs are the
    deterministic uniform mixture over populated buckets, and the returned
    allocation is one bucket's outcome sampled via ``rng``."""

    def solve(inst: Instance, bids: np.ndarray):
        bids = np.asarray(bids, dtype=float)
        clipped = np.where(bids > 0.0, bids, 0.0)
        masked = Instance(
            n=inst.n, m=inst.m, k=inst.k,
            p=np.where((clipped > 0.0)[:, None], inst.p, 0.0),
            model=inst.model,
        )
        buckets = bucketize(masked)
        candidates = combined_cascade_candidates(masked, clipped)
        populated = [c for b, c in zip(buckets, candidates) if b.edges]
        if not populated:
            empty = AugmentedAllocation(Allocation({}), Permutation({}))
            return empty, np.zeros(inst.n)
        mixture = np.mean(
            [cascade_ctr(masked, c) for c in populated], axis=0
        )
        pick = populated[int(rng.integers(len(populated)))]
        return pick, mixture

    return SolverHandle(solve=solve, kind=GREEDY_CASCADE)


def threshold_dropping_solver(
    base: SolverHandle, threshold: float = 5.0
) -> SolverHandle:
    """Diagnostic fixture with a planted monotonicity bug: once the highest
    bid passes ``threshold``, that bidder is dropped before solving.  The
    audit must catch it; never use for payments."""

    def solve(inst: Instance, bids: np.ndarray):
        bids = np.asarray(bids, dtype=float).copy()
        top = int(np.argmax(bids))
        if bids[top] > threshold:
            bids[top] = 0.0
        return base.solve(inst, bids)

    return SolverHandle(solve=solve, kind=base.kind)


def vcg(inst: Instance, values, solver: SolverHandle) -> MechanismOutcome:
    """Welfare-maximizing auction with externality payments.

    t_i = (others' best welfare with i's bid zeroed)
        - (others' welfare at the chosen allocation),
    which is non-negative and never exceeds v_i * pi_i.
    """
    if not solver.is_exact:
        raise NonMonotoneSolverError(
            "externality payments require an exact solver"
        )
    values = np.asarray(values, dtype=float)
    if np.any(values < 0.0):
        raise ValueError("values must be non-negative")
    chi, pi = solver.solve(inst, values)
    payments = np.zeros(inst.n)
    for i in range(inst.n):
        if values[i] == 0.0 and pi[i] == 0.0:
            continue
        without = values.copy()
        without[i] = 0.0
        _chi_wo, pi_wo = solver.solve(inst, without)
        others = np.arange(inst.n) != i
        payments[i] = _clip_dust(
            float(values[others] @ pi_wo[others] - values[others] @ pi[others])
        )
    utilities = values * pi - payments
    return MechanismOutcome(
        augmented=chi, payments=payments, ctrs=pi, utilities=utilities
    )


def virtual_value(dist: ValueDistribution, v: float) -> float:
    """phi(v) = v - (1 - F(v)) / f(v); errors on zero density."""
    return dist.virtual_value(v)


def _virtual_or_excluded(dist: ValueDistribution, v: float) -> float:
    """Virtual value extended off-support: reports below the support can
    never win (treated as -inf) and reports above it have no hazard mass
    left, so phi continues as the identity."""
    if v < dist.lo:
        return float("-inf")
    if v > dist.hi:
        return float(v)
    return dist.virtual_value(v)


def myerson(
    inst: Instance,
    values,
    dists: list[ValueDistribution],
    solver: SolverHandle,
    grid_size: int = DEFAULT_GRID_SIZE,
) -> MechanismOutcome:
    """Revenue-maximizing auction via virtual-value winner determination.

    Advertisers with non-positive virtual value are excluded (the standard
    reserve behavior; the solvers assume non-negative bids anyway).  The
    envelope integral uses a ``grid_size``-point right-endpoint sum, so the
    mechanism is individually rational exactly and incentive compatible up
    to roughly v_max / grid_size.
    """
    values = np.asarray(values, dtype=float)
    if len(dists) != inst.n:
        raise ValueError(f"expected {inst.n} distributions, got {len(dists)}")
    if grid_size < 1:
        raise ValueError("grid_size must be positive")
    for dist in dists:
        if not is_regular(dist):
            raise IrregularDistributionError(
                "virtual values decrease on the check grid; ironing is not"
                " supported"
            )
    if not solver.is_exact:
        _audit_or_raise(solver, inst, values)

    base_bids = np.maximum(
        [_virtual_or_excluded(dists[t], float(values[t])) for t in range(inst.n)],
        0.0,
    )

    def solve_with_report(i: int | None, z: float):
        if i is None:
            return solver.solve(inst, base_bids)
        bids = base_bids.copy()
        bids[i] = max(_virtual_or_excluded(dists[i], z), 0.0)
        return solver.solve(inst, bids)

    chi, pi = solve_with_report(None, 0.0)

    payments = np.zeros(inst.n)
    for i in range(inst.n):
        if pi[i] <= 0.0 or values[i] <= 0.0:
            continue  # monotone curve below a zero endpoint integrates to 0
        step = values[i] / grid_size

        def curve(g: int, _i=i, _step=step) -> float:
            _chi, pi_g = solve_with_report(_i, g * _step)
            return float(pi_g[_i])

        area = step * monotone_grid_sum(curve, grid_size, hi_value=float(pi[i]))
        payments[i] = _clip_dust(values[i] * pi[i] - area)
    utilities = values * pi - payments
    return MechanismOutcome(
        augmented=chi, payments=payments, ctrs=pi, utilities=utilities
    )


def monotone_grid_sum(
    curve: Callable[[int], float], grid_size: int, hi_value: float | None = None
) -> float:
    """Sum curve(1) + ... + curve(grid_size) for a non-decreasing curve.

    Identical by construction to evaluating every grid point, but equal
    endpoint values pin every point between them, so the number of curve
    evaluations scales with the number of level changes, not the grid size.
    """
    cache: dict[int, float] = {}

    def at(g: int) -> float:
        if g not in cache:
            cache[g] = curve(g)
        return cache[g]

    if hi_value is not None:
        cache[grid_size] = hi_value

    def span(lo: int, hi: int) -> float:
        if at(lo) == at(hi):
            return (hi - lo + 1) * at(lo)
        if lo + 1 == hi:
            return at(lo) + at(hi)
        mid = (lo + hi) // 2
        return span(lo, mid) + span(mid + 1, hi)

    if grid_size == 1:
        return at(1)
    return span(1, grid_size)


def monotonicity_audit(
    solver: SolverHandle, inst: Instance, bids_template, i: int, grid
) -> tuple[float, float, float, float] | None:
    """Sweep advertiser ``i``'s bid upward along ``grid`` and report the
    first drop of its click-through rate beyond tolerance, if any.

    Returns None on a clean sweep, else (bid_before, bid_after, ctr_before,
    ctr_after).  Exact solvers pass by optimality; approximate solvers must
    earn it.
    """
    bids = np.asarray(bids_template, dtype=float).copy()
    prev_bid, prev_pi = None, None
    for b in sorted(float(g) for g in grid):
        bids[i] = b
        _chi, pi = solver.solve(inst, bids)
        if prev_pi is not None and pi[i] < prev_pi - MONOTONE_TOL:
            return (prev_bid, b, prev_pi, float(pi[i]))
        prev_bid, prev_pi = b, float(pi[i])
    return None


def _audit_or_raise(solver: SolverHandle, inst: Instance, values) -> None:
    values = np.asarray(values, dtype=float)
    top = max(1.0, float(values.max(initial=0.0)) * 2.0)
    grid = np.linspace(0.0, top, 9)
    for i in range(inst.n):
        hit = monotonicity_audit(solver, inst, values, i, grid)
        if hit is not None:
            raise NonMonotoneSolverError(
                f"solver CTR for advertiser {i} drops from {hit[2]:.6g} to"
                f" {hit[3]:.6g} as its bid moves {hit[0]:.6g} -> {hit[1]:.6g}"
            )
