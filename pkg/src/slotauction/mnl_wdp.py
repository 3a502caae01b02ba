"""Exact winner determination under the MNL user model.

``solve_mnl_wdp`` goes through the linear-program route; ``dinkelbach_check``
solves the same ratio objective by parametric search over max-weight
matchings and exists purely as an independent cross-check of the LP path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Allocation, CtrVector, Instance, MNL, ValidationError, mnl_ctr
from .linfrac import SimplexError, build_charnes_cooper, recover_allocation, solve_lp

DINKELBACH_TOL = 1e-12
DINKELBACH_MAX_ITER = 100


@dataclass(frozen=True)
class WdpResult:
    """An optimal matching with its bid-weighted objective and realized CTRs."""

    allocation: Allocation
    objective: float
    ctrs: CtrVector


def _positive_bidders(bids: np.ndarray) -> list[int]:
    return [i for i in range(bids.shape[0]) if bids[i] > 0.0]


def solve_mnl_wdp(inst: Instance, bids) -> WdpResult:
    """Maximize sum_i b_i pi_i(x) over feasible matchings, exactly.

    Advertisers with non-positive bids are excluded up front: matching them
    can only dilute the shared MNL denominator, so exclusion is optimal and
    keeps the LP's b >= 0, b != 0 precondition satisfied.
    """
    if inst.model != MNL:
        raise ValidationError("solve_mnl_wdp needs an MNL instance")
    bids = np.asarray(bids, dtype=float)
    if bids.shape != (inst.n,):
        raise ValidationError(f"expected {inst.n} bids, got {bids.shape}")
    keep = _positive_bidders(bids)
    if not keep:
        return WdpResult(Allocation({}), 0.0, np.zeros(inst.n))

    sub = Instance(
        n=len(keep), m=inst.m, k=inst.k, p=inst.p[keep, :], model=MNL
    )
    lp = build_charnes_cooper(sub, bids[keep])
    sol = solve_lp(lp)
    if sol.status != "optimal":
        raise SimplexError(f"winner determination LP came back {sol.status}")
    sub_alloc = recover_allocation(sol)
    alloc = Allocation({keep[i]: j for i, j in sub_alloc.assignment.items()})
    pi = mnl_ctr(inst, alloc)
    return WdpResult(allocation=alloc, objective=float(bids @ pi), ctrs=pi)


def dinkelbach_check(inst: Instance, bids) -> WdpResult:
    """Solve the same problem by parametric search, avoiding the LP entirely.

    Repeatedly: given a payoff guess lam, find the max-weight matching under
    edge weights (b_i - lam) * exp(rho_ij) with non-positive weights dropped
    and at most K edges, then move lam to the matched ratio
    sum b_i x e^rho / (1 + sum x e^rho).  The guess increases strictly until
    it fixes at the optimum, which happens after finitely many steps.
    """
    if inst.model != MNL:
        raise ValidationError("dinkelbach_check needs an MNL instance")
    bids = np.asarray(bids, dtype=float)
    keep = _positive_bidders(bids)
    if not keep:
        return WdpResult(Allocation({}), 0.0, np.zeros(inst.n))
    expo = np.exp(inst.log_odds())

    lam = 0.0
    alloc = Allocation({})
    for _ in range(DINKELBACH_MAX_ITER):
        weights = {}
        for i in keep:
            for j in range(inst.m):
                w = (bids[i] - lam) * expo[i, j]
                if w > 0.0:
                    weights[(i, j)] = w
        matching = max_weight_matching(weights, cap=inst.k)
        num = sum(bids[i] * expo[i, j] for i, j in matching.items())
        den = 1.0 + sum(expo[i, j] for i, j in matching.items())
        new_lam = num / den
        if new_lam - lam <= DINKELBACH_TOL:
            alloc = Allocation(matching)
            break
        lam = new_lam
        alloc = Allocation(matching)
    else:
        raise RuntimeError(
            f"parametric search did not settle in {DINKELBACH_MAX_ITER} steps"
        )
    pi = mnl_ctr(inst, alloc)
    return WdpResult(allocation=alloc, objective=float(bids @ pi), ctrs=pi)


# ---------------------------------------------------------------------------
# Max-weight bipartite matching under a cardinality cap, by repeated
# best-gain augmenting paths.  Each augmentation yields the optimal matching
# of its cardinality, so stopping at the first non-positive gain (or at the
# cap) is exact.  Deliberately shares nothing with the simplex path.
# ---------------------------------------------------------------------------

NEG_INF = float("-inf")


def max_weight_matching(
    weights: dict[tuple[int, int], float], cap: int
) -> dict[int, int]:
    """Return the advertiser->position map of a maximum-weight matching with
    at most ``cap`` edges.  ``weights`` must carry positive weights only."""
    match_l: dict[int, int] = {}
    match_r: dict[int, int] = {}
    for _ in range(cap):
        gain, path = _best_augmenting_path(weights, match_l, match_r)
        if gain <= 1e-12 or not path:
            break
        for i, j in path:
            match_l[i] = j
            match_r[j] = i
    return dict(match_l)


def _best_augmenting_path(weights, match_l, match_r):
    lefts = {i for i, _ in weights}
    rights = {j for _, j in weights}
    dist_l = {i: (0.0 if i not in match_l else NEG_INF) for i in lefts}
    dist_r = {j: NEG_INF for j in rights}
    pred_r: dict[int, int] = {}

    for _ in range(len(lefts) + len(rights) + 1):
        changed = False
        for (i, j), w in weights.items():
            if match_l.get(i) == j:
                continue
            cand = dist_l[i] + w
            if cand > dist_r[j] + 1e-12:
                dist_r[j] = cand
                pred_r[j] = i
                changed = True
        for i, j in match_l.items():
            cand = dist_r[j] - weights[(i, j)]
            if cand > dist_l[i] + 1e-12:
                dist_l[i] = cand
                changed = True
        if not changed:
            break

    free_rights = [j for j in rights if j not in match_r]
    if not free_rights:
        return 0.0, []
    end = max(free_rights, key=lambda j: dist_r[j])
    if dist_r[end] == NEG_INF:
        return 0.0, []

    path = []
    seen = set()
    cur = end
    while True:
        if cur in seen:
            raise RuntimeError("augmenting-path reconstruction cycled")
        seen.add(cur)
        i = pred_r[cur]
        path.append((i, cur))
        if i not in match_l:
            break
        cur = match_l[i]
    return dist_r[end], path
