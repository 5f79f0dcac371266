"""Cutting-plane power optimization for Gaussian relay networks.

All three programs share one loop: keep a small list of active cuts, solve
the convex inner problem over just those cuts, find the true minimum cut at
the new power allocation by SFM, and add it if it is violated.

minimize_power   min sum(p)            s.t. every cut >= R0, 0 <= p <= p_max
maximize_rate    max R                 s.t. every cut >= R, sum(p) <= P_tot
general_program  min mu1 R + mu2 P     over the joint (R, P, p) program
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import netmodel, sfm
from .cvx import BarrierConfig, InnerProblem, solve_inner
from .errors import DomainError, NumericalError

log = logging.getLogger(__name__)

INFEASIBLE_MESSAGE = "The constraints are infeasible."


@dataclass
class PowOptResult:
    p_star: np.ndarray
    min_cut: netmodel.Cut | None
    min_cut_value: float
    total_power: float
    constraint_sets: list = field(default_factory=list)
    iterations: int = 0
    status: str = "optimal"  # "optimal" | "infeasible"
    rate: float = math.nan  # inner-problem R at termination
    objective: float = math.nan
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "p_star": [float(v) for v in self.p_star],
            "total_power": float(self.total_power),
            "min_cut": None if self.min_cut is None else self.min_cut.nodes(),
            "min_cut_value": float(self.min_cut_value),
            "rate": None if math.isnan(self.rate) else float(self.rate),
            "objective": None if math.isnan(self.objective) else float(self.objective),
            "iterations": int(self.iterations),
            "constraint_sets": [c.nodes() for c in self.constraint_sets],
            "message": self.message,
        }


@dataclass
class SimplifyResult:
    kept: frozenset
    p_star: np.ndarray
    total_power: float
    augmentations: int
    full: PowOptResult = field(repr=False, default=None)
    reduced: PowOptResult = field(repr=False, default=None)


def _pmax_vector(net, p_max):
    pm = netmodel.as_power(net, p_max, "p_max").copy()
    pm[net.d] = 0.0
    return pm


def _solve(prob, config, hint):
    cfg = config or BarrierConfig()
    sol = solve_inner(prob, config=cfg, hint=hint)
    if sol.status == "numerical-failure":
        log.info("inner solve failed (%s); retrying with tighter tolerance", sol.message)
        tighter = BarrierConfig(**{**cfg.__dict__, "tol": cfg.tol / 10, "newton_tol": cfg.newton_tol / 10})
        sol = solve_inner(prob, config=tighter, hint=hint)
        if sol.status == "numerical-failure":
            raise NumericalError(f"inner barrier solve failed twice: {sol.message}")
    return sol


def _cut_key(net, cut):
    # canonical relay-only bitmask
    return cut.mask & ~(1 << net.s)


def minimize_power(net: netmodel.GaussianNetwork, R0: float, p_max=100.0, tol: float = 1e-6,
                   config: BarrierConfig | None = None, max_iter: int | None = None) -> PowOptResult:
    """Minimum total power so that every cut carries at least ``R0`` bits.

    Cutting-plane loop: start from the min cut at full power, then alternate
    inner solves and SFM min-cut queries until the min cut at ``p*`` is
    already active or meets ``R0 - tol``.
    """
    if R0 < 0 or not math.isfinite(R0):
        raise DomainError("R0 must be a finite nonnegative rate")
    pmax = _pmax_vector(net, p_max)
    if not np.any(pmax > 0):
        raise DomainError("p_max must be positive somewhere")
    if max_iter is None:
        max_iter = 1 << max(0, net.n - 2)

    full = sfm.min_cut(net, pmax)
    if R0 > full.value:
        return PowOptResult(np.zeros(net.n), full.cut, full.value, 0.0, [], 0, "infeasible",
                            message=INFEASIBLE_MESSAGE)

    p_star = np.zeros(net.n)
    cuts, keys = [], set()
    omega, value = full.cut, netmodel.gaussian_cut_value(net, full.cut, p_star)
    sol = None
    while _cut_key(net, omega) not in keys and value < R0 - tol:
        if len(cuts) >= max_iter:
            raise NumericalError(f"cutting-plane loop exceeded {max_iter} iterations")
        cuts.append(omega)
        keys.add(_cut_key(net, omega))
        prob = InnerProblem(net, cuts, R0=R0, p_max=pmax, mu_p=1.0)
        sol = _solve(prob, config, hint=p_star if sol is not None else None)
        if sol.status == "infeasible":
            # the pre-check passed, so R0 sits on the boundary of what p_max
            # reaches and there is no interior point; full power is feasible
            log.info("no interior point at R0=%g; returning the p_max allocation", R0)
            total = float(pmax.sum())
            return PowOptResult(pmax.copy(), full.cut, full.value, total, cuts, len(cuts), "optimal",
                                rate=R0, objective=total, message="boundary: only p_max meets R0")
        p_star = sol.p
        mc = sfm.min_cut(net, p_star)
        omega, value = mc.cut, mc.value
        log.debug("iteration %d: min cut %s at %.6f bits, total power %.6f",
                  len(cuts), omega, value, p_star.sum())
    total = float(p_star.sum())
    return PowOptResult(p_star, omega, value, total, cuts, len(cuts), "optimal",
                        rate=R0, objective=total)


def _cutting_plane(net, pmax, R0, P_tot, mu_R, mu_P, tol, config, max_iter, start_power):
    start = sfm.min_cut(net, start_power)
    cuts, keys = [start.cut], {_cut_key(net, start.cut)}
    sol = None
    while True:
        prob = InnerProblem(net, cuts, R0=R0, p_max=pmax, P_tot=P_tot, mu_R=mu_R, mu_P=mu_P)
        sol = _solve(prob, config, hint=None if sol is None else sol.p)
        if sol.status == "infeasible":
            return sol, cuts, None
        mc = sfm.min_cut(net, sol.p)
        if mc.value >= sol.R - tol or _cut_key(net, mc.cut) in keys:
            return sol, cuts, mc
        if len(cuts) >= max_iter:
            raise NumericalError(f"cutting-plane loop exceeded {max_iter} iterations")
        cuts.append(mc.cut)
        keys.add(_cut_key(net, mc.cut))


def general_program(net: netmodel.GaussianNetwork, mu1: float, mu2: float, R0: float = 0.0,
                    P_tot: float | None = None, p_max=100.0, tol: float = 1e-6,
                    config: BarrierConfig | None = None, max_iter: int | None = None) -> PowOptResult:
    """Minimize ``mu1 * R + mu2 * P`` over rate, power budget and allocation."""
    if not all(math.isfinite(v) for v in (mu1, mu2, R0)):
        raise DomainError("mu1, mu2 and R0 must be finite")
    pmax = _pmax_vector(net, p_max)
    if P_tot is None:
        P_tot = float(pmax.sum())
    if P_tot < 0 or R0 < 0:
        raise DomainError("P_tot and R0 must be nonnegative")
    if max_iter is None:
        max_iter = 1 << max(0, net.n - 2)
    budget = pmax * min(1.0, P_tot / pmax.sum()) if pmax.sum() > 0 else pmax

    if P_tot == 0 or not np.any(pmax > 0):
        mc = sfm.min_cut(net, np.zeros(net.n))
        if R0 > 0:
            return PowOptResult(np.zeros(net.n), mc.cut, mc.value, 0.0, [], 0, "infeasible",
                                message=INFEASIBLE_MESSAGE)
        return PowOptResult(np.zeros(net.n), mc.cut, mc.value, 0.0, [], 0, "optimal",
                            rate=0.0, objective=0.0)

    top = sfm.min_cut(net, budget)
    if R0 > top.value:
        return PowOptResult(np.zeros(net.n), top.cut, top.value, 0.0, [], 0, "infeasible",
                            message=INFEASIBLE_MESSAGE)
    sol, cuts, mc = _cutting_plane(net, pmax, R0, P_tot, mu1, mu2, tol, config, max_iter, budget)
    if sol.status == "infeasible":
        return PowOptResult(np.zeros(net.n), top.cut, top.value, 0.0, cuts, len(cuts), "infeasible",
                            message=INFEASIBLE_MESSAGE)
    # R is only pinned by its constraints; report the achieved min-cut rate
    return PowOptResult(sol.p, mc.cut, mc.value, float(sol.p.sum()), cuts, len(cuts), "optimal",
                        rate=float(sol.R), objective=mu1 * sol.R + mu2 * sol.P)


def maximize_rate(net: netmodel.GaussianNetwork, P_tot: float, p_max=100.0, tol: float = 1e-6,
                  config: BarrierConfig | None = None, max_iter: int | None = None) -> PowOptResult:
    """Largest min-cut rate achievable with total power at most ``P_tot``."""
    if not math.isfinite(P_tot) or P_tot < 0:
        raise DomainError("P_tot must be a finite nonnegative power")
    res = general_program(net, -1.0, 0.0, 0.0, P_tot, p_max, tol, config, max_iter)
    if res.status == "optimal":
        res.objective = res.min_cut_value
    return res


def simplify_network(net: netmodel.GaussianNetwork, R0: float, p_max=100.0, P_th: float = 1.0,
                     tol: float = 1e-6, config: BarrierConfig | None = None,
                     full: PowOptResult | None = None) -> SimplifyResult:
    """Drop relays whose optimal power is below ``P_th`` and re-optimize.

    If the reduced network cannot reach ``R0``, dropped relays are re-added
    one at a time in decreasing order of their optimal power. ``full`` may
    pass in an existing full-network ``minimize_power`` result.
    """
    pmax = _pmax_vector(net, p_max)
    if full is None:
        full = minimize_power(net, R0, pmax, tol, config)
    if full.status != "optimal":
        raise DomainError("network simplification needs a feasible full-network problem")
    rel = netmodel.relays(net)
    kept = [v for v in rel if full.p_star[v] >= P_th]
    dropped = sorted((v for v in rel if full.p_star[v] < P_th), key=lambda v: (-full.p_star[v], v))
    augment = 0
    while True:
        sub, idx = net.restrict(kept)
        res = minimize_power(sub, R0, pmax[idx], tol, config)
        if res.status == "optimal":
            break
        if not dropped:
            raise NumericalError("reduced network infeasible even with every relay restored")
        kept.append(dropped.pop(0))
        augment += 1
    p = np.zeros(net.n)
    p[idx] = res.p_star
    return SimplifyResult(frozenset(kept), p, float(p.sum()), augment, full, res)


# --------------------------------------------------------------------------
# grid-search verification oracle


def _enum_cut_values(net, P):
    """Min over every cut of the dense log-det, for a batch of power vectors ``P`` (m x n)."""
    best = np.full(P.shape[0], np.inf)
    for cut in netmodel.all_cuts(net):
        m = netmodel.cut_tx(net, cut).astype(bool)
        A = net.H[np.ix_(np.flatnonzero(m), np.flatnonzero(~m))].T
        M = np.einsum("ri,ki,si->krs", A, P[:, m], A.conj())
        M = M + np.eye(A.shape[0])[None]
        _, ld = np.linalg.slogdet(M)
        best = np.minimum(best, ld / math.log(2.0))
    return best


def grid_oracle(net: netmodel.GaussianNetwork, program: str, step: float, R0: float = 0.0,
                P_tot: float | None = None, p_max=100.0, mu1: float = 0.0, mu2: float = 1.0,
                refine: int = 2, chunk: int = 200_000) -> float:
    """Brute-force optimum of a small power program by grid search.

    ``program`` is ``"min-power"``, ``"max-rate"`` or ``"general"``. At most
    three nodes may have positive ``p_max`` (the destination never counts).
    The box ``[0, p_max]^k`` is searched exhaustively at ``step``; each
    refinement pass then re-grids a window of +-2 steps around the incumbent
    at a ten times finer step. Every grid point is scored by enumerating all
    cuts with a dense log-det, independent of the SFM and barrier code.
    """
    pmax = _pmax_vector(net, p_max)
    free = [i for i in range(net.n) if pmax[i] > 0]
    if len(free) > 3:
        raise DomainError(f"grid oracle handles at most 3 power variables, got {len(free)}")
    if P_tot is None:
        P_tot = float(pmax.sum())
    if program == "min-power":
        mu1, mu2 = 0.0, 1.0
    elif program == "max-rate":
        mu1, mu2, R0 = -1.0, 0.0, 0.0
    elif program != "general":
        raise DomainError(f"unknown program {program!r}")

    def score(points):
        P = np.zeros((len(points), net.n))
        P[:, free] = points
        tot = points.sum(axis=1)
        rate = _enum_cut_values(net, P)
        ok = (tot <= P_tot + 1e-12) & (rate >= R0 - 1e-12)
        # R sits at its cheapest feasible value; P at sum(p) or P_tot
        R = rate if mu1 < 0 else np.full(len(points), R0)
        Pv = tot if mu2 >= 0 else np.full(len(points), P_tot)
        obj = mu1 * R + mu2 * Pv
        return np.where(ok, obj, np.inf)

    def search(lo, hi, h):
        axes = [np.arange(l, u + h / 2, h) for l, u in zip(lo, hi)]
        axes = [np.clip(a, 0, c) for a, c in zip(axes, pmax[free])]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(free))
        best_v, best_x = np.inf, None
        for k in range(0, len(grid), chunk):
            part = grid[k:k + chunk]
            sc = score(part)
            j = int(np.argmin(sc))
            if sc[j] < best_v:
                best_v, best_x = float(sc[j]), part[j]
        return best_v, best_x

    lo = np.zeros(len(free))
    hi = pmax[free].copy()
    best_v, best_x = search(lo, hi, step)
    h = step
    for _ in range(refine):
        if best_x is None:
            break
        h /= 10
        v, x = search(np.maximum(best_x - 20 * h, 0), np.minimum(best_x + 20 * h, pmax[free]), h)
        if v <= best_v:
            best_v, best_x = v, x
    if program == "max-rate":
        return -best_v
    return best_v
