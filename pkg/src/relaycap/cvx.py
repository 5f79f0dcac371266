"""Convex inner problem for power allocation over a finite set of cuts.

Variables are ``z = (R, P, p)``. The program is

    minimize    mu_R * R + mu_P * P + mu_p . p
    subject to  R <= F(cut, p)        for every cut in the active list
                0 <= p <= p_max,  sum(p) <= P,  R0 <= R,  P <= P_tot

where ``F(cut, p) = log2 det(I + H P H^H)`` is concave in ``p``. It is solved
with a log-barrier interior-point method using exact gradients and Hessians
of the log-det constraints.

This module also provides the infeasibility measure over *all* cuts (via
SFM) and the separating hyperplanes used by cutting-plane and ellipsoid type
outer methods.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, fields

import numpy as np
import scipy.linalg

from . import kernels, netmodel, sfm
from .errors import DomainError, NumericalError

log = logging.getLogger(__name__)

LN2 = netmodel.LN2


@dataclass
class BarrierConfig:
    """Interior-point schedule and tolerances."""

    t0: float = 1.0
    factor: float = 10.0
    tol: float = 1e-8  # stop once (barrier terms) / t <= tol
    newton_tol: float = 1e-9  # on half the squared Newton decrement
    alpha: float = 0.25
    beta: float = 0.5
    max_newton: int = 200  # per barrier stage

    @classmethod
    def from_dict(cls, d) -> "BarrierConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise DomainError(f"unknown solver option(s): {sorted(unknown)}")
        return cls(**d)


@dataclass
class InnerProblem:
    net: netmodel.GaussianNetwork
    cuts: list
    R0: float = 0.0
    p_max: np.ndarray | float = 100.0
    P_tot: float | None = None  # defaults to sum(p_max)
    mu_R: float = 0.0
    mu_P: float = 0.0
    mu_p: np.ndarray | float = 0.0

    def __post_init__(self):
        net = self.net
        self.p_max = netmodel.as_power(net, self.p_max, "p_max")
        self.p_max[net.d] = 0.0
        self.mu_p = np.broadcast_to(np.asarray(self.mu_p, dtype=float), (net.n,)).copy()
        if self.P_tot is None:
            self.P_tot = float(self.p_max.sum())
        vals = [self.R0, self.P_tot, self.mu_R, self.mu_P, *self.mu_p]
        if not all(math.isfinite(v) for v in vals):
            raise DomainError("problem parameters must be finite")
        if self.R0 < 0 or self.P_tot < 0:
            raise DomainError("R0 and P_tot must be nonnegative")
        self.cuts = [netmodel.as_cut(c) for c in self.cuts]
        for c in self.cuts:
            netmodel.cut_tx(net, c)


@dataclass
class InnerSolution:
    R: float
    P: float
    p: np.ndarray
    status: str  # "optimal" | "infeasible" | "numerical-failure"
    duality_gap_estimate: float = math.inf
    newton_steps: int = 0
    message: str = ""
    objective: float = math.nan


class _Barrier:
    """Barrier objective for one InnerProblem; works in reduced coordinates."""

    def __init__(self, prob: InnerProblem):
        self.prob = prob
        net = prob.net
        self.active = np.array([i for i in range(net.n) if i != net.d and prob.p_max[i] > 0], dtype=int)
        self.k = len(self.active)
        self.txs = [netmodel.cut_tx(net, c) for c in prob.cuts]
        self.pmax = prob.p_max[self.active]
        # per cut: positions of its transmitters among the active nodes and the
        # receivers x transmitters gain block (inactive transmitters carry no power)
        pos = {v: j for j, v in enumerate(self.active)}
        self.blocks = []
        for tx in self.txs:
            T = [v for v in np.flatnonzero(tx) if v in pos]
            rx = np.flatnonzero(tx == 0)
            ia = np.array([pos[v] for v in T], dtype=int)
            A = np.ascontiguousarray(net.H[np.ix_(T, rx)].T)
            self.blocks.append((ia, A, np.ix_(2 + ia, 2 + ia)))
        self.c = np.concatenate([[prob.mu_R, prob.mu_P], prob.mu_p[self.active]])
        self.m = len(self.txs) + 2 * self.k + 3

    def full_p(self, pa):
        p = np.zeros(self.prob.net.n)
        p[self.active] = pa
        return p

    def slacks(self, z):
        R, P, pa = z[0], z[1], z[2:]
        prob = self.prob
        lin = np.concatenate([pa, self.pmax - pa, [P - pa.sum(), prob.P_tot - P, R - prob.R0]])
        if np.any(lin <= 0):
            return None
        p = self.full_p(pa)
        cut = np.array([self.prob.net.value_tx(tx, p) - R for tx in self.txs])
        if np.any(cut <= 0):
            return None
        return lin, cut

    def phi(self, z, t):
        s = self.slacks(z)
        if s is None:
            return math.inf
        lin, cut = s
        return t * float(self.c @ z) - float(np.log(lin).sum()) - float(np.log(cut).sum())

    def grad_hess(self, z, t):
        k = self.k
        R, P, pa = z[0], z[1], z[2:]
        prob = self.prob
        g = t * self.c.copy()
        Hm = np.zeros((k + 2, k + 2))
        # linear terms: -log(b - a.z) contributes a/s and a a^T / s^2
        lo, hi = pa, self.pmax - pa
        g[2:] += -1.0 / lo + 1.0 / hi
        Hm[2:, 2:] += np.diag(1.0 / lo**2 + 1.0 / hi**2)
        s_sum = P - pa.sum()
        a = np.concatenate([[0.0, 1.0], -np.ones(k)])
        g -= a / s_sum
        Hm += np.outer(a, a) / s_sum**2
        s_cap = prob.P_tot - P
        g[1] += 1.0 / s_cap
        Hm[1, 1] += 1.0 / s_cap**2
        s_r = R - prob.R0
        g[0] -= 1.0 / s_r
        Hm[0, 0] += 1.0 / s_r**2
        for ia, A, ix in self.blocks:
            F, gF, W = _cut_terms(A, pa[ia])
            s = F - R
            da = np.zeros(k + 2)
            da[0] = -1.0
            da[2 + ia] = gF
            g -= da / s
            Hm += np.outer(da, da) / s**2
            Hm[ix] += (np.abs(W) ** 2) / (LN2 * s)
        return g, Hm


def _cut_terms(A, pt):
    """Value, gradient and ``W = A^H M^-1 A`` of one cut block (receivers x transmitters)."""
    t = A.shape[1]
    if np.iscomplexobj(A):
        W = np.empty((t, t), dtype=np.complex128)
        fn = kernels.cut_terms_complex
    else:
        W = np.empty((t, t))
        fn = kernels.cut_terms_real
    try:
        value = fn(A, np.ascontiguousarray(pt, dtype=float), W)
    except ArithmeticError as exc:
        raise NumericalError("Cholesky of I + H P H^H failed") from exc
    return value, W.diagonal().real / LN2, W


def _newton_direction(Hm, g):
    try:
        cf = scipy.linalg.cho_factor(Hm, lower=True, check_finite=False)
        return -scipy.linalg.cho_solve(cf, g, check_finite=False)
    except (np.linalg.LinAlgError, ValueError):
        reg = 1e-12 * max(1.0, float(np.abs(np.diag(Hm)).max()))
        return -np.linalg.solve(Hm + reg * np.eye(len(g)), g)


def _start_point(bar: _Barrier, hint):
    prob = bar.prob
    pmax = bar.pmax
    total = float(pmax.sum())
    if total <= 0 or prob.P_tot <= 0:
        return None
    cap = pmax * min(1.0, prob.P_tot / total)
    base = np.zeros(bar.k)
    if hint is not None:
        h = np.clip(np.asarray(hint, dtype=float)[bar.active], 0.0, None)
        if np.all(h < cap) and h.sum() < prob.P_tot:
            base = h
    for theta in (0.5, 0.9, 0.99, 0.999, 1 - 1e-6, 1 - 1e-9):
        pa = base + theta * (cap - base)
        p = bar.full_p(pa)
        fmin = min((prob.net.value_tx(tx, p) for tx in bar.txs), default=math.inf)
        R_hi = fmin if math.isfinite(fmin) else prob.R0 + 1.0
        if R_hi - prob.R0 <= 1e-12 * max(1.0, prob.R0):
            continue
        R = 0.5 * (prob.R0 + R_hi)
        P = 0.5 * (pa.sum() + prob.P_tot)
        z = np.concatenate([[R, P], pa])
        if bar.slacks(z) is not None:
            return z
    return None


def solve_inner(prob: InnerProblem, tol: float | None = None, config: BarrierConfig | None = None,
                hint=None) -> InnerSolution:
    """Solve the finite-cut convex program with a log-barrier Newton method.

    ``hint`` is an optional power vector used to place the strictly feasible
    starting point between it and ``p_max``. Returns ``status="infeasible"``
    when no strictly feasible start exists (the cut values are monotone in
    ``p``, so scaling toward ``p_max`` is an exhaustive phase I).
    """
    cfg = config or BarrierConfig()
    if tol is not None:
        cfg = BarrierConfig(**{**cfg.__dict__, "tol": tol})
    bar = _Barrier(prob)
    z = _start_point(bar, hint)
    if z is None:
        return InnerSolution(math.nan, math.nan, np.zeros(prob.net.n), "infeasible",
                             message="no strictly feasible point found")
    t = cfg.t0
    steps = 0
    status, msg = "optimal", ""
    while True:
        for _ in range(cfg.max_newton):
            g, Hm = bar.grad_hess(z, t)
            dz = _newton_direction(Hm, g)
            slope = float(g @ dz)
            lam2 = -slope
            phi0 = bar.phi(z, t)
            # below the rounding noise of phi no line search can make progress
            floor = 64 * np.finfo(float).eps * abs(phi0)
            if lam2 / 2 <= max(cfg.newton_tol, floor):
                break
            s = 1.0
            while bar.slacks(z + s * dz) is None:
                s *= cfg.beta
                if s < 1e-30:
                    break
            while bar.phi(z + s * dz, t) > phi0 + cfg.alpha * s * slope and s >= 1e-30:
                s *= cfg.beta
            steps += 1
            if s < 1e-30:
                if lam2 > 1e-6:
                    status, msg = "numerical-failure", f"line search stalled (decrement^2 {lam2:.3g}, t {t:.3g})"
                break
            z = z + s * dz
        else:
            status, msg = "numerical-failure", f"Newton did not converge at t={t:.3g}"
        if status != "optimal" or bar.m / t <= cfg.tol:
            break
        t *= cfg.factor
    p = bar.full_p(z[2:])
    obj = float(bar.c @ z)
    return InnerSolution(float(z[0]), float(z[1]), p, status, bar.m / t, steps, msg, obj)


# --------------------------------------------------------------------------
# infeasibility measure and separating hyperplanes

TERMS = ("p_low", "p_high", "rate_floor", "power_cap", "power_sum", "cut")


def _unpack(point, n):
    z = np.asarray(point, dtype=float).ravel()
    if z.shape != (n + 2,):
        raise DomainError(f"point must have length {n + 2} (R, P, p)")
    if not np.all(np.isfinite(z)):
        raise DomainError("point must be finite")
    return float(z[0]), float(z[1]), z[2:].copy()


def infeasibility_terms(point, net, R0, p_max, P_tot):
    """Each argument of the infeasibility max, keyed by term name.

    The cut term uses the SFM min-cut at ``max(p, 0)``; its minimizing cut is
    returned alongside.
    """
    R, P, p = _unpack(point, net.n)
    pmax = netmodel.as_power(net, p_max, "p_max")
    mc = sfm.min_cut(net, np.clip(p, 0.0, None))
    terms = {
        "p_low": float(np.max(-p)),
        "p_high": float(np.max(p - pmax)),
        "rate_floor": R0 - R,
        "power_cap": P - P_tot,
        "power_sum": float(p.sum()) - P,
        "cut": R - mc.value,
    }
    return terms, mc


def infeasibility(point, net, R0, p_max, P_tot) -> float:
    terms, _ = infeasibility_terms(point, net, R0, p_max, P_tot)
    return max(0.0, *terms.values())


def separating_direction(point, net, R0, p_max, P_tot, eps: float = 1e-9, term: str | None = None):
    """Normal ``c`` with ``c.point > c.y`` for every ``y`` of infeasibility <= eps.

    ``term`` selects which violated constraint to separate; by default the
    most violated one. Returns ``(c, term)``.
    """
    R, P, p = _unpack(point, net.n)
    terms, mc = infeasibility_terms(point, net, R0, p_max, P_tot)
    if term is None:
        term = max(TERMS, key=lambda k: terms[k])
    if term not in terms:
        raise DomainError(f"unknown term {term!r}; expected one of {TERMS}")
    if terms[term] <= eps:
        raise DomainError(f"term {term!r} is not violated by more than eps={eps}")
    n = net.n
    c = np.zeros(n + 2)
    if term == "p_low":
        c[2 + int(np.argmax(-p))] = -1.0
    elif term == "p_high":
        pmax = netmodel.as_power(net, p_max, "p_max")
        c[2 + int(np.argmax(p - pmax))] = 1.0
    elif term == "rate_floor":
        c[0] = -1.0
    elif term == "power_cap":
        c[1] = 1.0
    elif term == "power_sum":
        c[1] = -1.0
        c[2:] = 1.0
    else:
        c[0] = 1.0
        c[2:] = -netmodel.gaussian_cut_gradient(net, mc.cut, np.clip(p, 0.0, None))
    return c, term
