"""Submodular function minimization.

The workhorse is the Fujishige-Wolfe minimum-norm-point algorithm over the
base polytope ``B_f``: the minimizer of a normalized submodular ``f`` is read
off the negative coordinates of the min-norm point. An exhaustive solver is
kept as a verification oracle.

Set functions are wrapped in :class:`SetFunctionHandle`, which normalizes
``f(empty) = 0``, memoizes evaluations by bitmask and evaluates greedy chains.
Subsets are bitmasks over *positions* in ``handle.ground``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import netmodel
from .errors import ConvergenceError, DomainError, NumericalError

log = logging.getLogger(__name__)

# barycentric coefficients at or below this are treated as zero
_ZERO = 1e-12


class SetFunctionHandle:
    """Normalized, memoized set function over an ordered ground set.

    ``fn`` receives a frozenset of ground elements and returns a real number.
    The stored ``offset`` is ``fn(empty)`` and every value reported by the
    handle has it subtracted.
    """

    def __init__(self, ground, fn=None, cache_size=1 << 20):
        self.ground = tuple(ground)
        self._fn = fn
        self.cache_size = cache_size
        self._cache = {}
        self.n_evals = 0
        self.offset = 0.0
        self.offset = self._raw_mask(0)

    def __len__(self):
        return len(self.ground)

    # raw evaluation hooks; subclasses override these two
    def _raw_mask(self, mask):
        self.n_evals += 1
        members = frozenset(g for k, g in enumerate(self.ground) if mask >> k & 1)
        return float(self._fn(members))

    def _raw_chain(self, order, start, mask, out):
        for k in range(start, len(order)):
            mask |= 1 << int(order[k])
            out[k + 1] = self._cached(mask)

    def _cached(self, mask):
        v = self._cache.get(mask)
        if v is None:
            v = self._raw_mask(mask) - self.offset
            if len(self._cache) >= self.cache_size:
                self._cache.clear()
            self._cache[mask] = v
        return v

    def eval_mask(self, mask: int) -> float:
        return 0.0 if mask == 0 else self._cached(mask)

    def mask_of(self, subset) -> int:
        pos = {g: k for k, g in enumerate(self.ground)}
        m = 0
        for g in subset:
            if g not in pos:
                raise DomainError(f"{g!r} is not in the ground set")
            m |= 1 << pos[g]
        return m

    def members(self, mask: int) -> frozenset:
        return frozenset(g for k, g in enumerate(self.ground) if mask >> k & 1)

    def __call__(self, subset) -> float:
        return self.eval_mask(self.mask_of(subset))

    def chain(self, order) -> np.ndarray:
        """Normalized values of the prefixes of ``order`` (length ``len(order) + 1``)."""
        out = np.zeros(len(order) + 1)
        mask = 0
        k = 0
        # reuse cached prefixes before dropping into the raw evaluator
        while k < len(order):
            nxt = mask | 1 << int(order[k])
            v = self._cache.get(nxt)
            if v is None:
                break
            out[k + 1] = v
            mask = nxt
            k += 1
        if k < len(order):
            self._raw_chain(order, k, mask, out)
        return out

    def subsets(self):
        """Yield ``(mask, value)`` for every subset, in Gray-code order."""
        n = len(self.ground)
        mask = 0
        yield 0, 0.0
        for i in range(1, 1 << n):
            bit = (i & -i).bit_length() - 1
            mask ^= 1 << bit
            yield mask, self._raw_mask(mask) - self.offset


class CutFunction(SetFunctionHandle):
    """Cut capacity of a relay network as a set function over its relays.

    ``f(A) = F(A + {s}) - F({s})`` where ``F`` is the model's cut value.
    """

    def __init__(self, net, p=None, cache_size=1 << 20):
        self.net = net
        if isinstance(net, netmodel.GaussianNetwork):
            if p is None:
                raise DomainError("Gaussian cut functions need a power allocation")
            self.p = netmodel.as_power(net, p)
        else:
            self.p = None
        self._base = np.zeros(net.n, dtype=np.uint8)
        self._base[net.s] = 1
        super().__init__(netmodel.relays(net), None, cache_size)
        self._ground_arr = np.asarray(self.ground, dtype=int)

    def _tx(self, mask):
        tx = self._base.copy()
        k = 0
        while mask:
            if mask & 1:
                tx[self.ground[k]] = 1
            mask >>= 1
            k += 1
        return tx

    def _raw_mask(self, mask):
        self.n_evals += 1
        return self.net.value_tx(self._tx(mask), self.p)

    def _raw_chain(self, order, start, mask, out):
        tx = self._tx(mask)
        net, p, cache, off = self.net, self.p, self._cache, self.offset
        g = self._ground_arr
        for k in range(start, len(order)):
            j = int(order[k])
            mask |= 1 << j
            tx[g[j]] = 1
            v = cache.get(mask)
            if v is None:
                self.n_evals += 1
                v = net.value_tx(tx, p) - off
                if len(cache) >= self.cache_size:
                    cache.clear()
                cache[mask] = v
            out[k + 1] = v

    def subsets(self):
        tx = self._base.copy()
        n = len(self.ground)
        mask = 0
        yield 0, 0.0
        for i in range(1, 1 << n):
            bit = (i & -i).bit_length() - 1
            mask ^= 1 << bit
            tx[self.ground[bit]] ^= 1
            self.n_evals += 1
            yield mask, self.net.value_tx(tx, self.p) - self.offset

    def cut_of(self, members) -> netmodel.Cut:
        return netmodel.Cut.of(set(members) | {self.net.s})


def normalize_cut_function(net, p=None) -> CutFunction:
    """Relay-indexed, normalized cut function of ``net`` (``p`` for Gaussian)."""
    return CutFunction(net, p)


# --------------------------------------------------------------------------
# polytope primitives


def greedy_vertex(f: SetFunctionHandle, order) -> np.ndarray:
    """Base-polytope vertex of marginal gains along ``order`` (ground positions)."""
    order = np.asarray(order, dtype=int)
    if sorted(order.tolist()) != list(range(len(f))):
        raise DomainError("order must be a permutation of the ground positions")
    vals = f.chain(order)
    x = np.empty(len(f))
    x[order] = np.diff(vals)
    return x


def lovasz_extension(f: SetFunctionHandle, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (len(f),):
        raise DomainError(f"x must have length {len(f)}")
    if len(f) == 0:
        return 0.0
    order = np.argsort(-x, kind="stable")
    xs = x[order]
    lam = np.append(xs[:-1] - xs[1:], xs[-1])
    return float(lam @ f.chain(order)[1:])


# --------------------------------------------------------------------------
# minimization


@dataclass
class SfmResult:
    minimizer: frozenset
    value: float
    raw_value: float
    certificate: np.ndarray = field(repr=False)
    iterations: int = 0
    gap: float = 0.0
    mask: int = 0


def _affine_minimizer(S):
    """Barycentric weights of the min-norm point of the affine hull of rows of S."""
    m = S.shape[0]
    G = S @ S.T + 1.0
    try:
        L = np.linalg.cholesky(G)
        u = np.linalg.solve(L.T, np.linalg.solve(L, np.ones(m)))
    except np.linalg.LinAlgError:
        K = np.zeros((m + 1, m + 1))
        K[:m, :m] = S @ S.T
        K[:m, m] = K[m, :m] = 1.0
        rhs = np.zeros(m + 1)
        rhs[m] = 1.0
        u = np.linalg.lstsq(K, rhs, rcond=None)[0][:m]
    return u / u.sum()


def _better(v, card, mask, best):
    if best is None:
        return True
    bv, bc, bm = best
    tie = 1e-12 * max(1.0, abs(bv))
    if v < bv - tie:
        return True
    if v <= bv + tie and (card, mask) < (bc, bm):
        return True
    return False


def _best_prefix(order, vals, best):
    mask = 0
    cand = best
    if _better(vals[0], 0, 0, cand):
        cand = (vals[0], 0, 0)
    for k, j in enumerate(order):
        mask |= 1 << int(j)
        if _better(vals[k + 1], k + 1, mask, cand):
            cand = (vals[k + 1], k + 1, mask)
    return cand


def _result(f, best, x, iterations, gap):
    v, _, m = best
    return SfmResult(f.members(m), float(v), float(v + f.offset), x, iterations, float(gap), m)


def min_norm_point(f: SetFunctionHandle, tol: float = 1e-10, max_major: int | None = None) -> SfmResult:
    """Minimize ``f`` by Wolfe's minimum-norm-point algorithm on ``B_f``.

    Terminates when the duality gap ``|x|^2 - min_q x.q`` drops below
    ``tol * max(1, |x|^2)``, where ``q`` is the greedy vertex for ascending
    ``x``. The minimizer is the best level set ``{v : x(v) <= theta}`` of the
    final point, which includes both ``{x < 0}`` and ``{x <= 0}``.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    n = len(f)
    if n == 0:
        return SfmResult(frozenset(), 0.0, f.offset, np.zeros(0), 0, 0.0, 0)
    if max_major is None:
        max_major = max(100, 100 * n * n)

    ident = np.arange(n)
    vals = f.chain(ident)
    x = np.empty(n)
    x[ident] = np.diff(vals)
    best = _best_prefix(ident, vals, None)
    S = x[None, :].copy()
    lam = np.array([1.0])
    gap = np.inf

    for major in range(1, max_major + 1):
        order = np.argsort(x, kind="stable")
        vals = f.chain(order)
        q = np.empty(n)
        q[order] = np.diff(vals)
        best = _best_prefix(order, vals, best)
        xx = float(x @ x)
        gap = xx - float(x @ q)
        if gap <= tol * max(1.0, xx):
            return _result(f, best, x, major, gap)
        scale = max(1.0, float(np.abs(S).max()))
        if np.abs(S - q).max(axis=1).min() <= 1e-12 * scale:
            log.debug("greedy vertex already in corral; stopping with gap %.3g", gap)
            return _result(f, best, x, major, gap)

        S = np.vstack([S, q])
        lam = np.append(lam, 0.0)
        for _minor in range(10 * (n + 2)):
            beta = _affine_minimizer(S)
            if beta.min() >= -_ZERO:
                keep = beta > _ZERO
                S, lam = S[keep], beta[keep] / beta[keep].sum()
                break
            # step from the current point toward y until a weight hits zero
            dec = (beta < -_ZERO) & (lam - beta > _ZERO)
            theta = float(np.min(lam[dec] / (lam[dec] - beta[dec]))) if dec.any() else 0.0
            lam = theta * beta + (1.0 - theta) * lam
            keep = lam > _ZERO
            S, lam = S[keep], lam[keep] / lam[keep].sum()
        else:
            raise NumericalError("minor cycle of the min-norm-point algorithm did not settle")
        x_new = lam @ S
        if float(x_new @ x_new) >= xx * (1.0 - 1e-15) and major > 1:
            # no measurable progress: floating point floor reached
            x = x_new
            order = np.argsort(x, kind="stable")
            vals = f.chain(order)
            q = np.empty(n)
            q[order] = np.diff(vals)
            best = _best_prefix(order, vals, best)
            gap = float(x @ x) - float(x @ q)
            log.debug("min-norm-point stalled at gap %.3g", gap)
            return _result(f, best, x, major, gap)
        x = x_new

    raise ConvergenceError(
        f"min-norm-point did not converge in {max_major} major cycles (gap {gap:.3g})",
        best=_result(f, best, x, max_major, gap),
    )


def brute_force_min(f: SetFunctionHandle, limit: int = 25) -> SfmResult:
    """Exact minimum by enumerating every subset of the ground set.

    Ties go to the smaller set, then to the smaller bitmask.
    """
    n = len(f)
    if n > limit:
        raise DomainError(f"ground set of size {n} is too large for enumeration (limit {limit})")
    best = None
    for mask, v in f.subsets():
        card = bin(mask).count("1")
        if _better(v, card, mask, best):
            best = (v, card, mask)
    return _result(f, best, np.zeros(n), 1 << n, 0.0)


# --------------------------------------------------------------------------
# network min-cut


@dataclass
class MinCutResult:
    """Minimum cut of a relay network; ``value`` is in bits (an integer for ADT)."""

    cut: netmodel.Cut
    value: float
    sfm: SfmResult = field(repr=False)
    model: str = ""
    n: int = 0
    achievable_lower: float | None = None
    capacity_gap: float | None = None


def min_cut(net, p=None, method: str = "wolfe", tol: float = 1e-10,
            cross_check: bool = False, brute_limit: int = 12) -> MinCutResult:
    """Minimum source-destination cut of ``net``.

    ``method`` is ``"wolfe"``, ``"brute"``, or ``"auto"`` (brute force when the
    relay set has at most ``brute_limit`` members). With ``cross_check`` the
    Wolfe result is compared against enumeration and a mismatch raises
    :class:`NumericalError`. For Gaussian networks the report includes the
    achievable rate ``max(0, value - n)`` and the ``2 n`` capacity gap.
    """
    f = normalize_cut_function(net, p)
    if method == "auto":
        method = "brute" if len(f) <= brute_limit else "wolfe"
    if method == "brute":
        res = brute_force_min(f)
    elif method == "wolfe":
        res = min_norm_point(f, tol)
    else:
        raise DomainError(f"unknown min-cut method {method!r}")
    if cross_check:
        if len(f) > brute_limit:
            raise DomainError(f"cross-check needs at most {brute_limit} relays, got {len(f)}")
        ref = brute_force_min(f)
        if abs(ref.value - res.value) > 1e-6 * max(1.0, abs(ref.value)):
            raise NumericalError(
                f"min-norm-point value {res.raw_value} disagrees with enumeration {ref.raw_value}"
            )
    cut = f.cut_of(res.minimizer)
    value = res.raw_value
    out = MinCutResult(cut, value, res, net.model, net.n)
    if isinstance(net, netmodel.ADTNetwork):
        exact = netmodel.adt_cut_value(net, cut)
        if abs(value - exact) > 1e-6:
            raise NumericalError(f"ADT min-cut {value} is not the integer rank {exact}")
        out.value = int(exact)
    elif isinstance(net, netmodel.GaussianNetwork):
        out.achievable_lower = max(0.0, value - net.n)
        out.capacity_gap = 2.0 * net.n
    return out
