"""Relay network models and their cut-capacity functions.

Three single-source single-destination models are supported:

* :class:`GaussianNetwork` -- complex (or real) channel gains, cut value
  ``log2 det(I + H P H^H)`` over the gains crossing the cut;
* :class:`ADTNetwork` -- deterministic linear model over a prime field, cut
  value is the rank of the stacked shift-matrix transfer map;
* :class:`ErasureNetwork` -- broadcast links with independent erasures, cut
  value ``sum_i (1 - prod_j eps_ij)``.

Nodes are integers ``0..n-1``. A cut is the source side: it contains ``s`` and
excludes ``d``. Internally cuts are handed to the kernels as a ``uint8``
membership vector ``tx`` (1 = transmitter side).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np
import scipy.linalg

from . import kernels
from .errors import DomainError, NumericalError

LN2 = math.log(2.0)


# --------------------------------------------------------------------------
# cuts


@dataclass(frozen=True)
class Cut:
    """A set of node ids stored as an integer bitmask (any width)."""

    mask: int

    @classmethod
    def of(cls, nodes: Iterable[int]) -> "Cut":
        m = 0
        for v in nodes:
            v = int(v)
            if v < 0:
                raise DomainError(f"negative node id {v}")
            m |= 1 << v
        return cls(m)

    def __contains__(self, v) -> bool:
        return v >= 0 and bool(self.mask >> v & 1)

    def __iter__(self) -> Iterator[int]:
        m, v = self.mask, 0
        while m:
            if m & 1:
                yield v
            m >>= 1
            v += 1

    def __len__(self) -> int:
        return bin(self.mask).count("1")

    def nodes(self) -> list[int]:
        return list(self)

    def complement(self, n: int) -> "Cut":
        return Cut(((1 << n) - 1) & ~self.mask)

    def __repr__(self) -> str:
        return f"Cut({self.nodes()})"


def as_cut(cut) -> Cut:
    if isinstance(cut, Cut):
        return cut
    if isinstance(cut, (int, np.integer)):
        raise TypeError("pass node ids as an iterable, or Cut(mask) for a bitmask")
    return Cut.of(cut)


def cut_tx(net, cut) -> np.ndarray:
    """Validate a source-side cut and return its ``uint8`` membership vector."""
    c = as_cut(cut)
    if c.mask >> net.n:
        raise DomainError(f"cut {c} has nodes outside 0..{net.n - 1}")
    if net.s not in c:
        raise DomainError(f"cut {c} must contain the source {net.s}")
    if net.d in c:
        raise DomainError(f"cut {c} must exclude the destination {net.d}")
    tx = np.zeros(net.n, dtype=np.uint8)
    for v in c:
        tx[v] = 1
    return tx


def relays(net) -> list[int]:
    return [v for v in range(net.n) if v != net.s and v != net.d]


def all_cuts(net) -> Iterator[Cut]:
    """Every source-side cut, ``2^(n-2)`` of them."""
    rel = relays(net)
    base = 1 << net.s
    for r in range(len(rel) + 1):
        for sub in itertools.combinations(rel, r):
            m = base
            for v in sub:
                m |= 1 << v
            yield Cut(m)


def _check_endpoints(n, s, d):
    if n < 2:
        raise DomainError(f"a network needs at least 2 nodes, got {n}")
    if not (0 <= s < n and 0 <= d < n) or s == d:
        raise DomainError(f"invalid source/destination ({s}, {d}) for n={n}")


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


# --------------------------------------------------------------------------
# Gaussian model


@dataclass(frozen=True, eq=False)
class GaussianNetwork:
    """Gaussian relay network; ``H[i, j]`` is the gain from node i to node j.

    Self gains, gains into the source and gains out of the destination are
    zeroed on construction. Real-valued matrices stay real (float64).
    """

    H: np.ndarray
    s: int = 0
    d: int | None = None

    def __post_init__(self):
        H = np.array(self.H)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise DomainError(f"gain matrix must be square, got shape {H.shape}")
        n = H.shape[0]
        d = n - 1 if self.d is None else int(self.d)
        _check_endpoints(n, int(self.s), d)
        if np.iscomplexobj(H):
            H = H.astype(np.complex128)
            if not np.any(H.imag):
                H = H.real.copy()
        else:
            H = H.astype(np.float64)
        if not np.all(np.isfinite(H)):
            raise DomainError("gain matrix has non-finite entries")
        np.fill_diagonal(H, 0)
        H[:, int(self.s)] = 0
        H[d, :] = 0
        object.__setattr__(self, "H", _frozen(H))
        object.__setattr__(self, "s", int(self.s))
        object.__setattr__(self, "d", d)

    model = "gaussian"

    @property
    def n(self) -> int:
        return self.H.shape[0]

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.H)

    def value_tx(self, tx, p) -> float:
        if self.is_complex:
            return kernels.gaussian_logdet_complex(self.H, tx, p)
        return kernels.gaussian_logdet_real(self.H, tx, p)

    def restrict(self, keep: Iterable[int]) -> tuple["GaussianNetwork", list[int]]:
        """Induced subnetwork on ``keep`` (source and destination always kept).

        Returns the subnetwork and the list mapping new index -> old index.
        """
        idx = sorted(set(keep) | {self.s, self.d})
        sub = self.H[np.ix_(idx, idx)]
        return GaussianNetwork(sub, idx.index(self.s), idx.index(self.d)), idx


def as_power(net, p, name="p") -> np.ndarray:
    """Broadcast and validate a power vector for ``net``."""
    arr = np.asarray(p, dtype=float)
    if arr.ndim == 0:
        arr = np.full(net.n, float(arr))
    if arr.shape != (net.n,):
        raise DomainError(f"{name} must have length {net.n}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} has non-finite entries")
    if np.any(arr < 0):
        raise DomainError(f"{name} must be nonnegative")
    return np.ascontiguousarray(arr)


def gaussian_cut_value(net: GaussianNetwork, cut, p) -> float:
    """Cut capacity ``log2 det(I + H_cut P H_cut^H)`` in bits."""
    tx = cut_tx(net, cut)
    return net.value_tx(tx, as_power(net, p))


def _cut_blocks(net, tx):
    m = tx.astype(bool)
    T = np.flatnonzero(m)
    A = net.H[np.ix_(T, np.flatnonzero(~m))].T  # receivers x transmitters
    return T, A


def gaussian_cut_derivatives(net: GaussianNetwork, tx, p):
    """Value, gradient and Hessian of the cut function with respect to ``p``.

    With ``M = I + A P A^H`` and ``W = A^H M^-1 A`` the derivatives are
    ``dF/dp_i = W_ii / ln 2`` and ``d2F/dp_i dp_k = -|W_ik|^2 / ln 2`` for
    transmitters i, k; entries for receiving nodes are zero.
    """
    n = net.n
    grad = np.zeros(n)
    hess = np.zeros((n, n))
    T, A = _cut_blocks(net, tx)
    if A.size == 0:
        return 0.0, grad, hess
    M = (A * p[T][None, :]) @ A.conj().T
    M[np.diag_indices_from(M)] += 1.0
    try:
        L = scipy.linalg.cholesky(M, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("Cholesky of I + H P H^H failed") from exc
    Z = scipy.linalg.solve_triangular(L, A, lower=True)
    W = Z.conj().T @ Z
    value = 2.0 * np.log(np.diag(L).real).sum() / LN2
    grad[T] = W.diagonal().real / LN2
    hess[np.ix_(T, T)] = -(np.abs(W) ** 2) / LN2
    return float(value), grad, hess


def gaussian_cut_gradient(net: GaussianNetwork, cut, p) -> np.ndarray:
    """Gradient of the cut value with respect to the power vector (bits per unit power)."""
    tx = cut_tx(net, cut)
    _, grad, _ = gaussian_cut_derivatives(net, tx, as_power(net, p))
    return grad


# --------------------------------------------------------------------------
# ADT deterministic model


def is_prime(k: int) -> bool:
    if k < 2:
        return False
    if k % 2 == 0:
        return k == 2
    f = 3
    while f * f <= k:
        if k % f == 0:
            return False
        f += 2
    return True


@dataclass(frozen=True, eq=False)
class ADTNetwork:
    """ADT deterministic network with integer gains ``gains[i, j]`` over F_prime."""

    gains: np.ndarray
    prime: int = 2
    s: int = 0
    d: int | None = None

    def __post_init__(self):
        g = np.array(self.gains)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise DomainError(f"gain matrix must be square, got shape {g.shape}")
        if not np.issubdtype(g.dtype, np.integer):
            if not np.all(np.isfinite(g)) or np.any(g != np.round(g)):
                raise DomainError("ADT gains must be integers")
        g = g.astype(np.int64)
        if np.any(g < 0):
            raise DomainError("ADT gains must be nonnegative")
        n = g.shape[0]
        d = n - 1 if self.d is None else int(self.d)
        _check_endpoints(n, int(self.s), d)
        if not is_prime(int(self.prime)):
            raise DomainError(f"field size {self.prime} is not prime")
        np.fill_diagonal(g, 0)
        g[:, int(self.s)] = 0
        g[d, :] = 0
        object.__setattr__(self, "gains", _frozen(g))
        object.__setattr__(self, "prime", int(self.prime))
        object.__setattr__(self, "s", int(self.s))
        object.__setattr__(self, "d", d)

    model = "adt"

    @property
    def n(self) -> int:
        return self.gains.shape[0]

    @property
    def q(self) -> int:
        return int(self.gains.max())

    def value_tx(self, tx, p=None) -> float:
        return float(kernels.gfp_rank(_transfer(self, tx), self.prime))


def shift_matrix(q: int, power: int = 1) -> np.ndarray:
    """``S^power`` for the q x q down-shift matrix S (zero once power >= q)."""
    return np.eye(q, k=-power, dtype=np.int64)


def _transfer(net: ADTNetwork, tx) -> np.ndarray:
    q = net.q
    m = np.asarray(tx, dtype=bool)
    T = np.flatnonzero(m)
    R = np.flatnonzero(~m)
    out = np.zeros((q * len(R), q * len(T)), dtype=np.int64)
    if q == 0:
        return out
    for a, j in enumerate(R):
        for b, i in enumerate(T):
            g = int(net.gains[i, j])
            if g:
                out[a * q:(a + 1) * q, b * q:(b + 1) * q] = shift_matrix(q, q - g)
    return out


def build_adt_transfer(net: ADTNetwork, cut) -> np.ndarray:
    """Stacked transfer matrix of a cut: block (j, i) is ``S^(q - n_ij)``.

    Rows run over receivers outside the cut, columns over transmitters inside
    it, both in increasing node order.
    """
    return _transfer(net, cut_tx(net, cut))


def gfp_rank(M, prime: int) -> int:
    """Rank of an integer matrix over the prime field F_prime."""
    prime = int(prime)
    if not is_prime(prime):
        raise DomainError(f"modulus {prime} is not prime")
    M = np.ascontiguousarray(np.asarray(M), dtype=np.int64)
    if M.ndim != 2:
        raise DomainError("gfp_rank expects a 2-D matrix")
    if M.size == 0:
        return 0
    return int(kernels.gfp_rank(M, prime))


def adt_cut_value(net: ADTNetwork, cut) -> int:
    return gfp_rank(build_adt_transfer(net, cut), net.prime)


# --------------------------------------------------------------------------
# wireless erasure model


@dataclass(frozen=True, eq=False)
class ErasureNetwork:
    """Wireless erasure network; ``eps[i, j]`` is the erasure probability i -> j.

    ``eps = 1`` means no link. The diagonal, links into the source and links
    out of the destination are forced to 1.
    """

    eps: np.ndarray
    s: int = 0
    d: int | None = None

    def __post_init__(self):
        e = np.array(self.eps, dtype=np.float64)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise DomainError(f"erasure matrix must be square, got shape {e.shape}")
        if not np.all(np.isfinite(e)) or np.any(e < 0) or np.any(e > 1):
            raise DomainError("erasure probabilities must lie in [0, 1]")
        n = e.shape[0]
        d = n - 1 if self.d is None else int(self.d)
        _check_endpoints(n, int(self.s), d)
        np.fill_diagonal(e, 1.0)
        e[:, int(self.s)] = 1.0
        e[d, :] = 1.0
        object.__setattr__(self, "eps", _frozen(e))
        object.__setattr__(self, "s", int(self.s))
        object.__setattr__(self, "d", d)

    model = "erasure"

    @property
    def n(self) -> int:
        return self.eps.shape[0]

    def value_tx(self, tx, p=None) -> float:
        return kernels.erasure_value(self.eps, tx)


def erasure_cut_value(net: ErasureNetwork, cut) -> float:
    return net.value_tx(cut_tx(net, cut))


def _h2(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    m = (x > 0) & (x < 1)
    out[m] = -(x[m] * np.log2(x[m]) + (1 - x[m]) * np.log2(1 - x[m]))
    return out


def _entropy(probs) -> float:
    probs = np.asarray(probs, dtype=float)
    probs = probs[probs > 0]
    return float(-(probs * np.log2(probs)).sum())


def _patterns(k):
    return ((np.arange(1 << k)[:, None] >> np.arange(k)[None, :]) & 1).astype(bool)


def _joint_erasure_mi(E):
    # full enumeration: inputs x in {0,1}^t, erasure pattern on all t*r links
    t, r = E.shape
    probs_link = E.ravel()
    pats = _patterns(t * r)  # True = erased
    p_pat = np.where(pats, probs_link, 1 - probs_link).prod(axis=1)
    xs = _patterns(t)
    owner = np.repeat(np.arange(t), r)
    codes = []
    weights = []
    for x in xs:
        sym = np.where(pats, 2, x[owner][None, :].astype(np.int64))
        codes.append(sym @ (3 ** np.arange(t * r, dtype=np.int64)))
        weights.append(p_pat / len(xs))
    codes = np.concatenate(codes)
    weights = np.concatenate(weights)
    uniq, inv = np.unique(codes, return_inverse=True)
    p_y = np.bincount(inv, weights=weights, minlength=len(uniq))
    h_y = _entropy(p_y)
    h_y_given_x = _entropy(p_pat)  # output is a function of (x, pattern), x has 1 bit per node
    return h_y - h_y_given_x


def _factored_erasure_mi(E):
    # transmitters are independent, so the observation splits per transmitter
    total = 0.0
    for row in E:
        pats = _patterns(len(row))
        p_pat = np.where(pats, row, 1 - row).prod(axis=1)
        all_erased = pats.all(axis=1)
        # each non-erased pattern shows x in {0,1} with probability 1/2 each
        p_y = np.concatenate([p_pat[all_erased], p_pat[~all_erased] / 2, p_pat[~all_erased] / 2])
        total += _entropy(p_y) - _entropy(p_pat)
    return total


def erasure_mi_oracle(net: ErasureNetwork, cut, joint_limit: int = 20) -> float:
    """``I(X_cut; Y_rest | X_rest)`` by enumerating inputs and erasure patterns.

    Inputs are i.i.d. Bernoulli(1/2), erasures independent. Each receiver
    observes every incoming link as 0, 1 or erased. Links from nodes outside
    the cut are independent of the cut's inputs given ``X_rest`` and carry no
    information, so only the links crossing the cut are enumerated. When the
    enumeration space (``2^(t + t*r)`` for t transmitters and r receivers)
    is at most ``2^joint_limit`` the whole joint output distribution is
    enumerated; otherwise the (exact) per-transmitter factorization is used.
    """
    tx = cut_tx(net, cut)
    m = tx.astype(bool)
    t, r = int(m.sum()), int((~m).sum())
    if t > 10 or r > 10:
        raise DomainError(f"enumeration limited to 10 nodes per side, got {t} and {r}")
    E = np.asarray(net.eps)[np.ix_(m, ~m)]
    if t * (r + 1) <= joint_limit:
        return float(_joint_erasure_mi(E))
    return float(_factored_erasure_mi(E))


# --------------------------------------------------------------------------
# dispatch


def cut_value(net, cut, p=None) -> float:
    """Cut capacity for any model (``p`` is required for Gaussian networks)."""
    if isinstance(net, GaussianNetwork):
        if p is None:
            raise DomainError("Gaussian cut values need a power allocation")
        return gaussian_cut_value(net, cut, p)
    if isinstance(net, ADTNetwork):
        return adt_cut_value(net, cut)
    if isinstance(net, ErasureNetwork):
        return erasure_cut_value(net, cut)
    raise TypeError(f"unsupported network type {type(net).__name__}")


# --------------------------------------------------------------------------
# correlated-input diamond (submodularity counterexample)

DIAMOND_S, DIAMOND_R1, DIAMOND_R2, DIAMOND_D = 0, 1, 2, 3


@dataclass(frozen=True)
class CorrelatedDiamond:
    """Real Gaussian diamond s -> {r1, r2} -> d with correlated relay inputs.

    Relay inputs have unit variance and correlation ``rho``; the source input
    is independent with unit variance; noise is unit variance at every
    receiver.
    """

    gain_sr: float = 1.0
    gain_rd: float = 3.0
    rho: float = 0.0
    sigma: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.gain_sr, self.gain_rd, self.rho)):
            raise DomainError("diamond parameters must be finite")
        if abs(self.rho) > 1:
            raise DomainError(f"correlation must lie in [-1, 1], got {self.rho}")
        sig = np.array([[1.0, 0, 0], [0, 1.0, self.rho], [0, self.rho, 1.0]])
        object.__setattr__(self, "sigma", _frozen(sig))

    @property
    def gain_matrix(self) -> np.ndarray:
        """Rows: receivers (r1, r2, d); columns: transmitters (s, r1, r2)."""
        a, b = self.gain_sr, self.gain_rd
        return np.array([[a, 0, 0], [a, 0, 0], [0, b, b]], dtype=float)


def correlated_gaussian_mi(dia: CorrelatedDiamond, A) -> float:
    """``I(X_A; Y_Ac | X_Ac)`` in bits for the real correlated diamond.

    ``A`` is a subset of {s, r1, r2} = {0, 1, 2}. Uses the conditional covariance
    of the inputs given the transmitters outside ``A`` (Schur complement,
    pseudo-inverse at ``|rho| = 1``).
    """
    members = set(as_cut(A))
    if not members <= {DIAMOND_S, DIAMOND_R1, DIAMOND_R2}:
        raise DomainError(f"A must be a subset of {{0, 1, 2}}, got {sorted(members)}")
    rest_tx = [v for v in (0, 1, 2) if v not in members]
    rest_rx = [v for v in (1, 2, 3) if v not in members]
    if not rest_rx:
        return 0.0
    sig = dia.sigma
    if rest_tx:
        S_cc = sig[np.ix_(rest_tx, rest_tx)]
        S_xc = sig[:, rest_tx]
        cond = sig - S_xc @ np.linalg.pinv(S_cc) @ S_xc.T
    else:
        cond = sig
    G = dia.gain_matrix[[v - 1 for v in rest_rx]]
    cov = G @ cond @ G.T + np.eye(len(rest_rx))
    sign, logdet = np.linalg.slogdet(cov)
    return float(0.5 * logdet / LN2)


def nonsubmodularity_gap(dia: CorrelatedDiamond) -> float:
    """``F(A) + F(B) - F(A | B) - F(A & B)`` for A = {s, r1}, B = {s, r2}."""
    f = lambda nodes: correlated_gaussian_mi(dia, nodes)  # noqa: E731
    return f([0, 1]) + f([0, 2]) - f([0, 1, 2]) - f([0])


# --------------------------------------------------------------------------
# random instances (Philox counter-based generator)


def rng_for(seed: int) -> np.random.Generator:
    """The package's reference generator: numpy ``Philox`` keyed by ``seed``."""
    return np.random.Generator(np.random.Philox(int(seed)))


def layer_of(n: int, width: int) -> np.ndarray:
    """Layer index per node: source 0 in layer 0, relays in blocks of ``width``, d last."""
    layers = np.empty(n, dtype=int)
    layers[0] = 0
    for k, v in enumerate(range(1, n - 1)):
        layers[v] = 1 + k // width
    layers[n - 1] = (layers[n - 2] + 1) if n > 2 else 1
    return layers


def _parse_style(style):
    style = style.strip().lower()
    if style.startswith("layered"):
        width = 4
        if "(" in style:
            width = int(style[style.index("(") + 1:style.rindex(")")])
        return "layered", width
    if style in ("dense-real", "dense-complex"):
        return style, None
    raise DomainError(f"unknown network style {style!r}")


def random_gaussian_network(n: int, seed: int, style: str = "dense-real",
                            width: int | None = None) -> GaussianNetwork:
    """Random Gaussian network with source 0 and destination n-1.

    ``dense-real``: i.i.d. N(0, 1) gains; ``dense-complex``: circularly
    symmetric CN(0, 1); ``layered`` / ``layered(w)``: real N(0, 1) gains only
    between adjacent layers of ``w`` relays (source and destination are
    single-node end layers).
    """
    if n < 2:
        raise DomainError(f"n must be at least 2, got {n}")
    kind, w = _parse_style(style)
    if width is not None:
        w = int(width)
    rng = rng_for(seed)
    if kind == "dense-complex":
        H = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2)
    else:
        H = rng.standard_normal((n, n))
    if kind == "layered":
        if w < 1:
            raise DomainError("layer width must be positive")
        lay = layer_of(n, w)
        H = H * (lay[None, :] == lay[:, None] + 1)
    return GaussianNetwork(H, 0, n - 1)


def random_adt_network(n: int, seed: int, prime: int = 2, max_gain: int = 3,
                       density: float = 1.0) -> ADTNetwork:
    if n < 2:
        raise DomainError(f"n must be at least 2, got {n}")
    rng = rng_for(seed)
    g = rng.integers(0, max_gain + 1, size=(n, n))
    g = g * (rng.random((n, n)) < density)
    return ADTNetwork(g, prime, 0, n - 1)


def random_erasure_network(n: int, seed: int, density: float = 0.5) -> ErasureNetwork:
    if n < 2:
        raise DomainError(f"n must be at least 2, got {n}")
    rng = rng_for(seed)
    eps = rng.random((n, n))
    eps = np.where(rng.random((n, n)) < density, eps, 1.0)
    return ErasureNetwork(eps, 0, n - 1)
