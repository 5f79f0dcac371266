"""Pure numpy implementations of the cut-evaluation kernels.

These are the reference versions of the routines in ``_speedups.pyx``. Both
modules expose the same functions with identical semantics:

gaussian_logdet_real(H, tx, p), gaussian_logdet_complex(H, tx, p)
    log2 det(I + A P A^H) where A[j, i] = H[i, j] for transmitters i
    (``tx[i] == 1``) and receivers j (``tx[j] == 0``).
erasure_value(eps, tx)
    sum over transmitters i of 1 - prod over receivers j of eps[i, j].
gfp_rank(M, prime)
    rank of an integer matrix over the prime field of size ``prime``.
cut_terms_real(A, pt, W), cut_terms_complex(A, pt, W)
    for a receivers x transmitters block ``A`` and transmitter powers ``pt``:
    returns log2 det(M) with M = I + A diag(pt) A^H and writes
    W = A^H M^-1 A into the preallocated ``W``.
"""
import numpy as np
import scipy.linalg

INV_LN2 = 1.0 / np.log(2.0)


def _gram(B, pt):
    # B[a, x] = h[T_a, R_x]; Sylvester's identity picks the smaller side
    t, r = B.shape
    if t <= r:
        sq = np.sqrt(pt)
        G = (sq[:, None] * B.conj()) @ (B.T * sq[None, :])
    else:
        G = B.T @ (pt[:, None] * B.conj())
    G[np.diag_indices_from(G)] += 1.0
    return G


def _logdet(H, tx, p):
    mask = np.asarray(tx, dtype=bool)
    if mask.all() or not mask.any():
        return 0.0
    B = H[mask][:, ~mask]
    G = _gram(B, np.asarray(p, dtype=float)[mask])
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError("Cholesky factorization failed") from exc
    return float(2.0 * np.log(np.diag(L).real).sum() * INV_LN2)


def gaussian_logdet_real(H, tx, p):
    return _logdet(H, tx, p)


def gaussian_logdet_complex(H, tx, p):
    return _logdet(H, tx, p)


def erasure_value(eps, tx):
    mask = np.asarray(tx, dtype=bool)
    if not mask.any():
        return 0.0
    sub = eps[mask][:, ~mask]
    return float((1.0 - np.prod(sub, axis=1)).sum())


def gfp_rank(M, prime):
    A = np.array(M, dtype=np.int64) % prime
    m, n = A.shape
    r = 0
    for col in range(n):
        if r == m:
            break
        nz = np.nonzero(A[r:, col])[0]
        if nz.size == 0:
            continue
        piv = r + nz[0]
        if piv != r:
            A[[r, piv]] = A[[piv, r]]
        inv = pow(int(A[r, col]), -1, prime)
        A[r] = (A[r] * inv) % prime
        below = A[r + 1:, col].copy()
        A[r + 1:] = (A[r + 1:] - below[:, None] * A[r][None, :]) % prime
        r += 1
    return r


def _cut_terms(A, pt, W):
    if A.size == 0:
        W[:] = 0.0
        return 0.0
    M = (A * pt[None, :]) @ A.conj().T
    M.flat[::M.shape[0] + 1] += 1.0
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError("Cholesky factorization failed") from exc
    Z = scipy.linalg.solve_triangular(L, A, lower=True, check_finite=False)
    W[:] = Z.conj().T @ Z
    return float(2.0 * np.log(L.diagonal().real).sum() * INV_LN2)


def cut_terms_real(A, pt, W):
    return _cut_terms(A, pt, W)


def cut_terms_complex(A, pt, W):
    return _cut_terms(A, pt, W)
