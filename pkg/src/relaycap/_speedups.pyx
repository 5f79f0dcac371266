# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for cut evaluation.

Same signatures and semantics as :mod:`relaycap._fallback`; see there for the
reference implementation. All matrices must be C-contiguous.
"""
from libc.math cimport log, sqrt, NAN, isnan
from libc.stdlib cimport malloc, free

cdef double INV_LN2 = 1.4426950408889634


cdef Py_ssize_t _split(const unsigned char[::1] tx, Py_ssize_t *t_idx,
                       Py_ssize_t *r_idx, Py_ssize_t *nr):
    cdef Py_ssize_t n = tx.shape[0], i, nt = 0
    nr[0] = 0
    for i in range(n):
        if tx[i]:
            t_idx[nt] = i
            nt += 1
        else:
            r_idx[nr[0]] = i
            nr[0] += 1
    return nt


cdef double _chol_logdet_real(double *G, Py_ssize_t k):
    # in-place lower Cholesky of a k x k row-major SPD matrix; returns ln det or NaN
    cdef Py_ssize_t i, j, l
    cdef double s, acc = 0.0
    for j in range(k):
        s = G[j * k + j]
        for l in range(j):
            s -= G[j * k + l] * G[j * k + l]
        if s <= 0.0:
            return NAN
        s = sqrt(s)
        G[j * k + j] = s
        acc += log(s)
        for i in range(j + 1, k):
            s = G[i * k + j]
            for l in range(j):
                s -= G[i * k + l] * G[j * k + l]
            G[i * k + j] = s / G[j * k + j]
    return 2.0 * acc


cdef double _chol_logdet_complex(double complex *G, Py_ssize_t k):
    cdef Py_ssize_t i, j, l
    cdef double s, acc = 0.0
    cdef double complex c
    for j in range(k):
        s = G[j * k + j].real
        for l in range(j):
            s -= G[j * k + l].real * G[j * k + l].real + G[j * k + l].imag * G[j * k + l].imag
        if s <= 0.0:
            return NAN
        s = sqrt(s)
        G[j * k + j] = s
        acc += log(s)
        for i in range(j + 1, k):
            c = G[i * k + j]
            for l in range(j):
                c -= G[i * k + l] * G[j * k + l].conjugate()
            G[i * k + j] = c / s
    return 2.0 * acc


def gaussian_logdet_real(const double[:, ::1] H, const unsigned char[::1] tx,
                         const double[::1] p):
    cdef Py_ssize_t n = H.shape[0]
    cdef Py_ssize_t nt, nr, a, b, x
    cdef Py_ssize_t *t_idx = <Py_ssize_t *> malloc(n * sizeof(Py_ssize_t))
    cdef Py_ssize_t *r_idx = <Py_ssize_t *> malloc(n * sizeof(Py_ssize_t))
    cdef double *G = NULL
    cdef double s, ld
    cdef Py_ssize_t k
    try:
        nt = _split(tx, t_idx, r_idx, &nr)
        if nt == 0 or nr == 0:
            return 0.0
        k = nt if nt <= nr else nr
        G = <double *> malloc(k * k * sizeof(double))
        if nt <= nr:
            for a in range(nt):
                for b in range(a + 1):
                    s = 0.0
                    for x in range(nr):
                        s += H[t_idx[a], r_idx[x]] * H[t_idx[b], r_idx[x]]
                    s *= sqrt(p[t_idx[a]] * p[t_idx[b]])
                    G[a * k + b] = s + (1.0 if a == b else 0.0)
        else:
            for a in range(nr):
                for b in range(a + 1):
                    s = 0.0
                    for x in range(nt):
                        s += H[t_idx[x], r_idx[a]] * p[t_idx[x]] * H[t_idx[x], r_idx[b]]
                    G[a * k + b] = s + (1.0 if a == b else 0.0)
        ld = _chol_logdet_real(G, k)
        if isnan(ld):
            raise ArithmeticError("Cholesky factorization failed")
        return ld * INV_LN2
    finally:
        free(t_idx)
        free(r_idx)
        if G != NULL:
            free(G)


def gaussian_logdet_complex(const double complex[:, ::1] H, const unsigned char[::1] tx,
                            const double[::1] p):
    cdef Py_ssize_t n = H.shape[0]
    cdef Py_ssize_t nt, nr, a, b, x
    cdef Py_ssize_t *t_idx = <Py_ssize_t *> malloc(n * sizeof(Py_ssize_t))
    cdef Py_ssize_t *r_idx = <Py_ssize_t *> malloc(n * sizeof(Py_ssize_t))
    cdef double complex *G = NULL
    cdef double complex c
    cdef double ld
    cdef Py_ssize_t k
    try:
        nt = _split(tx, t_idx, r_idx, &nr)
        if nt == 0 or nr == 0:
            return 0.0
        k = nt if nt <= nr else nr
        G = <double complex *> malloc(k * k * sizeof(double complex))
        if nt <= nr:
            for a in range(nt):
                for b in range(a + 1):
                    c = 0.0
                    for x in range(nr):
                        c += H[t_idx[a], r_idx[x]].conjugate() * H[t_idx[b], r_idx[x]]
                    c = c * sqrt(p[t_idx[a]] * p[t_idx[b]])
                    G[a * k + b] = c + (1.0 if a == b else 0.0)
        else:
            for a in range(nr):
                for b in range(a + 1):
                    c = 0.0
                    for x in range(nt):
                        c += H[t_idx[x], r_idx[a]] * p[t_idx[x]] * H[t_idx[x], r_idx[b]].conjugate()
                    G[a * k + b] = c + (1.0 if a == b else 0.0)
        ld = _chol_logdet_complex(G, k)
        if isnan(ld):
            raise ArithmeticError("Cholesky factorization failed")
        return ld * INV_LN2
    finally:
        free(t_idx)
        free(r_idx)
        if G != NULL:
            free(G)


def erasure_value(const double[:, ::1] eps, const unsigned char[::1] tx):
    cdef Py_ssize_t n = eps.shape[0], i, j
    cdef double total = 0.0, prod
    for i in range(n):
        if not tx[i]:
            continue
        prod = 1.0
        for j in range(n):
            if not tx[j]:
                prod *= eps[i, j]
        total += 1.0 - prod
    return total


cdef long long _inv_mod(long long a, long long m):
    cdef long long t = 0, newt = 1, r = m, newr = a, q, tmp
    while newr != 0:
        q = r // newr
        tmp = t - q * newt
        t = newt
        newt = tmp
        tmp = r - q * newr
        r = newr
        newr = tmp
    if t < 0:
        t += m
    return t


def gfp_rank(const long long[:, ::1] M, long long prime):
    cdef Py_ssize_t m = M.shape[0], n = M.shape[1]
    cdef Py_ssize_t i, j, r = 0, col, piv
    cdef long long inv, f, v
    cdef long long *A
    if m == 0 or n == 0:
        return 0
    A = <long long *> malloc(m * n * sizeof(long long))
    try:
        for i in range(m):
            for j in range(n):
                v = M[i, j] % prime
                A[i * n + j] = v + prime if v < 0 else v
        for col in range(n):
            if r == m:
                break
            piv = -1
            for i in range(r, m):
                if A[i * n + col] != 0:
                    piv = i
                    break
            if piv < 0:
                continue
            if piv != r:
                for j in range(n):
                    v = A[piv * n + j]
                    A[piv * n + j] = A[r * n + j]
                    A[r * n + j] = v
            inv = _inv_mod(A[r * n + col], prime)
            for j in range(col, n):
                A[r * n + j] = (A[r * n + j] * inv) % prime
            for i in range(r + 1, m):
                f = A[i * n + col]
                if f != 0:
                    for j in range(col, n):
                        A[i * n + j] = (A[i * n + j] - f * A[r * n + j]) % prime
                        if A[i * n + j] < 0:
                            A[i * n + j] += prime
            r += 1
        return r
    finally:
        free(A)


def cut_terms_real(const double[:, ::1] A, const double[::1] pt, double[:, ::1] W):
    cdef Py_ssize_t r = A.shape[0], t = A.shape[1], a, b, x, y, l
    cdef double *M
    cdef double *Z
    cdef double s, ld
    if r == 0 or t == 0:
        W[:, :] = 0.0
        return 0.0
    M = <double *> malloc(r * r * sizeof(double))
    Z = <double *> malloc(r * t * sizeof(double))
    try:
        for a in range(r):
            for b in range(a + 1):
                s = 0.0
                for x in range(t):
                    s += A[a, x] * pt[x] * A[b, x]
                M[a * r + b] = s + (1.0 if a == b else 0.0)
        ld = _chol_logdet_real(M, r)
        if isnan(ld):
            raise ArithmeticError("Cholesky factorization failed")
        for x in range(t):
            for a in range(r):
                s = A[a, x]
                for l in range(a):
                    s -= M[a * r + l] * Z[l * t + x]
                Z[a * t + x] = s / M[a * r + a]
        for x in range(t):
            for y in range(x + 1):
                s = 0.0
                for a in range(r):
                    s += Z[a * t + x] * Z[a * t + y]
                W[x, y] = s
                W[y, x] = s
        return ld * INV_LN2
    finally:
        free(M)
        free(Z)


def cut_terms_complex(const double complex[:, ::1] A, const double[::1] pt, double complex[:, ::1] W):
    cdef Py_ssize_t r = A.shape[0], t = A.shape[1], a, b, x, y, l
    cdef double complex *M
    cdef double complex *Z
    cdef double complex c
    cdef double ld
    if r == 0 or t == 0:
        W[:, :] = 0.0
        return 0.0
    M = <double complex *> malloc(r * r * sizeof(double complex))
    Z = <double complex *> malloc(r * t * sizeof(double complex))
    try:
        for a in range(r):
            for b in range(a + 1):
                c = 0.0
                for x in range(t):
                    c += A[a, x] * pt[x] * A[b, x].conjugate()
                M[a * r + b] = c + (1.0 if a == b else 0.0)
        ld = _chol_logdet_complex(M, r)
        if isnan(ld):
            raise ArithmeticError("Cholesky factorization failed")
        for x in range(t):
            for a in range(r):
                c = A[a, x]
                for l in range(a):
                    c -= M[a * r + l] * Z[l * t + x]
                Z[a * t + x] = c / M[a * r + a].real
        for x in range(t):
            for y in range(x + 1):
                c = 0.0
                for a in range(r):
                    c += Z[a * t + x].conjugate() * Z[a * t + y]
                W[x, y] = c
                W[y, x] = c.conjugate()
        return ld * INV_LN2
    finally:
        free(M)
        free(Z)
