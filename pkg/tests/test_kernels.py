import os
import subprocess
import sys

import numpy as np
import pytest

from relaycap import _fallback, kernels
from relaycap.netmodel import GaussianNetwork, rng_for

BACKENDS = kernels.backends()


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")
    assert kernels.BACKEND in BACKENDS


def test_pure_python_env_forces_fallback():
    env = dict(os.environ, RELAYCAP_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import relaycap.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def _reference_logdet(H, tx, p):
    m = tx.astype(bool)
    A = H[np.ix_(m, ~m)].T
    M = np.eye(A.shape[0]) + (A * p[m]) @ A.conj().T
    return np.linalg.slogdet(M)[1] / np.log(2)


@pytest.mark.parametrize("name", sorted(BACKENDS))
@pytest.mark.parametrize("complex_", [False, True])
def test_logdet_matches_slogdet(name, complex_, rng):
    mod = BACKENDS[name]
    fn = mod.gaussian_logdet_complex if complex_ else mod.gaussian_logdet_real
    for _ in range(60):
        n = int(rng.integers(2, 9))
        H = rng.standard_normal((n, n))
        if complex_:
            H = H + 1j * rng.standard_normal((n, n))
        tx = (rng.random(n) < 0.5).astype(np.uint8)
        p = rng.uniform(0, 10, n)
        assert fn(np.ascontiguousarray(H), tx, p) == pytest.approx(_reference_logdet(H, tx, p), abs=1e-10)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_logdet_empty_sides_are_zero(name):
    mod = BACKENDS[name]
    H = np.ones((3, 3))
    p = np.ones(3)
    assert mod.gaussian_logdet_real(H, np.zeros(3, np.uint8), p) == 0.0
    assert mod.gaussian_logdet_real(H, np.ones(3, np.uint8), p) == 0.0


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_erasure_value(name, rng):
    mod = BACKENDS[name]
    for _ in range(50):
        n = int(rng.integers(2, 8))
        eps = rng.random((n, n))
        tx = (rng.random(n) < 0.5).astype(np.uint8)
        m = tx.astype(bool)
        ref = sum(1 - np.prod(eps[i, ~m]) for i in np.flatnonzero(m))
        assert mod.erasure_value(eps, tx) == pytest.approx(ref, abs=1e-12)


def _image_size(M, p):
    m, n = M.shape
    seen = set()
    for code in range(p ** n):
        v = np.array([(code // p ** k) % p for k in range(n)], dtype=np.int64)
        seen.add(tuple((M @ v) % p))
    return len(seen)


@pytest.mark.parametrize("name", sorted(BACKENDS))
@pytest.mark.parametrize("prime", [2, 3, 5])
def test_gfp_rank_vs_image(name, prime, rng):
    mod = BACKENDS[name]
    for _ in range(40):
        m, n = (int(v) for v in rng.integers(1, 5, 2))
        M = np.ascontiguousarray(rng.integers(-7, 8, (m, n)), dtype=np.int64)
        r = mod.gfp_rank(M, prime)
        assert prime ** r == _image_size(M % prime, prime)


@pytest.mark.parametrize("name", sorted(BACKENDS))
@pytest.mark.parametrize("complex_", [False, True])
def test_cut_terms(name, complex_, rng):
    mod = BACKENDS[name]
    for _ in range(40):
        r, t = (int(v) for v in rng.integers(1, 7, 2))
        A = rng.standard_normal((r, t))
        if complex_:
            A = A + 1j * rng.standard_normal((r, t))
        A = np.ascontiguousarray(A)
        pt = rng.uniform(0, 5, t)
        W = np.empty((t, t), dtype=A.dtype)
        fn = mod.cut_terms_complex if complex_ else mod.cut_terms_real
        v = fn(A, pt, W)
        M = np.eye(r) + (A * pt) @ A.conj().T
        assert v == pytest.approx(np.linalg.slogdet(M)[1] / np.log(2), abs=1e-10)
        np.testing.assert_allclose(W, A.conj().T @ np.linalg.solve(M, A), atol=1e-10)


def test_backends_agree_on_networks():
    if "cython" not in BACKENDS:
        pytest.skip("compiled extension not built")
    c, py = BACKENDS["cython"], BACKENDS["python"]
    for seed in range(20):
        rng = rng_for(seed)
        n = 10
        net = GaussianNetwork(rng.standard_normal((n, n)))
        p = rng.uniform(0, 3, n)
        for _ in range(20):
            tx = (rng.random(n) < 0.5).astype(np.uint8)
            tx[0], tx[-1] = 1, 0
            assert c.gaussian_logdet_real(net.H, tx, p) == pytest.approx(
                py.gaussian_logdet_real(net.H, tx, p), rel=1e-12, abs=1e-12)


def test_cholesky_failure_raises():
    # a negative power makes the Gram matrix indefinite
    H = np.zeros((3, 3))
    H[0, 2] = 2.0
    for mod in BACKENDS.values():
        with pytest.raises(ArithmeticError):
            mod.gaussian_logdet_real(H, np.array([1, 1, 0], np.uint8), np.array([-1.0, 0.0, 0.0]))
    assert _fallback.INV_LN2 == pytest.approx(1 / np.log(2))


def test_pure_python_min_cut_matches(tmp_path):
    from relaycap import sfm
    net = GaussianNetwork(rng_for(4).standard_normal((12, 12)))
    here = sfm.min_cut(net, 1.0)
    code = ("import numpy as np; from relaycap import sfm; from relaycap.netmodel import GaussianNetwork, rng_for;"
            "r = sfm.min_cut(GaussianNetwork(rng_for(4).standard_normal((12, 12))), 1.0);"
            "print(repr(r.value), r.cut.mask)")
    env = dict(os.environ, RELAYCAP_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    value, mask = out.stdout.split()
    assert float(value) == pytest.approx(here.value, rel=1e-12)
    assert int(mask) == here.cut.mask
