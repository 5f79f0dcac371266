import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from relaycap import netmodel as nm
from relaycap.errors import DomainError
from conftest import corpus

# frozen draws of the reference generator (numpy Philox keyed by the seed)
PHILOX_0_NORMAL = [-0.2059740286292238, -0.12884495093462758, -0.28978987549091256, -1.271943284573895]
PHILOX_12345_UNIFORM = [0.42075435954078155, 0.6531709678504624, 0.4331635821770152]


def test_reference_generator_stream_is_frozen():
    np.testing.assert_array_equal(nm.rng_for(0).standard_normal(4), PHILOX_0_NORMAL)
    np.testing.assert_array_equal(nm.rng_for(12345).random(3), PHILOX_12345_UNIFORM)


# --------------------------------------------------------------------------
# Cut


def test_cut_basics():
    c = nm.Cut.of([0, 2, 3])
    assert 2 in c and 1 not in c
    assert list(c) == [0, 2, 3] == c.nodes()
    assert len(c) == 3
    assert c.complement(5).nodes() == [1, 4]
    assert c == nm.Cut.of({3, 2, 0})
    with pytest.raises(DomainError):
        nm.Cut.of([-1])


def test_cut_validation(diamond):
    assert nm.cut_tx(diamond, [0, 1]).tolist() == [1, 1, 0, 0]
    with pytest.raises(DomainError):
        nm.cut_tx(diamond, [1])  # missing the source
    with pytest.raises(DomainError):
        nm.cut_tx(diamond, [0, 3])  # contains the destination
    with pytest.raises(TypeError):
        nm.as_cut(5)


def test_all_cuts_count(diamond):
    cuts = list(nm.all_cuts(diamond))
    assert len(cuts) == 4 and len(set(cuts)) == 4
    assert all(0 in c and 3 not in c for c in cuts)


# --------------------------------------------------------------------------
# Gaussian


def test_gaussian_construction_zeroes_structure():
    H = np.arange(16, dtype=float).reshape(4, 4) + 1
    net = nm.GaussianNetwork(H, s=1, d=2)
    assert np.all(np.diag(net.H) == 0)
    assert np.all(net.H[:, 1] == 0) and np.all(net.H[2, :] == 0)
    assert not net.is_complex
    with pytest.raises(ValueError):
        net.H[0, 3] = 5.0  # frozen


def test_gaussian_rejects_bad_input():
    with pytest.raises(DomainError):
        nm.GaussianNetwork(np.ones((2, 3)))
    with pytest.raises(DomainError):
        nm.GaussianNetwork(np.full((2, 2), np.nan))
    with pytest.raises(DomainError):
        nm.GaussianNetwork(np.ones((3, 3)), s=1, d=1)


def test_real_valued_complex_input_becomes_real():
    net = nm.GaussianNetwork(np.ones((3, 3)) + 0j)
    assert not net.is_complex


def test_single_link_value(link):
    assert nm.gaussian_cut_value(link, [0], 15.0) == pytest.approx(4.0, abs=1e-12)


def test_diamond_cut_values(diamond):
    # {s}: rank-one 1 + 2p; {s, r1, r2}: 1 + 9 + 9 at unit power
    assert nm.gaussian_cut_value(diamond, [0], 1.0) == pytest.approx(math.log2(3))
    assert nm.gaussian_cut_value(diamond, [0, 1, 2], 1.0) == pytest.approx(math.log2(19))
    assert nm.gaussian_cut_value(diamond, [0, 1], 1.0) == pytest.approx(math.log2(2 * 10))


def test_power_validation(diamond):
    with pytest.raises(DomainError):
        nm.gaussian_cut_value(diamond, [0], -1.0)
    with pytest.raises(DomainError):
        nm.gaussian_cut_value(diamond, [0], [1.0, 2.0])


def test_restrict(diamond):
    sub, idx = diamond.restrict([2])
    assert idx == [0, 2, 3]
    assert sub.n == 3 and sub.s == 0 and sub.d == 2
    assert sub.H[0, 1] == 1.0 and sub.H[1, 2] == 3.0


def _random_power(data, n, lo=0.1, hi=100.0):
    return np.array(data.draw(st.lists(st.floats(lo, hi), min_size=n, max_size=n)))


@given(seed=st.integers(0, 10**6), complex_=st.booleans(), data=st.data())
def test_gradient_matches_finite_differences(seed, complex_, data):
    n = 6
    net = nm.random_gaussian_network(n, seed, "dense-complex" if complex_ else "dense-real")
    p = _random_power(data, n)
    cut = nm.Cut.of([0] + [v for v in range(1, n - 1) if data.draw(st.booleans())])
    g = nm.gaussian_cut_gradient(net, cut, p)
    for i in range(n):
        h = 1e-5 * max(1.0, p[i])
        e = np.zeros(n)
        e[i] = h
        fd = (nm.gaussian_cut_value(net, cut, p + e) - nm.gaussian_cut_value(net, cut, p - e)) / (2 * h)
        assert g[i] == pytest.approx(fd, abs=1e-5)


@given(seed=st.integers(0, 10**6), data=st.data())
def test_gradient_nonnegative_and_value_monotone(seed, data):
    n = 7
    net = nm.random_gaussian_network(n, seed)
    p = _random_power(data, n, 0.0, 50.0)
    cut = nm.Cut.of([0] + [v for v in range(1, n - 1) if data.draw(st.booleans())])
    assert np.all(nm.gaussian_cut_gradient(net, cut, p) >= -1e-12)
    v0 = nm.gaussian_cut_value(net, cut, p)
    assert v0 >= 0
    bump = p + _random_power(data, n, 0.0, 5.0)
    assert nm.gaussian_cut_value(net, cut, bump) >= v0 - 1e-12


@given(seed=st.integers(0, 10**6), data=st.data())
def test_hessian_matches_gradient_differences(seed, data):
    n = 5
    net = nm.random_gaussian_network(n, seed)
    p = _random_power(data, n, 0.5, 20.0)
    tx = nm.cut_tx(net, [0, 1, 3])
    _, g, Hs = nm.gaussian_cut_derivatives(net, tx, p)
    for i in range(n):
        h = 1e-6 * max(1.0, p[i])
        e = np.zeros(n)
        e[i] = h
        _, gp, _ = nm.gaussian_cut_derivatives(net, tx, p + e)
        _, gm, _ = nm.gaussian_cut_derivatives(net, tx, p - e)
        np.testing.assert_allclose(Hs[:, i], (gp - gm) / (2 * h), atol=1e-5)
    # concave: Hessian negative semidefinite
    assert np.linalg.eigvalsh(Hs).max() <= 1e-10


@given(seed=st.integers(0, 10**6), data=st.data())
def test_concavity_along_segments(seed, data):
    n = 6
    net = nm.random_gaussian_network(n, seed)
    cut = [0, 2, 4]
    p, q = _random_power(data, n, 0, 30), _random_power(data, n, 0, 30)
    a = data.draw(st.floats(0, 1))
    mid = nm.gaussian_cut_value(net, cut, a * p + (1 - a) * q)
    assert mid >= a * nm.gaussian_cut_value(net, cut, p) + (1 - a) * nm.gaussian_cut_value(net, cut, q) - 1e-9


# --------------------------------------------------------------------------
# submodularity of every model


def _diminishing_returns(net, rng, p=None, draws=200):
    rel = nm.relays(net)
    worst = math.inf
    for _ in range(draws):
        v = int(rng.choice(rel))
        others = [u for u in rel if u != v]
        B = [u for u in others if rng.random() < 0.6]
        A = [u for u in B if rng.random() < 0.5]
        F = lambda S: nm.cut_value(net, [net.s, *S], p)  # noqa: E731
        worst = min(worst, (F(A + [v]) - F(A)) - (F(B + [v]) - F(B)))
    return worst


@pytest.mark.parametrize("style", ["dense-real", "dense-complex", "layered(2)"])
def test_gaussian_submodular(style, rng):
    for seed in range(5):
        net = nm.random_gaussian_network(8, seed, style)
        assert _diminishing_returns(net, rng, rng.uniform(0, 10, 8)) >= -1e-9


def test_erasure_submodular(rng):
    for seed in range(5):
        assert _diminishing_returns(nm.random_erasure_network(8, seed), rng) >= -1e-9


def test_adt_submodular_exact(rng):
    for seed in range(5):
        net = nm.random_adt_network(7, seed, prime=2 + seed % 2, max_gain=3)
        assert _diminishing_returns(net, rng, draws=100) >= 0


# --------------------------------------------------------------------------
# ADT


def test_adt_single_link():
    net = nm.ADTNetwork([[0, 2], [0, 0]], prime=2)
    assert net.q == 2
    assert nm.adt_cut_value(net, [0]) == 2


def test_shift_matrix():
    S = nm.shift_matrix(3, 1)
    np.testing.assert_array_equal(S @ np.array([1, 2, 3]), [0, 1, 2])
    np.testing.assert_array_equal(nm.shift_matrix(3, 3), np.zeros((3, 3)))


def test_adt_transfer_shape():
    net = nm.random_adt_network(5, 3, prime=3)
    G = nm.build_adt_transfer(net, [0, 2])
    assert G.shape == (net.q * 3, net.q * 2)


def test_adt_validation():
    with pytest.raises(DomainError):
        nm.ADTNetwork([[0, 1], [0, 0]], prime=4)
    with pytest.raises(DomainError):
        nm.ADTNetwork([[0, -1], [0, 0]])
    with pytest.raises(DomainError):
        nm.ADTNetwork([[0, 0.5], [0, 0]])
    with pytest.raises(DomainError):
        nm.gfp_rank(np.eye(2, dtype=int), 6)


def test_broadcast_and_mac_ranks():
    # s reaches two relays with levels 2 and 1; relays feed d with levels 1 and 2
    g = np.zeros((4, 4), dtype=int)
    g[0, 1], g[0, 2], g[1, 3], g[2, 3] = 2, 1, 1, 2
    net = nm.ADTNetwork(g, 2)
    assert nm.adt_cut_value(net, [0]) == 2
    assert nm.adt_cut_value(net, [0, 1, 2]) == 2
    # {s, r1}: s -> r2 carries 1 level, r1 -> d carries 1 level
    assert nm.adt_cut_value(net, [0, 1]) == 2
    assert nm.adt_cut_value(net, [0, 2]) == 2 + 2


# --------------------------------------------------------------------------
# erasure


def test_erasure_link():
    net = nm.ErasureNetwork([[1, 0.3], [1, 1]])
    assert nm.erasure_cut_value(net, [0]) == pytest.approx(0.7)


def test_erasure_structure():
    net = nm.random_erasure_network(6, 2, density=0.5)
    assert np.all(np.diag(net.eps) == 1.0)
    with pytest.raises(DomainError):
        nm.ErasureNetwork([[1, 1.5], [1, 1]])


@pytest.mark.parametrize("name,net", corpus("erasure", max_nodes=8))
def test_erasure_closed_form_equals_mi_oracle(name, net):
    for cut in nm.all_cuts(net):
        assert nm.erasure_cut_value(net, cut) == pytest.approx(nm.erasure_mi_oracle(net, cut), abs=1e-9)


def test_erasure_oracle_joint_and_factored_agree():
    net = nm.random_erasure_network(5, 9, density=0.8)
    for cut in nm.all_cuts(net):
        a = nm.erasure_mi_oracle(net, cut, joint_limit=64)
        b = nm.erasure_mi_oracle(net, cut, joint_limit=0)
        assert a == pytest.approx(b, abs=1e-12)


# --------------------------------------------------------------------------
# correlated diamond


def _gap_closed_form(rho):
    # independently derived by hand for gains (1, 3)
    return math.log2(2 * (10 - 9 * rho**2)) - 0.5 * math.log2(19 + 18 * rho) - 0.5 * math.log2(3)


def test_correlated_mi_values():
    dia = nm.CorrelatedDiamond(1.0, 3.0, 0.0)
    assert nm.correlated_gaussian_mi(dia, [0]) == pytest.approx(0.5 * math.log2(3))
    assert nm.correlated_gaussian_mi(dia, [0, 1, 2]) == pytest.approx(0.5 * math.log2(19))
    assert nm.correlated_gaussian_mi(dia, [0, 1]) == pytest.approx(0.5 * math.log2(20))


@pytest.mark.parametrize("rho", np.linspace(0, 1, 41))
def test_gap_matches_closed_form(rho):
    gap = nm.nonsubmodularity_gap(nm.CorrelatedDiamond(1.0, 3.0, float(rho)))
    assert gap == pytest.approx(_gap_closed_form(rho), abs=1e-9)


def test_gap_sign_change():
    gaps = [nm.nonsubmodularity_gap(nm.CorrelatedDiamond(1, 3, r)) for r in np.linspace(0, 1, 21)]
    assert gaps[0] >= 0
    assert max(gaps) > 0 > min(gaps)


def test_diamond_rho_validation():
    with pytest.raises(DomainError):
        nm.CorrelatedDiamond(1, 3, 1.5)


# --------------------------------------------------------------------------
# generators


def test_generators_deterministic():
    a = nm.random_gaussian_network(10, 1)
    b = nm.random_gaussian_network(10, 1)
    np.testing.assert_array_equal(a.H, b.H)
    assert not np.array_equal(a.H, nm.random_gaussian_network(10, 2).H)


def test_layered_structure():
    net = nm.random_gaussian_network(100, 3, "layered(4)")
    lay = nm.layer_of(100, 4)
    assert lay[0] == 0 and lay[-1] == lay[-2] + 1
    i, j = np.nonzero(net.H)
    assert np.all(lay[j] == lay[i] + 1)


def test_adt_generator_range():
    net = nm.random_adt_network(5, 4, prime=2, max_gain=3)
    assert net.gains.min() >= 0 and net.gains.max() <= 3


def test_complex_generator():
    net = nm.random_gaussian_network(6, 0, "dense-complex")
    assert net.is_complex
    with pytest.raises(DomainError):
        nm.random_gaussian_network(6, 0, "sparse")


def test_every_cut_enumerated_once():
    net = nm.random_erasure_network(6, 1)
    masks = [c.mask for c in nm.all_cuts(net)]
    assert len(masks) == 16 == len(set(masks))
    assert set(itertools.chain.from_iterable(c.nodes() for c in nm.all_cuts(net))) == set(range(5))
