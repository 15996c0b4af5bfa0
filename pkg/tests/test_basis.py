import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import dblquad
from scipy.special import eval_chebyu

from xrdisk import basis
from xrdisk.errors import BasisIndexError, ParameterError


def test_triangle_indexing():
    n, k = basis.triangle_indices(4)
    assert basis.triangle_size(4) == 15 == n.size
    for i, (a, b) in enumerate(zip(n, k)):
        assert basis.triangle_index(a, b) == i


def test_psi_examples():
    assert basis.psi_eval(0.0, 0, 0, 1.7, 0.0) == pytest.approx(1 / (2 * math.pi))
    assert abs(basis.psi_eval(0.0, 0, 0, 0.3, math.pi / 2)) < 1e-16
    for g in (0.0, 0.5, 1.0):
        assert basis.jacobi_weight_poly(g, 1, 0.0) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ParameterError):
        basis.psi_eval(-1.0, 0, 0, 0.0, 0.0)


@settings(max_examples=30)
@given(st.integers(0, 8), st.integers(-3, 10), st.floats(0, 6.28), st.floats(-1.5, 1.5))
def test_psi_matches_exponential_form(n, k, b, a):
    # the unweighted boundary functions are sums of two exponentials
    ref = ((-1) ** n / (4 * math.pi)) * np.exp(1j * (n - 2 * k) * (b + a)) * (
        np.exp(1j * (n + 1) * a) + (-1) ** n * np.exp(-1j * (n + 1) * a))
    assert basis.psi_eval(0.0, n, k, b, a) == pytest.approx(ref, abs=1e-13)


def test_psi_norm_by_quadrature():
    nb, na = 64, 64
    b = 2 * math.pi * np.arange(nb) / nb
    x, w = np.polynomial.legendre.leggauss(na)
    a = x * math.pi / 2
    v = basis.psi_eval(0.0, 3, 1, b[:, None], a[None, :])
    norm = np.sum(np.abs(v) ** 2 * w[None, :] * (math.pi / 2)) * 2 * math.pi / nb
    assert norm == pytest.approx(0.25, abs=1e-10)
    assert basis.psi_norm(0.0, 3) ** 2 == pytest.approx(0.25)


def test_weighted_psi_uses_gegenbauer():
    # gamma=0 reduces to the Chebyshev polynomial of the second kind
    x = np.linspace(-0.9, 0.9, 7)
    ratio = basis.jacobi_weight_poly(0.0, 4, x) / eval_chebyu(4, x)
    assert np.ptp(ratio) < 1e-12


def test_zernike_examples():
    assert basis.zernike_eval(0.0, 0, 0, 0.3 + 0.2j) == pytest.approx(1.0)
    assert abs(basis.zernike_eval(0.0, 1, 0, 0.0)) < 1e-15
    assert basis.zernike_norm(0.0, 2, 1) ** 2 == pytest.approx(math.pi / 3, abs=1e-10)
    with pytest.raises(BasisIndexError):
        basis.zernike_eval(0.0, 2, 3, 0.1)


def test_zernike_norm_against_scipy():
    g, n, k = 0.7, 3, 1

    def integrand(r, w):
        z = r * np.exp(1j * w)
        return abs(basis.zernike_eval(g, n, k, z)) ** 2 * (1 - r * r) ** g * r

    val, _ = dblquad(integrand, 0, 2 * math.pi, 0, 1, epsabs=1e-11)
    assert val == pytest.approx(float(basis.zernike_norm(g, n, k)) ** 2, rel=1e-8)


@pytest.mark.parametrize("gamma", [-0.5, 0.0, 1.0])
def test_zernike_gram_identity(gamma):
    N = 8
    z, w = basis.disk_grid(gamma, N + 2, 4 * N + 4)
    A = basis.zernike_matrix(gamma, N, z.ravel())
    G = A.conj().T @ (w.ravel()[:, None] * A)
    assert np.max(np.abs(G - np.eye(G.shape[0]))) < 1e-12


def test_projection_examples():
    e = basis.project_to_zernike(0.0, lambda z: np.ones_like(z), 5)
    assert e.get(0, 0) == pytest.approx(math.sqrt(math.pi))
    assert np.max(np.abs(e.coeffs[1:])) < 1e-13
    e = basis.project_to_zernike(0.0, lambda z: z, 5)
    mask = np.ones(e.coeffs.size, bool)
    mask[basis.triangle_index(1, 0)] = False
    assert abs(e.get(1, 0)) > 0.1 and np.max(np.abs(e.coeffs[mask])) < 1e-13
    g = 0.5
    e = basis.project_to_zernike(g, lambda z: basis.zernike_eval(g, 3, 1, z), 5)
    mask[:] = True
    mask[basis.triangle_index(3, 1)] = False
    assert np.max(np.abs(e.coeffs[mask])) < 1e-10


def test_synthesize_examples():
    one = basis.ZernikeExpansion.basis(0.0, 3, 0, 0)
    assert np.allclose(one(np.array([0.1, 0.5j, -0.7])), 1 / math.sqrt(math.pi))
    assert not np.any(basis.ZernikeExpansion(0.0, 3)(np.array([0.2, 0.3])))


@pytest.mark.parametrize("gamma", [0.0, 0.6])
def test_round_trip(gamma):
    r = np.random.default_rng(2)
    N = 15
    nb = basis.triangle_size(N)
    e = basis.ZernikeExpansion(gamma, N, r.standard_normal(nb) + 1j * r.standard_normal(nb))
    back = basis.project_to_zernike(gamma, e, N)
    assert np.max(np.abs(back.coeffs - e.coeffs)) < 1e-10


def test_resolution_error():
    from xrdisk.errors import ResolutionError
    with pytest.raises(ResolutionError):
        basis.project_to_zernike(0.0, np.ones((2, 4)), 8)


def test_conjugate_symmetry_of_real_fields():
    e = basis.project_to_zernike(0.0, lambda z: np.exp(-np.abs(z - 0.3) ** 2) + 0j, 8)
    assert e.is_conjugate_symmetric(1e-12)
