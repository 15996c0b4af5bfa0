import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import beta as B, ellipe

from xrdisk import basis, geometry as geo, transform as tr
from xrdisk.errors import ParameterError, ResolutionError
from xrdisk.spectral import singular_value

FLAT = geo.DiskModel()
ONE = lambda z: np.ones(np.shape(z))  # noqa: E731


def test_constant_gives_chord_length():
    grid = tr.SinogramGrid(8, 6)
    s = tr.xray(FLAT, 0.0, ONE, grid)
    b, a = grid.mesh()
    assert np.max(np.abs(s.values - 2 * np.cos(a))) < 1e-14


def test_weighted_constant_examples():
    grid = tr.SinogramGrid(8, 6)
    s = tr.xray(FLAT, -0.5, ONE, grid)
    assert np.max(np.abs(s.values - math.pi)) < 1e-12
    s = tr.xray(FLAT, 0.7, ONE, grid)
    _, a = grid.mesh()
    ref = (2 * np.cos(a)) ** 2.4 * B(1.7, 1.7)
    assert np.max(np.abs(s.values - ref)) < 1e-8


def test_gamma_rejected():
    with pytest.raises(ParameterError):
        tr.xray(FLAT, -1.0, ONE, tr.SinogramGrid(4, 4))


@pytest.mark.parametrize("kappa", [0.0, 0.3])
def test_xray_against_adaptive_quadrature(kappa):
    model = geo.DiskModel(kappa, 1.0)
    f = lambda z: np.exp(-2 * np.abs(np.asarray(z) - 0.2) ** 2) + 0j  # noqa: E731
    for b, a in [(0.3, 0.1), (2.0, -0.9), (4.0, 1.2)]:
        tau = geo.exit_time(model, (b, a))
        ref, _ = quad(lambda t: f(geo.geodesic_point(model, (b, a), t).position).real, 0, tau,
                      epsabs=1e-12)
        got = tr.chord_integrals(model, 0.0, np.array([b]), np.array([a]), f, 40)[0]
        assert got == pytest.approx(ref, abs=1e-9)


def test_curved_constant_is_length():
    model = geo.DiskModel(-0.3, 1.0)
    grid = tr.SinogramGrid(3, 4)
    s = tr.xray(model, 0.0, ONE, grid)
    b, a = grid.mesh()
    assert np.allclose(s.values, geo.exit_times(model, b, a), atol=1e-10)


def test_backproject_examples():
    pts = np.array([0.0, 0.3, 0.5j, -0.8 + 0.1j])
    v = tr.backproject(FLAT, 0.0, lambda b, a: basis.psi_eval(0.0, 0, 0, b, a), pts)
    assert np.max(np.abs(v - 1.0)) < 1e-12
    rho = np.array([0.0, 0.4, 0.9])
    v = tr.backproject(FLAT, -0.5, lambda b, a: 2 * np.cos(a), rho.astype(complex), n_fiber=512, levels=2)
    assert np.max(np.abs(v - 8 * ellipe(rho**2))) < 1e-8
    for n in range(7):
        for k in (-2, -1, n + 1, n + 3):
            v = tr.backproject(FLAT, 0.0, lambda b, a: basis.psi_eval(0.0, n, k, b, a), pts)
            assert np.max(np.abs(v)) < 1e-9


def test_backproject_against_adaptive_fiber_integral():
    g = lambda b, a: np.cos(a) * (1 + 0.3 * np.sin(b + 2 * a))  # noqa: E731
    x = 0.35 - 0.2j

    # direct: walk back from x along -v to the boundary
    def fiber(th):
        v = complex(math.cos(th), math.sin(th))
        c, _ = geo.footpoint(FLAT, geo.PhasePoint(x, v))
        return g(c.beta, c.alpha) / math.cos(c.alpha)

    ref, _ = quad(fiber, 0, 2 * math.pi, epsabs=1e-12, limit=200)
    got = tr.backproject(FLAT, 0.0, g, np.array([x]))[0]
    assert got == pytest.approx(ref, abs=1e-9)


def test_assemble_single_column():
    grid = tr.SinogramGrid(4, 3)
    op = tr.assemble_forward(FLAT, 0.0, 0, grid)
    b, a = grid.mesh()
    ref = math.sqrt(4 * math.pi) * basis.psi_eval(0.0, 0, 0, b, a, hat=True)
    assert np.max(np.abs(op.matrix[:, 0] - ref.ravel())) < 1e-14
    assert geo.exit_time(FLAT, (0.0, math.pi / 2)) == 0.0


def test_assembled_singular_values():
    N = 10
    op = tr.assemble_forward(FLAT, 0.0, N, tr.SinogramGrid(2 * N + 2, N + 2))
    sv = np.sort(op.singular_values())[::-1]
    n, k = basis.triangle_indices(N)
    ref = np.sort(np.sqrt(4 * math.pi / (n + 1)))[::-1]
    assert np.max(np.abs(sv - ref) / ref) < 1e-8


@pytest.mark.parametrize("gamma", [-0.5, 0.5, 1.0])
def test_weighted_singular_values(gamma):
    N = 6
    op = tr.assemble_forward(FLAT, gamma, N, tr.SinogramGrid(2 * N + 2, N + 2, gamma))
    sv = np.sort(op.singular_values())
    n, k = basis.triangle_indices(N)
    ref = np.sort(singular_value(gamma, n, k))
    assert np.max(np.abs(sv - ref) / ref) < 1e-6


def test_adjoint_consistency():
    N = 5
    grid = tr.SinogramGrid(14, 8, 0.5)
    op = tr.assemble_forward(FLAT, 0.5, N, grid)
    r = np.random.default_rng(0)
    f = r.standard_normal(op.matrix.shape[1]) + 1j * r.standard_normal(op.matrix.shape[1])
    g = r.standard_normal(op.matrix.shape[0]) + 1j * r.standard_normal(op.matrix.shape[0])
    lhs = np.sum(op.codomain_weights * op.apply(f) * np.conj(g))
    rhs = np.sum(f * np.conj(op.adjoint(g)))
    assert abs(lhs - rhs) < 1e-12 * abs(lhs)


def test_resolution_error():
    with pytest.raises(ResolutionError):
        tr.assemble_forward(FLAT, 0.0, 10, tr.SinogramGrid(8, 4))


def test_normal_apply_is_diagonal():
    N = 6
    for n, k in [(0, 0), (3, 1), (6, 4)]:
        out = tr.normal_apply(FLAT, 0.0, basis.ZernikeExpansion.basis(0.0, N, n, k))
        ref = basis.ZernikeExpansion.basis(0.0, N, n, k, 4 * math.pi / (n + 1))
        assert np.max(np.abs(out.coeffs - ref.coeffs)) < 1e-8
    g = 0.5
    out = tr.normal_apply(FLAT, g, basis.ZernikeExpansion.basis(g, N, 4, 1))
    assert out.get(4, 1) == pytest.approx(singular_value(g, 4, 1) ** 2, rel=1e-6)


def test_normal_of_inverse_sqrt_is_constant():
    rho = np.array([0.0, 0.5, 0.95])
    v = tr.normal_eval(FLAT, -0.5, ONE, rho.astype(complex), n_fiber=512, levels=2)
    assert np.max(np.abs(v - 2 * math.pi**2)) < 1e-4


def test_evenness_and_rotation():
    r = np.random.default_rng(1)
    N = 5
    f = basis.ZernikeExpansion(0.0, N, r.standard_normal(21) + 1j * r.standard_normal(21))
    grid = tr.SinogramGrid(16, 8)
    s = tr.xray(FLAT, 0.0, f, grid)
    assert s.evenness_residual() < 1e-10
    # rotating f by one beta step shifts the sinogram by one row
    theta = 2 * math.pi / grid.n_beta
    s_rot = tr.xray(FLAT, 0.0, lambda z: f(np.asarray(z) * np.exp(-1j * theta)), grid)
    assert np.max(np.abs(s_rot.values - np.roll(s.values, 1, axis=0))) < 1e-12


def test_curved_evenness():
    model = geo.DiskModel(0.3, 1.0)
    s = tr.xray(model, 0.0, lambda z: np.exp(-np.abs(np.asarray(z) - 0.2) ** 2) + 0j, tr.SinogramGrid(16, 10))
    assert s.evenness_residual() < 1e-9
