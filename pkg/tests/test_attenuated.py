import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xrdisk import attenuated as att, basis, geometry as geo, transform as tr
from xrdisk.errors import DomainError, EvaluationError, ParameterError, PreconditionError

FLAT = geo.DiskModel()
SKEW = np.array([[0.5j, 0.3 + 0.1j], [-0.3 + 0.1j, -0.2j]])


def smooth_phi(scale=1.0):
    return att.AttenuationField(1, lambda z: scale * (0.4 + 0.3 * np.real(z) + 0.2 * np.imag(z) ** 2)[..., None, None])


def test_field_validation():
    with pytest.raises(ParameterError):
        att.AttenuationField(1, lambda z: np.ones(np.shape(z) + (1, 1)), structure="skew-hermitian")
    with pytest.raises(ParameterError):
        att.AttenuationField(1, lambda z: np.ones(np.shape(z) + (1, 1)), support_radius=0.5)
    assert att.bump_field(0.5j).is_skew
    assert not att.bump_field(0.5).is_skew
    bad = att.AttenuationField(1, lambda z: np.where(np.abs(z) > 0.95, np.nan, 0.0)[..., None, None]
                               if np.size(z) < 60 else np.zeros(np.shape(z) + (1, 1)))
    with pytest.raises(EvaluationError):
        bad(np.array([0.99]))


def test_zero_field_reduces_to_xray():
    r = np.random.default_rng(0)
    N = 3
    f = basis.ZernikeExpansion(0.0, N, r.standard_normal(10) + 1j * r.standard_normal(10))
    grid = tr.SinogramGrid(8, 5)
    u0 = tr.xray(FLAT, 0.0, f, grid).values
    u = att.attenuated_sinogram(FLAT, att.zero_field(1), f, grid).values[..., 0]
    assert np.max(np.abs(u - u0)) < 1e-10 * np.max(np.abs(u0))
    assert not np.any(att.attenuated_sinogram(FLAT, smooth_phi(), lambda z: np.zeros(np.shape(z)), grid).values)


@pytest.mark.parametrize("a", [0.7, -0.4, 0.3j])
def test_constant_scalar_closed_form(a):
    # u' + a u = -1 backwards from u(tau) = 0 gives u(0) = (e^{a tau} - 1) / a
    for c in [(0.0, 0.0), (1.0, 0.8)]:
        tau = geo.exit_time(FLAT, c)
        got = att.transport_solve(FLAT, att.constant_field(a), lambda z: np.ones(np.shape(z)), c)[0]
        assert got == pytest.approx((np.exp(a * tau) - 1) / a, abs=1e-10)


def test_integrating_factor_examples():
    c = (0.4, 0.3)
    tau = geo.exit_time(FLAT, c)
    assert np.allclose(att.integrating_factor(FLAT, att.zero_field(2), c, tau), np.eye(2))
    R = att.integrating_factor(FLAT, att.constant_field(0.6), c, 0.7 * tau)
    assert R[0, 0] == pytest.approx(math.exp(-0.6 * 0.7 * tau), rel=1e-10)
    with pytest.raises(DomainError):
        att.integrating_factor(FLAT, att.zero_field(1), c, tau + 0.1)


@settings(max_examples=10, deadline=None)
@given(st.floats(0, 6.28), st.floats(-1.4, 1.4))
def test_skew_factors_unitary(b, a):
    phi = att.bump_field(1.0, 0.8, SKEW)
    tau = geo.exit_time(FLAT, (b, a))
    R = att.integrating_factor(FLAT, phi, (b, a), tau)
    assert np.max(np.abs(R.conj().T @ R - np.eye(2))) < 1e-8


def test_cocycle():
    phi = att.bump_field(1.0, 0.8, SKEW)
    c = (0.2, 0.3)
    tau = geo.exit_time(FLAT, c)
    s, t = 0.3 * tau, 0.8 * tau
    Rs = att.integrating_factor(FLAT, phi, c, s)
    Rt = att.integrating_factor(FLAT, phi, c, t)
    Rts = att.integrating_factor(FLAT, phi, c, t, t0=s)
    assert np.max(np.abs(Rts @ Rs - Rt)) < 1e-8


def test_factorized_cross_check_and_linearity():
    grid = tr.SinogramGrid(8, 6)
    phi = smooth_phi()
    f = lambda z: np.exp(-np.abs(np.asarray(z) - 0.2) ** 2)  # noqa: E731
    h = lambda z: np.cos(2 * np.real(z)) + 0j  # noqa: E731
    direct = att.attenuated_sinogram(FLAT, phi, f, grid).values
    fact = att.factorized_sinogram(FLAT, phi, f, grid).values
    assert np.max(np.abs(direct - fact)) < 1e-7
    combo = att.attenuated_sinogram(FLAT, phi, lambda z: 2 * f(z) - 3j * h(z), grid).values
    lin = 2 * direct - 3j * att.attenuated_sinogram(FLAT, phi, h, grid).values
    assert np.max(np.abs(combo - lin)) < 1e-12


def _adjoint_pairing(phi, m):
    N = 4
    grid = tr.SinogramGrid(64, 32)
    r = np.random.default_rng(1)
    nb = basis.triangle_size(N)
    fc = r.standard_normal((nb, m)) + 1j * r.standard_normal((nb, m))
    f = lambda z: np.stack([basis.zernike_matrix(0.0, N, z) @ fc[:, j] for j in range(m)], -1)  # noqa: E731
    u = att.attenuated_sinogram(FLAT, phi, f, grid)
    b, a = grid.mesh()
    gv = np.stack([np.cos(a) * np.exp(1j * (j + 1) * b) * (1 + 0.2 * np.sin(a)) for j in range(m)], -1)
    g = att.VectorSinogram(FLAT, grid, gv)
    W = att.pairing_weights(FLAT, grid)
    lhs = np.sum(W[..., None] * u.values * np.conj(gv))
    z, w = basis.disk_grid(0.0, 12, 32)
    adj = att.attenuated_adjoint(FLAT, phi, g, z, n_fiber=128, steps=128)
    rhs = att.l2_inner(FLAT, f(z), adj, w, z)
    return lhs, rhs, u, g, W


def test_adjoint_identity_zero_field():
    lhs, rhs, *_ = _adjoint_pairing(att.zero_field(1), 1)
    assert abs(lhs - rhs) < 1e-8 * abs(lhs)


def test_adjoint_identity_skew_field():
    lhs, rhs, *_ = _adjoint_pairing(att.bump_field(1.0, 0.8, SKEW), 2)
    assert abs(lhs - rhs) < 1e-5 * abs(lhs)


def test_gram_positivity():
    grid = tr.SinogramGrid(16, 8)
    phi = smooth_phi()
    f = lambda z: np.exp(-np.abs(np.asarray(z)) ** 2) + 0j  # noqa: E731
    u = att.attenuated_sinogram(FLAT, phi, f, grid)
    z, w = basis.disk_grid(0.0, 12, 32)
    adj = att.attenuated_adjoint(FLAT, phi, u, z)
    assert att.l2_inner(FLAT, f(z)[..., None], adj, w, z).real > 0


def test_adjoint_positivity():
    grid = tr.SinogramGrid(16, 8)
    b, a = grid.mesh()
    g = att.VectorSinogram(FLAT, grid, (np.cos(a) * (1.5 + np.sin(b)))[..., None])
    pts = np.array([0.0, 0.5, -0.3 + 0.6j])
    out = att.attenuated_adjoint(FLAT, smooth_phi(), g, pts)
    assert np.all(out.real > 0) and np.max(np.abs(out.imag)) < 1e-12


def test_normal_probe_zero_field():
    smin, cond = att.normal_probe(FLAT, att.zero_field(1), 6, steps=512)
    assert smin == pytest.approx(4 * math.pi, rel=1e-8)
    assert cond == pytest.approx(1.0, rel=1e-8)
    with pytest.raises(PreconditionError):
        att.normal_probe(FLAT, smooth_phi(), 4)


def test_normal_operator_psd_and_refinement():
    phi = att.bump_field(0.5j, 0.8)
    M = att.normal_operator(FLAT, phi, 6)
    assert np.max(np.abs(M - M.conj().T)) < 1e-12 * np.max(np.abs(M))
    assert np.linalg.eigvalsh(0.5 * (M + M.conj().T)).min() >= -1e-10
    coarse, _ = att.normal_probe(FLAT, phi, 6)
    fine, _ = att.normal_probe(FLAT, phi, 6, tr.SinogramGrid(28, 16), steps=128)
    assert coarse > 0 and abs(fine - coarse) < 0.1 * fine


def test_normal_lipschitz_in_phi():
    base = att.bump_field(0.5j, 0.8)
    M0 = att.normal_operator(FLAT, base, 4)
    consts = []
    for eps in (1e-1, 5e-2, 2.5e-2):
        pert = att.AttenuationField(1, lambda z, e=eps: base.func(z) * (1 + e), 0.8, structure="skew-hermitian")
        consts.append(np.linalg.norm(att.normal_operator(FLAT, pert, 4) - M0, 2) / eps)
    assert max(consts) / min(consts) < 1.2


def test_stability_ratio_zero_field():
    for n, k in [(0, 0), (3, 1), (6, 6)]:
        f = basis.ZernikeExpansion.basis(0.0, 6, n, k)
        assert att.stability_ratio(FLAT, att.zero_field(1), f, steps=256) == pytest.approx(
            1 / math.sqrt(4 * math.pi), rel=1e-8)
    r = np.random.default_rng(2)
    f = basis.ZernikeExpansion(0.0, 6, r.standard_normal(28))
    assert att.stability_ratio(FLAT, att.zero_field(1), f, steps=256) == pytest.approx(
        1 / math.sqrt(4 * math.pi), rel=1e-8)


def test_imaginary_attenuation_does_not_increase_norm():
    N = 5
    grid = tr.SinogramGrid(2 * N + 2, N + 2)
    W = np.sqrt(att.pairing_weights(FLAT, grid, "dbeta-dalpha").ravel())
    A0 = W[:, None] * att.assemble_attenuated(FLAT, att.zero_field(1), N, grid)
    A1 = W[:, None] * att.assemble_attenuated(FLAT, att.bump_field(0.8j, 0.8), N, grid)
    assert np.linalg.norm(A1, 2) <= np.linalg.norm(A0, 2) * (1 + 1e-10)
