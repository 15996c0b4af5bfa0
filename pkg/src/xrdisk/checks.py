"""Verification suites behind ``xrdisk verify``.

Each suite returns a list of :class:`Check` records.  A check passes when
``|measured - expected| <= tol`` (or ``measured <= tol`` for residuals,
where ``expected`` is 0).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ellipe

from . import asymptotics as asy
from . import attenuated as att
from . import range_ops as rng_ops
from .basis import ZernikeExpansion, disk_grid, psi_eval, synthesize, triangle_indices, zernike_eval
from .geometry import DiskModel
from .spectral import (
    apply_L_fd,
    functional_relation_residual,
    isometry_constant,
    polar_grid,
    singular_value,
    singular_values,
    svd_reconstruct,
)
from .transform import Sinogram, SinogramGrid, assemble_forward, backproject, normal_eval, xray

SUITES = ("identity", "svd", "range", "attenuated", "asymptotics")


@dataclass
class Check:
    id: str
    measured: float
    expected: float
    tol: float
    passed: bool

    @classmethod
    def close(cls, id, measured, expected, tol, relative=False):
        measured = float(measured)
        err = abs(measured - expected)
        if relative:
            err /= abs(expected)
        return cls(id, measured, float(expected), float(tol), bool(err <= tol))

    @classmethod
    def small(cls, id, measured, tol):
        measured = float(measured)
        return cls(id, measured, 0.0, float(tol), bool(abs(measured) <= tol))

    def line(self) -> str:
        return (f"{self.id}\t{self.measured:.10e}\t{self.expected:.10e}\t{self.tol:.1e}\t"
                f"{'PASS' if self.passed else 'FAIL'}")


def _rel_spectrum_error(sv, expected):
    a = np.sort(np.asarray(sv))[::-1]
    b = np.sort(np.asarray(expected))[::-1]
    return float(np.max(np.abs(a - b) / b))


# -------------------------------------------------------------------- svd


def svd_table(N: int = 10):
    n, k = triangle_indices(N)
    closed = singular_value(0.0, n, k)
    return float(np.max(np.abs(closed / np.sqrt(4 * math.pi / (n + 1.0)) - 1.0)))


def svd_assembled(gamma: float, N: int, n_beta: int, n_alpha: int, workers=None):
    grid = SinogramGrid(n_beta, n_alpha, gamma)
    op = assemble_forward(DiskModel(), gamma, N, grid, workers=workers)
    return _rel_spectrum_error(op.singular_values(), singular_values(gamma, N))


def reconstruction_error(N: int = 25, width: float = 0.3, workers=None):
    model = DiskModel()
    grid = SinogramGrid(2 * N + 2, N + 2, 0.0)
    g = lambda z: np.exp(-np.abs(z) ** 2 / (2 * width**2)) + 0j
    sin = xray(model, 0.0, g, grid, n_u=N + 8, workers=workers)
    rec = svd_reconstruct(model, 0.0, sin, N)
    z, w = disk_grid(0.0, N + 8, 4 * N + 8)
    diff = synthesize(rec, z) - g(z)
    return float(math.sqrt(np.sum(w * np.abs(diff) ** 2) / np.sum(w * np.abs(g(z)) ** 2)))


def deterministic_rerun(seed: int = 7, N: int = 8):
    """Serialise the same seeded pipeline twice and compare byte for byte."""
    from .io import write_coefficients, write_sinogram

    def once():
        r = np.random.default_rng(seed)
        n = (N + 1) * (N + 2) // 2
        f = ZernikeExpansion(0.0, N, r.standard_normal(n) + 1j * r.standard_normal(n))
        grid = SinogramGrid(2 * N + 2, N + 2, 0.0)
        sin = xray(DiskModel(), 0.0, f, grid)
        noisy = sin.with_values(sin.values + 1e-3 * r.standard_normal(sin.values.shape))
        return write_sinogram(None, noisy) + write_coefficients(None, svd_reconstruct(DiskModel(), 0.0, noisy, N))

    return once() == once()


def suite_svd(workers=None):
    out = [Check.small("svd.sigma_table", svd_table(10), 1e-12),
           Check.small("svd.assembled_I0", svd_assembled(0.0, 10, 256, 128, workers), 1e-6)]
    for g in (-0.5, 0.5, 1.0):
        out.append(Check.small(f"svd.weighted[gamma={g:g}]", svd_assembled(g, 8, 40, 20, workers), 1e-5))
    out.append(Check.small("svd.reconstruct_gaussian", reconstruction_error(workers=workers), 1e-3))
    out.append(Check.close("svd.deterministic", float(deterministic_rerun()), 1.0, 0.0))
    return out


# --------------------------------------------------------------- identity


def eigen_identity(gamma: float, nmax: int = 6, n_radial: int = 400, n_angular: int = 32):
    rho, om = polar_grid(n_radial, n_angular)
    p = rho[:, None] * np.exp(1j * om[None, :])
    worst = 0.0
    for n in range(nmax + 1):
        for k in range(n + 1):
            Z = zernike_eval(gamma, n, k, p)
            L = apply_L_fd(gamma, Z)
            lam = (n + 1 + gamma) ** 2
            rows = ~np.isnan(L[:, 0])
            err = np.max(np.abs(L[rows] - lam * Z[rows])) / np.max(np.abs(lam * Z[rows]))
            worst = max(worst, float(err))
    return worst


def elliptic_identity(rho=None):
    """``I_0^sharp I_0 1`` against ``8 E(rho)``: max absolute deviation."""
    rho = np.concatenate([np.linspace(0.0, 0.95, 20), 1.0 - np.geomspace(1e-2, 1e-5, 6)]) if rho is None else rho
    vals = backproject(DiskModel(), -0.5, lambda b, a: 2.0 * np.cos(a), rho.astype(complex),
                       n_fiber=512, levels=2)
    return float(np.max(np.abs(vals - 8.0 * ellipe(rho**2))))


def constancy_identity():
    """``I_0^sharp I_0 (1 - rho^2)^(-1/2)`` at several radii; returns (mean, spread)."""
    rho = np.array([0.0, 0.3, 0.6, 0.9, 0.99])
    vals = normal_eval(DiskModel(), -0.5, lambda z: np.ones(np.shape(z)), rho.astype(complex),
                       n_fiber=512, levels=2).real
    return float(np.mean(vals)), float(np.ptp(vals))


def suite_identity(workers=None):
    out = [Check.small(f"identity.eigen_L[gamma={g:g}]", eigen_identity(g), 1e-5) for g in (0.0, 1.0)]
    out.append(Check.small("identity.funcrel_(4pi)^2_id",
                           functional_relation_residual(DiskModel(), 0.0, 10, "quadrature"), 1e-6))
    for s in (0.0, 1.0, 2.0):
        mean, spread = isometry_constant(s, trials=100, N=10)
        out.append(Check.close(f"identity.isometry_mean[s={s:g}]", mean, math.sqrt(4 * math.pi), 1e-8,
                               relative=True))
        out.append(Check.small(f"identity.isometry_spread[s={s:g}]", spread, 1e-8))
    out.append(Check.small("identity.elliptic_8E", elliptic_identity(), 1e-8))
    mean, spread = constancy_identity()
    out.append(Check.close("identity.constancy_2pi^2", mean, 2 * math.pi**2, 1e-4))
    out.append(Check.small("identity.constancy_spread", spread, 1e-4))
    return out


# ------------------------------------------------------------------ range


def range_residuals(N: int = 6, n_beta: int = 64, n_alpha: int = 32, seed: int = 1):
    model = DiskModel()
    grid = SinogramGrid(n_beta, n_alpha, 0.0)
    b, a = grid.mesh()
    r = np.random.default_rng(seed)
    nb = (N + 1) * (N + 2) // 2
    f = ZernikeExpansion(0.0, N, r.standard_normal(nb) + 1j * r.standard_normal(nb))
    u = xray(model, 0.0, f, grid)
    v = Sinogram(model, grid, r.standard_normal(b.shape) + 1j * r.standard_normal(b.shape))
    pv = rng_ops.apply_P_minus(v)
    psi = Sinogram(model, grid, psi_eval(0.0, 2, 5, b, a))
    cpsi = rng_ops.apply_C_minus(psi)
    q = rng_ops.range_project(v)
    qq = rng_ops.range_project(q)
    return {
        "P_minus_squared": rng_ops.apply_P_minus(pv).norm(0.0) / max(pv.norm(0.0), 1e-300),
        "C_minus_range": rng_ops.apply_C_minus(u).norm(0.0) / u.norm(0.0),
        "C_minus_psi_2_5": psi.with_values(cpsi.values - 1j * psi.values).norm(0.0) / psi.norm(0.0),
        "projector_idempotent": q.with_values(qq.values - q.values).norm(0.0) / v.norm(0.0),
    }


def suite_range(workers=None):
    return [Check.small(f"range.{k}", v, 1e-7) for k, v in range_residuals().items()]


# ------------------------------------------------------------- attenuated


def skew_generator():
    return np.array([[0.5j, 0.3 + 0.1j], [-0.3 + 0.1j, -0.2j]])


def attenuated_reduction(N: int = 4, steps: int = 256, seed: int = 3):
    model = DiskModel()
    r = np.random.default_rng(seed)
    nb = (N + 1) * (N + 2) // 2
    f = ZernikeExpansion(0.0, N, r.standard_normal(nb) + 1j * r.standard_normal(nb))
    grid = SinogramGrid(2 * N + 2, N + 2, 0.0)
    u0 = xray(model, 0.0, f, grid)
    uphi = att.attenuated_sinogram(model, att.zero_field(1), f, grid, steps).values[..., 0]
    return float(np.max(np.abs(uphi - u0.values)) / np.max(np.abs(u0.values)))


def attenuated_unitarity(n_samples: int = 20, seed: int = 4):
    model = DiskModel()
    Phi = att.bump_field(1.0, 0.8, skew_generator())
    r = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        beta, alpha = r.uniform(0, 2 * math.pi), r.uniform(-1.4, 1.4)
        t = r.uniform(0.2, 1.0) * 2 * math.cos(alpha)
        U = att.integrating_factor(model, Phi, (beta, alpha), t)
        worst = max(worst, float(np.max(np.abs(U.conj().T @ U - np.eye(2)))))
    return worst


def attenuated_normal(N: int = 12):
    """(most negative eigenvalue / largest, sigma_min coarse, sigma_min fine)."""
    model = DiskModel()
    Phi = att.bump_field()
    M = att.normal_operator(model, Phi, N)
    ev = np.linalg.eigvalsh(0.5 * (M + M.conj().T))
    coarse, _ = att.normal_probe(model, Phi, N)
    fine, _ = att.normal_probe(model, Phi, N, SinogramGrid(4 * N + 4, 2 * N + 4, 0.0), steps=128)
    return float(min(ev.min(), 0.0) / ev.max()), coarse, fine


def attenuated_stability(N: int = 12, trials: int = 200, seed: int = 5):
    """Max ratio and max relative drift of ``stability_ratio`` under refinement."""
    model = DiskModel()
    Phi = att.bump_field()
    g1 = SinogramGrid(2 * N + 2, N + 2, 0.0)
    g2 = SinogramGrid(4 * N + 4, 2 * N + 4, 0.0)
    A1 = att.assemble_attenuated(model, Phi, N, g1, 64)
    A2 = att.assemble_attenuated(model, Phi, N, g2, 128)
    r = np.random.default_rng(seed)
    nb = (N + 1) * (N + 2) // 2
    ratios, drift = [], []
    for _ in range(trials):
        c = r.standard_normal(nb) + 1j * r.standard_normal(nb)
        r1 = att.stability_ratio(model, Phi, c, g1, A=A1)
        r2 = att.stability_ratio(model, Phi, c, g2, A=A2)
        ratios.append(r1)
        drift.append(abs(r2 - r1) / r1)
    return float(np.max(ratios)), float(np.max(drift))


def suite_attenuated(workers=None):
    out = [Check.small("attenuated.zero_field_reduction", attenuated_reduction(), 1e-8),
           Check.small("attenuated.unitarity", attenuated_unitarity(), 1e-8)]
    neg, coarse, fine = attenuated_normal()
    out.append(Check.small("attenuated.normal_psd", neg, 1e-10))
    out.append(Check.small("attenuated.sigma_min_drift", abs(fine - coarse) / fine, 1e-2))
    out.append(Check.close("attenuated.sigma_min_positive", float(coarse > 0), 1.0, 0.0))
    ratio, drift = attenuated_stability()
    out.append(Check.close("attenuated.stability_bounded", float(np.isfinite(ratio)), 1.0, 0.0))
    out.append(Check.small("attenuated.stability_drift", drift, 0.1))
    return out


# ------------------------------------------------------------ asymptotics


def suite_asymptotics(workers=None):
    from scipy.special import beta as beta_fn

    out = []
    model = DiskModel()
    for g in (-0.5, 0.0, 0.7, 1.0):
        rep = asy.verify_I0_leading(model, g)
        out.append(Check.close(f"asymptotics.I0_exponent[gamma={g:g}]", rep.measured["exponent"],
                               2 * g + 1, 1e-3))
        out.append(Check.close(f"asymptotics.I0_coefficient[gamma={g:g}]",
                               rep.measured["coefficient_normalized"], beta_fn(g + 1, g + 1), 1e-6))
    for g, k in ((0.0, 0), (0.5, 0), (1.0, 0)):
        rep = asy.verify_backproj_index(g, k)
        ok = rep.measured["best_dictionary"] == rep.expected["best_dictionary"]
        ratio = rep.measured["residual_ratio"] if ok else np.inf
        out.append(Check.small(f"asymptotics.index_ratio[gamma={g:g},k={k}]", ratio, 0.1))
    rep = asy.verify_backproj_index(0.0, 0)
    out.append(Check.small("asymptotics.smooth_residual[gamma=0]", rep.fits["smooth"].residual, 1e-6))
    rep = asy.classify_normal_output(model, "none", "one")
    out.append(Check.close("asymptotics.elliptic_dlogd", rep.measured["dlogd"], -2.0, 0.05,
                           relative=True))
    rep = asy.classify_normal_output(model, "none", "inv_sqrt")
    out.append(Check.small("asymptotics.constancy_nonconstant", rep.measured["max_nonconstant"], 1e-6))
    rep = asy.classify_normal_output(model, "1/tau", "one")
    out.append(Check.small("asymptotics.weighted_smooth_residual", rep.fits["smooth"].residual, 1e-6))
    return out


RUNNERS = {"identity": suite_identity, "svd": suite_svd, "range": suite_range,
           "attenuated": suite_attenuated, "asymptotics": suite_asymptotics}


def run_suite(name: str, workers=None):
    names = SUITES if name == "all" else (name,)
    out = []
    for n in names:
        if n not in RUNNERS:
            raise KeyError(n)
        out.extend(RUNNERS[n](workers))
    return out
