"""Closed-form spectral data: singular values, the operators L_gamma, Sobolev
scales, SVD inversion and the functional relations they satisfy."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import geometry as geo
from .basis import (
    BoundaryExpansion,
    ZernikeExpansion,
    boundary_raw_table,
    psi_norm,
    triangle_indices,
    zernike_matrix,
)
from .errors import BasisIndexError, ConditioningError, ParameterError, ResolutionError
from .transform import Sinogram, SinogramGrid, assemble_forward, normal_matrix

FOUR_PI = 4.0 * math.pi
SIDES = ("disk", "data-anisotropic", "data-isotropic")


def _log_beta(a, b):
    return gammaln(a) + gammaln(b) - gammaln(np.add(a, b))


def singular_value(gamma: float, n, k):
    """``sigma^gamma_{n,k}`` of ``I_0 d^gamma`` between the hatted bases."""
    gamma = float(gamma)
    if not gamma > -1.0:
        raise ParameterError(f"weight exponent gamma={gamma} must exceed -1")
    n_arr = np.asarray(n)
    k_arr = np.asarray(k)
    if np.any(k_arr < 0) or np.any(k_arr > n_arr):
        raise BasisIndexError("singular values are defined on 0 <= k <= n only")
    log_s = (
        (gamma + 1.0) * math.log(2.0)
        + 0.5 * math.log(math.pi)
        - 0.5 * np.log(n_arr + 1.0)
        + 0.5 * (_log_beta(n_arr - k_arr + 1.0 + gamma, k_arr + 1.0 + gamma)
                 - _log_beta(n_arr - k_arr + 1.0, k_arr + 1.0))
    )
    out = np.exp(log_s)
    return float(out) if out.ndim == 0 else out


def singular_values(gamma: float, N: int) -> np.ndarray:
    """All ``sigma^gamma_{n,k}``, ``n <= N``, in triangle storage order."""
    n, k = triangle_indices(N)
    return singular_value(gamma, n, k)


def normal_symbol(gamma: float, n, m):
    """The Beta-function calculus of the normal operator evaluated at ``(n, m)``.

    ``n`` and ``m`` are the joint eigenvalues of ``L_gamma^(1/2) - gamma - 1``
    and ``D_omega = -i d/d omega``.
    """
    n = np.asarray(n, float)
    m = np.asarray(m, float)
    lb = _log_beta((n + m) / 2 + 1 + gamma, (n - m) / 2 + 1 + gamma) - _log_beta(
        (n + m) / 2 + 1, (n - m) / 2 + 1
    )
    return 2.0 ** (2 * gamma + 2) * math.pi / (n + 1) * np.exp(lb)


# ------------------------------------------------------------ L_gamma


def _same_gamma(gamma, f):
    if abs(float(gamma) - f.gamma) > 1e-15:
        raise ParameterError(f"operator gamma={gamma} does not match expansion gamma={f.gamma}")


def apply_L_spectral(gamma: float, f: ZernikeExpansion) -> ZernikeExpansion:
    """``L_gamma`` acting diagonally: ``Z^gamma_{n,k} -> (n + 1 + gamma)^2 Z^gamma_{n,k}``."""
    _same_gamma(gamma, f)
    n, _ = f.indices
    return f.with_coeffs(f.coeffs * (n + 1.0 + f.gamma) ** 2)


def polar_grid(n_radial: int, n_angular: int):
    """Uniform grid ``rho_i = i / (n_radial - 1)``, ``omega_j = 2 pi j / n_angular``."""
    rho = np.linspace(0.0, 1.0, n_radial)
    omega = 2.0 * math.pi * np.arange(n_angular) / n_angular
    return rho, omega


def apply_L_fd(gamma: float, samples, n_radial: int | None = None) -> np.ndarray:
    """Finite-difference ``L_gamma`` on samples over :func:`polar_grid`.

    ``samples`` has shape (n_radial, n_angular).  Radial derivatives are
    fourth-order centred differences, angular ones spectral.  Rows that the
    five-point stencil cannot reach (the two nearest the centre and the two
    nearest the boundary) are returned as NaN: the operator degenerates at
    ``rho = 1`` and no boundary condition is imposed.
    """
    f = np.asarray(samples, dtype=complex)
    if f.ndim != 2:
        raise ResolutionError("samples must be a 2-d (radial x angular) array")
    nr, nw = f.shape
    if nr < 7 or nw < 3:
        raise ResolutionError(f"grid {nr}x{nw} too coarse for the finite-difference stencil")
    rho, _ = polar_grid(nr, nw)
    h = rho[1] - rho[0]
    m = np.fft.fftfreq(nw, 1.0 / nw)
    if nw % 2 == 0:
        m[nw // 2] = 0.0  # second derivative of the Nyquist mode is ambiguous, drop it
    f_ww = np.fft.ifft(-(m**2) * np.fft.fft(f, axis=1), axis=1)
    out = np.full_like(f, np.nan)
    i = np.arange(2, nr - 2)
    f1 = (-f[i + 2] + 8 * f[i + 1] - 8 * f[i - 1] + f[i - 2]) / (12 * h)
    f2 = (-f[i + 2] + 16 * f[i + 1] - 30 * f[i] + 16 * f[i - 1] - f[i - 2]) / (12 * h * h)
    r = rho[i][:, None]
    q = 1.0 - r * r
    out[i] = -q * f2 - (q / r - 2.0 * (gamma + 1.0) * r) * f1 - f_ww[i] / (r * r) + (1.0 + gamma) ** 2 * f[i]
    return out


# ------------------------------------------------------------- Sobolev


@dataclass(frozen=True)
class SobolevSpec:
    s: float
    gamma: float = 0.0
    side: str = "disk"

    def __post_init__(self):
        if self.side not in SIDES:
            raise ParameterError(f"side must be one of {SIDES}")

    def weights(self, n, k=None) -> np.ndarray:
        n = np.asarray(n, float)
        if self.side == "disk":
            return (n + 1.0 + self.gamma) ** (2.0 * self.s)
        if self.side == "data-anisotropic":
            return (n + 1.0) ** (2.0 * self.s)
        if k is None:
            raise ParameterError("the isotropic data scale needs the k index")
        m = n - 2.0 * np.asarray(k, float)
        return ((n + 1.0) ** 2 + m * m) ** self.s


def sobolev_norm(spec: SobolevSpec, coeffs) -> float:
    """Weighted l2 norm of hatted coefficients.

    ``coeffs`` is a :class:`ZernikeExpansion`, a :class:`BoundaryExpansion`
    or a tuple ``(n, k, values)``.
    """
    if isinstance(coeffs, ZernikeExpansion):
        n, k = coeffs.indices
        c = coeffs.coeffs
    elif isinstance(coeffs, BoundaryExpansion):
        n, k, c = coeffs.n, coeffs.k, coeffs.coeffs
    else:
        n, k, c = (np.asarray(a) for a in coeffs)
    w = spec.weights(n, k)
    return float(math.sqrt(np.sum(w * np.abs(c) ** 2)))


# ------------------------------------------------------ data coefficients


def data_coefficients(sin: Sinogram, N: int, K: int = 0) -> BoundaryExpansion:
    """``<g, psihat^gamma_{n,k}>`` on the grid's weighted data space for
    ``n <= N`` and ``-K <= k <= n + K``."""
    g = sin.grid
    gamma = g.gamma
    out = BoundaryExpansion.window(gamma, N, K)
    b, a = g.mesh()
    W = g.weights() * sin.values
    mvals = np.arange(-N - 2 * K, N + 2 * K + 1)
    raw = boundary_raw_table(gamma, N, mvals, b, a)  # (M, N+1, nb, na)
    ip = np.einsum("mnij,ij->mn", np.conj(raw), W)
    norms = psi_norm(gamma, np.arange(N + 1))
    for idx, (n, k) in enumerate(zip(out.n, out.k)):
        m = n - 2 * k
        # conj of (-i)^n / (2 pi)
        out.coeffs[idx] = ip[m + N + 2 * K, n] * (1j) ** n / (2.0 * math.pi * norms[n])
    return out


# ------------------------------------------------------- reconstruction


@dataclass(frozen=True)
class SpectralFilter:
    """Multiplier applied in place of ``1/sigma``.

    ``kind`` is ``none``, ``truncate`` (drop degrees above ``n_max`` or
    singular values below ``cutoff``) or ``tikhonov`` (``sigma/(sigma^2+lam)``).
    """

    kind: str = "none"
    lam: float = 0.0
    n_max: int | None = None
    cutoff: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "truncate", "tikhonov"):
            raise ParameterError(f"unknown filter kind {self.kind!r}")
        if self.lam < 0:
            raise ParameterError("Tikhonov parameter must be non-negative")

    def inverse(self, sigma, n) -> np.ndarray:
        sigma = np.asarray(sigma, float)
        if self.kind == "tikhonov":
            return sigma / (sigma * sigma + self.lam)
        out = 1.0 / sigma
        if self.kind == "truncate":
            keep = sigma >= self.cutoff
            if self.n_max is not None:
                keep &= np.asarray(n) <= self.n_max
            out = np.where(keep, out, 0.0)
        return out


def _is_reference(model) -> bool:
    return model.is_flat and model.radius == 1.0


def svd_reconstruct(model, gamma, sin: Sinogram, N: int, filt: SpectralFilter | None = None,
                    normalization: str = "hat") -> ZernikeExpansion:
    """Invert ``I_0 d^gamma`` on degree ``<= N`` through its singular value decomposition.

    On the unit Euclidean disk the decomposition is explicit.  Other models use
    the numerical decomposition of the assembled operator.  With
    ``normalization="raw"`` the output coefficients refer to the unnormalised
    ``Z^gamma_{n,k}``.
    """
    gamma = float(gamma)
    filt = filt or SpectralFilter()
    if abs(sin.grid.gamma - gamma) > 1e-15:
        raise ParameterError("sinogram grid exponent must equal the reconstruction gamma")
    if not sin.grid.resolves(N):
        raise ResolutionError(
            f"sinogram {sin.grid.n_beta}x{sin.grid.n_alpha} does not resolve degree {N}"
        )
    n, k = triangle_indices(N)
    if _is_reference(model):
        sig = singular_values(gamma, N)
        if np.min(sig) < 1e-14:
            raise ConditioningError("singular value below 1e-14")
        a = data_coefficients(sin, N).coeffs
        coeffs = a * filt.inverse(sig, n)
    else:
        op = assemble_forward(model, gamma, N, sin.grid)
        sw = np.sqrt(op.codomain_weights)
        U, sig, Vh = np.linalg.svd(sw[:, None] * op.matrix, full_matrices=False)
        if np.min(sig) < 1e-14:
            raise ConditioningError("singular value below 1e-14")
        proj = U.conj().T @ (sw * sin.values.ravel())
        # the numerical basis has no (n, k) label; order-matched degrees for truncation
        coeffs = Vh.conj().T @ (proj * filt.inverse(sig, np.sort(n)))
    exp = ZernikeExpansion(gamma, N, coeffs)
    if normalization == "raw":
        from .basis import zernike_norm

        exp = exp.with_coeffs(coeffs / zernike_norm(gamma, n, k))
    elif normalization != "hat":
        raise ParameterError("normalization must be 'hat' or 'raw'")
    return exp


# --------------------------------------------------- functional relations


def functional_relation_residual(model, gamma: float, N: int, route: str = "spectral") -> float:
    """Operator-norm residual of the functional relation on degree ``<= N``.

    For ``gamma = 0`` this is ``|| N_0^2 L_0 - (4 pi)^2 Id ||``.  Otherwise it
    compares the normal operator with its Beta-function calculus in ``(n, m)``.
    ``route`` selects the normal operator: ``spectral`` (closed-form
    singular values) or ``quadrature`` (assembled by fiber quadrature).
    """
    n, k = triangle_indices(N)
    if route == "spectral":
        if not _is_reference(model):
            raise ParameterError("the spectral route needs the unit Euclidean disk")
        Nmat = np.diag(singular_values(gamma, N) ** 2)
    elif route == "quadrature":
        Nmat = normal_matrix(model, gamma, N)
    else:
        raise ParameterError("route must be 'spectral' or 'quadrature'")
    if gamma == 0.0:
        L = np.diag((n + 1.0) ** 2)
        R = Nmat @ Nmat @ L - FOUR_PI**2 * np.eye(n.size)
    else:
        R = Nmat - np.diag(normal_symbol(gamma, n, n - 2 * k))
    return float(np.linalg.norm(R, 2))


def isometry_constant(s: float, trials: int = 100, N: int = 10, seed: int = 0,
                      route: str = "quadrature"):
    """Mean and relative spread of ``||I_0 f||_{H^(s+1/2)_T} / ||f||_{H~^s}`` over random f.

    The quadrature route pushes each f through the assembled forward matrix
    and measures the data norm from coefficients recovered by quadrature.
    """
    rng = np.random.default_rng(seed)
    n, k = triangle_indices(N)
    disk = SobolevSpec(s, 0.0, "disk")
    data = SobolevSpec(s + 0.5, 0.0, "data-anisotropic")
    model = geo.DiskModel()
    if route == "quadrature":
        grid = SinogramGrid(2 * N + 2, N + 2, 0.0)
        A = assemble_forward(model, 0.0, N, grid).matrix
    ratios = np.empty(trials)
    for t in range(trials):
        c = rng.standard_normal(n.size) + 1j * rng.standard_normal(n.size)
        f = ZernikeExpansion(0.0, N, c)
        c = c / sobolev_norm(disk, f)
        if route == "quadrature":
            sin = Sinogram(model, grid, (A @ c).reshape(grid.n_beta, grid.n_alpha))
            g = data_coefficients(sin, N)
            num = sobolev_norm(data, g)
        else:
            num = sobolev_norm(data, (n, k, singular_values(0.0, N) * c))
        ratios[t] = num
    mean = float(np.mean(ratios))
    return mean, float(np.ptp(ratios) / mean)


# ------------------------------------------------------- regularity witness


def regularity_witness(degrees=(20, 40, 80, 160), steps=(100, 200, 400, 800), s: float = 1.5):
    """``f = d^(1/2)``: bounded ``H~^s`` norms against divergent classical ``H^2`` seminorms.

    Returns ``(zernike_norms, classical_seminorms)``.  The Zernike norms are
    partial sums over degree ``<= N`` and settle as N grows; the classical
    seminorms are computed from finite differences on radial grids of
    ``n`` steps (cut one step before the boundary) and grow without bound.
    """
    from .basis import jacobi_table, zernike_norm
    from .quadrature import gauss_jacobi

    spec = SobolevSpec(s, 0.0, "disk")
    znorms = []
    for N in degrees:
        # only the radial modes Z_{2j,j} meet f; the weight (1-x)^(1/2) absorbs f exactly
        jmax = N // 2
        x, w = gauss_jacobi(jmax + 2, 0.5, 0.0)
        P = jacobi_table(0.0, 0.0, jmax, x)
        j = np.arange(jmax + 1)
        c = (-1.0) ** j * (P @ w) * (math.pi / 2.0) * 2.0**-0.5 / zernike_norm(0.0, 2 * j, j)
        znorms.append(sobolev_norm(spec, (2 * j, j, c)))
    hnorms = []
    for nstep in steps:
        r = np.linspace(0.0, 1.0, nstep + 1)
        h = r[1] - r[0]
        f = np.sqrt(1.0 - r * r)
        f1 = np.gradient(f, h, edge_order=2)
        f2 = np.gradient(f1, h, edge_order=2)
        core = slice(1, nstep - 1)
        # Hessian of a radial function: f_rr^2 + (f_r / r)^2, area element 2 pi r dr
        dens = (f2[core] ** 2 + (f1[core] / r[core]) ** 2) * r[core]
        hnorms.append(math.sqrt(2.0 * math.pi * np.sum(dens) * h))
    return np.array(znorms), np.array(hnorms)
