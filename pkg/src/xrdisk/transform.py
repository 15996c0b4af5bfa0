"""Quadrature realisations of the X-ray transform and its weighted backprojection.

Data live on a fan-beam grid: ``beta`` uniform on [0, 2 pi) and ``x = sin(alpha)``
at Gauss-Jacobi nodes for the weight ``(1 - x^2)^(gamma + 1/2)``.  Forward data
of a degree-N polynomial have the form ``mu^(2 gamma + 1)`` times a polynomial
in ``(e^{i beta}, e^{i alpha}, sin alpha)``, so this grid integrates products of
such data exactly once ``n_beta >= 2N + 1`` and ``n_alpha >= N + 1``.

Forward integrals use the rescaled time ``t = u tau`` with Gauss-Jacobi nodes
for ``(u (1 - u))^gamma``; the boundary weight ``d^gamma`` then reduces to
``tau^(2 gamma) (u (1 - u))^gamma F^gamma`` with ``F`` smooth and positive.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .basis import (
    ZernikeExpansion,
    disk_grid,
    gegenbauer_norm_sq,
    gegenbauer_table,
    project_to_zernike,
    triangle_indices,
    triangle_size,
    zernike_matrix,
)
from .errors import EvaluationError, IntegrabilityError, ParameterError, ResolutionError
from .quadrature import fiber_rule, incidence_rule, rescaled_time_rule

TWO_PI = 2.0 * math.pi
CHUNK = 2048


def _check_gamma(gamma):
    gamma = float(gamma)
    if not gamma > -1.0:
        raise ParameterError(f"weight exponent gamma={gamma} must exceed -1")
    return gamma


# --------------------------------------------------------------- grids


@dataclass(frozen=True)
class SinogramGrid:
    """Fan-beam sampling grid tied to a data-side weight exponent."""

    n_beta: int
    n_alpha: int
    gamma: float = 0.0

    def __post_init__(self):
        if self.n_beta < 1 or self.n_alpha < 1:
            raise ResolutionError("sinogram grid needs at least one node in each direction")
        _check_gamma(self.gamma)

    @property
    def beta(self) -> np.ndarray:
        return TWO_PI * np.arange(self.n_beta) / self.n_beta

    @property
    def x(self) -> np.ndarray:
        return incidence_rule(self.n_alpha, self.gamma)[0]

    @property
    def alpha(self) -> np.ndarray:
        return incidence_rule(self.n_alpha, self.gamma)[2]

    @property
    def mu(self) -> np.ndarray:
        return np.sqrt(1.0 - self.x**2)

    def weights(self, s: float | None = None) -> np.ndarray:
        """Weights of ``int int g conj(h) mu^(-2 s) d beta d alpha`` (default ``s = gamma``)."""
        s = self.gamma if s is None else s
        _, w, _ = incidence_rule(self.n_alpha, self.gamma)
        wa = w * self.mu ** (-2.0 * self.gamma - 2.0 - 2.0 * s)
        return np.outer(np.full(self.n_beta, TWO_PI / self.n_beta), wa)

    def resolves(self, N: int) -> bool:
        return self.n_beta >= 2 * N + 1 and self.n_alpha >= N + 1

    def mesh(self):
        return np.meshgrid(self.beta, self.alpha, indexing="ij")


@dataclass
class Sinogram:
    """Samples of boundary data on a :class:`SinogramGrid`."""

    model: geo.DiskModel
    grid: SinogramGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.n_beta, self.grid.n_alpha):
            raise ResolutionError(
                f"values of shape {self.values.shape} do not match grid "
                f"{self.grid.n_beta}x{self.grid.n_alpha}"
            )

    @property
    def gamma(self) -> float:
        return self.grid.gamma

    def with_values(self, values) -> "Sinogram":
        return Sinogram(self.model, self.grid, values)

    def inner(self, other: "Sinogram", s: float | None = None) -> complex:
        return complex(np.sum(self.grid.weights(s) * self.values * np.conj(other.values)))

    def norm(self, s: float | None = None) -> float:
        return math.sqrt(max(self.inner(self, s).real, 0.0))

    def interpolant(self) -> "SinogramInterpolant":
        return SinogramInterpolant(self)

    def evenness_residual(self) -> float:
        """Max of ``|v(c) - v(S c)|`` over the grid, ``S`` the scattering involution."""
        b, a = self.grid.mesh()
        if self.model.is_flat:
            b2 = (b + math.pi + 2.0 * a) % TWO_PI
            a2 = -a
        else:
            b2 = np.empty_like(b)
            a2 = np.empty_like(a)
            for idx in np.ndindex(b.shape):
                c = geo.scattering_involution(self.model, (b[idx], a[idx]))
                b2[idx], a2[idx] = c.beta, c.alpha
        other = self.interpolant()(b2, a2)
        return float(np.max(np.abs(other - self.values), initial=0.0))


class SinogramInterpolant:
    """Spectral interpolation of grid data.

    Each Fourier mode in ``beta`` is written as ``e^{i m (beta + alpha)}``
    times ``mu^(2 gamma + 1)`` times a polynomial in ``sin alpha``; the
    polynomial is the interpolant through the Gauss nodes.  Range data are
    reproduced exactly.
    """

    def __init__(self, sin: Sinogram):
        g = sin.grid
        self.gamma = g.gamma
        nb, na = g.n_beta, g.n_alpha
        spec = np.fft.fft(sin.values, axis=0) / nb
        self.modes = np.fft.fftfreq(nb, 1.0 / nb).astype(int)
        if nb % 2 == 0:
            # split the Nyquist mode so the interpolant stays real for real data
            self.modes = np.concatenate([self.modes, [nb // 2]])
            half = spec[nb // 2] / 2.0
            spec = np.concatenate([spec, half[None]], axis=0)
            spec[nb // 2] = half
            self.modes[nb // 2] = -nb // 2
        x, w, alpha = incidence_rule(na, g.gamma)
        mu = np.sqrt(1.0 - x * x)
        reduced = spec * np.exp(-1j * np.outer(self.modes, alpha)) / mu ** (2.0 * g.gamma + 1.0)
        table = gegenbauer_table(g.gamma + 1.0, na - 1, x)
        h = gegenbauer_norm_sq(g.gamma + 1.0, np.arange(na))
        # Gauss projection onto C_n; the Gauss rule makes this exact interpolation
        self.coef = (reduced * w) @ table.T / h
        self.n_alpha = na

    def reduced(self, beta, alpha) -> np.ndarray:
        """Data divided by ``mu^(2 gamma + 1)``; smooth up to the glancing set."""
        beta, alpha = np.broadcast_arrays(np.asarray(beta, float), np.asarray(alpha, float))
        shape = beta.shape
        b = beta.ravel()
        a = alpha.ravel()
        table = gegenbauer_table(self.gamma + 1.0, self.n_alpha - 1, np.sin(a))
        poly = self.coef @ table
        phase = np.exp(1j * np.outer(self.modes, b + a))
        return np.sum(phase * poly, axis=0).reshape(shape)

    def __call__(self, beta, alpha) -> np.ndarray:
        alpha = np.asarray(alpha, float)
        return self.reduced(beta, alpha) * np.cos(alpha) ** (2.0 * self.gamma + 1.0)


# --------------------------------------------------------- forward map


def _evaluator(f):
    if isinstance(f, ZernikeExpansion):
        gamma, N, c = f.gamma, f.degree_max, f.coeffs

        def ev(z):
            return zernike_matrix(gamma, N, z) @ c

        return ev
    if callable(f):
        return lambda z: np.asarray(f(z), dtype=complex) * np.ones(np.shape(z))
    raise ParameterError("f must be a ZernikeExpansion or a callable on complex points")


def _default_nodes(f):
    if isinstance(f, ZernikeExpansion):
        return f.degree_max // 2 + 2
    return 32


def _map_chunks(fn, n_items, workers):
    starts = list(range(0, n_items, CHUNK))
    if workers and workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(fn, starts))
    else:
        parts = [fn(s) for s in starts]
    return parts


def chord_integrals(model, gamma, beta, alpha, ev, n_u, ncols=None, workers=None):
    """``I_0(d^gamma f)`` on the geodesics ``(beta[g], alpha[g])``.

    ``ev`` maps an array of disk points of shape (G, n_u) to values of the
    same shape, or with a trailing axis of length ``ncols``.
    """
    gamma = _check_gamma(gamma)
    beta = np.asarray(beta, float).ravel()
    alpha = np.asarray(alpha, float).ravel()
    u, wu = rescaled_time_rule(n_u, gamma)

    def block(s):
        b, a = beta[s : s + CHUNK], alpha[s : s + CHUNK]
        tau, z = geo.geodesic_positions(model, b, a, u)
        vals = np.asarray(ev(z.ravel()))
        vals = vals.reshape(z.shape + vals.shape[1:])
        if not np.all(np.isfinite(vals)):
            bad_rows = ~np.isfinite(vals.reshape(z.shape[0], -1)).all(axis=1)
            bad = s + int(np.argmax(bad_rows))
            raise EvaluationError(f"non-finite integrand on geodesic {bad} "
                                  f"(beta={beta[bad]:.6g}, alpha={alpha[bad]:.6g})")
        weight = wu[None, :].copy()
        if gamma != 0.0 and not model.is_flat:
            fac = np.empty_like(z.real)
            ok = tau > 0
            dz = geo.boundary_defining(model, z[ok])
            fac[ok] = dz / (tau[ok, None] ** 2 * (u * (1.0 - u))[None, :])
            fac[~ok] = 1.0
            weight = weight * fac**gamma
        elif gamma != 0.0:
            weight = weight * model.radius ** (-2.0 * gamma)
        scale = np.where(tau > 0, tau, 0.0) ** (2.0 * gamma + 1.0)
        if vals.ndim == 3:
            out = np.einsum("gu,guc->gc", weight * np.ones_like(z.real), vals)
            return out * scale[:, None]
        return np.sum(weight * vals, axis=1) * scale

    parts = _map_chunks(block, beta.size, workers)
    if not parts:
        return np.zeros((0,) if ncols is None else (0, ncols), dtype=complex)
    return np.concatenate(parts, axis=0)


def xray(model, gamma, f, grid: SinogramGrid, n_u: int | None = None, workers=None) -> Sinogram:
    """Samples of ``I_0(d^gamma f)`` on ``grid``.

    The returned sinogram carries ``grid``; choose ``grid.gamma == gamma`` to
    pair it with the weighted data space of the same exponent.
    """
    gamma = _check_gamma(gamma)
    ev = _evaluator(f)
    n_u = n_u or _default_nodes(f)
    b, a = grid.mesh()
    vals = chord_integrals(model, gamma, b, a, ev, n_u, workers=workers)
    return Sinogram(model, grid, vals.reshape(b.shape))


# ------------------------------------------------------------ backprojection


def footpoints(model, points, theta, with_time: bool = False):
    """Entry coordinates ``(beta, alpha)`` and ``tau`` of the geodesics through
    ``points[:, None]`` with direction angles ``theta[None, :]``.

    With ``with_time`` the elapsed time from the entry point is appended.
    """
    z = np.asarray(points, dtype=complex).ravel()[:, None]
    th = np.asarray(theta, float)
    if th.ndim == 1:
        th = th[None, :]
    th = np.broadcast_to(th, (z.shape[0], th.shape[-1]))
    R = model.radius
    if model.is_flat:
        w = np.exp(1j * th)
        zv = (np.conj(z) * w).real
        disc = np.maximum(zv * zv - np.abs(z) ** 2 + R * R, 0.0)
        t = zv + np.sqrt(disc)
        e = z - t * w
        beta = np.angle(e) % TWO_PI
        alpha = geo.wrap_angle(th - beta - math.pi)
        tau = 2.0 * R * np.cos(alpha)
        return (beta, alpha, tau, t) if with_time else (beta, alpha, tau)
    beta = np.empty(th.shape)
    alpha = np.empty(th.shape)
    tau = np.empty(th.shape)
    tx = np.empty(th.shape)
    for i in range(th.shape[0]):
        for j in range(th.shape[1]):
            p = geo.PhasePoint.from_angle(model, complex(z[i, 0]), float(th[i, j]))
            c, tx[i, j] = geo.footpoint(model, p)
            beta[i, j], alpha[i, j] = c.beta, c.alpha
            tau[i, j] = geo.exit_time(model, c)
    return (beta, alpha, tau, tx) if with_time else (beta, alpha, tau)


def _fiber_nodes(n_fiber, levels, points):
    phi, w = fiber_rule(n_fiber, levels)
    z = np.asarray(points, dtype=complex).ravel()
    # measure directions relative to the outward radial direction of each point
    omega = np.angle(z)[:, None]
    return omega + phi[None, :], w


def backproject(model, gamma, g, points, n_fiber: int = 256, levels: int = 0,
                check_refinement: bool = False) -> np.ndarray:
    """``I_0^sharp (mu^(-2 gamma - 1) g)`` at the given disk points.

    ``g`` is a :class:`Sinogram` (interpolated spectrally) or a callable of
    ``(beta, alpha)``.  The fiber integral runs over the full circle of
    directions with the periodic rule of :func:`fiber_rule`.
    """
    gamma = _check_gamma(gamma)
    pts = np.asarray(points, dtype=complex)
    shape = pts.shape
    if isinstance(g, Sinogram):
        interp = g.interpolant()
        shift = 2.0 * (g.gamma - gamma)

        def reduced(b, a):
            out = interp.reduced(b, a)
            return out if shift == 0.0 else out * np.cos(a) ** shift
    elif callable(g):
        def reduced(b, a):
            return np.asarray(g(b, a), dtype=complex) * np.cos(a) ** (-2.0 * gamma - 1.0)
    else:
        raise ParameterError("g must be a Sinogram or a callable of (beta, alpha)")

    def run(nf):
        theta, w = _fiber_nodes(nf, levels, pts)
        b, a, _ = footpoints(model, pts, theta)
        vals = reduced(b, a)
        if not np.all(np.isfinite(vals)):
            raise IntegrabilityError("fiber integrand is not finite; weight too singular")
        return vals @ w

    out = run(n_fiber)
    if check_refinement:
        fine = run(2 * n_fiber)
        scale = max(np.max(np.abs(fine), initial=0.0), 1.0)
        if np.max(np.abs(fine - out), initial=0.0) > 1e-3 * scale:
            raise IntegrabilityError("fiber integral does not settle under refinement")
        out = fine
    return out.reshape(shape)


# ---------------------------------------------------------- assembled maps


@dataclass
class DiscreteOperator:
    """Dense matrix between coefficient space and a weighted sample space."""

    matrix: np.ndarray
    domain_weights: np.ndarray
    codomain_weights: np.ndarray
    domain_descriptor: dict = field(default_factory=dict)
    codomain_descriptor: dict = field(default_factory=dict)

    def apply(self, f) -> np.ndarray:
        return self.matrix @ np.asarray(f)

    def adjoint(self, g) -> np.ndarray:
        g = np.asarray(g).ravel()
        return (self.matrix.conj().T @ (self.codomain_weights * g)) / self.domain_weights

    def gram(self) -> np.ndarray:
        A = self.matrix
        return (A.conj().T * self.codomain_weights) @ A / self.domain_weights[:, None]

    def singular_values(self) -> np.ndarray:
        A = np.sqrt(self.codomain_weights)[:, None] * self.matrix / np.sqrt(self.domain_weights)
        return np.linalg.svd(A, compute_uv=False)


def assemble_forward(model, gamma, N: int, grid: SinogramGrid, n_u: int | None = None,
                     workers=None) -> DiscreteOperator:
    """Matrix of ``I_0 d^gamma`` from hatted ``Z^gamma`` coefficients to grid samples."""
    gamma = _check_gamma(gamma)
    if not grid.resolves(N):
        raise ResolutionError(
            f"grid {grid.n_beta}x{grid.n_alpha} cannot resolve degree {N}: "
            f"need n_beta >= {2 * N + 1} and n_alpha >= {N + 1}"
        )
    n_u = n_u or N // 2 + 2
    b, a = grid.mesh()
    nb = triangle_size(N)
    A = chord_integrals(model, gamma, b, a, lambda z: zernike_matrix(gamma, N, z), n_u,
                        ncols=nb, workers=workers)
    n, k = triangle_indices(N)
    return DiscreteOperator(
        matrix=A,
        domain_weights=np.ones(nb),
        codomain_weights=grid.weights().ravel(),
        domain_descriptor={"space": "zernike", "gamma": gamma, "N": N, "n": n, "k": k},
        codomain_descriptor={"space": "sinogram", "n_beta": grid.n_beta,
                             "n_alpha": grid.n_alpha, "gamma": grid.gamma},
    )


# ---------------------------------------------------------- normal operator


def normal_eval(model, gamma, f, points, n_fiber: int | None = None, n_u: int | None = None,
                levels: int = 0) -> np.ndarray:
    """``I_0^sharp mu^(-2 gamma - 1) I_0 d^gamma f`` at disk points, by quadrature.

    Every fiber node is a geodesic; its forward integral is evaluated with
    the rescaled-time rule and divided by ``mu^(2 gamma + 1)`` in the stable
    form ``(tau / mu)^(2 gamma + 1)``.
    """
    gamma = _check_gamma(gamma)
    pts = np.asarray(points, dtype=complex)
    shape = pts.shape
    deg = f.degree_max if isinstance(f, ZernikeExpansion) else 16
    n_fiber = n_fiber or 4 * deg + 8
    n_u = n_u or _default_nodes(f)
    theta, w = _fiber_nodes(n_fiber, levels, pts)
    b, a, tau = footpoints(model, pts, theta)
    ev = _evaluator(f)
    u, wu = rescaled_time_rule(n_u, gamma)
    bf, af, tf = b.ravel(), a.ravel(), tau.ravel()
    out = np.empty(bf.size, dtype=complex)
    for s in range(0, bf.size, CHUNK):
        tt, z = geo.geodesic_positions(model, bf[s : s + CHUNK], af[s : s + CHUNK], u)
        vals = ev(z.ravel()).reshape(z.shape)
        weight = np.broadcast_to(wu, z.shape)
        if gamma != 0.0:
            if model.is_flat:
                weight = weight * model.radius ** (-2.0 * gamma)
            else:
                fac = geo.boundary_defining(model, z) / (tt[:, None] ** 2 * (u * (1.0 - u))[None, :])
                weight = weight * fac**gamma
        ratio = tt / np.cos(af[s : s + CHUNK])
        out[s : s + CHUNK] = np.sum(weight * vals, axis=1) * ratio ** (2.0 * gamma + 1.0)
    vals = out.reshape(b.shape)
    return (vals @ w).reshape(shape)


def normal_apply(model, gamma, f, N: int | None = None, n_fiber: int | None = None,
                 n_u: int | None = None) -> ZernikeExpansion:
    """Quadrature normal operator ``I_0^sharp mu^(-2 gamma - 1) I_0 d^gamma``,
    re-projected onto the hatted ``Z^gamma`` basis up to degree ``N``."""
    gamma = _check_gamma(gamma)
    if N is None:
        if not isinstance(f, ZernikeExpansion):
            raise ParameterError("N is required when f is a callable")
        N = f.degree_max
    z, _ = disk_grid(gamma, N + 2, 4 * N + 4)
    vals = normal_eval(model, gamma, f, z.ravel(), n_fiber=n_fiber, n_u=n_u).reshape(z.shape)
    return project_to_zernike(gamma, vals, N)


def normal_matrix(model, gamma, N: int, n_fiber: int | None = None, n_u: int | None = None,
                  n_radial: int | None = None, n_angular: int | None = None) -> np.ndarray:
    """Quadrature matrix of ``I_0^sharp mu^(-2 gamma - 1) I_0 d^gamma`` on the hatted
    ``Z^gamma`` basis of degree ``<= N`` (column j is the image of basis element j)."""
    gamma = _check_gamma(gamma)
    n_fiber = n_fiber or 4 * N + 8
    n_u = n_u or N // 2 + 2
    n_radial = n_radial or N + 2
    n_angular = n_angular or 4 * N + 4
    z, wd = disk_grid(gamma, n_radial, n_angular)
    pts = z.ravel()
    theta, wf = _fiber_nodes(n_fiber, 0, pts)
    b, a, _ = footpoints(model, pts, theta)
    cols = chord_integrals(model, gamma, b, a, lambda q: zernike_matrix(gamma, N, q), n_u,
                           ncols=triangle_size(N))
    ratio = 1.0 / np.cos(a.ravel()) ** (2.0 * gamma + 1.0)
    cols = (cols * ratio[:, None]).reshape(pts.size, n_fiber, -1)
    field = np.einsum("pfc,f->pc", cols, wf)
    basis = zernike_matrix(gamma, N, pts)
    return basis.conj().T @ (wd.ravel()[:, None] * field)
