"""Matrix-attenuated X-ray transform.

Sign convention: ``u`` solves ``X u + Phi u = -f`` with ``u = 0`` on the
outgoing boundary, and ``I_Phi f = u`` on the incoming boundary.  Along a
geodesic entering at ``t = 0`` this is ``u(0) = int_0^tau R(t)^-1 f(gamma(t)) dt``
with ``R' = -Phi R``, ``R(0) = Id``.  For a constant scalar ``a`` and
``f = 1`` one gets ``(e^(a tau) - 1) / a``.

All ODEs use classical RK4 with a fixed number of steps in rescaled time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import geometry as geo
from .basis import ZernikeExpansion, disk_grid, triangle_indices, triangle_size, zernike_matrix
from .errors import DomainError, EvaluationError, InjectivityError, ParameterError, PreconditionError
from .quadrature import fiber_rule
from .transform import Sinogram, SinogramGrid, footpoints

TWO_PI = 2.0 * math.pi
DEFAULT_STEPS = 256
CHUNK = 256


@dataclass
class AttenuationField:
    """Matrix field ``Phi`` on the disk.

    ``func`` maps an array of complex points of shape ``S`` to an array of
    shape ``S + (m, m)``.
    """

    m: int
    func: Callable
    support_radius: float = 1.0
    regularity: str = "smooth"
    structure: str = "general"
    convention: str = "u(m)"

    def __post_init__(self):
        if self.structure not in ("general", "skew-hermitian"):
            raise ParameterError("structure must be 'general' or 'skew-hermitian'")
        rho = np.linspace(0.0, 1.0, 9)
        z = (rho[:, None] * np.exp(1j * np.linspace(0, TWO_PI, 8, endpoint=False))[None, :]).ravel()
        P = self(z)
        if self.structure == "skew-hermitian":
            err = np.max(np.abs(P + np.conj(np.swapaxes(P, -1, -2))))
            if err > 1e-12:
                raise ParameterError(f"field flagged skew-hermitian but Phi + Phi^* = {err:.2e}")
        outside = np.abs(z) > self.support_radius * (1 + 1e-12)
        if np.any(outside) and np.max(np.abs(P[outside]), initial=0.0) > 0.0:
            raise ParameterError("field does not vanish outside its support radius")

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        out = np.asarray(self.func(z), dtype=complex)
        out = np.broadcast_to(out, z.shape + (self.m, self.m))
        if not np.all(np.isfinite(out)):
            bad = np.argwhere(~np.isfinite(out.reshape(z.size, -1)).all(axis=1))[0][0]
            raise EvaluationError(f"attenuation is not finite at {z.ravel()[bad]}")
        return out

    def scaled(self, s: float) -> "AttenuationField":
        return AttenuationField(self.m, lambda z: s * self.func(z), self.support_radius,
                                self.regularity, self.structure, self.convention)

    @property
    def is_skew(self) -> bool:
        return self.structure == "skew-hermitian"


def zero_field(m: int = 1) -> AttenuationField:
    return AttenuationField(m, lambda z: np.zeros(np.shape(z) + (m, m)), 0.0, "smooth", "skew-hermitian")


def constant_field(a, m: int = 1) -> AttenuationField:
    A = np.asarray(a, dtype=complex) * np.eye(m) if np.ndim(a) == 0 else np.asarray(a, dtype=complex)
    skew = np.allclose(A, -A.conj().T, atol=1e-14)
    return AttenuationField(m, lambda z: np.broadcast_to(A, np.shape(z) + (m, m)), 1.0, "smooth",
                            "skew-hermitian" if skew else "general")


def bump(z, radius: float = 0.8):
    """``exp(-1 / (1 - (rho / radius)^2))`` inside ``rho < radius``, zero outside."""
    r = np.abs(z) / radius
    out = np.zeros(np.shape(z))
    inside = r < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


def bump_field(amplitude: complex = 0.5j, radius: float = 0.8, generator=None) -> AttenuationField:
    """``amplitude * bump * G`` with ``G`` a fixed matrix (identity by default)."""
    G = np.eye(1, dtype=complex) if generator is None else np.asarray(generator, dtype=complex)
    m = G.shape[0]
    A = amplitude * G
    skew = np.allclose(A, -A.conj().T, atol=1e-14)
    return AttenuationField(m, lambda z: bump(z, radius)[..., None, None] * A, radius, "smooth",
                            "skew-hermitian" if skew else "general")


@dataclass
class VectorSinogram:
    """``C^m``-valued data on a :class:`SinogramGrid`; ``values`` has shape (n_beta, n_alpha, m)."""

    model: geo.DiskModel
    grid: SinogramGrid
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def component(self, c: int) -> Sinogram:
        return Sinogram(self.model, self.grid, self.values[..., c])


# ------------------------------------------------------------------ helpers


def _source(f, m):
    """Normalise ``f`` to a map from points ``S`` to ``S + (m, ncol)``."""
    if isinstance(f, ZernikeExpansion):
        if m != 1:
            raise ParameterError("scalar Zernike sources need m = 1")
        N, g, c = f.degree_max, f.gamma, f.coeffs
        return lambda z: (zernike_matrix(g, N, z) @ c)[..., None, None], 1
    if callable(f):
        def ev(z):
            v = np.asarray(f(z), dtype=complex)
            if v.shape == z.shape or v.ndim == 0:
                v = np.broadcast_to(v, z.shape)[..., None]
            return np.broadcast_to(v, z.shape + (m,))[..., None]
        return ev, 1
    raise ParameterError("f must be a ZernikeExpansion or a callable")


def _positions(model, beta, alpha, frac):
    """Positions at fractions ``frac`` (G, K) of each geodesic's length; also tau."""
    beta = np.asarray(beta, float).ravel()
    alpha = np.asarray(alpha, float).ravel()
    frac = np.asarray(frac, float)
    if frac.ndim == 1:
        frac = np.broadcast_to(frac, (beta.size, frac.size))
    if model.is_flat:
        tau = geo.exit_times(model, beta, alpha)
        z0 = model.radius * np.exp(1j * beta)
        e = np.exp(1j * (beta + math.pi + alpha))
        return tau, z0[:, None] + (tau[:, None] * frac) * e[:, None]
    tau = np.zeros(beta.size)
    z = np.empty(frac.shape, dtype=complex)
    for g in range(beta.size):
        if math.pi / 2 - abs(alpha[g]) <= geo.GLANCING_TOL:
            z[g] = model.radius * np.exp(1j * beta[g])
            continue
        shot = geo._shoot_inward(model, beta[g], alpha[g])
        tau[g] = shot.tau
        z[g] = shot.state(frac[g] * shot.tau)[0]
    return tau, z


def _rk4_backward(P, F, h):
    """Integrate ``u' = -P u - F`` from the last node to the first, ``u(end) = 0``.

    ``P``: (G, 2S+1, m, m), ``F``: (G, 2S+1, m, c), ``h``: (G,) step length.
    Nodes are equally spaced in time, including half steps.
    """
    G, nodes, m, c = F.shape
    S = (nodes - 1) // 2
    u = np.zeros((G, m, c), dtype=complex)
    hh = h[:, None, None]

    def rhs(i, v):
        return -np.einsum("gij,gjc->gic", P[:, i], v) - F[:, i]

    for n in range(S):
        i0 = nodes - 1 - 2 * n
        k1 = rhs(i0, u)
        k2 = rhs(i0 - 1, u - 0.5 * hh * k1)
        k3 = rhs(i0 - 1, u - 0.5 * hh * k2)
        k4 = rhs(i0 - 2, u - hh * k3)
        u = u - hh / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return u


def _rk4_forward(P, y0, h):
    """Integrate ``y' = P y`` from the first node to the last; returns the end state."""
    nodes = P.shape[1]
    S = (nodes - 1) // 2
    y = y0.astype(complex)
    hh = h.reshape((-1,) + (1,) * (y.ndim - 1))

    def rhs(i, v):
        return np.einsum("gij,gj...->gi...", P[:, i], v)

    for n in range(S):
        i0 = 2 * n
        k1 = rhs(i0, y)
        k2 = rhs(i0 + 1, y + 0.5 * hh * k1)
        k3 = rhs(i0 + 1, y + 0.5 * hh * k2)
        k4 = rhs(i0 + 2, y + hh * k3)
        y = y + hh / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def _transport_many(model, Phi, src, beta, alpha, steps):
    """``I_Phi`` of a (possibly multi-column) source on many geodesics: (G, m, c)."""
    beta = np.asarray(beta, float).ravel()
    alpha = np.asarray(alpha, float).ravel()
    frac = np.linspace(0.0, 1.0, 2 * steps + 1)
    parts = []
    for s in range(0, beta.size, CHUNK):
        tau, z = _positions(model, beta[s : s + CHUNK], alpha[s : s + CHUNK], frac)
        P = Phi(z)
        F = src(z)
        if not np.all(np.isfinite(F)):
            g = s + int(np.argmax(~np.isfinite(F.reshape(z.shape[0], -1)).all(axis=1)))
            raise EvaluationError(f"source is not finite on geodesic {g}")
        parts.append(_rk4_backward(P, F, tau / steps))
    return np.concatenate(parts, axis=0)


# --------------------------------------------------------------- operations


def transport_solve(model, Phi: AttenuationField, f, c, steps: int = DEFAULT_STEPS) -> np.ndarray:
    """``I_Phi f`` at one fan-beam coordinate (vector of length m)."""
    c = geo._coerce(c)
    src, _ = _source(f, Phi.m)
    return _transport_many(model, Phi, src, [c.beta], [c.alpha], steps)[0, :, 0]


def integrating_factor(model, Phi: AttenuationField, c, t: float, t0: float = 0.0,
                       steps: int = DEFAULT_STEPS) -> np.ndarray:
    """``R`` at time ``t`` along the geodesic of ``c``, with ``R' = -Phi R`` and ``R(t0) = Id``."""
    c = geo._coerce(c)
    tau = geo.exit_time(model, c)
    for v in (t, t0):
        if not (-1e-12 <= v <= tau + 1e-12):
            raise DomainError(f"time {v} outside [0, tau={tau}]")
    if tau == 0.0 or t == t0:
        return np.eye(Phi.m, dtype=complex)
    frac = np.linspace(t0, t, 2 * steps + 1) / tau
    _, z = _positions(model, [c.beta], [c.alpha], np.clip(frac, 0.0, 1.0))
    P = -Phi(z)
    h = np.array([(t - t0) / steps])
    return _rk4_forward(P, np.eye(Phi.m, dtype=complex)[None], h)[0]


def attenuated_sinogram(model, Phi: AttenuationField, f, grid: SinogramGrid,
                        steps: int = DEFAULT_STEPS) -> VectorSinogram:
    """``I_Phi f`` on every node of ``grid`` by direct transport."""
    src, _ = _source(f, Phi.m)
    b, a = grid.mesh()
    u = _transport_many(model, Phi, src, b, a, steps)[..., 0]
    return VectorSinogram(model, grid, u.reshape(b.shape + (Phi.m,)),
                          {"steps": steps, "regularity": Phi.regularity, "convention": Phi.convention})


def factorized_sinogram(model, Phi: AttenuationField, f, grid: SinogramGrid,
                        steps: int = DEFAULT_STEPS) -> VectorSinogram:
    """``I_Phi f = int R^-1 f dt`` with ``R`` integrated first, then Simpson in time.

    Independent of :func:`attenuated_sinogram`; used to cross-check it.
    """
    src, _ = _source(f, Phi.m)
    b, a = grid.mesh()
    bf, af = b.ravel(), a.ravel()
    out = np.empty((bf.size, Phi.m), dtype=complex)
    nodes = 2 * steps + 1
    frac = np.linspace(0.0, 1.0, nodes)
    simpson = np.ones(nodes)
    simpson[1:-1:2] = 4.0
    simpson[2:-1:2] = 2.0
    simpson /= 3.0 * (nodes - 1)
    for s in range(0, bf.size, CHUNK):
        tau, z = _positions(model, bf[s : s + CHUNK], af[s : s + CHUNK], frac)
        P = Phi(z)
        F = src(z)[..., 0]
        # R^-1 solves (R^-1)' = R^-1 Phi; track it on every node with RK4 over pairs of nodes
        G = z.shape[0]
        Rinv = np.empty((G, nodes, Phi.m, Phi.m), dtype=complex)
        Rinv[:, 0] = np.eye(Phi.m)
        h = tau * 2.0 / (nodes - 1)
        hh = h[:, None, None]
        Q = Rinv[:, 0]
        for n in range(steps):
            i0 = 2 * n
            k1 = Q @ P[:, i0]
            k2 = (Q + 0.5 * hh * k1) @ P[:, i0 + 1]
            k3 = (Q + 0.5 * hh * k2) @ P[:, i0 + 1]
            k4 = (Q + hh * k3) @ P[:, i0 + 2]
            Qn = Q + hh / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            # midpoint value by cubic Hermite interpolation
            Rinv[:, i0 + 1] = 0.5 * (Q + Qn) + hh / 8.0 * (k1 - Qn @ P[:, i0 + 2])
            Rinv[:, i0 + 2] = Qn
            Q = Qn
        integrand = np.einsum("gkij,gkj->gki", Rinv, F)
        out[s : s + CHUNK] = np.einsum("gki,k->gi", integrand, simpson) * tau[:, None]
    return VectorSinogram(model, grid, out.reshape(b.shape + (Phi.m,)))


# ----------------------------------------------------------------- adjoint


def pairing_weights(model, grid: SinogramGrid, pairing: str = "mu-over-tau") -> np.ndarray:
    """Quadrature weights on ``grid`` for the data pairing.

    ``mu-over-tau`` is ``(mu / tau) d Sigma`` with ``d Sigma`` the Riemannian
    boundary arc length times ``d alpha``; ``dbeta-dalpha`` is the flat
    coordinate measure.
    """
    if abs(grid.gamma) > 0:
        raise ParameterError("attenuated data live on the unweighted grid (gamma = 0)")
    w = grid.weights(0.0)
    if pairing == "dbeta-dalpha":
        return w
    if pairing != "mu-over-tau":
        raise ParameterError("pairing must be 'mu-over-tau' or 'dbeta-dalpha'")
    b, a = grid.mesh()
    tau = geo.exit_times(model, b, a)
    arc = model.radius / (1.0 + model.kappa * model.radius**2)
    return w * arc * np.cos(a) / tau


def attenuated_adjoint(model, Phi: AttenuationField, g: VectorSinogram, points,
                       n_fiber: int = 64, steps: int = 64) -> np.ndarray:
    """``I_Phi^* g`` at disk points for the ``(mu / tau) d Sigma`` pairing.

    For each direction ``v`` at ``x`` the vector ``R(x, v)^-* g(F(x, v)) / tau``
    is obtained by integrating ``y' = Phi^* y`` from the entry point to ``x``.
    Returns an array of shape ``points.shape + (m,)``.
    """
    pts = np.asarray(points, dtype=complex)
    shape = pts.shape
    pts = pts.ravel()
    m = Phi.m
    phi, wf = fiber_rule(n_fiber)
    theta = np.angle(pts)[:, None] + phi[None, :]
    b, a, tau, tx = footpoints(model, pts, theta, with_time=True)
    data = np.empty(b.shape + (m,), dtype=complex)
    # g / tau = reduced * mu / tau, and mu / tau stays bounded up to glancing
    mu_tau = 1.0 / (2.0 * model.radius) if model.is_flat else np.cos(a) / tau
    for c in range(m):
        data[..., c] = g.component(c).interpolant().reduced(b, a) * mu_tau
    bf, af, tf = b.ravel(), a.ravel(), tx.ravel()
    yf = data.reshape(-1, m)
    out = np.empty_like(yf)
    nodes = np.linspace(0.0, 1.0, 2 * steps + 1)
    for s in range(0, bf.size, CHUNK):
        sl = slice(s, s + CHUNK)
        tt = geo.exit_times(model, bf[sl], af[sl])
        frac = nodes[None, :] * np.where(tt > 0, tf[sl] / np.where(tt > 0, tt, 1.0), 0.0)[:, None]
        _, z = _positions(model, bf[sl], af[sl], np.clip(frac, 0.0, 1.0))
        P = np.conj(np.swapaxes(Phi(z), -1, -2))
        out[sl] = _rk4_forward(P, yf[sl], tf[sl] / steps)
    vals = np.einsum("pfi,f->pi", out.reshape(pts.size, n_fiber, m), wf)
    return vals.reshape(shape + (m,))


def l2_inner(model, f_vals, h_vals, weights, points) -> complex:
    """Disk inner product with the Riemannian area form."""
    conf = model.conformal_factor(points) if not model.is_flat else 1.0
    return complex(np.sum(weights * conf**2 * np.sum(f_vals * np.conj(h_vals), axis=-1)))


# ---------------------------------------------------------- normal operator


def assemble_attenuated(model, Phi: AttenuationField, N: int, grid: SinogramGrid,
                        steps: int = 64) -> np.ndarray:
    """Matrix of ``I_Phi`` from coefficients on ``Zhat_{n,k} e_c`` to grid data.

    Column ``j * m + c`` is the image of ``Zhat_j e_c``; rows run over grid
    nodes and components (``(node, component)`` order).
    """
    m = Phi.m
    nb = triangle_size(N)

    def src(z):
        Z = zernike_matrix(0.0, N, z)  # S + (nb,)
        out = np.zeros(z.shape + (m, nb * m), dtype=complex)
        for c in range(m):
            out[..., c, c::m] = Z
        return out

    b, a = grid.mesh()
    u = _transport_many(model, Phi, src, b, a, steps)  # (G, m, nb*m)
    return u.reshape(-1, nb * m)


def normal_operator(model, Phi: AttenuationField, N: int, grid: SinogramGrid | None = None,
                    steps: int = 64, pairing: str = "dbeta-dalpha") -> np.ndarray:
    """``N_Phi = I_Phi^* I_Phi`` on the degree-``N`` hatted Zernike space (Gram matrix)."""
    grid = grid or SinogramGrid(2 * N + 2, N + 2, 0.0)
    A = assemble_attenuated(model, Phi, N, grid, steps)
    W = np.repeat(pairing_weights(model, grid, pairing).ravel(), Phi.m)
    return (A.conj().T * W) @ A


def _degree_weights(N: int, m: int, s: float) -> np.ndarray:
    n, _ = triangle_indices(N)
    return np.repeat((n + 1.0) ** s, m)


def normal_probe(model, Phi: AttenuationField, N: int, grid: SinogramGrid | None = None,
                 steps: int = 64, pairing: str = "dbeta-dalpha"):
    """Smallest singular value and condition number of ``N_Phi`` as a map ``L^2 -> H~^1``."""
    if not Phi.is_skew:
        raise PreconditionError("normal_probe is defined for skew-hermitian attenuations")
    M = normal_operator(model, Phi, N, grid, steps, pairing)
    D = _degree_weights(N, Phi.m, 1.0)
    sv = np.linalg.svd(D[:, None] * M, compute_uv=False)
    return float(sv[-1]), float(sv[0] / sv[-1])


def stability_ratio(model, Phi: AttenuationField, f, grid: SinogramGrid | None = None,
                    steps: int = 64, A: np.ndarray | None = None) -> float:
    """``||f||_{H~^-1/2} / ||I_Phi f||_{L^2(d beta d alpha)}`` for a coefficient vector f.

    ``f`` is a :class:`ZernikeExpansion` (m = 1) or a flat coefficient vector of
    length ``nb * m``.  Pass a precomputed ``A`` to reuse an assembled matrix.
    """
    if isinstance(f, ZernikeExpansion):
        N, c = f.degree_max, f.coeffs
    else:
        c = np.asarray(f, dtype=complex)
        N = int(round((math.sqrt(8 * c.size / Phi.m + 1) - 3) / 2))
    grid = grid or SinogramGrid(2 * N + 2, N + 2, 0.0)
    if A is None:
        A = assemble_attenuated(model, Phi, N, grid, steps)
    W = np.repeat(grid.weights(0.0).ravel(), Phi.m)
    data = A @ c
    den = math.sqrt(max(float(np.sum(W * np.abs(data) ** 2)), 0.0))
    num = math.sqrt(float(np.sum(_degree_weights(N, Phi.m, -1.0) * np.abs(c) ** 2)))
    if den <= 1e-14 * max(num, 1e-300):
        raise InjectivityError("I_Phi f vanishes for nonzero f")
    return num / den
