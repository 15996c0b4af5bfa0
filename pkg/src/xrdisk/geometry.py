"""Disk models of constant curvature, their geodesics and boundary maps.

The model disk is ``D_R = {|z| <= R}`` with metric ``(1 + kappa |z|^2)^-2 |dz|^2``,
of curvature ``4 kappa``.  Inward boundary vectors are labelled by fan-beam
coordinates ``(beta, alpha)``: the base point is ``R e^{i beta}`` and the
Euclidean direction angle is ``beta + pi + alpha``.  The metric is conformal,
so angles are the Euclidean ones for every ``kappa``.

For ``kappa == 0`` everything is closed form.  Otherwise geodesics are
integrated in Hamiltonian form and boundary exits are located on the dense
output of the integrator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, ParameterError, SingularConfigurationError

GLANCING_TOL = 1e-9
ODE_RTOL = 1e-12
ODE_ATOL = 1e-12
TWO_PI = 2.0 * math.pi


def wrap_angle(a):
    """Reduce an angle to [-pi, pi)."""
    return (np.asarray(a) + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True)
class DiskModel:
    """Constant curvature disk ``(D_R, g_kappa)``; must satisfy ``|kappa| R^2 < 1``."""

    kappa: float = 0.0
    radius: float = 1.0

    def __post_init__(self):
        k, r = float(self.kappa), float(self.radius)
        if not (math.isfinite(k) and math.isfinite(r)) or r <= 0.0:
            raise ParameterError(f"invalid disk model kappa={self.kappa}, radius={self.radius}")
        if abs(k) * r * r >= 1.0:
            raise ParameterError(
                f"|kappa| R^2 = {abs(k) * r * r:.6g} >= 1: the disk is not simple"
            )
        object.__setattr__(self, "kappa", k)
        object.__setattr__(self, "radius", r)

    @property
    def is_flat(self) -> bool:
        return self.kappa == 0.0

    def conformal_factor(self, z):
        """Length scale ``lambda(z)`` with ``g = lambda^2 |dz|^2``."""
        return 1.0 / (1.0 + self.kappa * np.abs(z) ** 2)

    def boundary_curvature(self) -> float:
        """Geodesic curvature of the boundary circle (the second fundamental form)."""
        return (1.0 - self.kappa * self.radius**2) / self.radius

    def radial_primitive(self, r):
        """Odd primitive ``A(r)`` of ``1 / (1 + kappa r^2)``: the signed distance to the center."""
        r = np.asarray(r, dtype=float)
        k = self.kappa
        if k == 0.0:
            return r
        s = math.sqrt(abs(k))
        if k > 0.0:
            return np.arctan(s * r) / s
        return np.arctanh(s * r) / s

    def center_distance(self) -> float:
        """Distance from the center to the boundary."""
        return float(self.radial_primitive(self.radius))

    def boundary_distance(self, z):
        """Distance from ``z`` to the boundary circle."""
        return self.center_distance() - self.radial_primitive(np.abs(z))


@dataclass(frozen=True)
class FanBeamCoord:
    """Inward boundary vector: base angle ``beta`` and incidence ``alpha``."""

    beta: float
    alpha: float

    def __post_init__(self):
        b, a = float(self.beta), float(self.alpha)
        if not (math.isfinite(b) and math.isfinite(a)):
            raise DomainError(f"non-finite fan-beam coordinate ({self.beta}, {self.alpha})")
        if abs(a) > math.pi / 2 + 1e-12:
            raise DomainError(f"alpha={a} outside [-pi/2, pi/2]")
        object.__setattr__(self, "beta", b % TWO_PI)
        object.__setattr__(self, "alpha", min(max(a, -math.pi / 2), math.pi / 2))

    @property
    def mu(self) -> float:
        return math.cos(self.alpha)

    @property
    def is_glancing(self) -> bool:
        return math.pi / 2 - abs(self.alpha) <= GLANCING_TOL

    @property
    def direction_angle(self) -> float:
        return self.beta + math.pi + self.alpha


@dataclass(frozen=True)
class PhasePoint:
    """Point of the unit sphere bundle; ``direction`` is a g-unit vector stored as a complex number."""

    position: complex
    direction: complex
    kappa: float = 0.0

    def __post_init__(self):
        z, v = complex(self.position), complex(self.direction)
        norm = abs(v) / (1.0 + self.kappa * abs(z) ** 2)
        if not math.isfinite(norm) or abs(norm - 1.0) > 1e-12:
            raise DomainError(f"direction has g-norm {norm}, expected 1")
        object.__setattr__(self, "position", z)
        object.__setattr__(self, "direction", v)

    @classmethod
    def from_angle(cls, model: DiskModel, position: complex, angle: float) -> "PhasePoint":
        z = complex(position)
        speed = 1.0 + model.kappa * abs(z) ** 2
        return cls(z, speed * complex(math.cos(angle), math.sin(angle)), model.kappa)

    @property
    def angle(self) -> float:
        return math.atan2(self.direction.imag, self.direction.real)


def _unit(model: DiskModel, z: complex, v: complex) -> PhasePoint:
    # renormalise integrator output so the stored vector is exactly g-unit
    return PhasePoint.from_angle(model, z, math.atan2(v.imag, v.real))


# ---------------------------------------------------------------- ODE path


def _hamiltonian_rhs(kappa: float):
    # H = (1 + kappa |x|^2)^2 |p|^2 / 2
    def rhs(_t, y):
        x1, x2, p1, p2 = y
        c = 1.0 + kappa * (x1 * x1 + x2 * x2)
        pp = p1 * p1 + p2 * p2
        return [c * c * p1, c * c * p2, -2.0 * kappa * c * pp * x1, -2.0 * kappa * c * pp * x2]

    return rhs


class _Shot:
    """One integrated geodesic up to its boundary exit."""

    def __init__(self, model: DiskModel, z0: complex, angle: float, hint: float | None = None):
        self.model = model
        k, R = model.kappa, model.radius
        c0 = 1.0 + k * abs(z0) ** 2
        # covector p = g(v) = lambda^2 v with |v| = 1/lambda
        p0 = complex(math.cos(angle), math.sin(angle)) / c0
        rhs = _hamiltonian_rhs(k)

        def leave(_t, y):
            return y[0] * y[0] + y[1] * y[1] - R * R

        leave.terminal = True
        leave.direction = 1.0
        t_max = 4.0 * model.center_distance() + 1.0
        sol = solve_ivp(
            rhs,
            (0.0, t_max),
            [z0.real, z0.imag, p0.real, p0.imag],
            method="DOP853",
            rtol=ODE_RTOL,
            atol=ODE_ATOL,
            dense_output=True,
            events=leave,
            # short chords must span several steps or the exit root is lost
            max_step=np.inf if hint is None else max(hint / 4.0, 1e-300),
        )
        if sol.status != 1 or len(sol.t_events[0]) == 0:
            raise DomainError("geodesic did not reach the boundary")
        self.tau = float(sol.t_events[0][0])
        self._sol = sol.sol

    def state(self, t):
        y = self._sol(np.clip(t, 0.0, self.tau))
        z = y[0] + 1j * y[1]
        c = 1.0 + self.model.kappa * np.abs(z) ** 2
        v = c * c * (y[2] + 1j * y[3])
        return z, v


def _shoot_inward(model: DiskModel, beta: float, alpha: float) -> _Shot:
    z0 = model.radius * complex(math.cos(beta), math.sin(beta))
    chord = 2.0 * model.radius * math.cos(alpha)
    return _Shot(model, z0, beta + math.pi + alpha, chord / (1.0 + abs(model.kappa) * model.radius**2))


def _coerce(c) -> FanBeamCoord:
    return c if isinstance(c, FanBeamCoord) else FanBeamCoord(*c)


# ------------------------------------------------------------ public maps


def exit_time(model: DiskModel, c) -> float:
    """Length ``tau(c)`` of the geodesic entering at ``c``."""
    c = _coerce(c)
    if c.is_glancing:
        return 0.0
    if model.is_flat:
        return 2.0 * model.radius * math.cos(c.alpha)
    return _shoot_inward(model, c.beta, c.alpha).tau


def exit_times(model: DiskModel, beta, alpha) -> np.ndarray:
    """Vectorised ``exit_time`` over broadcast arrays of ``beta`` and ``alpha``."""
    beta, alpha = np.broadcast_arrays(np.asarray(beta, float), np.asarray(alpha, float))
    glancing = math.pi / 2 - np.abs(alpha) <= GLANCING_TOL
    if model.is_flat:
        return np.where(glancing, 0.0, 2.0 * model.radius * np.cos(alpha))
    out = np.zeros(beta.shape)
    for idx in zip(*np.nonzero(~glancing)):
        out[idx] = _shoot_inward(model, beta[idx], alpha[idx]).tau
    return out


def geodesic_point(model: DiskModel, c, t: float) -> PhasePoint:
    """Phase point reached after time ``t`` along the geodesic of ``c``."""
    c = _coerce(c)
    tau = exit_time(model, c)
    if not (-1e-12 <= t <= tau + 1e-12):
        raise DomainError(f"t={t} outside [0, tau={tau}]")
    t = min(max(t, 0.0), tau)
    theta = c.direction_angle
    if model.is_flat or tau == 0.0:
        z = model.radius * complex(math.cos(c.beta), math.sin(c.beta))
        z = z + t * complex(math.cos(theta), math.sin(theta))
        return PhasePoint.from_angle(model, z, theta)
    z, v = _shoot_inward(model, c.beta, c.alpha).state(t)
    return _unit(model, complex(z), complex(v))


def geodesic_positions(model: DiskModel, beta, alpha, u):
    """Positions ``pi(Upsilon(c, u))`` for arrays of geodesics and rescaled times.

    ``beta`` and ``alpha`` are 1-d arrays of length G, ``u`` a 1-d array of
    rescaled times.  Returns ``(tau, z)`` with ``tau`` of shape (G,) and ``z`` of
    shape (G, len(u)).
    """
    beta = np.asarray(beta, float).ravel()
    alpha = np.asarray(alpha, float).ravel()
    u = np.asarray(u, float).ravel()
    if model.is_flat:
        tau = exit_times(model, beta, alpha)
        z0 = model.radius * np.exp(1j * beta)
        e = np.exp(1j * (beta + math.pi + alpha))
        return tau, z0[:, None] + (tau[:, None] * u[None, :]) * e[:, None]
    tau = np.zeros(beta.size)
    z = np.empty((beta.size, u.size), dtype=complex)
    for g in range(beta.size):
        if math.pi / 2 - abs(alpha[g]) <= GLANCING_TOL:
            z[g] = model.radius * np.exp(1j * beta[g])
            continue
        shot = _shoot_inward(model, beta[g], alpha[g])
        tau[g] = shot.tau
        z[g] = shot.state(u * shot.tau)[0]
    return tau, z


def scattering_involution(model: DiskModel, c) -> FanBeamCoord:
    """The other fan-beam representative of the unoriented geodesic through ``c``."""
    c = _coerce(c)
    if model.is_flat or c.is_glancing:
        return FanBeamCoord((c.beta + math.pi + 2.0 * c.alpha) % TWO_PI, -c.alpha)
    shot = _shoot_inward(model, c.beta, c.alpha)
    z, v = shot.state(shot.tau)
    z, v = complex(z), complex(v)
    b = math.atan2(z.imag, z.real) % TWO_PI
    a = float(wrap_angle(math.atan2(-v.imag, -v.real) - b - math.pi))
    return FanBeamCoord(b, a)


def footpoint(model: DiskModel, p: PhasePoint):
    """Entry coordinate and elapsed time ``(c, t)`` of the geodesic through ``p``."""
    z, v = complex(p.position), complex(p.direction)
    R = model.radius
    if abs(z) > R * (1.0 + 1e-12):
        raise DomainError(f"position {z} lies outside the disk")
    on_boundary = abs(z) >= R * (1.0 - 1e-13)
    radial = (z.conjugate() * v).real / (abs(z) * abs(v)) if abs(z) > 0 else 0.0
    if on_boundary and abs(radial) <= math.sin(GLANCING_TOL) + 1e-15:
        raise SingularConfigurationError("phase point is tangent to the boundary")
    if on_boundary and radial < 0.0:
        b = math.atan2(z.imag, z.real) % TWO_PI
        a = float(wrap_angle(p.angle - b - math.pi))
        return FanBeamCoord(b, a), 0.0
    if model.is_flat:
        w = v / abs(v)
        zv = (z.conjugate() * w).real
        t = zv + math.sqrt(max(zv * zv - abs(z) ** 2 + R * R, 0.0))
        e = z - t * w
        b = math.atan2(e.imag, e.real) % TWO_PI
        a = float(wrap_angle(math.atan2(w.imag, w.real) - b - math.pi))
    else:
        shot = _Shot(model, z, p.angle + math.pi)
        t = shot.tau
        e, w = shot.state(t)
        e, w = complex(e), complex(w)
        b = math.atan2(e.imag, e.real) % TWO_PI
        a = float(wrap_angle(math.atan2(-w.imag, -w.real) - b - math.pi))
    if math.pi / 2 - abs(a) <= GLANCING_TOL:
        raise SingularConfigurationError("footpoint is glancing")
    return FanBeamCoord(b, a), float(t)


def time_rescale(model: DiskModel, c, u: float) -> PhasePoint:
    """``Upsilon(c, u)``: the point at fraction ``u`` of the geodesic of ``c``."""
    if not (0.0 <= u <= 1.0):
        raise DomainError(f"u={u} outside [0, 1]")
    c = _coerce(c)
    return geodesic_point(model, c, u * exit_time(model, c))


def boundary_defining(model: DiskModel, z):
    """Boundary defining function ``d``.

    Flat models use ``1 - |z|^2 / R^2``.  Curved models use
    ``(A(R)^2 - A(|z|)^2) / A(R)^2`` with ``A`` the odd radial distance
    primitive; it is smooth, equals ``2 dist / A(R)`` to first order at the
    boundary and tends to the flat choice as ``kappa -> 0``.
    """
    z = np.asarray(z)
    if model.is_flat:
        return 1.0 - np.abs(z) ** 2 / model.radius**2
    a_r = model.center_distance()
    a = model.radial_primitive(np.abs(z))
    return (a_r * a_r - a * a) / (a_r * a_r)


def boundary_defining_scale(model: DiskModel) -> float:
    """Constant ``c`` with ``d ~ c * dist(., boundary)`` at the boundary."""
    if model.is_flat:
        return 2.0 / model.radius
    return 2.0 / model.center_distance()


def bmap_factor(model: DiskModel, c, u: float) -> float:
    """``F(c, u) = d(Upsilon(c, u)) / (tau^2 u (1 - u))``."""
    c = _coerce(c)
    if c.is_glancing:
        raise DomainError("bmap_factor needs a non-glancing coordinate")
    if not (0.0 <= u <= 1.0):
        raise DomainError(f"u={u} outside [0, 1]")
    if model.is_flat:
        return 1.0 / model.radius**2
    if 0.0 < u < 1.0:
        tau, z = geodesic_positions(model, [c.beta], [c.alpha], [u])
        return float(boundary_defining(model, z[0, 0]) / (tau[0] ** 2 * u * (1.0 - u)))
    # one-sided limit by quadratic extrapolation from interior samples
    h = 1e-3
    us = np.array([h, 2 * h, 3 * h])
    if u == 1.0:
        us = 1.0 - us
    tau, z = geodesic_positions(model, [c.beta], [c.alpha], us)
    f = boundary_defining(model, z[0]) / (tau[0] ** 2 * us * (1.0 - us))
    return float(3.0 * f[0] - 3.0 * f[1] + f[2])


def projective_map(model: DiskModel, p):
    """Map ``D_R -> D`` sending ``g_kappa`` geodesics onto straight chords.

    Uses the Beltrami-Klein type radial reparameterisation
    ``p -> p (1 - kappa R^2) / (R (1 - kappa |p|^2))``.
    """
    p = np.asarray(p)
    k, R = model.kappa, model.radius
    return p * (1.0 - k * R * R) / (R * (1.0 - k * np.abs(p) ** 2))
