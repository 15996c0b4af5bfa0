"""Range characterisation on the Euclidean disk: A_+-, fiberwise Hilbert transform,
P_- = A_-^* H_- A_+ and C_- = A_-^* H_- A_- / 2.

Boundary fields live on a uniform torus grid ``(beta_i, theta_j)`` of size
``n x n`` where ``theta`` is the absolute direction angle.  With ``n`` a
multiple of 4 the scattering relation ``(beta, theta) -> (2 theta - beta - pi, theta)``
and the antipodal map ``theta -> theta + pi`` are exact index permutations,
and the glancing directions fall on grid points.

Results are returned to the Gauss sinogram grid by a least-squares fit, per
Fourier mode in ``beta``, of ``mu`` times a polynomial in ``sin alpha`` through
the interior points of the torus grid.  The sample set is symmetric under the
scattering involution, so the fit preserves evenness exactly; this is what
makes ``P_- P_- = 0`` hold to rounding error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import BoundaryExpansion, gegenbauer_table, psi_eval
from .errors import ParameterError, ResolutionError
from .geometry import wrap_angle
from .transform import Sinogram

TWO_PI = 2.0 * math.pi


def _next_pow2(n: int) -> int:
    return 1 << max(int(n) - 1, 1).bit_length()


def torus_size(sin: Sinogram, size: int | None = None) -> int:
    """Default torus size: a power of two at least ``n_beta`` and ``4 n_alpha``."""
    if size is None:
        size = _next_pow2(max(sin.grid.n_beta, 4 * sin.grid.n_alpha, 8))
    if size % 4:
        raise ResolutionError("torus size must be a multiple of 4")
    if size // 2 - 1 < sin.grid.n_alpha:
        raise ResolutionError(f"torus size {size} has too few incidence samples for "
                              f"n_alpha={sin.grid.n_alpha}")
    return size


@dataclass
class BoundaryField:
    """Samples on the uniform ``(beta, theta)`` torus over the boundary of the disk."""

    values: np.ndarray
    parity: str = "all"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        n = self.values.shape[0]
        if self.values.shape != (n, n) or n % 4:
            raise ResolutionError("boundary fields need a square grid with size divisible by 4")

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def beta(self):
        return TWO_PI * np.arange(self.size) / self.size

    @property
    def theta(self):
        return self.beta

    def incoming_mask(self):
        """Points of the inward boundary (cos(theta - beta) < 0, glancing excluded)."""
        i = np.arange(self.size)
        d = (i[None, :] - i[:, None]) % self.size
        return (d > self.size // 4) & (d < 3 * self.size // 4)

    def outgoing_mask(self):
        i = np.arange(self.size)
        d = (i[None, :] - i[:, None]) % self.size
        return (d < self.size // 4) | (d > 3 * self.size // 4)

    def antipodal(self) -> np.ndarray:
        return np.roll(self.values, -self.size // 2, axis=1)

    def even_part(self) -> "BoundaryField":
        return BoundaryField(0.5 * (self.values + self.antipodal()), "even")

    def odd_part(self) -> "BoundaryField":
        return BoundaryField(0.5 * (self.values - self.antipodal()), "odd")


def _scatter_index(n):
    """Index arrays of ``S(beta_i, theta_j) = (2 theta_j - beta_i - pi, theta_j)``."""
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    return (2 * j - i - n // 2) % n, np.broadcast_to(j, (n, n))


def _scatter(values):
    n = values.shape[0]
    si, sj = _scatter_index(n)
    return values[si, sj]


def _incoming_alpha(n):
    """Interior incidence angles seen on the torus grid, and the column offset of each."""
    offs = np.arange(n // 4 + 1, 3 * n // 4)
    alpha = TWO_PI * offs / n - math.pi
    return offs, alpha


def _check(sin: Sinogram):
    if not sin.model.is_flat:
        raise ParameterError("range operators are implemented for Euclidean disks only")
    if sin.grid.gamma != 0.0:
        raise ParameterError("range operators act on unweighted data (gamma = 0)")


def _sampler(u):
    return u.interpolant() if isinstance(u, Sinogram) else u


def to_torus(sin, size: int | None = None):
    """Samples of ``sin`` at the inward torus points as an ``(n, n)`` array
    (zero elsewhere).  Sinograms go through their spectral interpolant;
    callables of ``(beta, alpha)`` are evaluated exactly."""
    n = torus_size(sin, size) if isinstance(sin, Sinogram) else size
    offs, alpha = _incoming_alpha(n)
    beta = TWO_PI * np.arange(n) / n
    b2, a2 = np.broadcast_arrays(beta[:, None], alpha[None, :])
    vals = np.asarray(_sampler(sin)(b2, a2), dtype=complex)
    out = np.zeros((n, n), dtype=complex)
    i = np.arange(n)[:, None]
    out[i, (i + offs[None, :]) % n] = vals
    return out


def from_torus(values, sin: Sinogram) -> Sinogram:
    """Fit inward torus samples by ``mu`` times polynomials of degree ``< n_alpha``
    and evaluate on the grid of ``sin``."""
    values = np.asarray(values)
    n = values.shape[0]
    offs, alpha = _incoming_alpha(n)
    i = np.arange(n)[:, None]
    samples = values[i, (i + offs[None, :]) % n]  # (beta_i, alpha_j)
    g = sin.grid
    spec = np.fft.fft(samples, axis=0) / n
    modes = np.fft.fftfreq(n, 1.0 / n).astype(int)
    keep = np.abs(modes) < min(n, g.n_beta) / 2.0
    x = np.sin(alpha)
    mu = np.cos(alpha)
    V = gegenbauer_table(1.0, g.n_alpha - 1, x).T * mu[:, None]
    pinv = np.linalg.pinv(V)
    xg = g.x
    Vg = gegenbauer_table(1.0, g.n_alpha - 1, xg).T * g.mu[:, None]
    out = np.zeros((g.n_beta, g.n_alpha), dtype=complex)
    bg = g.beta
    for m, row, k in zip(modes, spec, keep):
        if not k:
            continue
        coef = pinv @ (row * np.exp(-1j * m * alpha))
        out += np.exp(1j * m * (bg[:, None] + g.alpha[None, :])) * (Vg @ coef)[None, :]
    return sin.with_values(out)


# ---------------------------------------------------------------- A_+-


def _extend_array(vals, sign):
    n = vals.shape[0]
    f = BoundaryField(np.zeros((n, n)))
    inc, outg = f.incoming_mask(), f.outgoing_mask()
    scat = _scatter(vals)
    out = np.where(inc, vals, 0.0) + np.where(outg, sign * scat, 0.0)
    glancing = ~(inc | outg)
    if sign > 0:
        out = np.where(glancing, vals, out)
    return out


def _glancing_values(sin, n):
    beta = TWO_PI * np.arange(n) / n
    vals = np.zeros((n, n), dtype=complex)
    interp = _sampler(sin)
    for a, off in ((math.pi / 2, 3 * n // 4), (-math.pi / 2, n // 4)):
        v = np.asarray(interp(beta, np.full(n, a)), dtype=complex) * np.ones(n)
        vals[np.arange(n), (np.arange(n) + off) % n] = v
    return vals


def extend(sin, sign: int = 1, size: int | None = None) -> BoundaryField:
    """``A_+ u`` (``sign=+1``) or ``A_- u`` (``sign=-1``) on the torus grid.

    ``sin`` is a :class:`Sinogram` or a callable of ``(beta, alpha)``; the
    latter needs ``size``.
    """
    if sign not in (1, -1):
        raise ParameterError("sign must be +1 or -1")
    if isinstance(sin, Sinogram):
        _check(sin)
        n = torus_size(sin, size)
    else:
        if size is None or size % 4:
            raise ResolutionError("callable data need a torus size divisible by 4")
        n = size
    vals = to_torus(sin, n)
    if sign > 0:
        vals = vals + _glancing_values(sin, n)
    return BoundaryField(_extend_array(vals, sign))


def _hilbert(values, parity="all"):
    n = values.shape[1]
    spec = np.fft.fft(values, axis=1)
    m = np.fft.fftfreq(n, 1.0 / n)
    mult = -1j * np.sign(m)
    mult[n // 2] = 0.0
    if parity == "even":
        mult = np.where(m % 2 == 0, mult, 0.0)
    elif parity == "odd":
        mult = np.where(m % 2 == 1, mult, 0.0)
    elif parity != "all":
        raise ParameterError("parity must be 'all', 'even' or 'odd'")
    return np.fft.ifft(spec * mult, axis=1)


def fiber_hilbert(w: BoundaryField, parity: str = "all") -> BoundaryField:
    """Circle Hilbert transform in ``theta``: multiplier ``-i sign(m)``.

    ``parity`` keeps only even (H_+) or odd (H_-) input modes.
    """
    return BoundaryField(_hilbert(w.values, parity), parity)


def adjoint_minus(values):
    """``A_-^* w = w - w o S`` (meaningful on the inward points)."""
    return values - _scatter(values)


# --------------------------------------------------------- P_- and C_-


def apply_P_minus(sin: Sinogram, size: int | None = None) -> Sinogram:
    """``P_- u = A_-^* H_- A_+ u`` on ``sin``'s grid."""
    w = extend(sin, +1, size).values
    return from_torus(adjoint_minus(_hilbert(w, "odd")), sin)


def apply_C_minus(sin: Sinogram, size: int | None = None) -> Sinogram:
    """``C_- u = A_-^* H_- A_- u / 2`` on ``sin``'s grid."""
    w = extend(sin, -1, size).values
    return from_torus(0.5 * adjoint_minus(_hilbert(w, "odd")), sin)


def range_project(sin: Sinogram, size: int | None = None) -> Sinogram:
    """``(Id + C_-^2) u``."""
    c2 = apply_C_minus(apply_C_minus(sin, size), size)
    return sin.with_values(sin.values + c2.values)


def range_distance(sin: Sinogram, size: int | None = None) -> float:
    """``|| u - (Id + C_-^2) u ||`` in ``L^2(d beta d alpha)``."""
    p = range_project(sin, size)
    return sin.with_values(sin.values - p.values).norm(0.0)


# ------------------------------------------------------- window matrices


def window_matrix(op, sin_template: Sinogram, N: int, K: int = 0, size: int | None = None):
    """Matrix of a range operator on the hatted window ``n <= N``, ``-K <= k <= n + K``.

    Returns ``(matrix, window)`` where ``window`` is the :class:`BoundaryExpansion`
    describing the column/row labels.
    """
    from .spectral import data_coefficients

    win = BoundaryExpansion.window(0.0, N, K)
    b, a = sin_template.grid.mesh()
    cols = []
    for n, k in zip(win.n, win.k):
        s = sin_template.with_values(psi_eval(0.0, int(n), int(k), b, a, hat=True))
        cols.append(data_coefficients(op(s, size), N, K).coeffs)
    return np.array(cols).T, win


def wrap_incidence(theta, beta):
    return wrap_angle(np.asarray(theta) - np.asarray(beta) - math.pi)
