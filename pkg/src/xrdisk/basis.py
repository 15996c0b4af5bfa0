"""Zernike bases on the disk and the matching boundary bases on fan-beam space.

Conventions (fixed once here, used everywhere):

* ``L^gamma_n = C^(gamma+1)_n`` is the Gegenbauer polynomial, orthogonal for
  ``(1-x^2)^(gamma+1/2)`` on [-1, 1]; for ``gamma = 0`` it is ``U_n``.
* ``psi^gamma_{n,k}(beta, alpha) = mu^(2 gamma + 1) (-i)^n / (2 pi)
  e^{i (n-2k)(beta+alpha)} L^gamma_n(sin alpha)``.  The unimodular factor
  ``i^n`` makes ``gamma = 0`` agree with
  ``(-1)^n / (4 pi) e^{i(n-2k)(beta+alpha)} (e^{i(n+1)alpha} + (-1)^n e^{-i(n+1)alpha})``.
* ``Z^gamma_{n,k}`` is the backprojection of ``mu^(-2 gamma - 1) psi^gamma_{n,k}``.
  In closed form it equals ``(-1)^k (gamma+1)_q / q! rho^|m| P^(gamma,|m|)_j(2 rho^2 - 1) e^{i m omega}``
  with ``m = n - 2k``, ``j = min(k, n-k)`` and ``q = max(k, n-k)``.
* Hatted functions are divided by their norms: ``L^2(D, d^gamma dA)`` on the
  disk and ``L^2(d beta d alpha, mu^(-2 gamma))`` on the data side.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import BasisIndexError, ParameterError, ResolutionError
from .quadrature import disk_rule

TWO_PI = 2.0 * math.pi


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not gamma > -1.0:
        raise ParameterError(f"weight exponent gamma={gamma} must exceed -1")
    return gamma


# ------------------------------------------------------------- index sets


def triangle_size(N: int) -> int:
    return (N + 1) * (N + 2) // 2


def triangle_index(n: int, k: int) -> int:
    if not (0 <= k <= n):
        raise BasisIndexError(f"(n, k) = ({n}, {k}) outside 0 <= k <= n")
    return n * (n + 1) // 2 + k


def triangle_indices(N: int):
    """Arrays ``(n, k)`` listing the triangle ``0 <= k <= n <= N`` in storage order."""
    n = np.concatenate([np.full(d + 1, d) for d in range(N + 1)]) if N >= 0 else np.zeros(0, int)
    k = np.concatenate([np.arange(d + 1) for d in range(N + 1)]) if N >= 0 else np.zeros(0, int)
    return n.astype(int), k.astype(int)


# ------------------------------------------------------------ polynomials


def gegenbauer_table(lam: float, nmax: int, x) -> np.ndarray:
    """``C^(lam)_n(x)`` for ``n = 0..nmax`` stacked along axis 0."""
    x = np.asarray(x, dtype=float)
    out = np.empty((nmax + 1,) + x.shape)
    out[0] = 1.0
    if nmax >= 1:
        out[1] = 2.0 * lam * x
    for n in range(1, nmax):
        out[n + 1] = (2.0 * (n + lam) * x * out[n] - (n + 2.0 * lam - 1.0) * out[n - 1]) / (n + 1)
    return out


def jacobi_weight_poly(gamma: float, n: int, x):
    """``L^gamma_n(x)``: degree-``n`` orthogonal polynomial for ``(1-x^2)^(gamma+1/2)``."""
    gamma = _check_gamma(gamma)
    if n < 0:
        raise ParameterError(f"degree n={n} must be non-negative")
    val = gegenbauer_table(gamma + 1.0, n, x)[n]
    return float(val) if np.ndim(val) == 0 else val


def gegenbauer_norm_sq(lam: float, n) -> np.ndarray:
    """``int (1-x^2)^(lam-1/2) C^(lam)_n(x)^2 dx``."""
    n = np.asarray(n, dtype=float)
    log_h = (
        math.log(math.pi)
        + (1.0 - 2.0 * lam) * math.log(2.0)
        + gammaln(n + 2.0 * lam)
        - gammaln(n + 1.0)
        - np.log(n + lam)
        - 2.0 * gammaln(lam)
    )
    return np.exp(log_h)


def jacobi_table(a: float, b: float, jmax: int, x) -> np.ndarray:
    """``P^(a,b)_j(x)`` for ``j = 0..jmax`` by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    out = np.empty((jmax + 1,) + x.shape)
    out[0] = 1.0
    if jmax >= 1:
        out[1] = (a + 1.0) + 0.5 * (a + b + 2.0) * (x - 1.0)
    for n in range(2, jmax + 1):
        s = 2.0 * n + a + b
        c1 = 2.0 * n * (n + a + b) * (s - 2.0)
        c2 = (s - 1.0) * (s * (s - 2.0) * x + a * a - b * b)
        c3 = 2.0 * (n + a - 1.0) * (n + b - 1.0) * s
        out[n] = (c2 * out[n - 1] - c3 * out[n - 2]) / c1
    return out


# ------------------------------------------------------- boundary basis


def psi_norm(gamma: float, n) -> np.ndarray:
    """Norm of ``psi^gamma_{n,k}`` in ``L^2(mu^(-2 gamma) d beta d alpha)`` (independent of k)."""
    return np.sqrt(gegenbauer_norm_sq(gamma + 1.0, n) / TWO_PI)


def _fan(c_or_beta, alpha=None):
    if alpha is None:
        return np.asarray(c_or_beta.beta, float), np.asarray(c_or_beta.alpha, float)
    return np.asarray(c_or_beta, float), np.asarray(alpha, float)


def psi_eval(gamma: float, n: int, k: int, beta, alpha=None, hat: bool = False):
    """Evaluate ``psi^gamma_{n,k}`` at a FanBeamCoord or at arrays ``(beta, alpha)``."""
    gamma = _check_gamma(gamma)
    beta, alpha = _fan(beta, alpha)
    m = n - 2 * k
    mu = np.cos(alpha)
    poly = gegenbauer_table(gamma + 1.0, n, np.sin(alpha))[n]
    val = mu ** (2.0 * gamma + 1.0) * ((-1j) ** n / TWO_PI) * np.exp(1j * m * (beta + alpha)) * poly
    if hat:
        val = val / psi_norm(gamma, n)
    return complex(val) if np.ndim(val) == 0 else val


def boundary_raw_table(gamma: float, nmax: int, mvals, beta, alpha) -> np.ndarray:
    """Raw functions ``mu^(2g+1) e^{i m (beta+alpha)} C^(g+1)_n(sin alpha)``.

    Returns shape ``(len(mvals), nmax+1) + beta.shape``.
    """
    beta, alpha = np.broadcast_arrays(np.asarray(beta, float), np.asarray(alpha, float))
    mvals = np.asarray(mvals)
    mu = np.cos(alpha) ** (2.0 * gamma + 1.0)
    poly = gegenbauer_table(gamma + 1.0, nmax, np.sin(alpha))
    phase = np.exp(1j * np.multiply.outer(mvals, beta + alpha))
    return phase[:, None] * (mu * poly)[None]


@dataclass
class BoundaryExpansion:
    """Coefficients on the hatted boundary basis ``psi^gamma_{n,k}`` over a stored window."""

    gamma: float
    n: np.ndarray
    k: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        self.gamma = _check_gamma(self.gamma)
        self.n = np.asarray(self.n, dtype=int)
        self.k = np.asarray(self.k, dtype=int)
        self.coeffs = np.asarray(self.coeffs, dtype=complex)

    @classmethod
    def window(cls, gamma: float, N: int, K: int = 0) -> "BoundaryExpansion":
        """Zero table over ``n <= N`` and ``-K <= k <= n + K``."""
        ns, ks = [], []
        for d in range(N + 1):
            for kk in range(-K, d + K + 1):
                ns.append(d)
                ks.append(kk)
        return cls(gamma, ns, ks, np.zeros(len(ns), dtype=complex))

    def in_range(self) -> np.ndarray:
        """Mask of entries with ``0 <= k <= n`` (the range of the transform)."""
        return (self.k >= 0) & (self.k <= self.n)

    def get(self, n: int, k: int) -> complex:
        hit = np.nonzero((self.n == n) & (self.k == k))[0]
        if hit.size == 0:
            raise BasisIndexError(f"(n, k) = ({n}, {k}) not stored in this window")
        return complex(self.coeffs[hit[0]])

    def evaluate(self, beta, alpha) -> np.ndarray:
        beta, alpha = np.broadcast_arrays(np.asarray(beta, float), np.asarray(alpha, float))
        out = np.zeros(beta.shape, dtype=complex)
        if self.n.size == 0:
            return out
        nmax = int(self.n.max())
        poly = gegenbauer_table(self.gamma + 1.0, nmax, np.sin(alpha))
        mu = np.cos(alpha) ** (2.0 * self.gamma + 1.0)
        norms = psi_norm(self.gamma, np.arange(nmax + 1))
        for n, k, c in zip(self.n, self.k, self.coeffs):
            if c == 0:
                continue
            scale = c * (-1j) ** n / (TWO_PI * norms[n])
            out += scale * np.exp(1j * (n - 2 * k) * (beta + alpha)) * poly[n]
        return out * mu


# --------------------------------------------------------- Zernike basis


def _zernike_constant(gamma: float, n: int, k: int) -> float:
    q = max(k, n - k)
    log_c = gammaln(gamma + 1.0 + q) - gammaln(gamma + 1.0) - gammaln(q + 1.0)
    return (-1.0) ** k * math.exp(log_c)


def zernike_norm(gamma: float, n, k) -> np.ndarray:
    """Norm of ``Z^gamma_{n,k}`` in ``L^2(D, (1-rho^2)^gamma dA)``."""
    n = np.asarray(n)
    k = np.asarray(k)
    am = np.abs(n - 2 * k)
    j = (n - am) // 2
    q = np.maximum(k, n - k)
    log_c = gammaln(gamma + 1.0 + q) - gammaln(gamma + 1.0) - gammaln(q + 1.0)
    log_p = (
        math.log(math.pi)
        + gammaln(j + gamma + 1.0)
        + gammaln(j + am + 1.0)
        - np.log(n + gamma + 1.0)
        - gammaln(j + gamma + am + 1.0)
        - gammaln(j + 1.0)
    )
    return np.exp(log_c + 0.5 * log_p)


def _polar(p):
    z = np.asarray(p, dtype=complex)
    return np.abs(z), np.angle(z)


def zernike_eval(gamma: float, n: int, k: int, p, hat: bool = False):
    """Evaluate ``Z^gamma_{n,k}`` (or its normalised version) at disk points."""
    gamma = _check_gamma(gamma)
    if not (0 <= k <= n):
        raise BasisIndexError(f"(n, k) = ({n}, {k}) outside 0 <= k <= n")
    rho, omega = _polar(p)
    m = n - 2 * k
    am = abs(m)
    j = (n - am) // 2
    radial = rho**am * jacobi_table(gamma, am, j, 2.0 * rho * rho - 1.0)[j]
    val = _zernike_constant(gamma, n, k) * radial * np.exp(1j * m * omega)
    if hat:
        val = val / zernike_norm(gamma, n, k)
    return complex(val) if np.ndim(val) == 0 else val


def zernike_matrix(gamma: float, N: int, p, hat: bool = True) -> np.ndarray:
    """All ``Z^gamma_{n,k}``, ``n <= N``, at points ``p``: shape ``p.shape + (nb,)``."""
    gamma = _check_gamma(gamma)
    rho, omega = _polar(p)
    shape = rho.shape
    rho = rho.ravel()
    omega = omega.ravel()
    ns, ks = triangle_indices(N)
    out = np.empty((rho.size, ns.size), dtype=complex)
    x = 2.0 * rho * rho - 1.0
    scale = np.array([_zernike_constant(gamma, n, k) for n, k in zip(ns, ks)])
    if hat:
        scale = scale / zernike_norm(gamma, ns, ks)
    rpow = np.ones_like(rho)
    for am in range(N + 1):
        if am > 0:
            rpow = rpow * rho
        jmax = (N - am) // 2
        table = jacobi_table(gamma, am, jmax, x)
        for sgn in ((1,) if am == 0 else (1, -1)):
            m = sgn * am
            ang = np.exp(1j * m * omega)
            for j in range(jmax + 1):
                n = 2 * j + am
                k = (n - m) // 2
                col = n * (n + 1) // 2 + k
                out[:, col] = (scale[col] * rpow * table[j]) * ang
    return out.reshape(shape + (ns.size,))


@dataclass
class ZernikeExpansion:
    """Coefficients on the hatted basis ``Z^gamma_{n,k}`` over the triangle ``n <= N``."""

    gamma: float
    degree_max: int
    coeffs: np.ndarray = field(default=None)

    def __post_init__(self):
        self.gamma = _check_gamma(self.gamma)
        self.degree_max = int(self.degree_max)
        size = triangle_size(self.degree_max)
        if self.coeffs is None:
            self.coeffs = np.zeros(size, dtype=complex)
        self.coeffs = np.asarray(self.coeffs, dtype=complex).copy()
        if self.coeffs.shape != (size,):
            raise ParameterError(f"expected {size} coefficients for N={self.degree_max}")

    @classmethod
    def basis(cls, gamma: float, N: int, n: int, k: int, value: complex = 1.0):
        e = cls(gamma, N)
        e.coeffs[triangle_index(n, k)] = value
        return e

    @property
    def indices(self):
        return triangle_indices(self.degree_max)

    def get(self, n: int, k: int) -> complex:
        if n > self.degree_max:
            raise BasisIndexError(f"degree {n} exceeds N={self.degree_max}")
        return complex(self.coeffs[triangle_index(n, k)])

    def with_coeffs(self, coeffs) -> "ZernikeExpansion":
        return ZernikeExpansion(self.gamma, self.degree_max, coeffs)

    def is_conjugate_symmetric(self, tol: float = 1e-12) -> bool:
        """True when the table describes a real field: ``f_{n,n-k} = (-1)^n conj(f_{n,k})``."""
        ns, ks = self.indices
        mirror = ns * (ns + 1) // 2 + (ns - ks)
        sign = (-1.0) ** ns
        return bool(np.max(np.abs(self.coeffs[mirror] - sign * np.conj(self.coeffs)), initial=0.0) <= tol)

    def __call__(self, p):
        return synthesize(self, p)


def synthesize(exp: ZernikeExpansion, grid) -> np.ndarray:
    """Pointwise sum ``sum f_{n,k} Zhat^gamma_{n,k}`` on an array of disk points."""
    grid = np.asarray(grid, dtype=complex)
    if not np.any(exp.coeffs):
        return np.zeros(grid.shape, dtype=complex)
    flat = grid.ravel()
    out = np.empty(flat.size, dtype=complex)
    chunk = 20000
    for s in range(0, flat.size, chunk):
        out[s : s + chunk] = zernike_matrix(exp.gamma, exp.degree_max, flat[s : s + chunk]) @ exp.coeffs
    return out.reshape(grid.shape)


def disk_grid(gamma: float, n_radial: int, n_angular: int):
    """Quadrature points and weights used by :func:`project_to_zernike`."""
    rho, omega, w = disk_rule(gamma, n_radial, n_angular)
    z = rho[:, None] * np.exp(1j * omega[None, :])
    return z, w


def project_to_zernike(gamma: float, field, N: int, n_radial: int | None = None,
                       n_angular: int | None = None) -> ZernikeExpansion:
    """Coefficients ``<f, Zhat^gamma_{n,k}>`` in ``L^2(D, d^gamma dA)``.

    ``field`` is a callable on complex points or an array sampled on
    ``disk_grid(gamma, n_radial, n_angular)``.
    """
    gamma = _check_gamma(gamma)
    if callable(field):
        n_radial = n_radial or N + 2
        n_angular = n_angular or 4 * N + 4
    else:
        field = np.asarray(field)
        if field.ndim != 2:
            raise ResolutionError("sampled fields must be 2-d (radial x angular)")
        n_radial, n_angular = field.shape
    if n_radial < N // 2 + 1 or n_angular < 2 * N + 1:
        raise ResolutionError(
            f"grid {n_radial}x{n_angular} cannot resolve degree {N}: "
            f"need at least {N // 2 + 1} radial and {2 * N + 1} angular nodes"
        )
    z, w = disk_grid(gamma, n_radial, n_angular)
    vals = field(z) if callable(field) else field
    vals = np.asarray(vals, dtype=complex)
    basis = zernike_matrix(gamma, N, z.ravel())
    coeffs = basis.conj().T @ (w.ravel() * vals.ravel())
    return ZernikeExpansion(gamma, N, coeffs)
