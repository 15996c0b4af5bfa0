"""Quadrature rules used by the transforms and projections."""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

TWO_PI = 2.0 * math.pi


@lru_cache(maxsize=256)
def _gauss_jacobi(n: int, a: float, b: float):
    x, w = roots_jacobi(n, a, b)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_jacobi(n: int, a: float, b: float):
    """Gauss nodes and weights on [-1, 1] for the weight ``(1-x)^a (1+x)^b``."""
    return _gauss_jacobi(int(n), float(a), float(b))


def rescaled_time_rule(n: int, gamma: float):
    """Nodes and weights on [0, 1] for the weight ``(u (1-u))^gamma``."""
    s, w = gauss_jacobi(n, gamma, gamma)
    return 0.5 * (1.0 + s), w * 2.0 ** (-2.0 * gamma - 1.0)


def incidence_rule(n: int, gamma: float):
    """Gauss nodes in ``x = sin(alpha)`` for the weight ``(1-x^2)^(gamma+1/2)``.

    Returns ``(x, w, alpha)``.
    """
    x, w = gauss_jacobi(n, gamma + 0.5, gamma + 0.5)
    return x, w, np.arcsin(x)


def disk_rule(gamma: float, n_radial: int, n_angular: int):
    """Tensor rule for ``int_D f (1-rho^2)^gamma dA``.

    Returns ``(rho, omega, weights)`` where ``weights`` has shape
    (n_radial, n_angular) matching ``rho[:, None]`` and ``omega[None, :]``.
    """
    x, w = gauss_jacobi(n_radial, gamma, 0.0)
    rho = np.sqrt(0.5 * (1.0 + x))
    omega = TWO_PI * np.arange(n_angular) / n_angular
    wr = w * 2.0 ** (-gamma - 2.0)
    weights = np.outer(wr, np.full(n_angular, TWO_PI / n_angular))
    return rho, omega, weights


def cluster_map(psi, levels: int):
    """Periodic map ``psi + sin(2 psi)/2`` iterated ``levels`` times, with its derivative.

    The map fixes the multiples of pi/2 and has vanishing derivative at
    ``psi = +-pi/2``, so uniform nodes in ``psi`` accumulate there.
    """
    phi = np.asarray(psi, dtype=float)
    jac = np.ones_like(phi)
    for _ in range(levels):
        jac = jac * (1.0 + np.cos(2.0 * phi))
        phi = phi + 0.5 * np.sin(2.0 * phi)
    return phi, jac


def fiber_rule(n: int, levels: int = 0):
    """Periodic rule on the circle of directions, relative angle ``phi``.

    Returns ``(phi, w)`` with ``sum(w) = 2 pi``.  With ``levels > 0`` nodes
    cluster at ``phi = +-pi/2``, which are the tangential directions of a
    point close to the boundary.
    """
    psi = TWO_PI * (np.arange(n) + 0.5) / n - math.pi
    phi, jac = cluster_map(psi, levels)
    return phi, jac * (TWO_PI / n)
