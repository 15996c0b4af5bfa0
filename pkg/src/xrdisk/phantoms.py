"""Built-in phantoms and the ``kind[:args]`` strings that name them.

``constant[:c]``, ``gaussian[:width[,x,y]]``, ``zernike:n,k`` (the
unnormalised ``Z_{n,k}`` of the run's weight exponent), ``dgamma:p`` (the
profile ``d^p``) and ``file:path`` (a field file fitted by least squares).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .basis import ZernikeExpansion, triangle_index, zernike_matrix, zernike_norm
from .errors import ConfigError

KINDS = ("constant", "gaussian", "zernike", "dgamma", "file")


@dataclass
class Phantom:
    kind: str
    params: tuple = field(default_factory=tuple)
    path: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown phantom {self.kind!r}; choose from {', '.join(KINDS)}")

    @property
    def weight_shift(self) -> float:
        """Extra boundary exponent absorbed into the quadrature weight."""
        return float(self.params[0]) if self.kind == "dgamma" else 0.0

    def field(self, model, gamma: float, N: int | None = None):
        """Callable or :class:`ZernikeExpansion` to feed to the forward map."""
        if self.kind == "constant":
            c = float(self.params[0]) if self.params else 1.0
            return lambda z: np.full(np.shape(z), c, dtype=complex)
        if self.kind == "gaussian":
            w = float(self.params[0]) if self.params else 0.3
            cx, cy = (float(self.params[1]), float(self.params[2])) if len(self.params) >= 3 else (0.0, 0.0)
            c = complex(cx, cy) * model.radius
            s = w * model.radius
            return lambda z: np.exp(-np.abs(np.asarray(z) - c) ** 2 / (2.0 * s * s)) + 0j
        if self.kind == "zernike":
            n, k = (int(p) for p in self.params)
            if not (0 <= k <= n):
                raise ConfigError(f"zernike index ({n}, {k}) outside 0 <= k <= n")
            exp = ZernikeExpansion(gamma, n)
            exp.coeffs[triangle_index(n, k)] = zernike_norm(gamma, n, k)
            return exp
        if self.kind == "dgamma":
            return lambda z: np.ones(np.shape(z), dtype=complex)
        return fit_field_file(self.path, gamma, N or 10)

    def samples(self, model, gamma: float, points, N: int | None = None):
        f = self.field(model, gamma, N)
        vals = np.asarray(f(points), dtype=complex)
        if self.kind == "dgamma":
            vals = vals * geo.boundary_defining(model, points) ** self.weight_shift
        return vals


def parse_phantom(spec: str) -> Phantom:
    if not spec:
        raise ConfigError("empty phantom specification")
    kind, _, rest = spec.partition(":")
    kind = kind.strip().lower()
    if kind == "file":
        if not rest:
            raise ConfigError("file phantom needs a path: file:PATH")
        return Phantom("file", (), rest)
    try:
        params = tuple(float(x) for x in rest.split(",") if x.strip()) if rest else ()
    except ValueError:
        raise ConfigError(f"bad phantom parameters in {spec!r}") from None
    if kind == "zernike" and len(params) != 2:
        raise ConfigError("zernike phantom needs two indices: zernike:n,k")
    if kind == "dgamma" and len(params) != 1:
        raise ConfigError("dgamma phantom needs an exponent: dgamma:p")
    return Phantom(kind, params)


def fit_field_file(path, gamma: float, N: int) -> ZernikeExpansion:
    """Least-squares fit of field-file samples by hatted ``Z^gamma`` up to degree ``N``."""
    from .io import read_field

    z, v = read_field(path)
    A = zernike_matrix(gamma, N, z)
    if A.shape[0] < A.shape[1]:
        raise ConfigError(f"{path}: {A.shape[0]} samples cannot determine degree {N}")
    c, *_ = np.linalg.lstsq(A, v, rcond=None)
    return ZernikeExpansion(gamma, N, c)
