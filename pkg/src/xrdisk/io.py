"""Plain-text file formats.

All numbers are written with 17 significant digits, which round-trips
IEEE doubles exactly.  Headers are ``key = value`` lines after a ``#``
title line; data rows are comma separated with one header row of column
names.

coefficients   header ``gamma``, ``N``; rows ``n,k,re,im``
sinogram       header ``kappa``, ``radius``, ``gamma``, ``n_beta``, ``n_alpha``;
               rows ``beta,alpha,re,im`` in row-major (beta, alpha) order
field          rows ``x,y,re,im``
attenuation    JSON descriptor (see :func:`attenuation_from_spec`)
"""
from __future__ import annotations

import json
import os

import numpy as np

from .basis import ZernikeExpansion, triangle_indices, triangle_size
from .errors import ConfigError
from .geometry import DiskModel
from .transform import Sinogram, SinogramGrid


def fmt(x: float) -> str:
    return f"{float(x):.16e}"


def _write(path, title, header: dict, columns, rows):
    lines = [f"# {title}"]
    lines += [f"{k} = {v}" for k, v in header.items()]
    lines.append(",".join(columns))
    lines += [",".join(r) for r in rows]
    text = "\n".join(lines) + "\n"
    if path is None:
        return text
    d = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(d):
        raise ConfigError(f"output directory {d} does not exist")
    with open(path, "w") as fh:
        fh.write(text)
    return text


def _read(path, title):
    try:
        with open(path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from None
    if not lines or lines[0] != f"# {title}":
        raise ConfigError(f"{path} is not a {title} file")
    header = {}
    i = 1
    while i < len(lines) and "=" in lines[i]:
        k, v = lines[i].split("=", 1)
        header[k.strip()] = v.strip()
        i += 1
    if i >= len(lines):
        raise ConfigError(f"{path} has no column row")
    cols = lines[i].split(",")
    body = [ln.split(",") for ln in lines[i + 1 :]]
    if any(len(r) != len(cols) for r in body):
        raise ConfigError(f"{path} has malformed data rows")
    data = np.array(body, dtype=float) if body else np.zeros((0, len(cols)))
    return header, cols, data


# ------------------------------------------------------------ coefficients


def write_coefficients(path, exp: ZernikeExpansion, normalization: str | None = None):
    n, k = exp.indices
    rows = [(str(a), str(b), fmt(c.real), fmt(c.imag)) for a, b, c in zip(n, k, exp.coeffs)]
    head = {"gamma": fmt(exp.gamma), "N": exp.degree_max}
    if normalization:
        head["normalization"] = normalization
    return _write(path, "xrdisk coefficients", head, ("n", "k", "re", "im"), rows)


def read_coefficients(path) -> ZernikeExpansion:
    h, _, data = _read(path, "xrdisk coefficients")
    try:
        gamma, N = float(h["gamma"]), int(h["N"])
    except (KeyError, ValueError):
        raise ConfigError(f"{path}: header needs gamma and N") from None
    coeffs = np.zeros(triangle_size(N), dtype=complex)
    n, k = triangle_indices(N)
    lookup = {(int(a), int(b)): i for i, (a, b) in enumerate(zip(n, k))}
    for a, b, re, im in data:
        key = (int(a), int(b))
        if key not in lookup:
            raise ConfigError(f"{path}: index {key} outside degree {N}")
        coeffs[lookup[key]] = re + 1j * im
    return ZernikeExpansion(gamma, N, coeffs)


# -------------------------------------------------------------- sinograms


def write_sinogram(path, sin: Sinogram):
    g = sin.grid
    b, a = g.mesh()
    v = np.asarray(sin.values, dtype=complex)
    rows = [(fmt(bb), fmt(aa), fmt(x.real), fmt(x.imag))
            for bb, aa, x in zip(b.ravel(), a.ravel(), v.ravel())]
    head = {"kappa": fmt(sin.model.kappa), "radius": fmt(sin.model.radius),
            "gamma": fmt(g.gamma), "n_beta": g.n_beta, "n_alpha": g.n_alpha}
    return _write(path, "xrdisk sinogram", head, ("beta", "alpha", "re", "im"), rows)


def read_sinogram(path) -> Sinogram:
    h, _, data = _read(path, "xrdisk sinogram")
    try:
        model = DiskModel(float(h["kappa"]), float(h["radius"]))
        grid = SinogramGrid(int(h["n_beta"]), int(h["n_alpha"]), float(h["gamma"]))
    except (KeyError, ValueError) as e:
        raise ConfigError(f"{path}: bad sinogram header ({e})") from None
    if data.shape[0] != grid.n_beta * grid.n_alpha:
        raise ConfigError(f"{path}: expected {grid.n_beta * grid.n_alpha} rows, "
                          f"found {data.shape[0]}")
    vals = (data[:, 2] + 1j * data[:, 3]).reshape(grid.n_beta, grid.n_alpha)
    return Sinogram(model, grid, vals)


# ----------------------------------------------------------------- fields


def write_field(path, points, values):
    z = np.asarray(points, dtype=complex).ravel()
    v = np.asarray(values, dtype=complex).ravel()
    rows = [(fmt(p.real), fmt(p.imag), fmt(x.real), fmt(x.imag)) for p, x in zip(z, v)]
    return _write(path, "xrdisk field", {"count": z.size}, ("x", "y", "re", "im"), rows)


def read_field(path):
    _, _, data = _read(path, "xrdisk field")
    return data[:, 0] + 1j * data[:, 1], data[:, 2] + 1j * data[:, 3]


def write_table(path, title, columns, rows, header=None):
    """Generic numeric table, used for plot-ready outputs."""
    out = [tuple(fmt(x) if isinstance(x, (float, np.floating)) else str(x) for x in r)
           for r in rows]
    return _write(path, title, header or {}, columns, out)


# ------------------------------------------------------------ attenuation


def _complex(v):
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v):
        return complex(v[0], v[1])
    return complex(v)


def _matrix(v, m):
    if v is None:
        return np.eye(m, dtype=complex)
    arr = np.array([[_complex(x) for x in row] for row in v], dtype=complex)
    if arr.shape != (m, m):
        raise ConfigError(f"matrix has shape {arr.shape}, expected ({m}, {m})")
    return arr


def attenuation_from_spec(spec: dict):
    """Build an attenuation field from a descriptor.

    ``{"kind": "zero", "m": 1}``, ``{"kind": "constant", "m": 1, "a": [re, im]}``
    (or ``"matrix": [[..]]``), ``{"kind": "bump", "amplitude": [0, 0.5],
    "radius": 0.8, "generator": [[..]]}`` or ``{"kind": "grid", "m": 1,
    "n_radial": .., "n_angular": .., "values": [..]}`` with values on the
    uniform polar grid (radii ``0..1``), each entry a flattened ``m x m``
    matrix of ``[re, im]`` pairs.
    """
    from . import attenuated as att

    kind = spec.get("kind")
    m = int(spec.get("m", 1))
    if kind == "zero":
        return att.zero_field(m)
    if kind == "constant":
        if "matrix" in spec:
            return att.constant_field(_matrix(spec["matrix"], m), m)
        return att.constant_field(_complex(spec.get("a", 0.0)), m)
    if kind == "bump":
        gen = spec.get("generator")
        G = None if gen is None else _matrix(gen, len(gen))
        return att.bump_field(_complex(spec.get("amplitude", [0.0, 0.5])),
                              float(spec.get("radius", 0.8)), G)
    if kind == "grid":
        return _grid_field(spec, m)
    raise ConfigError(f"unknown attenuation kind {kind!r}")


def _grid_field(spec, m):
    from scipy.interpolate import RegularGridInterpolator

    from . import attenuated as att

    nr, nw = int(spec["n_radial"]), int(spec["n_angular"])
    vals = np.array([[_complex(x) for x in entry] for entry in spec["values"]], dtype=complex)
    if vals.shape != (nr * nw, m * m):
        raise ConfigError("grid attenuation values do not match n_radial x n_angular x m^2")
    vals = vals.reshape(nr, nw, m, m)
    rho = np.linspace(0.0, 1.0, nr)
    omega = 2.0 * np.pi * np.arange(nw + 1) / nw
    wrapped = np.concatenate([vals, vals[:, :1]], axis=1)
    interp = RegularGridInterpolator((rho, omega), wrapped, bounds_error=False, fill_value=0.0)

    def func(z):
        pts = np.stack([np.abs(z).ravel(), (np.angle(z) % (2 * np.pi)).ravel()], axis=-1)
        return interp(pts).reshape(np.shape(z) + (m, m))

    skew = np.allclose(vals, -np.conj(np.swapaxes(vals, -1, -2)), atol=1e-14)
    return att.AttenuationField(m, func, 1.0, "C0", "skew-hermitian" if skew else "general")


def read_attenuation(path):
    try:
        with open(path) as fh:
            spec = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read attenuation file {path}: {e}") from None
    return attenuation_from_spec(spec)
