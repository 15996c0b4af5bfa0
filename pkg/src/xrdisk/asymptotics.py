"""Boundary expansions of transform outputs, checked by least-squares fits.

Profiles are sampled on geometric windows of a boundary distance ``d`` and
fitted by finite dictionaries of terms ``d^z log^l d``.  Index sets are not
estimated blindly: competing dictionaries of equal size are fitted and the
one with the smallest residual is reported, which is far more robust than
estimating a log power and a nearby exponent jointly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import beta as beta_fn

from . import geometry as geo
from .errors import ConditioningError, ParameterError, PreconditionError
from .quadrature import fiber_rule
from .transform import chord_integrals, footpoints

MIN_DISTANCE = 1e-6
RCOND = 1e-7
MISFIT_TOL = 1e-6


def geometric_window(lo: float = 1e-5, hi: float = 1e-1, n: int = 40) -> np.ndarray:
    """Strictly decreasing geometric samples from ``hi`` down to ``lo``."""
    return np.geomspace(hi, lo, n)


def _sort_terms(terms):
    out = sorted({(float(z), int(l)) for z, l in terms})
    if not out:
        raise ParameterError("a dictionary needs at least one term")
    return out


@dataclass
class ExpansionModel:
    """Fitted expansion ``sum c_{z,l} d^z log^l d`` over a window of distances."""

    terms: list
    window: np.ndarray
    fitted_coeffs: np.ndarray
    residual: float
    misfit_tol: float = MISFIT_TOL

    @property
    def misfit(self) -> bool:
        return bool(self.residual > self.misfit_tol)

    def coefficient(self, z: float, l: int = 0):
        for (tz, tl), c in zip(self.terms, self.fitted_coeffs):
            if abs(tz - z) < 1e-12 and tl == l:
                return c
        raise KeyError(f"term ({z}, {l}) is not in the dictionary")

    def evaluate(self, d):
        d = np.asarray(d, float)
        return design_matrix(d, self.terms) @ self.fitted_coeffs

    def as_rows(self):
        return [{"z": z, "log_power": l, "coefficient": c}
                for (z, l), c in zip(self.terms, self.fitted_coeffs)]


def design_matrix(d, terms):
    d = np.asarray(d, float)
    logd = np.log(d)
    return np.stack([d**z * logd**l for z, l in terms], axis=-1)


def _collinear_pair(A, j, terms):
    cos = np.abs(A.T @ A[:, j])
    cos[j] = -1.0
    i = int(np.argmax(cos[: max(j, 1)])) if j > 0 else int(np.argmax(cos))
    return terms[min(i, j)], terms[max(i, j)]


def fit_profile(samples, terms, misfit_tol: float = MISFIT_TOL) -> ExpansionModel:
    """Least-squares fit of ``(distance, value)`` samples by the given terms.

    ``samples`` is a sequence of pairs or a pair of arrays ``(d, values)``.
    Columns are scaled to unit norm and the system is solved through QR; a
    nearly dependent column raises :class:`ConditioningError` naming the pair
    of terms responsible.
    """
    terms = _sort_terms(terms)
    if isinstance(samples, tuple) and len(samples) == 2 and np.ndim(samples[0]) == 1:
        d, y = samples
    else:
        arr = list(samples)
        d = [s[0] for s in arr]
        y = [s[1] for s in arr]
    d = np.asarray(d, float)
    y = np.asarray(y)
    if d.shape != y.shape or d.ndim != 1:
        raise ParameterError("samples must pair each distance with one value")
    if d.size < 2 * len(terms):
        raise PreconditionError(f"{d.size} samples cannot support {len(terms)} terms "
                                f"(need at least {2 * len(terms)})")
    if np.any(d < MIN_DISTANCE) or np.any(d > 1.0):
        raise PreconditionError(f"distances must lie in [{MIN_DISTANCE}, 1]")
    if math.log10(d.max() / d.min()) < 3.0 - 1e-9:
        raise PreconditionError("distances must span at least three decades")
    order = np.argsort(-d)
    d, y = d[order], y[order]
    if np.any(np.diff(d) >= 0.0):
        raise PreconditionError("distances must be distinct")

    A = design_matrix(d, terms)
    scale = np.linalg.norm(A, axis=0)
    As = A / scale
    Q, R = np.linalg.qr(As)
    diag = np.abs(np.diag(R))
    if diag.min() < RCOND * diag.max():
        j = int(np.argmin(diag))
        a, b = _collinear_pair(As, j, terms)
        raise ConditioningError(f"terms d^{a[0]:.12g} log^{a[1]} and d^{b[0]:.12g} log^{b[1]} "
                                "are nearly collinear over the window")
    c = solve_triangular(R, Q.conj().T @ y) / scale
    if np.isrealobj(y):
        c = c.real
    ynorm = np.linalg.norm(y)
    res = float(np.linalg.norm(A @ c - y) / (ynorm if ynorm > 0 else 1.0))
    return ExpansionModel(terms, d, c, res, misfit_tol)


# ------------------------------------------------------------------ reports


@dataclass
class Report:
    """Outcome of one asymptotic check; ``status`` is pass, fail or inconclusive."""

    name: str
    status: str
    measured: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def lines(self):
        out = [f"# {self.name}: {self.status}"]
        for key, val in self.measured.items():
            exp = self.expected.get(key, "")
            out.append(f"{key}\t{_fmt(val)}\t{_fmt(exp)}")
        for label, m in self.fits.items():
            out.append(f"## dictionary {label}: residual {m.residual:.6e}")
            for row in m.as_rows():
                out.append(f"d^{row['z']:g} log^{row['log_power']}\t{_fmt(row['coefficient'])}")
        return out

    def to_text(self) -> str:
        return "\n".join(self.lines()) + "\n"


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    if isinstance(v, (complex, np.complexfloating)):
        return f"{v.real:.12g}{v.imag:+.12g}j"
    return str(v)


# ------------------------------------------------ I_0 of boundary weights


def _I0_weight_profile(model, gamma, mu, beta0=0.0, n_u=24):
    alpha = np.arccos(mu)
    beta = np.full_like(alpha, beta0)
    tau = geo.exit_times(model, beta, alpha)
    vals = chord_integrals(model, gamma, beta, alpha, lambda z: np.ones(z.shape), n_u).real
    return tau, vals


def verify_I0_leading(model, gamma: float, window=None, tol: float = 1e-3,
                      beta0: float = 0.0) -> Report:
    """Fit ``I_0[d^gamma] ~ a tau^(2 gamma + 1)`` along an incidence profile.

    The profile runs over ``mu = cos(alpha)`` geometric in ``[5e-5, 1e-1]``.
    ``d`` is ``c`` times the boundary distance to first order, so the raw
    coefficient ``a`` is reported together with ``a / c^gamma`` (distance
    convention) and ``a / (c/2)^gamma``, the last compared with
    ``II^gamma B(gamma + 1, gamma + 1)``.
    """
    gamma = float(gamma)
    if not gamma > -1.0:
        raise ParameterError("gamma must exceed -1")
    mu = geometric_window(5e-5, 1e-1, 40) if window is None else np.asarray(window, float)
    tau, vals = _I0_weight_profile(model, gamma, mu, beta0)
    t = tau / tau.max()
    expo = fit_profile((t, np.log(vals)), [(0, 0), (0, 1), (1, 0), (2, 0)])
    ratio = vals / tau ** (2.0 * gamma + 1.0)
    lead = fit_profile((t, ratio), [(0, 0), (1, 0), (2, 0), (3, 0)])
    a = float(lead.coefficient(0, 0))
    c = geo.boundary_defining_scale(model)
    curv = model.boundary_curvature()
    target = curv**gamma * float(beta_fn(gamma + 1.0, gamma + 1.0))
    normalized = a / (0.5 * c) ** gamma
    exponent = float(expo.coefficient(0, 1))
    err = abs(normalized - target) / abs(target)
    exp_err = abs(exponent - (2.0 * gamma + 1.0))
    status = "pass" if err < tol and exp_err < tol else "fail"
    return Report(
        f"I0 leading term, gamma={gamma:g}",
        status,
        measured={"exponent": exponent, "coefficient_raw": a,
                  "coefficient_distance": a / c**gamma,
                  "coefficient_normalized": normalized, "relative_error": err,
                  "profile_deviation": float(np.max(np.abs(ratio / a - 1.0)))},
        expected={"exponent": 2.0 * gamma + 1.0, "coefficient_normalized": target,
                  "relative_error": tol},
        fits={"tau-exponent": expo, "leading": lead},
    )


# -------------------------------------------- index sets of backprojections


def index_dictionaries(gamma: float, k: int, size: int = 10):
    """Equal-size candidate dictionaries, one per row of the index-set table.

    ``smooth``: integer powers only; ``generic``: adds ``(gamma+1)/2 + N_0``
    with log powers ``0..k``; ``odd``: also integer powers from
    ``ceil((gamma+1)/2)`` with log power ``k+1``; ``even`` (for ``k >= 1``)
    adds ``(gamma+1)/2 + N_0`` with log powers ``0..k-1``.
    """
    z0 = 0.5 * (gamma + 1.0)
    ints = [(float(j), 0) for j in range(size)]
    shifted = lambda lmax: [(z0 + j, l) for j in range(size) for l in range(lmax + 1)]
    start = math.ceil(z0 - 1e-12)
    dicts = {
        "smooth": ints,
        "generic": ints + shifted(k),
        "odd": ints + shifted(k) + [(float(j), k + 1) for j in range(start, start + size)],
    }
    if k >= 1:
        dicts["even"] = ints + shifted(k - 1)
    return {name: _sort_terms(t)[:size] for name, t in dicts.items()}


def table_case(gamma: float, k: int):
    """Expected dictionary and lowest singular pair ``(z0, l0)`` (None when empty)."""
    z0 = 0.5 * (gamma + 1.0)
    if float(gamma).is_integer() and gamma >= 0 and int(gamma) % 2 == 0:
        return ("smooth", None) if k == 0 else ("even", (z0, k - 1))
    if float(gamma).is_integer() and int(gamma) % 2 == 1:
        return "odd", (float(round(z0)), k + 1)
    return "generic", (z0, k)


def _backproject_radial(g, d, n_fiber, levels, radius=1.0):
    """Plain backprojection ``I_0^sharp g`` at radii ``R sqrt(1 - d)``."""
    model = geo.DiskModel(0.0, radius)
    pts = radius * np.sqrt(1.0 - np.asarray(d, float))
    phi, w = fiber_rule(n_fiber, levels)
    b, a, tau = footpoints(model, pts.astype(complex), phi[None, :])
    return (g(b, a, tau) @ w).real


def backproj_profile(gamma: float, k: int, d=None, n_fiber: int = 1024, levels: int = 2,
                     amplitude=None):
    """Samples of ``I_0^sharp (a tau^gamma log^k tau e^{-tau^2})`` on the unit disk."""
    d = geometric_window() if d is None else np.asarray(d, float)

    def g(b, a, tau):
        out = tau**gamma * np.log(tau) ** k * np.exp(-tau * tau)
        if amplitude is not None:
            out = out * amplitude(b, a)
        return out

    return d, _backproject_radial(g, d, n_fiber, levels)


def verify_backproj_index(gamma: float, k: int, d=None, size: int = 10, n_fiber: int = 1024,
                          levels: int = 2, ratio_tol: float = 0.1) -> Report:
    """Detect the boundary index set of a backprojected conormal profile.

    Every candidate dictionary is fitted; the report passes when the
    best-fitting dictionary is the one the table predicts and its residual
    is at most ``ratio_tol`` times that of the best competitor.  A correct
    winner by a smaller margin gives an inconclusive report.
    """
    gamma = float(gamma)
    if not gamma > -1.0:
        raise ParameterError("gamma must exceed -1")
    if k not in (0, 1):
        raise ParameterError("log power k must be 0 or 1")
    d, prof = backproj_profile(gamma, k, d, n_fiber, levels)
    dicts = index_dictionaries(gamma, k, size)
    fits = {name: fit_profile((d, prof), terms) for name, terms in dicts.items()}
    expected, pair = table_case(gamma, k)
    best = min(fits, key=lambda n: fits[n].residual)
    rivals = [n for n in fits if dicts[n] != dicts[best]]
    rival_res = min((fits[n].residual for n in rivals), default=np.inf)
    ratio = fits[best].residual / rival_res if rival_res > 0 else np.inf
    if dicts[best] != dicts[expected]:
        status = "fail"
    elif ratio <= ratio_tol:
        status = "pass"
    else:
        # right dictionary, but a competitor is too close to call
        status = "inconclusive"
    detected = _leading_singular(dicts[best], fits[best])
    return Report(
        f"backprojection index set, gamma={gamma:g}, k={k}",
        status,
        measured={"best_dictionary": best, "residual": fits[best].residual,
                  "residual_ratio": ratio, "leading_pair": detected},
        expected={"best_dictionary": expected, "residual_ratio": ratio_tol,
                  "leading_pair": pair},
        fits=fits,
    )


def _leading_singular(terms, fit):
    """Lowest non-smooth term of a dictionary (None when all terms are smooth)."""
    for (z, l), c in zip(terms, fit.fitted_coeffs):
        if l > 0 or not float(z).is_integer():
            return (z, l)
    return None


# ------------------------------------------------ normal operator outputs

LOG_DICT = [(0.0, 0), (1.0, 0), (1.0, 1), (2.0, 0), (2.0, 1), (3.0, 0), (3.0, 1), (4.0, 0)]
LOG2_DICT = [(0.0, 0), (1.0, 0), (1.0, 1), (1.0, 2), (2.0, 0), (2.0, 1), (2.0, 2), (3.0, 0)]
SMOOTH_DICT = [(float(j), 0) for j in range(8)]


def _forward_on_fibers(model, f_kind, b, a, n_u=24, eps=1e-4):
    one = lambda z: np.ones(z.shape)
    if f_kind == "one":
        return chord_integrals(model, 0.0, b, a, one, n_u).real
    if f_kind == "inv_sqrt":
        return chord_integrals(model, -0.5, b, a, one, n_u).real
    if f_kind == "log":
        # d/dgamma of I_0[d^gamma] at gamma = 0
        hi = chord_integrals(model, eps, b, a, one, n_u).real
        lo = chord_integrals(model, -eps, b, a, one, n_u).real
        return (hi - lo) / (2.0 * eps)
    raise ParameterError(f"unknown input class {f_kind!r}; use one, inv_sqrt or log")


def normal_profile(model, weight_choice: str, input_class: str, d=None, n_fiber: int = 1024,
                   levels: int = 2):
    """Samples of ``I_0^sharp w I_0 f`` at radii ``R sqrt(1 - d)``; ``w`` is 1 or ``1/tau``."""
    if not model.is_flat:
        raise PreconditionError("normal-operator profiles are implemented for Euclidean disks")
    if weight_choice not in ("none", "1/tau"):
        raise ParameterError("weight_choice must be 'none' or '1/tau'")
    d = geometric_window() if d is None else np.asarray(d, float)
    R = model.radius
    pts = (R * np.sqrt(1.0 - d)).astype(complex)
    phi, w = fiber_rule(n_fiber, levels)
    b, a, tau = footpoints(model, pts, phi[None, :])
    fwd = _forward_on_fibers(model, input_class, b.ravel(), a.ravel()).reshape(b.shape)
    if weight_choice == "1/tau":
        fwd = fwd / tau
    return d, fwd @ w


def classify_normal_output(model, weight_choice: str = "none", input_class: str = "one",
                           d=None, n_fiber: int = 1024, levels: int = 2,
                           tol: float = MISFIT_TOL) -> Report:
    """Fit smooth, ``d log d`` and ``d log^2 d`` dictionaries to a normal-operator output.

    The simplest dictionary whose relative residual is below ``tol`` is
    selected (smooth before log before log squared).
    """
    d, prof = normal_profile(model, weight_choice, input_class, d, n_fiber, levels)
    fits = {"smooth": fit_profile((d, prof), SMOOTH_DICT),
            "log": fit_profile((d, prof), LOG_DICT),
            "log2": fit_profile((d, prof), LOG2_DICT)}
    chosen = next((n for n in ("smooth", "log", "log2") if fits[n].residual < tol), None)
    status = "pass" if chosen else "inconclusive"
    chosen = chosen or min(fits, key=lambda n: fits[n].residual)
    const = float(fits[chosen].coefficient(0.0, 0))
    fit = fits[chosen]
    smooth_part = fit.evaluate(d) - const
    # size of the non-constant part over the window, relative to the constant
    nonconst = np.max(np.abs(smooth_part)) / max(abs(const), 1e-300)
    measured = {"dictionary": chosen, "residual": fits[chosen].residual, "constant": const,
                "max_nonconstant": float(nonconst),
                "dlogd": float(fits["log"].coefficient(1.0, 1))}
    return Report(f"normal output, weight={weight_choice}, input={input_class}", status,
                  measured=measured, fits=fits)
