"""Command-line interface.

Every subcommand resolves its configuration from built-in defaults, then an
optional JSON file (``--config``), then explicit flags.  Outputs are plain
text files plus a ``.json`` sidecar echoing the resolved configuration.
Exit status: 0 success, 1 failed check, 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import __version__
from .errors import ConfigError, XRDiskError

DEFAULTS = {
    "kappa": 0.0,
    "radius": 1.0,
    "gamma": 0.0,
    "degree": 10,
    "grid_beta": 64,
    "grid_alpha": 32,
    "seed": 0,
    "workers": None,
    "out": None,
    "timings": False,
    "normalization": "hat",
}


@dataclass
class RunConfig:
    command: str
    kappa: float = 0.0
    radius: float = 1.0
    gamma: float = 0.0
    degree: int = 10
    grid_beta: int = 64
    grid_alpha: int = 32
    seed: int = 0
    workers: int | None = None
    out: str | None = None
    timings: bool = False
    normalization: str = "hat"
    options: dict = field(default_factory=dict)

    def validate(self):
        from .geometry import DiskModel
        from .errors import ParameterError

        try:
            DiskModel(self.kappa, self.radius)
        except ParameterError as e:
            raise ConfigError(f"model: {e}") from None
        if not self.gamma > -1.0:
            raise ConfigError(f"--gamma must exceed -1 (got {self.gamma})")
        if self.grid_beta < 1 or self.grid_alpha < 1:
            raise ConfigError("grid sizes must be positive; an empty grid has no data")
        if self.degree < 0:
            raise ConfigError("--degree must be non-negative")
        if self.workers is not None and self.workers < 1:
            raise ConfigError("--workers must be at least 1")
        if self.normalization not in ("hat", "raw"):
            raise ConfigError("--normalization must be 'hat' or 'raw'")
        if self.out is not None:
            d = os.path.dirname(os.path.abspath(self.out))
            if not os.path.isdir(d) or not os.access(d, os.W_OK):
                raise ConfigError(f"output path {self.out} is not writable")
        return self

    @property
    def model(self):
        from .geometry import DiskModel

        return DiskModel(self.kappa, self.radius)

    @property
    def grid(self):
        from .transform import SinogramGrid

        return SinogramGrid(self.grid_beta, self.grid_alpha, self.gamma)

    def echo(self) -> dict:
        d = asdict(self)
        d["workers"] = self.workers
        return d


# ---------------------------------------------------------------- helpers


def _sidecar(cfg: RunConfig, extra: dict, timings: dict):
    if cfg.out is None:
        return
    meta = {"xrdisk_version": __version__, "config": cfg.echo(), **extra}
    if cfg.timings:
        meta["timings"] = {k: round(v, 6) for k, v in timings.items()}
    with open(cfg.out + ".json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _emit(cfg: RunConfig, text: str):
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        with open(cfg.out, "w") as fh:
            fh.write(text)


def _require(cfg, key):
    val = cfg.options.get(key)
    if val is None:
        raise ConfigError(f"{cfg.command} needs --{key.replace('_', '-')}")
    return val


def _load_sinogram(cfg):
    from .io import read_sinogram

    sin = read_sinogram(_require(cfg, "input"))
    return sin


# --------------------------------------------------------------- commands


def cmd_sinogram(cfg: RunConfig) -> int:
    from .io import write_sinogram
    from .phantoms import parse_phantom
    from .transform import xray

    t0 = time.perf_counter()
    ph = parse_phantom(cfg.options.get("phantom") or "constant")
    f = ph.field(cfg.model, cfg.gamma, cfg.degree)
    weight = cfg.gamma + ph.weight_shift
    if not weight > -1.0:
        raise ConfigError(f"gamma + profile exponent = {weight} must exceed -1")
    n_u = cfg.options.get("n_u")
    sin = xray(cfg.model, weight, f, cfg.grid, n_u=n_u, workers=cfg.workers)
    t1 = time.perf_counter()
    _emit(cfg, write_sinogram(None, sin))
    _sidecar(cfg, {"phantom": cfg.options.get("phantom") or "constant",
                   "quadrature": {"beta": "uniform", "x": "gauss-jacobi",
                                  "time": "gauss-jacobi rescaled", "n_u": n_u or "auto"}},
             {"forward": t1 - t0})
    return 0


def cmd_backproject(cfg: RunConfig) -> int:
    from .basis import disk_grid
    from .io import write_field
    from .transform import backproject

    sin = _load_sinogram(cfg)
    t0 = time.perf_counter()
    z, _ = disk_grid(sin.gamma, cfg.degree + 2, 4 * cfg.degree + 4)
    vals = backproject(sin.model, sin.gamma, sin, z.ravel(),
                       n_fiber=int(cfg.options.get("n_fiber") or 256))
    t1 = time.perf_counter()
    _emit(cfg, write_field(None, z.ravel(), vals))
    _sidecar(cfg, {"input": cfg.options["input"]}, {"backproject": t1 - t0})
    return 0


def _truth_error(cfg, rec, sin):
    from .basis import disk_grid, synthesize
    from .phantoms import parse_phantom
    from .spectral import SobolevSpec, sobolev_norm
    from .basis import project_to_zernike

    ph = parse_phantom(cfg.options["truth"])
    z, w = disk_grid(rec.gamma, rec.degree_max + 8, 4 * rec.degree_max + 8)
    truth = ph.samples(sin.model, rec.gamma, z, rec.degree_max)
    approx = synthesize(rec, z)
    if cfg.normalization == "raw":
        from .basis import zernike_norm

        n, k = rec.indices
        approx = synthesize(rec.with_coeffs(rec.coeffs * zernike_norm(rec.gamma, n, k)), z)
    l2 = math.sqrt(np.sum(w * np.abs(approx - truth) ** 2) / np.sum(w * np.abs(truth) ** 2))
    s = float(cfg.options.get("sobolev_s") or 1.0)
    spec = SobolevSpec(s, rec.gamma, "disk")
    ft = project_to_zernike(rec.gamma, truth, rec.degree_max)
    fr = project_to_zernike(rec.gamma, approx, rec.degree_max)
    hs = sobolev_norm(spec, ft.with_coeffs(fr.coeffs - ft.coeffs)) / sobolev_norm(spec, ft)
    return {"relative_l2": l2, f"relative_Hs[s={s:g}]": hs}


def cmd_reconstruct(cfg: RunConfig) -> int:
    from .io import write_coefficients, write_table
    from .spectral import SpectralFilter, svd_reconstruct

    sin = _load_sinogram(cfg)
    if sin.grid.gamma != cfg.gamma:
        cfg.gamma = sin.grid.gamma
    if not sin.grid.resolves(cfg.degree):
        raise ConfigError(f"sinogram grid {sin.grid.n_beta}x{sin.grid.n_alpha} does not resolve "
                          f"degree {cfg.degree} (needs n_beta >= {2 * cfg.degree + 1}, "
                          f"n_alpha >= {cfg.degree + 1})")
    noise = float(cfg.options.get("noise") or 0.0)
    if noise > 0:
        rng = np.random.default_rng(cfg.seed)
        sin = sin.with_values(sin.values + noise * rng.standard_normal(sin.values.shape))
    kind = cfg.options.get("filter") or "none"
    lam = float(cfg.options.get("lam") or 0.0)
    t0 = time.perf_counter()
    rec = svd_reconstruct(sin.model, sin.gamma, sin, cfg.degree, SpectralFilter(kind, lam),
                          cfg.normalization)
    t1 = time.perf_counter()
    _emit(cfg, write_coefficients(None, rec, cfg.normalization))
    report = {}
    if cfg.options.get("truth"):
        report = _truth_error(cfg, rec, sin)
        for k, v in report.items():
            print(f"{k}\t{v:.6e}")
    sweep = cfg.options.get("lam_sweep")
    if sweep:
        if not cfg.options.get("truth"):
            raise ConfigError("--lam-sweep needs --truth to measure errors")
        rows = []
        for lv in sweep:
            r = svd_reconstruct(sin.model, sin.gamma, sin, cfg.degree,
                                SpectralFilter("tikhonov", float(lv)), cfg.normalization)
            rows.append((float(lv), _truth_error(cfg, r, sin)["relative_l2"]))
        text = write_table(None, "xrdisk tikhonov sweep", ("lambda", "relative_l2"), rows)
        if cfg.out:
            with open(cfg.out + ".sweep", "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        report["sweep"] = rows
    _sidecar(cfg, {"input": cfg.options["input"], "filter": kind, "lam": lam, "noise": noise,
                   "report": report}, {"reconstruct": t1 - t0})
    return 0


def cmd_range(cfg: RunConfig) -> int:
    from .io import write_sinogram
    from .range_ops import range_distance, range_project

    sin = _load_sinogram(cfg)
    t0 = time.perf_counter()
    proj = range_project(sin)
    dist = sin.with_values(sin.values - proj.values).norm(0.0)
    t1 = time.perf_counter()
    _emit(cfg, write_sinogram(None, proj))
    print(f"range_distance\t{dist:.16e}")
    _sidecar(cfg, {"input": cfg.options["input"], "range_distance": dist}, {"range": t1 - t0})
    return 0


def cmd_attenuate(cfg: RunConfig) -> int:
    from . import attenuated as att
    from .io import read_attenuation, write_sinogram
    from .phantoms import parse_phantom
    from .transform import Sinogram, SinogramGrid

    if cfg.gamma != 0.0:
        raise ConfigError("attenuated data use the unweighted grid; set --gamma 0")
    if cfg.options.get("attenuation"):
        Phi = read_attenuation(cfg.options["attenuation"])
    else:
        Phi = att.bump_field()
    ph = parse_phantom(cfg.options.get("phantom") or "constant")
    if ph.kind == "dgamma":
        raise ConfigError("d^p profiles are not supported as attenuated sources")
    f = ph.field(cfg.model, 0.0, cfg.degree)
    steps = int(cfg.options.get("steps") or att.DEFAULT_STEPS)
    grid = SinogramGrid(cfg.grid_beta, cfg.grid_alpha, 0.0)
    t0 = time.perf_counter()
    vs = att.attenuated_sinogram(cfg.model, Phi, f, grid, steps)
    t1 = time.perf_counter()
    texts = [write_sinogram(None, Sinogram(cfg.model, grid, vs.values[..., c])) for c in range(Phi.m)]
    extra = {"m": Phi.m, "steps": steps, "structure": Phi.structure, "convention": Phi.convention}
    if cfg.options.get("probe"):
        if not Phi.is_skew:
            raise ConfigError("--probe needs a skew-hermitian attenuation")
        smin, cond = att.normal_probe(cfg.model, Phi, cfg.degree)
        extra["sigma_min"], extra["condition"] = smin, cond
        print(f"sigma_min\t{smin:.10e}\ncondition\t{cond:.10e}")
    if cfg.out is None:
        sys.stdout.write("".join(texts))
    else:
        with open(cfg.out, "w") as fh:
            fh.write(texts[0])
        for c in range(1, Phi.m):
            with open(f"{cfg.out}.c{c}", "w") as fh:
                fh.write(texts[c])
    _sidecar(cfg, extra, {"transport": t1 - t0})
    return 0


def cmd_asymptotics(cfg: RunConfig) -> int:
    from . import asymptotics as asy

    check = cfg.options.get("check") or "i0"
    t0 = time.perf_counter()
    if check == "i0":
        rep = asy.verify_I0_leading(cfg.model, cfg.gamma)
    elif check == "index":
        rep = asy.verify_backproj_index(cfg.gamma, int(cfg.options.get("log_power") or 0))
    elif check == "normal":
        if not cfg.model.is_flat:
            raise ConfigError("normal-operator profiles need --kappa 0")
        rep = asy.classify_normal_output(cfg.model, cfg.options.get("weight") or "none",
                                         cfg.options.get("input_class") or "one")
    else:
        raise ConfigError(f"unknown asymptotics check {check!r}; use i0, index or normal")
    t1 = time.perf_counter()
    _emit(cfg, rep.to_text())
    _sidecar(cfg, {"check": check, "status": rep.status}, {"fit": t1 - t0})
    return 1 if rep.status == "fail" else 0


def cmd_verify(cfg: RunConfig) -> int:
    from .checks import SUITES, run_suite

    suite = cfg.options.get("suite") or "all"
    if suite not in SUITES + ("all",):
        raise ConfigError(f"unknown suite {suite!r}; choose from {', '.join(SUITES + ('all',))}")
    t0 = time.perf_counter()
    checks = run_suite(suite, cfg.workers)
    t1 = time.perf_counter()
    text = "id\tmeasured\texpected\ttol\tpass\n" + "".join(c.line() + "\n" for c in checks)
    _emit(cfg, text)
    failed = [c.id for c in checks if not c.passed]
    _sidecar(cfg, {"suite": suite, "failed": failed}, {"verify": t1 - t0})
    return 1 if failed else 0


COMMANDS = {
    "sinogram": cmd_sinogram,
    "backproject": cmd_backproject,
    "reconstruct": cmd_reconstruct,
    "range": cmd_range,
    "attenuate": cmd_attenuate,
    "asymptotics": cmd_asymptotics,
    "verify": cmd_verify,
}

COMMON = {f.name for f in fields(RunConfig)} - {"command", "options"}


# ----------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model and discretisation")
    g.add_argument("--config", help="JSON file with default values for any option")
    g.add_argument("--kappa", type=float, default=None)
    g.add_argument("--radius", type=float, default=None)
    g.add_argument("--gamma", type=float, default=None)
    g.add_argument("--degree", type=int, default=None)
    g.add_argument("--grid-beta", dest="grid_beta", type=int, default=None)
    g.add_argument("--grid-alpha", dest="grid_alpha", type=int, default=None)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--workers", type=int, default=None, help="threads (default: all cores)")
    g.add_argument("--out", default=None, help="output file (default: stdout)")
    g.add_argument("--timings", action="store_true", default=None,
                   help="record timings in the sidecar (breaks byte-identical reruns)")
    g.add_argument("--normalization", choices=("hat", "raw"), default=None)

    p = argparse.ArgumentParser(prog="xrdisk", description="X-ray transforms on constant curvature disks")
    p.add_argument("--version", action="version", version=f"xrdisk {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sinogram", parents=[common], help="synthesise a sinogram from a phantom")
    s.add_argument("--phantom", help="constant[:c] | gaussian[:w[,x,y]] | zernike:n,k | dgamma:p | file:PATH")
    s.add_argument("--n-u", dest="n_u", type=int, help="time quadrature nodes per geodesic")

    s = sub.add_parser("backproject", parents=[common], help="weighted backprojection of a sinogram file")
    s.add_argument("--input", help="sinogram file")
    s.add_argument("--n-fiber", dest="n_fiber", type=int)

    s = sub.add_parser("reconstruct", parents=[common], help="SVD reconstruction from a sinogram file")
    s.add_argument("--input", help="sinogram file")
    s.add_argument("--filter", choices=("none", "truncate", "tikhonov"))
    s.add_argument("--lam", type=float)
    s.add_argument("--noise", type=float, help="add Gaussian noise of this size (uses --seed)")
    s.add_argument("--truth", help="phantom spec for error reporting")
    s.add_argument("--sobolev-s", dest="sobolev_s", type=float)
    s.add_argument("--lam-sweep", dest="lam_sweep", type=float, nargs="+")

    s = sub.add_parser("range", parents=[common], help="project a sinogram onto the range")
    s.add_argument("--input", help="sinogram file")

    s = sub.add_parser("attenuate", parents=[common], help="attenuated transform of a phantom")
    s.add_argument("--phantom")
    s.add_argument("--attenuation", help="JSON attenuation descriptor (default: scalar bump)")
    s.add_argument("--steps", type=int)
    s.add_argument("--probe", action="store_true", default=None,
                   help="also report sigma_min and condition of the normal operator")

    s = sub.add_parser("asymptotics", parents=[common], help="boundary expansion checks")
    s.add_argument("--check", choices=("i0", "index", "normal"))
    s.add_argument("--log-power", dest="log_power", type=int)
    s.add_argument("--weight", choices=("none", "1/tau"))
    s.add_argument("--input-class", dest="input_class", choices=("one", "inv_sqrt", "log"))

    s = sub.add_parser("verify", parents=[common], help="run verification suites")
    s.add_argument("--suite", choices=("identity", "svd", "range", "attenuated", "asymptotics", "all"))
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    merged = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        merged.update({k.replace("-", "_"): v for k, v in loaded.items()})
    flags = {k: v for k, v in vars(args).items() if v is not None and k not in ("config", "command")}
    merged.update(flags)
    common = {k: merged.pop(k) for k in list(merged) if k in COMMON}
    try:
        cfg = RunConfig(args.command, **common, options=merged)
        cfg.kappa, cfg.radius, cfg.gamma = float(cfg.kappa), float(cfg.radius), float(cfg.gamma)
        cfg.degree, cfg.grid_beta, cfg.grid_alpha = int(cfg.degree), int(cfg.grid_beta), int(cfg.grid_alpha)
        cfg.seed = int(cfg.seed)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid configuration: {e}") from None
    if cfg.workers is None:
        cfg.workers = os.cpu_count() or 1
    return cfg.validate()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[cfg.command](cfg)
    except ConfigError as e:
        print(f"xrdisk: config error: {e}", file=sys.stderr)
        return 2
    except XRDiskError as e:
        print(f"xrdisk: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
