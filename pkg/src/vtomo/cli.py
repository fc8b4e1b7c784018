"""Command-line driver: ``vtomo <subcommand> ...``.

Every subcommand prints a one-line JSON summary on stdout (``verify`` also
prints a tab-separated metric table).  Errors go to stderr as JSON and map
to exit codes 1 (usage/config), 2 (I/O), 3 (numerical) and 4 (a ``verify``
metric failed).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import experiments, fileio, phantoms, plotting
from .decomposition import helmholtz_dirichlet, helmholtz_global
from .errors import ConfigError, FieldIOError, VtomoError
from .fields import CovectorField, Grid, MatrixField, ScalarField
from .geometry import LineGrid, Rect, partial_mask, region_from_json
from .normal import (
    DEFAULT_PAD,
    InversionConstants,
    invert_scalar,
    normal_matrix,
    normal_oneform,
    normal_oneform_composition,
    normal_scalar,
    normal_scalar_composition,
    recover_solenoidal,
)
from .projector import (
    Sinogram,
    backproject_matrix,
    backproject_oneform,
    backproject_scalar,
    xray_matrix,
    xray_oneform,
    xray_scalar,
    xray_transverse,
)

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL, EXIT_FAIL = 0, 1, 2, 3, 4


@dataclass
class RunConfig:
    """Settings shared by all subcommands; a JSON file supplies them, flags override."""

    N: int = 128
    lo: float = -1.0
    hi: float = 1.0
    n_angles: int = 360
    n_offsets: int = 256
    s_max: float = math.sqrt(2.0)
    pad: int = DEFAULT_PAD
    seed: int = 0
    family_size: int = 5
    tolerances: dict = field(default_factory=dict)
    V: dict | None = None
    C: dict | None = None
    phantom: dict | None = None
    output_dir: str = "."

    @classmethod
    def load(cls, path: str | None, overrides: dict) -> "RunConfig":
        data = {}
        if path:
            try:
                data = json.loads(Path(path).read_text())
            except OSError as exc:
                raise FieldIOError(f"cannot read config {path}: {exc}") from exc
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
            if not isinstance(data, dict):
                raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        self.grid
        self.lines
        if self.pad < 1:
            raise ConfigError("pad must be >= 1")
        for key in ("V", "C"):
            d = getattr(self, key)
            if d is not None:
                region_from_json(d)
        self.experiment_config()

    @property
    def grid(self) -> Grid:
        return Grid(self.N, self.lo, self.hi)

    @property
    def lines(self) -> LineGrid:
        return LineGrid(self.n_angles, self.n_offsets, self.s_max)

    def experiment_config(self) -> experiments.ExperimentConfig:
        if (self.lo, self.hi) != (-1.0, 1.0):
            raise ConfigError("experiments run on the default domain [-1, 1]^2")
        return experiments.ExperimentConfig(self.N, self.n_angles, self.n_offsets, self.s_max, self.pad,
                                            self.seed, self.family_size, dict(self.tolerances), self.V, self.C)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--N", type=int, dest="N")
    p.add_argument("--n-angles", type=int, dest="n_angles")
    p.add_argument("--n-offsets", type=int, dest="n_offsets")
    p.add_argument("--s-max", type=float, dest="s_max")
    p.add_argument("--pad", type=int)
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="vtomo", description="X-ray and Doppler tomography of one-forms on a planar grid.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("phantom", help="write an analytic phantom")
    _common(p)
    p.add_argument("kind", nargs="?", help=f"named default phantom ({', '.join(phantoms.KINDS)})")
    p.add_argument("--spec", help="PhantomSpec JSON file (overrides kind)")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("forward", help="field -> sinogram")
    _common(p)
    p.add_argument("input")
    p.add_argument("--op", choices=("x0", "x1", "xa", "xperp"), required=True)
    p.add_argument("--matrix", help="matrix field file or JSON 2x2 list (for xa)")
    p.add_argument("--region", help="JSON region; keeps only the selected lines")
    p.add_argument("--mode", choices=("through", "avoiding"), default="through")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("adjoint", help="sinogram -> backprojected field")
    _common(p)
    p.add_argument("input")
    p.add_argument("--matrix", help="apply A^T after the one-form backprojection")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("normal", help="apply a normal operator")
    _common(p)
    p.add_argument("input")
    p.add_argument("--op", choices=("n0", "n1", "na"), required=True)
    p.add_argument("--method", choices=("kernel", "composition"), default="kernel")
    p.add_argument("--matrix")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("reconstruct", help="invert sinogram or normal-operator data")
    _common(p)
    p.add_argument("input")
    p.add_argument("--target", choices=("f", "fs"), required=True)
    p.add_argument("--constant", choices=("paper", "derived"), default="derived")
    p.add_argument("--window", choices=("none", "hann"), default=None,
                   help="filter apodisation (default: hann for sinograms, none for fields)")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("decompose", help="Helmholtz split f = f_s + d phi")
    _common(p)
    p.add_argument("input")
    p.add_argument("--flavor", choices=("global", "dirichlet"), default="global")
    p.add_argument("--rect", type=float, nargs=4, metavar=("X0", "Y0", "X1", "Y1"),
                   default=(-0.95, -0.95, 0.95, 0.95), help="Dirichlet rectangle")
    p.add_argument("-o", "--output", required=True, help="output prefix; writes <prefix>_fs.vt and <prefix>_phi.vt")

    p = sub.add_parser("verify", help="run a named experiment")
    _common(p)
    p.add_argument("name", help=f"one of {', '.join(experiments.EXPERIMENTS)} or 'all'")
    p.add_argument("--out", help="directory for the JSON report, TSV metrics and figures")
    p.add_argument("--figures", action="store_true", help="also render PNG figures")
    p.add_argument("--tol", action="append", default=[], metavar="KEY=VALUE", help="tolerance override")

    p = sub.add_parser("render", help="field or sinogram -> PGM/PPM")
    p.add_argument("input")
    p.add_argument("--component", type=int, help="render one component as PGM")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("info", help="dump a file header")
    p.add_argument("input")
    return ap


def _overrides(args) -> dict:
    return {k: getattr(args, k, None) for k in ("N", "n_angles", "n_offsets", "s_max", "pad", "seed")}


def _matrix(spec: str | None, grid: Grid) -> MatrixField:
    if spec is None:
        raise ConfigError("this operation needs --matrix")
    if spec.lstrip().startswith("["):
        try:
            return MatrixField.constant_matrix(grid, json.loads(spec))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad --matrix literal: {exc}") from exc
    A = fileio.read(spec, expect="matrix")
    if A.grid != grid:
        raise ConfigError("matrix field grid differs from the input grid")
    return A


def _emit(obj: dict) -> None:
    print(json.dumps(obj, sort_keys=True))


def cmd_phantom(args, cfg: RunConfig) -> int:
    if args.spec:
        try:
            spec = phantoms.PhantomSpec.from_json(Path(args.spec).read_text())
        except OSError as exc:
            raise FieldIOError(f"cannot read {args.spec}: {exc}") from exc
        except (TypeError, json.JSONDecodeError) as exc:
            raise ConfigError(f"bad phantom spec: {exc}") from exc
    elif cfg.phantom is not None:
        spec = phantoms.PhantomSpec.from_json(cfg.phantom)
    elif args.kind:
        spec = phantoms.default_spec(args.kind)
    else:
        raise ConfigError("give a phantom kind or --spec")
    out = phantoms.make(spec, cfg.grid)
    path = Path(args.output)
    written = []
    if isinstance(out, tuple):
        g_path = path.with_name(f"{path.stem}_g{path.suffix}")
        written.append(str(fileio.write(out[0], g_path)))
        written.append(str(fileio.write(out[1], path)))
    else:
        written.append(str(fileio.write(out, path)))
    _emit({"command": "phantom", "kind": spec.kind, "written": written})
    return EXIT_OK


def cmd_forward(args, cfg: RunConfig) -> int:
    f = fileio.read(args.input)
    lines = cfg.lines
    if args.op == "x0":
        if not isinstance(f, ScalarField):
            raise ConfigError("x0 needs a scalar field")
        sino = xray_scalar(f, lines)
    else:
        if not isinstance(f, CovectorField):
            raise ConfigError(f"{args.op} needs a covector field")
        if args.op == "x1":
            sino = xray_oneform(f, lines)
        elif args.op == "xperp":
            sino = xray_transverse(f, lines)
        else:
            sino = xray_matrix(_matrix(args.matrix, f.grid), f, lines)
    if args.region:
        sino = sino.with_mask(partial_mask(lines, region_from_json(json.loads(args.region)), args.mode))
    fileio.write(sino, args.output)
    _emit({"command": "forward", "op": args.op, "written": args.output,
           "max_abs": float(np.abs(sino.values).max())})
    return EXIT_OK


def cmd_adjoint(args, cfg: RunConfig) -> int:
    sino = fileio.read(args.input, expect="sinogram")
    grid = cfg.grid
    if args.matrix:
        out = backproject_matrix(_matrix(args.matrix, grid), sino)
    elif sino.kind == "scalar":
        out = backproject_scalar(sino, grid)
    else:
        out = backproject_oneform(sino, grid)
    fileio.write(out, args.output)
    _emit({"command": "adjoint", "written": args.output})
    return EXIT_OK


def cmd_normal(args, cfg: RunConfig) -> int:
    f = fileio.read(args.input)
    if args.op == "n0":
        if not isinstance(f, ScalarField):
            raise ConfigError("n0 needs a scalar field")
        out = normal_scalar(f, cfg.pad) if args.method == "kernel" else normal_scalar_composition(f, cfg.lines)
    else:
        if not isinstance(f, CovectorField):
            raise ConfigError(f"{args.op} needs a covector field")
        if args.op == "n1":
            out = normal_oneform(f, cfg.pad) if args.method == "kernel" else normal_oneform_composition(f, cfg.lines)
        else:
            A = _matrix(args.matrix, f.grid)
            if args.method == "kernel":
                out = normal_matrix(A, f, cfg.pad)
            else:
                out = backproject_matrix(A, xray_matrix(A, f, cfg.lines))
    fileio.write(out, args.output)
    _emit({"command": "normal", "op": args.op, "method": args.method, "written": args.output})
    return EXIT_OK


def cmd_reconstruct(args, cfg: RunConfig) -> int:
    obj = fileio.read(args.input)
    k = InversionConstants(active=args.constant)
    grid = cfg.grid
    if isinstance(obj, Sinogram):
        window = "hann" if args.window is None else (None if args.window == "none" else args.window)
        pgrid = grid.padded(cfg.pad)
        if args.target == "f":
            if obj.kind != "scalar":
                raise ConfigError("target f needs a scalar sinogram")
            out = invert_scalar(backproject_scalar(obj, pgrid), k, grid, cfg.pad, window)
        else:
            if obj.kind != "oneform":
                raise ConfigError("target fs needs a one-form sinogram")
            out = recover_solenoidal(backproject_oneform(obj, pgrid), k, grid, cfg.pad, window)
    else:
        window = None if args.window in (None, "none") else args.window
        if args.target == "f":
            if not isinstance(obj, ScalarField):
                raise ConfigError("target f needs N0 f (scalar field)")
            out = invert_scalar(obj, k, pad=cfg.pad, window=window)
        else:
            if not isinstance(obj, CovectorField):
                raise ConfigError("target fs needs N1 f (covector field)")
            out = recover_solenoidal(obj, k, pad=cfg.pad, window=window)
    fileio.write(out, args.output)
    _emit({"command": "reconstruct", "target": args.target, "constant": args.constant,
           "c0": k.c0, "c1": k.c1, "written": args.output})
    return EXIT_OK


def cmd_decompose(args, cfg: RunConfig) -> int:
    f = fileio.read(args.input, expect="covector")
    if args.flavor == "global":
        dec = helmholtz_global(f, cfg.pad)
    else:
        x0, y0, x1, y1 = args.rect
        dec = helmholtz_dirichlet(f, Rect((x0, y0), (x1, y1)))
    prefix = Path(args.output)
    fs_path = prefix.with_name(prefix.name + "_fs.vt")
    phi_path = prefix.with_name(prefix.name + "_phi.vt")
    fileio.write(dec.f_s, fs_path)
    fileio.write(dec.phi, phi_path)
    _emit({"command": "decompose", "flavor": dec.flavor, "residual": dec.residual,
           "iterations": dec.iterations, "written": [str(fs_path), str(phi_path)]})
    return EXIT_OK


def _parse_tols(items: list[str]) -> dict:
    out = {}
    for item in items:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--tol expects KEY=VALUE, got {item!r}")
        try:
            out[key] = float(val)
        except ValueError as exc:
            raise ConfigError(f"tolerance {key} is not a number") from exc
    return out


def metrics_tsv(report: dict) -> str:
    rows = ["experiment\tlabel\tvalue\ttol\tbound\tpass"]
    for m in report["metrics"]:
        rows.append(f"{report['name']}\t{m['label']}\t{m['value']:.6e}\t{m['tol']:.3e}\t{m['bound']}\t"
                    f"{'PASS' if m['pass'] else 'FAIL'}")
    return "\n".join(rows) + "\n"


def _figures(rep: experiments.ExperimentReport, out: Path, lines: LineGrid) -> list[str]:
    paths = [plotting.metrics_figure(rep.to_json(), out / f"{rep.name}_metrics.png")]
    v = rep.values
    if "sinogram" in v:
        paths.append(plotting.sinogram_figure(v["sinogram"], lines.s_max, out / f"{rep.name}_sinogram.png",
                                              v.get("mask"), rep.name))
    if "full" in v:
        f = v["full"]
        paths.append(plotting.field_figure(f.components, f.grid.domain, out / f"{rep.name}_field.png",
                                           ["recovered $f_1$", "recovered $f_2$"]))
    if "lhs" in v:
        paths.append(plotting.field_figure(np.stack([v["lhs"], v["rhs"]]), [[-1, 1], [-1, 1]],
                                           out / f"{rep.name}_sides.png", ["curl N1 f", "N0 curl f"]))
    return [str(p) for p in paths]


def cmd_verify(args, cfg: RunConfig) -> int:
    tols = dict(cfg.tolerances)
    tols.update(_parse_tols(args.tol))
    cfg.tolerances = tols
    ecfg = cfg.experiment_config()
    names = list(experiments.EXPERIMENTS) if args.name == "all" else [args.name]
    for n in names:
        if n not in experiments.EXPERIMENTS:
            raise ConfigError(f"unknown experiment {n!r}; choose from {sorted(experiments.EXPERIMENTS)} or all")
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    all_pass = True
    summary = []
    for n in names:
        rep = experiments.run_named(n, ecfg)
        data = rep.to_json()
        tsv = metrics_tsv(data)
        sys.stdout.write(tsv)
        (out / f"{n}.json").write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
        (out / f"{n}.tsv").write_text(tsv)
        written = [str(out / f"{n}.json"), str(out / f"{n}.tsv")]
        if args.figures:
            written += _figures(rep, out, ecfg.lines)
        all_pass &= rep.passed
        summary.append({"name": n, "pass": rep.passed, "written": written})
    _emit({"command": "verify", "pass": all_pass, "reports": summary})
    return EXIT_OK if all_pass else EXIT_FAIL


def cmd_render(args, cfg) -> int:
    obj = fileio.read(args.input)
    data = obj.values[None] if isinstance(obj, Sinogram) else obj.data
    if args.component is not None:
        if not 0 <= args.component < data.shape[0]:
            raise ConfigError(f"component {args.component} out of range (0..{data.shape[0] - 1})")
        meta = plotting.write_pgm(data[args.component], args.output)
    elif data.shape[0] == 1:
        meta = plotting.write_pgm(data[0], args.output)
    elif data.shape[0] <= 3:
        meta = plotting.write_ppm(data, args.output)
    else:
        raise ConfigError("matrix fields need --component")
    _emit({"command": "render", "written": args.output, **meta})
    return EXIT_OK


def cmd_info(args, cfg) -> int:
    _emit({"command": "info", **fileio.info(args.input)})
    return EXIT_OK


COMMANDS = {
    "phantom": cmd_phantom,
    "forward": cmd_forward,
    "adjoint": cmd_adjoint,
    "normal": cmd_normal,
    "reconstruct": cmd_reconstruct,
    "decompose": cmd_decompose,
    "verify": cmd_verify,
    "render": cmd_render,
    "info": cmd_info,
}


def run(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = None
        if hasattr(args, "config"):
            cfg = RunConfig.load(args.config, _overrides(args))
        return COMMANDS[args.command](args, cfg)
    except VtomoError as exc:
        err = {"error": exc.kind, "message": str(exc)}
        if getattr(exc, "line_index", None) is not None:
            err["line_index"] = list(exc.line_index)
        print(json.dumps(err), file=sys.stderr)
        return exc.exit_code
    except (TypeError, ValueError) as exc:
        print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(json.dumps({"error": "io", "message": str(exc)}), file=sys.stderr)
        return EXIT_IO


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
