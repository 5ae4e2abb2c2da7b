"""Batch command line interface.

Mode numbers on the command line are one-based (``--gamma 12`` means the
first two modes); they are converted to zero-based numpy axes here and
nowhere else.

Exit codes: 0 success, 2 bad arguments, 3 I/O failure, 4 numeric
divergence, 5 iteration cap reached without convergence (outputs are
still written and the manifest is flagged).
"""

import argparse
import csv
import json
import logging
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .admm import DivergenceError, Mode, SolverConfig, rlrtc_solve
from .experiments import (
    MetricsRecord,
    SyntheticSpec,
    ablation,
    add_outliers,
    add_salt_pepper,
    desk_phase_grid,
    ergas,
    foreground_mask,
    gen_bernoulli_mask,
    gen_synthetic,
    p_sensitivity,
    phase_transition,
    precision_recall_f,
    psnr,
    relative_error,
)
from .io import (
    TensorFileError,
    file_digest,
    read_frames,
    read_image,
    read_mask,
    read_tensor,
    write_frames,
    write_image,
    write_tensor,
)
from .shrinkage import ConvergenceError
from .transforms import Family

EXIT_OK, EXIT_ARGS, EXIT_IO, EXIT_DIVERGED, EXIT_NOT_CONVERGED = 0, 2, 3, 4, 5

log = logging.getLogger("twctv")


class UsageError(Exception):
    pass


def _parse_gamma(text):
    if text == "auto":
        return None
    try:
        modes = sorted({int(ch) for ch in text})
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid --gamma {text!r}") from None
    if not modes or any(m not in (1, 2, 3) for m in modes):
        raise argparse.ArgumentTypeError("--gamma takes digits from 1-3, e.g. 12 or 123, or 'auto'")
    return tuple(m - 1 for m in modes)


def _parse_lambda(text):
    if text == "auto":
        return None
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("--lambda must be positive or 'auto'")
    return value


def _parse_shape(text):
    try:
        shape = tuple(int(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid shape {text!r}") from None
    if len(shape) < 3 or min(shape) < 1:
        raise argparse.ArgumentTypeError("shape needs at least three positive extents")
    return shape


def _solver_flags(p):
    g = p.add_argument_group("solver")
    g.add_argument("--transform", choices=[f.value for f in Family], default="dct")
    g.add_argument("--p", type=float, default=0.9, help="Schatten exponent in (0, 1]")
    g.add_argument("--lambda", dest="lam", type=_parse_lambda, default=None, metavar="REAL|auto")
    g.add_argument("--rho", type=float, default=1.1)
    g.add_argument("--mu0", type=float, default=1e-4)
    g.add_argument("--mu-max", type=float, default=1e10)
    g.add_argument("--tol", type=float, default=1e-8)
    g.add_argument("--max-iters", type=int, default=500)
    g.add_argument("--c-e", type=float, default=2.0)
    g.add_argument("--sigmoid-m", type=float, default=10.0)
    g.add_argument("--gamma", type=_parse_gamma, default=None, metavar="12|123|auto")
    g.add_argument("--weights", choices=["adaptive", "uniform"], default="adaptive")
    g.add_argument("--plain-l1", action="store_true", help="unweighted l1 on the sparse term")
    g.add_argument("--zero-unobserved", action="store_true", help="rlrtc: hold E at zero off the mask")


def _common_flags(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None, help="cap on BLAS/FFT threads")
    p.add_argument("--deterministic", action="store_true", help="single-threaded, reproducible run")
    p.add_argument("--manifest", type=Path, default=None)
    p.add_argument("--quiet", action="store_true")


def _io_flags(p, mask=True):
    p.add_argument("--in", dest="input", type=Path, required=True)
    if mask:
        p.add_argument("--mask", type=Path, default=None)
        p.add_argument("--sampling-rate", type=float, default=None)
    p.add_argument("--ref", type=Path, default=None, help="ground truth for metrics")
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--sparse-out", type=Path, default=None)
    p.add_argument("--history", type=Path, default=None)
    p.add_argument("--format", choices=["tlt", "png"], default=None)
    p.add_argument("--peak", type=float, default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="twctv", description="TWCTV robust low-rank tensor completion")
    parser.add_argument("--version", action="version", version=f"twctv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, helptext in (
        ("complete", "tensor completion from a partial observation"),
        ("rpca", "tensor robust PCA on a fully observed tensor"),
        ("rlrtc", "robust completion: partial observation plus sparse corruption"),
    ):
        p = sub.add_parser(name, help=helptext)
        _io_flags(p, mask=name != "rpca")
        _solver_flags(p)
        _common_flags(p)
        if name != "complete":
            p.add_argument("--noise-level", type=float, default=0.0, help="corrupt the input before solving")
            p.add_argument(
                "--noise",
                choices=["saltpepper", "outliers"],
                default="saltpepper" if name == "rpca" else "outliers",
            )
            p.add_argument("--outlier-magnitude", type=float, default=0.4)

    p = sub.add_parser("synth", help="generate a low-tubal-rank tensor")
    p.add_argument("--shape", type=_parse_shape, required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--transform", choices=[f.value for f in Family], default="dct")
    p.add_argument("--out", type=Path, required=True)
    _common_flags(p)

    p = sub.add_parser("phase", help="phase transition over rank x sampling rate")
    p.add_argument("--preset", choices=["desk"], default="desk")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--baseline", action="store_true", help="also run the unweighted p=1 model")
    _solver_flags(p)
    _common_flags(p)

    p = sub.add_parser("psens", help="sensitivity to the Schatten exponent")
    p.add_argument("--shape", type=_parse_shape, default=(80, 80, 20))
    p.add_argument("--rank", type=int, default=5)
    p.add_argument("--sampling-rate", type=float, default=0.08)
    p.add_argument("--noise-level", type=float, default=0.02)
    p.add_argument("--outlier-magnitude", type=float, default=0.4)
    p.add_argument("--p-values", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--ablation", action="store_true", help="run weighted vs plain l1 instead")
    p.add_argument("--out", type=Path, required=True)
    _solver_flags(p)
    _common_flags(p)

    p = sub.add_parser("metrics", help="compare an estimate against a reference")
    p.add_argument("--ref", type=Path, required=True)
    p.add_argument("--est", type=Path, required=True)
    p.add_argument("--peak", type=float, default=None)
    p.add_argument("--band-axis", type=int, default=3, help="one-based mode holding ERGAS bands")
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("foreground", help="foreground masks from a video via TRPCA")
    p.add_argument("--in", dest="input", type=Path, required=True, help=".tlt video or a directory of PNG frames")
    p.add_argument("--sparse", action="store_true", help="input already is the sparse component")
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--truth", type=Path, default=None)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--format", choices=["tlt", "png"], default="tlt")
    p.add_argument("--sparse-out", type=Path, default=None)
    p.add_argument("--history", type=Path, default=None)
    _solver_flags(p)
    _common_flags(p)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest_path", type=Path)
    return parser


def _config_from(args, mode):
    return SolverConfig(
        mode=mode,
        p=args.p,
        lam=args.lam,
        mu0=args.mu0,
        rho=args.rho,
        mu_max=args.mu_max,
        epsilon=args.tol,
        t_max=args.max_iters,
        c_E=args.c_e,
        sigmoid_m=args.sigmoid_m,
        axes=args.gamma,
        transform=args.transform,
        seed=args.seed,
        sv_weights=args.weights,
        sparse_weighting=not args.plain_l1,
        impute_unobserved=not args.zero_unobserved,
    )


def _load(path):
    path = Path(path)
    if path.is_dir():
        return read_frames(sorted(path.glob("*.png"))), "png"
    if path.suffix.lower() == ".png":
        return read_image(path), "png"
    return read_tensor(path), "tlt"


def _save(path, X, fmt):
    path = Path(path)
    if path.parent:
        path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "png":
        if X.ndim == 3 and X.shape[2] in (1, 3) and path.suffix.lower() == ".png":
            write_image(path, X)
        else:
            write_frames(path, X)
    else:
        write_tensor(path, X)


def _write_history(path, result):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "dx_inf", "de_inf", "feas_inf", "mu", "seconds", "rel_dx", "rel_de"])
        for r in result.history:
            w.writerow([r.t, repr(r.dx_inf), repr(r.de_inf), repr(r.feas_inf), repr(r.mu), f"{r.seconds:.6f}", repr(r.rel_dx), repr(r.rel_de)])


def _metrics(est, ref, peak):
    rec = MetricsRecord(relative_error=relative_error(est, ref) if np.any(ref) else None, psnr=psnr(est, ref, peak))
    if est.ndim >= 3:
        with np.errstate(all="ignore"):
            val = ergas(est, ref, band_axis=2)
        rec.ergas = None if math.isnan(val) else val
    return rec


def _progress(quiet):
    if quiet:
        return None

    def emit(rec):
        if rec.t == 1 or rec.t % 25 == 0:
            print(
                f"iter {rec.t:4d}  dx={rec.dx_inf:.3e}  de={rec.de_inf:.3e}  feas={rec.feas_inf:.3e}  mu={rec.mu:.2e}  {rec.seconds:.1f}s",
                file=sys.stderr,
            )

    return emit


class _Run:
    """Collects manifest fields while a subcommand executes."""

    def __init__(self, args, argv):
        self.args = args
        self.manifest = {
            "tool": "twctv",
            "version": __version__,
            "command": args.command,
            "argv": list(argv),
            "seed": getattr(args, "seed", None),
            "deterministic": bool(getattr(args, "deterministic", False)),
            "inputs": {},
            "outputs": {},
        }
        self.t0 = time.perf_counter()

    def input(self, path):
        if path is not None and Path(path).is_file():
            self.manifest["inputs"][str(path)] = file_digest(path)

    def output(self, role, path):
        if path is not None:
            self.manifest["outputs"][role] = str(path)

    def finish(self):
        self.manifest["seconds"] = time.perf_counter() - self.t0
        if self.args.manifest is not None:
            self.args.manifest.parent.mkdir(parents=True, exist_ok=True)
            self.args.manifest.write_text(json.dumps(self.manifest, indent=2, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj))


def _solve_command(args, run):
    mode = {"complete": Mode.COMPLETION, "rpca": Mode.TRPCA, "rlrtc": Mode.RLRTC}[args.command]
    data, fmt = _load(args.input)
    run.input(args.input)
    fmt = args.format or fmt
    peak = args.peak if args.peak is not None else 1.0
    ref = None
    if args.ref is not None:
        ref, _ = _load(args.ref)
        run.input(args.ref)

    mask = None
    if mode is not Mode.TRPCA:
        if args.mask is not None and args.sampling_rate is not None:
            raise UsageError("give either --mask or --sampling-rate, not both")
        if args.mask is not None:
            mask = read_mask(args.mask, data.shape)
            run.input(args.mask)
        elif args.sampling_rate is not None:
            # the input is the clean tensor; sample it and score against it
            mask = gen_bernoulli_mask(data.shape, args.sampling_rate, args.seed + 1)
            ref = data if ref is None else ref
        else:
            raise UsageError(f"{args.command} needs --mask or --sampling-rate")

    observed = data
    level = getattr(args, "noise_level", 0.0)
    if level:
        if ref is None:
            ref = data
        if args.noise == "saltpepper":
            observed = add_salt_pepper(data, level, args.seed + 2)
        else:
            observed, _ = add_outliers(data, level, args.outlier_magnitude, args.seed + 2, support=mask)

    config = _config_from(args, mode)
    result = rlrtc_solve(observed, mask, config, callback=_progress(args.quiet))
    run.manifest["config"] = result.config.to_dict()
    run.manifest.update(iterations=result.iterations, converged=result.converged, timing=result.timings)

    if args.out is not None:
        _save(args.out, result.X, fmt)
        run.output("low_rank", args.out)
    if args.sparse_out is not None:
        _save(args.sparse_out, result.E, "tlt")
        run.output("sparse", args.sparse_out)
    if args.history is not None:
        _write_history(args.history, result)
        run.output("history", args.history)
    run.manifest["history"] = None if args.history is None else str(args.history)

    if ref is not None:
        metrics = _metrics(result.X, ref, peak)
        baseline = np.where(mask, observed, 0.0) if mask is not None else observed
        run.manifest["observed_psnr"] = _finite(psnr(baseline, ref, peak))
        run.manifest["metrics"] = metrics.to_dict()
    else:
        run.manifest["metrics"] = {}
    if mask is not None:
        run.manifest["residual_fro"] = float(np.linalg.norm(np.where(mask, observed - result.X - result.E, 0.0)))
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def _finite(x):
    return "inf" if math.isinf(x) else x


def _synth_command(args, run):
    spec = SyntheticSpec(args.shape, args.rank, args.transform, args.seed)
    M = gen_synthetic(spec)
    write_tensor(args.out, M)
    run.output("tensor", args.out)
    run.manifest["synthetic"] = {"shape": list(spec.shape), "rank": spec.rank, "transform": spec.transform.value}
    return EXIT_OK


def _phase_command(args, run):
    config = _config_from(args, Mode.COMPLETION)
    progress = None if args.quiet else (lambda r, s, c: print(f"rank {r} rate {s:.2f}: {c}", file=sys.stderr))
    grid = phase_transition(desk_phase_grid(args.trials), config, seed=args.seed, progress=progress)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(grid.to_csv())
    run.output("grid", args.out)
    run.manifest["config"] = config.to_dict()
    run.manifest["grid"] = grid.to_dict()
    if args.baseline:
        base = phase_transition(
            desk_phase_grid(args.trials), replace(config, p=1.0, sv_weights="uniform"), seed=args.seed, progress=progress
        )
        path = args.out.with_name(args.out.stem + "_baseline" + args.out.suffix)
        path.write_text(base.to_csv())
        run.output("baseline_grid", path)
        run.manifest["baseline_grid"] = base.to_dict()
    return EXIT_OK


def _psens_command(args, run):
    config = _config_from(args, Mode.RLRTC)
    common = dict(
        shape=args.shape,
        rank=args.rank,
        sampling_rate=args.sampling_rate,
        corruption=args.noise_level,
        magnitude=args.outlier_magnitude,
    )
    if args.ablation:
        rows = ablation(p=args.p, seeds=tuple(range(args.seed, args.seed + args.trials)), config=config, **common)
    else:
        ps = tuple(float(v) for v in args.p_values.split(","))
        rows = p_sensitivity(ps=ps, trials=args.trials, seed=args.seed, config=config, **common)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    run.output("table", args.out)
    run.manifest["config"] = config.to_dict()
    run.manifest["rows"] = rows
    return EXIT_OK


def _metrics_command(args, run):
    ref, fmt_ref = _load(args.ref)
    est, _ = _load(args.est)
    run.input(args.ref)
    run.input(args.est)
    if ref.shape != est.shape:
        raise UsageError(f"shape mismatch: {ref.shape} vs {est.shape}")
    peak = args.peak if args.peak is not None else 1.0
    rec = MetricsRecord(psnr=psnr(est, ref, peak))
    rec.relative_error = relative_error(est, ref) if np.any(ref) else None
    if ref.ndim >= 3:
        with np.errstate(all="ignore"):
            val = ergas(est, ref, band_axis=args.band_axis - 1)
        rec.ergas = None if math.isnan(val) else val
    out = rec.to_dict()
    text = json.dumps(out, indent=2)
    if args.out is not None:
        args.out.write_text(text + "\n")
    if not args.quiet:
        print(text)
    run.manifest["metrics"] = out
    return EXIT_OK


def _foreground_command(args, run):
    video, _ = _load(args.input)
    run.input(args.input)
    if args.sparse:
        E = video
        code = EXIT_OK
    else:
        config = _config_from(args, Mode.TRPCA)
        result = rlrtc_solve(video, None, config, callback=_progress(args.quiet))
        E = result.E
        run.manifest["config"] = result.config.to_dict()
        run.manifest.update(iterations=result.iterations, converged=result.converged)
        if args.sparse_out is not None:
            write_tensor(args.sparse_out, E)
            run.output("sparse", args.sparse_out)
        if args.history is not None:
            _write_history(args.history, result)
            run.output("history", args.history)
        code = EXIT_OK if result.converged else EXIT_NOT_CONVERGED
    masks = foreground_mask(E, args.window)
    if args.format == "png":
        write_frames(args.out, masks.astype(float), prefix="mask")
    else:
        write_tensor(args.out, masks.astype(float))
    run.output("masks", args.out)
    if args.truth is not None:
        truth, _ = _load(args.truth)
        run.input(args.truth)
        precision, recall, f = precision_recall_f(masks, truth > 0.5)
        run.manifest["metrics"] = {"precision": precision, "recall": recall, "f_measure": f}
        if not args.quiet:
            print(json.dumps(run.manifest["metrics"]))
    return code


def _replay(path):
    manifest = json.loads(Path(path).read_text())
    return main(manifest["argv"])


def _thread_limit(args):
    from threadpoolctl import threadpool_limits

    n = 1 if getattr(args, "deterministic", False) else getattr(args, "threads", None)
    return threadpool_limits(limits=n) if n else threadpool_limits(limits=None)


COMMANDS = {
    "complete": _solve_command,
    "rpca": _solve_command,
    "rlrtc": _solve_command,
    "synth": _synth_command,
    "phase": _phase_command,
    "psens": _psens_command,
    "metrics": _metrics_command,
    "foreground": _foreground_command,
}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ARGS
    if args.command == "replay":
        return _replay(args.manifest_path)
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    if not hasattr(args, "manifest"):
        args.manifest = None
    run = _Run(args, argv)
    try:
        with _thread_limit(args):
            code = COMMANDS[args.command](args, run)
    except (UsageError, ValueError) as exc:
        print(f"twctv {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except (TensorFileError, OSError) as exc:
        print(f"twctv {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DivergenceError, ConvergenceError, FloatingPointError) as exc:
        print(f"twctv {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    run.manifest["exit_code"] = code
    run.finish()
    if code == EXIT_NOT_CONVERGED:
        print(f"twctv {args.command}: iteration cap reached without convergence", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
