"""Command-line interface: ``abelradon <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .abel import (AbelError, AbelSolveOptions, KernelValidationError, abel_forward_apply,
                   abel_solve, constant_kernel, power_sum_kernel, validate_kernel)
from .experiments import (ExperimentManifest, Simulation, cell_label, reconstruct, simulate,
                          table_manifests)
from .grids import Grid1D, Image, Sinogram
from .phantoms import make_phantom
from .selftest import format_report, run_checks
from .spectral import (ellipse_abel_spec, generalized_kernel, sar_nu, sar_nu_dw,
                       spherical_means_spec, surface_abel_spec)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2

log = logging.getLogger("abelradon")


class UsageError(Exception):
    pass


# flag name -> manifest key
FLAG_KEYS = {
    "phantom": "phantom.kind", "m": "phantom.m", "phantom_seed": "phantom.seed",
    "curve": "curve.kind", "s": "curve.s",
    "gamma": "noise.gamma", "epsilon": "noise.epsilon", "noise_seed": "noise.seed",
    "lam": "recon.lambda", "beta_smooth": "recon.beta_smooth", "max_iters": "recon.max_iters",
    "tol": "recon.tol", "nonneg": "recon.nonneg", "seed": "recon.seed",
    "tv_form": "recon.tv_form", "sweep": "recon.sweep",
    "method": "method", "output_dir": "output_dir",
}


def _add_manifest_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", type=Path, help="key=value manifest file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any manifest key (repeatable)")
    g = p.add_argument_group("manifest shortcuts")
    g.add_argument("--phantom", choices=["annulus", "ellipses", "smooth"])
    g.add_argument("--m", type=int)
    g.add_argument("--phantom-seed", type=int)
    g.add_argument("--curve", choices=["ellipse", "hyperbola"])
    g.add_argument("--s", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--noise-seed", type=int)
    g.add_argument("--method", choices=["cgls", "tv", "spectral"])
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--beta-smooth", type=float)
    g.add_argument("--max-iters", type=int)
    g.add_argument("--tol", type=float)
    g.add_argument("--nonneg", action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--seed", type=int)
    g.add_argument("--tv-form", choices=["isotropic", "global"])
    g.add_argument("--sweep", action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--output-dir")


def manifest_from_args(args) -> ExperimentManifest:
    entries: dict[str, str] = {}
    if args.manifest is not None:
        try:
            entries.update(io.read_manifest(args.manifest))
        except OSError as exc:
            raise UsageError(f"cannot read manifest: {exc}") from exc
    for flag, key in FLAG_KEYS.items():
        v = getattr(args, flag, None)
        if v is not None:
            entries[key] = str(v).lower() if isinstance(v, bool) else str(v)
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        entries[k.strip()] = v.strip()
    try:
        return ExperimentManifest.from_entries(entries)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"invalid manifest: {exc}") from exc


def _provenance(man: ExperimentManifest) -> dict[str, str]:
    from . import __version__
    out = man.to_entries()
    out["artifact.version"] = __version__
    out["numpy.version"] = np.__version__
    return out


def _sinogram_of(sim: Simulation) -> Sinogram:
    c = sim.clean
    return Sinogram(c.p_axis, c.y_axis, sim.data.reshape(c.values.shape), c.j, c.s)


# ---------------------------------------------------------------- commands

def cmd_simulate(args) -> int:
    man = manifest_from_args(args)
    out = Path(man.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    sim = simulate(man)
    io.write_image_csv(out / "phantom.csv", sim.phantom)
    io.write_pgm(out / "phantom.pgm", sim.phantom)
    io.write_sinogram_csv(out / "sinogram_clean.csv", sim.clean)
    io.write_sinogram_csv(out / "sinogram_data.csv", _sinogram_of(sim))
    io.write_manifest(out / "manifest.txt", _provenance(man))
    print(f"wrote phantom, clean and noisy sinograms to {out}")
    return EXIT_OK


def _load_or_simulate(man: ExperimentManifest) -> Simulation:
    out = Path(man.output_dir)
    data_file, ph_file, clean_file = (out / "sinogram_data.csv", out / "phantom.csv",
                                      out / "sinogram_clean.csv")
    if data_file.exists() and ph_file.exists() and clean_file.exists():
        saved = out / "manifest.txt"
        if saved.exists():
            prev = io.read_manifest(saved)
            cur = man.to_entries()
            keys = [k for k in cur if k.startswith(("phantom.", "curve.", "noise."))]
            if any(prev.get(k) != cur[k] for k in keys):
                log.info("saved data were simulated with a different manifest; re-simulating")
                return simulate(man)
        data = io.read_sinogram_csv(data_file)
        return Simulation(io.read_image_csv(ph_file), io.read_sinogram_csv(clean_file),
                          data.values.ravel())
    return simulate(man)


def cmd_reconstruct(args) -> int:
    man = manifest_from_args(args)
    out = Path(man.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    sim = _load_or_simulate(man)
    res = reconstruct(man, sim)
    io.write_image_csv(out / f"recon_{man.method}.csv", res.image)
    io.write_pgm(out / f"recon_{man.method}.pgm", res.image)
    if res.result is not None:
        res.result.log.write_csv(out / f"iterations_{man.method}.csv")
    if res.sweep_rows:
        io.write_rows_csv(out / f"sweep_{man.method}.csv",
                          ["lambda", "delta", "iterations", "flag"], res.sweep_rows)
    io.write_rows_csv(out / f"metrics_{man.method}.csv",
                      ["method", "delta", "lambda", "iterations", "flag", "runtime_s"],
                      [[man.method, res.delta, res.lam, res.iterations, res.flag, res.runtime]])
    io.write_manifest(out / f"manifest_{man.method}.txt", _provenance(man))
    print(f"{cell_label(man)}: delta={res.delta:.4f} lambda={res.lam:.3g} "
          f"iterations={res.iterations} flag={res.flag} ({res.runtime:.1f}s)")
    return EXIT_NUMERIC if res.flag in ("breakdown", "line_search") else EXIT_OK


def cmd_sweep_lambda(args) -> int:
    args.sweep = True
    return cmd_reconstruct(args)


def cmd_table(args) -> int:
    methods = tuple(args.methods.split(","))
    for meth in methods:
        if meth not in ("cgls", "tv"):
            raise UsageError(f"table methods are cgls and tv, got {meth!r}")
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    sims: dict[tuple, Simulation] = {}
    for man in table_manifests(args.m, methods, args.sweep, str(out)):
        key = (man.phantom, man.curve, man.noise)
        if key not in sims:
            sims[key] = simulate(man)
        res = reconstruct(man, sims[key])
        label = cell_label(man)
        print(f"{label:28s} delta={res.delta:.3f} lambda={res.lam:.3g} "
              f"iters={res.iterations} {res.flag} ({res.runtime:.0f}s)", flush=True)
        rows.append([man.method, man.phantom.kind, man.curve.j, man.noise.gamma,
                     res.delta, res.lam, res.iterations, res.flag, res.runtime])
    io.write_rows_csv(out / "table.csv", ["method", "phantom", "j", "gamma", "delta", "lambda",
                                          "iterations", "flag", "runtime_s"], rows)
    return EXIT_OK


def kernel_from_args(args):
    fam = args.family
    try:
        if fam == "constant":
            return constant_kernel(args.j, args.alpha, args.value)
        if fam == "power":
            return power_sum_kernel(args.j, args.alpha, args.exponent, args.value)
        if fam == "ellipse2d":
            return ellipse_abel_spec(args.j, args.s, args.xi)
        if fam == "surface":
            return surface_abel_spec(args.j, args.s, abs(args.xi), args.n)
        if fam == "sar":
            return generalized_kernel(1, sar_nu(args.h, args.d), args.n, abs(args.xi),
                                      nu_dw=sar_nu_dw(args.h, args.d))
        if fam == "spherical-means":
            return spherical_means_spec(args.l, args.n)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    raise UsageError(f"unknown kernel family {fam!r}")


def cmd_invert_abel(args) -> int:
    spec = kernel_from_args(args)
    if args.data is not None:
        try:
            pts, g = io.read_profile_csv(args.data)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read data profile: {exc}") from exc
        if pts.size < 8:
            raise UsageError("data profile needs at least 8 samples")
        grid = Grid1D(float(pts[0]), float(pts[-1]), pts.size)
        if np.max(np.abs(grid.points - pts)) > 1e-8 * max(1.0, abs(pts).max()):
            raise UsageError("data samples must be uniformly spaced")
        f_true = None
    else:
        grid = Grid1D(args.lo, args.hi, args.count)
        x = grid.points
        # vanishes to fourth order at both ends, like a compactly supported profile
        u = (x - grid.lo) / (grid.hi - grid.lo)
        f_true = np.sin(np.pi * u) ** 4 * (1 + 0.3 * np.sin(x))
        g = abel_forward_apply(spec, f_true, grid)
    report = validate_kernel(spec, grid)
    print(report.summary())
    if not report.passed:
        return EXIT_NUMERIC
    if args.refine < 0:
        raise UsageError("--refine must be >= 0")
    opts = AbelSolveOptions(method=args.method, smooth=args.smooth, refine=args.refine)
    f = abel_solve(spec, g, grid, opts)
    resid = abel_forward_apply(spec, f, grid)
    rel = float(np.linalg.norm(resid - g) / max(np.linalg.norm(g), 1e-300))
    print(f"residual ||A f - g|| / ||g|| = {rel:.3e}")
    if f_true is not None:
        print(f"error ||f - f_true|| / ||f_true|| = "
              f"{np.linalg.norm(f - f_true) / np.linalg.norm(f_true):.3e}")
    if args.output is not None:
        io.write_rows_csv(args.output, ["p", "f", "g", "forward_f"],
                          zip(map(float, grid.points), map(float, f), map(float, g),
                              map(float, resid)))
    return EXIT_OK if np.all(np.isfinite(f)) else EXIT_NUMERIC


def cmd_selftest(args) -> int:
    results = run_checks()
    print(format_report(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="abelradon", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write phantom, clean and noisy sinograms")
    _add_manifest_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="reconstruct from simulated data")
    _add_manifest_flags(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("sweep-lambda", help="reconstruct over the lambda grid, keep the best")
    _add_manifest_flags(p)
    p.set_defaults(func=cmd_sweep_lambda)

    p = sub.add_parser("table", help="phantom x curve x noise x solver table")
    p.add_argument("--m", type=int, default=257)
    p.add_argument("--methods", default="cgls,tv")
    p.add_argument("--sweep", action="store_true", help="run the lambda sweep per cell")
    p.add_argument("--output-dir", default="out/table")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("invert-abel", help="solve one generalized Abel equation")
    p.add_argument("--family", default="constant",
                   choices=["constant", "power", "ellipse2d", "surface", "sar", "spherical-means"])
    p.add_argument("--j", type=int, default=0, choices=[0, 1])
    p.add_argument("--alpha", type=float, default=-0.5)
    p.add_argument("--value", type=float, default=1.0, help="constant / scale factor")
    p.add_argument("--exponent", type=float, default=1.0, help="power family: (p+w)^e")
    p.add_argument("--s", type=float, default=2.0)
    p.add_argument("--xi", type=float, default=0.0)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--l", type=int, default=0)
    p.add_argument("--h", type=float, default=5.0)
    p.add_argument("--d", type=float, default=2.0)
    p.add_argument("--data", type=Path, help="CSV with header and columns p,g")
    p.add_argument("--lo", type=float, default=1.0)
    p.add_argument("--hi", type=float, default=3.0)
    p.add_argument("--count", type=int, default=257)
    p.add_argument("--method", default="substitution", choices=["substitution", "neumann"])
    p.add_argument("--smooth", action="store_true")
    p.add_argument("--refine", type=int, default=1,
                   help="defect-correction passes against the discrete forward model")
    p.add_argument("--output", type=Path)
    p.set_defaults(func=cmd_invert_abel)

    p = sub.add_parser("selftest", help="run the invariant suite")
    p.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KernelValidationError as exc:
        print(exc.report.summary(), file=sys.stderr)
        return EXIT_NUMERIC
    except (AbelError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
