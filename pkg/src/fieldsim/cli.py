"""Command-line front end.

Subcommands: analytic, simulate, sweep, validate, fit, bench. Common
flags --seed / --config / --out / --format are accepted by every
subcommand; flag values win over config-file entries, which win over
defaults. The config file is flat ``key = value`` text, keys being the
long option names with dashes replaced by underscores.

Exit codes: 0 success, 2 usage or configuration error, 3 insufficient
data, 130 interrupted.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

import numpy as np

from fieldsim import __version__
from fieldsim.analytic import CoverMode, collision_probability_analytic
from fieldsim.batch import (
    Kernel,
    batch_pair_distances,
    naive_pair_distances,
    segment_batch,
)
from fieldsim.errors import FieldsimError, InvalidParameterError
from fieldsim.geometry import ArmGeometry, SafetyModel
from fieldsim.hexgrid import _axial_spiral, _pairs_within
from fieldsim.montecarlo import (
    Distribution,
    FinalChoice,
    SimConfig,
    run_simulation,
)
from fieldsim.regression import (
    RegressionSample,
    fit_ridge,
    r_squared,
    save_model,
    split_samples,
)
from fieldsim.report import render_heatmaps, write_rows
from fieldsim.sweep import (
    SimSettings,
    SweepRow,
    SweepSpec,
    compute_validation,
    iter_sweep_rows,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NO_DATA = 3
EXIT_INTERRUPT = 130


def _load_config(path: str | None) -> dict[str, str]:
    if path is None:
        return {}
    cfg: dict[str, str] = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidParameterError(
                f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        cfg[key.strip().replace("-", "_")] = value.strip()
    return cfg


class _Resolver:
    """Flag > config file > default resolution for one parsed command."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = _load_config(getattr(args, "config", None))

    def get(self, key: str, default, cast=None):
        value = getattr(self.args, key, None)
        if value is not None:
            return value
        if key in self.config:
            raw = self.config[key]
            if cast is bool:
                return raw.lower() in ("1", "true", "yes", "on")
            return (cast or str)(raw)
        return default


def _geometry(res: _Resolver, l1: float, l2: float) -> ArmGeometry:
    return ArmGeometry(l1, l2)


def _kernel(res: _Resolver) -> Kernel:
    kind = res.get("kernel", "discrete")
    samples = int(res.get("samples", 64, int))
    if kind == "exact":
        return Kernel.exact()
    if kind == "discrete":
        return Kernel.discrete(samples)
    raise InvalidParameterError(f"unknown kernel {kind!r}")


def _distribution(name: str) -> Distribution:
    for member in Distribution:
        if member.value == name:
            return member
    raise InvalidParameterError(f"unknown distribution {name!r}")


def _final_choice(name: str) -> FinalChoice:
    for member in FinalChoice:
        if member.value == name:
            return member
    raise InvalidParameterError(f"unknown final choice {name!r}")


def _cover_mode(name: str) -> CoverMode:
    for member in CoverMode:
        if member.value == name:
            return member
    raise InvalidParameterError(f"unknown cover mode {name!r}")


def _open_out(res: _Resolver):
    out = res.get("out", None)
    if out is None:
        return None
    return open(out, "w", encoding="ascii", newline="\n")


# ---------------------------------------------------------------- analytic


def cmd_analytic(args: argparse.Namespace) -> int:
    res = _Resolver(args)
    geom = ArmGeometry(
        float(res.get("l1", 8.25, float)), float(res.get("l2", 8.25, float)))
    safety = SafetyModel(
        d=float(res.get("d", 4.5, float)),
        delta_theta=0.0,
        threshold=float(res.get("threshold", 4.5, float)),
    )
    pitch = float(res.get("pitch", 25.6, float))
    mode = _cover_mode(res.get("cover_mode", "motion-ring"))
    result = collision_probability_analytic(geom, safety, pitch, mode)

    print(f"interaction type:      {result.interaction.name}")
    print(f"cover mode:            {mode.value}")
    print(f"probability (raw):     {result.raw:.12g}")
    print(f"probability (clamped): {result.clamped:.12g}")
    print(f"S_cover:               {result.areas.s_cover:.12g} mm^2")
    print(f"motion ring radii:     inner {result.areas.r_inner:.12g} mm, "
          f"outer {result.areas.r_outer:.12g} mm")
    for (dist, conflict), (_, collision) in zip(
        result.areas.conflict_by_class, result.areas.collision_by_class
    ):
        print(f"  class at {dist:.6g} mm: S_conflict {conflict:.12g} mm^2, "
              f"S_collision {collision:.12g} mm^2")

    out = _open_out(res)
    if out is not None:
        with out:
            row = SweepRow(
                arm=geom.l1, ratio=geom.ratio(), pitch=pitch,
                method="analytic", probability=result.raw,
            )
            write_rows(out, [row], res.get("format", "csv"))
    return EXIT_OK


# ---------------------------------------------------------------- simulate


def _sim_config(res: _Resolver) -> SimConfig:
    arm = float(res.get("arm", 8.25, float))
    ratio = float(res.get("ratio", 1.0, float))
    region = res.get("region", None, float)
    return SimConfig(
        geom=ArmGeometry(arm, arm * ratio),
        safety=SafetyModel(
            d=float(res.get("d", 4.5, float)),
            delta_theta=0.0,
            threshold=float(res.get("threshold", 4.5, float)),
        ),
        pitch=float(res.get("pitch", 25.6, float)),
        rings=int(res.get("rings", 2, int)),
        iterations=int(res.get("iters", 6000, int)),
        z=float(res.get("z", 1.96, float)),
        target_count=int(res.get("targets", 20000, int)),
        region_radius=float(region) if region is not None else None,
        distribution=_distribution(res.get("distribution", "uniform")),
        kernel=_kernel(res),
        root_seed=int(res.get("seed", 0, int)),
        final_choice=_final_choice(res.get("final_choice", "seeded-random")),
        early_stop_width=res.get("early_stop_width", None, float),
    )


def cmd_simulate(args: argparse.Namespace) -> int:
    res = _Resolver(args)
    config = _sim_config(res)
    workers = int(res.get("workers", 1, int))
    stats = run_simulation(config, workers=workers)

    print(f"iterations:              {stats.iterations}")
    print(f"assigned positioners:    {stats.assigned_positioner_count}")
    print(f"colliding positioners:   {stats.colliding_positioner_count}")
    print(f"evaluated pairs:         {stats.evaluated_pair_count}")
    print(f"colliding pairs:         {stats.colliding_pair_count}")
    print(f"p_hat (per positioner):  {stats.p_hat:.12g}")
    print(f"p (per pair):            {stats.pair_proportion:.12g}")
    print(f"wilson interval:         [{stats.wilson_lower:.12g}, "
          f"{stats.wilson_upper:.12g}]")
    print(f"collision probability:   {stats.reported:.12g}")

    out = _open_out(res)
    if out is not None:
        with out:
            row = SweepRow(
                arm=config.geom.l1,
                ratio=config.geom.ratio(),
                pitch=config.pitch,
                method="mc",
                probability=stats.reported,
                wilson_lower=stats.wilson_lower,
                wilson_upper=stats.wilson_upper,
                seed=config.root_seed,
            )
            write_rows(out, [row], res.get("format", "csv"))
    return EXIT_OK


# ---------------------------------------------------------------- sweep


def _sweep_spec(res: _Resolver) -> SweepSpec:
    mode = "grid" if res.get("grid", False, bool) else "random"
    return SweepSpec(
        arm_min=float(res.get("arm_min", 7.25, float)),
        arm_max=float(res.get("arm_max", 14.5, float)),
        ratio_min=float(res.get("ratio_min", 1.0, float)),
        ratio_max=float(res.get("ratio_max", 2.0, float)),
        pitch_min=float(res.get("pitch_min", 24.6, float)),
        pitch_max=float(res.get("pitch_max", 35.0, float)),
        mode=mode,
        count=int(res.get("points", 80, int)),
        arm_steps=int(res.get("arm_steps", 1, int)),
        ratio_steps=int(res.get("ratio_steps", 5, int)),
        pitch_steps=int(res.get("pitch_steps", 5, int)),
        seed=int(res.get("seed", 0, int)),
    )


def _sweep_settings(res: _Resolver) -> SimSettings:
    region = res.get("region", None, float)
    return SimSettings(
        rings=int(res.get("rings", 12, int)),
        d=float(res.get("d", 4.5, float)),
        threshold=float(res.get("threshold", 4.5, float)),
        iterations=int(res.get("iters", 6000, int)),
        target_count=int(res.get("targets", 20000, int)),
        region_radius=float(region) if region is not None else None,
        distribution=_distribution(res.get("distribution", "uniform")),
        kernel=_kernel(res),
        final_choice=_final_choice(res.get("final_choice", "seeded-random")),
        z=float(res.get("z", 1.96, float)),
        root_seed=int(res.get("seed", 0, int)),
    )


def cmd_sweep(args: argparse.Namespace) -> int:
    res = _Resolver(args)
    spec = _sweep_spec(res)
    settings = _sweep_settings(res)
    method = res.get("method", "both")
    workers = int(res.get("workers", 1, int))
    cover_mode = _cover_mode(res.get("cover_mode", "motion-ring"))
    heatmap_dir = res.get("heatmaps", None)
    if heatmap_dir is not None and spec.mode != "grid":
        raise InvalidParameterError("heatmaps need a grid sweep (--grid)")

    rows: list[SweepRow] = []
    interrupted = False
    try:
        for row in iter_sweep_rows(spec, settings, method, workers, cover_mode):
            rows.append(row)
    except KeyboardInterrupt:
        interrupted = True

    out = _open_out(res)
    fmt = res.get("format", "csv")
    if out is not None:
        with out:
            write_rows(out, rows, fmt)
    else:
        write_rows(sys.stdout, rows, fmt)
    if interrupted:
        print(f"interrupted; flushed {len(rows)} rows", file=sys.stderr)
        return EXIT_INTERRUPT
    if heatmap_dir is not None:
        for path in render_heatmaps(rows, heatmap_dir):
            print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------- validate


def cmd_validate(args: argparse.Namespace) -> int:
    res = _Resolver(args)
    spec = _sweep_spec(res)
    settings = _sweep_settings(res)
    workers = int(res.get("workers", 1, int))
    cover_mode = _cover_mode(res.get("cover_mode", "full-patrol"))

    n_points = spec.count if spec.mode == "random" else \
        spec.arm_steps * spec.ratio_steps * spec.pitch_steps
    if n_points < 3:
        print("error: validation needs at least 3 sweep points",
              file=sys.stderr)
        return EXIT_NO_DATA

    rows = list(iter_sweep_rows(spec, settings, "both", workers, cover_mode))
    report = compute_validation(rows)
    alt_mode = (CoverMode.MOTION_RING if cover_mode is CoverMode.FULL_PATROL
                else CoverMode.FULL_PATROL)
    alt_rows = [
        SweepRow(
            p.arm, p.ratio, p.pitch, "analytic",
            collision_probability_analytic(
                ArmGeometry(p.arm, p.arm * p.ratio),
                SafetyModel(settings.d, 0.0, settings.threshold),
                p.pitch, alt_mode,
            ).raw,
        )
        for p in report.points
    ]
    mc_rows = [r for r in rows if r.method == "mc"]
    alt_report = compute_validation(mc_rows + alt_rows)

    print(f"points:                        {len(report.points)}")
    print("normalization:                 min-max to [0, 1] per method, "
          "over this sweep only")
    print(f"analytic cover mode:           {cover_mode.value}")
    print(f"residual mean (mc - analytic): {report.residual_mean:.6g}")
    print(f"residual variance:             {report.residual_variance:.6g}")
    print(f"rank correlation:              {report.rank_correlation:.6g}")
    print(f"rank correlation ({alt_mode.value} cover): "
          f"{alt_report.rank_correlation:.6g}")

    out = _open_out(res)
    if out is not None:
        with out:
            write_rows(out, rows, res.get("format", "csv"))
    return EXIT_OK


# ---------------------------------------------------------------- fit


def _read_fit_csv(path: str, method: str) -> list[RegressionSample]:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise InvalidParameterError(f"{path} is empty")
    header = [h.strip() for h in lines[0].split(",")]

    def find(*names: str) -> int:
        for name in names:
            if name in header:
                return header.index(name)
        raise InvalidParameterError(
            f"missing column {names[0]!r} in {path}")

    col_arm = find("arm_length_mm", "arm_length")
    col_ratio = find("ratio")
    col_pitch = find("pitch_mm", "pitch")
    col_prob = find("probability")
    col_method = header.index("method") if "method" in header else None

    samples = []
    for line in lines[1:]:
        if not line.strip():
            continue
        cells = line.split(",")
        if col_method is not None and cells[col_method] != method:
            continue
        samples.append(
            RegressionSample(
                x=float(cells[col_arm]),
                y=float(cells[col_ratio]),
                z=float(cells[col_pitch]),
                f=float(cells[col_prob]),
            )
        )
    return samples


def cmd_fit(args: argparse.Namespace) -> int:
    res = _Resolver(args)
    csv_path = res.get("csv", None)
    if csv_path is None:
        raise InvalidParameterError("fit needs --csv")
    samples = _read_fit_csv(csv_path, res.get("method", "mc"))
    if not samples:
        print("error: no usable rows in the CSV", file=sys.stderr)
        return EXIT_NO_DATA
    lam = float(res.get("regularization", 1e-3, float))
    split_seed = int(res.get("split_seed", 0, int))
    test_fraction = float(res.get("test_fraction", 0.25, float))
    standardize = not res.get("raw", False, bool)

    train, test = split_samples(samples, test_fraction, split_seed)
    model = fit_ridge(train, lam, standardize=standardize)
    r2_train = r_squared(model, train)
    print(f"samples:   {len(samples)} ({len(train)} train / {len(test)} test)")
    print(f"lambda:    {lam:g}")
    print(f"train R^2: {r2_train:.6g}")
    if len(test) >= 2:
        print(f"test R^2:  {r_squared(model, test):.6g}")
    out = res.get("out", "model.txt")
    save_model(model, out)
    print(f"wrote {out}")
    return EXIT_OK


# ---------------------------------------------------------------- bench


def _bench_rings(n: int) -> int:
    k = max(0, round((-3.0 + math.sqrt(9.0 + 12.0 * (n - 1))) / 6.0))
    return k


def cmd_bench(args: argparse.Namespace) -> int:
    res = _Resolver(args)
    count = int(res.get("positioners", 4000, int))
    if count < 2:
        raise InvalidParameterError("bench needs at least 2 positioners")
    pitch = float(res.get("pitch", 25.6, float))
    arm = float(res.get("arm", 8.25, float))
    ratio = float(res.get("ratio", 1.0, float))
    threshold = float(res.get("threshold", 4.5, float))
    kernel = _kernel(res)
    workers = int(res.get("workers", 2, int))
    seed = int(res.get("seed", 0, int))
    geom = ArmGeometry(arm, arm * ratio)

    # Spiral prefix of the hex lattice: supports any positioner count.
    rings = _bench_rings(count) + 2
    axial = _axial_spiral(rings)[:count]
    centers = np.array(
        [(pitch * (q + 0.5 * r), pitch * (math.sqrt(3.0) / 2.0) * r)
         for q, r in axial]
    )
    ii, jj, _ = _pairs_within(centers, 1.01 * pitch)
    pairs = np.stack([ii, jj], axis=1)

    rng = np.random.Generator(np.random.PCG64(seed))
    theta = rng.random(count) * 2.0 * math.pi
    phi = rng.random(count) * 2.0 * math.pi
    ex = centers[:, 0] + geom.l1 * np.cos(theta)
    ey = centers[:, 1] + geom.l1 * np.sin(theta)
    elbows = np.stack([ex, ey], axis=1)
    tips = np.stack(
        [ex + geom.l2 * np.cos(theta + phi), ey + geom.l2 * np.sin(theta + phi)],
        axis=1,
    )
    batch = segment_batch(elbows, tips, pairs)

    print(f"positioners: {count}  first-shell pairs: {len(pairs)}  "
          f"kernel: {kernel.label()}")
    # Untimed warmup: loads the JIT kernel so timings measure steady state.
    batch_pair_distances(
        segment_batch(elbows[:2], tips[:2], [[0, 1]]), kernel, threshold)
    reports = {}
    for w in sorted({1, workers}):
        rep = batch_pair_distances(batch, kernel, threshold, workers=w)
        reports[w] = rep
        print(f"batch  workers={w}: {rep.elapsed_s * 1e3:10.2f} ms")
    ws = sorted(reports)
    if len(ws) > 1:
        same = np.array_equal(
            reports[ws[0]].distances, reports[ws[-1]].distances)
        print(f"bit-identical across workers: {same}")

    if not res.get("skip_naive", False, bool):
        t0 = time.perf_counter()
        naive = naive_pair_distances(batch, kernel)
        naive_s = time.perf_counter() - t0
        best = min(rep.elapsed_s for rep in reports.values())
        agree = float(np.max(np.abs(naive - reports[ws[0]].distances))) \
            if len(pairs) else 0.0
        print(f"naive  sequential: {naive_s * 1e3:10.2f} ms")
        print(f"speedup: {naive_s / best:.1f}x")
        print(f"max |naive - batch|: {agree:.3g} mm")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="root RNG seed")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--out", help="output file path")
    p.add_argument("--format", choices=("csv", "ndjson"),
                   help="delimited output format (default csv)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fieldsim",
        description="Static collision probability of theta-phi positioner "
                    "arrays: analytic model, Monte Carlo, sweeps, surrogate "
                    "fit, and kernel benchmarks.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analytic", help="closed-form collision probability")
    _add_common(p)
    p.add_argument("--l1", type=float, help="central arm length, mm")
    p.add_argument("--l2", type=float, help="eccentric arm length, mm")
    p.add_argument("--d", type=float, help="safety radius, mm")
    p.add_argument("--threshold", type=float, help="collision threshold, mm")
    p.add_argument("--pitch", type=float, help="center spacing, mm")
    p.add_argument("--cover-mode", dest="cover_mode",
                   choices=[m.value for m in CoverMode])
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("simulate", help="Monte Carlo collision probability")
    _add_common(p)
    p.add_argument("--rings", type=int, help="hex rings (19 positioners = 2)")
    p.add_argument("--pitch", type=float)
    p.add_argument("--arm", type=float, help="central arm length l1, mm")
    p.add_argument("--ratio", type=float, help="arm ratio l2/l1")
    p.add_argument("--d", type=float)
    p.add_argument("--threshold", type=float)
    p.add_argument("--targets", type=int, help="targets per iteration")
    p.add_argument("--region", type=float, help="target disk radius, mm")
    p.add_argument("--iters", type=int, help="Monte Carlo iterations")
    p.add_argument("--z", type=float, help="Wilson z statistic")
    p.add_argument("--distribution",
                   choices=[d.value for d in Distribution])
    p.add_argument("--kernel", choices=("exact", "discrete"))
    p.add_argument("--samples", type=int, help="discrete kernel subdivisions")
    p.add_argument("--workers", type=int)
    p.add_argument("--final-choice", dest="final_choice",
                   choices=[c.value for c in FinalChoice],
                   help="pose-target pick among assigned targets")
    p.add_argument("--early-stop-width", dest="early_stop_width", type=float,
                   help="stop once the Wilson width drops below this")
    p.set_defaults(func=cmd_simulate)

    for name, fn, extra in (
        ("sweep", cmd_sweep, True),
        ("validate", cmd_validate, False),
    ):
        p = sub.add_parser(
            name,
            help="parameter sweep (CSV + optional heatmaps)" if extra
            else "cross-validate analytic model against Monte Carlo",
        )
        _add_common(p)
        p.add_argument("--arm-min", dest="arm_min", type=float)
        p.add_argument("--arm-max", dest="arm_max", type=float)
        p.add_argument("--arm-steps", dest="arm_steps", type=int)
        p.add_argument("--ratio-min", dest="ratio_min", type=float)
        p.add_argument("--ratio-max", dest="ratio_max", type=float)
        p.add_argument("--ratio-steps", dest="ratio_steps", type=int)
        p.add_argument("--pitch-min", dest="pitch_min", type=float)
        p.add_argument("--pitch-max", dest="pitch_max", type=float)
        p.add_argument("--pitch-steps", dest="pitch_steps", type=int)
        p.add_argument("--grid", action="store_const", const=True,
                       help="full grid instead of random points")
        p.add_argument("--points", type=int, help="random point count")
        p.add_argument("--rings", type=int)
        p.add_argument("--d", type=float)
        p.add_argument("--threshold", type=float)
        p.add_argument("--iters", type=int)
        p.add_argument("--targets", type=int)
        p.add_argument("--region", type=float)
        p.add_argument("--z", type=float)
        p.add_argument("--distribution",
                       choices=[d.value for d in Distribution])
        p.add_argument("--kernel", choices=("exact", "discrete"))
        p.add_argument("--samples", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--final-choice", dest="final_choice",
                       choices=[c.value for c in FinalChoice])
        p.add_argument("--cover-mode", dest="cover_mode",
                       choices=[m.value for m in CoverMode])
        if extra:
            p.add_argument("--method", choices=("analytic", "mc", "both"))
            p.add_argument("--heatmaps", metavar="DIR",
                           help="render heatmap PNGs into DIR (grid mode)")
        p.set_defaults(func=fn)

    p = sub.add_parser("fit", help="fit the quadratic surrogate to sweep CSV")
    _add_common(p)
    p.add_argument("--csv", help="input CSV (sweep schema)")
    p.add_argument("--method", choices=("analytic", "mc"),
                   help="which rows to fit (default mc)")
    p.add_argument("--regularization", "--lambda", dest="regularization",
                   type=float, help="ridge strength (default 1e-3)")
    p.add_argument("--split-seed", dest="split_seed", type=int)
    p.add_argument("--test-fraction", dest="test_fraction", type=float)
    p.add_argument("--raw", action="store_const", const=True,
                   help="fit on raw inputs (no standardization)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bench", help="batch kernel benchmark vs naive loop")
    _add_common(p)
    p.add_argument("--positioners", type=int)
    p.add_argument("--pitch", type=float)
    p.add_argument("--arm", type=float)
    p.add_argument("--ratio", type=float)
    p.add_argument("--threshold", type=float)
    p.add_argument("--kernel", choices=("exact", "discrete"))
    p.add_argument("--samples", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--skip-naive", dest="skip_naive", action="store_const",
                   const=True)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_INTERRUPT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FieldsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
