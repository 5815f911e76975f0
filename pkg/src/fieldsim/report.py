"""Delimited output (CSV / NDJSON) and heatmap rendering for sweeps.

The CSV schema is stable and versioned:

    schema_version,arm_length_mm,ratio,pitch_mm,method,probability,
    wilson_lower,wilson_upper,seed

Numeric cells carry 12 significant digits; empty cells mean
not-applicable (analytic rows have no Wilson bounds or seed). Heatmap
images are pure functions of the rows they render.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, TextIO

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from fieldsim.errors import InvalidParameterError  # noqa: E402
from fieldsim.sweep import SweepRow  # noqa: E402

SCHEMA_VERSION = 1
CSV_HEADER = (
    "schema_version,arm_length_mm,ratio,pitch_mm,method,probability,"
    "wilson_lower,wilson_upper,seed"
)


def _num(v: float | None) -> str:
    return "" if v is None else f"{v:.12g}"


def csv_line(row: SweepRow) -> str:
    seed = "" if row.seed is None else str(row.seed)
    return (
        f"{SCHEMA_VERSION},{_num(row.arm)},{_num(row.ratio)},{_num(row.pitch)},"
        f"{row.method},{_num(row.probability)},{_num(row.wilson_lower)},"
        f"{_num(row.wilson_upper)},{seed}"
    )


def ndjson_line(row: SweepRow) -> str:
    return json.dumps(
        {
            "schema_version": SCHEMA_VERSION,
            "arm_length_mm": row.arm,
            "ratio": row.ratio,
            "pitch_mm": row.pitch,
            "method": row.method,
            "probability": row.probability,
            "wilson_lower": row.wilson_lower,
            "wilson_upper": row.wilson_upper,
            "seed": row.seed,
        },
        sort_keys=False,
    )


def write_rows(out: TextIO, rows: Iterable[SweepRow], fmt: str = "csv") -> None:
    if fmt == "csv":
        out.write(CSV_HEADER + "\n")
        for row in rows:
            out.write(csv_line(row) + "\n")
    elif fmt == "ndjson":
        for row in rows:
            out.write(ndjson_line(row) + "\n")
    else:
        raise InvalidParameterError(f"unknown output format {fmt!r}")


def read_rows_csv(path) -> list[SweepRow]:
    """Read rows written by :func:`write_rows` (csv format)."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise InvalidParameterError(
            f"unrecognized CSV header in {path}; expected {CSV_HEADER!r}")
    rows = []
    for line in lines[1:]:
        if not line.strip():
            continue
        cells = line.split(",")
        rows.append(
            SweepRow(
                arm=float(cells[1]),
                ratio=float(cells[2]),
                pitch=float(cells[3]),
                method=cells[4],
                probability=float(cells[5]),
                wilson_lower=float(cells[6]) if cells[6] else None,
                wilson_upper=float(cells[7]) if cells[7] else None,
                seed=int(cells[8]) if cells[8] else None,
            )
        )
    return rows


def render_heatmaps(rows: list[SweepRow], out_dir) -> list[Path]:
    """One grayscale heatmap per (method, arm-length) grid slice.

    Values are min-max normalized per method over all that method's
    rows; darker cells mean higher collision probability. Requires a
    complete (ratio x pitch) grid at every arm length.

    Returns the written file paths (heatmap_<method>_arm<mm>.png).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    methods = sorted({r.method for r in rows})
    for method in methods:
        sub = [r for r in rows if r.method == method]
        values = np.array([r.probability for r in sub])
        lo, hi = values.min(), values.max()
        span = hi - lo if hi > lo else 1.0
        arms = sorted({r.arm for r in sub})
        for arm in arms:
            slab = [r for r in sub if r.arm == arm]
            ratios = np.array(sorted({r.ratio for r in slab}))
            pitches = np.array(sorted({r.pitch for r in slab}))
            if len(slab) != ratios.size * pitches.size:
                raise InvalidParameterError(
                    "heatmaps need a complete (ratio x pitch) grid; "
                    "run the sweep in grid mode"
                )
            grid = np.empty((ratios.size, pitches.size))
            r_index = {v: k for k, v in enumerate(ratios.tolist())}
            p_index = {v: k for k, v in enumerate(pitches.tolist())}
            for r in slab:
                grid[r_index[r.ratio], p_index[r.pitch]] = \
                    (r.probability - lo) / span
            fig, ax = plt.subplots(figsize=(5.0, 4.0))
            im = ax.imshow(
                grid,
                origin="lower",
                aspect="auto",
                cmap="Greys",
                vmin=0.0,
                vmax=1.0,
                extent=(
                    float(pitches[0]), float(pitches[-1]),
                    float(ratios[0]), float(ratios[-1]),
                ),
            )
            ax.set_xlabel("pitch [mm]")
            ax.set_ylabel("arm ratio")
            ax.set_title(f"{method}, arm length {arm:g} mm")
            fig.colorbar(im, ax=ax, label="normalized collision probability")
            path = out_dir / f"heatmap_{method}_arm{arm:g}.png"
            fig.savefig(path, dpi=120)
            plt.close(fig)
            written.append(path)
    return written
