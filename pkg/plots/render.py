"""Render the three comparison panels from an experiment aggregate.csv.

Each panel plots one aggregated metric (relative Bellman error, running
average cost, cumulative blocked flows) against the iteration count, one
mean curve per algorithm with a standard-error band, and a vertical line
at the training/evaluation boundary. Output is deterministic: rendering
the same CSV twice produces byte-identical PNGs.

Usage: python render.py --in out/aggregate.csv --out-dir figs/
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

REQUIRED_COLUMNS = (
    "algo", "phase", "iteration", "rbe_mean", "rbe_stderr",
    "avg_cost_mean", "avg_cost_stderr", "blocked_mean", "blocked_stderr",
)

PANELS = {
    "rbe": ("Relative Bellman error", True),
    "avg_cost": ("Average cost per slot", False),
    "blocked": ("Cumulative blocked flows", False),
}

_COLORS = {}  # filled per input file, in first-seen algorithm order
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


class RenderError(ValueError):
    """The input CSV is missing, empty, or malformed."""


@dataclass(frozen=True)
class PanelSpec:
    """One panel: which metric to draw and where to read/write."""

    metric: str
    ylabel: str
    logy: bool
    in_path: str
    out_path: str

    def __post_init__(self):
        if self.metric not in PANELS:
            raise RenderError(f"unknown metric {self.metric!r}")


def read_aggregate(path: str):
    """Parse an aggregate.csv; returns (config_hash, list of row dicts)."""
    if not os.path.exists(path):
        raise RenderError(f"{path}: no such file")
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# config_hash="):
            raise RenderError(f"{path}: missing config hash header")
        config_hash = header.split("=", 1)[1]
        reader = csv.DictReader(fh)
        missing = set(REQUIRED_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise RenderError(f"{path}: missing columns {sorted(missing)}")
        rows = []
        for raw in reader:
            rows.append(
                {
                    "algo": raw["algo"],
                    "phase": raw["phase"],
                    "iteration": int(raw["iteration"]),
                    **{
                        c: float(raw[c])
                        for c in REQUIRED_COLUMNS[3:]
                    },
                }
            )
    if not rows:
        raise RenderError(f"{path}: no data rows")
    return config_hash, rows


def _series(rows, algo, metric):
    """Iteration-sorted (x, mean, stderr) arrays across both phases."""
    picked = sorted(
        (r["iteration"], r[f"{metric}_mean"], r[f"{metric}_stderr"])
        for r in rows
        if r["algo"] == algo
    )
    xs = [p[0] for p in picked]
    means = [p[1] for p in picked]
    errs = [p[2] for p in picked]
    return xs, means, errs


def render_panel(spec: PanelSpec) -> str:
    """Draw one panel to spec.out_path; returns the output path."""
    _, rows = read_aggregate(spec.in_path)
    algos = sorted({r["algo"] for r in rows})
    train_end = max(
        (r["iteration"] for r in rows if r["phase"] == "train"), default=None
    )
    fig, ax = plt.subplots(figsize=(6.4, 4.0), dpi=120)
    for i, algo in enumerate(algos):
        xs, means, errs = _series(rows, algo, spec.metric)
        color = _PALETTE[i % len(_PALETTE)]
        ax.plot(xs, means, label=algo, color=color, linewidth=1.5)
        lo = [m - e for m, e in zip(means, errs)]
        hi = [m + e for m, e in zip(means, errs)]
        ax.fill_between(xs, lo, hi, color=color, alpha=0.2, linewidth=0)
    if train_end is not None:
        ax.axvline(train_end, color="gray", linestyle="--", linewidth=1.0)
        ax.text(
            train_end, 0.98, " eval", transform=ax.get_xaxis_transform(),
            va="top", ha="left", fontsize=8, color="gray",
        )
    if spec.logy:
        ax.set_yscale("log")
    ax.set_xlabel("Iteration")
    ax.set_ylabel(spec.ylabel)
    ax.legend(frameon=False)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    os.makedirs(os.path.dirname(os.path.abspath(spec.out_path)), exist_ok=True)
    # Empty Software tag: keep the PNG free of version-dependent metadata.
    fig.savefig(spec.out_path, metadata={"Software": ""})
    plt.close(fig)
    return spec.out_path


def render_all(in_path: str, out_dir: str) -> list[str]:
    """Render every panel; returns the three output paths."""
    outputs = []
    for metric, (ylabel, logy) in PANELS.items():
        spec = PanelSpec(
            metric=metric,
            ylabel=ylabel,
            logy=logy,
            in_path=in_path,
            out_path=os.path.join(out_dir, f"{metric}.png"),
        )
        outputs.append(render_panel(spec))
    return outputs


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--in", dest="in_path", required=True,
                   help="aggregate.csv produced by the experiment harness")
    p.add_argument("--out-dir", required=True, help="directory for the PNGs")
    args = p.parse_args(argv)
    try:
        for path in render_all(args.in_path, args.out_dir):
            print(f"wrote {path}")
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
