"""Figure rendering for benchmark curves and detected boundaries.

Figures land next to the delimited output: exporting ``bench.csv`` with
figures enabled also writes ``bench_throughput.png`` and
``bench_latency.png``; a boundary GeoJSON export can carry a matching
``<farm>_boundary.png``.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .bench import RunMetrics
from .geo import BoundaryPolygon, GeoPoint


def render_bench_figures(metrics: Sequence[RunMetrics], csv_path: str | Path) -> list[Path]:
    """Throughput and latency curves per block size, PNGs beside the CSV."""
    csv_path = Path(csv_path)
    stem = csv_path.with_suffix("")
    block_sizes = sorted({m.block_size for m in metrics})
    paths = []

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for bs in block_sizes:
        rows = sorted((m for m in metrics if m.block_size == bs),
                      key=lambda m: m.send_rate)
        ax.plot([m.send_rate for m in rows], [m.throughput_tps for m in rows],
                marker="o", label=f"block size {bs}")
    rates = sorted({m.send_rate for m in metrics})
    ax.plot(rates, rates, linestyle=":", color="grey", label="ideal")
    ax.set_xlabel("send rate (tx/s)")
    ax.set_ylabel("throughput (tx/s)")
    ax.set_title("Ledger throughput vs send rate")
    ax.legend()
    ax.grid(True, alpha=0.3)
    throughput_png = Path(f"{stem}_throughput.png")
    fig.savefig(throughput_png, dpi=120, bbox_inches="tight")
    plt.close(fig)
    paths.append(throughput_png)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for bs in block_sizes:
        rows = sorted((m for m in metrics if m.block_size == bs),
                      key=lambda m: m.send_rate)
        ax.plot([m.send_rate for m in rows], [m.avg_latency_s for m in rows],
                marker="s", label=f"block size {bs}")
    ax.set_xlabel("send rate (tx/s)")
    ax.set_ylabel("average latency (s)")
    ax.set_title("Commit latency vs send rate")
    ax.legend()
    ax.grid(True, alpha=0.3)
    latency_png = Path(f"{stem}_latency.png")
    fig.savefig(latency_png, dpi=120, bbox_inches="tight")
    plt.close(fig)
    paths.append(latency_png)
    return paths


def render_boundary_figure(farm_id: str, polygon: BoundaryPolygon,
                           out_path: str | Path,
                           trace_points: Iterable[GeoPoint] | None = None) -> Path:
    """Detected ring (and optionally the raw trace) on a lon/lat plot."""
    out_path = Path(out_path)
    fig, ax = plt.subplots(figsize=(6, 6))
    if trace_points is not None:
        points = list(trace_points)
        ax.scatter([p.lon for p in points], [p.lat for p in points],
                   s=2, color="#99bb99", label="trace")
    ring = list(polygon.ring) + [polygon.ring[0]]
    ax.plot([p.lon for p in ring], [p.lat for p in ring],
            color="#205020", linewidth=1.5,
            label=f"boundary ({polygon.area_ha:.2f} ha, {polygon.method})")
    ax.set_xlabel("longitude")
    ax.set_ylabel("latitude")
    ax.set_title(f"Farm {farm_id}")
    ax.legend(loc="upper right", fontsize=8)
    ax.set_aspect("equal", adjustable="datalim")
    fig.savefig(out_path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return out_path
