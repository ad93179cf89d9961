"""Render benchmark results as latency figures next to the CSV output."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .bench import BenchPoint

_MODE_STYLE = {
    "direct": dict(color="tab:green", marker="o"),
    "channel": dict(color="tab:blue", marker="s"),
    "channel+ra": dict(color="tab:red", marker="^"),
}


def render_figure(points: list[BenchPoint], out_path: str | Path) -> Path:
    """One subplot per workload: median latency vs parameter, per mode."""
    workloads = sorted({p.workload for p in points})
    fig, axes = plt.subplots(
        1, max(len(workloads), 1), figsize=(6 * max(len(workloads), 1), 4.5),
        squeeze=False,
    )
    for ax, workload in zip(axes[0], workloads):
        series = defaultdict(list)
        for p in points:
            if p.workload == workload and p.median_ns is not None:
                series[p.mode].append((p.parameter, p.median_ns))
        for mode, rows in sorted(series.items()):
            rows.sort()
            xs = [r[0] for r in rows]
            ys = [r[1] / 1e6 for r in rows]
            ax.plot(xs, ys, label=mode, **_MODE_STYLE.get(mode, {}))
        ax.set_title(workload)
        ax.set_xlabel("array size (MiB)" if workload == "sum_array" else "n")
        ax.set_ylabel("median latency (ms)")
        ax.set_yscale("log")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
