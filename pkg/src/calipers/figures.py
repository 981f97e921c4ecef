"""Summary figures rendered next to the delimited report."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = ["render_report_figures"]


def _grouped(rows):
    """Rows keyed by method, each a list of (g, cr, al) sorted by g."""
    by_method: dict[str, list[tuple[int, float, float]]] = {}
    for row in rows:
        by_method.setdefault(row["method"], []).append(
            (int(row["g"]), float(row["cr"]), float(row["al"]))
        )
    for points in by_method.values():
        points.sort()
    return by_method


def render_report_figures(rows, out_dir: Path, alpha: float) -> list[Path]:
    """Coverage and length against the grid count, one line per method.

    With a single grid count the lines collapse to marker columns, which
    still reads fine; returns the written file paths.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_method = _grouped(rows)

    fig, (ax_cr, ax_al) = plt.subplots(1, 2, figsize=(9.0, 3.6))
    for method, points in sorted(by_method.items()):
        gs = [p[0] for p in points]
        ax_cr.plot(gs, [p[1] for p in points], marker="o", label=method)
        ax_al.plot(gs, [p[2] for p in points], marker="o", label=method)
    ax_cr.axhline(1.0 - alpha, color="gray", linestyle="--", linewidth=1,
                  label=f"nominal {1.0 - alpha:g}")
    ax_cr.set_xlabel("grid points")
    ax_cr.set_ylabel("coverage rate")
    ax_al.set_xlabel("grid points")
    ax_al.set_ylabel("average length")
    ax_cr.legend(fontsize=8)
    fig.tight_layout()
    path = out_dir / "coverage_length.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]
