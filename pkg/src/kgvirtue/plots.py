"""Figures for the report path: generation metrics and degree distributions."""

from __future__ import annotations

import io
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from ._io import atomic_write_bytes  # noqa: E402

# fixed metadata keeps the PNG bytes independent of library version and clock
_PNG_META = {"Software": None}


def _save(fig, path: str | Path) -> Path:
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=100, metadata=_PNG_META)
    plt.close(fig)
    atomic_write_bytes(path, buf.getvalue())
    return Path(path)


def plot_generation_metrics(rows: Sequence, path: str | Path, title: str = "") -> Path:
    """Mean relative intermediate ranks and claim counts per generation."""
    gens = [r.generation for r in rows]
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    top.plot(gens, [r.mean_evdr_all for r in rows], marker="o", label="all intermediates")
    top.plot(
        gens,
        [float("nan") if r.mean_evdr_present is None else r.mean_evdr_present for r in rows],
        marker="s",
        label="present intermediates",
    )
    top.set_ylabel("mean evd^r")
    top.set_ylim(0, 1.05)
    top.legend(loc="lower right")
    bottom.plot(gens, [max(r.claims_total, 0.5) for r in rows], marker="o", label="all claims")
    bottom.plot(gens, [max(r.claims_intermediate, 0.5) for r in rows], marker="s", label="claims with intermediates")
    bottom.set_yscale("log")
    bottom.set_xlabel("generation")
    bottom.set_ylabel("claims")
    bottom.legend(loc="upper right")
    if title:
        top.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_degree_distribution(histogram: dict[int, int], path: str | Path, title: str = "") -> Path:
    """Log-log vertex degree distribution."""
    pts = sorted((d, c) for d, c in histogram.items() if d > 0 and c > 0)
    fig, ax = plt.subplots(figsize=(5, 4))
    if pts:
        ax.loglog([d for d, _ in pts], [c for _, c in pts], marker="o", linestyle="none")
    ax.set_xlabel("degree")
    ax.set_ylabel("vertices")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)
