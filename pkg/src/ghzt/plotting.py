"""Matplotlib figures for the CLI report paths (PNG/PDF next to the JSON/CSV output)."""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

from .viz import BACKGROUND, DRAW_FLOOR, NEGATIVE, POSITIVE, HintonDiagram  # noqa: E402

FIG_WIDTH = 7.0
RC = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "savefig.dpi": 150,
}


def _hinton_axes(ax, diagram: HintonDiagram, which: str, title: str):
    dim = diagram.dimension
    ax.add_patch(Rectangle((0, 0), dim, dim, facecolor=BACKGROUND, edgecolor="none"))
    peak = diagram.max_magnitude
    for row in diagram.panel(which):
        for cell in row:
            if peak <= 0 or cell.magnitude <= DRAW_FLOOR * peak:
                continue
            side = np.sqrt(cell.magnitude / peak)
            color = POSITIVE if cell.sign == "+" else NEGATIVE
            ax.add_patch(
                Rectangle(
                    (cell.col + 0.5 - side / 2, dim - cell.row - 0.5 - side / 2),
                    side,
                    side,
                    facecolor=color,
                    edgecolor="none",
                )
            )
    ticks = np.arange(dim) + 0.5
    ax.set_xticks(ticks)
    ax.set_xticklabels(diagram.basis_labels)
    ax.set_yticks(ticks)
    ax.set_yticklabels(diagram.basis_labels[::-1])
    ax.set_xlim(0, dim)
    ax.set_ylim(0, dim)
    ax.set_aspect("equal")
    ax.set_title(title)


def hinton_figure(blocks: Sequence[tuple[str, HintonDiagram]], path: str):
    with plt.rc_context(RC):
        rows = len(blocks)
        fig, axes = plt.subplots(
            rows, 2, figsize=(FIG_WIDTH, FIG_WIDTH / 2 * rows), squeeze=False
        )
        for (title, diagram), pair in zip(blocks, axes):
            _hinton_axes(pair[0], diagram, "re", f"{title} Re")
            _hinton_axes(pair[1], diagram, "im", f"{title} Im")
        fig.tight_layout()
        fig.savefig(path, metadata={"Software": None} if path.endswith(".png") else None)
        plt.close(fig)


def audit_figure(fidelities: Sequence[float], path: str, title: str = ""):
    """Per-trial fidelity (left) and its histogram (right)."""
    fids = np.asarray(fidelities)
    with plt.rc_context(RC):
        fig, (ax_t, ax_h) = plt.subplots(1, 2, figsize=(FIG_WIDTH, FIG_WIDTH * 0.38))
        ax_t.plot(np.arange(len(fids)), fids, ".", ms=4, color="k")
        ax_t.axhline(1.0, lw=0.8, ls="--", color="0.5")
        ax_t.set_xlabel("trial")
        ax_t.set_ylabel("fidelity")
        ax_t.set_ylim(min(0.0, fids.min() - 0.05), 1.05)
        ax_h.hist(fids, bins=min(30, max(5, len(fids) // 4)), range=(0, 1.0 + 1e-9), color="0.3")
        ax_h.set_xlabel("fidelity")
        ax_h.set_ylabel("trials")
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
