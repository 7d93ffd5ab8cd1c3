"""Hinton diagrams of density matrices as SVG and as monospace text.

Square *area* is proportional to |entry| / max|entry| (side = cell * sqrt(ratio)).
Positive entries are white, negative entries black, on a grey panel. The
left panel shows real parts, the right panel imaginary parts.
"""

from __future__ import annotations

from dataclasses import dataclass
from html import escape
from typing import Sequence

import numpy as np

from .qstate import DensityMatrix, ket_string

POSITIVE = "#FFFFFF"
NEGATIVE = "#000000"
BACKGROUND = "#808080"

BLOCKS = " ░▒▓█"
THRESHOLDS = (0.05, 0.25, 0.5, 0.8)
# Cells below this fraction of the peak are round-off; drawing them would put
# platform-dependent digits into otherwise byte-stable SVG.
DRAW_FLOOR = 1e-12


@dataclass(frozen=True)
class HintonCell:
    row: int
    col: int
    magnitude: float
    sign: str  # "+" or "-"


@dataclass(frozen=True)
class HintonDiagram:
    dimension: int
    real_panel: tuple[tuple[HintonCell, ...], ...]
    imag_panel: tuple[tuple[HintonCell, ...], ...]
    max_magnitude: float
    basis_labels: tuple[str, ...]

    def panel(self, which: str):
        return self.real_panel if which == "re" else self.imag_panel

    def magnitudes(self, which: str) -> np.ndarray:
        return np.array([[c.magnitude for c in row] for row in self.panel(which)])

    def signed(self, which: str) -> np.ndarray:
        mags = self.magnitudes(which)
        signs = np.array([[1 if c.sign == "+" else -1 for c in row] for row in self.panel(which)])
        return mags * signs


def _panel(values: np.ndarray) -> tuple[tuple[HintonCell, ...], ...]:
    return tuple(
        tuple(
            HintonCell(i, j, float(abs(v)), "-" if v < 0 else "+")
            for j, v in enumerate(row)
        )
        for i, row in enumerate(values)
    )


def build_hinton(rho) -> HintonDiagram:
    mat = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    dim = mat.shape[0]
    k = int(dim).bit_length() - 1
    re, im = mat.real, mat.imag
    peak = float(max(np.abs(re).max(), np.abs(im).max()))
    labels = tuple(f"|{ket_string(i, k)}⟩" for i in range(dim))
    return HintonDiagram(dim, _panel(re), _panel(im), peak, labels)


# --------------------------------------------------------------------------
# SVG


@dataclass(frozen=True)
class SvgStyle:
    cell_size: float = 40.0
    label_space: float = 48.0
    title_space: float = 24.0
    panel_gap: float = 32.0
    margin: float = 12.0
    font_size: float = 12.0
    grid_color: str = "#5A5A5A"


def _num(x: float) -> str:
    text = f"{x:.10f}".rstrip("0").rstrip(".")
    return "0" if text in ("", "-0") else text


def _panel_svg(diagram: HintonDiagram, which: str, x0: float, y0: float, style: SvgStyle, tag: str):
    cs = style.cell_size
    dim = diagram.dimension
    side_total = cs * dim
    out = [
        f'<g class="panel" data-panel="{which}" data-diagram="{tag}">',
        f'<rect class="background" x="{_num(x0)}" y="{_num(y0)}" width="{_num(side_total)}" '
        f'height="{_num(side_total)}" fill="{BACKGROUND}"/>',
    ]
    for t in range(dim + 1):
        off = t * cs
        out.append(
            f'<line class="grid" x1="{_num(x0 + off)}" y1="{_num(y0)}" x2="{_num(x0 + off)}" '
            f'y2="{_num(y0 + side_total)}" stroke="{style.grid_color}" stroke-width="1"/>'
        )
        out.append(
            f'<line class="grid" x1="{_num(x0)}" y1="{_num(y0 + off)}" x2="{_num(x0 + side_total)}" '
            f'y2="{_num(y0 + off)}" stroke="{style.grid_color}" stroke-width="1"/>'
        )
    peak = diagram.max_magnitude
    for row in diagram.panel(which):
        for cell in row:
            if peak <= 0 or cell.magnitude <= DRAW_FLOOR * peak:
                continue
            side = cs * np.sqrt(cell.magnitude / peak)
            cx = x0 + (cell.col + 0.5) * cs
            cy = y0 + (cell.row + 0.5) * cs
            fill = POSITIVE if cell.sign == "+" else NEGATIVE
            out.append(
                f'<rect class="cell" data-row="{cell.row}" data-col="{cell.col}" '
                f'x="{_num(cx - side / 2)}" y="{_num(cy - side / 2)}" '
                f'width="{_num(side)}" height="{_num(side)}" fill="{fill}"/>'
            )
    fs = style.font_size
    for t, label in enumerate(diagram.basis_labels):
        mid = (t + 0.5) * cs
        out.append(
            f'<text class="label" x="{_num(x0 + mid)}" y="{_num(y0 + side_total + fs + 4)}" '
            f'font-size="{_num(fs)}" text-anchor="middle">{escape(label)}</text>'
        )
        out.append(
            f'<text class="label" x="{_num(x0 - 6)}" y="{_num(y0 + mid + fs / 3)}" '
            f'font-size="{_num(fs)}" text-anchor="end">{escape(label)}</text>'
        )
    out.append("</g>")
    return out


def _block_size(dim: int, style: SvgStyle) -> tuple[float, float]:
    side = style.cell_size * dim
    width = 2 * (style.label_space + side) + style.panel_gap
    height = style.title_space + side + style.label_space / 2
    return width, height


def render_blocks(blocks: Sequence[tuple[str, HintonDiagram]], style: SvgStyle | None = None) -> str:
    """Stack several two-panel diagrams vertically in one SVG document."""
    style = style or SvgStyle()
    dims = [d.dimension for _, d in blocks]
    sizes = [_block_size(dim, style) for dim in dims]
    width = max(w for w, _ in sizes) + 2 * style.margin
    height = sum(h for _, h in sizes) + 2 * style.margin
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_num(width)}" '
        f'height="{_num(height)}" viewBox="0 0 {_num(width)} {_num(height)}" '
        f'font-family="monospace">',
    ]
    y = style.margin
    for (title, diagram), (_, h) in zip(blocks, sizes):
        side = style.cell_size * diagram.dimension
        y_panel = y + style.title_space
        for k, which in enumerate(("re", "im")):
            x_panel = style.margin + style.label_space + k * (side + style.label_space + style.panel_gap)
            caption = f"{title} Re" if which == "re" else f"{title} Im"
            lines.append(
                f'<text class="title" x="{_num(x_panel + side / 2)}" y="{_num(y + style.font_size + 2)}" '
                f'font-size="{_num(style.font_size)}" text-anchor="middle">{escape(caption.strip())}</text>'
            )
            lines.extend(_panel_svg(diagram, which, x_panel, y_panel, style, title or "rho"))
        y += h
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def render_svg(diagram: HintonDiagram, style: SvgStyle | None = None, title: str = "") -> str:
    return render_blocks([(title, diagram)], style)


def render_svg_pair(rho_in: HintonDiagram, rho_out: HintonDiagram, style: SvgStyle | None = None) -> str:
    return render_blocks([("rho_in", rho_in), ("rho_out", rho_out)], style)


# --------------------------------------------------------------------------
# text


def block_char(ratio: float) -> str:
    for k, t in enumerate(THRESHOLDS):
        if ratio < t:
            return BLOCKS[k]
    return BLOCKS[-1]


def text_grid(diagram: HintonDiagram, which: str = "re", width: int | None = None) -> list[str]:
    dim = diagram.dimension
    width = dim if width is None else width
    if width < dim:
        raise ValueError(f"width {width} is narrower than the {dim} columns")
    reps = width // dim
    peak = diagram.max_magnitude
    rows = []
    for row in diagram.panel(which):
        chars = [block_char(c.magnitude / peak if peak > 0 else 0.0) * reps for c in row]
        rows.append("".join(chars))
    return rows


def _sign_legend(diagram: HintonDiagram, which: str) -> list[str]:
    peak = diagram.max_magnitude
    out = []
    for row in diagram.panel(which):
        out.append(
            "".join(
                ("−" if c.sign == "-" else "+")
                if peak > 0 and c.magnitude / peak >= THRESHOLDS[0]
                else " "
                for c in row
            )
        )
    return out


def render_text(diagram: HintonDiagram, width: int | None = None) -> str:
    """Both panels as block characters, each row prefixed by its sign legend."""
    lines = []
    for which, name in (("re", "Re"), ("im", "Im")):
        lines.append(f"{name} (max {diagram.max_magnitude:.6g})")
        for signs, blocks, label in zip(
            _sign_legend(diagram, which), text_grid(diagram, which, width), diagram.basis_labels
        ):
            lines.append(f"{signs} │{blocks}│ {label}")
    return "\n".join(lines)
