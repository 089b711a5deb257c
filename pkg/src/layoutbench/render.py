"""Deterministic rasterization of matrices, Life grids and the plain-flow layout.

Images are produced at their natural size: every dimension follows from the
layout formulas below, nothing is resized afterwards.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from . import font
from .textio import format_entry

RGB = tuple[int, int, int]
WHITE: RGB = (255, 255, 255)
BLACK: RGB = (0, 0, 0)


def _check_nonnegative(spec) -> None:
    for f in fields(spec):
        v = getattr(spec, f.name)
        if isinstance(v, int) and not isinstance(v, bool) and v < 0:
            raise ValueError(f"{type(spec).__name__}.{f.name} must be nonnegative, got {v}")
        if f.name.endswith("_color"):
            if len(v) != 3 or not all(0 <= c <= 255 for c in v):
                raise ValueError(f"{f.name} must be an RGB triple")
    if spec.font_size < 1:
        raise ValueError("font_size must be positive")


@dataclass(frozen=True)
class MatrixRenderSpec:
    font_size: int = 16
    cell_padding_x: int = 6
    cell_padding_y: int = 4
    margin: int = 12
    bracket_gap: int = 4
    bracket_width: int = 6
    bracket_thickness: int = 2
    cell_align: str = "right"
    background_color: RGB = WHITE
    foreground_color: RGB = BLACK

    def __post_init__(self):
        _check_nonnegative(self)
        if self.bracket_thickness > self.bracket_width:
            raise ValueError("bracket_thickness must not exceed bracket_width")
        if self.cell_align not in ("left", "center", "right"):
            raise ValueError(f"bad cell_align {self.cell_align!r}")


@dataclass(frozen=True)
class GridRenderSpec:
    font_size: int = 16
    cell_padding: int = 6
    grid_thickness: int = 2
    margin: int = 12
    background_color: RGB = WHITE
    foreground_color: RGB = BLACK

    def __post_init__(self):
        _check_nonnegative(self)


@dataclass(frozen=True)
class FlowRenderSpec:
    font_size: int = 16
    margin: int = 12
    line_gap: int = 6
    word_gap_spaces: int = 1
    background_color: RGB = WHITE
    foreground_color: RGB = BLACK

    def __post_init__(self):
        _check_nonnegative(self)
        if self.word_gap_spaces < 1:
            raise ValueError("word_gap_spaces must be at least 1")


@dataclass(frozen=True, eq=False)
class RasterImage:
    pixels: np.ndarray  # (height, width, 3) uint8

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        return isinstance(other, RasterImage) and np.array_equal(self.pixels, other.pixels)

    def to_png(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.pixels, mode="RGB").save(buf, format="PNG", optimize=False)
        return buf.getvalue()

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.to_png())
        return path


def measure_text(tokens: Sequence[str], font_size: int) -> tuple[list[int], int]:
    """Per-token pixel widths and the glyph height."""
    adv = font.advance(font_size)
    widths = []
    for t in tokens:
        font.check_text(t)
        widths.append(adv * len(t))
    return widths, font.glyph_height(font_size)


def _canvas(width: int, height: int, color: RGB) -> np.ndarray:
    img = np.empty((height, width, 3), dtype=np.uint8)
    img[:, :] = color
    return img


def _draw_text(img: np.ndarray, text: str, x: int, y: int, font_size: int, color: RGB) -> None:
    scale = font.scale_for(font_size)
    adv = font.advance(font_size)
    for k, ch in enumerate(text):
        mask = font.glyph(ch, scale)
        h, w = mask.shape
        img[y:y + h, x + k * adv:x + k * adv + w][mask] = color


def _tokens(m) -> list[list[str]]:
    return [[format_entry(v) for v in row] for row in np.asarray(m)]


@dataclass(frozen=True)
class _MatrixLayout:
    col_widths: list[int]
    glyph_h: int
    content_w: int
    content_h: int
    width: int
    height: int


def _matrix_layout(tokens: list[list[str]], spec: MatrixRenderSpec) -> _MatrixLayout:
    rows, cols = len(tokens), len(tokens[0])
    flat, glyph_h = measure_text([t for r in tokens for t in r], spec.font_size)
    widths = np.array(flat).reshape(rows, cols)
    col_widths = widths.max(axis=0).tolist()
    content_w = sum(col_widths) + (cols - 1) * spec.cell_padding_x
    content_h = rows * glyph_h + (rows - 1) * spec.cell_padding_y
    width = content_w + 2 * (spec.bracket_width + spec.bracket_gap) + 2 * spec.margin
    height = content_h + 2 * spec.margin
    return _MatrixLayout(col_widths, glyph_h, content_w, content_h, width, height)


def derive_flow_canvas_width(m, matrix_spec: MatrixRenderSpec = MatrixRenderSpec()) -> int:
    """Width the native matrix rendering of ``m`` occupies, margins and brackets included."""
    return _matrix_layout(_tokens(m), matrix_spec).width


def _draw_bracket(img, x0, y0, h, spec: MatrixRenderSpec, side: str) -> None:
    bw, bt = spec.bracket_width, spec.bracket_thickness
    fg = spec.foreground_color
    if bt == 0 or h == 0:
        return
    stroke_x = x0 if side == "left" else x0 + bw - bt
    img[y0:y0 + h, stroke_x:stroke_x + bt] = fg
    img[y0:y0 + bt, x0:x0 + bw] = fg
    img[y0 + h - bt:y0 + h, x0:x0 + bw] = fg


def render_matrix(m, spec: MatrixRenderSpec = MatrixRenderSpec()) -> RasterImage:
    tokens = _tokens(m)
    lay = _matrix_layout(tokens, spec)
    img = _canvas(lay.width, lay.height, spec.background_color)
    top = spec.margin
    left_x = spec.margin
    content_x = left_x + spec.bracket_width + spec.bracket_gap
    right_x = content_x + lay.content_w + spec.bracket_gap
    _draw_bracket(img, left_x, top, lay.content_h, spec, "left")
    _draw_bracket(img, right_x, top, lay.content_h, spec, "right")

    adv = font.advance(spec.font_size)
    col_x = np.concatenate([[0], np.cumsum(np.array(lay.col_widths) + spec.cell_padding_x)])
    for i, row in enumerate(tokens):
        y = top + i * (lay.glyph_h + spec.cell_padding_y)
        for j, tok in enumerate(row):
            slack = lay.col_widths[j] - adv * len(tok)
            offset = {"left": 0, "center": slack // 2, "right": slack}[spec.cell_align]
            _draw_text(img, tok, content_x + int(col_x[j]) + offset, y,
                       spec.font_size, spec.foreground_color)
    return RasterImage(img)


def grid_cell_side(spec: GridRenderSpec) -> int:
    return font.glyph_height(spec.font_size) + 2 * spec.cell_padding


def render_grid(g, spec: GridRenderSpec = GridRenderSpec()) -> RasterImage:
    g = np.asarray(g)
    rows, cols = g.shape
    side = grid_cell_side(spec)
    t = spec.grid_thickness
    width = 2 * spec.margin + (cols + 1) * t + cols * side
    height = 2 * spec.margin + (rows + 1) * t + rows * side
    img = _canvas(width, height, spec.background_color)
    fg = spec.foreground_color
    m = spec.margin
    for k in range(rows + 1):
        y = m + k * (side + t)
        img[y:y + t, m:width - m] = fg
    for k in range(cols + 1):
        x = m + k * (side + t)
        img[m:height - m, x:x + t] = fg
    dx = (side - font.ink_width(spec.font_size)) // 2
    for i in range(rows):
        for j in range(cols):
            x = m + t + j * (side + t) + dx
            y = m + t + i * (side + t) + spec.cell_padding
            _draw_text(img, format_entry(g[i, j]), x, y, spec.font_size, fg)
    return RasterImage(img)


def flow_lines(tokens: Sequence[str], canvas_width: int, spec: FlowRenderSpec) -> list[list[int]]:
    """Greedy wrap: indices of the tokens on each line. Tokens are never split."""
    widths, _ = measure_text(tokens, spec.font_size)
    usable = canvas_width - 2 * spec.margin
    gap = spec.word_gap_spaces * font.advance(spec.font_size)
    lines: list[list[int]] = []
    line_w = 0
    for k, w in enumerate(widths):
        if w > usable:
            raise ValueError(f"token {tokens[k]!r} ({w}px) is wider than the usable width {usable}px")
        if lines and lines[-1] and line_w + gap + w <= usable:
            lines[-1].append(k)
            line_w += gap + w
        else:
            lines.append([k])
            line_w = w
    return lines


def render_flow(serialized_text: str, canvas_width: int,
                spec: FlowRenderSpec = FlowRenderSpec()) -> RasterImage:
    """Render whitespace-split tokens left to right, wrapping at the canvas edge."""
    tokens = serialized_text.split()
    if not tokens:
        raise ValueError("nothing to render")
    lines = flow_lines(tokens, canvas_width, spec)
    adv = font.advance(spec.font_size)
    gh = font.glyph_height(spec.font_size)
    gap = spec.word_gap_spaces * adv
    height = 2 * spec.margin + len(lines) * gh + (len(lines) - 1) * spec.line_gap
    img = _canvas(canvas_width, height, spec.background_color)
    for li, line in enumerate(lines):
        x = spec.margin
        y = spec.margin + li * (gh + spec.line_gap)
        for k in line:
            _draw_text(img, tokens[k], x, y, spec.font_size, spec.foreground_color)
            x += adv * len(tokens[k]) + gap
    return RasterImage(img)
