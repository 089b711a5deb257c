"""Fixed-advance bitmap font for digits, '-', '.' and space.

Each glyph is 3x5 ink inside a 4x7 cell (one blank column on the right, one
blank row above and below), scaled by an integer factor.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

CELL_W, CELL_H = 4, 7
INK_W, INK_H = 3, 5
BASE_FONT_SIZE = 8

_GLYPHS = {
    "0": ("###", "#.#", "#.#", "#.#", "###"),
    "1": (".#.", "##.", ".#.", ".#.", "###"),
    "2": ("###", "..#", "###", "#..", "###"),
    "3": ("###", "..#", "###", "..#", "###"),
    "4": ("#.#", "#.#", "###", "..#", "..#"),
    "5": ("###", "#..", "###", "..#", "###"),
    "6": ("###", "#..", "###", "#.#", "###"),
    "7": ("###", "..#", ".#.", ".#.", ".#."),
    "8": ("###", "#.#", "###", "#.#", "###"),
    "9": ("###", "#.#", "###", "..#", "###"),
    "-": ("...", "...", "###", "...", "..."),
    ".": ("...", "...", "...", "...", ".#."),
    " ": ("...", "...", "...", "...", "..."),
}

CHARSET = frozenset(_GLYPHS)


class UnsupportedGlyphError(ValueError):
    pass


def scale_for(font_size: int) -> int:
    """Integer scale factor; 8px per scale step, never below 1."""
    return max(1, int(font_size) // BASE_FONT_SIZE)


def advance(font_size: int) -> int:
    return CELL_W * scale_for(font_size)


def glyph_height(font_size: int) -> int:
    return CELL_H * scale_for(font_size)


def ink_width(font_size: int) -> int:
    return INK_W * scale_for(font_size)


@lru_cache(maxsize=None)
def glyph(ch: str, scale: int) -> np.ndarray:
    """Boolean mask of shape (CELL_H*scale, CELL_W*scale)."""
    try:
        rows = _GLYPHS[ch]
    except KeyError:
        raise UnsupportedGlyphError(f"no glyph for {ch!r}") from None
    cell = np.zeros((CELL_H, CELL_W), dtype=bool)
    cell[1:1 + INK_H, :INK_W] = np.array([[c == "#" for c in r] for r in rows])
    out = np.kron(cell, np.ones((scale, scale), dtype=bool)).astype(bool)
    out.setflags(write=False)
    return out


def check_text(text: str) -> None:
    bad = set(text) - CHARSET
    if bad:
        raise UnsupportedGlyphError(f"no glyph for {''.join(sorted(bad))!r}")
