"""Fixed 8x8 bitmap glyphs for the five simulated digits.

Classic 8x8 console-font shapes, written out as ASCII art so the bitmaps can
be eyeballed and edited.  '#' marks an on pixel, '.' an off pixel.
"""

import numpy as np

__all__ = ["GLYPH_DIGITS", "GLYPHS", "glyph_array"]

_ART = {
    0: (
        ".#####..",
        "##...##.",
        "##..###.",
        "##.####.",
        "####.##.",
        "###..##.",
        ".#####..",
        "........",
    ),
    3: (
        ".####...",
        "##..##..",
        "....##..",
        "..###...",
        "....##..",
        "##..##..",
        ".####...",
        "........",
    ),
    6: (
        "..###...",
        ".##.....",
        "##......",
        "#####...",
        "##..##..",
        "##..##..",
        ".####...",
        "........",
    ),
    8: (
        ".####...",
        "##..##..",
        "##..##..",
        ".####...",
        "##..##..",
        "##..##..",
        ".####...",
        "........",
    ),
    9: (
        ".####...",
        "##..##..",
        "##..##..",
        ".#####..",
        "....##..",
        "...##...",
        ".###....",
        "........",
    ),
}

GLYPH_DIGITS = tuple(sorted(_ART))


def _parse(rows):
    grid = np.array([[1.0 if ch == "#" else 0.0 for ch in row] for row in rows])
    if grid.shape != (8, 8):
        raise ValueError(f"glyph bitmap must be 8x8, got {grid.shape}")
    return grid


GLYPHS = {digit: _parse(rows) for digit, rows in _ART.items()}


def glyph_array(digit):
    """8x8 float array of 0/1 pixels for one digit (read-only copy)."""
    if digit not in GLYPHS:
        raise ValueError(f"no glyph for digit {digit!r}; have {GLYPH_DIGITS}")
    return GLYPHS[digit].copy()
