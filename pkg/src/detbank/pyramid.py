"""Spatial pyramid geometry: grid cells over the unit square and
center-based cell membership.

Cells are half-open rectangles, except that the last row and column of each
level are closed on their far edge, so a point at 1.0 belongs to the last
cell.  This makes every level an exact partition of the unit square.
Flat indices run row-major within a level, levels concatenated in the
configured order; index 0 of the default levels (1, 2, 4) is the whole
image.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True, slots=True)
class Region:
    level_index: int
    subdivision: int
    row: int
    col: int
    x0: float
    y0: float
    x1: float
    y1: float
    flat_index: int

    def contains(self, x: float, y: float) -> bool:
        n = self.subdivision
        in_x = self.x0 <= x and (x < self.x1 or (self.col == n - 1 and x <= self.x1))
        in_y = self.y0 <= y and (y < self.y1 or (self.row == n - 1 and y <= self.y1))
        return in_x and in_y


def enumerate_regions(levels: Sequence[int]) -> list[Region]:
    """Emit the n*n cells of each subdivision, row-major, levels in order."""
    if not levels:
        raise ValueError("level list must be nonempty")
    regions: list[Region] = []
    flat = 0
    for level_index, n in enumerate(levels):
        n = int(n)
        if n < 1:
            raise ValueError(f"subdivision must be >= 1, got {n}")
        for row in range(n):
            for col in range(n):
                regions.append(
                    Region(
                        level_index=level_index,
                        subdivision=n,
                        row=row,
                        col=col,
                        x0=col / n,
                        y0=row / n,
                        x1=(col + 1) / n,
                        y1=(row + 1) / n,
                        flat_index=flat,
                    )
                )
                flat += 1
    return regions


def locate_cell(v: float, n: int) -> int:
    """Cell index of coordinate ``v`` in an ``n``-way split of [0,1].

    Arithmetic fast path with a fixup so the result always agrees with the
    half-open bounds comparisons of :meth:`Region.contains`.
    """
    c = int(v * n)
    if c >= n:
        c = n - 1
    if v < c / n:
        c -= 1
    elif c + 1 < n and v >= (c + 1) / n:
        c += 1
    return c


def locate_cells(v: np.ndarray, n: int) -> np.ndarray:
    """Vectorized :func:`locate_cell` over an array of coordinates."""
    c = (v * n).astype(np.int64)
    np.minimum(c, n - 1, out=c)
    c -= v < c / n
    c += (v >= (c + 1) / n) & (c + 1 < n)
    return c


def level_table(regions: Sequence[Region]) -> list[tuple[int, int]]:
    """(flat offset, subdivision) per level; validates contiguous layout."""
    table: list[tuple[int, int]] = []
    expected_flat = 0
    i = 0
    while i < len(regions):
        first = regions[i]
        n = first.subdivision
        count = n * n
        block = regions[i : i + count]
        if len(block) != count or any(
            r.subdivision != n or r.level_index != first.level_index for r in block
        ):
            raise ValueError("region list is not a contiguous pyramid enumeration")
        if first.flat_index != expected_flat:
            raise ValueError("region flat indices have gaps")
        table.append((expected_flat, n))
        expected_flat += count
        i += count
    return table


def region_membership(center: tuple[float, float], regions: Sequence[Region]) -> list[int]:
    """Flat indices of the one cell per level containing ``center``."""
    x, y = center
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise ValueError(f"center must lie in the unit square, got {center}")
    indices = []
    for offset, n in level_table(regions):
        row = locate_cell(y, n)
        col = locate_cell(x, n)
        indices.append(offset + row * n + col)
    return indices
