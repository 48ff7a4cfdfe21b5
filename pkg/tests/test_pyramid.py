"""Grid enumeration and center membership."""

import numpy as np
import pytest

from detbank import enumerate_regions, region_membership
from detbank.pyramid import locate_cell, locate_cells


class TestEnumerateRegions:
    def test_single_level(self):
        regions = enumerate_regions([1])
        assert len(regions) == 1
        r = regions[0]
        assert (r.x0, r.y0, r.x1, r.y1) == (0.0, 0.0, 1.0, 1.0)
        assert r.flat_index == 0

    def test_default_levels_give_21_regions(self):
        assert len(enumerate_regions([1, 2, 4])) == 21

    def test_levels_1_3(self):
        regions = enumerate_regions([1, 3])
        assert len(regions) == 10
        cell = regions[1]  # first cell of the 3x3 level
        assert cell.x1 - cell.x0 == pytest.approx(1 / 3)
        assert cell.y1 - cell.y0 == pytest.approx(1 / 3)

    def test_row_major_flat_order(self):
        regions = enumerate_regions([2])
        coords = [(r.row, r.col) for r in regions]
        assert coords == [(0, 0), (0, 1), (1, 0), (1, 1)]
        assert [r.flat_index for r in regions] == [0, 1, 2, 3]

    def test_flat_indices_contiguous_across_levels(self):
        regions = enumerate_regions([1, 2, 4])
        assert [r.flat_index for r in regions] == list(range(21))
        assert regions[0].subdivision == 1
        assert regions[1].subdivision == 2
        assert regions[5].subdivision == 4

    def test_stable_across_calls(self):
        assert enumerate_regions([1, 2, 4]) == enumerate_regions([1, 2, 4])

    def test_empty_levels_rejected(self):
        with pytest.raises(ValueError, match="nonempty"):
            enumerate_regions([])
        with pytest.raises(ValueError, match=">= 1"):
            enumerate_regions([1, 0])


class TestMembership:
    def test_center_point(self):
        regions = enumerate_regions([1, 2, 4])
        # 0.5 lands in the second half of each split (half-open cells)
        assert region_membership((0.5, 0.5), regions) == [0, 1 + 1 * 2 + 1, 5 + 2 * 4 + 2]

    def test_origin(self):
        regions = enumerate_regions([1, 2, 4])
        assert region_membership((0.0, 0.0), regions) == [0, 1, 5]

    def test_far_corner_closed(self):
        regions = enumerate_regions([1, 2, 4])
        assert region_membership((1.0, 1.0), regions) == [0, 4, 20]

    def test_one_region_per_level(self):
        regions = enumerate_regions([1, 3, 5])
        assert len(region_membership((0.37, 0.91), regions)) == 3

    def test_outside_center_rejected(self):
        with pytest.raises(ValueError, match="unit square"):
            region_membership((1.5, 0.5), enumerate_regions([1]))

    def test_partition_by_exhaustive_sampling(self):
        regions = enumerate_regions([1, 2, 3, 4, 7])
        pts = np.linspace(0.0, 1.0, 101)
        for x in pts:
            for y in pts:
                hits = [r.flat_index for r in regions if r.contains(x, y)]
                assert hits == region_membership((x, y), regions)

    def test_locate_cell_agrees_with_bounds(self, rng):
        # random + boundary-adjacent coordinates across many subdivisions
        for n in (1, 2, 3, 4, 5, 7, 16, 64):
            edges = np.array([k / n for k in range(n + 1)])
            coords = np.concatenate(
                [
                    rng.uniform(0, 1, 400),
                    edges,
                    np.nextafter(edges, -1),
                    np.nextafter(edges, 2),
                ]
            )
            coords = coords[(coords >= 0) & (coords <= 1)]
            cells = locate_cells(coords, n)
            for v, c in zip(coords, cells):
                assert locate_cell(float(v), n) == c
                lo = c / n
                hi = (c + 1) / n
                assert lo <= v
                assert v < hi or (c == n - 1 and v <= hi)


class TestConservation:
    def test_counts_per_level_sum_to_whole_image(self, rng):
        regions = enumerate_regions([1, 2, 4])
        by_level = {}
        for r in regions:
            by_level.setdefault(r.level_index, []).append(r)
        centers = rng.uniform(0, 1, size=(500, 2))
        for level, cells in by_level.items():
            total = 0
            for x, y in centers:
                total += sum(1 for r in cells if r.contains(x, y))
            assert total == len(centers)
