import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualview.errors import DimensionMismatch, InvalidRle
from dualview.masks import (
    BBox,
    BinaryMask,
    PlacedMask,
    bbox_iou,
    bbox_of_mask,
    connected_components,
    mask_iou,
    placed_iou,
    rle_decode,
    rle_encode,
)

from conftest import random_mask
from oracles import flood_fill_components, iou_boxes, iou_pixels, rle_decode_reference


class TestRleCodec:
    def test_all_zero(self):
        m = BinaryMask.zeros(2, 2)
        assert rle_encode(m).counts == (4,)

    def test_all_one(self):
        m = BinaryMask(np.ones((2, 2), dtype=bool))
        assert rle_encode(m).counts == (0, 4)

    def test_single_pixel_column_major(self):
        # foreground at (row 0, col 1): scan order r0c0, r1c0, r0c1, r1c1
        m = BinaryMask(np.array([[0, 1], [0, 0]], dtype=bool))
        assert rle_encode(m).counts == (2, 1, 1)

    def test_decode_examples(self):
        from dualview.masks import RleMask

        assert rle_decode(RleMask(2, 2, (4,))) == BinaryMask.zeros(2, 2)
        assert rle_decode(RleMask(2, 2, (0, 4))) == BinaryMask(np.ones((2, 2), dtype=bool))
        decoded = rle_decode(RleMask(2, 2, (2, 1, 1)))
        assert decoded == BinaryMask(np.array([[0, 1], [0, 0]], dtype=bool))

    def test_decode_rejects_bad_total(self):
        from dualview.masks import RleMask

        with pytest.raises(InvalidRle):
            rle_decode(RleMask(2, 2, (3,)))

    def test_interior_zero_rejected(self):
        from dualview.masks import RleMask

        with pytest.raises(InvalidRle):
            RleMask(2, 2, (1, 0, 3))

    def test_roundtrip_random(self, rng):
        for _ in range(300):
            w = int(rng.integers(1, 20))
            h = int(rng.integers(1, 20))
            m = random_mask(rng, w, h, float(rng.random()))
            assert rle_decode(rle_encode(m)) == m

    def test_decode_matches_reference(self, rng):
        for _ in range(50):
            m = random_mask(rng, int(rng.integers(1, 12)), int(rng.integers(1, 12)))
            rle = rle_encode(m)
            ref = rle_decode_reference(rle.counts, rle.width, rle.height)
            assert np.array_equal(rle_decode(rle).pixels, ref)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 9), st.integers(1, 9), st.integers(0, 2**30))
    def test_roundtrip_hypothesis(self, w, h, seed):
        m = random_mask(np.random.default_rng(seed), w, h, 0.5)
        assert rle_decode(rle_encode(m)) == m

    def test_area_equals_foreground_runs(self, rng):
        for _ in range(50):
            m = random_mask(rng, 9, 7)
            assert m.area() == rle_encode(m).foreground_area()


class TestMaskIou:
    def test_identity(self):
        m = BinaryMask(np.array([[1, 0], [1, 1]], dtype=bool))
        assert mask_iou(m, m) == 1.0

    def test_disjoint(self):
        a = BinaryMask(np.array([[1, 0], [0, 0]], dtype=bool))
        b = BinaryMask(np.array([[0, 0], [0, 1]], dtype=bool))
        assert mask_iou(a, b) == 0.0

    def test_third(self):
        a = BinaryMask(np.array([[1, 1], [0, 0]], dtype=bool))
        b = BinaryMask(np.array([[0, 1], [0, 1]], dtype=bool))
        assert mask_iou(a, b) == 1 / 3

    def test_both_empty_is_zero(self):
        assert mask_iou(BinaryMask.zeros(3, 3), BinaryMask.zeros(3, 3)) == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            mask_iou(BinaryMask.zeros(2, 2), BinaryMask.zeros(3, 2))

    def test_against_bruteforce(self, rng):
        for _ in range(60):
            a = random_mask(rng, 11, 8)
            b = random_mask(rng, 11, 8)
            want = iou_pixels(a.pixels, b.pixels)
            got = mask_iou(a, b)
            assert got == want
            assert mask_iou(b, a) == got
            assert 0.0 <= got <= 1.0


class TestBBox:
    def test_identical(self):
        b = BBox(1, 2, 3, 4)
        assert bbox_iou(b, b) == 1.0

    def test_offset_square(self):
        a = BBox(0, 0, 10, 10)
        b = BBox(1, 1, 10, 10)
        assert bbox_iou(a, b) == 81 / 119

    def test_disjoint(self):
        assert bbox_iou(BBox(0, 0, 2, 2), BBox(5, 5, 2, 2)) == 0.0

    def test_zero_area(self):
        assert bbox_iou(BBox(0, 0, 0, 5), BBox(0, 0, 2, 2)) == 0.0

    def test_against_bruteforce(self, rng):
        for _ in range(60):
            a = BBox(*rng.uniform(0, 10, 2), *rng.uniform(0, 10, 2))
            b = BBox(*rng.uniform(0, 10, 2), *rng.uniform(0, 10, 2))
            assert bbox_iou(a, b) == iou_boxes((a.x, a.y, a.w, a.h), (b.x, b.y, b.w, b.h))

    def test_negative_sides_rejected(self):
        with pytest.raises(DimensionMismatch):
            BBox(0, 0, -1, 1)


class TestBboxOfMask:
    def test_empty(self):
        assert bbox_of_mask(BinaryMask.zeros(4, 4)) == BBox(0, 0, 0, 0)

    def test_full(self):
        m = BinaryMask(np.ones((5, 7), dtype=bool))
        assert bbox_of_mask(m) == BBox(0, 0, 7, 5)

    def test_two_pixels(self):
        m = BinaryMask.zeros(5, 5)
        m.pixels[1, 1] = True
        m.pixels[3, 2] = True
        assert bbox_of_mask(m) == BBox(1, 1, 2, 3)

    def test_tightness(self, rng):
        for _ in range(40):
            m = random_mask(rng, 9, 9, 0.2)
            if m.area() == 0:
                continue
            box = bbox_of_mask(m)
            rows, cols = np.nonzero(m.pixels)
            assert box.x <= cols.min() and cols.max() < box.x + box.w
            assert box.y <= rows.min() and rows.max() < box.y + box.h
            # no smaller box contains all foreground
            assert box.w == cols.max() - cols.min() + 1
            assert box.h == rows.max() - rows.min() + 1


class TestConnectedComponents:
    def test_empty(self):
        count, labels = connected_components(BinaryMask.zeros(3, 3))
        assert count == 0
        assert not labels.any()

    def test_two_separated(self):
        m = BinaryMask(np.array([[1, 0], [0, 0], [1, 0]], dtype=bool))
        assert connected_components(m, 4)[0] == 2
        assert connected_components(m, 8)[0] == 2

    def test_diagonal_connectivity(self):
        m = BinaryMask(np.eye(2, dtype=bool))
        assert connected_components(m, 8)[0] == 1
        assert connected_components(m, 4)[0] == 2

    def test_first_encounter_order(self):
        m = BinaryMask(np.array([[0, 1, 0], [0, 0, 0], [1, 0, 1]], dtype=bool))
        count, labels = connected_components(m, 4)
        assert count == 3
        assert labels[0, 1] == 1
        assert labels[2, 0] == 2
        assert labels[2, 2] == 3

    def test_against_flood_fill(self, rng):
        for _ in range(60):
            m = random_mask(rng, 12, 10, 0.45)
            for conn in (4, 8):
                want_count, want_labels = flood_fill_components(m.pixels, conn)
                got_count, got_labels = connected_components(m, conn)
                assert got_count == want_count
                assert np.array_equal(got_labels, want_labels)

    def test_eight_le_four(self, rng):
        for _ in range(40):
            m = random_mask(rng, 10, 10, 0.5)
            assert connected_components(m, 8)[0] <= connected_components(m, 4)[0]


class TestPlacedMask:
    def test_rle_matches_dense_path(self, rng):
        for _ in range(80):
            w = int(rng.integers(1, 30))
            h = int(rng.integers(1, 30))
            m = random_mask(rng, w, h, float(rng.uniform(0, 0.7)))
            placed = PlacedMask.from_mask(m)
            assert placed.to_rle() == rle_encode(m)
            assert placed.to_mask() == m

    def test_iou_matches_dense(self, rng):
        for _ in range(50):
            a = random_mask(rng, 14, 9)
            b = random_mask(rng, 14, 9)
            assert placed_iou(PlacedMask.from_mask(a), PlacedMask.from_mask(b)) == mask_iou(a, b)

    def test_empty_roundtrip(self):
        placed = PlacedMask.empty(5, 4)
        assert placed.to_rle().counts == (20,)
        assert placed.bbox() == BBox(0, 0, 0, 0)

    def test_translated_clips(self):
        placed = PlacedMask.from_crop(6, 6, 0, 0, np.ones((2, 2), dtype=bool))
        moved = placed.translated(5, 0)
        assert moved.area() == 2
        gone = placed.translated(10, 10)
        assert gone.is_empty


class TestFillHoles:
    def test_interior_hole_filled(self):
        from dualview.masks import fill_holes

        donut = np.ones((5, 5), dtype=bool)
        donut[2, 2] = False
        filled = fill_holes(BinaryMask(donut))
        assert filled.area() == 25

    def test_no_holes_unchanged(self, rng):
        from dualview.masks import fill_holes

        from conftest import random_blob

        blob = random_blob(rng, 30, 30).to_mask()
        assert fill_holes(blob) == blob

    def test_off_by_default_in_fuse(self):
        from dualview.fusion import DvsConfig

        assert DvsConfig().fill_holes is False
