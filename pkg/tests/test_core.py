import math

import pytest
from hypothesis import given, strategies as st

from dbfusion.core import BoundingBox, DataError, Detection, iou


def boxes():
    coord = st.floats(-1000, 1000, allow_nan=False, width=64)
    size = st.floats(0.01, 500, allow_nan=False, width=64)
    return st.builds(
        lambda x, y, w, h: BoundingBox(x, y, x + w, y + h), coord, coord, size, size
    )


class TestBoundingBox:
    def test_rejects_degenerate(self):
        with pytest.raises(DataError):
            BoundingBox(10, 10, 5, 20)
        with pytest.raises(DataError):
            BoundingBox(0, 0, 10, 0)

    def test_rejects_non_finite(self):
        with pytest.raises(DataError):
            BoundingBox(0, 0, math.inf, 10)
        with pytest.raises(DataError):
            BoundingBox(math.nan, 0, 10, 10)

    def test_area(self):
        assert BoundingBox(0, 0, 10, 4).area == 40


class TestIou:
    def test_identical(self):
        b = BoundingBox(0, 0, 10, 10)
        assert iou(b, b) == 1.0

    def test_disjoint(self):
        assert iou(BoundingBox(0, 0, 10, 10), BoundingBox(20, 20, 30, 30)) == 0.0

    def test_half_overlap(self):
        # inter = 50, union = 150
        v = iou(BoundingBox(0, 0, 10, 10), BoundingBox(5, 0, 15, 10))
        assert v == pytest.approx(1 / 3, abs=1e-15)

    def test_touching_edges_is_zero(self):
        assert iou(BoundingBox(0, 0, 10, 10), BoundingBox(10, 0, 20, 10)) == 0.0

    @given(boxes(), boxes())
    def test_symmetric(self, a, b):
        assert iou(a, b) == iou(b, a)

    @given(boxes())
    def test_self_iou_is_one(self, b):
        assert iou(b, b) == 1.0

    @given(boxes(), boxes())
    def test_bounded(self, a, b):
        assert 0.0 <= iou(a, b) <= 1.0


class TestDetection:
    def test_requires_ids(self):
        b = BoundingBox(0, 0, 1, 1)
        with pytest.raises(DataError):
            Detection("", "c", b, 0.5, "s")
        with pytest.raises(DataError):
            Detection("i", "", b, 0.5, "s")

    def test_rejects_non_finite_score(self):
        with pytest.raises(DataError):
            Detection("i", "c", BoundingBox(0, 0, 1, 1), math.inf, "s")

    def test_none_score_allowed(self):
        # no-evidence records produced by classification broadcast
        d = Detection("i", "c", BoundingBox(0, 0, 1, 1), None, "s")
        assert d.score is None
