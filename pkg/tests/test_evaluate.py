import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from camsel.evaluate import (
    EvalReport,
    PairMatrix,
    iou,
    miou_per_class,
    read_pair_matrix_csv,
    threshold_map,
    top1_report,
    topk_fused_eval,
    topk_select_from_matrix,
    write_pair_matrix_csv,
    write_report_csv,
)
from camsel.tensorio import ActivationMap, BinaryMask


def iou_oracle(pred, gt):
    """Set-arithmetic IoU over explicit coordinate sets."""
    p = {(i, j) for i, j in zip(*np.nonzero(pred))}
    g = {(i, j) for i, j in zip(*np.nonzero(gt))}
    if not p and not g:
        return None
    return len(p & g) / len(p | g)


class TestThresholdMap:
    def test_all_zero_map_empty_mask(self):
        mask = threshold_map(ActivationMap(np.zeros((3, 3))), 0.15)
        assert not mask.bits.any()

    def test_boundary_inclusive(self):
        m = ActivationMap(np.array([[0.1, 0.15], [0.2, 0.9]]))
        mask = threshold_map(m, 0.15)
        assert mask.bits.tolist() == [[False, True], [True, True]]

    def test_matches_elementwise_oracle(self):
        rng = np.random.default_rng(0)
        values = rng.random((6, 6))
        mask = threshold_map(ActivationMap(values), 0.4)
        for i in range(6):
            for j in range(6):
                assert mask.bits[i, j] == (values[i, j] >= 0.4)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), t1=st.floats(0, 1), t2=st.floats(0, 1))
    def test_monotone_in_threshold(self, seed, t1, t2):
        lo, hi = sorted((t1, t2))
        values = np.random.default_rng(seed).random((5, 5))
        m = ActivationMap(values)
        strict = threshold_map(m, hi).bits
        loose = threshold_map(m, lo).bits
        assert np.all(~strict | loose)  # mask(hi) subset of mask(lo)

    def test_rejects_bad_threshold(self):
        with pytest.raises(ValueError):
            threshold_map(ActivationMap(np.zeros((2, 2))), 1.5)


class TestIou:
    def test_identical_nonempty(self):
        bits = np.array([[True, False], [True, True]])
        assert iou(BinaryMask(bits), BinaryMask(bits)) == 1.0

    def test_disjoint_nonempty(self):
        a = BinaryMask(np.array([[True, False]]))
        b = BinaryMask(np.array([[False, True]]))
        assert iou(a, b) == 0.0

    def test_partial_overlap(self):
        gt = BinaryMask(np.array([[True, True, True, True, False]]))
        pred = BinaryMask(np.array([[True, True, False, False, True]]))
        assert iou(pred, gt) == pytest.approx(0.4)

    def test_both_empty_is_undefined(self):
        empty = BinaryMask(np.zeros((2, 2), dtype=bool))
        assert iou(empty, empty) is None

    def test_empty_pred_nonempty_gt(self):
        pred = BinaryMask(np.zeros((2, 2), dtype=bool))
        gt = BinaryMask(np.ones((2, 2), dtype=bool))
        assert iou(pred, gt) == 0.0

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            iou(BinaryMask(np.zeros((2, 2), dtype=bool)), BinaryMask(np.zeros((2, 3), dtype=bool)))

    def test_exhaustive_2x2_against_oracle(self):
        for a in range(16):
            for b in range(16):
                pa = np.array([(a >> k) & 1 for k in range(4)], dtype=bool).reshape(2, 2)
                pb = np.array([(b >> k) & 1 for k in range(4)], dtype=bool).reshape(2, 2)
                assert iou(BinaryMask(pa), BinaryMask(pb)) == iou_oracle(pa, pb)

    def test_monotone_in_correct_pixels(self):
        rng = np.random.default_rng(1)
        gt_bits = rng.random((4, 4)) > 0.4
        pred = gt_bits & (rng.random((4, 4)) > 0.5)
        missing = list(zip(*np.nonzero(gt_bits & ~pred)))
        prev = iou(BinaryMask(pred), BinaryMask(gt_bits))
        prev = -1.0 if prev is None else prev
        for i, j in missing:
            pred = pred.copy()
            pred[i, j] = True
            cur = iou(BinaryMask(pred), BinaryMask(gt_bits))
            assert cur >= prev
            prev = cur


class TestMiouPerClass:
    def test_single_perfect_image(self):
        m = ActivationMap(np.array([[1.0, 0.0], [0.0, 0.0]]))
        gt = BinaryMask(np.array([[True, False], [False, False]]))
        report = miou_per_class({"a": m}, {"a": gt}, {"a": 0}, 0.15, ["only"])
        assert report.per_class == {"only": 1.0}
        assert report.average == 1.0
        assert report.counts == {"only": 1}

    def test_unweighted_class_average(self):
        maps, gts, class_of = {}, {}, {}
        # class 0: one image at IoU 0.2 (1 of 5 union pixels)
        maps["a"] = ActivationMap(np.array([[1.0, 1.0, 1.0, 1.0, 1.0, 0.0]]))
        gts["a"] = BinaryMask(np.array([[True, False, False, False, False, False]]))
        class_of["a"] = 0
        # class 1: two images at IoU 0.6 each -> mean 0.6
        base = np.zeros((1, 5))
        base[0, :3] = 1.0
        gt_bits = np.zeros((1, 5), dtype=bool)
        gt_bits[0, :5] = True
        for name in ("b", "c"):
            maps[name] = ActivationMap(base)
            gts[name] = BinaryMask(gt_bits)
            class_of[name] = 1
        report = miou_per_class(maps, gts, class_of, 0.5, ["x", "y"])
        assert report.per_class["x"] == pytest.approx(0.2)
        assert report.per_class["y"] == pytest.approx(0.6)
        assert report.average == pytest.approx(0.4)

    def test_undefined_images_excluded_and_absent_class_dropped(self):
        maps = {
            "a": ActivationMap(np.zeros((2, 2))),  # undefined: both empty
            "b": ActivationMap(np.array([[1.0, 0.0], [0.0, 0.0]])),
        }
        gts = {
            "a": BinaryMask(np.zeros((2, 2), dtype=bool)),
            "b": BinaryMask(np.array([[True, True], [False, False]])),
        }
        report = miou_per_class(maps, gts, {"a": 0, "b": 1}, 0.15, ["none", "some"])
        assert "none" not in report.per_class
        assert report.per_class["some"] == pytest.approx(0.5)

    def test_matches_flat_recomputation_oracle(self):
        rng = np.random.default_rng(7)
        names = ["p", "q", "r"]
        maps, gts, class_of = {}, {}, {}
        for k in range(12):
            img = f"i{k:02d}"
            maps[img] = ActivationMap(rng.random((5, 5)))
            gts[img] = BinaryMask(rng.random((5, 5)) > 0.5)
            class_of[img] = k % 3
        report = miou_per_class(maps, gts, class_of, 0.3, names)
        per_class = {}
        for img in maps:
            got = iou_oracle(maps[img].values >= 0.3, gts[img].bits)
            if got is not None:
                per_class.setdefault(names[class_of[img]], []).append(got)
        for name, vals in per_class.items():
            assert report.per_class[name] == pytest.approx(float(np.mean(vals)))
        assert report.average == pytest.approx(
            float(np.mean([np.mean(v) for v in per_class.values()]))
        )

    def test_missing_groundtruth(self):
        maps = {"a": ActivationMap(np.zeros((2, 2)))}
        with pytest.raises(KeyError, match="missing groundtruth"):
            miou_per_class(maps, {}, {"a": 0}, 0.15, ["x"])


def small_matrix():
    values = np.array(
        [
            [np.nan, 0.5, 0.1],
            [0.9, np.nan, 0.1],
            [0.2, 0.5, np.nan],
        ]
    )
    return PairMatrix(values, ("a", "b", "c"))


class TestPairMatrixOps:
    def test_topk_select(self):
        pm = small_matrix()
        assert topk_select_from_matrix(pm, 0, 1) == [1]
        assert topk_select_from_matrix(pm, 0, 2) == [1, 2]
        # ties in column c (both 0.1) break by ascending row index
        assert topk_select_from_matrix(pm, 2, 2) == [0, 1]

    def test_topk_k_bounds(self):
        with pytest.raises(ValueError):
            topk_select_from_matrix(small_matrix(), 0, 3)

    def test_topk_full_k_returns_every_comparison(self):
        pm = small_matrix()
        for target in range(pm.n):
            rows = topk_select_from_matrix(pm, target, pm.n - 1)
            assert sorted(rows) == [r for r in range(pm.n) if r != target]

    def test_top1_column_maxima(self):
        report = top1_report(small_matrix())
        assert report.per_class == {"a": 0.9, "b": 0.5, "c": 0.1}
        assert report.average == pytest.approx((0.9 + 0.5 + 0.1) / 3)

    def test_top1_constant_matrix(self):
        values = np.full((3, 3), 0.25)
        report = top1_report(PairMatrix(values, ("a", "b", "c")))
        assert set(report.per_class.values()) == {0.25}
        assert report.average == pytest.approx(0.25)

    def test_top1_column_permutation_equivariance(self):
        pm = small_matrix()
        perm = [2, 0, 1]
        permuted = PairMatrix(
            pm.values[np.ix_(perm, perm)], tuple(pm.class_names[i] for i in perm)
        )
        a = top1_report(pm)
        b = top1_report(permuted)
        assert a.per_class == b.per_class
        assert a.average == pytest.approx(b.average)

    def test_csv_round_trip(self, tmp_path):
        pm = small_matrix()
        path = tmp_path / "pm.csv"
        write_pair_matrix_csv(pm, path)
        loaded = read_pair_matrix_csv(path)
        assert loaded.class_names == pm.class_names
        off = ~np.eye(3, dtype=bool)
        assert np.array_equal(loaded.values[off], pm.values[off])


class TestTopkFusedEval:
    def make_scene(self):
        # Object = 4 pixels; comparison 1 lights the left half, 2 the right half.
        gt = BinaryMask(np.array([[True, True, True, True, False, False]]))
        left = ActivationMap(np.array([[1.0, 1.0, 0.0, 0.0, 0.0, 0.0]]))
        right = ActivationMap(np.array([[0.0, 0.0, 1.0, 1.0, 0.0, 0.0]]))
        values = np.array(
            [
                [np.nan, 0.0, 0.0],
                [0.5, np.nan, 0.0],
                [0.5, 0.0, np.nan],
            ]
        )
        pm = PairMatrix(values, ("t", "l", "r"))
        pair_maps = {("img", 1): left, ("img", 2): right}
        return pm, pair_maps, {"img": gt}, {"img": 0}

    def test_k1_equals_best_single_pair(self):
        pm, pair_maps, gts, class_of = self.make_scene()
        report = topk_fused_eval(1, pm, pair_maps, gts, class_of, 0.15)
        assert report.per_class["t"] == pytest.approx(0.5)

    def test_k2_fusion_beats_singles(self):
        pm, pair_maps, gts, class_of = self.make_scene()
        fused = topk_fused_eval(2, pm, pair_maps, gts, class_of, 0.15)
        single = topk_fused_eval(1, pm, pair_maps, gts, class_of, 0.15)
        assert fused.per_class["t"] == pytest.approx(1.0)
        assert fused.per_class["t"] > single.per_class["t"]

    def test_missing_pair_map(self):
        pm, pair_maps, gts, class_of = self.make_scene()
        del pair_maps[("img", 2)]
        with pytest.raises(KeyError, match="missing pair map"):
            topk_fused_eval(2, pm, pair_maps, gts, class_of, 0.15)


class TestReports:
    def test_report_invariant_enforced(self):
        with pytest.raises(ValueError):
            EvalReport(per_class={"a": 0.5, "b": 0.7}, average=0.9, threshold=0.15)

    def test_csv_layout(self, tmp_path):
        report = EvalReport(
            per_class={"b": 0.25, "a": 0.75},
            average=0.5,
            threshold=0.15,
            counts={"a": 2, "b": 1},
        )
        path = tmp_path / "report.csv"
        write_report_csv(report, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "class,miou,count"
        assert lines[1].startswith("a,0.75,2")
        assert lines[-1].startswith("__avg__,0.5,3")
