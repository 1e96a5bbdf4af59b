import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from camsel.similarity import (
    EmptyClassWarning,
    ProbabilityRecord,
    SimilarityMatrix,
    build_similarity,
    rank_classes,
    read_probability_log,
    read_similarity_csv,
    symmetrize,
    write_probability_log,
    write_similarity_csv,
)


def accumulation_oracle(records, n):
    """Independent per-record accumulation with plain dict arithmetic."""
    b = [[0.0] * n for _ in range(n)]
    for rec in records:
        for j in range(n):
            if j != rec.true_class:
                b[rec.true_class][j] += float(rec.probs[j])
    return np.array(b)


def random_records(rng, n, count):
    records = []
    for k in range(count):
        raw = rng.random(n)
        records.append(
            ProbabilityRecord(f"img{k:03d}", int(rng.integers(n)), raw / raw.sum())
        )
    return records


class TestProbabilityRecord:
    def test_rejects_bad_sum(self):
        with pytest.raises(ValueError):
            ProbabilityRecord("x", 0, np.array([0.5, 0.4]))

    def test_rejects_out_of_range_values(self):
        with pytest.raises(ValueError):
            ProbabilityRecord("x", 0, np.array([1.2, -0.2]))

    def test_rejects_bad_true_class(self):
        with pytest.raises(ValueError):
            ProbabilityRecord("x", 2, np.array([0.5, 0.5]))


class TestBuildSimilarity:
    def test_single_record_mass(self):
        with pytest.warns(EmptyClassWarning):
            sim = build_similarity([ProbabilityRecord("a", 0, np.array([0.0, 1.0, 0.0]))], 3)
        assert sim.values[0].tolist() == [0.0, 1.0, 0.0]

    def test_additivity(self):
        recs = [
            ProbabilityRecord("a", 0, np.array([0.5, 0.25, 0.25])),
            ProbabilityRecord("b", 0, np.array([0.5, 0.25, 0.25])),
        ]
        with pytest.warns(EmptyClassWarning):
            sim = build_similarity(recs, 3)
        assert sim.values[0, 1] == pytest.approx(0.5)
        assert sim.values[0, 2] == pytest.approx(0.5)
        assert sim.values[0, 0] == 0.0

    def test_matches_accumulation_oracle(self):
        import warnings as _w

        rng = np.random.default_rng(5)
        recs = random_records(rng, 4, 10)
        with _w.catch_warnings():
            _w.simplefilter("ignore", EmptyClassWarning)
            sim = build_similarity(recs, 4)
        assert np.allclose(sim.values, accumulation_oracle(recs, 4), atol=1e-6)

    def test_empty_records_rejected(self):
        with pytest.raises(ValueError):
            build_similarity([], 3)

    def test_length_mismatch_rejected(self):
        rec = ProbabilityRecord("a", 0, np.array([0.5, 0.5]))
        with pytest.raises(ValueError, match="expected 3"):
            build_similarity([rec], 3)

    def test_empty_class_warns_with_zero_row(self):
        recs = [ProbabilityRecord("a", 0, np.array([0.6, 0.2, 0.2]))]
        with pytest.warns(EmptyClassWarning):
            sim = build_similarity(recs, 3)
        assert not sim.values[1].any() and not sim.values[2].any()

    def test_row_mass_bound(self):
        rng = np.random.default_rng(9)
        recs = random_records(rng, 5, 40)
        import warnings as _w

        with _w.catch_warnings():
            _w.simplefilter("ignore")
            sim = build_similarity(recs, 5)
        for i in range(5):
            count = sum(1 for r in recs if r.true_class == i)
            diag_mass = sum(float(r.probs[i]) for r in recs if r.true_class == i)
            assert sim.values[i].sum() + diag_mass == pytest.approx(count, abs=1e-4)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), perm_seed=st.integers(0, 2**31 - 1))
    def test_permutation_equivariance(self, seed, perm_seed):
        rng = np.random.default_rng(seed)
        n = 5
        recs = random_records(rng, n, 12)
        perm = np.random.default_rng(perm_seed).permutation(n)
        permuted = [
            ProbabilityRecord(r.image_id, int(perm[r.true_class]), r.probs[np.argsort(perm)])
            for r in recs
        ]
        import warnings as _w

        with _w.catch_warnings():
            _w.simplefilter("ignore")
            base = build_similarity(recs, n).values
            moved = build_similarity(permuted, n).values
        assert np.allclose(moved[np.ix_(perm, perm)], base, atol=1e-9)


class TestRankClasses:
    def test_direct_sort(self):
        sim = SimilarityMatrix(
            np.array([[0.0, 3.0, 1.0, 2.0], [1, 0, 0, 0], [1, 0, 0, 0], [1, 0, 0, 0]], dtype=float),
            ("a", "b", "c", "d"),
        )
        assert rank_classes(sim, 0).order == (1, 3, 2)

    def test_all_equal_breaks_ties_ascending(self):
        sim = SimilarityMatrix(np.ones((4, 4)) - np.eye(4), ("a", "b", "c", "d"))
        assert rank_classes(sim, 2).order == (0, 1, 3)

    def test_matches_sort_oracle(self):
        rng = np.random.default_rng(21)
        values = rng.random((6, 6))
        np.fill_diagonal(values, 0.0)
        sim = SimilarityMatrix(values, tuple("abcdef"))
        for i in range(6):
            expected = [
                j for _, j in sorted(
                    ((-values[i, j], j) for j in range(6) if j != i)
                )
            ]
            ranking = rank_classes(sim, i)
            assert list(ranking.order) == expected
            assert sorted(ranking.order) == [j for j in range(6) if j != i]

    def test_out_of_range(self):
        sim = SimilarityMatrix(np.zeros((3, 3)), ("a", "b", "c"))
        with pytest.raises(IndexError):
            rank_classes(sim, 3)


class TestSymmetrize:
    def test_mean_of_transposed_entries(self):
        values = np.zeros((3, 3))
        values[0, 1] = 2.0
        sim = symmetrize(SimilarityMatrix(values, ("a", "b", "c")))
        assert sim.values[0, 1] == 1.0 and sim.values[1, 0] == 1.0

    def test_symmetric_fixed_point(self):
        values = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 3.0], [2.0, 3.0, 0.0]])
        sim = symmetrize(SimilarityMatrix(values, ("a", "b", "c")))
        assert np.array_equal(sim.values, values)

    def test_output_equals_own_transpose(self):
        rng = np.random.default_rng(17)
        values = rng.random((5, 5))
        np.fill_diagonal(values, 0.0)
        sym = symmetrize(SimilarityMatrix(values, tuple("abcde"))).values
        assert np.array_equal(sym, sym.T)
        assert np.all(np.diag(sym) == 0.0)


class TestCsvIO:
    def test_probability_log_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        recs = random_records(rng, 3, 6)
        path = tmp_path / "probs.csv"
        write_probability_log(recs, path)
        header = path.read_text().splitlines()[0]
        assert header == "image_id,true_class,p_0,p_1,p_2"
        loaded = read_probability_log(path)
        assert [r.image_id for r in loaded] == [r.image_id for r in recs]
        assert all(np.array_equal(a.probs, b.probs) for a, b in zip(loaded, recs))

    def test_similarity_csv_round_trip(self, tmp_path):
        rng = np.random.default_rng(4)
        values = rng.random((4, 4))
        np.fill_diagonal(values, 0.0)
        sim = SimilarityMatrix(values, ("w", "x", "y", "z"))
        path = tmp_path / "sim.csv"
        write_similarity_csv(sim, path)
        loaded = read_similarity_csv(path)
        assert loaded.class_names == sim.class_names
        assert np.array_equal(loaded.values, sim.values)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "probs.csv"
        path.write_text("image,label,p_0\n")
        with pytest.raises(ValueError):
            read_probability_log(path)
