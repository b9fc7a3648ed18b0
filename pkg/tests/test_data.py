import numpy as np
import pytest

from lurlab.core import LabeledBatch
from lurlab.data import (BlobSpec, load_csv, make_blobs, split_classwise_forget,
                         split_random_forget, write_csv)
from lurlab.errors import DomainError, ParseError


def rows(batch):
    return {tuple(x) + (int(y),) for x, y in zip(batch.inputs, batch.labels)}


class TestBlobs:
    def test_zero_spread_hits_centres(self):
        spec = BlobSpec(classes=3, dims=2, samples_per_class=10, spread=0.0)
        train, test = make_blobs(spec, 0)
        centres = spec.resolved_centers()
        for batch in (train, test):
            np.testing.assert_array_equal(batch.inputs, centres[batch.labels])

    def test_seeded(self):
        spec = BlobSpec()
        a, b = make_blobs(spec, 4), make_blobs(spec, 4)
        for x, y in zip(a, b):
            assert x.inputs.tobytes() == y.inputs.tobytes()
            assert np.array_equal(x.labels, y.labels)

    def test_class_counts_and_stratified_split(self):
        spec = BlobSpec(classes=4, dims=3, samples_per_class=25)
        train, test = make_blobs(spec, 1)
        np.testing.assert_array_equal(np.bincount(train.labels) + np.bincount(test.labels), 25)
        np.testing.assert_array_equal(np.bincount(test.labels), 5)

    def test_train_test_disjoint(self):
        train, test = make_blobs(BlobSpec(), 2)
        assert not rows(train) & rows(test)

    def test_overlap_pulls_centres_together(self):
        far = BlobSpec(conflict_overlap=0.0).resolved_centers()
        near = BlobSpec(conflict_overlap=0.6).resolved_centers()
        assert np.linalg.norm(near[0] - near[1]) == pytest.approx(0.4 * np.linalg.norm(far[0] - far[1]))

    def test_validation(self):
        with pytest.raises(DomainError):
            BlobSpec(classes=1)
        with pytest.raises(DomainError):
            BlobSpec(conflict_overlap=1.0)
        with pytest.raises(DomainError):
            BlobSpec(classes=2, dims=2, centers=((0.0, 0.0), (0.0, 0.0)))


def toy(n, classes=2, seed=0):
    rng = np.random.default_rng(seed)
    return LabeledBatch(rng.standard_normal((n, 2)), np.arange(n) % classes)


class TestRandomSplit:
    def test_size(self):
        assert len(split_random_forget(toy(100), 0.1, 0).forget) == 10

    def test_half(self):
        s = split_random_forget(toy(100), 0.5, 0)
        assert len(s.forget) == len(s.retain) == 50

    @pytest.mark.parametrize("n,fraction,seed", [(10, 0.3, 0), (257, 0.1, 3), (1000, 0.5, 9)])
    def test_partition(self, n, fraction, seed):
        train = toy(n, seed=seed)
        s = split_random_forget(train, fraction, seed)
        idx = np.concatenate([s.retain_index, s.forget_index])
        assert np.array_equal(np.sort(idx), np.arange(n))
        assert not set(s.retain_index) & set(s.forget_index)
        np.testing.assert_array_equal(s.train.inputs, train.inputs)
        np.testing.assert_array_equal(s.forget.inputs, train.inputs[s.forget_index])

    def test_seed_changes_membership(self):
        train = toy(200)
        a = split_random_forget(train, 0.1, 0).forget_index
        b = split_random_forget(train, 0.1, 1).forget_index
        assert not np.array_equal(a, b)
        assert np.array_equal(a, split_random_forget(train, 0.1, 0).forget_index)

    def test_invalid(self):
        with pytest.raises(DomainError):
            split_random_forget(toy(10), 1.0, 0)
        with pytest.raises(DomainError):
            split_random_forget(toy(10), 0.01, 0)  # rounds to an empty forget set


class TestClasswiseSplit:
    def test_retain_keeps_other_class(self):
        s = split_classwise_forget(toy(20), [0])
        assert set(s.retain.labels.tolist()) == {1}

    def test_forget_everything(self):
        with pytest.raises(DomainError):
            split_classwise_forget(toy(20), [0, 1])

    def test_size_equals_class_count(self):
        train = toy(30, classes=3)
        assert len(split_classwise_forget(train, [1, 2]).forget) == 20

    def test_unknown_class(self):
        with pytest.raises(DomainError):
            split_classwise_forget(toy(20), [7])


class TestCsv:
    def test_two_rows(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("f0,f1,label\n0.5,1.5,0\n-2,3e-1,1\n")
        batch = load_csv(path)
        assert len(batch) == 2
        np.testing.assert_array_equal(batch.inputs, [[0.5, 1.5], [-2.0, 0.3]])
        np.testing.assert_array_equal(batch.labels, [0, 1])

    def test_crlf(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_bytes(b"f0,f1,label\r\n1.0,2.0,1\r\n")
        assert load_csv(path).labels.tolist() == [1]

    def test_missing_column(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("f0,f1,label\n0.5,1.5,0\n0.1,1\n")
        with pytest.raises(ParseError, match="line 3") as info:
            load_csv(path)
        assert info.value.line == 3

    def test_non_integer_label(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("f0,f1,label\n0.5,1.5,0.5\n")
        with pytest.raises(ParseError, match="line 2"):
            load_csv(path)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x,y,label\n0.5,1.5,0\n")
        with pytest.raises(ParseError, match="line 1"):
            load_csv(path)

    def test_round_trip(self, tmp_path):
        train, _ = make_blobs(BlobSpec(dims=3), 5)
        path = tmp_path / "train.csv"
        write_csv(path, train)
        back = load_csv(path)
        np.testing.assert_allclose(back.inputs, train.inputs, atol=1e-12, rtol=0)
        np.testing.assert_array_equal(back.labels, train.labels)
