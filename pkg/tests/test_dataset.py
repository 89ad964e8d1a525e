import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motionedit.dataset import (
    EditTriplet, by_split, load_triplets, nested_subset, save_triplets, split_counts, split_dataset,
)
from motionedit.errors import InvalidConfigError
from motionedit.synthetic import generate_synthetic_triplets


def test_split_counts_exact():
    assert split_counts(100) == (80, 5, 15)


def test_split_counts_motionfix_size():
    # 6730 triplets split 80/5/15 with round-half-even
    assert split_counts(6730) == (5384, 336, 1010)


@given(st.integers(1, 20000))
def test_split_counts_within_one(n):
    counts = split_counts(n)
    assert sum(counts) == n
    for c, r in zip(counts, (0.8, 0.05, 0.15)):
        assert abs(c - n * r) <= 1


def test_split_bad_ratios():
    with pytest.raises(InvalidConfigError):
        split_dataset(10, (0.5, 0.2, 0.2))


def test_split_deterministic_and_sets_field():
    ts = generate_synthetic_triplets(20, seed=1)
    labels = split_dataset(ts, seed=3)
    assert labels == split_dataset(20, seed=3)
    assert [t.split for t in ts] == labels
    assert len(by_split(ts, "train")) == 16
    assert labels != split_dataset(20, seed=4)


def test_nested_subsets():
    items = list(range(200))
    small, mid, full = (set(nested_subset(items, f, seed=9)) for f in (0.1, 0.5, 1.0))
    assert small <= mid <= full == set(items)
    assert (len(small), len(mid)) == (20, 100)


def test_triplet_invariants(rng):
    t = generate_synthetic_triplets(1, seed=0)[0]
    with pytest.raises(InvalidConfigError):
        EditTriplet("x", t.source, t.target, "")
    with pytest.raises(InvalidConfigError):
        EditTriplet("x", t.source, t.target, "faster", split="dev")


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 1000))
def test_store_roundtrip_bitwise(tmp_path_factory, seed):
    root = tmp_path_factory.mktemp("store")
    ts = generate_synthetic_triplets(4, seed=seed)
    ts[0].edit_text = "wave with the other hand, ünïcode"
    split_dataset(ts, seed=seed)
    save_triplets(root, ts, seed=seed)
    back = load_triplets(root)
    assert [t.id for t in back] == [t.id for t in ts]
    for a, b in zip(ts, back):
        assert a.edit_text.encode() == b.edit_text.encode()
        assert np.array_equal(a.source.to_array(), b.source.to_array())
        assert np.array_equal(a.target.to_array(), b.target.to_array())
        assert a.split == b.split and a.meta["family"] == b.meta["family"]
    test_ids = {t.id for t in ts if t.split == "test"}
    assert {t.id for t in load_triplets(root, split="test")} == test_ids
