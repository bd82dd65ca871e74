from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rollupcrowd.assignment import partition, seed_bytes, shuffle


def test_seven_into_three():
    sets = partition(list(range(7)), 3, seed_bytes(1))
    assert sorted(len(s) for s in sets) == [2, 2, 3]


def test_singletons():
    sets = partition(["a", "b", "c"], 3, seed_bytes(9))
    assert all(len(s) == 1 for s in sets)


def test_same_seed_same_partition():
    items = [f"e{i}" for i in range(11)]
    assert partition(items, 4, seed_bytes(5), b"task") == partition(items, 4, seed_bytes(5), b"task")
    assert partition(items, 4, seed_bytes(5), b"task") != partition(items, 4, seed_bytes(6), b"task")


def test_seed_forms():
    assert len(seed_bytes(0)) == len(seed_bytes("ab" * 32)) == len(seed_bytes("free text")) == 32
    assert seed_bytes("ab" * 32) == bytes.fromhex("ab" * 32)


def test_num_sets_positive():
    with pytest.raises(ValueError):
        partition([1], 0, seed_bytes(0))


@given(st.integers(0, 40), st.integers(1, 10), st.binary(min_size=1, max_size=8))
def test_partition_properties(n, k, seed):
    items = list(range(n))
    sets = partition(items, k, seed_bytes(seed))
    assert sorted(x for s in sets for x in s) == items
    sizes = [len(s) for s in sets]
    assert max(sizes) - min(sizes) <= 1


def test_shuffle_covers_all_permutations_of_three():
    seen = Counter(tuple(shuffle([0, 1, 2], seed_bytes(i))) for i in range(3000))
    assert len(seen) == 6
    assert min(seen.values()) > 400
