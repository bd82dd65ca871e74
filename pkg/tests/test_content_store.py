import threading

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rollupcrowd.content_store import ContentStore, cid_of
from rollupcrowd.errors import EmptyContent, NotFound


def test_put_is_deterministic():
    store = ContentStore()
    assert store.put(b"task-spec-1") == store.put(b"task-spec-1") == cid_of(b"task-spec-1")
    assert len(store) == 1


def test_empty_content_rejected():
    with pytest.raises(EmptyContent):
        ContentStore().put(b"")


def test_distinct_content_distinct_cids():
    store = ContentStore()
    assert store.put(b"a") != store.put(b"b")


def test_get_unknown():
    with pytest.raises(NotFound):
        ContentStore().get("ab" * 32)


def test_round_trip_corpus():
    store = ContentStore()
    corpus = [f"item-{i}".encode() * (1 + i % 7) for i in range(10_000)]
    cids = [store.put(c) for c in corpus]
    assert len(set(cids)) == len(corpus)
    assert all(store.get(cid) == c for cid, c in zip(cids, corpus))


@given(st.binary(min_size=1, max_size=256))
def test_round_trip_property(data):
    store = ContentStore()
    assert store.get(store.put(data)) == data


def test_directory_persistence(tmp_path):
    store = ContentStore(tmp_path)
    cid = store.put(b"persist me")
    assert (tmp_path / cid).read_bytes() == b"persist me"
    assert ContentStore(tmp_path).get(cid) == b"persist me"


def test_concurrent_put_converges():
    store = ContentStore()
    results = []
    threads = [threading.Thread(target=lambda: results.append(store.put(b"same"))) for _ in range(16)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(set(results)) == 1 and len(store) == 1
