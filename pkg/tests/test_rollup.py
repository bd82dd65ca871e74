import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rollupcrowd.errors import EmptyQueue, InsufficientDeposit, Unauthorized
from rollupcrowd.harness.world import World
from rollupcrowd.rollup import Batch, L2Status

POP = {"requesters": 2, "workers": 3, "evaluators": 7}


def create_many(world, n, at=0.0):
    for i in range(n):
        world.call(f"r{i % 2}", "create_task", at=at, task_cid=world.cid(f"task/{i}"), amount=10,
                   kind="ProblemSolving", deposit=10)


def test_seal_single_tx(l2_world):
    create_many(l2_world, 1)
    rollup = l2_world.gateway
    batch = rollup.seal_batch()
    assert len(batch.txs) == 1
    assert (rollup.postings[0].gas.commit, rollup.postings[0].gas.verify, rollup.postings[0].gas.execute) == (38828, 27260, 23964)
    assert batch.txs[0].status is L2Status.BATCHED
    assert batch.pre_state_root != batch.post_state_root


def test_seal_twenty(l2_world):
    create_many(l2_world, 20)
    assert not l2_world.gateway.postings
    l2_world.gateway.seal_batch()
    assert l2_world.gateway.postings[0].gas.total == 86644


def test_empty_seal(l2_world):
    with pytest.raises(EmptyQueue):
        l2_world.gateway.seal_batch()


def test_twenty_first_tx_seals(l2_world):
    create_many(l2_world, 21)
    rollup = l2_world.gateway
    assert len(rollup.postings) == 1 and len(rollup.postings[0].batch.txs) == 20
    assert len(rollup.pending) == 1


@pytest.mark.parametrize("n", [1, 19, 20, 21, 40, 41, 57])
def test_batch_count(n):
    w = World.build(POP, "l2")
    create_many(w, n)
    w.finish()
    assert len(w.gateway.postings) == math.ceil(n / 20)
    assert all(len(p.batch.txs) <= 20 for p in w.gateway.postings)
    assert len(w.gateway.finalized) == n


def test_rejected_tx_is_not_queued(l2_world):
    with pytest.raises(InsufficientDeposit):
        l2_world.call("r0", "create_task", task_cid=l2_world.cid("t"), amount=10, kind="ProblemSolving", deposit=1)
    with pytest.raises(Unauthorized):
        l2_world.call("ab" * 32, "create_task", task_cid=l2_world.cid("t"), amount=10, kind="ProblemSolving", deposit=10)
    assert l2_world.gateway.pending == []


def test_unknown_action(l2_world):
    with pytest.raises(ValueError):
        l2_world.gateway.submit(l2_world.id("r0"), "mint", {})


def test_timer_seals(l2_world):
    create_many(l2_world, 3, at=0.0)
    l2_world.advance(3.0)
    assert l2_world.gateway.postings == []
    l2_world.advance(6.0)
    assert len(l2_world.gateway.postings) == 1


def test_finality_after_execute_inclusion(l2_world):
    create_many(l2_world, 2)
    l2_world.finish()
    rollup = l2_world.gateway
    posting = rollup.postings[0]
    assert posting.finalized_at == l2_world.chain.txs[posting.execute_tx].included_at
    assert all(t.status is L2Status.FINALIZED for t in posting.batch.txs)


def test_verify_and_tamper(l2_world):
    create_many(l2_world, 5)
    batch = l2_world.gateway.seal_batch()
    rollup = l2_world.gateway
    assert rollup.verify_batch(batch)
    assert rollup.verify_batch(batch.to_bytes())
    assert Batch.from_bytes(batch.to_bytes()) == batch
    swapped = Batch(batch.index, (batch.txs[1], batch.txs[0], *batch.txs[2:]), batch.pre_state_root,
                    batch.post_state_root, batch.proof)
    assert not rollup.verify_batch(swapped)
    forged = Batch(batch.index, batch.txs, batch.pre_state_root, "0" * 64, batch.proof)
    assert not rollup.verify_batch(forged)
    assert not rollup.verify_batch(batch.to_bytes() + b" ")


def test_second_batch_in_flight_is_aggregated(l2_world):
    create_many(l2_world, 25)
    l2_world.finish()
    rows = [(p.gas.commit, p.gas.verify, p.gas.execute) for p in l2_world.gateway.postings]
    assert rows[1][1:] == (2620, 2620)
    assert l2_world.gateway.gas_totals().total == 125232


def test_batch_csv(l2_world):
    create_many(l2_world, 3)
    l2_world.finish()
    lines = l2_world.gateway.export_batches_csv().splitlines()
    assert lines[0].split(",")[0] == "batch_index" and len(lines) == 2


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 60))
def test_l2_gas_sublinear(n):
    w = World.build(POP, "l2")
    create_many(w, n)
    w.finish()
    per_batch_max = max(p.gas.total for p in w.gateway.postings)
    assert w.gateway.gas_totals().total <= math.ceil(n / 20) * per_batch_max
    assert w.gateway.gas_totals().total < w.schedule.l1_cumulative("CreateTask", n)


@pytest.mark.parametrize("layer", ["l1", "direct"])
def test_state_roots_agree(layer):
    def run(layer):
        w = World.build(POP, layer)
        create_many(w, 23)
        w.finish()
        return w.state.state_root()

    assert run("l2") == run(layer)
