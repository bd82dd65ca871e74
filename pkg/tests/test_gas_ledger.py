import pytest

from rollupcrowd.errors import FixtureMissing, MalformedTx, UnknownClass
from rollupcrowd.gas import GasSchedule
from rollupcrowd.ledger import L1Chain, L1Transaction, tx_id
from rollupcrowd.protocol import FunctionClass

TABLE_II_L1 = {1: 212615, 2: 396636, 5: 896100, 10: 1792080, 15: 2646120, 20: 3966360, 25: 4412700}


@pytest.fixture(scope="module")
def schedule():
    return GasSchedule.load()


@pytest.mark.parametrize("n, total", sorted(TABLE_II_L1.items()))
def test_l1_fixture_exact(schedule, n, total):
    assert schedule.l1_cumulative(FunctionClass.CREATE_TASK, n) == total
    assert sum(schedule.lookup_gas("CreateTask", i) for i in range(1, n + 1)) == total


def test_l1_monotone(schedule):
    cum = [schedule.l1_cumulative("CreateTask", n) for n in range(0, 80)]
    assert all(a < b for a, b in zip(cum, cum[1:]))


def test_interpolation_between_points(schedule):
    # 3 and 4 sit on the straight line between the n=2 and n=5 rows
    step = (896100 - 396636) / 3
    assert schedule.l1_cumulative("CreateTask", 3) == round(396636 + step)
    assert schedule.l1_cumulative("CreateTask", 4) == round(396636 + 2 * step)


def test_linear_classes(schedule):
    first = schedule.lookup_gas("SubmitSolution", 1)
    marginal = schedule.lookup_gas("SubmitSolution", 2)
    assert schedule.l1_cumulative("SubmitSolution", 5) == first + 4 * marginal
    with pytest.raises(ValueError):
        schedule.lookup_gas("SubmitSolution", 0)


def test_unknown_class(schedule):
    data = dict(schedule.raw)
    data["l1"] = {"CreateTask": schedule.raw["l1"]["CreateTask"]}
    with pytest.raises(UnknownClass):
        GasSchedule(data).lookup_gas("Other", 1)


def test_missing_fixture(tmp_path):
    with pytest.raises(FixtureMissing):
        GasSchedule.load(tmp_path / "nope.json")


def _tx(i, cls=FunctionClass.CREATE_TASK, at=0.0):
    return L1Transaction(tx_id("t", i), cls, tx_id("p", i), submitted_at=at)


def test_block_clock_and_inclusion(schedule):
    chain = L1Chain(schedule, block_time=3)
    a, b = chain.submit_tx(_tx(1)), chain.submit_tx(_tx(2))
    blk = chain.produce_block()
    assert blk.transactions == (a, b)
    assert blk.timestamp == 3 and chain.produce_block().timestamp == 6
    assert chain.txs[a].included_at == 3
    assert blk.gas_total == 396636
    assert chain.produce_block().transactions == ()


def test_malformed(schedule):
    chain = L1Chain(schedule)
    with pytest.raises(MalformedTx):
        chain.submit_tx(L1Transaction("0" * 64, FunctionClass.OTHER, tx_id("p")))
    with pytest.raises(MalformedTx):
        chain.submit_tx(L1Transaction(tx_id("x"), FunctionClass.OTHER, "not-a-cid"))


def test_hundred_txs_latency(schedule):
    chain = L1Chain(schedule, block_time=5)
    for i in range(100):
        chain.submit_tx(_tx(i, at=i * 0.04))
    blk = chain.produce_block()
    assert len(blk.transactions) == 100
    last = chain.txs[blk.transactions[-1]]
    assert last.included_at - last.submitted_at == pytest.approx(5 - 99 * 0.04)


def test_future_txs_wait(schedule):
    chain = L1Chain(schedule, block_time=1)
    tid = chain.submit_tx(_tx(1, at=2.5))
    assert chain.produce_block().transactions == ()
    chain.produce_block()
    assert chain.produce_block().transactions == (tid,)


def test_gas_limit(schedule):
    chain = L1Chain(schedule, block_time=1, gas_limit=400_000)
    for i in range(3):
        chain.submit_tx(_tx(i))
    assert len(chain.produce_block().transactions) == 2
    assert len(chain.produce_block().transactions) == 1


def test_chain_integrity_and_replay(schedule):
    def build():
        chain = L1Chain(schedule, block_time=3)
        for i in range(10):
            chain.submit_tx(_tx(i, FunctionClass.OTHER if i % 2 else FunctionClass.CREATE_TASK))
            chain.produce_block()
        return chain

    a, b = build(), build()
    assert a.verify_chain() and a.head.hash == b.head.hash
    assert all(blk.timestamp == 3 * blk.height for blk in a.blocks)
    a.txs[a.blocks[3].transactions[0]].gas_used += 1
    assert not a.verify_chain()


def test_block_csv(schedule):
    chain = L1Chain(schedule)
    chain.produce_block()
    lines = chain.export_blocks_csv().splitlines()
    assert lines[0] == "height,timestamp,tx_count,gas_total"
    assert len(lines) == 3
