"""Acceptance criteria. Each test prints one PASS/FAIL line, including runtime."""
import random
import time
from collections import defaultdict

import pytest
from scipy.stats import chi2_contingency

from rollupcrowd.assignment import partition, seed_bytes
from rollupcrowd.harness.attacks import ATTACKS, run_attack
from rollupcrowd.harness.bench import gas_compare, gas_row
from rollupcrowd.harness.scenario import bundled_scenario, execute, load_scenario, parse_scenario
from rollupcrowd.reputation import ReputationRecord, update_reputation

import reference as ref

# createTask gas, transcribed from the published measurements:
# calls -> (commit, verify, execute, L2 total, L1 total)
TABLE_II = {
    1: (38828, 27260, 23964, 90052, 212615),
    2: (33964, 27272, 23964, 85200, 396636),
    5: (33348, 27284, 23964, 84596, 896100),
    10: (34348, 27272, 23952, 85572, 1792080),
    15: (34324, 27272, 23964, 85560, 2646120),
    20: (35396, 27284, 23964, 86644, 3966360),
    25: (68744, 29904, 26584, 125232, 4412700),
}


@pytest.fixture
def verdict(capsys):
    def emit(number: int, title: str, ok: bool, elapsed: float, limit: float, detail: str = ""):
        ok = ok and elapsed < limit
        with capsys.disabled():
            print(f"\n[acceptance {number}] {'PASS' if ok else 'FAIL'} {title}: {detail} ({elapsed:.2f}s, limit {limit:g}s)")
        return ok

    return emit


def test_gas_fixture_reproduction(verdict):
    start = time.perf_counter()
    rows = {r["n_calls"]: r for r in gas_compare(sorted(TABLE_II)).series["gas"]}
    elapsed = time.perf_counter() - start
    mismatches = [
        n for n, want in TABLE_II.items()
        if (rows[n]["l2_commit"], rows[n]["l2_verify"], rows[n]["l2_execute"], rows[n]["l2_total"], rows[n]["l1_total"]) != want
    ]
    assert verdict(1, "gas fixture reproduction", not mismatches, elapsed, 5, f"mismatched rows {mismatches}")


def test_headline_ratio(verdict):
    start = time.perf_counter()
    row = gas_row(20)
    elapsed = time.perf_counter() - start
    ratio = row["l1_total"] / row["l2_total"]
    assert verdict(2, "L1/L2 gas ratio at n=20", ratio >= 20, elapsed, 1, f"ratio {ratio:.2f}")


def test_batch_boundary(verdict):
    start = time.perf_counter()
    at20, at25 = gas_row(20), gas_row(25)
    elapsed = time.perf_counter() - start
    ok = at20["n_batches"] == 1 and at25["n_batches"] == 2 and at20["l2_commit"] == 35396 and at25["l2_commit"] == 68744
    detail = f"batches {at20['n_batches']}->{at25['n_batches']}, commit {at20['l2_commit']}->{at25['l2_commit']}"
    assert verdict(3, "batch boundary 20->25", ok, elapsed, 1, detail)


def test_reputation_responsiveness(verdict):
    start = time.perf_counter()
    rec = ReputationRecord()
    for _ in range(25):
        rec = update_reputation(rec, 0.9)
    high = rec.score
    rec = update_reputation(rec, 0.1)
    elapsed = time.perf_counter() - start
    gap = abs(rec.score - 0.1)
    assert verdict(4, "reputation drop after one bad rating", gap < 1e-6, elapsed, 1,
                   f"score {high:.6f} -> {rec.score:.3e}, |score-0.1|={gap:.1e}")


def test_reputation_closure(verdict):
    rng = random.Random(20240501)
    start = time.perf_counter()
    failures = 0
    worst = 0.0
    for _ in range(10_000):
        r_old, t_r, t_min = rng.random(), rng.random(), rng.random()
        s = rng.randrange(0, 200)
        rec = ReputationRecord(score=r_old, submissions=s, r_init=t_min * rng.random(), t_min=t_min)
        got = update_reputation(rec, t_r).score
        err = float(ref.rel_err(got, ref.reputation(r_old, t_r, s, t_min)))
        worst = max(worst, err)
        if not (0.0 <= got <= 1.0 and min(r_old, t_r) <= got <= max(r_old, t_r) and err <= 1e-12):
            failures += 1
    elapsed = time.perf_counter() - start
    assert verdict(5, "reputation closure suite", failures == 0, elapsed, 10,
                   f"{failures} failures in 10^4, worst rel err {worst:.1e}")


def test_evaluator_partition(verdict):
    rng = random.Random(99)
    start = time.perf_counter()
    failures = 0
    for _ in range(1000):
        roster = [f"ev{i}" for i in range(rng.randrange(1, 60))]
        k = rng.randrange(1, len(roster) + 1)
        seed = rng.randbytes(32)
        sets = partition(roster, k, seed)
        sizes = [len(x) for x in sets]
        exact = sorted(e for x in sets for e in x) == sorted(roster) and len(sets) == k
        if not (exact and max(sizes) - min(sizes) <= 1 and partition(roster, k, seed) == sets):
            failures += 1

    # evaluator identity must be independent of the set it lands in
    roster = [f"ev{i}" for i in range(7)]
    table = defaultdict(lambda: [0, 0, 0])
    for s in range(10_000):
        for j, members in enumerate(partition(roster, 3, seed_bytes(s), b"chi-square")):
            for e in members:
                table[e][j] += 1
    p_value = chi2_contingency([table[e] for e in roster]).pvalue
    elapsed = time.perf_counter() - start
    ok = failures == 0 and p_value > 0.01
    assert verdict(6, "evaluator partition suite", ok, elapsed, 30,
                   f"{failures} failures in 10^3, chi-square p={p_value:.3f}")


def test_state_equivalence_and_batch_integrity(verdict):
    start = time.perf_counter()
    sc = load_scenario(bundled_scenario("happy_path"))
    l2, _ = execute(sc, "l2")
    direct, _ = execute(sc, "direct")
    rollup = l2.gateway
    same_root = l2.state.state_root() == direct.state.state_root()
    all_verify = bool(rollup.batches) and all(rollup.verify_batch(b) for b in rollup.batches)
    rng = random.Random(7)
    accepted_mutants = 0
    for _ in range(100):
        raw = bytearray(rng.choice(rollup.batches).to_bytes())
        bit = rng.randrange(len(raw) * 8)
        raw[bit // 8] ^= 1 << (bit % 8)
        accepted_mutants += rollup.verify_batch(bytes(raw))
    elapsed = time.perf_counter() - start
    ok = same_root and all_verify and accepted_mutants == 0
    assert verdict(7, "L2/direct state equivalence", ok, elapsed, 10,
                   f"roots equal={same_root}, {len(rollup.batches)} batches verify={all_verify}, "
                   f"{accepted_mutants}/100 mutants accepted")


def test_attack_suite(verdict):
    start = time.perf_counter()
    verdicts = {name: run_attack(name).verdict for name in ATTACKS}
    elapsed = time.perf_counter() - start
    ok = len(verdicts) == 6 and all(v == "DEFENDED" for v in verdicts.values())
    assert verdict(8, "attack suite", ok, elapsed, 10, ", ".join(f"{k}={v}" for k, v in verdicts.items()))


def random_scenario(rng: random.Random, index: int) -> dict:
    """A random script mixing valid and invalid operations."""
    pop = {"requesters": rng.randint(1, 3), "workers": rng.randint(1, 4), "evaluators": rng.randint(1, 6)}
    req = [f"r{i}" for i in range(pop["requesters"])]
    wrk = [f"w{i}" for i in range(pop["workers"])]
    evs = [f"e{i}" for i in range(pop["evaluators"])]
    script = []
    at = 0.0
    for t in range(rng.randint(1, 4)):
        task = f"t{t}"
        owner = rng.choice(req)
        amount = rng.randint(0, 200)
        deposit = amount + rng.randint(-5, 20)
        bids = []

        def step(**kw):
            nonlocal at
            at += rng.choice((0.0, 0.5, 2.0))
            script.append({"at": at, **kw})

        step(op="create_task", requester=owner, task=task, amount=amount, deposit=max(deposit, 0))
        for e in rng.sample(evs, rng.randint(0, len(evs))):
            step(op="register_evaluator", evaluator=e, task=task)
        for j, w in enumerate(rng.sample(wrk, rng.randint(0, len(wrk)))):
            bid = f"b{j}"
            bids.append((w, bid))
            extra = {"deposit": rng.randint(0, 30)} if rng.random() < 0.3 else {}
            step(op="place_bid", worker=w, task=task, bid=bid, **extra)
        if rng.random() < 0.1:
            step(op="cancel_task", requester=owner, task=task)
        chosen = rng.sample(bids, rng.randint(0, len(bids))) if bids else []
        step(op="accept_bids", requester=owner, task=task, bids=[b for _, b in chosen] or ["b9"])
        for w, bid in chosen:
            if rng.random() < 0.9:
                step(op="submit_solution", worker=w, task=task, bid=bid)
        step(op="evaluate", task=task, min_quorum=rng.randint(1, 2), method=rng.choice(("mean", "median")))
        if rng.random() < 0.2:
            step(op="evaluate", task=task)
    return {
        "name": f"random-{index}",
        "seed": rng.randrange(1 << 30),
        "layer": rng.choice(("l2", "direct")),
        "population": pop,
        "profiles": {w: {k: rng.random() for k in ("completeness", "quality", "contextual")} for w in wrk},
        "adversarial_evaluators": [e for e in evs if rng.random() < 0.2],
        "script": script,
    }


def test_escrow_conservation(verdict):
    rng = random.Random(4242)
    start = time.perf_counter()
    violations = 0
    settled_runs = 0
    for i in range(1000):
        sc = parse_scenario(random_scenario(rng, i))
        world, log = execute(sc)
        state = world.state
        totals = state.escrow_totals()
        if sum(totals.values()) != state.total_deposited:
            violations += 1
        paid = defaultdict(int)
        for step, entry in zip(sc.script, log):
            for s in entry.get("settlements", []):
                paid[step["task"]] += s["payout"]
        settled_runs += bool(paid)
        for cid, name in world.task_names.items():
            if cid not in state.tasks:  # creation was rejected
                assert name not in paid
                continue
            escrowed = state.deposits[f"{cid}/requester"].amount
            if paid.get(name, 0) > min(escrowed, state.tasks[cid].amount):
                violations += 1
    elapsed = time.perf_counter() - start
    assert verdict(9, "escrow conservation", violations == 0 and settled_runs > 100, elapsed, 60,
                   f"{violations} violations in 10^3 runs ({settled_runs} with payouts)")
