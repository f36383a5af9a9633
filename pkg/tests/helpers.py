"""Shared scenario builders for the test suite."""

from __future__ import annotations

import random

import ledgersim as L


def compliant_agents(n: int, overrides: dict | None = None) -> list[L.AgentSpec]:
    overrides = overrides or {}
    specs = []
    for i in range(1, n + 1):
        kind, params = overrides.get(i, (L.StrategyKind.COMPLIANT, {}))
        specs.append(L.AgentSpec(i, L.StrategyKind(kind), params))
    return specs


def pay(tick: int, agent: int, to: int, amount: int, convert_fees: bool = False) -> L.ScriptAction:
    return L.ScriptAction(
        tick, agent, {"type": "pay", "to": to, "amount": amount, "convert_fees": convert_fees}
    )


def backfill(tick: int, agent: int) -> L.ScriptAction:
    return L.ScriptAction(tick, agent, {"type": "backfill"})


def make_config(
    n: int = 4,
    t: int = 1,
    script: list | None = None,
    overrides: dict | None = None,
    **kw,
) -> L.SimConfig:
    kw.setdefault("epsilon", 1)
    kw.setdefault("initial_balance", 1000)
    kw.setdefault("seed", 1)
    kw.setdefault("d_min", 1)
    kw.setdefault("d_max", 3)
    return L.SimConfig(
        n=n, t=t, agents=compliant_agents(n, overrides), script=script or [], **kw
    )


def random_payment_script(n: int, count: int, rng: random.Random) -> list[L.ScriptAction]:
    """Payments at random ticks and amounts; every eighth converts fees."""
    script, tick = [], 0
    for k in range(count):
        tick += rng.randrange(1, 12)
        frm = rng.randrange(1, n + 1)
        to = rng.choice([i for i in range(1, n + 1) if i != frm])
        convert = k % 8 == 5
        script.append(pay(tick, frm, to, rng.randrange(1, 21), convert))
    return script


def incentive_script() -> list[L.ScriptAction]:
    """30 payments; agent 1 owns the retaliated channel and pays agent 4 at seq 2;
    agent 4 converts its fee credits late, after everything else settled."""
    script = [
        pay(0, 1, 2, 12),
        pay(30, 1, 4, 10),  # the freerider is a recipient on channel 1, seq 2
        pay(60, 1, 3, 7),
        pay(90, 1, 2, 5),
        pay(120, 1, 3, 4),
    ]
    tick = 5
    recipients = {2: [3, 1, 4], 3: [2, 4, 1]}
    for k in range(12):
        for agent in (2, 3):
            script.append(pay(tick, agent, recipients[agent][k % 3], 2 + (k % 5)))
            tick += 11
    script.append(pay(450, 4, 2, 1, convert_fees=True))
    return script


def incentive_config(seed: int, freerider: bool) -> L.SimConfig:
    overrides = {}
    if freerider:
        overrides[4] = (L.StrategyKind.RATIONAL_FREERIDER, {"channels": [1]})
    return make_config(
        n=4, t=1, seed=seed, d_min=1, d_max=10,
        script=incentive_script(), overrides=overrides,
    )


def run_records(config: L.SimConfig) -> list[dict]:
    result = L.run(config)
    assert result.quiescent, "scenario unexpectedly hit max_steps"
    return result.records


# -- closure/height oracles, shared by unit and acceptance tests ---------------


def naive_closure(root, universe):
    """Fixpoint by repeated whole-universe scans against the defining predicate."""
    members = {L.TxId(*root)}
    changed = True
    while changed:
        changed = False
        for cand in universe:
            if cand in members:
                continue
            for vid in list(members):
                v = universe[vid]
                if (
                    cand in v.deps
                    or cand in v.fees
                    or (cand.initiator == vid.initiator and cand.seq <= vid.seq)
                ):
                    members.add(cand)
                    changed = True
                    break
    return members


def oracle_height(root, universe):
    """Longest path (in nodes) through direct must-precede edges, ending at root."""
    members = naive_closure(root, universe)

    def direct_preds(tid):
        v = universe[tid]
        preds = set(v.deps) | set(v.fees)
        preds |= {u for u in members if u.initiator == tid.initiator and u.seq < tid.seq}
        return preds & members

    memo = {}

    def longest(tid):
        if tid not in memo:
            preds = direct_preds(tid)
            memo[tid] = 1 if not preds else 1 + max(longest(u) for u in preds)
        return memo[tid]

    return longest(L.TxId(*root))


def random_history(rng: random.Random, max_txs: int = 40) -> dict:
    """A structurally valid executed history: per-initiator seqs are contiguous
    and references point at earlier transactions only."""
    n = rng.randrange(2, 6)
    seqs = {p: 0 for p in range(1, n + 1)}
    txs = []
    for _ in range(rng.randrange(3, max_txs + 1)):
        p = rng.randrange(1, n + 1)
        seqs[p] += 1
        prior = [t.id for t in txs]
        deps = rng.sample(prior, min(len(prior), rng.randrange(0, 4)))
        rest = [i for i in prior if i not in deps]
        fees = rng.sample(rest, min(len(rest), rng.randrange(0, 3)))
        recipient = (p % n) + 1
        txs.append(
            L.Transaction(
                p, recipient, rng.randrange(0, 9), seqs[p],
                frozenset(deps), frozenset(fees),
            )
        )
    return {t.id: t for t in txs}
