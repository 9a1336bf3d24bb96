"""Trace analysis: view compatibility, serial runs, view equivalence and
view serialisability.

Both checkers replay candidate orders against the single-copy oracle (the
ground-model read/write operations on a flat store) and therefore depend
only on the trace and the scenario's initial data, never on the schedule
that produced the trace.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .cm0 import db_answer_read, db_perform_write
from .core import UNDEF, FlatStore
from .scenario import Scenario
from .trace import REQ, RESP, Trace

COMPATIBLE = "COMPATIBLE"
INCOMPATIBLE = "INCOMPATIBLE"
SERIALISABLE = "SERIALISABLE"
NOT_SERIALISABLE = "NOT_SERIALISABLE"


@dataclass(frozen=True)
class Verdict:
    kind: str
    exhaustive: bool
    witness: tuple = ()
    replays: int = 0
    waived: tuple = ()  # (req, key) write pairs the witness left unapplied

    def ok(self) -> bool:
        return self.kind in (COMPATIBLE, SERIALISABLE)

    def render(self) -> str:
        if self.witness:
            parts = []
            for item in self.witness:
                if isinstance(item, tuple):
                    point, reqs = item
                    parts.append(f"{point}:{'+'.join(reqs)}")
                else:
                    parts.append(str(item))
            witness = ",".join(parts)
        else:
            witness = "NONE"
        return f"verdict={self.kind} exhaustive={str(self.exhaustive).lower()} witness={witness}"


class IncompleteTraceError(Exception):
    pass


@dataclass(frozen=True)
class _ReqInfo:
    req: str
    kind: str  # "read" | "write"
    rid: str
    body: object  # Condition or write pairs
    answer: object  # frozenset of rows for reads, None for writes
    lo: int  # request issued (exclusive window bound)
    hi: int  # response issued (inclusive window bound)


def _request_infos(trace: Trace) -> list:
    if not trace.is_complete():
        raise IncompleteTraceError("checkers need a completed trace (every request answered)")
    reqs, resps = trace.requests(), trace.responses()
    infos = []
    for req in sorted(reqs):
        r, a = reqs[req], resps[req]
        if not r.idx < a.idx:
            raise IncompleteTraceError(f"request {req} answered no later than it was issued")
        tag, rid, body = r.payload
        answer = a.payload[2] if tag == "read" else None
        infos.append(_ReqInfo(req, tag, rid, body, answer, r.idx, a.idx))
    return infos


def _read_values(infos) -> frozenset:
    """Every (relation, key, value) some read answer contains."""
    seen = set()
    for info in infos:
        if info.kind == "read":
            for k, v in info.answer:
                seen.add((info.rid, k, v))
    return frozenset(seen)


def _replay_batch(flat: FlatStore, scenario: Scenario, batch: list, skipped: frozenset) -> bool:
    """Replay simultaneous requests: reads evaluate against the shared
    pre-state, then all write sets apply together; conflicting simultaneous
    writes reject the candidate (an inconsistent update set would).
    ``skipped`` names (req, key) write pairs left unapplied under the
    unread-value waiver."""
    for info in batch:
        if info.kind == "read":
            rows = db_answer_read(flat, scenario.cfg, info.rid, info.body)
            if rows != info.answer:
                return False
    combined: dict = {}
    for info in batch:
        if info.kind != "write":
            continue
        for k, v in info.body:
            if (info.req, k) in skipped:
                continue
            loc = (info.rid, k)
            if loc in combined and combined[loc] != v:
                return False
            combined[loc] = v
    for (rid, k), v in combined.items():
        db_perform_write(flat, scenario.cfg, rid, {k: v})
    return True


def _waiver_choices(batch: list, read_values: frozenset):
    """All ways to leave unread write pairs unapplied, the all-applied
    variant first.  A written value that no agent ever reads does not
    constrain the flattening, so the replay may drop it; deletions are never
    read back as values and are always droppable."""
    waivable = []
    for info in batch:
        if info.kind != "write":
            continue
        for k, v in info.body:
            if v is UNDEF or (info.rid, k, v) not in read_values:
                waivable.append((info.req, k))
    for n in range(len(waivable) + 1):
        for combo in itertools.combinations(waivable, n):
            yield frozenset(combo)


def check_view_compatible(trace: Trace, scenario: Scenario, budget: int = 1_000_000) -> Verdict:
    """Search for one execution point per request, inside its issue/answer
    window, such that replaying the requests in point order against a single
    flat store reproduces every recorded read answer.

    Writes execute at their points, except that a write pair whose value no
    agent ever reads may be left unapplied (the flattening is free to ignore
    it); the witness records such skips.  Requests may share a point, in
    which case the reads see the shared pre-state.  Returns COMPATIBLE with
    the witness assignment, otherwise INCOMPATIBLE (exhaustive when the
    search space was fully covered).
    """
    infos = _request_infos(trace)
    read_values = _read_values(infos)
    counter = {"nodes": 0}

    def dfs(remaining: tuple, flat: FlatStore, last_point: int, witness: tuple, waived: frozenset):
        counter["nodes"] += 1
        if counter["nodes"] > budget:
            return "budget"
        if not remaining:
            return (witness, waived)
        order = sorted(remaining, key=lambda i: (i.hi, i.lo, i.req))
        for size in range(1, len(order) + 1):
            for combo in itertools.combinations(order, size):
                point = max(last_point + 1, max(i.lo + 1 for i in combo))
                if any(point > i.hi for i in combo):
                    continue
                rest = tuple(i for i in remaining if i not in combo)
                if any(i.hi <= point for i in rest):
                    continue
                for skipped in _waiver_choices(list(combo), read_values):
                    flat2 = flat.clone()
                    if not _replay_batch(flat2, scenario, list(combo), skipped):
                        continue
                    result = dfs(
                        rest,
                        flat2,
                        point,
                        witness + ((point, tuple(i.req for i in combo)),),
                        waived | skipped,
                    )
                    if result is not None:
                        return result
        return None

    outcome = dfs(tuple(infos), scenario.initial.clone(), 0, (), frozenset())
    if outcome == "budget":
        return Verdict(INCOMPATIBLE, exhaustive=False, replays=counter["nodes"])
    if outcome is None:
        return Verdict(INCOMPATIBLE, exhaustive=True, replays=counter["nodes"])
    witness, waived = outcome
    return Verdict(
        COMPATIBLE,
        exhaustive=True,
        witness=witness,
        replays=counter["nodes"],
        waived=tuple(sorted(waived)),
    )


def is_serial(trace: Trace) -> bool:
    """A run is serial when nothing falls strictly inside another request's
    issue/answer window except simultaneous companions, and simultaneous
    requests have simultaneous answers."""
    infos = _request_infos(trace)
    events = [e for e in trace.events if e.kind in (REQ, RESP)]
    resp_idx = {i.req: i.hi for i in infos}
    for info in infos:
        for e in events:
            if e.req == info.req:
                continue
            if info.lo <= e.idx <= info.hi:
                if e.idx == info.lo or e.idx == info.hi:
                    continue
                return False
    for a, b in itertools.combinations(infos, 2):
        if a.lo == b.lo and resp_idx[a.req] != resp_idx[b.req]:
            return False
    return True


def view_equivalent(t1: Trace, t2: Trace) -> bool:
    """Same requests and responses (including identical answer sets), and
    the same per-agent order; interleaving across agents is free."""

    def per_agent(trace: Trace) -> dict:
        out: dict = {}
        for e in trace.events:
            if e.kind not in (REQ, RESP):
                continue
            out.setdefault(e.agent, []).append((e.idx, e.kind, e.payload))
        for agent, evs in out.items():
            idxs = [i for i, _, _ in evs]
            if len(set(idxs)) != len(idxs):
                raise IncompleteTraceError(f"agent {agent} has simultaneous events of its own")
            out[agent] = [(k, p) for _, k, p in sorted(evs, key=lambda ev: ev[0])]
        return out

    return per_agent(t1) == per_agent(t2)


def check_view_serialisable(trace: Trace, scenario: Scenario, budget: int = 1_000_000) -> Verdict:
    """Enumerate serial orders of the requests consistent with every agent's
    own order, replaying each through the single-copy oracle; accept when
    all recorded answers are reproduced."""
    infos = _request_infos(trace)
    by_agent: dict = {}
    for info in sorted(infos, key=lambda i: i.lo):
        agent = info.req.split("#", 1)[0]
        by_agent.setdefault(agent, []).append(info)
    counter = {"nodes": 0}

    def dfs(progress: dict, flat: FlatStore, order: tuple):
        counter["nodes"] += 1
        if counter["nodes"] > budget:
            return "budget"
        if all(progress[a] == len(by_agent[a]) for a in by_agent):
            return order
        for agent in sorted(by_agent):
            if progress[agent] >= len(by_agent[agent]):
                continue
            info = by_agent[agent][progress[agent]]
            flat2 = flat.clone()
            if not _replay_batch(flat2, scenario, [info], frozenset()):
                continue
            progress2 = dict(progress)
            progress2[agent] += 1
            result = dfs(progress2, flat2, order + (info.req,))
            if result is not None:
                return result
        return None

    progress0 = {a: 0 for a in by_agent}
    outcome = dfs(progress0, scenario.initial.clone(), ())
    if outcome == "budget":
        return Verdict(NOT_SERIALISABLE, exhaustive=False, replays=counter["nodes"])
    if outcome is None:
        return Verdict(NOT_SERIALISABLE, exhaustive=True, replays=counter["nodes"])
    return Verdict(SERIALISABLE, exhaustive=True, witness=outcome, replays=counter["nodes"])
