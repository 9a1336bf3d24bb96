"""Deterministic concurrent-run engine.

A run is a sequence of global steps.  At each step the schedule picks one or
more enabled moves (deliver an in-flight message, let a client send or
receive, let a memory agent or delegate process one received message); the
moves' update sets are merged, checked for consistency, and applied
simultaneously.  Seeded schedules pick one move per step from a PRNG;
explicit schedules name moves by structural descriptors, which makes any
discovered schedule replayable and printable.

Clients obey the request/reply discipline: after sending a request a client
is blocked until it has received the matching response.  Requests are
identified as ``agent#index`` so identities are stable across schedules.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from . import cm1
from .cm0 import db_answer_read
from .cm2 import (
    collect_respond_read,
    collect_respond_write,
    delegate_external_req,
    manage_internal_req,
)
from .core import UNDEF, ClusterConfig, ConfigError, seed_replicas
from .messages import (
    ACK,
    ANSWER,
    FWD,
    LOCAL_ACK,
    LOCAL_ANSWER,
    REQ_READ,
    REQ_WRITE,
    REQUEST_KINDS,
    Message,
    StepEffect,
    dc_agent,
)
from .policies import enumerate_compliant_selections
from .scenario import Scenario
from .trace import PRINT, REQ, RESP, Trace, TraceEvent

MODELS = ("cm0", "cm1", "cm2")
DB_AGENT = "db"
DEFAULT_STEP_LIMIT = 100_000


class SimInvariantError(AssertionError):
    """An internal consistency property of the model was violated."""


class RunDiscarded(Exception):
    """Simultaneous moves built an inconsistent update set."""


class ScheduleError(Exception):
    """An explicit schedule named a move that is not enabled."""


# ---------------------------------------------------------------------------
# Moves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Move:
    tag: str  # deliver | send | recv | db | dc | collect
    agent: str = ""
    msg: Optional[Message] = None
    selections: Optional[tuple] = None  # ((j, frozenset of (dc, node)), ...)

    def descriptor(self) -> tuple:
        ident = self.msg.ident() if self.msg is not None else None
        if self.tag == "deliver":
            return ("deliver", ident)
        if self.tag == "send":
            return ("send", self.agent)
        if self.tag == "recv":
            return ("recv", self.agent, ident)
        if self.tag == "db":
            return ("db", ident)
        if self.tag == "dc":
            sel = None
            if self.selections is not None:
                sel = tuple((j, tuple(sorted(group))) for j, group in self.selections)
            return ("dc", self.agent, ident, sel)
        if self.tag == "collect":
            return ("collect", self.agent, ident)
        raise ConfigError(f"unknown move tag {self.tag}")  # pragma: no cover


def describe_descriptor(desc: tuple) -> str:
    tag = desc[0]
    if tag == "deliver":
        return f"deliver[{_ident_str(desc[1])}]"
    if tag == "send":
        return f"send[{desc[1]}]"
    if tag == "recv":
        return f"recv[{desc[1]}|{_ident_str(desc[2])}]"
    if tag == "db":
        return f"db[{_ident_str(desc[1])}]"
    if tag == "dc":
        sel = desc[3]
        sel_str = ""
        if sel is not None:
            parts = [
                "j%d={%s}" % (j, ",".join(f"({d},{n})" for d, n in group)) for j, group in sel
            ]
            sel_str = "|" + " ".join(parts)
        return f"dc[{desc[1]}|{_ident_str(desc[2])}{sel_str}]"
    if tag == "collect":
        return f"collect[{desc[1]}|{_ident_str(desc[2])}]"
    return repr(desc)


def _ident_str(ident: tuple) -> str:
    kind, req, sender, receiver = ident
    return f"{kind}:{req}:{sender}>{receiver}"


# ---------------------------------------------------------------------------
# Schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeededSchedule:
    seed: int

    def make_picker(self) -> "Picker":
        return _SeededPicker(self.seed)

    def describe(self) -> str:
        return f"seed={self.seed}"


@dataclass(frozen=True)
class ExplicitSchedule:
    """A sequence of global steps; each step is a tuple of move descriptors
    executed simultaneously (singletons for an interleaving schedule)."""

    steps: tuple

    @classmethod
    def of_moves(cls, descriptors: Iterable[tuple]) -> "ExplicitSchedule":
        return cls(tuple((d,) for d in descriptors))

    def make_picker(self) -> "Picker":
        return _ExplicitPicker(self.steps)

    def describe(self) -> str:
        flat = []
        for step in self.steps:
            flat.append("+".join(describe_descriptor(d) for d in step))
        return ";".join(flat)


class Picker:
    def pick(self, sim: "Simulation") -> list:
        raise NotImplementedError


class _SeededPicker(Picker):
    def __init__(self, seed: int):
        self.rng = random.Random(seed)

    def pick(self, sim: "Simulation") -> list:
        moves = sim.enumerate_moves(with_selections=False)
        if not moves:
            return []
        move = moves[self.rng.randrange(len(moves))]
        if move.tag == "dc" and sim.model == "cm1" and move.selections is None:
            move = sim.attach_selections(move, self.rng)
        return [move]


class _ExplicitPicker(Picker):
    def __init__(self, steps: tuple):
        self.steps = list(steps)
        self.pos = 0

    def pick(self, sim: "Simulation") -> list:
        if self.pos >= len(self.steps):
            raise ScheduleError(
                f"schedule ran out of steps at round {sim.round} with clients still active"
            )
        step = self.steps[self.pos]
        self.pos += 1
        return [sim.resolve_descriptor(d) for d in step]

    def leftovers(self) -> int:
        return len(self.steps) - self.pos


# ---------------------------------------------------------------------------
# Simulation state
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    trace: Trace
    sim: "Simulation"
    completed: bool
    reason: str = ""
    schedule_steps: tuple = ()  # executed descriptors up to client completion

    def as_explicit_schedule(self) -> "ExplicitSchedule":
        return ExplicitSchedule(self.schedule_steps)


class Simulation:
    def __init__(self, scenario: Scenario, model: str, checks: bool = True, sel_bound: int = 64):
        if model not in MODELS:
            raise ConfigError(f"unknown model {model!r}")
        scenario.validate_for_model(model, sel_bound)
        self.scenario = scenario
        self.model = model
        self.cfg: ClusterConfig = scenario.cfg
        self.checks = checks
        self.sel_bound = sel_bound
        if model == "cm0":
            self.flat = scenario.initial.clone()
            self.replicas = None
            self.clocks = None
        else:
            self.flat = None
            self.replicas = seed_replicas(self.cfg, scenario.initial)
            self.clocks = self.cfg.make_clock_bank()
        self.pc = {a: 0 for a in scenario.programs}
        self.status = {a: ("ready",) for a in scenario.programs}
        self.outs = {a: () for a in scenario.programs}
        self.delegates: dict = {}
        self.dead_delegates: set = set()
        self.inflight: dict = {}  # ident -> Message
        self.mailbox: dict = {}  # agent -> {ident: Message}
        self.events: list = []
        self.round = 0
        self.answered: set = set()
        self.executed: list = []  # descriptor tuples per round, for replay

    # -- plumbing ----------------------------------------------------------

    def clone(self) -> "Simulation":
        s = Simulation.__new__(Simulation)
        s.scenario, s.model, s.cfg = self.scenario, self.model, self.cfg
        s.checks, s.sel_bound = self.checks, self.sel_bound
        s.flat = self.flat.clone() if self.flat is not None else None
        s.replicas = self.replicas.clone() if self.replicas is not None else None
        s.clocks = self.clocks.clone() if self.clocks is not None else None
        s.pc = dict(self.pc)
        s.status = dict(self.status)
        s.outs = dict(self.outs)
        s.delegates = {gid: d.clone() for gid, d in self.delegates.items()}
        s.dead_delegates = set(self.dead_delegates)
        s.inflight = dict(self.inflight)
        s.mailbox = {a: dict(m) for a, m in self.mailbox.items()}
        s.events = list(self.events)
        s.round = self.round
        s.answered = set(self.answered)
        s.executed = list(self.executed)
        return s

    def home_agent(self, client: str) -> str:
        if self.model == "cm0":
            return DB_AGENT
        return dc_agent(self.scenario.homes[client])

    def req_id(self, client: str, index: int) -> str:
        return f"{client}#{index}"

    def clients_done(self) -> bool:
        return all(
            self.status[a] == ("ready",) and self.pc[a] >= len(self.scenario.programs[a])
            for a in self.scenario.programs
        )

    def trace(self, meta: tuple = ()) -> Trace:
        return Trace(events=tuple(self.events), meta=meta)

    def state_key(self, include_round: bool = True) -> tuple:
        msgs = tuple(sorted(self.inflight))
        boxes = tuple(
            (agent, tuple(sorted(box))) for agent, box in sorted(self.mailbox.items()) if box
        )
        payloads = tuple(
            self.inflight[i].payload for i in sorted(self.inflight)
        ) + tuple(
            m.payload for _, box in sorted(self.mailbox.items()) for m in
            (box[i] for i in sorted(box))
        )
        stores: tuple
        if self.model == "cm0":
            stores = ("flat", self.flat.state_key())
        else:
            stores = ("rep", self.replicas.state_key(), self.clocks.state_key())
        return (
            (self.round,) if include_round else (),
            tuple(sorted((a, self.pc[a], self.status[a], self.outs[a]) for a in self.pc)),
            stores,
            msgs,
            boxes,
            payloads,
            tuple(sorted((gid, d.state_key()) for gid, d in self.delegates.items() if d.live)),
            tuple(sorted(self.dead_delegates)),
            tuple(sorted(self.answered)),
        )

    # -- move enumeration ---------------------------------------------------

    def enumerate_moves(self, with_selections: bool) -> list:
        moves = []
        for ident in sorted(self.inflight):
            moves.append(Move("deliver", msg=self.inflight[ident]))
        for a in sorted(self.scenario.programs):
            st = self.status[a]
            if st[0] == "ready" and self.pc[a] < len(self.scenario.programs[a]):
                moves.append(Move("send", agent=a))
            elif st[0] == "waiting":
                box = self.mailbox.get(a, {})
                for ident in sorted(box):
                    if ident[1] == st[1]:
                        moves.append(Move("recv", agent=a, msg=box[ident]))
        if self.model == "cm0":
            box = self.mailbox.get(DB_AGENT, {})
            for ident in sorted(box):
                moves.append(Move("db", msg=box[ident]))
        else:
            for d in self.cfg.all_dcs():
                agent = dc_agent(d)
                box = self.mailbox.get(agent, {})
                for ident in sorted(box):
                    msg = box[ident]
                    if self.model == "cm1":
                        if with_selections:
                            for sel in self.selection_options(msg):
                                moves.append(Move("dc", agent=agent, msg=msg, selections=sel))
                        else:
                            moves.append(Move("dc", agent=agent, msg=msg))
                    else:
                        moves.append(Move("dc", agent=agent, msg=msg))
            for gid in sorted(self.delegates):
                delegate = self.delegates[gid]
                if not delegate.live:
                    continue
                box = self.mailbox.get(gid, {})
                for ident in sorted(box):
                    moves.append(Move("collect", agent=gid, msg=box[ident]))
        return moves

    def _policy_for(self, kind: str):
        return self.scenario.read_policy if kind == REQ_READ else self.scenario.write_policy

    def _fragment_options(self, msg: Message) -> list:
        rid = msg.payload[0]
        rel = self.cfg.relation(rid)
        policy = self._policy_for(msg.kind)
        per_fragment = []
        for j in range(1, rel.fragments + 1):
            options = enumerate_compliant_selections(self.cfg, rid, j, policy, self.sel_bound)
            if not options:
                raise ConfigError(f"policy {policy} unsatisfiable on {rid} fragment {j}")
            per_fragment.append((j, options))
        return per_fragment

    def selection_options(self, msg: Message) -> list:
        """Cartesian product of compliant selections across fragments."""
        per_fragment = self._fragment_options(msg)
        combos: list = [()]
        for j, options in per_fragment:
            combos = [c + ((j, g),) for c in combos for g in options]
            if len(combos) > self.sel_bound * 8:
                raise ConfigError(
                    "selection space too large to enumerate; lower the replica "
                    "count or fragment count of the scenario"
                )
        return combos

    def attach_selections(self, move: Move, rng: random.Random) -> Move:
        sel = []
        for j, options in self._fragment_options(move.msg):
            sel.append((j, options[rng.randrange(len(options))]))
        return Move("dc", agent=move.agent, msg=move.msg, selections=tuple(sel))

    def resolve_descriptor(self, desc: tuple) -> Move:
        tag = desc[0]
        try:
            if tag == "deliver":
                return Move("deliver", msg=self.inflight[desc[1]])
            if tag == "send":
                a = desc[1]
                if self.status[a] != ("ready",) or self.pc[a] >= len(self.scenario.programs[a]):
                    raise KeyError("client cannot send now")
                return Move("send", agent=a)
            if tag == "recv":
                return Move("recv", agent=desc[1], msg=self.mailbox[desc[1]][desc[2]])
            if tag == "db":
                return Move("db", msg=self.mailbox[DB_AGENT][desc[1]])
            if tag == "dc":
                agent, ident, sel = desc[1], desc[2], desc[3]
                msg = self.mailbox[agent][ident]
                selections = None
                if sel is not None:
                    selections = tuple((j, frozenset(group)) for j, group in sel)
                elif self.model == "cm1":
                    raise ScheduleError(f"cm1 step {describe_descriptor(desc)} needs selections")
                return Move("dc", agent=agent, msg=msg, selections=selections)
            if tag == "collect":
                gid = desc[1]
                if gid not in self.delegates or not self.delegates[gid].live:
                    raise KeyError("delegate is not live")
                return Move("collect", agent=gid, msg=self.mailbox[gid][desc[2]])
        except KeyError as exc:
            raise ScheduleError(
                f"move {describe_descriptor(desc)} is not enabled at round {self.round}: {exc}"
            ) from None
        raise ScheduleError(f"unknown move descriptor {desc!r}")

    # -- step execution ------------------------------------------------------

    def execute_move(self, move: Move) -> StepEffect:
        if move.tag == "deliver":
            return self._deliver(move.msg)
        if move.tag == "send":
            return self._client_send(move.agent)
        if move.tag == "recv":
            return self._client_recv(move.agent, move.msg)
        if move.tag == "db":
            return self._db_step(move.msg)
        if move.tag == "dc":
            return self._dc_step(move)
        if move.tag == "collect":
            delegate = self.delegates[move.agent]
            if delegate.kind == "read":
                return collect_respond_read(delegate, self.cfg, self.scenario.read_policy, move.msg)
            return collect_respond_write(delegate, self.cfg, self.scenario.write_policy, move.msg)
        raise ConfigError(f"unknown move {move!r}")  # pragma: no cover

    def _deliver(self, msg: Message) -> StepEffect:
        eff = StepEffect()
        eff.updates[("delivered", msg.ident())] = msg
        if msg.kind in REQUEST_KINDS:
            payload = (
                ("read", msg.payload[0], msg.payload[1])
                if msg.kind == REQ_READ
                else ("write", msg.payload[0], msg.payload[1])
            )
            eff.events.append((REQ, msg.sender, msg.req, payload))
        return eff

    def _client_send(self, a: str) -> StepEffect:
        step = self.scenario.programs[a][self.pc[a]]
        req = self.req_id(a, self.pc[a])
        eff = StepEffect()
        if step.kind == "read":
            msg = Message(REQ_READ, req, a, self.home_agent(a), payload=(step.rid, step.cond))
        else:
            msg = Message(REQ_WRITE, req, a, self.home_agent(a), payload=(step.rid, step.pairs))
        eff.sends.append(msg)
        eff.update(("pc", a), self.pc[a] + 1)
        eff.update(("status", a), ("waiting", req))
        return eff

    def _client_recv(self, a: str, msg: Message) -> StepEffect:
        eff = StepEffect()
        eff.consumes.append(msg)
        eff.update(("status", a), ("ready",))
        index = int(msg.req.split("#", 1)[1])
        step = self.scenario.programs[a][index]
        if step.kind == "read" and step.print_answer:
            rows = msg.payload[1]
            eff.events.append((PRINT, a, msg.req, ("print", msg.payload[0], rows)))
            eff.update(("out", a), self.outs[a] + ((step.rid, rows),))
        return eff

    def _db_step(self, msg: Message) -> StepEffect:
        eff = StepEffect()
        rid = msg.payload[0]
        if msg.kind == REQ_READ:
            rows = db_answer_read(self.flat, self.cfg, rid, msg.payload[1])
            eff.sends.append(Message(ANSWER, msg.req, DB_AGENT, msg.sender, payload=(rid, rows)))
            eff.events.append((RESP, msg.sender, msg.req, ("answer", rid, rows)))
        else:
            for k, v in msg.payload[1]:
                eff.update(("flat", rid, k), v)
            eff.sends.append(Message(ACK, msg.req, DB_AGENT, msg.sender, payload=(rid,)))
            eff.events.append((RESP, msg.sender, msg.req, ("ack", rid)))
        eff.consumes.append(msg)
        return eff

    def _dc_step(self, move: Move) -> StepEffect:
        d = int(move.agent[1:])
        msg = move.msg
        if self.model == "cm1":
            selections = dict(move.selections)
            if msg.kind == REQ_READ:
                return cm1.answer_read_req(self.replicas, self.cfg, d, msg, selections)
            return cm1.perform_write_req(self.replicas, self.clocks, self.cfg, d, msg, selections)
        if msg.kind in REQUEST_KINDS:
            return delegate_external_req(self.replicas, self.clocks, self.cfg, d, msg)
        if msg.kind == FWD:
            return manage_internal_req(self.replicas, self.clocks, self.cfg, d, msg)
        raise ConfigError(f"data centre {d} cannot process {msg.kind}")

    # -- applying a global step ----------------------------------------------

    def apply_round(self, moves: list) -> None:
        if not moves:
            raise ConfigError("a global step needs at least one move")
        effects = [self.execute_move(m) for m in moves]
        self.round += 1
        self.executed.append(tuple(m.descriptor() for m in moves))
        merged: dict = {}
        for eff in effects:
            for loc, value in eff.updates.items():
                if loc in merged and merged[loc] != value:
                    raise RunDiscarded(
                        f"round {self.round}: conflicting updates at {loc!r}: "
                        f"{merged[loc]!r} vs {value!r}"
                    )
                merged[loc] = value
        # messages: consumes first, then deliveries, then fresh sends
        for eff in effects:
            for msg in eff.consumes:
                box = self.mailbox.get(msg.receiver, {})
                if box.pop(msg.ident(), None) is None:
                    raise SimInvariantError(f"consumed message not in mailbox: {msg}")
        for loc, value in list(merged.items()):
            if loc[0] == "delivered":
                msg = value
                del self.inflight[msg.ident()]
                receiver = msg.receiver
                if receiver.startswith("g!") and (
                    receiver in self.dead_delegates or receiver not in self.delegates
                ):
                    pass  # late message to a deleted delegate: dropped
                else:
                    self.mailbox.setdefault(receiver, {})[msg.ident()] = msg
                del merged[loc]
        for eff in effects:
            for msg in eff.sends:
                if msg.ident() in self.inflight:
                    raise SimInvariantError(f"duplicate in-flight message {msg}")
                self.inflight[msg.ident()] = msg
        self._apply_updates(merged)
        for eff in effects:
            for ev in eff.events:
                kind, agent, req, payload = ev
                if kind == RESP:
                    if req in self.answered:
                        raise SimInvariantError(f"second response for request {req}")
                    self.answered.add(req)
                self.events.append(TraceEvent(self.round, kind, agent, req, payload))
        for eff in effects:
            for check in eff.checks:
                if check[0] == "cond3":
                    _, d, t = check
                    if not self.clocks.now(d) >= t:
                        raise SimInvariantError(
                            f"clock at dc {d} behind {t} after processing its message"
                        )
        if self.checks:
            self._check_invariants()

    def _apply_updates(self, merged: dict) -> None:
        for loc in sorted(merged, key=repr):
            value = merged[loc]
            tag = loc[0]
            if tag == "flat":
                _, rid, k = loc
                self.flat.set(rid, k, value)
            elif tag == "rep":
                _, rid, j, d, node, k = loc
                v, t = value
                self.replicas.store(rid, j, d, node, k, v, t)
            elif tag == "clock":
                _, d = loc
                if value < self.clocks.ticks[d]:
                    raise SimInvariantError(f"clock at dc {d} moved backwards")
                self.clocks.ticks[d] = value
            elif tag == "pc":
                self.pc[loc[1]] = value
            elif tag == "status":
                self.status[loc[1]] = value
            elif tag == "out":
                self.outs[loc[1]] = value
            elif tag == "dnew":
                self.delegates[loc[1]] = value.clone()
            elif tag == "dans":
                self.delegates[loc[1]].answer[loc[2]] = value
            elif tag == "dcount":
                self.delegates[loc[1]].counts.by_fragment[loc[2]] = value
            elif tag == "dcountd":
                self.delegates[loc[1]].counts.by_fragment_dc[(loc[2], loc[3])] = value
            elif tag == "dlog":
                self.delegates[loc[1]].log = value
            elif tag == "dlive":
                gid = loc[1]
                self.delegates[gid].live = False
                self.dead_delegates.add(gid)
                self.mailbox.pop(gid, None)
            else:  # pragma: no cover
                raise ConfigError(f"unknown update location {loc!r}")

    def _check_invariants(self) -> None:
        if self.replicas is None:
            return
        freshest: dict = {}
        for (rid, j, d, node), m in self.replicas.data.items():
            for k, (v, t) in m.items():
                cur = freshest.get((rid, k))
                if cur is None or t > cur[0]:
                    freshest[(rid, k)] = (t, {v if v is UNDEF else tuple(v)})
                elif t == cur[0]:
                    cur[1].add(v if v is UNDEF else tuple(v))
        for (rid, k), (t, values) in freshest.items():
            if len(values) != 1:
                raise SimInvariantError(
                    f"replicas of {rid}{k!r} hold different values at the maximal "
                    f"timestamp {t}: {values!r}"
                )

    # -- run loop --------------------------------------------------------------

    def drain(self, step_limit: int) -> bool:
        """Deliver and process all remaining internal traffic, one move per
        step in canonical order.  Effects of the drained moves are
        order-insensitive (conditional timestamped writes and clock joins),
        so this keeps runs deterministic."""
        while True:
            moves = self.enumerate_moves(with_selections=False)
            if not moves:
                return True
            if self.round >= step_limit:
                return False
            self.apply_round([moves[0]])


def run(
    scenario: Scenario,
    model: str,
    schedule,
    step_limit: int = DEFAULT_STEP_LIMIT,
    checks: bool = True,
    sel_bound: int = 64,
) -> RunResult:
    """Execute the scenario to completion (or the step limit) and return the
    trace plus the final state."""
    sim = Simulation(scenario, model, checks=checks, sel_bound=sel_bound)
    picker = schedule.make_picker()
    meta = _meta(scenario, model, schedule)
    while not sim.clients_done():
        if sim.round >= step_limit:
            return RunResult(sim.trace(meta), sim, False, "step limit reached")
        moves = picker.pick(sim)
        if not moves:
            return RunResult(sim.trace(meta), sim, False, "no enabled moves")
        sim.apply_round(moves)
    steps = tuple(sim.executed)
    if isinstance(picker, _ExplicitPicker) and picker.leftovers():
        raise ScheduleError(f"{picker.leftovers()} schedule steps left after all clients finished")
    if not sim.drain(step_limit):
        return RunResult(sim.trace(meta), sim, False, "step limit reached in drain", steps)
    if sim.inflight:
        raise SimInvariantError("in-flight messages remain after a completed run")
    return RunResult(sim.trace(meta), sim, True, "completed", steps)


def _meta(scenario: Scenario, model: str, schedule) -> tuple:
    return (
        ("scenario", scenario.name),
        ("model", model),
        ("schedule", schedule.describe()),
    )


# ---------------------------------------------------------------------------
# Schedule search and exhaustive trace enumeration
# ---------------------------------------------------------------------------


@dataclass
class SearchResult:
    witness: Optional[ExplicitSchedule]
    trace: Optional[Trace]
    exhausted: bool
    explored: int


def _search_priority(move: Move) -> tuple:
    """Exploration order for the schedule search (not part of the schedule
    semantics).  Client progress and request handling come before internal
    fan-out, pending writes before reads, and forwarded propagation last:
    consistency anomalies live where propagation lags behind answers, so the
    first descents head straight for them."""
    desc = move.descriptor()
    if move.tag == "recv":
        return (0, desc)
    if move.tag == "send":
        return (1, desc)
    if move.tag == "collect":
        return (3, desc)
    if move.tag == "deliver":
        kind = move.msg.kind
        if kind in (ANSWER, ACK):
            return (2, desc)
        if kind in (LOCAL_ANSWER, LOCAL_ACK):
            return (4, desc)
        if kind == REQ_WRITE:
            return (6, 0, desc)
        if kind == REQ_READ:
            return (6, 1, desc)
        return (8, desc)
    if move.tag in ("db", "dc"):
        if move.msg.kind == REQ_WRITE:
            return (5, 0, desc)
        if move.msg.kind == REQ_READ:
            return (5, 1, desc)
        return (7, desc)
    return (9, desc)  # pragma: no cover


def search_schedules(
    scenario: Scenario,
    model: str,
    predicate: Callable[[Trace, Scenario], bool],
    budget: int = 1_000_000,
    step_limit: int = DEFAULT_STEP_LIMIT,
    checks: bool = True,
    sel_bound: int = 64,
) -> SearchResult:
    """Depth-first search over singleton-move schedules for a completed trace
    satisfying the predicate.

    States are de-duplicated on the full semantic state (stores, clocks,
    mailboxes, client outputs), so predicates should depend on agents'
    observable payload histories rather than on raw step indices; the bundled
    predicates do.  ``exhausted`` is True when the whole (de-duplicated)
    schedule space was covered within budget.
    """
    root = Simulation(scenario, model, checks=checks, sel_bound=sel_bound)
    visited: set = set()
    explored = 0
    stack = [(root, ())]
    while stack:
        sim, path = stack.pop()
        explored += 1
        if explored > budget:
            return SearchResult(None, None, False, explored)
        if sim.clients_done():
            probe = sim.clone()
            if not probe.drain(step_limit):
                continue
            trace = probe.trace(_meta(scenario, model, ExplicitSchedule(())))
            if predicate(trace, scenario):
                witness = ExplicitSchedule.of_moves(path)
                trace = probe.trace(_meta(scenario, model, witness))
                return SearchResult(witness, trace, False, explored)
            continue
        key = sim.state_key()
        if key in visited:
            continue
        visited.add(key)
        if sim.round >= step_limit:
            continue
        moves = sorted(sim.enumerate_moves(with_selections=True), key=_search_priority)
        for move in reversed(moves):
            child = sim.clone()
            try:
                child.apply_round([move])
            except RunDiscarded:
                continue
            stack.append((child, path + (move.descriptor(),)))
    return SearchResult(None, None, True, explored)


def enumerate_traces(
    scenario: Scenario,
    model: str,
    max_states: int = 2_000_000,
    checks: bool = True,
    sel_bound: int = 64,
) -> frozenset:
    """All completed-run traces reachable under singleton-move schedules,
    with step indices normalized to dense event ranks.

    Scheduler rounds that emit no event are squeezed out, so each returned
    trace stands for every run with the same event order; rank compression
    only narrows request windows, which keeps COMPATIBLE verdicts on these
    traces valid for the runs they stand for.
    """
    memo: dict = {}
    states = 0

    def suffixes(sim: Simulation) -> frozenset:
        nonlocal states
        if sim.clients_done():
            return frozenset({()})
        key = sim.state_key(include_round=False)
        cached = memo.get(key)
        if cached is not None:
            return cached
        states += 1
        if states > max_states:
            raise ConfigError(f"trace enumeration exceeded {max_states} states")
        out = set()
        for move in sim.enumerate_moves(with_selections=True):
            child = sim.clone()
            mark = len(child.events)
            try:
                child.apply_round([move])
            except RunDiscarded:
                continue
            emitted = tuple(
                (e.kind, e.agent, e.req, e.payload) for e in child.events[mark:]
            )
            for suffix in suffixes(child):
                out.add(emitted + suffix)
        result = frozenset(out)
        memo[key] = result
        return result

    root = Simulation(scenario, model, checks=checks, sel_bound=sel_bound)
    traces = set()
    for body in suffixes(root):
        events = tuple(
            TraceEvent(i, kind, agent, req, payload)
            for i, (kind, agent, req, payload) in enumerate(body, start=1)
        )
        traces.add(Trace(events=events))
    return frozenset(traces)
