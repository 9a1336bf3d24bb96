"""Second refinement: the home data centre handles a request locally,
forwards it to the other data centres, and spawns a delegate that collects
the partial answers until the policy's sufficiency predicate holds, then
responds to the client and deletes itself.

Unlike the atomic refinement there is no up-front replica selection: every
data centre always consults all of its alive copies, and the policy is
enforced by the delegate counting responses.  Delivery order of the internal
messages is the only nondeterminism, and the only source of anomalies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .cm0 import Condition, check_writeset
from .core import (
    UNDEF,
    ClockBank,
    ClusterConfig,
    ConfigError,
    NEG_INF,
    ReplicaStore,
    Timestamp,
    hash_fragment,
    smallest_tick_at_least,
    tuple_sort_key,
)
from .messages import (
    ACK,
    ANSWER,
    FWD,
    LOCAL_ACK,
    LOCAL_ANSWER,
    REQ_READ,
    Message,
    StepEffect,
    dc_agent,
    delegate_agent,
)
from .policies import CountState, Policy, sufficient


@dataclass
class DelegateState:
    """Per-request answer collector, scheduled like any other agent."""

    gid: str
    req: str
    kind: str  # "read" | "write"
    rid: str
    cond: object  # Condition for reads, write-set pairs for writes
    requestor: str
    mediator_dc: int
    counts: CountState
    answer: dict = field(default_factory=dict)  # key -> (value, timestamp)
    live: bool = True
    log: tuple = ()  # ((sender_dc, xs, triples), ...) for audit checks

    def clone(self) -> "DelegateState":
        return DelegateState(
            gid=self.gid,
            req=self.req,
            kind=self.kind,
            rid=self.rid,
            cond=self.cond,
            requestor=self.requestor,
            mediator_dc=self.mediator_dc,
            counts=self.counts.clone(),
            answer=dict(self.answer),
            live=self.live,
            log=self.log,
        )

    def state_key(self) -> tuple:
        return (
            self.gid,
            self.live,
            self.counts.state_key(),
            tuple(
                (k, v if v is UNDEF else tuple(v), t.key())
                for k, (v, t) in sorted(self.answer.items(), key=lambda kv: tuple_sort_key(kv[0]))
            ),
        )


def _local_groups(cfg: ClusterConfig, rid: str, d: int) -> dict:
    rel = cfg.relation(rid)
    return {j: cfg.alive_local_copies(rid, j, d) for j in range(1, rel.fragments + 1)}


def handle_locally_read(
    replicas: ReplicaStore,
    cfg: ClusterConfig,
    d: int,
    rid: str,
    cond: Condition,
    req: str,
    eff: StepEffect,
) -> None:
    """Evaluate the request over all alive local copies and send the
    timestamped partial answer to the delegate.

    The local maximum may not be the global one, so timestamps travel with
    the triples; tombstones are included so a fresher deletion can beat an
    older value during collection.
    """
    groups = _local_groups(cfg, rid, d)
    triples = []
    for j, nodes in groups.items():
        keys = set()
        for node in nodes:
            keys.update(replicas.stored_keys(rid, j, d, node))
        for k in sorted(keys, key=tuple_sort_key):
            if not cond.matches(k, cfg, rid):
                continue
            t_max = NEG_INF
            for node in nodes:
                _, t = replicas.peek(rid, j, d, node, k)
                if t > t_max:
                    t_max = t
            if t_max is NEG_INF:
                continue
            values = {
                v if v is UNDEF else tuple(v)
                for node in nodes
                for (v, t) in (replicas.peek(rid, j, d, node, k),)
                if t == t_max
            }
            if len(values) != 1:
                raise ConfigError(f"local replicas of {rid}{k!r} disagree at t_max")
            triples.append((k, values.pop(), t_max))
    xs = tuple(len(groups[j]) for j in sorted(groups))
    eff.sends.append(
        Message(
            LOCAL_ANSWER,
            req,
            dc_agent(d),
            delegate_agent(req),
            payload=(rid, frozenset(triples), xs),
        )
    )


def handle_locally_write(
    replicas: ReplicaStore,
    clocks: ClockBank,
    cfg: ClusterConfig,
    d: int,
    rid: str,
    pairs: tuple,
    req: str,
    t_write: Timestamp,
    eff: StepEffect,
) -> None:
    """Conditionally update all alive local copies; acknowledge with the
    per-fragment count of alive copies (counted even when the update lost
    against a newer timestamp)."""
    if clocks.now(d) < t_write:
        eff.update(("clock", d), smallest_tick_at_least(d, clocks.ranks[d], t_write))
    p = dict(pairs)
    groups = _local_groups(cfg, rid, d)
    for j, nodes in groups.items():
        for node in nodes:
            for k in sorted(p, key=tuple_sort_key):
                if hash_fragment(cfg, rid, k) != j:
                    continue
                _, t_old = replicas.peek(rid, j, d, node, k)
                if t_old < t_write:
                    eff.update(("rep", rid, j, d, node, k), (p[k], t_write))
    xs = tuple(len(groups[j]) for j in sorted(groups))
    eff.sends.append(
        Message(
            LOCAL_ACK,
            req,
            dc_agent(d),
            delegate_agent(req),
            payload=(rid, xs),
        )
    )


def delegate_external_req(
    replicas: ReplicaStore,
    clocks: ClockBank,
    cfg: ClusterConfig,
    d: int,
    msg: Message,
) -> StepEffect:
    """Home data centre step: draw a timestamp, spawn the delegate, handle
    the request locally and forward it to every other data centre."""
    eff = StepEffect()
    t_current = clocks.now(d)
    eff.update(("clock", d), t_current.tick + 1)
    is_read = msg.kind == REQ_READ
    rid = msg.payload[0]
    body = msg.payload[1]
    if is_read:
        body.check_arity(cfg, rid)
    else:
        check_writeset(dict(body), cfg, rid)
    gid = delegate_agent(msg.req)
    delegate = DelegateState(
        gid=gid,
        req=msg.req,
        kind="read" if is_read else "write",
        rid=rid,
        cond=body,
        requestor=msg.sender,
        mediator_dc=d,
        counts=CountState.zero(cfg, rid),
    )
    eff.update(("dnew", gid), delegate)
    if is_read:
        handle_locally_read(replicas, cfg, d, rid, body, msg.req, eff)
    else:
        handle_locally_write(replicas, clocks, cfg, d, rid, body, msg.req, t_current, eff)
    for d2 in cfg.relation(rid).data_centres:
        if d2 != d:
            eff.sends.append(
                Message(
                    FWD,
                    msg.req,
                    dc_agent(d),
                    dc_agent(d2),
                    payload=(msg.kind, rid, body, t_current),
                )
            )
    eff.consumes.append(msg)
    return eff


def manage_internal_req(
    replicas: ReplicaStore,
    clocks: ClockBank,
    cfg: ClusterConfig,
    d: int,
    msg: Message,
) -> StepEffect:
    """Forwarded-request step at a non-home data centre."""
    inner_kind, rid, body, t_fwd = msg.payload
    eff = StepEffect()
    if inner_kind == REQ_READ:
        handle_locally_read(replicas, cfg, d, rid, body, msg.req, eff)
    else:
        handle_locally_write(replicas, clocks, cfg, d, rid, body, msg.req, t_fwd, eff)
        # Message-passing clock condition holds after processing a write.
        eff.checks.append(("cond3", d, t_fwd))
    eff.consumes.append(msg)
    return eff


def _merge_answer(answer: dict, triples) -> dict:
    merged = dict(answer)
    for (k, v, t) in sorted(triples, key=lambda kvt: (tuple_sort_key(kvt[0]), kvt[2].key())):
        if k in merged:
            _, t_old = merged[k]
            if t_old < t:
                merged[k] = (v, t)
        else:
            merged[k] = (v, t)
    return merged


def _audit(delegate: DelegateState, counts: CountState, merged: dict, log: tuple) -> None:
    # Counts must equal the sums of the reported vectors, and each collected
    # key must carry the maximum timestamp seen for it so far.
    sums: dict = {}
    for (d, xs, _) in log:
        for j, x in enumerate(xs, start=1):
            sums[j] = sums.get(j, 0) + x
    for j, total in sums.items():
        if counts.by_fragment[j] != total:
            raise ConfigError(f"delegate {delegate.gid}: count({j}) diverged from its log")
    best: dict = {}
    for (_, _, triples) in log:
        for (k, v, t) in triples:
            if k not in best or best[k][1] < t:
                best[k] = (v, t)
    if merged != best:
        raise ConfigError(f"delegate {delegate.gid}: stale triple survived a merge")


def collect_respond_read(
    delegate: DelegateState, cfg: ClusterConfig, read_policy: Policy, msg: Message
) -> StepEffect:
    if delegate.kind != "read":
        raise ConfigError(f"{delegate.gid} does not collect read answers")
    return collect_respond(delegate, cfg, read_policy, msg)


def collect_respond_write(
    delegate: DelegateState, cfg: ClusterConfig, write_policy: Policy, msg: Message
) -> StepEffect:
    if delegate.kind != "write":
        raise ConfigError(f"{delegate.gid} does not collect write acknowledgements")
    return collect_respond(delegate, cfg, write_policy, msg)


def collect_respond(
    delegate: DelegateState,
    cfg: ClusterConfig,
    policy: Policy,
    msg: Message,
) -> StepEffect:
    """One delegate step: fold in a partial answer, and respond and delete
    the delegate as soon as the policy is satisfied."""
    eff = StepEffect()
    sender_dc = int(msg.sender[1:])
    if delegate.kind == "read":
        if msg.kind != LOCAL_ANSWER:
            raise ConfigError(f"read delegate {delegate.gid} got {msg.kind}")
        rid, triples, xs = msg.payload
        merged = _merge_answer(delegate.answer, triples)
        for k, vt in merged.items():
            if delegate.answer.get(k) != vt:
                eff.update(("dans", delegate.gid, k), vt)
    else:
        if msg.kind != LOCAL_ACK:
            raise ConfigError(f"write delegate {delegate.gid} got {msg.kind}")
        rid, xs = msg.payload
        triples = frozenset()
        merged = delegate.answer
    counts = delegate.counts.clone()
    counts.add(sender_dc, xs)
    for j, x in enumerate(xs, start=1):
        eff.update(("dcount", delegate.gid, j), counts.by_fragment[j])
        eff.update(("dcountd", delegate.gid, j, sender_dc), counts.by_fragment_dc[(j, sender_dc)])
    log = delegate.log + ((sender_dc, xs, triples),)
    eff.update(("dlog", delegate.gid), log)
    eff.consumes.append(msg)
    if sufficient(counts, policy, cfg, delegate.rid):
        _audit(delegate, counts, merged, log)
        mediator = dc_agent(delegate.mediator_dc)
        if delegate.kind == "read":
            rows = frozenset(
                (k, tuple(v)) for k, (v, _) in merged.items() if v is not UNDEF
            )
            eff.sends.append(
                Message(ANSWER, delegate.req, mediator, delegate.requestor, payload=(delegate.rid, rows))
            )
            eff.events.append(("RESP", delegate.requestor, delegate.req, ("answer", delegate.rid, rows)))
        else:
            eff.sends.append(
                Message(ACK, delegate.req, mediator, delegate.requestor, payload=(delegate.rid,))
            )
            eff.events.append(("RESP", delegate.requestor, delegate.req, ("ack", delegate.rid)))
        eff.update(("dlive", delegate.gid), False)
    return eff
