"""Constructive schedule liftings between the three model levels.

Completeness of each refinement step is witnessed constructively: a run of
the coarser model is mapped move-for-move onto a schedule of the finer model
whose trace is view-equivalent.

- Atomic store to atomic data centres: run the finer model with ALL/ALL
  policies and the full replica selection for every fragment; each memory
  step corresponds one-to-one.
- Atomic data centres to message passing: each atomic data-centre step
  expands into a contiguous block (home handling, forwards, remote handling,
  partial-answer deliveries, collection) so that all internal traffic of a
  request is delivered before anything else happens; under ALL/ALL the
  delegate responds exactly on the block's last collection step.
"""

from __future__ import annotations

from .core import ClusterConfig
from .messages import FWD, LOCAL_ACK, LOCAL_ANSWER, REQ_READ, dc_agent, delegate_agent
from .scenario import Scenario
from .sim import DB_AGENT, ExplicitSchedule


def _request_step(scenario: Scenario, req: str):
    client, index = req.split("#", 1)
    return client, scenario.programs[client][int(index)]


def _map_ident_cm0_to_cm1(scenario: Scenario, ident: tuple) -> tuple:
    kind, req, sender, receiver = ident
    client, _ = _request_step(scenario, req)
    home = dc_agent(scenario.homes[client])
    return (
        kind,
        req,
        home if sender == DB_AGENT else sender,
        home if receiver == DB_AGENT else receiver,
    )


def full_selection(cfg: ClusterConfig, rid: str) -> tuple:
    rel = cfg.relation(rid)
    return tuple(
        (j, tuple(sorted(cfg.candidates(rid, j)))) for j in range(1, rel.fragments + 1)
    )


def lift_cm0_to_cm1(scenario: Scenario, steps: tuple) -> ExplicitSchedule:
    """Map an executed atomic-store schedule onto the per-data-centre model:
    the single memory agent's step becomes the home data centre's step with
    the full replica selection."""
    out = []
    for step in steps:
        mapped = []
        for desc in step:
            tag = desc[0]
            if tag == "send":
                mapped.append(desc)
            elif tag == "deliver":
                mapped.append(("deliver", _map_ident_cm0_to_cm1(scenario, desc[1])))
            elif tag == "recv":
                mapped.append(("recv", desc[1], _map_ident_cm0_to_cm1(scenario, desc[2])))
            elif tag == "db":
                ident = desc[1]
                client, cstep = _request_step(scenario, ident[1])
                mapped.append(
                    (
                        "dc",
                        dc_agent(scenario.homes[client]),
                        _map_ident_cm0_to_cm1(scenario, ident),
                        full_selection(scenario.cfg, cstep.rid),
                    )
                )
            else:
                raise ValueError(f"unexpected move {desc!r} in an atomic-store run")
        out.append(tuple(mapped))
    return ExplicitSchedule(tuple(out))


def lift_cm1_to_cm2(scenario: Scenario, steps: tuple) -> ExplicitSchedule:
    """Expand each atomic data-centre step into the message-passing block
    that delivers and processes all internal traffic of that request before
    any other move."""
    out = []
    for step in steps:
        for desc in step:
            if len(step) != 1:
                raise ValueError("only singleton-move schedules can be lifted")
            tag = desc[0]
            if tag in ("send", "recv", "deliver"):
                out.append((desc,))
                continue
            if tag != "dc":
                raise ValueError(f"unexpected move {desc!r} in a data-centre run")
            _, agent, ident, _sel = desc
            kind, req = ident[0], ident[1]
            _, cstep = _request_step(scenario, req)
            rel = scenario.cfg.relation(cstep.rid)
            gid = delegate_agent(req)
            local_kind = LOCAL_ANSWER if kind == REQ_READ else LOCAL_ACK
            out.append((("dc", agent, ident, None),))
            others = [d for d in rel.data_centres if dc_agent(d) != agent]
            for d in others:
                out.append((("deliver", (FWD, req, agent, dc_agent(d))),))
            for d in others:
                out.append((("dc", dc_agent(d), (FWD, req, agent, dc_agent(d)), None),))
            for d in rel.data_centres:
                out.append((("deliver", (local_kind, req, dc_agent(d), gid)),))
            for d in rel.data_centres:
                out.append((("collect", gid, (local_kind, req, dc_agent(d), gid)),))
    return ExplicitSchedule(tuple(out))
