"""Message vocabulary and the staged effect of one agent step.

A message's identity is (kind, req, sender, receiver); at most one live
message with a given identity exists at any moment, which makes schedules
replayable by naming messages instead of opaque ids.

A step never mutates shared state directly: it returns a ``StepEffect``
holding an update set (location -> value), the messages it consumes and
sends, and any trace events.  The engine merges effects of simultaneous
steps and rejects inconsistent update sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

# Message kinds
REQ_READ = "req_read"
REQ_WRITE = "req_write"
ANSWER = "answer"
ACK = "ack"
FWD = "fwd"
LOCAL_ANSWER = "local_answer"
LOCAL_ACK = "local_ack"

REQUEST_KINDS = (REQ_READ, REQ_WRITE)


@dataclass(frozen=True)
class Message:
    kind: str
    req: str  # originating request id, e.g. "a1#0"
    sender: str
    receiver: str
    payload: tuple = ()

    def ident(self) -> tuple:
        return (self.kind, self.req, self.sender, self.receiver)

    def describe(self) -> str:
        return f"{self.kind}:{self.req}:{self.sender}>{self.receiver}"


def dc_agent(d: int) -> str:
    return f"d{d}"


def agent_dc(agent: str) -> int:
    return int(agent[1:])


def delegate_agent(req: str) -> str:
    return f"g!{req}"


@dataclass
class StepEffect:
    updates: dict = field(default_factory=dict)  # location -> value
    consumes: list = field(default_factory=list)  # Message
    sends: list = field(default_factory=list)  # Message
    events: list = field(default_factory=list)  # (kind, agent, req, payload)
    checks: list = field(default_factory=list)  # post-apply assertions

    def update(self, loc: tuple, value) -> None:
        self.updates[loc] = value
