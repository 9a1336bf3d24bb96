"""Reproduce the stale-read anomaly and refute its single-copy explanations.

Two replicas of one cell, write policy ALL, read policy ONE.  Writer a1 sets
the cell to 1; reader a2 reads twice.  The message-passing model admits a
schedule where the first read is answered from the already-updated replica
and the second from the not-yet-updated one: the reader observes 1, then 0.

No single-store execution explains that history: the checkers return
INCOMPATIBLE and NOT_SERIALISABLE, both exhaustively.  The same search over
the atomic models finds nothing.
"""

from replisim import (
    SeededSchedule,
    check_view_compatible,
    check_view_serialisable,
    load_scenario,
    run,
    search_schedules,
)
from replisim.predicates import anomaly_read_stale

scenario = load_scenario("counterexample")

found = search_schedules(scenario, "cm2", anomaly_read_stale)
print(f"cm2 search: witness found after exploring {found.explored} states")
for event in found.trace.events:
    print("   ", event.render())
print()

print("witness schedule (replayable):")
print("   ", found.witness.describe()[:120], "...")
replayed = run(scenario, "cm2", found.witness)
print("    replay reproduces the trace:", replayed.trace.events == found.trace.events)
print()

print("checker verdicts on the witness trace:")
print("   ", check_view_compatible(found.trace, scenario).render())
print("   ", check_view_serialisable(found.trace, scenario).render())
print()

for model in ("cm1", "cm0"):
    res = search_schedules(scenario, model, anomaly_read_stale)
    print(f"{model} search: witness={res.witness is not None} exhausted={res.exhausted} "
          f"({res.explored} states)")
