"""Constructive refinement completeness.

Any run of the atomic single-store model lifts move-for-move to the
per-data-centre model (ALL/ALL policies, full replica selections), and any
such run lifts again to the message-passing model by expanding each atomic
memory step into a contiguous block that delivers and processes all of the
request's internal traffic first.  All three traces are view equivalent:
same requests, same answers, same per-agent order.
"""

from replisim import ALL, SeededSchedule, load_scenario, run, view_equivalent
from replisim.refinement import lift_cm0_to_cm1, lift_cm1_to_cm2

scenario = load_scenario("intro").with_policies(ALL, ALL)

r0 = run(scenario, "cm0", SeededSchedule(3))
print(f"cm0 run: {len(r0.trace.events)} events in {r0.sim.round} rounds")

schedule1 = lift_cm0_to_cm1(scenario, r0.schedule_steps)
r1 = run(scenario, "cm1", schedule1)
print(f"cm1 lifted run: {len(r1.trace.events)} events in {r1.sim.round} rounds")
print("view equivalent to cm0:", view_equivalent(r0.trace, r1.trace))

schedule2 = lift_cm1_to_cm2(scenario, r1.schedule_steps)
r2 = run(scenario, "cm2", schedule2)
print(f"cm2 lifted run: {len(r2.trace.events)} events in {r2.sim.round} rounds")
print("view equivalent to cm1:", view_equivalent(r1.trace, r2.trace))
print()

print("per-agent projections coincide; global indices differ (the cm2 run")
print("interposes forwards, local answers and delegate collection steps):")
for agent in sorted(scenario.programs):
    line0 = [f"{e.kind}@{e.idx}" for e in r0.trace.per_agent(agent)]
    line2 = [f"{e.kind}@{e.idx}" for e in r2.trace.per_agent(agent)]
    print(f"   {agent}: cm0 {line0}")
    print(f"       cm2 {line2}")
