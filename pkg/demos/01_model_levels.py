"""Walk one scenario through the three model levels.

The client-facing trace format is identical everywhere; what changes is how
the memory subsystem produces it.  Under the atomic models the write is
indivisible, under the message-passing model its propagation is a sequence
of internal messages whose delivery order the schedule controls.
"""

from replisim import SeededSchedule, load_scenario, run

scenario = load_scenario("counterexample")
print(f"scenario: {scenario.name}  read={scenario.read_policy}  write={scenario.write_policy}")
for agent, program in sorted(scenario.programs.items()):
    print(f"  {agent} (home d{scenario.homes[agent]}):", "; ".join(s.kind + " " + s.rid for s in program))
print()

for model in ("cm0", "cm1", "cm2"):
    result = run(scenario, model, SeededSchedule(7))
    print(f"--- {model}: completed={result.completed}, {len(result.trace.events)} events ---")
    for event in result.trace.events:
        print("   ", event.render())
    print()

print("Same seed, same model, same trace bytes:")
a = run(scenario, "cm2", SeededSchedule(7)).trace.to_text()
b = run(scenario, "cm2", SeededSchedule(7)).trace.to_text()
print("   identical:", a == b)
