import pytest

from replisim import ScenarioError, load_scenario, parse_scenario
from replisim.policies import ALL, ONE
from replisim.scenario import bundled_scenarios


def test_bundled_names():
    names = bundled_scenarios()
    assert {"intro", "counterexample", "anomaly_one_one"} <= set(names)


def test_intro_layout():
    s = load_scenario("intro")
    assert sorted(s.programs) == ["a1", "a2", "a3", "a4"]
    assert sorted(s.cfg.relations) == ["x", "y"]
    for rid in ("x", "y"):
        assert len(s.cfg.candidates(rid, 1)) == 2  # two copies of each cell
    assert [len(p) for _, p in sorted(s.programs.items())] == [1, 1, 2, 2]


def test_counterexample_policies_and_init():
    s = load_scenario("counterexample")
    assert s.read_policy == ONE and s.write_policy == ALL
    assert s.initial.get("x", (0,)) == (0,)
    assert len(s.cfg.candidates("x", 1)) == 2


def test_empty_agents_section_is_valid():
    s = parse_scenario(
        """
cluster.datacentres = 1
cluster.relation.x.arity = 1
cluster.relation.x.coarity = 1
policy.read = ONE
policy.write = ONE
""",
        name="noagents",
    )
    assert s.programs == {}


def test_diagnostics_carry_line_numbers():
    text = """cluster.datacentres = 2
cluster.relation.x.arity = 1
nonsense line
policy.read = ONE
"""
    with pytest.raises(ScenarioError) as err:
        parse_scenario(text)
    assert any(ln == 3 for ln, _ in err.value.diagnostics)


def test_duplicate_key_rejected():
    text = """cluster.datacentres = 2
cluster.datacentres = 3
"""
    with pytest.raises(ScenarioError) as err:
        parse_scenario(text)
    assert any("duplicate" in msg for _, msg in err.value.diagnostics)


def test_duplicate_agent_program_rejected():
    text = """cluster.datacentres = 1
cluster.relation.x.arity = 1
cluster.relation.x.coarity = 1
policy.read = ONE
policy.write = ONE
agent.a1.home = 1
agent.a1.program = read x true
agent.a1.program = read x true
"""
    with pytest.raises(ScenarioError):
        parse_scenario(text)


def test_bad_agent_id_rejected():
    text = """cluster.datacentres = 1
cluster.relation.x.arity = 1
cluster.relation.x.coarity = 1
policy.read = ONE
policy.write = ONE
agent.A-1.home = 1
agent.A-1.program = read x true
"""
    with pytest.raises(ScenarioError) as err:
        parse_scenario(text)
    assert any("agent id" in msg for _, msg in err.value.diagnostics)


def test_unknown_relation_in_program_rejected():
    text = """cluster.datacentres = 1
cluster.relation.x.arity = 1
cluster.relation.x.coarity = 1
policy.read = ONE
policy.write = ONE
agent.a1.home = 1
agent.a1.program = read z true
"""
    with pytest.raises(ScenarioError):
        parse_scenario(text)


def test_overlapping_ranges_rejected():
    text = """cluster.datacentres = 1
cluster.relation.x.arity = 1
cluster.relation.x.coarity = 1
cluster.relation.x.hash = 0 255
cluster.relation.x.ranges = 0:200 100:255
policy.read = ONE
policy.write = ONE
"""
    with pytest.raises(ScenarioError):
        parse_scenario(text)


def test_arity_mismatch_in_init_rejected():
    text = """cluster.datacentres = 1
cluster.relation.x.arity = 2
cluster.relation.x.coarity = 1
policy.read = ONE
policy.write = ONE
init.x = (0) -> (1)
"""
    with pytest.raises(ScenarioError):
        parse_scenario(text)


def test_unsatisfiable_policy_surfaces_before_the_run():
    text = """cluster.datacentres = 2
cluster.relation.x.arity = 1
cluster.relation.x.coarity = 1
cluster.relation.x.nodes = 1
cluster.relation.x.replication = 1
policy.read = THREE
policy.write = ONE
"""
    s = parse_scenario(text)
    with pytest.raises(ScenarioError) as err:
        s.validate_for_model("cm1")
    assert any("unsatisfiable" in msg for _, msg in err.value.diagnostics)
    with pytest.raises(ScenarioError):
        s.validate_for_model("cm2")
    s.validate_for_model("cm0")  # the flat model ignores policies


def test_all_policy_with_down_node_never_sufficient():
    text = """cluster.datacentres = 2
cluster.relation.x.arity = 1
cluster.relation.x.coarity = 1
cluster.down = 2:1
policy.read = ONE
policy.write = ALL
"""
    s = parse_scenario(text)
    with pytest.raises(ScenarioError):
        s.validate_for_model("cm2")


def test_text_atoms_round_trip():
    text = """cluster.datacentres = 1
cluster.relation.x.arity = 1
cluster.relation.x.coarity = 1
policy.read = ONE
policy.write = ONE
agent.a1.home = 1
agent.a1.program = write x {("k") -> ("v")}; read x key=("k")
init.x = ("k") -> ("w")
"""
    s = parse_scenario(text)
    assert s.initial.get("x", ("k",)) == ("w",)
    step = s.programs["a1"][0]
    assert step.pairs == ((("k",), ("v",)),)


def test_undef_in_init_rejected():
    text = """cluster.datacentres = 1
cluster.relation.x.arity = 1
cluster.relation.x.coarity = 1
policy.read = ONE
policy.write = ONE
init.x = (0) -> undef
"""
    with pytest.raises(ScenarioError):
        parse_scenario(text)


def test_missing_scenario_file():
    with pytest.raises(ScenarioError):
        load_scenario("does-not-exist")
