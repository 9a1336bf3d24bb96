from replisim.cm0 import Condition
from replisim.cm1 import answer_read_req, perform_write_req, read_answer_rows
from replisim.core import UNDEF, ReplicaStore, Timestamp
from replisim.messages import ANSWER, REQ_READ, REQ_WRITE, Message
from test_core import make_cfg


def setup_store(cfg):
    return ReplicaStore(cfg)


def full_selection(cfg, rid="x"):
    rel = cfg.relation(rid)
    return {j: frozenset(cfg.candidates(rid, j)) for j in range(1, rel.fragments + 1)}


def read_msg(cond=None):
    return Message(REQ_READ, "a1#0", "a1", "d1", payload=("x", cond or Condition.true()))


def write_msg(pairs):
    return Message(REQ_WRITE, "a1#0", "a1", "d1", payload=("x", tuple(sorted(pairs))))


def test_unanimous_replicas_answer(capfd=None):
    cfg = make_cfg()
    store = setup_store(cfg)
    t = Timestamp(2, 1, 1)
    for (d, n) in cfg.candidates("x", 1):
        store.store("x", 1, d, n, (0,), (5,), t)
    eff = answer_read_req(store, cfg, 1, read_msg(), full_selection(cfg))
    answer = eff.sends[0]
    assert answer.kind == ANSWER
    assert answer.payload[1] == frozenset({((0,), (5,))})


def test_latest_timestamp_wins():
    cfg = make_cfg()
    store = setup_store(cfg)
    store.store("x", 1, 1, 1, (0,), (1,), Timestamp(2, 1, 1))
    store.store("x", 1, 2, 1, (0,), (2,), Timestamp(3, 2, 2))
    eff = answer_read_req(store, cfg, 1, read_msg(), full_selection(cfg))
    assert eff.sends[0].payload[1] == frozenset({((0,), (2,))})


def test_fresh_tombstone_hides_key():
    cfg = make_cfg()
    store = setup_store(cfg)
    store.store("x", 1, 1, 1, (0,), (1,), Timestamp(2, 1, 1))
    store.store("x", 1, 2, 1, (0,), UNDEF, Timestamp(3, 2, 2))
    eff = answer_read_req(store, cfg, 1, read_msg(), full_selection(cfg))
    assert eff.sends[0].payload[1] == frozenset()


def test_selection_restricts_view():
    cfg = make_cfg()
    store = setup_store(cfg)
    store.store("x", 1, 1, 1, (0,), (1,), Timestamp(2, 1, 1))
    store.store("x", 1, 2, 1, (0,), (9,), Timestamp(3, 2, 2))
    rows = read_answer_rows(store, cfg, "x", Condition.true(), {1: frozenset({(1, 1)})})
    assert rows == frozenset({((0,), (1,))})


def make_clockbank(cfg, start=2):
    from replisim.core import ClockBank

    return ClockBank(cfg.offset_ranks, start_tick=start)


def apply_updates(store, clocks, eff):
    for loc, value in eff.updates.items():
        if loc[0] == "rep":
            _, rid, j, d, n, k = loc
            store.store(rid, j, d, n, k, value[0], value[1])
        elif loc[0] == "clock":
            clocks.ticks[loc[1]] = value


def test_write_updates_older_replicas():
    cfg = make_cfg()
    store, clocks = setup_store(cfg), make_clockbank(cfg, start=5)
    store.store("x", 1, 1, 1, (0,), (0,), Timestamp(1, 1, 1))
    eff = perform_write_req(store, clocks, cfg, 1, write_msg([((0,), (1,))]), full_selection(cfg))
    apply_updates(store, clocks, eff)
    v, t = store.lookup("x", 1, 1, 1, (0,))
    assert v == (1,) and (t.tick, t.dc) == (5, 1)
    assert eff.events[0][3] == ("ack", "x")


def test_newer_timestamp_rejects_the_write():
    cfg = make_cfg()
    store, clocks = setup_store(cfg), make_clockbank(cfg, start=2)
    ahead = Timestamp(9, 2, 2)
    store.store("x", 1, 2, 1, (0,), (9,), ahead)
    eff = perform_write_req(store, clocks, cfg, 1, write_msg([((0,), (1,))]), full_selection(cfg))
    apply_updates(store, clocks, eff)
    assert store.lookup("x", 1, 2, 1, (0,)) == ((9,), ahead)  # lost update
    # the losing write still updated the replica it could reach
    assert store.lookup("x", 1, 1, 1, (0,))[0] == (1,)


def test_write_all_reaches_every_replica():
    cfg = make_cfg(nodes=2, replication=2)
    store, clocks = setup_store(cfg), make_clockbank(cfg)
    eff = perform_write_req(store, clocks, cfg, 1, write_msg([((0,), (4,))]), full_selection(cfg))
    apply_updates(store, clocks, eff)
    stamps = set()
    for (d, n) in cfg.candidates("x", 1):
        v, t = store.lookup("x", 1, d, n, (0,))
        assert v == (4,)
        stamps.add(t)
    assert len(stamps) == 1  # one fresh timestamp per request


def test_write_adjusts_lagging_clocks():
    cfg = make_cfg()
    store = setup_store(cfg)
    clocks = make_clockbank(cfg)
    clocks.ticks[1] = 10  # writer ahead
    clocks.ticks[2] = 2
    eff = perform_write_req(store, clocks, cfg, 1, write_msg([((0,), (1,))]), full_selection(cfg))
    apply_updates(store, clocks, eff)
    # the write carried (10, d1); dc2's clock must now be at least that
    assert clocks.now(2) >= Timestamp(10, 1, 1)
    assert clocks.ticks[1] == 11


def test_tombstone_write_propagates():
    cfg = make_cfg()
    store, clocks = setup_store(cfg), make_clockbank(cfg)
    store.store("x", 1, 1, 1, (0,), (3,), Timestamp(1, 1, 1))
    eff = perform_write_req(store, clocks, cfg, 1, write_msg([((0,), UNDEF)]), full_selection(cfg))
    apply_updates(store, clocks, eff)
    v, t = store.lookup("x", 1, 1, 1, (0,))
    assert v is UNDEF and t.tick == 2
