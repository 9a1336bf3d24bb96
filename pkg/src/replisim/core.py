"""Value types for a replicated key-value memory: atoms, logical timestamps,
cluster layout, hash fragmentation, replica stores and flat stores.

Everything here is either an immutable value or a small mutable container
owned by exactly one simulation instance.  Nothing does I/O.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Optional, Union

Atom = Union[int, str]
KeyTuple = tuple  # tuple of atoms, length = relation arity


class _Undef:
    """Marker for an undefined value tuple (missing record / tombstone)."""

    _instance: Optional["_Undef"] = None

    def __new__(cls) -> "_Undef":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "UNDEF"

    def __reduce__(self):
        return (_Undef, ())


UNDEF = _Undef()

# A value tuple is either a tuple of atoms (length = co-arity) or UNDEF.
ValueTuple = Union[tuple, _Undef]


class ConfigError(Exception):
    """Invalid cluster configuration or an operation outside its preconditions."""


def atom_sort_key(a: Atom) -> tuple:
    """Total order on atoms: integers first (numerically), then texts."""
    if isinstance(a, bool) or not isinstance(a, (int, str)):
        raise ConfigError(f"not an atom: {a!r}")
    if isinstance(a, int):
        return (0, a, "")
    return (1, 0, a)


def tuple_sort_key(t: tuple) -> tuple:
    return tuple(atom_sort_key(a) for a in t)


# ---------------------------------------------------------------------------
# Timestamps
# ---------------------------------------------------------------------------

LT, EQ, GT = -1, 0, 1


@dataclass(frozen=True, order=False)
class Timestamp:
    """Logical time ``tick`` plus the issuing data centre's offset rank.

    The pair (tick, rank) is compared lexicographically; ranks are injective
    per data centre, so timestamps issued by distinct data centres are never
    equal.  ``NEG_INF`` (tick 0) sits below every issued timestamp.
    """

    tick: int
    dc: int
    rank: int

    def key(self) -> tuple:
        return (self.tick, self.rank)

    def __lt__(self, other: "Timestamp") -> bool:
        return self.key() < other.key()

    def __le__(self, other: "Timestamp") -> bool:
        return self.key() <= other.key()

    def __gt__(self, other: "Timestamp") -> bool:
        return self.key() > other.key()

    def __ge__(self, other: "Timestamp") -> bool:
        return self.key() >= other.key()

    def is_neg_inf(self) -> bool:
        return self.tick == 0

    def __repr__(self) -> str:
        if self.is_neg_inf():
            return "-inf"
        return f"t({self.tick},d{self.dc})"


NEG_INF = Timestamp(0, -1, -1)


def compare_ts(t1: Timestamp, t2: Timestamp) -> int:
    """Three-way comparison, one of LT, EQ, GT."""
    k1, k2 = t1.key(), t2.key()
    if k1 < k2:
        return LT
    if k1 > k2:
        return GT
    return EQ


class ClockBank:
    """Per-data-centre logical clocks.

    A clock advances by one exactly when it issues a timestamp, and jumps
    forward when adjusted to a received future timestamp.  Ticks never
    decrease.
    """

    def __init__(self, ranks: Mapping[int, int], start_tick: int = 2):
        self.ranks = dict(ranks)
        self.ticks = {d: start_tick for d in ranks}

    def clone(self) -> "ClockBank":
        c = ClockBank.__new__(ClockBank)
        c.ranks = self.ranks  # static, shared
        c.ticks = dict(self.ticks)
        return c

    def now(self, d: int) -> Timestamp:
        if d not in self.ticks:
            raise ConfigError(f"unknown data centre {d}")
        return Timestamp(self.ticks[d], d, self.ranks[d])

    def fresh_timestamp(self, d: int) -> Timestamp:
        """Issue the current time at ``d`` and advance the clock by one."""
        t = self.now(d)
        self.ticks[d] = t.tick + 1
        return t

    def adjust_clock(self, d: int, t: Timestamp) -> None:
        """Jump ``d``'s clock to the smallest local time that is >= ``t``.

        No change when the clock is already at or past ``t``.
        """
        if t.is_neg_inf():
            raise ConfigError("cannot adjust to -inf")
        if self.now(d) >= t:
            return
        self.ticks[d] = smallest_tick_at_least(d, self.ranks[d], t)

    def state_key(self) -> tuple:
        return tuple(sorted(self.ticks.items()))


def smallest_tick_at_least(d: int, rank: int, t: Timestamp) -> int:
    """Least tick n such that the timestamp (n, d) is >= ``t``."""
    if Timestamp(t.tick, d, rank) >= t:
        return t.tick
    return t.tick + 1


# ---------------------------------------------------------------------------
# Cluster configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RelationConfig:
    """Static layout of one replicated relation."""

    rid: str
    arity: int
    co_arity: int
    hash_min: int
    hash_max: int
    ranges: tuple  # ((lo, hi), ...) ascending, partitioning [hash_min, hash_max]
    data_centres: tuple  # sorted dc ids
    nodes: int  # nodes per data centre
    replication: int  # replicas of each fragment per data centre

    @property
    def fragments(self) -> int:
        return len(self.ranges)


class ClusterConfig:
    """Relations plus the copy placement, offsets and liveness tables.

    ``copies[(rid, j)]`` lists the (dc, node) pairs holding fragment ``j`` of
    relation ``rid``.  Placement is a deterministic ring assignment: fragment
    j occupies ``replication`` consecutive node slots starting at node
    ``1 + (j-1) mod nodes`` in every data centre of the relation.
    """

    def __init__(
        self,
        relations: Mapping[str, RelationConfig],
        offset_ranks: Mapping[int, int],
        down_nodes: Iterable[tuple] = (),
    ):
        self.relations = dict(relations)
        self.offset_ranks = dict(offset_ranks)
        self.down_nodes = frozenset(down_nodes)  # (dc, node) pairs
        self.copies: dict = {}
        for rid, rel in self.relations.items():
            for j in range(1, rel.fragments + 1):
                placed = []
                for d in rel.data_centres:
                    start = (j - 1) % rel.nodes
                    for s in range(rel.replication):
                        placed.append((d, 1 + (start + s) % rel.nodes))
                self.copies[(rid, j)] = tuple(sorted(placed))
        self._validate()

    def _validate(self) -> None:
        ranks = list(self.offset_ranks.values())
        if len(set(ranks)) != len(ranks):
            raise ConfigError("offset ranks must be pairwise distinct")
        for rid, rel in self.relations.items():
            if rel.arity < 1 or rel.co_arity < 1:
                raise ConfigError(f"{rid}: arity and co-arity must be >= 1")
            if rel.replication < 1 or rel.replication > rel.nodes:
                raise ConfigError(f"{rid}: replication must be within 1..nodes")
            for d in rel.data_centres:
                if d not in self.offset_ranks:
                    raise ConfigError(f"{rid}: data centre {d} has no offset rank")
            lo_expected = rel.hash_min
            for idx, (lo, hi) in enumerate(rel.ranges):
                if lo != lo_expected or hi < lo:
                    raise ConfigError(
                        f"{rid}: ranges must partition "
                        f"[{rel.hash_min},{rel.hash_max}] in ascending order"
                    )
                lo_expected = hi + 1
            if lo_expected != rel.hash_max + 1:
                raise ConfigError(f"{rid}: ranges do not cover the hash interval")
            for j in range(1, rel.fragments + 1):
                for d in rel.data_centres:
                    n = sum(1 for (d2, _) in self.copies[(rid, j)] if d2 == d)
                    if n != rel.replication:
                        raise ConfigError(f"{rid}: fragment {j} misplaced at dc {d}")

    def relation(self, rid: str) -> RelationConfig:
        try:
            return self.relations[rid]
        except KeyError:
            raise ConfigError(f"unknown relation {rid!r}") from None

    def is_copy(self, rid: str, j: int, d: int, node: int) -> bool:
        return (d, node) in self.copies.get((rid, j), ())

    def candidates(self, rid: str, j: int) -> tuple:
        """All (dc, node) pairs holding a replica of fragment ``j``."""
        return self.copies[(rid, j)]

    def alive(self, d: int, node: int) -> bool:
        return (d, node) not in self.down_nodes

    def alive_local_copies(self, rid: str, j: int, d: int) -> tuple:
        return tuple(
            node for (d2, node) in self.copies[(rid, j)] if d2 == d and self.alive(d2, node)
        )

    def lowest_offset_dc(self) -> int:
        return min(self.offset_ranks, key=lambda d: self.offset_ranks[d])

    def all_dcs(self) -> tuple:
        return tuple(sorted(self.offset_ranks))

    def make_clock_bank(self) -> ClockBank:
        return ClockBank(self.offset_ranks)


# ---------------------------------------------------------------------------
# Hash fragmentation
# ---------------------------------------------------------------------------

_FNV_OFFSET = 14695981039346656037
_FNV_PRIME = 1099511628211
_MASK64 = (1 << 64) - 1


def _atom_bytes(a: Atom) -> bytes:
    # Tag byte plus big-endian payload; fixed so fragment assignment is
    # reproducible across implementations.
    if isinstance(a, bool) or not isinstance(a, (int, str)):
        raise ConfigError(f"not an atom: {a!r}")
    if isinstance(a, int):
        return b"\x01" + (a & _MASK64).to_bytes(8, "big")
    return b"\x02" + a.encode("utf-8")


def hash_key(k: tuple, lo: int, hi: int) -> int:
    """64-bit FNV-1a fold of the key's atoms, reduced into [lo, hi]."""
    h = _FNV_OFFSET
    for a in k:
        for b in _atom_bytes(a):
            h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return lo + h % (hi - lo + 1)


def hash_fragment(cfg: ClusterConfig, rid: str, k: tuple) -> int:
    """Fragment index (1-based) whose range contains the key's hash."""
    rel = cfg.relation(rid)
    if len(k) != rel.arity:
        raise ConfigError(f"key {k!r} does not match arity {rel.arity} of {rid}")
    v = hash_key(k, rel.hash_min, rel.hash_max)
    for j, (lo, hi) in enumerate(rel.ranges, start=1):
        if lo <= v <= hi:
            return j
    raise ConfigError(f"hash value {v} outside ranges of {rid}")  # pragma: no cover


# ---------------------------------------------------------------------------
# Stores
# ---------------------------------------------------------------------------


class ReplicaStore:
    """Family of replica maps: (rid, j, dc, node) -> {key: (value, timestamp)}.

    Absent keys read as (UNDEF, NEG_INF).  Stored timestamps never decrease;
    callers update through :meth:`store`, which enforces that.
    """

    def __init__(self, cfg: ClusterConfig):
        self.cfg = cfg
        self.data: dict = {}  # (rid, j, d, node) -> {k: (v, t)}

    def clone(self) -> "ReplicaStore":
        s = ReplicaStore.__new__(ReplicaStore)
        s.cfg = self.cfg
        s.data = {loc: dict(m) for loc, m in self.data.items()}
        return s

    def _check_loc(self, rid: str, j: int, d: int, node: int) -> None:
        if not self.cfg.is_copy(rid, j, d, node):
            raise ConfigError(f"({d},{node}) holds no replica of {rid}/{j}")

    def lookup(self, rid: str, j: int, d: int, node: int, k: tuple):
        self._check_loc(rid, j, d, node)
        if hash_fragment(self.cfg, rid, k) != j:
            raise ConfigError(f"key {k!r} does not hash into fragment {j} of {rid}")
        return self.data.get((rid, j, d, node), {}).get(k, (UNDEF, NEG_INF))

    def peek(self, rid: str, j: int, d: int, node: int, k: tuple):
        """Like lookup but without precondition checks (engine internal)."""
        return self.data.get((rid, j, d, node), {}).get(k, (UNDEF, NEG_INF))

    def store(self, rid: str, j: int, d: int, node: int, k: tuple, v, t: Timestamp) -> None:
        self._check_loc(rid, j, d, node)
        if hash_fragment(self.cfg, rid, k) != j:
            raise ConfigError(f"key {k!r} does not hash into fragment {j} of {rid}")
        old_v, old_t = self.peek(rid, j, d, node, k)
        if t < old_t:
            raise ConfigError(f"timestamp regression at {(rid, j, d, node, k)}")
        self.data.setdefault((rid, j, d, node), {})[k] = (v, t)

    def stored_keys(self, rid: str, j: int, d: int, node: int) -> tuple:
        m = self.data.get((rid, j, d, node), {})
        return tuple(sorted(m, key=tuple_sort_key))

    def items(self) -> Iterator[tuple]:
        for loc in sorted(self.data):
            for k in sorted(self.data[loc], key=tuple_sort_key):
                v, t = self.data[loc][k]
                yield loc, k, v, t

    def state_key(self) -> tuple:
        return tuple(
            (loc, k, v if v is UNDEF else tuple(v), t.key())
            for loc, k, v, t in self.items()
        )


class FlatStore:
    """Single-copy store: (rid, key) -> value tuple; UNDEF entries are absent."""

    def __init__(self):
        self.data: dict = {}

    def clone(self) -> "FlatStore":
        s = FlatStore.__new__(FlatStore)
        s.data = dict(self.data)
        return s

    def get(self, rid: str, k: tuple):
        return self.data.get((rid, k), UNDEF)

    def set(self, rid: str, k: tuple, v) -> None:
        if v is UNDEF:
            self.data.pop((rid, k), None)
        else:
            self.data[(rid, k)] = v

    def records(self, rid: str) -> Iterator[tuple]:
        for (r, k), v in sorted(self.data.items(), key=lambda kv: (kv[0][0], tuple_sort_key(kv[0][1]))):
            if r == rid:
                yield k, v

    def state_key(self) -> tuple:
        return tuple(sorted(self.data.items(), key=lambda kv: (kv[0][0], tuple_sort_key(kv[0][1]))))


def seed_replicas(cfg: ClusterConfig, flat: FlatStore) -> ReplicaStore:
    """Copy initial flat records onto every replica with one shared timestamp.

    The seeding timestamp is tick 1 at the lowest-offset data centre, below
    any timestamp a clock bank will ever issue, so all replicas agree on the
    initial state.
    """
    store = ReplicaStore(cfg)
    d0 = cfg.lowest_offset_dc()
    t0 = Timestamp(1, d0, cfg.offset_ranks[d0])
    for (rid, k), v in flat.data.items():
        j = hash_fragment(cfg, rid, k)
        for (d, node) in cfg.candidates(rid, j):
            store.store(rid, j, d, node, k, v, t0)
    return store
