"""Deterministic village simulator and the twin-EventLog benchmark.

World state lives entirely in substrate triples: agent locations, knowledge,
adjacency and invitation metadata.  Each tick every agent takes one
shortest-path step toward its target, co-located agents meet, and facts are
shared within each meeting group.  Knowing an active invitation sends the
agent to the invitation's venue instead of its schedule target.
"""

from __future__ import annotations

import hashlib
import json
import random
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, lru_cache
from typing import Iterable, Iterator, Mapping, Sequence

from eventgraph.substrate import (
    KNOWS,
    LOCATED_AT,
    Delta,
    EventLog,
    Intervention,
    Literal,
    Op,
    Snapshot,
    TBox,
    Term,
    term_key,
    Triple,
    Verb,
    dumps_log,
    fork,
    replay,
    snapshots,
)

ADJACENT = "ex:adjacent"
TOGETHER = "ex:with"
HELD_AT = "ex:heldAt"
ACTIVE_FROM = "ex:activeFrom"
ACTIVE_UNTIL = "ex:activeUntil"
RDF_TYPE = "rdf:type"

VILLAGE_TBOX_TEXT = """\
class ex:Agent
class ex:Location
class ex:Fact
class ex:Invitation
pred rdf:type ex:Thing ex:Class
pred ex:locatedAt ex:Agent ex:Location
pred ex:knows ex:Agent ex:Fact
pred ex:with ex:Agent ex:Agent
pred ex:adjacent ex:Location ex:Location
pred ex:heldAt ex:Fact ex:Location
pred ex:activeFrom ex:Fact int
pred ex:activeUntil ex:Fact int
"""


class WorldError(ValueError):
    pass


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class Invitation:
    fact: str
    location: str
    active_from: int
    active_until: int


@dataclass(frozen=True)
class VillageWorld:
    locations: tuple[str, ...]
    edges: frozenset[tuple[str, str]]
    agents: tuple[str, ...]
    start: Mapping[str, str]
    schedules: Mapping[str, tuple[tuple[int, str], ...]]
    facts: tuple[str, ...]
    holders: Mapping[str, tuple[str, ...]]
    invitations: tuple[Invitation, ...] = ()
    horizon: int = 40

    def __post_init__(self):
        locs = set(self.locations)
        for a, b in self.edges:
            if a not in locs or b not in locs or a >= b:
                raise WorldError(f"bad edge {a} {b}")
        for ag in self.agents:
            if self.start.get(ag) not in locs:
                raise WorldError(f"agent {ag} has no valid start location")
            sched = self.schedules.get(ag, ())
            if not sched or sched[0][0] != 0:
                raise WorldError(f"schedule of {ag} must start at tick 0")
            if any(t2 <= t1 for (t1, _), (t2, _) in zip(sched, sched[1:])):
                raise WorldError(f"schedule of {ag} is not increasing")
            if any(loc not in locs for _, loc in sched):
                raise WorldError(f"schedule of {ag} names an unknown location")
        for f, hs in self.holders.items():
            if f not in self.facts or any(h not in self.agents for h in hs):
                raise WorldError(f"bad holders for {f}")
        for inv in self.invitations:
            if inv.fact not in self.facts or inv.location not in locs:
                raise WorldError(f"bad invitation {inv.fact}")

    def target(self, agent: str, tick: int) -> str:
        loc = self.schedules[agent][0][1]
        for t, l in self.schedules[agent]:
            if t > tick:
                break
            loc = l
        return loc

    def initial_triples(self) -> list[Triple]:
        out = [Triple(l, RDF_TYPE, "ex:Location") for l in self.locations]
        for a, b in sorted(self.edges):
            out += [Triple(a, ADJACENT, b), Triple(b, ADJACENT, a)]
        for ag in self.agents:
            out += [Triple(ag, RDF_TYPE, "ex:Agent"), Triple(ag, LOCATED_AT, self.start[ag])]
        for f in self.facts:
            out.append(Triple(f, RDF_TYPE, "ex:Fact"))
            out += [Triple(h, KNOWS, f) for h in self.holders.get(f, ())]
        for inv in self.invitations:
            out += [
                Triple(inv.fact, RDF_TYPE, "ex:Invitation"),
                Triple(inv.fact, HELD_AT, inv.location),
                Triple(inv.fact, ACTIVE_FROM, Literal.of(inv.active_from)),
                Triple(inv.fact, ACTIVE_UNTIL, Literal.of(inv.active_until)),
            ]
        return out

    # -- world file -----------------------------------------------------------

    def dumps(self) -> str:
        lines = [VILLAGE_TBOX_TEXT.rstrip("\n"), f"horizon {self.horizon}"]
        lines += [f"location {l}" for l in self.locations]
        lines += [f"edge {a} {b}" for a, b in sorted(self.edges)]
        for ag in self.agents:
            lines.append(f"agent {ag} {self.start[ag]}")
            lines += [f"schedule {ag} {t} {loc}" for t, loc in self.schedules[ag]]
        for f in self.facts:
            lines.append(" ".join(["fact", f, *self.holders.get(f, ())]))
        lines += [f"invite {i.fact} {i.location} {i.active_from} {i.active_until}" for i in self.invitations]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> VillageWorld:
        tbox_lines, locations, edges, agents, start = [], [], set(), [], {}
        schedules: dict[str, list[tuple[int, str]]] = {}
        facts, holders, invites, horizon = [], {}, [], 40
        for no, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            head, *rest = line.split()
            try:
                if head in ("class", "pred"):
                    tbox_lines.append(line)
                elif head == "horizon":
                    (h,) = rest
                    horizon = int(h)
                elif head == "location":
                    (l,) = rest
                    locations.append(l)
                elif head == "edge":
                    a, b = sorted(rest)
                    edges.add((a, b))
                elif head == "agent":
                    ag, loc = rest
                    agents.append(ag)
                    start[ag] = loc
                elif head == "schedule":
                    ag, t, loc = rest
                    schedules.setdefault(ag, []).append((int(t), loc))
                elif head == "fact":
                    f, *hs = rest
                    facts.append(f)
                    holders[f] = tuple(hs)
                elif head == "invite":
                    f, loc, lo, hi = rest
                    invites.append(Invitation(f, loc, int(lo), int(hi)))
                else:
                    raise WorldError(f"unknown directive {head!r}")
            except ValueError as exc:
                raise WorldError(f"line {no}: {exc}") from None
        TBox.parse("\n".join(tbox_lines))
        return cls(
            tuple(locations), frozenset(edges), tuple(agents), start,
            {a: tuple(s) for a, s in schedules.items()}, tuple(facts), holders, tuple(invites), horizon,
        )


def village_tbox() -> TBox:
    return TBox.parse(VILLAGE_TBOX_TEXT)


def generate_world(
    seed: int = 0,
    n_locations: int = 10,
    n_agents: int = 8,
    n_facts: int = 12,
    n_invitations: int = 4,
    horizon: int = 40,
    stay: tuple[int, int] = (4, 9),
    trip: tuple[int, int] = (3, 6),
) -> VillageWorld:
    """Two connected hubs with homes hanging off them and a few home-to-home lanes.

    Agents start at distinct homes (wrapping if there are more agents than
    homes) and alternate stays at home with short trips, so meetings are
    sparse enough for an intervention's influence to stay local.
    """
    if n_locations < 3:
        raise WorldError("need at least two hubs and one home")
    rng = random.Random(seed)
    locs = tuple(f"ex:loc{i}" for i in range(n_locations))
    hubs, homes = locs[:2], locs[2:]
    edges = {(hubs[0], hubs[1])}
    edges |= {tuple(sorted((h, hubs[i % 2]))) for i, h in enumerate(homes)}
    for _ in range(n_locations // 5):
        a, b = rng.sample(homes, 2) if len(homes) > 1 else (homes[0], hubs[0])
        edges.add(tuple(sorted((a, b))))
    agents = tuple(f"ex:agent{i}" for i in range(n_agents))
    start, schedules = {}, {}
    for i, ag in enumerate(agents):
        home = homes[i % len(homes)]
        start[ag] = home
        t, sched = 0, []
        while t < horizon:
            sched.append((t, home))
            t += rng.randint(*stay)
            if t < horizon:
                sched.append((t, rng.choice([l for l in locs if l != home])))
                t += rng.randint(*trip)
        schedules[ag] = tuple(sched)
    facts = tuple(f"ex:fact{i}" for i in range(n_facts))
    holders = {f: (rng.choice(agents),) for f in facts}
    invites = []
    for f in facts[:n_invitations]:
        lo = rng.randint(2, horizon // 2)
        invites.append(Invitation(f, rng.choice(locs), lo, lo + rng.randint(4, 10)))
    return VillageWorld(locs, frozenset(edges), agents, start, schedules, facts, holders, tuple(invites), horizon)


# -- dynamics -------------------------------------------------------------------


@lru_cache(maxsize=256)
def _routes(edges: frozenset[tuple[str, str]]) -> dict[tuple[str, str], str]:
    """Next hop for every (here, goal): lexicographically smallest neighbour on a shortest path."""
    adj: dict[str, list[str]] = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
    table = {}
    for goal in adj:
        dist = {goal: 0}
        queue = deque([goal])
        while queue:
            u = queue.popleft()
            for v in adj.get(u, ()):
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        for here, d in dist.items():
            if d > 0:
                table[(here, goal)] = min(v for v in adj[here] if dist.get(v) == d - 1)
    return table


class VillageState:
    """Index over the triples the dynamics read, kept in sync with emitted deltas."""

    def __init__(self, world: VillageWorld, triples: Iterable[Triple]):
        self.agents = world.agents
        self.edges: set[tuple[str, str]] = set()
        self.loc: dict[str, set[str]] = {}
        self.knows: dict[str, set[str]] = {ag: set() for ag in world.agents}
        self.meta: dict[str, dict[str, set[Term]]] = {}
        self.together: set[tuple[str, str]] = set()
        for t in triples:
            self.apply(Op.INSERT, t)

    def apply(self, op: Op, t: Triple) -> None:
        add = op is Op.INSERT
        p = t.predicate
        if p == ADJACENT:
            (self.edges.add if add else self.edges.discard)((t.subject, t.object))
        elif p == LOCATED_AT and t.subject in self.knows:
            s = self.loc.setdefault(t.subject, set())
            (s.add if add else s.discard)(t.object)
        elif p == KNOWS and t.subject in self.knows:
            (self.knows[t.subject].add if add else self.knows[t.subject].discard)(t.object)
        elif p == TOGETHER:
            (self.together.add if add else self.together.discard)((t.subject, t.object))
        elif p in (HELD_AT, ACTIVE_FROM, ACTIVE_UNTIL):
            vals = self.meta.setdefault(t.subject, {}).setdefault(p, set())
            (vals.add if add else vals.discard)(t.object)

    def where(self, agent: str) -> str | None:
        s = self.loc.get(agent)
        return min(s) if s else None

    def fact_value(self, fact: str, predicate: str) -> Term | None:
        vals = self.meta.get(fact, {}).get(predicate)
        return min(vals, key=term_key) if vals else None

    def active_invitations(self, tick: int) -> list[str]:
        """Invitations whose window covers ``tick``; ambiguous metadata resolves to the smallest value."""
        out = []
        for f in sorted(self.meta):
            venue, lo, hi = (self.fact_value(f, p) for p in (HELD_AT, ACTIVE_FROM, ACTIVE_UNTIL))
            if venue is not None and lo is not None and hi is not None and lo.value <= tick <= hi.value:
                out.append(f)
        return out


def step(world: VillageWorld, state: VillageState, tick: int) -> list[Delta]:
    """Deltas for one tick; ``state`` is updated in place."""
    out: list[Delta] = []

    def emit(op: Op, triple: Triple) -> None:
        out.append(Delta(tick, op, triple))
        state.apply(op, triple)

    routes = _routes(frozenset(state.edges))
    active = state.active_invitations(tick)
    for ag in world.agents:
        here = state.where(ag)
        if here is None:
            continue
        invited = [f for f in active if f in state.knows[ag]]
        goal = state.fact_value(invited[0], HELD_AT) if invited else world.target(ag, tick)
        nxt = routes.get((here, goal), here)
        if nxt != here:
            for old in sorted(state.loc[ag]):
                emit(Op.RETRACT, Triple(ag, LOCATED_AT, old))
            emit(Op.INSERT, Triple(ag, LOCATED_AT, nxt))
    groups: dict[str, list[str]] = {}
    for ag in world.agents:
        here = state.where(ag)
        if here is not None:
            groups.setdefault(here, []).append(ag)
    pairs = {
        (a, b)
        for members in groups.values()
        for i, a in enumerate(members)
        for b in members[i + 1 :]
    }
    for a, b in sorted(state.together - pairs):
        emit(Op.RETRACT, Triple(a, TOGETHER, b))
    for a, b in sorted(pairs - state.together):
        emit(Op.INSERT, Triple(a, TOGETHER, b))
    for place in sorted(groups):
        members = groups[place]
        if len(members) < 2:
            continue
        pooled = set().union(*(state.knows[a] for a in members))
        for a in members:
            for f in sorted(pooled - state.knows[a]):
                emit(Op.INSERT, Triple(a, KNOWS, f))
    return out


def continuation(world: VillageWorld, start_tick: int):
    """Continuation for :func:`fork`: simulate ticks ``start_tick .. horizon - 1``."""

    def run(snapshot: Snapshot) -> Iterator[Delta]:
        state = VillageState(world, snapshot.triples)
        for t in range(start_tick, world.horizon):
            yield from step(world, state, t)

    return run


def simulate_log(world: VillageWorld) -> EventLog:
    log = EventLog(world.initial_triples(), tbox=village_tbox(), horizon=world.horizon)
    state = VillageState(world, log.initial)
    for t in range(world.horizon):
        log.extend(step(world, state, t))
    return log


# -- specs ----------------------------------------------------------------------


class Linkage(str, Enum):
    CONTROL = "control"
    DIRECT = "direct"
    PROPAGATION = "propagation"


class QueryType(str, Enum):
    DID_MEET = "did_meet"
    LEARNED_FACT = "learned_fact"
    VISITED_LOCATION = "visited_location"


LINKAGES = (Linkage.CONTROL, Linkage.DIRECT, Linkage.PROPAGATION)
QUERY_TYPES = (QueryType.DID_MEET, QueryType.LEARNED_FACT, QueryType.VISITED_LOCATION)


@dataclass(frozen=True)
class Query:
    type: QueryType
    args: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "type", QueryType(self.type))
        object.__setattr__(self, "args", tuple(self.args))
        if len(self.args) != 2:
            raise SpecError(f"{self.type.value} takes two arguments")

    @property
    def agents(self) -> set[str]:
        if self.type is QueryType.DID_MEET:
            return set(self.args)
        return {self.args[0]}

    def to_json(self) -> dict:
        return {"type": self.type.value, "args": list(self.args)}


@dataclass(frozen=True)
class TwinSpec:
    spec_id: int
    seed: int
    branch_tick: int
    intervention: Intervention
    linkage: Linkage
    query: Query
    horizon: int

    def to_json(self) -> dict:
        return {
            "spec_id": self.spec_id,
            "seed": self.seed,
            "branch_tick": self.branch_tick,
            "intervention": self.intervention.to_json(),
            "linkage": self.linkage.value,
            "query": self.query.to_json(),
            "horizon": self.horizon,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=False)

    @classmethod
    def from_json(cls, d: Mapping) -> TwinSpec:
        q = d["query"]
        return cls(
            int(d["spec_id"]), int(d["seed"]), int(d["branch_tick"]),
            Intervention.from_json(d["intervention"]), Linkage(d["linkage"]),
            Query(QueryType(q["type"]), tuple(q["args"])), int(d["horizon"]),
        )


def spec_seed(master_seed: int, spec_id: int) -> int:
    digest = hashlib.sha256(f"{master_seed}:{spec_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def intervention_agents(iota: Intervention, world: VillageWorld) -> set[str]:
    p = iota.payload
    if isinstance(p, Triple):
        names = {p.subject, p.object} if isinstance(p.object, str) else {p.subject}
    else:
        names = set(p)
    return names & set(world.agents)


@dataclass
class ArmTrace:
    """One arm's log plus the query-relevant views folded from it."""

    arm: str
    log: EventLog
    horizon: int
    cache: dict = field(default_factory=dict, repr=False, compare=False)

    @cached_property
    def _fold(self) -> tuple[dict[tuple[str, str], list[tuple[int, bool]]], dict[str, set[str]], dict[str, set[str]]]:
        together: dict[tuple[str, str], list[tuple[int, bool]]] = {}
        visited: dict[str, set[str]] = {}
        knows: set[tuple[str, str]] = set()
        for t in self.log.initial:
            if t.predicate == LOCATED_AT:
                visited.setdefault(t.subject, set()).add(t.object)
            elif t.predicate == KNOWS:
                knows.add((t.subject, t.object))
        for d in self.log.deltas:
            t = d.triple
            if t.predicate == TOGETHER:
                pair = tuple(sorted((t.subject, t.object)))
                together.setdefault(pair, []).append((d.tick, d.op is Op.INSERT))
            elif t.predicate == LOCATED_AT and d.op is Op.INSERT:
                visited.setdefault(t.subject, set()).add(t.object)
            elif t.predicate == KNOWS:
                (knows.add if d.op is Op.INSERT else knows.discard)((t.subject, t.object))
        final: dict[str, set[str]] = {}
        for a, f in knows:
            final.setdefault(a, set()).add(f)
        return together, visited, final

    @property
    def meetings(self) -> set[tuple[str, str, int]]:
        """Encounter starts ``(a, b, tick)``."""
        return {(*pair, t) for pair, ops in self._fold[0].items() for t, start in ops if start}

    @cached_property
    def states(self) -> list[Snapshot]:
        return list(snapshots(self.log, range(self.horizon + 1)))

    def knowledge(self, tick: int) -> dict[str, set[str]]:
        out: dict[str, set[str]] = {}
        for t in self.states[tick].triples:
            if t.predicate == KNOWS:
                out.setdefault(t.subject, set()).add(t.object)
        return out

    def did_meet(self, a: str, b: str, lo: int, hi: int) -> bool:
        """Were ``a`` and ``b`` co-located after any tick in ``[lo, hi)``?"""
        together = False
        for t, start in self._fold[0].get(tuple(sorted((a, b))), ()):
            if t > lo and start and t < hi:
                return True
            if t <= lo:
                together = start
        return together

    def learned_fact(self, agent: str, fact: str) -> bool:
        return fact in self._fold[2].get(agent, set())

    def visited_location(self, agent: str, location: str) -> bool:
        return location in self._fold[1].get(agent, set())

    def answer(self, spec: TwinSpec) -> bool:
        q = spec.query
        if q.type is QueryType.DID_MEET:
            return self.did_meet(q.args[0], q.args[1], spec.branch_tick, spec.horizon)
        if q.type is QueryType.LEARNED_FACT:
            return self.learned_fact(*q.args)
        return self.visited_location(*q.args)


class Twin:
    """A world with its cached intervention-free arm."""

    def __init__(self, world: VillageWorld):
        self.world = world
        self.arm_a = ArmTrace("A", simulate_log(world), world.horizon)

    def validate(self, spec: TwinSpec) -> None:
        w = self.world
        if spec.horizon != w.horizon:
            raise SpecError(f"spec {spec.spec_id}: horizon {spec.horizon} differs from world {w.horizon}")
        if not 0 <= spec.branch_tick < w.horizon:
            raise SpecError(f"spec {spec.spec_id}: branch tick {spec.branch_tick} outside horizon")
        iota = spec.intervention
        if iota.verb is Verb.OVERRIDE_LOCATION:
            agent, place = iota.payload
            if place not in w.locations:
                raise SpecError(f"spec {spec.spec_id}: unknown location {place}")
            if agent not in w.agents:
                raise SpecError(f"spec {spec.spec_id}: unknown agent {agent}")

    def arm_b(self, spec: TwinSpec) -> ArmTrace:
        self.validate(spec)
        log = fork(self.arm_a.log, spec.branch_tick, spec.intervention, continuation(self.world, spec.branch_tick))
        return ArmTrace("B", log, self.world.horizon)

    @staticmethod
    def footprint(a: ArmTrace, b: ArmTrace, since: int) -> set[str]:
        """Agents whose own deltas (moves, knowledge, meetings) differ between the arms."""

        def per_agent(tr: ArmTrace) -> dict[str, list[tuple]]:
            out: dict[str, list[tuple]] = {}
            for d in tr.log.deltas[tr.log.prefix_length(since):]:
                t = d.triple
                row = (d.tick, d.op.value, t.predicate, str(t.object), t.subject)
                out.setdefault(t.subject, []).append(row)
                if t.predicate == TOGETHER:
                    out.setdefault(t.object, []).append(row)
            return out

        pa, pb = per_agent(a), per_agent(b)
        return {ag for ag in set(pa) | set(pb) if pa.get(ag) != pb.get(ag)}

    def check_linkage(self, spec: TwinSpec, b: ArmTrace | None = None) -> bool:
        b = self.arm_b(spec) if b is None else b
        ans_a, ans_b = self.arm_a.answer(spec), b.answer(spec)
        targets = intervention_agents(spec.intervention, self.world)
        qa = spec.query.agents
        if spec.linkage is Linkage.DIRECT:
            return ans_a != ans_b and bool(targets & qa)
        if spec.linkage is Linkage.PROPAGATION:
            return ans_a != ans_b and bool(targets) and not targets & qa
        key = ("footprint", spec.branch_tick)
        if key not in b.cache:
            b.cache[key] = self.footprint(self.arm_a, b, spec.branch_tick)
        touched = b.cache[key]
        return ans_a == ans_b and bool(touched) and not touched & qa


def _draw_intervention(twin: Twin, rng: random.Random) -> tuple[int, Intervention]:
    world = twin.world
    agents, facts, locs = world.agents, world.facts, world.locations
    branch = rng.randint(5, min(20, world.horizon - 1))
    target = rng.choice(agents)
    verb = rng.choice(list(Verb))
    known = sorted(twin.arm_a.knowledge(branch).get(target, ()))
    unknown = [f for f in facts if f not in known] or list(facts)
    if verb is Verb.RETRACT_AWARENESS and not known:
        verb = Verb.ASSERT_AWARENESS
    if verb is Verb.OVERRIDE_LOCATION:
        iota = Intervention.override_location(target, rng.choice(locs))
    elif verb is Verb.ASSERT_AWARENESS:
        iota = Intervention.assert_awareness(target, rng.choice(unknown))
    elif verb is Verb.RETRACT_AWARENESS:
        iota = Intervention.retract_awareness(target, rng.choice(known))
    elif verb is Verb.ASSERT:
        iota = Intervention.assert_(Triple(target, KNOWS, rng.choice(unknown)))
    else:
        # Dropping the agent's location takes it out of the world from the branch on.
        here = twin.arm_a.states[branch].objects(target, LOCATED_AT)
        iota = Intervention.retract(Triple(target, LOCATED_AT, here[0] if here else rng.choice(locs)))
    return branch, iota


def candidate_queries(world: VillageWorld, qtype: QueryType) -> list[Query]:
    if qtype is QueryType.DID_MEET:
        return [Query(qtype, (a, b)) for i, a in enumerate(world.agents) for b in world.agents[i + 1 :]]
    second = world.facts if qtype is QueryType.LEARNED_FACT else world.locations
    return [Query(qtype, (a, x)) for a in world.agents for x in second]


def make_spec(twin: Twin, master_seed: int, spec_id: int, budget: int = 2000) -> TwinSpec:
    """Spec ``spec_id``: linkage and query type round-robin.

    Each attempt draws a branch tick and an intervention from the spec's seed
    stream, simulates arm B once, and draws the query among those of the
    required type whose answers fit the linkage label; attempts with no
    fitting query are re-rolled.
    """
    seed = spec_seed(master_seed, spec_id)
    rng = random.Random(seed)
    linkage = LINKAGES[spec_id % 3]
    qtype = QUERY_TYPES[(spec_id // 3) % 3]
    queries = candidate_queries(twin.world, qtype)
    horizon = twin.world.horizon
    for _ in range(budget):
        branch, iota = _draw_intervention(twin, rng)
        b = twin.arm_b(TwinSpec(spec_id, seed, branch, iota, linkage, queries[0], horizon))
        fitting = [
            q for q in queries
            if twin.check_linkage(TwinSpec(spec_id, seed, branch, iota, linkage, q, horizon), b)
        ]
        if fitting:
            return TwinSpec(spec_id, seed, branch, iota, linkage, rng.choice(fitting), horizon)
    raise SpecError(f"spec {spec_id}: no valid {linkage.value}/{qtype.value} draw in {budget} attempts")


def generate_specs(twin: Twin, count: int = 500, master_seed: int = 0) -> list[TwinSpec]:
    return [make_spec(twin, master_seed, i) for i in range(count)]


# -- grading --------------------------------------------------------------------


@dataclass(frozen=True)
class TwinResult:
    spec: TwinSpec
    gold_a: bool
    gold_b: bool
    pred_a: bool | None
    pred_b: bool | None
    source: str = "substrate"

    @property
    def correct_a(self) -> int:
        return int(self.pred_a is not None and self.pred_a == self.gold_a)

    @property
    def correct_b(self) -> int:
        return int(self.pred_b is not None and self.pred_b == self.gold_b)

    @property
    def joint(self) -> int:
        return self.correct_a & self.correct_b

    @property
    def divergence(self) -> int:
        if self.pred_a is None or self.pred_b is None:
            return 0
        return int((self.pred_a != self.pred_b) == (self.gold_a != self.gold_b))

    def to_row(self) -> dict:
        return {
            "question_id": f"spec-{self.spec.spec_id:04d}",
            "family": self.spec.linkage.value,
            "predicted": [self.pred_a, self.pred_b],
            "gold": [self.gold_a, self.gold_b],
            "per_option": [self.correct_a, self.correct_b],
            "correct_question": self.joint,
            "correct_options": f"{self.correct_a + self.correct_b}/2",
            "query": self.spec.query.type.value,
            "divergence_correct": self.divergence,
            "source": self.source,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_row())


def grade_twin(
    spec: TwinSpec,
    arm_a: ArmTrace,
    arm_b: ArmTrace,
    external: Mapping[str, bool | None] | None = None,
) -> TwinResult:
    """Ground truth from both arms; predictions default to the substrate's own answers."""
    ga, gb = arm_a.answer(spec), arm_b.answer(spec)
    if external is None:
        return TwinResult(spec, ga, gb, ga, gb, "substrate")
    return TwinResult(spec, ga, gb, external.get("arm_a"), external.get("arm_b"), "external")


def load_external_answers(lines: Iterable[str]) -> dict[int, dict[str, bool | None]]:
    out = {}
    for no, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
            out[int(d["spec_id"])] = {"arm_a": d.get("arm_a"), "arm_b": d.get("arm_b")}
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"line {no}: {exc}") from None
    return out


@dataclass
class TwinSummary:
    n: int = 0
    arm_correct: int = 0
    joint: int = 0
    divergence: int = 0
    by_linkage: dict[str, list[int]] = field(default_factory=dict)

    def add(self, r: TwinResult) -> None:
        self.n += 1
        self.arm_correct += r.correct_a + r.correct_b
        self.joint += r.joint
        self.divergence += r.divergence
        cell = self.by_linkage.setdefault(r.spec.linkage.value, [0, 0, 0, 0])
        cell[0] += 1
        cell[1] += r.correct_a + r.correct_b
        cell[2] += r.joint
        cell[3] += r.divergence


def arm_state_counts(log: EventLog) -> list[int]:
    """Triple count of the replayed state at every tick ``0 .. horizon``."""
    return [len(s) for s in snapshots(log, range(log.max_tick() + 1))]


def replay_digest(world: VillageWorld) -> tuple[list[int], str]:
    log = simulate_log(world)
    return arm_state_counts(log), dumps_log(log)


__all__ = [
    "ArmTrace", "Invitation", "Linkage", "Query", "QueryType", "SpecError", "Twin", "TwinResult",
    "TwinSpec", "TwinSummary", "VillageWorld", "WorldError", "continuation", "generate_specs",
    "generate_world", "grade_twin", "load_external_answers", "make_spec", "replay", "simulate_log",
    "spec_seed", "step",
]
