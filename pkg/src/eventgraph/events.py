"""Events over a scene and causal-ancestor traversal."""

from __future__ import annotations

import bisect
import heapq
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Sequence

from eventgraph.scene import Scene


class EventKind(str, Enum):
    COLLISION = "collision"
    ENTER = "enter"
    EXIT = "exit"


class EventNotFound(KeyError):
    pass


def event_id(kind: EventKind | str, objects: Iterable[str], tick: int) -> str:
    return ":".join([EventKind(kind).value, *sorted(objects), str(tick)])


@dataclass(frozen=True)
class Event:
    id: str
    kind: EventKind
    tick: int
    objects: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "kind", EventKind(self.kind))
        object.__setattr__(self, "objects", frozenset(self.objects))
        want = 2 if self.kind is EventKind.COLLISION else 1
        if len(self.objects) != want:
            raise ValueError(f"{self.kind.value} event needs {want} object(s), got {sorted(self.objects)}")
        if self.tick < 0:
            raise ValueError("event tick must be non-negative")

    @classmethod
    def make(cls, kind: EventKind | str, objects: Iterable[str], tick: int) -> Event:
        objects = frozenset(objects)
        return cls(event_id(kind, objects, tick), EventKind(kind), tick, objects)

    @classmethod
    def collision(cls, a: str, b: str, tick: int) -> Event:
        return cls.make(EventKind.COLLISION, (a, b), tick)

    def sort_key(self) -> tuple[int, str]:
        return (self.tick, self.id)

    def __repr__(self) -> str:
        return f"Event({self.id})"


class EventSet:
    """Immutable, tick-sorted events with an object incidence index."""

    def __init__(self, events: Iterable[Event]):
        evs = sorted(set(events), key=Event.sort_key)
        self.events: tuple[Event, ...] = tuple(evs)
        self._by_id = {e.id: e for e in evs}
        index: dict[str, list[Event]] = {}
        for e in evs:
            for o in sorted(e.objects):
                index.setdefault(o, []).append(e)
        self.object_index: dict[str, tuple[Event, ...]] = {o: tuple(v) for o, v in sorted(index.items())}
        self._ticks = {o: [e.tick for e in v] for o, v in self.object_index.items()}

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def __contains__(self, e: object) -> bool:
        return isinstance(e, Event) and self._by_id.get(e.id) == e

    def get(self, eid: str) -> Event:
        try:
            return self._by_id[eid]
        except KeyError:
            raise EventNotFound(eid) from None

    @property
    def objects(self) -> list[str]:
        return list(self.object_index)

    def incident_before(self, obj: str, tick: int) -> tuple[Event, ...]:
        """Events involving ``obj`` with tick strictly less than ``tick``."""
        evs = self.object_index.get(obj, ())
        k = bisect.bisect_left(self._ticks.get(obj, []), tick)
        return evs[:k]

    def find(self, kind: EventKind | str, objects: Iterable[str]) -> list[Event]:
        kind = EventKind(kind)
        objects = frozenset(objects)
        first = min(objects)
        return [e for e in self.object_index.get(first, ()) if e.kind is kind and e.objects == objects]

    def collision_partners(self, obj: str) -> set[str]:
        return {
            o
            for e in self.object_index.get(obj, ())
            if e.kind is EventKind.COLLISION
            for o in e.objects
            if o != obj
        }

    def collisions(self) -> list[Event]:
        return [e for e in self.events if e.kind is EventKind.COLLISION]


@dataclass
class TraversalStats:
    enqueued: dict[str, int] = field(default_factory=dict)
    examined: int = 0


@dataclass(frozen=True)
class AncestorResult:
    ancestors: frozenset[Event]
    ancestor_objects: frozenset[str]

    def sorted(self) -> list[Event]:
        return sorted(self.ancestors, key=Event.sort_key)


def ancestors(
    e: Event,
    events: EventSet,
    *,
    global_frame: bool = False,
    stats: TraversalStats | None = None,
) -> AncestorResult:
    """Backward traversal over the event/object incidence graph.

    The worklist holds ``(object, reference tick)`` pairs seeded with the
    target's objects at ``e.tick``; expanding ``(o, tau)`` collects the events
    of ``o`` strictly before ``tau``, and an object met through event ``e'``
    gets reference tick ``e'.tick``.  Entries are expanded latest tick first
    and a pending object's tick is raised when it is met again later, so every
    object is expanded exactly once, at the latest tick through which it can
    influence ``e``.  With ``global_frame`` every entry keeps ``e.tick``,
    which over-approximates the result.
    """
    if e not in events:
        raise EventNotFound(e.id)
    found: set[Event] = set()
    ref: dict[str, int] = {o: e.tick for o in e.objects}
    expanded: set[str] = set()
    heap = [(-e.tick, o) for o in sorted(e.objects)]
    heapq.heapify(heap)
    while heap:
        neg_tau, obj = heapq.heappop(heap)
        if obj in expanded or -neg_tau < ref[obj]:
            continue
        expanded.add(obj)
        if stats is not None:
            stats.enqueued[obj] = stats.enqueued.get(obj, 0) + 1
        for prior in events.incident_before(obj, -neg_tau):
            if stats is not None:
                stats.examined += 1
            found.add(prior)
            tau = e.tick if global_frame else prior.tick
            for other in sorted(prior.objects):
                if other in expanded or ref.get(other, -1) >= tau:
                    continue
                ref[other] = tau
                heapq.heappush(heap, (-tau, other))
    return AncestorResult(frozenset(found), frozenset(ref))


def ancestors_global_frame(e: Event, events: EventSet, *, stats: TraversalStats | None = None) -> AncestorResult:
    return ancestors(e, events, global_frame=True, stats=stats)


def events_from_scene(scene: Scene) -> EventSet:
    """Collision, enter and exit events of a scene.

    An object enters at its first visible frame; it exits at the frame after
    its last visible frame, only if it is not visible at the final frame.
    """
    out = [Event.collision(*c.objects, c.frame) for c in scene.collisions]
    last = scene.last_frame
    for o in scene.objects:
        frames = scene.visible_frames(o.id)
        if not frames:
            continue
        out.append(Event.make(EventKind.ENTER, (o.id,), frames[0]))
        if frames[-1] < last:
            out.append(Event.make(EventKind.EXIT, (o.id,), frames[-1] + 1))
    return EventSet(out)


def collision_events(pairs: Sequence[tuple[str, str, int]]) -> EventSet:
    """EventSet from ``(a, b, tick)`` collision tuples (test and oracle helper)."""
    return EventSet(Event.collision(a, b, t) for a, b, t in pairs)
