"""Removal counterfactuals answered on the observed event log.

An observed event vanishes when the removed object is among its ancestor
objects.  An unobserved collision between ``A`` and ``B`` is predicted to
appear when both collided with the removed object (common removed partner).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from eventgraph.events import Event, EventKind, EventSet, ancestors


class Rationale(str, Enum):
    ANCESTOR = "ancestor-membership"
    EMERGENT = "emergent-common-partner"
    UNAFFECTED = "unaffected"


@dataclass(frozen=True)
class CandidateEvent:
    """An event described by kind and objects; ``tick`` pins one observed instance."""

    kind: EventKind
    objects: frozenset[str]
    tick: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", EventKind(self.kind))
        object.__setattr__(self, "objects", frozenset(self.objects))
        want = 2 if self.kind is EventKind.COLLISION else 1
        if len(self.objects) != want:
            raise ValueError(f"{self.kind.value} candidate needs {want} object(s)")

    @classmethod
    def collision(cls, a: str, b: str) -> CandidateEvent:
        return cls(EventKind.COLLISION, frozenset((a, b)))

    @classmethod
    def of(cls, event: Event) -> CandidateEvent:
        return cls(event.kind, event.objects, event.tick)

    def matches(self, events: EventSet) -> list[Event]:
        found = events.find(self.kind, self.objects)
        if self.tick is not None:
            found = [e for e in found if e.tick == self.tick]
        return found

    def describe(self) -> str:
        return ":".join([self.kind.value, *sorted(self.objects)])


@dataclass(frozen=True)
class CfAnswer:
    observed: bool
    diverges: bool
    rationale: Rationale

    @property
    def occurs_in_cf(self) -> bool:
        return self.observed != self.diverges


def _as_candidate(candidate: CandidateEvent | Event) -> CandidateEvent:
    return CandidateEvent.of(candidate) if isinstance(candidate, Event) else candidate


def answer_cf(
    candidate: CandidateEvent | Event,
    removed: str,
    events: EventSet,
    *,
    emergent: bool = True,
    emergent_on_observed: bool = False,
) -> CfAnswer:
    """Would ``candidate``'s occurrence status change if ``removed`` were absent?

    An untimed candidate matching several observed instances diverges only if
    every instance has ``removed`` among its ancestor objects.
    ``emergent_on_observed`` deliberately misapplies the partner heuristic to
    observed events; it exists for mutation testing of the duality suite.
    """
    cand = _as_candidate(candidate)
    matches = cand.matches(events)
    partners = None
    if matches:
        if removed in cand.objects:
            return CfAnswer(True, True, Rationale.ANCESTOR)
        gone = all(removed in ancestors(m, events).ancestor_objects for m in matches)
        if gone:
            return CfAnswer(True, True, Rationale.ANCESTOR)
        if emergent_on_observed and cand.kind is EventKind.COLLISION:
            partners = events.collision_partners(removed)
            if cand.objects <= partners:
                return CfAnswer(True, True, Rationale.EMERGENT)
        return CfAnswer(True, False, Rationale.UNAFFECTED)
    if removed in cand.objects:
        return CfAnswer(False, False, Rationale.ANCESTOR)
    if emergent and cand.kind is EventKind.COLLISION:
        partners = events.collision_partners(removed) if partners is None else partners
        if cand.objects <= partners:
            return CfAnswer(False, True, Rationale.EMERGENT)
    return CfAnswer(False, False, Rationale.UNAFFECTED)


def cf_ablate_heuristic(candidate: CandidateEvent | Event, removed: str, events: EventSet) -> CfAnswer:
    return answer_cf(candidate, removed, events, emergent=False)


def emergent_pairs(removed: str, events: EventSet) -> set[tuple[str, str]]:
    """Unobserved collision pairs the partner heuristic predicts after removal."""
    partners = sorted(events.collision_partners(removed))
    observed = {tuple(sorted(e.objects)) for e in events.collisions()}
    return {
        (a, b)
        for i, a in enumerate(partners)
        for b in partners[i + 1 :]
        if (a, b) not in observed
    }


def surviving(removed: str, events: EventSet, candidates: Iterable[Event] | None = None) -> list[Event]:
    """Observed events still predicted to occur once ``removed`` is gone."""
    pool = events.events if candidates is None else candidates
    return [e for e in pool if not answer_cf(e, removed, events).diverges]
