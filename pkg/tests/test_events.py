from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from eventgraph.events import (
    Event,
    EventKind,
    EventNotFound,
    EventSet,
    TraversalStats,
    ancestors,
    collision_events,
    events_from_scene,
)
from eventgraph.scene import make_scene


def closure(e: Event, events: EventSet, global_frame: bool = False) -> set[Event]:
    """Reference fixpoint: chains of strictly decreasing ticks through shared objects."""
    found: set[Event] = set()
    if global_frame:
        objs = set(e.objects)
        changed = True
        while changed:
            changed = False
            for x in events:
                if x.tick < e.tick and x.objects & objs and x not in found:
                    found.add(x)
                    objs |= x.objects
                    changed = True
        return found
    frontier = {e}
    while frontier:
        nxt = set()
        for y in frontier:
            for x in events:
                if x.tick < y.tick and x.objects & y.objects and x not in found:
                    found.add(x)
                    nxt.add(x)
        frontier = nxt
    return found


def chain() -> EventSet:
    return collision_events([("B", "C", 20), ("C", "D", 25), ("A", "B", 30)])


def test_spurious_transitive_path_excluded_per_event_but_not_global():
    evs = chain()
    target = evs.get("collision:A:B:30")
    per = ancestors(target, evs)
    glob = ancestors(target, evs, global_frame=True)
    assert per.sorted() == [evs.get("collision:B:C:20")]
    assert per.ancestor_objects == {"A", "B", "C"}
    assert set(glob.ancestors) == {evs.get("collision:B:C:20"), evs.get("collision:C:D:25")}
    assert "D" in glob.ancestor_objects


def test_target_objects_are_ancestor_objects_even_without_history():
    evs = collision_events([("A", "B", 5)])
    res = ancestors(evs.get("collision:A:B:5"), evs)
    assert res.ancestors == frozenset()
    assert res.ancestor_objects == {"A", "B"}


def test_simultaneous_events_are_not_ancestors():
    evs = collision_events([("A", "B", 5), ("B", "C", 5)])
    assert ancestors(evs.get("collision:A:B:5"), evs).ancestors == frozenset()


def test_unknown_event_raises():
    with pytest.raises(EventNotFound):
        ancestors(Event.collision("A", "Z", 3), chain())


def test_raised_reference_tick_is_expanded_once():
    # C is first met through B-C@10, then again through C-E@18 which raises its reference tick.
    evs = collision_events([("C", "D", 12), ("B", "C", 10), ("C", "E", 18), ("A", "B", 30), ("A", "E", 25)])
    stats = TraversalStats()
    res = ancestors(evs.get("collision:A:B:30"), evs, stats=stats)
    assert evs.get("collision:C:D:12") in res.ancestors
    assert all(v == 1 for v in stats.enqueued.values())
    assert set(res.ancestors) == closure(evs.get("collision:A:B:30"), evs)


def test_events_from_scene_enter_and_exit():
    scene = make_scene(
        "s", [("red", "rubber", "cube")] * 3, 10,
        visible={1: (3, 9), 2: (0, 6)}, collisions=[(0, 1, 5)],
    )
    ids = {e.id for e in events_from_scene(scene)}
    assert ids == {"collision:o0:o1:5", "enter:o0:0", "enter:o1:3", "enter:o2:0", "exit:o2:7"}


def test_event_validation():
    with pytest.raises(ValueError):
        Event.make(EventKind.COLLISION, ("A",), 1)
    with pytest.raises(ValueError):
        Event.make(EventKind.ENTER, ("A",), -1)


objs = st.sampled_from("ABCDEF")


@st.composite
def event_sets(draw):
    evs = []
    for _ in range(draw(st.integers(1, 12))):
        kind = draw(st.sampled_from([EventKind.COLLISION, EventKind.COLLISION, EventKind.ENTER, EventKind.EXIT]))
        tick = draw(st.integers(0, 15))
        if kind is EventKind.COLLISION:
            a, b = draw(st.lists(objs, min_size=2, max_size=2, unique=True))
            evs.append(Event.collision(a, b, tick))
        else:
            evs.append(Event.make(kind, (draw(objs),), tick))
    return EventSet(evs)


@given(event_sets())
def test_traversal_equals_brute_force_closure(evs):
    for e in evs:
        assert set(ancestors(e, evs).ancestors) == closure(e, evs)
        assert set(ancestors(e, evs, global_frame=True).ancestors) == closure(e, evs, global_frame=True)


@given(event_sets())
def test_global_frame_is_superset(evs):
    for e in evs:
        per = ancestors(e, evs)
        glob = ancestors(e, evs, global_frame=True)
        assert per.ancestors <= glob.ancestors
        assert per.ancestor_objects <= glob.ancestor_objects


@given(event_sets())
def test_ancestor_objects_are_target_plus_ancestor_participants(evs):
    for e in evs:
        res = ancestors(e, evs)
        expected = set(e.objects).union(*(a.objects for a in res.ancestors))
        assert res.ancestor_objects == expected
        assert all(a.tick < e.tick for a in res.ancestors)


@pytest.mark.parametrize("n", range(2, 7))
def test_monotone_chain_exactness(n):
    names = [f"X{i}" for i in range(n + 1)]
    evs = collision_events([(names[i], names[i + 1], 10 * (i + 1)) for i in range(n)])
    last = evs.collisions()[-1]
    assert set(ancestors(last, evs).ancestors) == set(evs.collisions()[:-1])


@given(event_sets())
def test_visitation_bounds(evs):
    for e in evs:
        stats = TraversalStats()
        res = ancestors(e, evs, stats=stats)
        assert all(v == 1 for v in stats.enqueued.values())
        assert stats.examined <= sum(len(evs.object_index.get(o, ())) for o in stats.enqueued)
        assert set(stats.enqueued) <= res.ancestor_objects
