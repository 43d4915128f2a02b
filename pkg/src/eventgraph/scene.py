"""Scene model and ingestion of CLEVRER-style annotation documents."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from eventgraph.substrate import EventLog, Literal, TBox, Triple, dumps_log


class IngestError(ValueError):
    pass


@dataclass(frozen=True)
class SceneObject:
    id: str
    color: str
    material: str
    shape: str


@dataclass(frozen=True)
class FrameRecord:
    frame: int
    visible: bool
    position: tuple[float, ...] | None
    velocity: tuple[float, ...] | None = None


@dataclass(frozen=True)
class Collision:
    objects: tuple[str, str]
    frame: int


@dataclass
class Scene:
    scene_id: str
    objects: list[SceneObject]
    trajectories: dict[str, list[FrameRecord]]
    collisions: list[Collision] = field(default_factory=list)

    def __post_init__(self):
        ids = {o.id for o in self.objects}
        for c in self.collisions:
            for oid in c.objects:
                if oid not in ids:
                    raise IngestError(f"collision at frame {c.frame} references unknown object {oid}")
        for o in self.objects:
            if o.id not in self.trajectories:
                raise IngestError(f"object {o.id} has no trajectory")

    @property
    def n_frames(self) -> int:
        return max((len(t) for t in self.trajectories.values()), default=0)

    @property
    def last_frame(self) -> int:
        return self.n_frames - 1

    def object(self, oid: str) -> SceneObject:
        for o in self.objects:
            if o.id == oid:
                return o
        raise KeyError(oid)

    def visible_frames(self, oid: str) -> list[int]:
        return [r.frame for r in self.trajectories[oid] if r.visible]


def _vec(value: Any) -> tuple[float, ...] | None:
    if value is None:
        return None
    return tuple(float(x) for x in value)


def object_id(index: int) -> str:
    return f"o{index}"


def ingest_scene(doc: Mapping[str, Any]) -> Scene:
    """Build a :class:`Scene` from an annotation document.

    Object ids are assigned by position in ``object_property`` (``o0``,
    ``o1``, ...), independent of the annotation's own ``object_id`` values.
    """
    props = doc.get("object_property")
    if props is None:
        raise IngestError("annotation has no object_property records")
    ids: dict[Any, str] = {}
    objects = []
    for i, p in enumerate(props):
        raw = p.get("object_id", i)
        if raw in ids:
            raise IngestError(f"duplicate object_id {raw!r}")
        oid = object_id(i)
        ids[raw] = oid
        objects.append(
            SceneObject(
                oid,
                str(p.get("color", "")).lower(),
                str(p.get("material", "")).lower(),
                str(p.get("shape", "")).lower(),
            )
        )

    frames = sorted(doc.get("motion_trajectory", []), key=lambda f: f["frame_id"])
    if [f["frame_id"] for f in frames] != list(range(len(frames))):
        raise IngestError("motion_trajectory frames are not contiguous from 0")
    tracks: dict[str, list[FrameRecord]] = {o.id: [] for o in objects}
    for f in frames:
        seen = set()
        for rec in f.get("objects", []):
            raw = rec.get("object_id")
            if raw not in ids:
                raise IngestError(f"frame {f['frame_id']} references undeclared object_id {raw!r}")
            oid = ids[raw]
            seen.add(oid)
            tracks[oid].append(
                FrameRecord(
                    f["frame_id"],
                    bool(rec.get("inside_camera_view", True)),
                    _vec(rec.get("location")),
                    _vec(rec.get("velocity")),
                )
            )
        for oid in tracks:
            if oid not in seen:
                tracks[oid].append(FrameRecord(f["frame_id"], False, None, None))
    for o in objects:
        if frames and not any(r.position is not None for r in tracks[o.id]):
            raise IngestError(f"object {o.id} (annotation index {objects.index(o)}) has no trajectory records")

    collisions = []
    for c in doc.get("collision", []):
        raw_ids = c.get("object_ids", [])
        if len(raw_ids) != 2:
            raise IngestError(f"collision at frame {c.get('frame_id')} must name two objects")
        pair = []
        for raw in raw_ids:
            if raw not in ids:
                raise IngestError(f"collision at frame {c.get('frame_id')} references unknown object {raw!r}")
            pair.append(ids[raw])
        a, b = sorted(pair)
        collisions.append(Collision((a, b), int(c["frame_id"])))
    collisions.sort(key=lambda c: (c.frame, c.objects))
    scene_id = str(doc.get("scene_index", doc.get("scene_id", "")))
    return Scene(scene_id, objects, tracks, collisions)


def load_scene(path: str | Path) -> Scene:
    with open(path, encoding="utf-8") as fh:
        return ingest_scene(json.load(fh))


CLEVRER_TBOX = TBox.parse(
    """\
class ex:Object
class ex:Event
pred rdf:type ex:Resource ex:Class
pred ex:color ex:Object text
pred ex:material ex:Object text
pred ex:shape ex:Object text
pred ex:inScene ex:Object bool
pred ex:kind ex:Event text
pred ex:participant ex:Event ex:Object
pred ex:atFrame ex:Event int
"""
)


def scene_to_log(scene: Scene) -> EventLog:
    """Lower a scene to a typed event log (object table plus event deltas)."""
    from eventgraph.events import EventKind, events_from_scene

    initial = []
    for o in scene.objects:
        initial += [
            Triple(o.id, "rdf:type", "ex:Object"),
            Triple(o.id, "ex:color", Literal.of(o.color)),
            Triple(o.id, "ex:material", Literal.of(o.material)),
            Triple(o.id, "ex:shape", Literal.of(o.shape)),
        ]
    log = EventLog(initial, CLEVRER_TBOX, horizon=scene.n_frames)
    for ev in events_from_scene(scene).events:
        iri = f"ev:{ev.id}"
        log.insert(ev.tick, Triple(iri, "rdf:type", "ex:Event"))
        log.insert(ev.tick, Triple(iri, "ex:kind", Literal.of(ev.kind.value)))
        log.insert(ev.tick, Triple(iri, "ex:atFrame", Literal.of(ev.tick)))
        for oid in sorted(ev.objects):
            log.insert(ev.tick, Triple(iri, "ex:participant", oid))
        if ev.kind is EventKind.ENTER:
            (oid,) = ev.objects
            log.insert(ev.tick, Triple(oid, "ex:inScene", Literal.of(True)))
        elif ev.kind is EventKind.EXIT:
            (oid,) = ev.objects
            log.retract(ev.tick, Triple(oid, "ex:inScene", Literal.of(True)))
    return log


def dumps_scene_log(scene: Scene) -> str:
    return dumps_log(scene_to_log(scene))


def scene_to_annotation(scene: Scene) -> dict:
    """Inverse of :func:`ingest_scene` (object ids become annotation indexes)."""
    index = {o.id: i for i, o in enumerate(scene.objects)}
    frames = []
    for f in range(scene.n_frames):
        objs = []
        for o in scene.objects:
            rec = scene.trajectories[o.id][f]
            if rec.position is None:
                continue
            entry: dict[str, Any] = {
                "object_id": index[o.id],
                "location": list(rec.position),
                "inside_camera_view": rec.visible,
            }
            if rec.velocity is not None:
                entry["velocity"] = list(rec.velocity)
            objs.append(entry)
        frames.append({"frame_id": f, "objects": objs})
    return {
        "scene_index": scene.scene_id,
        "object_property": [
            {"object_id": index[o.id], "color": o.color, "material": o.material, "shape": o.shape}
            for o in scene.objects
        ],
        "motion_trajectory": frames,
        "collision": [
            {"object_ids": [index[c.objects[0]], index[c.objects[1]]], "frame_id": c.frame}
            for c in scene.collisions
        ],
    }


def make_scene(
    scene_id: str,
    objects: Sequence[tuple[str, str, str]],
    n_frames: int,
    positions: Mapping[int, Sequence[Sequence[float]]] | None = None,
    visible: Mapping[int, tuple[int, int]] | None = None,
    collisions: Sequence[tuple[int, int, int]] = (),
) -> Scene:
    """Small builder for hand-written fixtures.

    ``objects`` are ``(color, material, shape)`` triples; ``positions[i]`` is a
    per-frame position list (default: stationary at ``(i, 0)``); ``visible[i]``
    is an inclusive frame range (default: whole video); ``collisions`` are
    ``(i, j, frame)`` tuples.
    """
    positions = positions or {}
    visible = visible or {}
    objs = [SceneObject(object_id(i), *attrs) for i, attrs in enumerate(objects)]
    tracks = {}
    for i, o in enumerate(objs):
        lo, hi = visible.get(i, (0, n_frames - 1))
        path = positions.get(i)
        recs = []
        for f in range(n_frames):
            pos = tuple(float(x) for x in path[f]) if path is not None else (float(i), 0.0)
            recs.append(FrameRecord(f, lo <= f <= hi, pos, None))
        tracks[o.id] = recs
    cols = []
    for i, j, frame in collisions:
        a, b = sorted((object_id(i), object_id(j)))
        cols.append(Collision((a, b), frame))
    cols.sort(key=lambda c: (c.frame, c.objects))
    return Scene(scene_id, objs, tracks, cols)
