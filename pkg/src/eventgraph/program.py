"""Stack-based (RPN) executor for the CLEVRER program DSL over an event set.

Tokens are opcodes, optionally carrying a literal argument as ``op=arg``
(``filter_color=red``).  A bare attribute word (``red``, ``metal``, ``cube``)
pushes an attribute string that the next attribute filter may consume.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Sequence

import numpy as np

from eventgraph.counterfactual import CandidateEvent, answer_cf
from eventgraph.events import Event, EventKind, EventSet, events_from_scene
from eventgraph.kinematics import frame_velocities
from eventgraph.scene import Scene

OPCODES = frozenset(
    {
        "objects", "events", "all_events",
        "filter_color", "filter_material", "filter_shape",
        "filter_moving", "filter_stationary",
        "filter_in", "filter_out", "filter_collision",
        "filter_before", "filter_after", "filter_order",
        "start", "end", "first", "last", "get_frame",
        "count", "exist", "unique", "belong_to",
        "query_color", "query_material", "query_shape",
        "get_counterfact", "get_col_partner", "negate",
    }
)

COLORS = ("gray", "red", "blue", "green", "brown", "purple", "cyan", "yellow")
MATERIALS = ("rubber", "metal")
SHAPES = ("sphere", "cube", "cylinder")
ATTRIBUTE_OF = {**{c: "color" for c in COLORS}, **{m: "material" for m in MATERIALS}, **{s: "shape" for s in SHAPES}}

ALIASES = {
    "query_collision_partner": "get_col_partner",
    "filter_start": "start",
    "filter_end": "end",
    "filter_first": "first",
    "filter_last": "last",
}

ORDINALS = {"first": 1, "second": 2, "third": 3, "fourth": 4, "fifth": 5}

MOVING_THRESHOLD = 1e-2


class ProgramError(ValueError):
    """Malformed program text (unknown token, bad argument)."""


class ExecError(RuntimeError):
    def __init__(self, index: int, opcode: str, message: str):
        super().__init__(f"op {index} ({opcode}): {message}")
        self.index = index
        self.opcode = opcode


class Kind(str, Enum):
    OBJECTS = "object-set"
    EVENTS = "event-set"
    OBJECT = "object"
    EVENT = "event"
    INT = "integer"
    BOOL = "boolean"
    ATTR = "attribute"
    FRAME = "frame"
    DESCRIPTION = "event-description"


@dataclass(frozen=True)
class Value:
    kind: Kind
    data: Any

    def render(self) -> Any:
        """JSON-ready canonical form of an answer."""
        if self.kind in (Kind.INT, Kind.FRAME, Kind.BOOL, Kind.ATTR, Kind.OBJECT):
            return self.data
        if self.kind is Kind.OBJECTS:
            return list(self.data)
        if self.kind is Kind.EVENTS:
            return [e.id for e in self.data]
        if self.kind is Kind.EVENT:
            return self.data.id
        return self.data.describe()


@dataclass(frozen=True)
class Token:
    op: str
    arg: str | None = None

    def __str__(self) -> str:
        return self.op if self.arg is None else f"{self.op}={self.arg}"


@dataclass(frozen=True)
class Program:
    ops: tuple[Token, ...]

    @classmethod
    def parse(cls, tokens: Iterable[str] | str, strict: bool = True) -> Program:
        """Tokenize; with ``strict=False`` a bad token becomes an ``invalid`` op that fails when executed."""
        if isinstance(tokens, str):
            tokens = tokens.split()
        ops = []
        for t in tokens:
            try:
                ops.append(parse_token(t))
            except ProgramError as exc:
                if strict:
                    raise
                ops.append(Token("invalid", str(exc)))
        return cls(tuple(ops))

    def __str__(self) -> str:
        return " ".join(map(str, self.ops))

    def __len__(self) -> int:
        return len(self.ops)


def parse_token(text: str) -> Token:
    raw = str(text).strip().lower()
    op, _, arg = raw.partition("=")
    arg = arg or None
    if op in ATTRIBUTE_OF and arg is None:
        return Token("attr", op)
    op = ALIASES.get(op, op)
    if op.startswith("filter_") and op[7:] in ATTRIBUTE_OF and arg is None:
        return Token(f"filter_{ATTRIBUTE_OF[op[7:]]}", op[7:])
    if op not in OPCODES:
        raise ProgramError(f"unknown opcode {text!r}")
    if op in ("filter_color", "filter_material", "filter_shape") and arg is not None:
        want = op[7:]
        if ATTRIBUTE_OF.get(arg) != want:
            raise ProgramError(f"{arg!r} is not a {want}")
    if op == "filter_order":
        if arg is None:
            raise ProgramError("filter_order needs an ordinal argument")
        if arg not in ORDINALS and arg != "last" and not arg.isdigit():
            raise ProgramError(f"bad ordinal {arg!r}")
    if op in ("filter_moving", "filter_stationary") and arg is not None and not arg.isdigit():
        raise ProgramError(f"bad frame {arg!r}")
    return Token(op, arg)


@dataclass
class Context:
    """Per-execution view of a scene; immutable once built."""

    scene: Scene
    events: EventSet
    emergent: bool = True
    moving_threshold: float = MOVING_THRESHOLD
    _speeds: dict[str, dict[int, float]] = field(default_factory=dict, repr=False)

    @classmethod
    def of(cls, scene: Scene, events: EventSet | None = None, **kw) -> Context:
        return cls(scene, events_from_scene(scene) if events is None else events, **kw)

    def speeds(self, oid: str) -> dict[int, float]:
        if oid not in self._speeds:
            vels = frame_velocities(self.scene, oid)
            self._speeds[oid] = {f: float(np.linalg.norm(v)) for f, v in vels.items()}
        return self._speeds[oid]

    def is_moving(self, oid: str, frame: int | None) -> bool:
        speeds = self.speeds(oid)
        if frame is None:
            return any(s > self.moving_threshold for s in speeds.values())
        return speeds.get(frame, 0.0) > self.moving_threshold


_KIND_OF_FILTER = {
    "filter_collision": EventKind.COLLISION,
    "filter_in": EventKind.ENTER,
    "filter_out": EventKind.EXIT,
}


def _order_key(e: Event) -> tuple[int, str]:
    return (e.tick, e.id)


class _Machine:
    def __init__(self, ctx: Context):
        self.ctx = ctx
        self.stack: list[Value] = []
        self.i = 0
        self.op = ""

    def fail(self, msg: str) -> ExecError:
        return ExecError(self.i, self.op, msg)

    def pop(self, *kinds: Kind) -> Value:
        if not self.stack:
            raise self.fail("stack underflow")
        v = self.stack[-1]
        if kinds and v.kind not in kinds:
            want = "|".join(k.value for k in kinds)
            raise self.fail(f"expected {want}, found {v.kind.value}")
        return self.stack.pop()

    def peek(self, depth: int = 1) -> Kind | None:
        return self.stack[-depth].kind if len(self.stack) >= depth else None

    def push(self, kind: Kind, data: Any) -> None:
        self.stack.append(Value(kind, data))

    def objects_of(self, ids: Iterable[str]) -> None:
        self.push(Kind.OBJECTS, tuple(sorted(set(ids))))

    def events_of(self, evs: Iterable[Event]) -> None:
        self.push(Kind.EVENTS, tuple(sorted(set(evs), key=_order_key)))

    def run(self, program: Program) -> Value:
        for self.i, tok in enumerate(program.ops):
            self.op = str(tok)
            getattr(self, "op_" + tok.op)(tok.arg)
        if len(self.stack) != 1:
            self.i, self.op = len(program.ops), "<end>"
            raise self.fail(f"program left {len(self.stack)} values on the stack")
        return self.stack[0]

    # -- sources ------------------------------------------------------------

    def op_invalid(self, msg):
        raise self.fail(msg)

    def op_objects(self, _):
        self.objects_of(o.id for o in self.ctx.scene.objects)

    def op_events(self, _):
        self.events_of(self.ctx.events)

    op_all_events = op_events

    def op_attr(self, arg):
        self.push(Kind.ATTR, arg)

    def op_start(self, _):
        self.push(Kind.FRAME, 0)

    def op_end(self, _):
        self.push(Kind.FRAME, max(self.ctx.scene.last_frame, 0))

    # -- object filters -----------------------------------------------------

    def _attr_filter(self, attr: str, arg: str | None):
        if arg is None:
            arg = self.pop(Kind.ATTR).data
            if ATTRIBUTE_OF.get(arg) != attr:
                raise self.fail(f"{arg!r} is not a {attr}")
        objs = self.pop(Kind.OBJECTS).data
        scene = self.ctx.scene
        self.objects_of(o for o in objs if getattr(scene.object(o), attr) == arg)

    def op_filter_color(self, arg):
        self._attr_filter("color", arg)

    def op_filter_material(self, arg):
        self._attr_filter("material", arg)

    def op_filter_shape(self, arg):
        self._attr_filter("shape", arg)

    def _motion_filter(self, moving: bool, arg: str | None):
        frame = int(arg) if arg is not None else None
        if frame is None and self.peek() is Kind.FRAME:
            frame = self.pop().data
        objs = self.pop(Kind.OBJECTS).data
        self.objects_of(o for o in objs if self.ctx.is_moving(o, frame) == moving)

    def op_filter_moving(self, arg):
        self._motion_filter(True, arg)

    def op_filter_stationary(self, arg):
        self._motion_filter(False, arg)

    # -- event filters ------------------------------------------------------

    def _kind_filter(self, name: str):
        kind = _KIND_OF_FILTER[name]
        top = self.pop(Kind.EVENTS, Kind.OBJECTS, Kind.OBJECT)
        if top.kind is Kind.EVENTS:
            self.events_of(e for e in top.data if e.kind is kind)
            return
        if top.kind is Kind.OBJECT:
            objs = {top.data}
            if kind is EventKind.COLLISION and self.peek() is Kind.OBJECT:
                objs.add(self.pop().data)
            exact = len(objs) == 2
        else:
            objs = set(top.data)
            exact = False
        if self.peek() is Kind.EVENTS:
            evs = self.pop().data
            if exact:
                self.events_of(e for e in evs if e.kind is kind and e.objects == objs)
            else:
                self.events_of(e for e in evs if e.kind is kind and e.objects & objs)
            return
        if top.kind is Kind.OBJECTS:
            raise self.fail("object-set filter needs an event-set below it")
        want = 2 if kind is EventKind.COLLISION else 1
        if len(objs) != want:
            raise self.fail(f"{kind.value} description needs {want} distinct object(s)")
        self.push(Kind.DESCRIPTION, CandidateEvent(kind, frozenset(objs)))

    def op_filter_collision(self, _):
        self._kind_filter("filter_collision")

    def op_filter_in(self, _):
        self._kind_filter("filter_in")

    def op_filter_out(self, _):
        self._kind_filter("filter_out")

    def _temporal(self, after: bool):
        anchor = self.pop(Kind.EVENT, Kind.FRAME)
        evs = self.pop(Kind.EVENTS).data
        if anchor.kind is Kind.EVENT:
            key = _order_key(anchor.data)
            keep = [e for e in evs if (_order_key(e) > key if after else _order_key(e) < key)]
        else:
            keep = [e for e in evs if (e.tick > anchor.data if after else e.tick < anchor.data)]
        self.events_of(keep)

    def op_filter_before(self, _):
        self._temporal(False)

    def op_filter_after(self, _):
        self._temporal(True)

    def op_filter_order(self, arg):
        evs = self.pop(Kind.EVENTS).data
        if arg == "last":
            k = len(evs)
        else:
            k = ORDINALS.get(arg) or int(arg)
        if not 1 <= k <= len(evs):
            raise self.fail(f"no event of order {arg} in a set of {len(evs)}")
        self.push(Kind.EVENT, evs[k - 1])

    def op_first(self, _):
        self.op_filter_order("first")

    def op_last(self, _):
        self.op_filter_order("last")

    def op_get_frame(self, _):
        self.push(Kind.FRAME, self.pop(Kind.EVENT).data.tick)

    # -- reductions ---------------------------------------------------------

    def op_count(self, _):
        self.push(Kind.INT, len(self.pop(Kind.OBJECTS, Kind.EVENTS).data))

    def op_exist(self, _):
        self.push(Kind.BOOL, len(self.pop(Kind.OBJECTS, Kind.EVENTS).data) > 0)

    def op_unique(self, _):
        v = self.pop(Kind.OBJECTS, Kind.EVENTS)
        if len(v.data) != 1:
            raise self.fail(f"unique on a set of size {len(v.data)}")
        self.push(Kind.OBJECT if v.kind is Kind.OBJECTS else Kind.EVENT, v.data[0])

    def op_belong_to(self, _):
        group = self.pop(Kind.OBJECTS, Kind.EVENTS)
        item = self.pop(Kind.OBJECT if group.kind is Kind.OBJECTS else Kind.EVENT)
        self.push(Kind.BOOL, item.data in group.data)

    def _query(self, attr: str):
        oid = self.pop(Kind.OBJECT).data
        self.push(Kind.ATTR, getattr(self.ctx.scene.object(oid), attr))

    def op_query_color(self, _):
        self._query("color")

    def op_query_material(self, _):
        self._query("material")

    def op_query_shape(self, _):
        self._query("shape")

    def op_negate(self, _):
        self.push(Kind.BOOL, not self.pop(Kind.BOOL).data)

    # -- causal bridges -----------------------------------------------------

    def op_get_col_partner(self, _):
        oid = self.pop(Kind.OBJECT).data
        self.objects_of(self.ctx.events.collision_partners(oid))

    def op_get_counterfact(self, _):
        removed = self.pop(Kind.OBJECT).data
        target = self.pop(Kind.EVENT, Kind.DESCRIPTION).data
        ans = answer_cf(target, removed, self.ctx.events, emergent=self.ctx.emergent)
        self.push(Kind.BOOL, ans.occurs_in_cf)


def exec_program(program: Program | Sequence[str], ctx: Context | Scene) -> Value:
    """Run ``program``; the single value left on the stack is the answer."""
    if not isinstance(program, Program):
        program = Program.parse(program)
    if isinstance(ctx, Scene):
        ctx = Context.of(ctx)
    return _Machine(ctx).run(program)
