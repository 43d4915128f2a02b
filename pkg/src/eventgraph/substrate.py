"""Typed triple store with an append-only delta log.

State at tick ``t`` is the fold of every delta with ``tick < t`` over the
initial ABox.  Forking copies the prefix before a branch tick, lowers an
intervention to ordinary deltas and lets a caller-supplied continuation emit
the remainder of the counterfactual log.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Iterator, Mapping, Sequence, Union

logger = logging.getLogger(__name__)

LOCATED_AT = "ex:locatedAt"
KNOWS = "ex:knows"

LITERAL_KINDS = ("int", "dec", "bool", "text")


class SubstrateError(Exception):
    pass


class OrderingError(SubstrateError):
    pass


class TBoxViolation(SubstrateError):
    def __init__(self, triple: Triple, reason: str):
        super().__init__(f"{reason}: {triple}")
        self.triple = triple
        self.reason = reason


class OutOfRange(SubstrateError):
    pass


@dataclass(frozen=True, order=True)
class Literal:
    """Typed literal stored in normalized form.

    ``dec`` values keep the shortest round-trip text of the float so that two
    numerically equal decimals serialize identically.
    """

    kind: str
    lexical: str

    @classmethod
    def of(cls, value: Union[bool, int, float, str]) -> Literal:
        if isinstance(value, bool):
            return cls("bool", "true" if value else "false")
        if isinstance(value, int):
            return cls("int", str(value))
        if isinstance(value, float):
            return cls("dec", repr(float(value)))
        return cls("text", value)

    @classmethod
    def parse(cls, kind: str, lexical: str) -> Literal:
        if kind == "int":
            return cls(kind, str(int(lexical)))
        if kind == "dec":
            return cls(kind, repr(float(lexical)))
        if kind == "bool":
            if lexical not in ("true", "false"):
                raise ValueError(f"bad boolean literal {lexical!r}")
            return cls(kind, lexical)
        if kind == "text":
            return cls(kind, lexical)
        raise ValueError(f"unknown literal kind {kind!r}")

    @property
    def value(self) -> Union[bool, int, float, str]:
        if self.kind == "int":
            return int(self.lexical)
        if self.kind == "dec":
            return float(self.lexical)
        if self.kind == "bool":
            return self.lexical == "true"
        return self.lexical

    def __str__(self) -> str:
        return f'"{self.lexical}"^^{self.kind}'


Term = Union[str, Literal]


def term_key(term: Term) -> tuple:
    """Total order over terms: IRIs first (lexicographic), then literals."""
    if isinstance(term, Literal):
        return (1, term.kind, term.lexical)
    return (0, term, "")


def term_kind(term: Term) -> str:
    return term.kind if isinstance(term, Literal) else "iri"


@dataclass(frozen=True)
class Triple:
    subject: str
    predicate: str
    object: Term

    def __post_init__(self):
        if not isinstance(self.subject, str) or not self.subject:
            raise ValueError("triple subject must be a non-empty IRI")
        if not isinstance(self.predicate, str) or not self.predicate:
            raise ValueError("triple predicate must be a non-empty IRI")
        if isinstance(self.object, str):
            if not self.object:
                raise ValueError("triple object IRI must be non-empty")
        elif not isinstance(self.object, Literal):
            raise TypeError(f"triple object must be an IRI or Literal, got {type(self.object).__name__}")

    def sort_key(self) -> tuple:
        return (self.subject, self.predicate, term_key(self.object))

    def __str__(self) -> str:
        return f"({self.subject} {self.predicate} {self.object})"


@dataclass
class TBox:
    classes: set[str] = field(default_factory=set)
    signatures: dict[str, tuple[str, str]] = field(default_factory=dict)

    def declare_class(self, iri: str) -> None:
        self.classes.add(iri)

    def declare(self, predicate: str, domain: str, range_: str) -> None:
        self.signatures[predicate] = (domain, range_)

    def check(self, triple: Triple) -> None:
        """Raise :class:`TBoxViolation` if ``triple`` breaks a predicate signature."""
        sig = self.signatures.get(triple.predicate)
        if sig is None:
            raise TBoxViolation(triple, "predicate has no signature")
        range_ = sig[1]
        kind = term_kind(triple.object)
        if range_ in LITERAL_KINDS:
            if kind != range_:
                raise TBoxViolation(triple, f"object must be a {range_} literal")
        elif kind != "iri":
            raise TBoxViolation(triple, f"object must be an IRI of class {range_}")

    @classmethod
    def parse(cls, text: str) -> TBox:
        tbox = cls()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "class" and len(parts) == 2:
                tbox.declare_class(parts[1])
            elif parts[0] == "pred" and len(parts) == 4:
                tbox.declare(parts[1], parts[2], parts[3])
            else:
                raise ValueError(f"line {lineno}: cannot parse TBox declaration {raw!r}")
        return tbox

    def dumps(self) -> str:
        lines = [f"class {c}" for c in sorted(self.classes)]
        lines += [f"pred {p} {d} {r}" for p, (d, r) in sorted(self.signatures.items())]
        return "".join(line + "\n" for line in lines)


class Op(str, Enum):
    INSERT = "insert"
    RETRACT = "retract"


@dataclass(frozen=True)
class Delta:
    tick: int
    op: Op
    triple: Triple
    provenance: str = "observed"

    def __post_init__(self):
        if self.tick < 0:
            raise ValueError("delta tick must be non-negative")
        object.__setattr__(self, "op", Op(self.op))


@dataclass(frozen=True)
class Snapshot:
    tick: int
    triples: frozenset[Triple]

    def __contains__(self, triple: Triple) -> bool:
        return triple in self.triples

    def __len__(self) -> int:
        return len(self.triples)

    def sorted(self) -> list[Triple]:
        return sorted(self.triples, key=Triple.sort_key)

    def objects(self, subject: str, predicate: str) -> list[Term]:
        return sorted(
            (t.object for t in self.triples if t.subject == subject and t.predicate == predicate),
            key=term_key,
        )


class Verb(str, Enum):
    ASSERT = "Assert"
    RETRACT = "Retract"
    OVERRIDE_LOCATION = "OverrideLocation"
    ASSERT_AWARENESS = "AssertAwareness"
    RETRACT_AWARENESS = "RetractAwareness"


@dataclass(frozen=True)
class Intervention:
    """One of the five structured interventions.

    ``Assert``/``Retract`` carry a :class:`Triple`; the other three carry an
    ``(agent, location)`` or ``(agent, fact)`` pair of IRIs.
    """

    verb: Verb
    payload: Union[Triple, tuple[str, str]]

    def __post_init__(self):
        object.__setattr__(self, "verb", Verb(self.verb))
        if self.verb in (Verb.ASSERT, Verb.RETRACT):
            if not isinstance(self.payload, Triple):
                raise ValueError(f"{self.verb.value} needs a Triple payload")
        else:
            if (
                not isinstance(self.payload, tuple)
                or len(self.payload) != 2
                or not all(isinstance(p, str) and p for p in self.payload)
            ):
                raise ValueError(f"{self.verb.value} needs an (agent, target) IRI pair")

    @classmethod
    def assert_(cls, triple: Triple) -> Intervention:
        return cls(Verb.ASSERT, triple)

    @classmethod
    def retract(cls, triple: Triple) -> Intervention:
        return cls(Verb.RETRACT, triple)

    @classmethod
    def override_location(cls, agent: str, location: str) -> Intervention:
        return cls(Verb.OVERRIDE_LOCATION, (agent, location))

    @classmethod
    def assert_awareness(cls, agent: str, fact: str) -> Intervention:
        return cls(Verb.ASSERT_AWARENESS, (agent, fact))

    @classmethod
    def retract_awareness(cls, agent: str, fact: str) -> Intervention:
        return cls(Verb.RETRACT_AWARENESS, (agent, fact))

    def to_json(self) -> dict:
        if isinstance(self.payload, Triple):
            t = self.payload
            obj = t.object
            payload = [t.subject, t.predicate, obj.lexical if isinstance(obj, Literal) else obj, term_kind(obj)]
        else:
            payload = list(self.payload)
        return {"verb": self.verb.value, "payload": payload}

    @classmethod
    def from_json(cls, data: Mapping) -> Intervention:
        verb = Verb(data["verb"])
        payload = data["payload"]
        if verb in (Verb.ASSERT, Verb.RETRACT):
            s, p, o, kind = payload
            obj: Term = o if kind == "iri" else Literal.parse(kind, o)
            return cls(verb, Triple(s, p, obj))
        return cls(verb, (payload[0], payload[1]))

    def lower(self, state: frozenset[Triple] | Snapshot) -> list[tuple[Op, Triple]]:
        """Translate into set operations against ``state``."""
        triples = state.triples if isinstance(state, Snapshot) else state
        if self.verb is Verb.ASSERT:
            return [(Op.INSERT, self.payload)]
        if self.verb is Verb.RETRACT:
            return [(Op.RETRACT, self.payload)]
        agent, target = self.payload
        if self.verb is Verb.OVERRIDE_LOCATION:
            old = sorted(
                (t for t in triples if t.subject == agent and t.predicate == LOCATED_AT and t.object != target),
                key=Triple.sort_key,
            )
            return [(Op.RETRACT, t) for t in old] + [(Op.INSERT, Triple(agent, LOCATED_AT, target))]
        triple = Triple(agent, KNOWS, target)
        if self.verb is Verb.ASSERT_AWARENESS:
            return [(Op.INSERT, triple)]
        return [(Op.RETRACT, triple)]


@dataclass
class ReplayStats:
    applied: int = 0
    noops: int = 0


class EventLog:
    """Initial ABox plus an append-only, tick-ordered sequence of deltas.

    ``horizon`` is an optional declared bound on replayable ticks; without it
    the bound is one past the last delta tick (unbounded for an empty log).
    """

    def __init__(
        self,
        initial: Iterable[Triple] = (),
        tbox: TBox | None = None,
        horizon: int | None = None,
    ):
        self.tbox = tbox
        self.initial: frozenset[Triple] = frozenset(initial)
        if tbox is not None:
            for t in sorted(self.initial, key=Triple.sort_key):
                tbox.check(t)
        self.horizon = horizon
        self.warnings: list[str] = []
        self._deltas: list[Delta] = []

    @property
    def deltas(self) -> tuple[Delta, ...]:
        return tuple(self._deltas)

    def __len__(self) -> int:
        return len(self._deltas)

    def __iter__(self) -> Iterator[Delta]:
        return iter(self._deltas)

    @property
    def last_tick(self) -> int | None:
        return self._deltas[-1].tick if self._deltas else None

    def max_tick(self) -> int | None:
        """Largest replayable tick, or None when unbounded."""
        if self.horizon is not None:
            return self.horizon
        if not self._deltas:
            return None
        return self._deltas[-1].tick + 1

    def append(self, delta: Delta) -> EventLog:
        last = self.last_tick
        if last is not None and delta.tick < last:
            raise OrderingError(f"delta tick {delta.tick} precedes last appended tick {last}")
        if self.tbox is not None:
            self.tbox.check(delta.triple)
        self._deltas.append(delta)
        return self

    def extend(self, deltas: Iterable[Delta]) -> EventLog:
        for d in deltas:
            self.append(d)
        return self

    def insert(self, tick: int, triple: Triple, provenance: str = "observed") -> EventLog:
        return self.append(Delta(tick, Op.INSERT, triple, provenance))

    def retract(self, tick: int, triple: Triple, provenance: str = "observed") -> EventLog:
        return self.append(Delta(tick, Op.RETRACT, triple, provenance))

    def prefix_length(self, tick: int) -> int:
        """Number of deltas with ``delta.tick < tick``."""
        lo, hi = 0, len(self._deltas)
        while lo < hi:
            mid = (lo + hi) // 2
            if self._deltas[mid].tick < tick:
                lo = mid + 1
            else:
                hi = mid
        return lo

    def copy_prefix(self, tick: int) -> EventLog:
        new = EventLog(self.initial, self.tbox, self.horizon)
        new._deltas = self._deltas[: self.prefix_length(tick)]
        return new

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EventLog):
            return NotImplemented
        return self.initial == other.initial and self._deltas == other._deltas

    def __repr__(self) -> str:
        return f"EventLog(initial={len(self.initial)} triples, deltas={len(self._deltas)})"


def apply(state: set[Triple], op: Op, triple: Triple, stats: ReplayStats | None = None) -> bool:
    """Apply one set operation in place; returns whether the set changed."""
    if stats is not None:
        stats.applied += 1
    if op is Op.INSERT:
        changed = triple not in state
        state.add(triple)
    else:
        changed = triple in state
        state.discard(triple)
    if not changed and stats is not None:
        stats.noops += 1
    return changed


def replay(log: EventLog, tick: int, stats: ReplayStats | None = None) -> Snapshot:
    """Fold the deltas with ``tick' < tick`` over the initial ABox."""
    if tick < 0:
        raise OutOfRange(f"tick {tick} is negative")
    bound = log.max_tick()
    if bound is not None and tick > bound:
        raise OutOfRange(f"tick {tick} beyond log horizon {bound}")
    state = set(log.initial)
    for delta in log.deltas[: log.prefix_length(tick)]:
        apply(state, delta.op, delta.triple, stats)
    return Snapshot(tick, frozenset(state))


def snapshots(log: EventLog, ticks: Iterable[int]) -> Iterator[Snapshot]:
    """Replay once, yielding snapshots at increasing ``ticks``."""
    state = set(log.initial)
    i = 0
    deltas = log.deltas
    for tick in ticks:
        while i < len(deltas) and deltas[i].tick < tick:
            apply(state, deltas[i].op, deltas[i].triple)
            i += 1
        yield Snapshot(tick, frozenset(state))


Continuation = Callable[[Snapshot], Iterable[Delta]]


def fork(
    log: EventLog,
    branch_tick: int,
    iota: Intervention | None,
    continuation: Continuation | None = None,
) -> EventLog:
    """Counterfactual log: prefix before ``branch_tick``, intervention, continuation.

    The intervention is lowered against the replayed state at the branch tick
    and recorded as deltas at ``branch_tick`` with provenance ``intervention``.
    The continuation receives the intervened snapshot and must only emit
    deltas at ticks ``>= branch_tick``.
    """
    bound = log.max_tick()
    if branch_tick < 0 or (bound is not None and branch_tick > bound):
        raise OutOfRange(f"branch tick {branch_tick} outside [0, {bound}]")
    forked = log.copy_prefix(branch_tick)
    state = set(replay(log, branch_tick).triples)
    if iota is not None:
        for op, triple in iota.lower(frozenset(state)):
            if op is Op.RETRACT and triple not in state:
                msg = f"retract of absent triple {triple} at tick {branch_tick} is a no-op"
                forked.warnings.append(msg)
                logger.warning(msg)
            forked.append(Delta(branch_tick, op, triple, "intervention"))
            apply(state, op, triple)
    if continuation is not None:
        for delta in continuation(Snapshot(branch_tick, frozenset(state))):
            if delta.tick < branch_tick:
                raise OrderingError(f"continuation emitted tick {delta.tick} before branch {branch_tick}")
            forked.append(delta)
    return forked


# -- pattern matching ---------------------------------------------------------

Pattern = tuple[Term, Term, Term]


def is_var(term: Term) -> bool:
    return isinstance(term, str) and term.startswith("?") and len(term) > 1


def _unify(pattern: Pattern, triple: Triple, binding: dict[str, Term]) -> dict[str, Term] | None:
    out = dict(binding)
    for pat, val in zip(pattern, (triple.subject, triple.predicate, triple.object)):
        if is_var(pat):
            bound = out.get(pat[1:])
            if bound is None:
                out[pat[1:]] = val
            elif bound != val:
                return None
        elif pat != val:
            return None
    return out


def _binding_key(binding: Mapping[str, Term]) -> tuple:
    return tuple((k, term_key(binding[k])) for k in sorted(binding))


def match(snapshot: Snapshot | Iterable[Triple], pattern: Pattern) -> list[dict[str, Term]]:
    """All bindings of ``pattern`` against the snapshot in canonical order.

    Variables are strings starting with ``?``.  A fully ground pattern yields
    ``[{}]`` when present and ``[]`` otherwise.
    """
    return match_all(snapshot, [pattern])


def match_all(snapshot: Snapshot | Iterable[Triple], patterns: Sequence[Pattern]) -> list[dict[str, Term]]:
    """Conjunctive (basic graph pattern) matching."""
    triples = snapshot.triples if isinstance(snapshot, Snapshot) else frozenset(snapshot)
    by_pred: dict[str, list[Triple]] = {}
    for t in triples:
        by_pred.setdefault(t.predicate, []).append(t)
    bindings: list[dict[str, Term]] = [{}]
    for pattern in patterns:
        pred = pattern[1]
        next_bindings = []
        for b in bindings:
            if is_var(pred):
                p = b.get(pred[1:])
                candidates = by_pred.get(p, []) if p is not None else triples
            else:
                candidates = by_pred.get(pred, [])
            for t in candidates:
                nb = _unify(pattern, t, b)
                if nb is not None:
                    next_bindings.append(nb)
        bindings = next_bindings
        if not bindings:
            break
    unique = {_binding_key(b): b for b in bindings}
    return [unique[k] for k in sorted(unique)]


# -- serialization ------------------------------------------------------------

_ESCAPES = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "\r": "\\r"}


def _escape(text: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in text)


def _unescape(text: str) -> str:
    out = []
    it = iter(text)
    for ch in it:
        if ch == "\\":
            nxt = next(it, "")
            out.append({"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}.get(nxt, nxt))
        else:
            out.append(ch)
    return "".join(out)


def _triple_fields(triple: Triple) -> list[str]:
    obj = triple.object
    lex = obj.lexical if isinstance(obj, Literal) else obj
    return [_escape(triple.subject), _escape(triple.predicate), _escape(lex), term_kind(obj)]


def dumps_log(log: EventLog) -> str:
    """Byte-stable text form: initial ABox (sorted) then deltas in log order.

    Delta lines are ``tick op subject predicate object objectKind``; a seventh
    column is written only for non-default provenance.
    """
    lines = []
    for t in sorted(log.initial, key=Triple.sort_key):
        lines.append("\t".join(["-", "init", *_triple_fields(t)]))
    for d in log.deltas:
        cols = [str(d.tick), d.op.value, *_triple_fields(d.triple)]
        if d.provenance != "observed":
            cols.append(_escape(d.provenance))
        lines.append("\t".join(cols))
    return "".join(line + "\n" for line in lines)


def loads_log(text: str, tbox: TBox | None = None) -> EventLog:
    initial = []
    deltas = []
    for lineno, line in enumerate(text.split("\n"), 1):
        if not line:
            continue
        cols = line.split("\t")
        if len(cols) not in (6, 7):
            raise ValueError(f"line {lineno}: expected 6 or 7 tab-separated fields")
        s, p, o, kind = (_unescape(c) for c in cols[2:6])
        obj: Term = o if kind == "iri" else Literal.parse(kind, o)
        triple = Triple(s, p, obj)
        if cols[1] == "init":
            initial.append(triple)
        else:
            prov = _unescape(cols[6]) if len(cols) == 7 else "observed"
            deltas.append(Delta(int(cols[0]), Op(cols[1]), triple, prov))
    log = EventLog(initial, tbox)
    log.extend(deltas)
    return log


def save_log(log: EventLog, path: str | Path) -> None:
    Path(path).write_bytes(dumps_log(log).encode("utf-8"))


def load_log(path: str | Path, tbox: TBox | None = None) -> EventLog:
    return loads_log(Path(path).read_bytes().decode("utf-8"), tbox)
