"""CLEVRER question loading, the four answering pathways, and grading."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from eventgraph.counterfactual import CandidateEvent, answer_cf
from eventgraph.events import Event, EventKind, EventSet, ancestors, events_from_scene
from eventgraph.kinematics import CONFIGS, KinematicConfig, predict_scene
from eventgraph.program import Context, ExecError, Kind, Program, ProgramError, Value, exec_program
from eventgraph.scene import IngestError, Scene, ingest_scene


class Family(str, Enum):
    DESCRIPTIVE = "descriptive"
    EXPLANATORY = "explanatory"
    PREDICTIVE = "predictive"
    COUNTERFACTUAL = "counterfactual"


class GradingError(RuntimeError):
    pass


@dataclass(frozen=True)
class Choice:
    choice_id: int
    program: Program
    gold: bool | None = None


@dataclass(frozen=True)
class QuestionRecord:
    question_id: str
    scene_id: str
    family: Family
    program: Program
    choices: tuple[Choice, ...] = ()
    gold: Any = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.family is Family.DESCRIPTIVE and self.choices:
            raise ValueError(f"descriptive question {self.question_id} has choices")
        if self.family is not Family.DESCRIPTIVE and not self.choices:
            raise ValueError(f"{self.family.value} question {self.question_id} has no choices")


@dataclass(frozen=True)
class Ablation:
    global_frame: bool = False
    no_emergent: bool = False

    @classmethod
    def parse(cls, names: Iterable[str]) -> Ablation:
        names = set(names)
        unknown = names - {"global-frame", "no-emergent"}
        if unknown:
            raise ValueError(f"unknown ablation(s): {sorted(unknown)}")
        return cls("global-frame" in names, "no-emergent" in names)


# -- loading --------------------------------------------------------------------


def canonical_answer(value: Any) -> Any:
    """Descriptive answer canonical form: bool, int or lowercase string."""
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, int):
        return value
    text = str(value).strip().lower()
    if text in ("yes", "true"):
        return True
    if text in ("no", "false"):
        return False
    if text.lstrip("-").isdigit():
        return int(text)
    return text


def _choice_gold(raw: Any) -> bool | None:
    if raw is None:
        return None
    if isinstance(raw, bool):
        return raw
    text = str(raw).strip().lower()
    if text in ("correct", "true", "yes"):
        return True
    if text in ("wrong", "false", "no"):
        return False
    raise ValueError(f"unrecognized choice answer {raw!r}")


def parse_questions(doc: Any, source: str = "<questions>") -> list[QuestionRecord]:
    """Records from a CLEVRER question document (a list of per-scene entries)."""
    if isinstance(doc, Mapping):
        doc = [doc]
    out = []
    for si, entry in enumerate(doc):
        scene_id = str(entry.get("scene_index", entry.get("scene_id", "")))
        for q in entry.get("questions", []):
            qid = f"{scene_id}:{q.get('question_id')}"
            try:
                choices = tuple(
                    Choice(int(c.get("choice_id", k)), Program.parse(c.get("program", []), strict=False), _choice_gold(c.get("answer")))
                    for k, c in enumerate(q.get("choices", []))
                )
                out.append(
                    QuestionRecord(
                        qid,
                        scene_id,
                        Family(q["question_type"]),
                        Program.parse(q.get("program", []), strict=False),
                        choices,
                        canonical_answer(q["answer"]) if "answer" in q else None,
                    )
                )
            except (ProgramError, ValueError, KeyError) as exc:
                raise ValueError(f"{source}: scene entry {si}, question {qid}: {exc}") from None
    return out


def load_questions(path: str | Path) -> list[QuestionRecord]:
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        return []
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}:{exc.lineno}: {exc.msg}") from None
    return parse_questions(doc, str(path))


def load_annotations(path: str | Path) -> dict[str, Scene]:
    """Scenes keyed by scene id from a file (one document or a list) or a directory tree of files."""
    path = Path(path)
    files = sorted(path.rglob("*.json")) if path.is_dir() else [path]
    scenes: dict[str, Scene] = {}
    for f in files:
        try:
            doc = json.loads(f.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise IngestError(f"{f}:{exc.lineno}: {exc.msg}") from None
        for d in doc if isinstance(doc, list) else [doc]:
            try:
                s = ingest_scene(d)
            except (IngestError, KeyError, TypeError) as exc:
                raise IngestError(f"{f}: {exc}") from None
            if s.scene_id in scenes:
                raise IngestError(f"{f}: duplicate scene {s.scene_id}")
            scenes[s.scene_id] = s
    return scenes


# -- answering ------------------------------------------------------------------


@dataclass
class SceneContext:
    scene: Scene
    events: EventSet
    ablation: Ablation = field(default_factory=Ablation)
    kinematic: KinematicConfig = CONFIGS["C"]
    _ctx: Context | None = None
    _predicted: set[tuple[str, str]] | None = None

    @classmethod
    def of(cls, scene: Scene, ablation: Ablation | None = None, kinematic: KinematicConfig | None = None) -> SceneContext:
        return cls(scene, events_from_scene(scene), ablation or Ablation(), kinematic or CONFIGS["C"])

    @property
    def ctx(self) -> Context:
        if self._ctx is None:
            self._ctx = Context(self.scene, self.events, emergent=not self.ablation.no_emergent)
        return self._ctx

    def run(self, program: Program) -> Value:
        return exec_program(program, self.ctx)

    @property
    def predicted(self) -> set[tuple[str, str]]:
        if self._predicted is None:
            self._predicted = predict_scene(self.scene, self.kinematic)
        return self._predicted


def _as_event_ref(v: Value) -> Event | CandidateEvent | str:
    if v.kind is Kind.EVENT:
        return v.data
    if v.kind is Kind.DESCRIPTION:
        return v.data
    if v.kind is Kind.OBJECT:
        return v.data
    if v.kind is Kind.EVENTS and len(v.data) == 1:
        return v.data[0]
    raise GradingError(f"choice program yields {v.kind.value}, not an event or object")


def resolve_target(v: Value, events: EventSet) -> Event:
    """Observed event named by a question program; earliest match for descriptions."""
    ref = _as_event_ref(v)
    if isinstance(ref, Event):
        return ref
    if isinstance(ref, CandidateEvent):
        found = sorted(ref.matches(events), key=Event.sort_key)
        if found:
            return found[0]
        raise GradingError(f"target {ref.describe()} is not an observed event")
    raise GradingError("target resolves to an object, not an event")


def answer_explanatory(q: QuestionRecord, sc: SceneContext) -> list[bool | None]:
    target = resolve_target(sc.run(q.program), sc.events)
    anc = ancestors(target, sc.events, global_frame=sc.ablation.global_frame)
    out: list[bool | None] = []
    for c in q.choices:
        try:
            ref = _as_event_ref(sc.run(c.program))
        except (ExecError, GradingError):
            out.append(None)
            continue
        if isinstance(ref, str):
            out.append(ref in anc.ancestor_objects)
        elif isinstance(ref, Event):
            out.append(ref in anc.ancestors)
        else:
            out.append(any(m in anc.ancestors for m in ref.matches(sc.events)))
    return out


def resolve_removed(v: Value) -> str:
    if v.kind is Kind.OBJECT:
        return v.data
    if v.kind is Kind.OBJECTS and len(v.data) == 1:
        return v.data[0]
    raise GradingError(f"removed object is ambiguous ({v.kind.value} of size {len(v.data) if v.kind is Kind.OBJECTS else '?'})")


def answer_counterfactual(q: QuestionRecord, sc: SceneContext) -> list[bool | None]:
    removed = resolve_removed(sc.run(q.program))
    out: list[bool | None] = []
    for c in q.choices:
        try:
            ref = _as_event_ref(sc.run(c.program))
        except (ExecError, GradingError):
            out.append(None)
            continue
        if isinstance(ref, str):
            out.append(None)
            continue
        ans = answer_cf(ref, removed, sc.events, emergent=not sc.ablation.no_emergent)
        out.append(ans.occurs_in_cf)
    return out


def answer_predictive(q: QuestionRecord, sc: SceneContext) -> list[bool | None]:
    predicted = sc.predicted
    out: list[bool | None] = []
    for c in q.choices:
        if len(c.program) == 0:
            out.append(not predicted)
            continue
        try:
            ref = _as_event_ref(sc.run(c.program))
        except (ExecError, GradingError):
            out.append(None)
            continue
        if isinstance(ref, (Event, CandidateEvent)) and ref.kind is EventKind.COLLISION:
            out.append(tuple(sorted(ref.objects)) in predicted)
        else:
            out.append(False)
    return out


_PATHWAYS = {
    Family.EXPLANATORY: answer_explanatory,
    Family.COUNTERFACTUAL: answer_counterfactual,
    Family.PREDICTIVE: answer_predictive,
}


# -- grading --------------------------------------------------------------------


@dataclass(frozen=True)
class EvalRecord:
    question_id: str
    family: str
    predicted: Any
    gold: Any
    per_option: tuple[int, ...]
    correct_question: int

    @property
    def correct_options(self) -> str:
        return f"{sum(self.per_option)}/{len(self.per_option)}"

    def to_row(self) -> dict:
        return {
            "question_id": self.question_id,
            "family": self.family,
            "predicted": self.predicted,
            "gold": self.gold,
            "per_option": list(self.per_option),
            "correct_question": self.correct_question,
            "correct_options": self.correct_options,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_row(), ensure_ascii=False, separators=(", ", ": "))


def grade(q: QuestionRecord, answer: Any) -> EvalRecord:
    """Score a descriptive value or a per-choice boolean list against gold."""
    if q.family is Family.DESCRIPTIVE:
        ok = answer is not None and canonical_answer(answer) == q.gold
        return EvalRecord(q.question_id, q.family.value, answer, q.gold, (), int(ok))
    gold = [c.gold for c in q.choices]
    if answer is None:
        answer = [None] * len(gold)
    per = tuple(int(a is not None and a == g) for a, g in zip(answer, gold))
    return EvalRecord(q.question_id, q.family.value, list(answer), gold, per, int(all(per)))


def answer_question(q: QuestionRecord, sc: SceneContext) -> Any:
    """Predicted answer; None when execution or grading fails."""
    try:
        if q.family is Family.DESCRIPTIVE:
            v = sc.run(q.program)
            if v.kind not in (Kind.INT, Kind.BOOL, Kind.ATTR, Kind.FRAME):
                raise GradingError(f"descriptive program yields {v.kind.value}")
            return v.render()
        return _PATHWAYS[q.family](q, sc)
    except (ExecError, GradingError):
        return None


def evaluate_scene(
    scene: Scene,
    questions: Sequence[QuestionRecord],
    ablation: Ablation | None = None,
    kinematic: KinematicConfig | None = None,
) -> list[EvalRecord]:
    sc = SceneContext.of(scene, ablation, kinematic)
    return [grade(q, answer_question(q, sc)) for q in questions]


def _natural(text: str) -> tuple:
    return tuple((0, int(p), "") if p.isdigit() else (1, 0, p) for p in text.split(":"))


def question_sort_key(qid: str) -> tuple:
    return _natural(qid)
