"""Agreement between removal counterfactuals and oracle re-simulation.

For each seeded disc scene the observed run is pushed through the ordinary
pipeline (annotation -> scene -> events) and, for every disc ``X`` whose
removal introduces no new collision, every observed event's predicted
divergence is compared with its absence from the re-simulation without ``X``.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from eventgraph import oracle
from eventgraph.counterfactual import answer_cf
from eventgraph.events import EventKind, events_from_scene
from eventgraph.scene import ingest_scene, object_id


@dataclass(frozen=True)
class Counterexample:
    seed: int
    removed: str
    event: str
    predicted_diverges: bool
    oracle_absent: bool
    n_discs: int
    n_collisions: int
    scene: dict

    def dump(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "removed": self.removed,
                "event": self.event,
                "predicted_diverges": self.predicted_diverges,
                "oracle_absent": self.oracle_absent,
                "scene": self.scene,
            },
            indent=2,
            sort_keys=True,
        )


@dataclass
class SceneResult:
    seed: int
    pairs: int = 0
    agree: int = 0
    excluded_removals: int = 0
    counterexamples: list[Counterexample] = field(default_factory=list)


@dataclass
class DualityReport:
    scenes: int = 0
    pairs: int = 0
    agree: int = 0
    excluded_removals: int = 0
    counterexamples: list[Counterexample] = field(default_factory=list)

    @property
    def rate(self) -> float:
        return self.agree / self.pairs if self.pairs else 1.0

    @property
    def ok(self) -> bool:
        return self.pairs > 0 and self.agree == self.pairs

    def add(self, r: SceneResult) -> None:
        self.scenes += 1
        self.pairs += r.pairs
        self.agree += r.agree
        self.excluded_removals += r.excluded_removals
        self.counterexamples.extend(r.counterexamples)

    def minimal_counterexample(self) -> Counterexample | None:
        if not self.counterexamples:
            return None
        return min(self.counterexamples, key=lambda c: (c.n_discs, c.n_collisions, c.seed, c.removed, c.event))


def check_scene(seed: int, identity: str = "step", inject_fault: bool = False) -> SceneResult:
    scene = oracle.random_scene(seed)
    full = oracle.run(scene)
    doc = oracle.scene_annotation(scene, full)
    events = events_from_scene(ingest_scene(doc))
    step_of = {(object_id(a), object_id(b), f): s for (a, b, f), s in zip(full.collisions, full.steps)}
    result = SceneResult(seed)
    for disc in scene.disc_ids():
        cf = oracle.run_without(scene, disc)
        if not oracle.satisfies_c3(scene, disc, full, cf, identity):
            result.excluded_removals += 1
            continue
        keys = cf.event_keys(identity)
        removed = object_id(disc)
        for e in events:
            if e.kind is EventKind.COLLISION:
                a, b = sorted(e.objects)
                stamp = step_of[(a, b, e.tick)] if identity == "step" else e.tick
                absent = (int(a[1:]), int(b[1:]), stamp) not in keys
            else:
                absent = removed in e.objects
            predicted = answer_cf(e, removed, events, emergent_on_observed=inject_fault).diverges
            result.pairs += 1
            if predicted == absent:
                result.agree += 1
            else:
                result.counterexamples.append(
                    Counterexample(seed, removed, e.id, predicted, absent,
                                   len(scene.discs), len(full.collisions), oracle.scene_to_json(scene))
                )
    return result


def _check(args: tuple[int, str, bool]) -> SceneResult:
    return check_scene(*args)


def run_suite(
    n_scenes: int = 200,
    seed: int = 0,
    identity: str = "step",
    inject_fault: bool = False,
    jobs: int = 1,
) -> DualityReport:
    """Check scenes ``seed .. seed + n_scenes - 1``; results merge in seed order."""
    work = [(s, identity, inject_fault) for s in range(seed, seed + n_scenes)]
    report = DualityReport()
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_check, work, chunksize=max(1, len(work) // (4 * jobs))))
    else:
        results = [_check(w) for w in work]
    for r in results:
        report.add(r)
    return report
