"""Synthetic CLEVRER-format corpus: oracle scenes plus oracle-graded questions."""

from __future__ import annotations

from eventgraph import oracle

MAX_CHOICES = 4


def _pick(color: str) -> list[str]:
    return ["objects", f"filter_color={color}", "unique"]


def scene_questions(seed: int, scene: oracle.DiscScene, full: oracle.OracleTrace) -> dict:
    """Question entry for one scene; gold answers come from re-simulation."""
    color = {d: oracle.COLORS[d % len(oracle.COLORS)] for d in full.ids}
    shape = {d: oracle.SHAPES[d % len(oracle.SHAPES)] for d in full.ids}
    questions = [
        {
            "question_id": 0,
            "question_type": "descriptive",
            "program": ["events", "filter_collision", "count"],
            "answer": str(len(full.collisions)),
        }
    ]
    for d in full.ids:
        questions.append(
            {
                "question_id": len(questions),
                "question_type": "descriptive",
                "program": _pick(color[d]) + ["query_shape"],
                "answer": shape[d],
            }
        )
    observed = full.collision_pairs()
    for x in full.ids:
        cf = oracle.run_without(scene, x)
        after = cf.collision_pairs()
        pairs = sorted(p for p in observed | after if x not in p)[:MAX_CHOICES]
        if not pairs:
            continue
        questions.append(
            {
                "question_id": len(questions),
                "question_type": "counterfactual",
                "program": _pick(color[x]),
                "choices": [
                    {
                        "choice_id": k,
                        "program": _pick(color[a]) + _pick(color[b]) + ["filter_collision"],
                        "answer": "correct" if (a, b) in after else "wrong",
                    }
                    for k, (a, b) in enumerate(pairs)
                ],
            }
        )
    return {"scene_index": f"synthetic-{seed}", "questions": questions}


def generate(seed: int) -> tuple[dict, dict]:
    """``(annotation, question entry)`` for the scene drawn from ``seed``."""
    scene = oracle.random_scene(seed)
    full = oracle.run(scene)
    return oracle.scene_annotation(scene, full), scene_questions(seed, scene, full)
