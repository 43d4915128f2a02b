"""Command-line entry point.

Exit codes: 0 success, 1 input error, 2 property violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Sequence, TypeVar

from eventgraph import clevrer, duality, report, synthetic, village
from eventgraph.kinematics import CONFIGS, KinematicConfig
from eventgraph.scene import IngestError
from eventgraph.stats import PairedOutcomes, aggregate

EXIT_OK, EXIT_INPUT, EXIT_PROPERTY = 0, 1, 2

T = TypeVar("T")
R = TypeVar("R")


class InputError(Exception):
    pass


def pmap(fn: Callable[[T], R], items: Sequence[T], jobs: int, initializer=None, initargs=()) -> list[R]:
    """Order-preserving map, in-process for ``jobs <= 1``."""
    if jobs <= 1 or len(items) <= 1:
        if initializer is not None:
            initializer(*initargs)
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs, initializer=initializer, initargs=initargs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def _out_dir(path: str | None) -> Path:
    out = Path(path or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- eval-clevrer -----------------------------------------------------------------


def kinematic_config(args: argparse.Namespace) -> KinematicConfig:
    base = CONFIGS[args.kinematic]
    return KinematicConfig(
        args.velocity_window if args.velocity_window is not None else base.velocity_window,
        args.tau if args.tau is not None else base.tau,
        args.horizon if args.horizon is not None else base.horizon,
    )


def _eval_task(task) -> list[clevrer.EvalRecord]:
    scene, questions, ablation, kin = task
    return clevrer.evaluate_scene(scene, questions, ablation, kin)


def cmd_eval_clevrer(args: argparse.Namespace) -> int:
    try:
        scenes = clevrer.load_annotations(args.input)
        questions = clevrer.load_questions(args.questions)
        ablation = clevrer.Ablation.parse(args.ablate or [])
        kin = kinematic_config(args)
    except (IngestError, ValueError, OSError) as exc:
        raise InputError(str(exc)) from None
    families = set(args.families or [f.value for f in clevrer.Family])
    unknown = families - {f.value for f in clevrer.Family}
    if unknown:
        raise InputError(f"unknown families: {sorted(unknown)}")
    by_scene: dict[str, list[clevrer.QuestionRecord]] = {}
    for q in questions:
        if q.family.value not in families:
            continue
        if q.scene_id not in scenes:
            raise InputError(f"question {q.question_id} refers to missing scene {q.scene_id}")
        by_scene.setdefault(q.scene_id, []).append(q)
    tasks = [(scenes[sid], qs, ablation, kin) for sid, qs in sorted(by_scene.items())]
    records = [r for chunk in pmap(_eval_task, tasks, args.jobs) for r in chunk]
    records.sort(key=lambda r: clevrer.question_sort_key(r.question_id))
    out = _out_dir(args.out)
    report.write_lines(out / "results.jsonl", (r.dumps() for r in records))
    groups = aggregate(r.to_row() for r in records)
    report.write_lines(out / "summary.tsv", report.clevrer_summary(groups))
    fams = list(report.FAMILY_ORDER)
    cells = [groups.get(f) for f in fams]
    report.bar_figure(
        out / "summary.png",
        fams,
        {
            "per-question": [(g.correct_questions, g.questions) if g else (0, 0) for g in cells],
            "per-option": [(g.correct_options, g.options) if g else (0, 0) for g in cells],
        },
        "CLEVRER accuracy by family",
    )
    for line in report.clevrer_summary(groups):
        print(line)
    return EXIT_OK


# -- twin -----------------------------------------------------------------------

_TWIN: village.Twin | None = None


def _init_twin(world_text: str) -> None:
    global _TWIN
    _TWIN = village.Twin(village.VillageWorld.loads(world_text))


def _twin_task(task) -> village.TwinResult:
    master_seed, spec_id, external = task
    spec = village.make_spec(_TWIN, master_seed, spec_id)
    b = _TWIN.arm_b(spec)
    return village.grade_twin(spec, _TWIN.arm_a, b, external)


def cmd_twin(args: argparse.Namespace) -> int:
    try:
        if args.input:
            world = village.VillageWorld.loads(Path(args.input).read_text(encoding="utf-8"))
        else:
            world = village.generate_world(args.world_seed)
        external = None
        if args.answers:
            external = village.load_external_answers(Path(args.answers).read_text(encoding="utf-8").splitlines())
            unknown = sorted(set(external) - set(range(args.count)))
            if unknown:
                raise InputError(f"external answers name unknown spec ids: {unknown}")
    except (village.WorldError, ValueError, OSError) as exc:
        raise InputError(str(exc)) from None
    tasks = [
        (args.seed, i, None if external is None else external.get(i, {}))
        for i in range(args.count)
    ]
    results = pmap(_twin_task, tasks, args.jobs, _init_twin, (world.dumps(),))
    out = _out_dir(args.out)
    report.write_lines(out / "world.txt", world.dumps().splitlines())
    report.write_lines(out / "specs.jsonl", (r.spec.dumps() for r in results))
    report.write_lines(out / "results.jsonl", (r.dumps() for r in results))
    summary = village.TwinSummary()
    for r in results:
        summary.add(r)
    cells = [
        ("all", "per_arm", summary.arm_correct, 2 * summary.n),
        ("all", "joint", summary.joint, summary.n),
        ("all", "divergence", summary.divergence, summary.n),
    ]
    for name in (l.value for l in village.LINKAGES):
        n, arm, joint, div = summary.by_linkage.get(name, [0, 0, 0, 0])
        cells += [(name, "per_arm", arm, 2 * n), (name, "joint", joint, n), (name, "divergence", div, n)]
    lines = report.twin_summary(cells)
    report.write_lines(out / "summary.tsv", lines)
    scopes = ["all", *(l.value for l in village.LINKAGES)]
    series = {m: [(k, n) for s, mm, k, n in cells if mm == m] for m in ("per_arm", "joint", "divergence")}
    report.bar_figure(out / "summary.png", scopes, series, "Twin-EventLog accuracy")
    for line in lines:
        print(line)
    return EXIT_OK


# -- duality --------------------------------------------------------------------


def cmd_duality(args: argparse.Namespace) -> int:
    rep = duality.run_suite(args.scenes, args.seed, args.identity, args.inject_fault, args.jobs)
    print(f"scenes\t{rep.scenes}")
    print(f"pairs\t{rep.pairs}")
    print(f"agree\t{rep.agree}")
    print(f"agreement_pct\t{report.percent_of(rep.agree, rep.pairs)}")
    print(f"excluded_removals\t{rep.excluded_removals}")
    if args.out:
        out = _out_dir(args.out)
        lines = report.tsv(
            ("scenes", "pairs", "agree", "excluded_removals"),
            [(rep.scenes, rep.pairs, rep.agree, rep.excluded_removals)],
        )
        report.write_lines(out / "duality.tsv", lines)
    if rep.ok:
        return EXIT_OK
    cx = rep.minimal_counterexample()
    if cx is None:
        print("no checkable pairs", file=sys.stderr)
        return EXIT_PROPERTY
    dump = cx.dump()
    if args.out:
        (Path(args.out) / "counterexample.json").write_text(dump + "\n", encoding="utf-8")
    print(f"disagreements\t{len(rep.counterexamples)}", file=sys.stderr)
    print(dump, file=sys.stderr)
    return EXIT_PROPERTY


# -- oracle-gen -----------------------------------------------------------------


def cmd_oracle_gen(args: argparse.Namespace) -> int:
    seeds = list(range(args.seed, args.seed + args.count))
    pairs = pmap(synthetic.generate, seeds, args.jobs)
    out = _out_dir(args.out)
    ann_dir = out / "annotations"
    ann_dir.mkdir(exist_ok=True)
    for seed, (ann, _) in zip(seeds, pairs):
        (ann_dir / f"synthetic-{seed}.json").write_text(json.dumps(ann) + "\n", encoding="utf-8")
    questions = [q for _, q in pairs]
    (out / "questions.json").write_text(json.dumps(questions, indent=1) + "\n", encoding="utf-8")
    print(f"scenes\t{len(seeds)}")
    print(f"questions\t{sum(len(q['questions']) for q in questions)}")
    return EXIT_OK


# -- stats ----------------------------------------------------------------------


def _read_rows(path: str) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{no}: {exc.msg}") from None
    return rows


def cmd_stats(args: argparse.Namespace) -> int:
    try:
        rows = _read_rows(args.input)
        groups = aggregate(rows)
    except (KeyError, ValueError, OSError) as exc:
        raise InputError(str(exc)) from None
    lines = report.clevrer_summary(groups)
    paired = None
    fams = list(report.FAMILY_ORDER)

    def per_question(g: dict) -> list[tuple[int, int]]:
        return [(g[f].correct_questions, g[f].questions) if f in g else (0, 0) for f in fams]

    series = {"input": per_question(groups)}
    if args.baseline:
        try:
            base_rows = _read_rows(args.baseline)
            series["baseline"] = per_question(aggregate(base_rows))
        except (KeyError, ValueError, OSError) as exc:
            raise InputError(str(exc)) from None
        base = {r["question_id"]: r for r in base_rows}
        mine = {r["question_id"]: r for r in rows}
        if set(base) != set(mine):
            raise InputError("input and baseline cover different question ids")
        ids = sorted(mine, key=clevrer.question_sort_key)
        if ids:
            paired = report.paired_summary(
                PairedOutcomes.from_bits([mine[i]["correct_question"] for i in ids], [base[i]["correct_question"] for i in ids])
            )
    if args.out:
        out = _out_dir(args.out)
        report.write_lines(out / "stats.tsv", lines)
        report.bar_figure(out / "stats.png", fams, series, "Per-question accuracy by family")
        if paired:
            report.write_lines(out / "paired.tsv", paired)
    for line in lines + (paired or []):
        print(line)
    return EXIT_OK


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="eventgraph",
        description="Event-graph question answering, twin-log benchmark and oracle checks.",
        epilog="Exit codes: 0 success, 1 input error, 2 property violation.",
    )
    p.add_argument("--config", help="JSON file of flag defaults (keys use underscores)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, jobs=True):
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int, default=0, help="master or first seed")
        if jobs:
            sp.add_argument("--jobs", type=int, default=1, help="worker processes; output is independent of it")

    e = sub.add_parser("eval-clevrer", help="answer and grade CLEVRER questions")
    e.add_argument("--input", required=True, help="annotation file or directory")
    e.add_argument("--questions", required=True)
    e.add_argument("--families", nargs="+")
    e.add_argument("--kinematic", choices=sorted(CONFIGS), default="C")
    e.add_argument("--tau", type=float)
    e.add_argument("--horizon", type=int)
    e.add_argument("--velocity-window", type=int)
    e.add_argument("--ablate", action="append", choices=["global-frame", "no-emergent"])
    common(e)
    e.set_defaults(func=cmd_eval_clevrer)

    t = sub.add_parser("twin", help="generate, simulate and grade twin-EventLog specs")
    t.add_argument("--input", help="world file (default: generated from --world-seed)")
    t.add_argument("--world-seed", type=int, default=0, help="seed of the generated world")
    t.add_argument("--count", type=int, default=500, help="number of specs")
    t.add_argument("--answers", help="external answers JSONL {spec_id, arm_a, arm_b}")
    common(t)
    t.set_defaults(func=cmd_twin)

    d = sub.add_parser("duality", help="oracle agreement suite for removal counterfactuals")
    d.add_argument("--scenes", "--count", dest="scenes", type=int, default=200)
    d.add_argument("--identity", choices=["step", "frame"], default="step",
                   help="oracle event identity: integrator step (default) or frame")
    d.add_argument("--inject-fault", action="store_true",
                   help="apply the partner heuristic to observed events (mutation check)")
    common(d)
    d.set_defaults(func=cmd_duality)

    g = sub.add_parser("oracle-gen", help="write a synthetic annotation and question corpus")
    g.add_argument("--count", type=int, default=200, help="number of scenes")
    common(g)
    g.set_defaults(func=cmd_oracle_gen)

    s = sub.add_parser("stats", help="summarize a results JSONL, optionally paired with a baseline")
    s.add_argument("--input", required=True)
    s.add_argument("--baseline")
    common(s, jobs=False)
    s.set_defaults(func=cmd_stats)
    return p


def parse_args(argv: Iterable[str] | None = None) -> argparse.Namespace:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    if args.config:
        try:
            defaults = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            parser.exit(EXIT_INPUT, f"eventgraph: config: {exc}\n")
        explicit = {a.split("=", 1)[0].lstrip("-").replace("-", "_") for a in argv if a.startswith("--")}
        for key, value in defaults.items():
            if not hasattr(args, key):
                parser.exit(EXIT_INPUT, f"eventgraph: config: unknown key {key!r} for {args.command}\n")
            if key not in explicit:
                setattr(args, key, value)
    return args


def main(argv: Iterable[str] | None = None) -> int:
    args = parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"eventgraph: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
