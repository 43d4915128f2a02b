"""Output writers: JSONL, fixed-column TSV summaries and PNG figures."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from eventgraph.stats import GroupCounts, PairedOutcomes, mcnemar_exact, newcombe_paired, percent, percent_of, wilson

FAMILY_ORDER = ("descriptive", "explanatory", "predictive", "counterfactual")

CLEVRER_COLUMNS = (
    "family", "questions", "correct_questions", "per_question_pct", "pq_ci_lo", "pq_ci_hi",
    "options", "correct_options", "per_option_pct", "po_ci_lo", "po_ci_hi",
)

TWIN_COLUMNS = ("scope", "metric", "k", "n", "pct", "ci_lo", "ci_hi")


def write_lines(path: str | Path, lines: Iterable[str]) -> None:
    text = "".join(line + "\n" for line in lines)
    Path(path).write_text(text, encoding="utf-8")


def tsv(header: Sequence[str], rows: Iterable[Sequence[object]]) -> list[str]:
    return ["\t".join(header), *("\t".join(str(c) for c in r) for r in rows)]


def _cell(k: int, n: int) -> list[str]:
    if n == 0:
        return [str(k), str(n), "-", "-", "-"]
    lo, hi = wilson(k, n)
    return [str(k), str(n), percent_of(k, n), percent(lo), percent(hi)]


def clevrer_summary(groups: Mapping[str, GroupCounts]) -> list[str]:
    """One row per family in canonical order, then any other groups, then the total."""
    names = [f for f in FAMILY_ORDER] + sorted(set(groups) - set(FAMILY_ORDER))
    rows = []
    total = GroupCounts()
    for name in names:
        g = groups.get(name, GroupCounts())
        total = total.merge(g)
        q = _cell(g.correct_questions, g.questions)
        o = _cell(g.correct_options, g.options)
        rows.append([name, q[1], q[0], *q[2:], o[1], o[0], *o[2:]])
    q = _cell(total.correct_questions, total.questions)
    o = _cell(total.correct_options, total.options)
    rows.append(["all", q[1], q[0], *q[2:], o[1], o[0], *o[2:]])
    return tsv(CLEVRER_COLUMNS, rows)


def twin_summary(cells: Sequence[tuple[str, str, int, int]]) -> list[str]:
    return tsv(TWIN_COLUMNS, ([scope, metric, *_cell(k, n)] for scope, metric, k, n in cells))


def paired_summary(pairs: PairedOutcomes) -> list[str]:
    lo, hi = newcombe_paired(pairs)
    p = mcnemar_exact(pairs.b, pairs.c) if pairs.b + pairs.c else 1.0
    header = ("n", "both", "a_only", "b_only", "neither", "diff_pp", "newcombe_lo", "newcombe_hi", "mcnemar_p")
    row = [pairs.n, pairs.both, pairs.b, pairs.c, pairs.neither,
           percent(pairs.difference), percent(lo), percent(hi), f"{p:.4g}"]
    return tsv(header, [row])


def bar_figure(
    path: str | Path,
    labels: Sequence[str],
    series: Mapping[str, Sequence[tuple[int, int]]],
    title: str,
) -> None:
    """Grouped bars of k/n percentages with Wilson error bars."""
    fig, ax = plt.subplots(figsize=(7, 4), dpi=100)
    width = 0.8 / max(1, len(series))
    for s, (name, cells) in enumerate(series.items()):
        xs, ys, err_lo, err_hi = [], [], [], []
        for i, (k, n) in enumerate(cells):
            if n == 0:
                continue
            lo, hi = wilson(k, n)
            p = k / n
            xs.append(i + (s - (len(series) - 1) / 2) * width)
            ys.append(100 * p)
            err_lo.append(100 * (p - lo))
            err_hi.append(100 * (hi - p))
        ax.bar(xs, ys, width, yerr=[err_lo, err_hi], capsize=3, label=name)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels)
    ax.set_ylim(0, 105)
    ax.set_ylabel("accuracy (%)")
    ax.set_title(title)
    if len(series) > 1:
        ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)
