"""Text tables and matplotlib figures for the reporting paths.

Figures land next to the delimited outputs they accompany: a perplexity
histogram plus a rank curve for score runs, and a bar chart of diagram
sizes for stats runs. Everything renders off-screen.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

from .compiler import MddStats
from .scoring import ScoredSentence


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def score_table(scored: Sequence[ScoredSentence], bands=(15.0, 30.0)) -> str:
    """Two-column text table of sentences sorted by PPL, with band counts
    underneath. Band thresholds are corpus- and model-dependent hints, not
    filters."""
    lines = ["rank  PPL       sentence", "-" * 64]
    for s in scored:
        lines.append(f"{s.rank:>4}  {s.ppl:<8.4g}  {s.text}")
    low, high = bands
    n_low = sum(1 for s in scored if s.ppl < low)
    n_mid = sum(1 for s in scored if low <= s.ppl < high)
    n_high = len(scored) - n_low - n_mid
    lines.append("-" * 64)
    lines.append(
        f"{len(scored)} sentences: {n_low} below PPL {low:g}, "
        f"{n_mid} in [{low:g}, {high:g}), {n_high} above"
    )
    if scored:
        lines.append(f"scorer: {scored[0].scorer_id}")
    return "\n".join(lines) + "\n"


def stats_table(rows: dict[str, MddStats]) -> str:
    """Aligned counts per diagram, one row each."""
    header = f"{'mdd':<16}{'arcs':>12}{'nodes':>12}{'solutions':>16}{'MB':>8}{'s':>9}"
    lines = [header, "-" * len(header)]
    for name, st in rows.items():
        mb = st.structure_bytes / 1e6
        secs = "" if st.elapsed_seconds is None else f"{st.elapsed_seconds:.2f}"
        lines.append(
            f"{name:<16}{st.arcs:>12}{st.nodes:>12}{str(st.solutions):>16}"
            f"{mb:>8.1f}{secs:>9}"
        )
    return "\n".join(lines) + "\n"


def render_score_figures(
    scored: Sequence[ScoredSentence],
    out_base: Path,
    bands=(15.0, 30.0),
) -> list[Path]:
    """PPL histogram and rank curve as PNGs next to the scored output."""
    if not scored:
        return []
    plt = _pyplot()
    out_base = Path(out_base)
    values = [s.ppl for s in scored]
    written = []

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(values, bins=min(40, max(10, len(values) // 5)), color="#4878d0")
    for b, style in zip(bands, (":", "--")):
        ax.axvline(b, color="#d65f5f", linestyle=style, label=f"band {b:g}")
    ax.set_xlabel("perplexity")
    ax.set_ylabel("sentences")
    ax.set_title("Perplexity distribution")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    hist_path = out_base.with_name(out_base.name + "_hist.png")
    fig.savefig(hist_path, dpi=120)
    plt.close(fig)
    written.append(hist_path)

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(range(1, len(values) + 1), values, color="#4878d0", lw=1.2)
    ax.set_xlabel("rank")
    ax.set_ylabel("perplexity")
    ax.set_yscale("log")
    ax.set_title("Score by rank")
    fig.tight_layout()
    curve_path = out_base.with_name(out_base.name + "_rank.png")
    fig.savefig(curve_path, dpi=120)
    plt.close(fig)
    written.append(curve_path)
    return written


def render_stats_figure(rows: dict[str, MddStats], out_path: Path) -> Path:
    """Grouped log-scale bars for arcs, nodes, and solutions per diagram."""
    plt = _pyplot()
    out_path = Path(out_path)
    names = list(rows)
    metrics = ("arcs", "nodes", "solutions")
    fig, ax = plt.subplots(figsize=(6, 4))
    width = 0.8 / len(metrics)
    for k, metric in enumerate(metrics):
        values = [max(1, int(getattr(rows[name], metric))) for name in names]
        ax.bar(
            [i + k * width for i in range(len(names))],
            values,
            width=width,
            label=metric,
        )
    ax.set_xticks([i + width for i in range(len(names))])
    ax.set_xticklabels(names, rotation=20, ha="right", fontsize=8)
    ax.set_yscale("log")
    ax.set_ylabel("count (log)")
    ax.set_title("Diagram sizes")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def validation_table(rows: list[dict]) -> str:
    lines = [
        f"{'line':<6}{'words':>6}{'chars':>6}  {'count':<6}{'budget':<7}"
        f"{'display':<8}verdict",
        "-" * 60,
    ]
    for r in rows:
        lines.append(
            f"{r['line']:<6}{r['word_count']:>6}{r['char_count']:>6}  "
            f"{_mark(r['word_count_ok']):<6}{_mark(r['char_budget_ok']):<7}"
            f"{_mark(r['display_ok']):<8}{'pass' if r['passed'] else 'FAIL'}"
        )
    return "\n".join(lines) + "\n"


def _mark(ok: bool) -> str:
    return "ok" if ok else "no"
