"""Figure rendering for experiment result rows.

The CSV output is the canonical artifact; these figures are an optional
convenience layer rendered next to it (CLI ``--plot``).  One PNG per
experiment, derived purely from the rows so plots and tables cannot drift.
"""

from __future__ import annotations

import math
import re

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .bench import ResultRow  # noqa: E402

_ITER_RE = re.compile(r"^objective_iter(\d+)$")
_BIN_RE = re.compile(r"^(mf|amf)_db_bin(\d+)$")


def _to_db(value: float) -> float:
    return 10.0 * math.log10(max(value, 1e-300))


def _plot_range_profile(rows: list[ResultRow], ax) -> None:
    series: dict[str, list[tuple[int, float]]] = {"mf": [], "amf": []}
    for row in rows:
        m = _BIN_RE.match(row.metric)
        if m:
            series[m.group(1)].append((int(m.group(2)), row.value))
    for kind, style in (("mf", "-"), ("amf", "--")):
        pts = sorted(series[kind])
        if pts:
            ax.plot([p[0] for p in pts], [p[1] for p in pts], style, label=kind.upper())
    ax.set_xlabel("range bin")
    ax.set_ylabel("output power (dB)")
    ax.legend()


def _plot_vs_axis(rows: list[ResultRow], ax, axis_label: str, key) -> None:
    series: dict[str, list[tuple[float, float, float]]] = {}
    for row in rows:
        if _ITER_RE.match(row.metric) or _BIN_RE.match(row.metric):
            continue
        series.setdefault(row.metric, []).append((key(row), row.value, row.stderr))
    for metric, pts in sorted(series.items()):
        pts.sort()
        xs = [p[0] for p in pts]
        ys = [_to_db(p[1]) for p in pts]
        if any(p[2] > 0 for p in pts):
            ax.errorbar(
                xs, ys,
                yerr=[3.0 * p[2] / max(p[1], 1e-300) * 10.0 / math.log(10.0) for p in pts],
                marker="o", capsize=3, label=metric,
            )
        else:
            ax.plot(xs, ys, marker="s", label=metric)
    ax.set_xlabel(axis_label)
    ax.set_ylabel("average SCNR (dB)")
    ax.legend(fontsize=8)


def _plot_vs_index(rows: list[ResultRow], ax, axis_label: str) -> None:
    series: dict[str, list[tuple[float, float]]] = {}
    for row in rows:
        series.setdefault(row.metric, []).append((row.value, row.stderr))
    for metric, pts in sorted(series.items()):
        xs = list(range(len(pts)))
        ax.plot(xs, [_to_db(v) for v, _ in pts], marker="o", label=metric)
    ax.set_xlabel(axis_label)
    ax.set_ylabel("average SCNR (dB)")
    ax.legend(fontsize=8)


def _plot_convergence(rows: list[ResultRow], ax) -> None:
    pts = []
    for row in rows:
        m = _ITER_RE.match(row.metric)
        if m:
            pts.append((int(m.group(1)), row.value, row.stderr))
    pts.sort()
    xs = [p[0] for p in pts]
    ys = [_to_db(p[1]) for p in pts]
    ax.plot(xs, ys, marker=".")
    if any(p[2] > 0 for p in pts):
        lo = [_to_db(max(p[1] - 3 * p[2], 1e-300)) for p in pts]
        hi = [_to_db(p[1] + 3 * p[2]) for p in pts]
        ax.fill_between(xs, lo, hi, alpha=0.25)
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective (dB)")


def _plot_by_category(rows: list[ResultRow], ax, label_of) -> None:
    series: dict[str, dict[str, float]] = {}
    cats: list[str] = []
    for row in rows:
        cat = label_of(row)
        if cat not in cats:
            cats.append(cat)
        series.setdefault(row.metric, {})[cat] = _to_db(row.value)
    width = 0.8 / max(len(series), 1)
    for i, (metric, values) in enumerate(sorted(series.items())):
        xs = [j + i * width for j in range(len(cats))]
        ax.bar(xs, [values.get(c, float("nan")) for c in cats], width=width, label=metric)
    ax.set_xticks([j + 0.4 - width / 2 for j in range(len(cats))])
    ax.set_xticklabels(cats)
    ax.set_ylabel("average SCNR (dB)")
    ax.legend(fontsize=8)


def render_figure(experiment: str, rows: list[ResultRow], path: str) -> None:
    """Render the standard figure for one experiment's rows to ``path``."""
    fig, ax = plt.subplots(figsize=(7.0, 4.5), dpi=150)
    if experiment == "range-profile":
        _plot_range_profile(rows, ax)
    elif experiment in ("validate-rmt",):
        _plot_vs_axis(rows, ax, "block length N", key=lambda r: r.n)
    elif experiment == "dpd-vs-Q":
        _plot_vs_axis(rows, ax, "clutter components Q", key=lambda r: r.q)
    elif experiment == "dpi-vs-power":
        _plot_vs_index(rows, ax, "pilot power sweep point")
    elif experiment in ("dpd-convergence", "dpi-convergence"):
        _plot_convergence(rows, ax)
    elif experiment == "compare-constellations":
        _plot_by_category(rows, ax, lambda r: r.constellation)
    elif experiment == "compare-bases":
        _plot_by_category(rows, ax, lambda r: r.basis)
    else:
        _plot_by_category(rows, ax, lambda r: r.metric[:18])
    ax.grid(True, alpha=0.3)
    ax.set_title(experiment)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
