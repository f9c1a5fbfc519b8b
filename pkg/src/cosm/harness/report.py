"""Report rendering: a text table for people and a CSV for tools.

The CSV holds only deterministic quantities (wall times are left out), so
identical inputs produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
from typing import Optional

from ..metrics import PHASES

COLUMNS = ("event-seq", "phase", "metric", "value")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


def rows(reports: dict, comparison=None) -> list:
    out = []
    for mode, report in reports.items():
        m = f"{mode}.work-units"
        for e in report.series:
            for phase in PHASES:
                out.append((e.index, phase, m, e.phases[phase]))
            out.append((e.index, "total", m, e.units))
            out.append((e.index, "detection", f"{mode}.deliveries", e.deliveries))
            out.append((e.index, "adaptation", f"{mode}.plans", e.plans))
            out.append((e.index, "adaptation", f"{mode}.plan-steps", e.plan_steps))
        for phase, units in report.phases.items():
            out.append(("total", phase, m, units))
        for metric, value in report.totals.items():
            out.append(("total", "total", f"{mode}.{metric}", value))
        out.append(("total", "total", f"{mode}.runs", report.runs))
        for metric, stats in report.stats.items():
            if metric == "wall-time" or not isinstance(stats, dict):
                continue
            for name, value in stats.items():
                out.append(("repeat", "stats", f"{mode}.{metric}.{name}", value))
    if comparison is not None:
        c = comparison
        out.extend([
            ("total", "comparison", "daop-minus-cosm",
             c.daop.totals["work-units"] - c.cosm.totals["work-units"]),
            ("total", "comparison", "daop-slope", c.daop_slope),
            ("total", "comparison", "cosm-slope", c.cosm_slope),
            ("total", "comparison", "daop-nondecreasing", c.daop_nondecreasing),
            ("total", "comparison", "cosm-history-independent", c.cosm_history_independent),
        ])
    return out


def to_csv(reports: dict, comparison=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows(reports, comparison):
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, reports: dict, comparison=None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(to_csv(reports, comparison))


def table(reports: dict, comparison=None, timings: bool = True) -> str:
    lines = []
    modes = list(reports)
    width = max((len(r.series) for r in reports.values()), default=0)
    header = f"{'event':>5}  {'entity':<14}{'value':>8}" + "".join(f"{m + ' units':>12}" for m in modes)
    lines.append(header)
    lines.append("-" * len(header))
    first = reports[modes[0]] if modes else None
    for i in range(width):
        e = first.series[i]
        cells = "".join(f"{reports[m].series[i].units:>12}" for m in modes)
        lines.append(f"{e.index:>5}  {e.entity:<14}{_fmt(e.value):>8}{cells}")
    lines.append("")
    for mode, report in reports.items():
        totals = ", ".join(f"{k}={v}" for k, v in report.totals.items())
        phases = ", ".join(f"{k}={v}" for k, v in report.phases.items())
        lines.append(f"[{mode}] {totals}")
        lines.append(f"[{mode}] phases: {phases}")
        if report.stats:
            wu = report.stats["work-units"]
            lines.append(f"[{mode}] {report.runs} runs: work-units mean={_fmt(wu['mean'])} "
                         f"variance={_fmt(wu['variance'])} stddev={_fmt(wu['stddev'])}")
            if timings:
                wt = report.stats["wall-time"]
                lines.append(f"[{mode}] wall-time mean={wt['mean'] * 1e3:.3f} ms "
                             f"stddev={wt['stddev'] * 1e3:.3f} ms")
        for failure in report.failures:
            lines.append(f"[{mode}] failure: {failure.reason}")
    if comparison is not None:
        c = comparison
        lines.append(f"daop - cosm = {c.daop.totals['work-units'] - c.cosm.totals['work-units']} units; "
                     f"daop slope {c.daop_slope:.3g}/event, cosm slope {c.cosm_slope:.3g}/event; "
                     f"cosm history-independent: {c.cosm_history_independent}")
    return "\n".join(lines) + "\n"


def figure_paths(csv_path) -> tuple:
    from pathlib import Path
    p = Path(csv_path)
    return p.with_name(p.stem + ".costs.png"), p.with_name(p.stem + ".phases.png")


def render_figures(reports: dict, csv_path, comparison=None) -> Optional[tuple]:
    """Draw per-event cost series and phase totals next to the CSV."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    costs_path, phases_path = figure_paths(csv_path)
    markers = {"cosm": "o", "daop": "s"}

    fig, ax = plt.subplots(figsize=(6, 3.5))
    for mode, report in reports.items():
        xs = [e.index for e in report.series]
        ax.plot(xs, report.units(), marker=markers.get(mode, "."), label=mode)
    ax.set_xlabel("event")
    ax.set_ylabel("work units")
    ax.set_title("per-event adaptation cost")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(costs_path, dpi=120)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6, 3.5))
    bottoms = [0] * len(reports)
    names = list(reports)
    for phase in PHASES:
        heights = [reports[m].phases[phase] for m in names]
        ax.bar(names, heights, bottom=bottoms, label=phase)
        bottoms = [b + h for b, h in zip(bottoms, heights)]
    ax.set_ylabel("work units")
    ax.set_title("cost by phase")
    ax.legend()
    fig.tight_layout()
    fig.savefig(phases_path, dpi=120)
    plt.close(fig)
    return costs_path, phases_path
