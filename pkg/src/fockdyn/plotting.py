"""PNG rendering of diagnostic reports (headless, deterministic)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# strip timestamps/software tags so reruns are byte-identical
_PNG_META = {"Software": None}


def plot_report(report, out_dir, scenario: str) -> list:
    """One log-log figure per statistic, one line per (witness, state)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stats = sorted({r["statistic"] for r in report.rows})
    files = []
    for stat in stats:
        series = {}
        for r in report.rows:
            if r["statistic"] == stat:
                series.setdefault((r["witness_id"], r["state_id"]), []).append((r["N"], r["value"]))
        fig, ax = plt.subplots(figsize=(6, 4), dpi=100)
        for (wid, sid), pts in sorted(series.items()):
            pts.sort()
            xs = [p[0] for p in pts]
            ys = [max(p[1], 1e-18) for p in pts]
            ax.plot(xs, ys, marker="o", label=f"{wid} / {sid}")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("N")
        ax.set_ylabel(stat)
        ax.set_title(f"{scenario}: {stat}")
        thr = report.thresholds.get("decay")
        if thr:
            ax.axhline(thr, color="grey", linestyle="--", linewidth=0.8)
        ax.legend(fontsize=7)
        fig.tight_layout()
        fn = out_dir / f"{scenario}_{stat}.png"
        fig.savefig(fn, metadata=_PNG_META)
        plt.close(fig)
        files.append(str(fn))
    return files


def plot_correlations(ks, values, out_path, title: str = "") -> str:
    """Plain line plot of a correlation sequence."""
    fig, ax = plt.subplots(figsize=(6, 3), dpi=100)
    ax.plot(list(ks), list(values), linewidth=0.8)
    ax.set_xlabel("k")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_path, metadata=_PNG_META)
    plt.close(fig)
    return str(out_path)
