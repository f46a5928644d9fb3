"""SVG line charts of ``metrics.csv``: mean across seeds with a min-max band."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .harness import read_metrics  # noqa: E402

plt.rcParams["svg.hashsalt"] = "rewardshares"


def aggregate(per_seed: dict[int, list[tuple[int, float]]]):
    """Align seeds on common episodes; returns (episodes, mean, low, high)."""
    series = {s: dict(v) for s, v in per_seed.items()}
    episodes = sorted(set.intersection(*(set(d) for d in series.values())))
    if not episodes:
        raise ValueError("seeds share no logged episode")
    table = np.array([[series[s][e] for e in episodes] for s in sorted(series)])
    return np.array(episodes), table.mean(axis=0), table.min(axis=0), table.max(axis=0)


def plot(result_dir, metric: str | None = None, out_dir=None) -> list[Path]:
    """Write one ``<metric>.svg`` per metric (all agents on one chart)."""
    result_dir = Path(result_dir)
    data = read_metrics(result_dir)
    names = sorted({m for m, _ in data})
    if metric is not None:
        names = [m for m in names if m == metric]
    if not names:
        raise LookupError(f"no metric matches {metric!r}")
    out_dir = Path(out_dir) if out_dir else result_dir / "plots"
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name in names:
        fig, ax = plt.subplots(figsize=(6, 4))
        for agent in sorted(a for m, a in data if m == name):
            ep, mean, lo, hi = aggregate(data[(name, agent)])
            label = "joint" if agent == "joint" else f"agent {agent}"
            (line,) = ax.plot(ep, mean, label=label, linewidth=1.2)
            ax.fill_between(ep, lo, hi, color=line.get_color(), alpha=0.2, linewidth=0)
        ax.set_xlabel("episode")
        ax.set_ylabel(name.replace("_", " "))
        ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        path = out_dir / f"{name}.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)
    return written
