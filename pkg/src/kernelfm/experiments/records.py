"""Per-repeat results, their aggregates, and CSV / JSON / SVG emission."""

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import config_hash, emit_config

CSV_COLUMNS = ("experiment", "repeat", "n", "sigma_min", "metric_name", "value", "seed")

ARMS = {"data": 0, "target": 1, "target_ref": 2, "kde": 3, "flow": 4, "latent": 5, "train": 6, "grid": 7}


def arm_seed(root, repeat, arm, *extra):
    """Independent seed for one (repeat, arm) pair of a run with root seed
    ``root``; ``extra`` integers split an arm further."""
    return np.random.SeedSequence(int(root), spawn_key=(int(repeat), ARMS[arm], *map(int, extra)))


def arm_rng(root, repeat, arm, *extra):
    return np.random.default_rng(arm_seed(root, repeat, arm, *extra))


@dataclass
class RunRecord:
    experiment: str
    config: object
    seed: int
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    started: float = field(default_factory=time.perf_counter)
    wall_clock: float = 0.0

    @property
    def config_hash(self):
        return config_hash(self.config)

    def add(self, repeat, n, sigma_min, metric, value):
        self.rows.append({
            "experiment": self.experiment,
            "repeat": int(repeat),
            "n": int(n),
            "sigma_min": float(sigma_min),
            "metric_name": str(metric),
            "value": float(value),
            "seed": int(self.seed),
        })

    def values(self, metric, n=None, sigma_min=None):
        return np.array([r["value"] for r in self.rows if r["metric_name"] == metric
                         and (n is None or r["n"] == n)
                         and (sigma_min is None or r["sigma_min"] == sigma_min)])

    def aggregate(self):
        """Median and interquartile range per (metric, n, sigma_min)."""
        groups = {}
        for r in self.rows:
            groups.setdefault((r["metric_name"], r["n"], r["sigma_min"]), []).append(r["value"])
        out = []
        for (metric, n, sig), vals in sorted(groups.items()):
            q1, med, q3 = np.percentile(vals, [25, 50, 75])
            out.append({"metric_name": metric, "n": n, "sigma_min": sig, "count": len(vals),
                        "median": float(med), "iqr": float(q3 - q1), "mean": float(np.mean(vals))})
        return out

    def finish(self):
        self.wall_clock = time.perf_counter() - self.started
        return self

    def sorted_rows(self):
        return sorted(self.rows, key=lambda r: (r["metric_name"], r["n"], r["sigma_min"], r["repeat"], r["value"]))

    def write(self, out_dir, plots=False):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{self.experiment}.csv"
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for r in self.sorted_rows():
                writer.writerow([r["experiment"], r["repeat"], r["n"], repr(r["sigma_min"]),
                                 r["metric_name"], repr(r["value"]), r["seed"]])
        summary = {
            "experiment": self.experiment,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "wall_clock_seconds": self.wall_clock,
            "flags": self.flags,
            "summary": self.summary,
            "aggregate": self.aggregate(),
        }
        (out / f"{self.experiment}.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
        (out / f"{self.experiment}.ini").write_text(emit_config(self.config))
        paths = [csv_path, out / f"{self.experiment}.json"]
        if plots:
            paths += write_plots(self, out)
        return paths


def write_plots(record, out):
    """One log-log SVG per metric: median against n (or sigma_min when n is fixed)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    paths = []
    agg = record.aggregate()
    for metric in sorted({a["metric_name"] for a in agg}):
        pts = [a for a in agg if a["metric_name"] == metric]
        ns = {a["n"] for a in pts}
        key = "n" if len(ns) > 1 else "sigma_min"
        xs = np.array([a[key] for a in pts], dtype=float)
        ys = np.array([a["median"] for a in pts])
        if len(xs) < 2 or np.any(xs <= 0):
            continue
        order = np.argsort(xs)
        fig, ax = plt.subplots(figsize=(4.5, 3.5))
        ax.plot(xs[order], ys[order], "o-")
        ax.set_xscale("log")
        if np.all(ys > 0):
            ax.set_yscale("log")
        ax.set_xlabel(key)
        ax.set_ylabel(metric)
        ax.set_title(record.experiment)
        fig.tight_layout()
        path = out / f"{record.experiment}_{metric.replace('@', '_')}.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(path)
    return paths
