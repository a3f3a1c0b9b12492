"""Evaluation reports: metrics JSON + CSV plus rendered figures.

Figures go alongside the delimited output: CDFs of per-classifier accuracy
with the general classifier marked as a vertical reference line, the error
rates, and prediction latency.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

CSV_FIELDS = ["classifier", "ccr", "auc", "fpr", "fnr", "tp", "tn", "fp", "fn",
              "predict_micros_mean", "predict_micros_max"]


def write_report(metrics: dict[str, dict], out_dir: str | Path) -> dict[str, str]:
    """Write metrics.json, metrics.csv and figures; returns written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}

    json_path = out / "metrics.json"
    json_path.write_text(json.dumps(metrics, indent=1, sort_keys=True), encoding="utf-8")
    written["json"] = str(json_path)

    per_classifier = {k: v for k, v in metrics.items() if not k.startswith("_")}

    csv_path = out / "metrics.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for name in sorted(per_classifier):
            row = {"classifier": name}
            row.update({k: per_classifier[name].get(k) for k in CSV_FIELDS[1:]})
            writer.writerow(row)
    written["csv"] = str(csv_path)

    figures = out / "figures"
    figures.mkdir(exist_ok=True)
    pdao = {k: v for k, v in per_classifier.items() if k != "general"}
    general = per_classifier.get("general")

    if pdao:
        written["accuracy_cdf"] = _cdf_figure(
            figures / "accuracy_cdf.png", pdao, general, ("ccr", "auc"),
            "per-classifier accuracy")
        written["error_rates_cdf"] = _cdf_figure(
            figures / "error_rates_cdf.png", pdao, general, ("fpr", "fnr"),
            "per-classifier error rates")
        written["latency"] = _latency_figure(figures / "latency.png", per_classifier)
    return written


def _cdf_figure(path: Path, pdao: dict[str, dict], general: dict | None,
                fields: tuple[str, str], title: str) -> str:
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.2))
    for ax, metric in zip(axes, fields):
        values = sorted(m.get(metric, 0.0) for m in pdao.values())
        ys = [(i + 1) / len(values) for i in range(len(values))]
        ax.step(values, ys, where="post", label="per-domain-and-OS")
        if general is not None:
            ax.axvline(general.get(metric, 0.0), color="tab:red", linestyle="--",
                       label="general")
        ax.set_xlabel(metric.upper())
        ax.set_ylabel("CDF over classifiers")
        ax.set_ylim(0, 1.02)
        ax.grid(alpha=0.3)
        ax.legend(fontsize=8)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def _latency_figure(path: Path, metrics: dict[str, dict]) -> str:
    names = sorted(metrics)
    means = [metrics[n].get("predict_micros_mean", 0.0) for n in names]
    maxes = [metrics[n].get("predict_micros_max", 0.0) for n in names]
    fig, ax = plt.subplots(figsize=(max(4, 0.6 * len(names) + 2), 3.2))
    xs = range(len(names))
    ax.bar([x - 0.2 for x in xs], means, width=0.4, label="mean")
    ax.bar([x + 0.2 for x in xs], maxes, width=0.4, label="max")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(names, rotation=30, ha="right", fontsize=7)
    ax.set_ylabel("predict+extract (µs)")
    ax.grid(alpha=0.3, axis="y")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)
