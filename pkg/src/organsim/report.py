"""Report rendering: delimited summaries plus matplotlib figures.

Every CLI path that produces numbers can also drop a small report
directory: CSV files for the raw series and PNG figures for a quick look.
Rendering is headless (Agg backend).
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .actuation import ActuationSignal


def _ensure_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_tune_report(history: list[dict], out_dir) -> list[Path]:
    """Annealing trace as CSV plus a convergence figure."""
    out = _ensure_dir(out_dir)
    csv_path = out / "tune_history.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["iteration", "objective", "best", "temperature"])
        writer.writeheader()
        for row in history:
            writer.writerow({k: row[k] for k in writer.fieldnames})

    fig, ax = plt.subplots(figsize=(7, 4))
    iters = [row["iteration"] for row in history]
    ax.plot(iters, [row["objective"] for row in history], label="current", lw=1.0)
    ax.plot(iters, [row["best"] for row in history], label="best", lw=1.5)
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    ax2 = ax.twinx()
    ax2.plot(iters, [row["temperature"] for row in history], color="tab:gray", alpha=0.5, lw=0.8)
    ax2.set_ylabel("temperature")
    ax.legend(loc="upper right")
    fig.tight_layout()
    png_path = out / "tune_history.png"
    fig.savefig(png_path, dpi=150)
    plt.close(fig)
    return [csv_path, png_path]


def write_fit_report(params_doc: dict, out_dir, duration: float = 4.0) -> list[Path]:
    """Fitted harmonics as CSV plus the modulation waveforms."""
    out = _ensure_dir(out_dir)
    csv_path = out / "fit_params.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["region_id", "region_name", "harmonic", "amplitude", "frequency_hz", "phase_rad", "residual"])
        for entry in params_doc["regions"]:
            for k, h in enumerate(entry["harmonics"]):
                writer.writerow(
                    [entry["id"], entry["name"], k, h["a"], h["f"], h["phi"], entry.get("residual")]
                )

    fig, ax = plt.subplots(figsize=(7, 4))
    t = np.linspace(0.0, duration, 800)
    for entry in params_doc["regions"]:
        if not entry["harmonics"]:
            continue
        signal = ActuationSignal.from_dict_list(entry["harmonics"])
        ax.plot(t, signal.modulation(t), lw=1.2, label=f'{entry["name"]} (id {entry["id"]})')
    ax.set_xlabel("time (s)")
    ax.set_ylabel("rest-length modulation")
    ax.axhline(0.0, color="k", lw=0.5)
    if ax.get_legend_handles_labels()[0]:
        ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    png_path = out / "fit_signals.png"
    fig.savefig(png_path, dpi=150)
    plt.close(fig)
    return [csv_path, png_path]


def write_motion_report(rows: list[dict], out_dir) -> list[Path]:
    """Per-frame motion summary (time, displacement, energies) as CSV + PNG."""
    out = _ensure_dir(out_dir)
    fields = ["time", "rms_displacement", "max_displacement", "kinetic_energy", "spring_energy"]
    csv_path = out / "motion.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in fields})

    times = [row["time"] for row in rows]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    ax1.plot(times, [row["rms_displacement"] for row in rows], label="rms", lw=1.2)
    ax1.plot(times, [row["max_displacement"] for row in rows], label="max", lw=0.9, alpha=0.7)
    ax1.set_ylabel("displacement (m)")
    ax1.legend(loc="upper right", fontsize=8)
    ax2.plot(times, [row["kinetic_energy"] for row in rows], label="kinetic", lw=1.0)
    ax2.plot(times, [row["spring_energy"] for row in rows], label="spring", lw=1.0)
    ax2.set_ylabel("energy (J)")
    ax2.set_xlabel("time (s)")
    ax2.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    png_path = out / "motion.png"
    fig.savefig(png_path, dpi=150)
    plt.close(fig)
    return [csv_path, png_path]
