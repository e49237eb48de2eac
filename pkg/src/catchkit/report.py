"""Report rendering: CSV tables with matplotlib figures next to them."""

from __future__ import annotations

import csv
from collections import Counter
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from catchkit.records import CatchRecord, Outcome


def waveform_report(samples: np.ndarray, sample_rate_hz: float,
                    csv_path: str | Path, plot_path: str | Path | None = None) -> None:
    """Write the drive trace as t_s,voltage_v rows and, optionally, a step
    plot of the same samples."""
    samples = np.asarray(samples)
    t = np.arange(len(samples)) / sample_rate_hz
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_s", "voltage_v"])
        for ti, vi in zip(t, samples):
            writer.writerow([f"{ti:.9g}", f"{vi:.9g}"])
    if plot_path is not None:
        fig, ax = plt.subplots(figsize=(8, 3))
        ax.step(t * 1000.0, samples, where="post", lw=1.0)
        ax.set_xlabel("time [ms]")
        ax.set_ylabel("drive voltage [V]")
        ax.set_title("lure drive waveform")
        ax.grid(alpha=0.3)
        fig.tight_layout()
        fig.savefig(plot_path, dpi=120)
        plt.close(fig)


def session_report(records: list[CatchRecord], out_dir: str | Path) -> dict[str, Path]:
    """Summarize a catch log: per-species outcome counts as CSV plus a
    stacked bar figure. Returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "summary.csv"
    png_path = out / "catches.png"

    species = sorted({r.species for r in records})
    counts = {
        sp: Counter(r.outcome for r in records if r.species == sp)
        for sp in species
    }
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["species", "kept", "released", "lost"])
        for sp in species:
            c = counts[sp]
            writer.writerow([sp, c[Outcome.KEPT], c[Outcome.RELEASED], c[Outcome.LOST]])

    fig, ax = plt.subplots(figsize=(7, 4))
    if species:
        xs = np.arange(len(species))
        kept = [counts[sp][Outcome.KEPT] for sp in species]
        released = [counts[sp][Outcome.RELEASED] for sp in species]
        lost = [counts[sp][Outcome.LOST] for sp in species]
        ax.bar(xs, kept, label="kept", color="#2a9d8f")
        ax.bar(xs, released, bottom=kept, label="released", color="#457b9d")
        ax.bar(xs, lost, bottom=np.array(kept) + released, label="lost",
               color="#adb5bd")
        ax.set_xticks(xs, species, rotation=20, ha="right")
        ax.legend()
    else:
        ax.text(0.5, 0.5, "no catches recorded", ha="center", va="center",
                transform=ax.transAxes)
    ax.set_ylabel("fish")
    ax.set_title("session outcomes by species")
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return {"csv": csv_path, "png": png_path}
