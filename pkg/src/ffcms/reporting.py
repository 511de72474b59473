"""Report emission: delimited data dumps plus rendered figures.

Every report artefact exists in two forms side by side: a machine-readable
dump (CSV or JSON, byte-deterministic for identical inputs) and a rendered
PNG figure for humans — the MAC heat map, the singular-value decay, and
the per-round enrichment trace mirror the figures the methods are usually
judged by.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bases import InterfaceBasis, ReductionBasis, tag_to_dict
from .enrich import IndicatorReport
from .quality import ComparisonTable, MacMatrix, QualityReport


# ---------------------------------------------------------------------------
# Delimited dumps
# ---------------------------------------------------------------------------


def write_mac_csv(path: Path | str, mac_matrix: MacMatrix) -> None:
    values = mac_matrix.values
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + [f"reduced_{j}" for j in range(values.shape[1])])
        for i in range(values.shape[0]):
            writer.writerow([f"full_{i}"] + [repr(v) for v in values[i]])


def write_frequencies_csv(
    path: Path | str, frequencies: np.ndarray, rigid_count: int
) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode", "frequency_hz", "rigid"])
        for i, f in enumerate(frequencies):
            writer.writerow([i, repr(float(f)), int(i < rigid_count)])


def write_singular_values_csv(path: Path | str, Tj: InterfaceBasis) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "singular_value", "retained"])
        for i, s in enumerate(Tj.singular_values):
            writer.writerow([i, repr(float(s)), int(i < Tj.n_retained)])


def write_trace_csv(path: Path | str, reports: Sequence[IndicatorReport]) -> None:
    """Per-round indicator trace: (round, mode, frequency, epsilon, flagged)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "round",
                "mode",
                "frequency_hz",
                "epsilon",
                "epsilon_flex",
                "epsilon_paper",
                "flagged",
            ]
        )
        for rnd, rep in enumerate(reports, start=1):
            for m in rep.per_mode:
                writer.writerow(
                    [
                        rnd,
                        m.index,
                        repr(m.frequency),
                        repr(m.epsilon),
                        repr(m.epsilon_flex),
                        repr(m.epsilon_paper),
                        int(m.flagged),
                    ]
                )


def write_basis_tags(path: Path | str, basis: ReductionBasis) -> None:
    payload = {
        "condition_number": basis.condition_number,
        "tags": [tag_to_dict(t) for t in basis.tags],
        "dropped": [tag_to_dict(t) for t in basis.dropped if t is not None],
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def report_to_dict(report: QualityReport) -> dict:
    return {
        "method": report.method,
        "dof_reduced": report.dof_reduced,
        "condition_number": report.condition_number,
        "mac_average": report.mac_average,
        "pairing": [[int(i), int(j)] for i, j in report.pairing],
        "provenance": report.provenance,
    }


def write_report_json(path: Path | str, report: QualityReport) -> None:
    Path(path).write_text(
        json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"
    )


def read_report_json(path: Path | str) -> dict:
    return json.loads(Path(path).read_text())


def write_comparison(
    directory: Path | str, table: ComparisonTable, stem: str = "comparison"
) -> dict:
    directory = Path(directory)
    json_path = directory / f"{stem}.json"
    csv_path = directory / f"{stem}.csv"
    txt_path = directory / f"{stem}.txt"
    json_path.write_text(json.dumps(table.to_dicts(), indent=2, sort_keys=True) + "\n")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "dof_reduced", "mac_average", "condition_number"])
        for row in table.to_dicts():
            writer.writerow(
                [
                    row["method"],
                    row["dof_reduced"],
                    "" if row["mac_average"] is None else repr(row["mac_average"]),
                    repr(row["condition_number"]),
                ]
            )
    txt_path.write_text(table.to_text() + "\n")
    return {"json": str(json_path), "csv": str(csv_path), "text": str(txt_path)}


# ---------------------------------------------------------------------------
# Figures
# ---------------------------------------------------------------------------


def plot_mac_heatmap(
    path: Path | str, mac_matrix: MacMatrix, title: str = "MAC"
) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 5.0))
    im = ax.imshow(
        mac_matrix.values, origin="lower", vmin=0.0, vmax=1.0, cmap="viridis",
        aspect="auto",
    )
    ax.set_xlabel("reduced-model mode")
    ax.set_ylabel("full-model mode")
    ax.set_title(title)
    fig.colorbar(im, ax=ax, label="MAC")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_singular_values(path: Path | str, Tj: InterfaceBasis) -> None:
    s = Tj.singular_values
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.semilogy(np.arange(s.size), s, "o-", ms=4, label="singular values")
    ax.axhline(Tj.threshold, color="crimson", ls="--", lw=1.0,
               label=f"threshold {Tj.threshold:g}")
    ax.axvline(Tj.n_retained - 0.5, color="gray", ls=":", lw=1.0)
    ax.set_xlabel("index")
    ax.set_ylabel("singular value")
    ax.set_title("Interface-deformation singular values")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_enrichment_trace(
    path: Path | str, reports: Sequence[IndicatorReport]
) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    rounds = np.arange(1, len(reports) + 1)
    max_eps = [r.max_epsilon for r in reports]
    ax.semilogy(rounds, max_eps, "s-", label="max $\\varepsilon$")
    if reports:
        ax.axhline(reports[0].tolerance, color="crimson", ls="--", lw=1.0,
                   label="tolerance")
    ax.set_xlabel("enrichment round")
    ax.set_ylabel("indicator")
    ax.set_xticks(rounds)
    ax.set_title("Enrichment convergence")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_comparison(path: Path | str, table: ComparisonTable) -> None:
    rows = [r for r in table.rows if r.mac_average is not None]
    if not rows:
        return
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.0, 4.0))
    names = [r.method for r in rows]
    ax1.bar(names, [r.mac_average for r in rows], color="steelblue")
    ax1.set_ylabel("MAC average [%]")
    ax1.set_ylim(0, 100)
    ax2.bar(names, [r.condition_number for r in rows], color="darkorange")
    ax2.set_yscale("log")
    ax2.set_ylabel("basis condition number")
    for ax in (ax1, ax2):
        ax.tick_params(axis="x", rotation=20)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
