"""Command-line front end: build, reduce, enrich, compare, db.

Exit codes: 0 success, 2 partial convergence (enrichment ran out of
rounds with flagged modes left), 1 error.
"""
from __future__ import annotations

import datetime
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .assembly import assemble
from .bases import (
    ReductionBasis,
    build_cross_basis,
    build_svd_basis,
    craig_bampton_basis,
    cross_coupling_vectors,
    filter_by_rayleigh,
    svd_coupling_vectors,
    svd_interface_basis,
    tag_from_dict,
)
from .config import RunConfig, load_config
from .database import CouplingDatabase, load_database, save_database
from .eigen import solve_component_modes, solve_modes, solve_reduced
from .enrich import EnrichmentConfig, enrich
from .errors import ConfigError, FfcmsError, StaleDatabaseError
from .models import export_component, fingerprint_pair
from .quality import QualityReport, compare_methods, mac, pair_and_average
from .reporting import (
    plot_comparison,
    plot_enrichment_trace,
    plot_mac_heatmap,
    plot_singular_values,
    read_report_json,
    write_basis_tags,
    write_comparison,
    write_frequencies_csv,
    write_mac_csv,
    write_report_json,
    write_singular_values_csv,
    write_trace_csv,
)
from .models import read_matrix, write_general_matrix

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARTIAL = 2


def _write_run_meta(out: Path, cfg: RunConfig, command: str) -> None:
    meta = {
        "command": command,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "version": __version__,
        "config_hash": cfg.config_hash,
    }
    (out / "run_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _provenance(cfg: RunConfig, fingerprint, extra: dict | None = None) -> dict:
    prov = {
        "config_hash": cfg.config_hash,
        "fingerprint": fingerprint.to_dict(),
        "band_hz": [cfg.band.f_min, cfg.band.f_max],
        "omegas_hz": list(cfg.omegas_hz),
        "include_rigid": cfg.include_rigid,
        "drop_tol": cfg.drop_tol,
        "pairing_rule": cfg.pairing,
        "version": __version__,
    }
    if extra:
        prov.update(extra)
    return prov


def _build_basis(cfg: RunConfig, c1, c2):
    """Returns (ReductionBasis, MethodBasisResult | None)."""
    if cfg.method == "cb":
        return craig_bampton_basis(c1, c2, cfg.fixed_interface_band()), None
    if cfg.method == "cross":
        res = build_cross_basis(
            c1,
            c2,
            cfg.band,
            cfg.omegas,
            rayleigh_keep=cfg.rayleigh_keep,
            include_rigid=cfg.include_rigid,
            drop_tol=cfg.drop_tol,
            rayleigh_policy=cfg.rayleigh_policy,
        )
        return res.basis, res
    res = build_svd_basis(
        c1,
        c2,
        cfg.band,
        cfg.omegas,
        sv_threshold=cfg.sv_threshold,
        include_rigid=cfg.include_rigid,
        drop_tol=cfg.drop_tol,
    )
    return res.basis, res


def _reduce_pipeline(cfg: RunConfig, oracle: bool, out: Path) -> QualityReport:
    c1, c2 = cfg.build_components()
    sys_ = assemble(c1, c2)
    fingerprint = fingerprint_pair(c1, c2)
    basis, method_res = _build_basis(cfg, c1, c2)
    reduced = solve_reduced(basis, sys_, cfg.band)

    write_general_matrix(out / "basis.mtx", basis.columns)
    write_basis_tags(out / "basis_tags.json", basis)
    write_frequencies_csv(
        out / "reduced_frequencies.csv", reduced.frequencies, reduced.rigid_count
    )

    report = QualityReport(
        method=cfg.method.upper(),
        dof_reduced=basis.n_columns,
        condition_number=basis.condition_number,
        provenance=_provenance(
            cfg,
            fingerprint,
            {
                "dof_full": sys_.n_global,
                "sv_threshold": cfg.sv_threshold if cfg.method == "svd" else None,
                "rayleigh_keep": cfg.rayleigh_keep if cfg.method == "cross" else None,
                "rayleigh_policy": cfg.rayleigh_policy if cfg.method == "cross" else None,
                "n_reduced_modes_in_band": reduced.n_modes,
            },
        ),
    )

    if oracle:
        full = solve_modes(sys_.mass, sys_.stiffness, cfg.band)
        write_frequencies_csv(
            out / "full_frequencies.csv", full.frequencies, full.rigid_count
        )
        mac_matrix = mac(full.shapes, reduced.shapes)
        pairing, average = pair_and_average(
            full, reduced, skip_rigid=True, pairing=cfg.pairing
        )
        report.mac_matrix = mac_matrix
        report.mac_average = average
        report.pairing = pairing
        report.provenance["n_full_modes_in_band"] = full.n_modes
        write_mac_csv(out / "mac.csv", mac_matrix)
        plot_mac_heatmap(
            out / "mac_heatmap.png",
            mac_matrix,
            title=f"{report.method}: DoF {report.dof_reduced}, "
            f"MAC avg {average:.2f}%",
        )

    if method_res is not None and method_res.interface_basis is not None:
        write_singular_values_csv(
            out / "singular_values.csv", method_res.interface_basis
        )
        plot_singular_values(
            out / "singular_value_decay.png", method_res.interface_basis
        )

    write_report_json(out / "report.json", report)
    return report


@click.group()
@click.version_option(version=__version__, prog_name="ffcms")
def cli():
    """Model reduction for two-component assemblies."""


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(), help="Run configuration (JSON).")
@click.option("--output", "output_dir", type=click.Path(), default=None, help="Override output directory.")
def build(config_path, output_dir):
    """Generate or ingest the component pair and write its model files."""
    cfg = load_config(config_path)
    if output_dir:
        cfg.output_dir = Path(output_dir)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    c1, c2 = cfg.build_components()
    fingerprint = fingerprint_pair(c1, c2)
    paths = {}
    for c in (c1, c2):
        paths[f"component{c.id}"] = export_component(c, out, f"component{c.id}")
    manifest = {
        "fingerprint": fingerprint.to_dict(),
        "config_hash": cfg.config_hash,
        "model": cfg.model,
        "files": paths,
        "n_dof": [c1.n_dof, c2.n_dof],
        "n_junction": c1.n_junction,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    _write_run_meta(out, cfg, "build")
    click.echo(f"wrote {len(paths) * 3 + 1} files to {out}")


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--method", type=click.Choice(["cb", "cross", "svd"]), default=None, help="Override the configured reduction method.")
@click.option("--no-oracle", is_flag=True, help="Skip the full-model solve and MAC scoring.")
@click.option("--output", "output_dir", type=click.Path(), default=None)
@click.option("--pairing", type=click.Choice(["greedy", "sorted"]), default=None)
def reduce(config_path, method, no_oracle, output_dir, pairing):
    """Build the reduction basis, solve, and score against the full model."""
    cfg = load_config(config_path)
    if method:
        cfg.method = method
    if output_dir:
        cfg.output_dir = Path(output_dir)
    if pairing:
        cfg.pairing = pairing
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    report = _reduce_pipeline(cfg, oracle=not no_oracle, out=out)
    _write_run_meta(out, cfg, "reduce")
    mac_s = f", MAC avg {report.mac_average:.2f}%" if report.mac_average is not None else ""
    click.echo(
        f"{report.method}: {report.dof_reduced} reduced DoF, condition number "
        f"{report.condition_number:.4g}{mac_s}"
    )


@cli.command(name="enrich")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--output", "output_dir", type=click.Path(), default=None)
@click.option("--norm", type=click.Choice(["flex", "paper"]), default=None, help="Override the indicator norm.")
def enrich_cmd(config_path, output_dir, norm):
    """Enrich the basis of a previous reduce run until the indicator passes."""
    cfg = load_config(config_path)
    if output_dir:
        cfg.output_dir = Path(output_dir)
    out = cfg.output_dir
    basis_path = out / "basis.mtx"
    tags_path = out / "basis_tags.json"
    if not basis_path.exists() or not tags_path.exists():
        raise ConfigError(
            f"no reduce run found in {out} (missing basis.mtx / basis_tags.json); "
            "run `ffcms reduce` first"
        )
    ecfg = cfg.enrichment or EnrichmentConfig(epsilon_tol=1e-6)
    if norm:
        ecfg = EnrichmentConfig(
            epsilon_tol=ecfg.epsilon_tol,
            arnoldi_per_mode=ecfg.arnoldi_per_mode,
            max_rounds=ecfg.max_rounds,
            norm_mode=norm,
        )

    c1, c2 = cfg.build_components()
    sys_ = assemble(c1, c2)
    cols = read_matrix(basis_path)
    tags = [tag_from_dict(d) for d in json.loads(tags_path.read_text())["tags"]]
    T0 = ReductionBasis(columns=cols, tags=tags)

    result = enrich(sys_, T0, cfg.band, ecfg)
    write_general_matrix(out / "enriched_basis.mtx", result.basis.columns)
    write_basis_tags(out / "enriched_basis_tags.json", result.basis)
    write_trace_csv(out / "enrichment_trace.csv", result.reports)
    plot_enrichment_trace(out / "enrichment_trace.png", result.reports)

    reduced = solve_reduced(result.basis, sys_, cfg.band)
    report = QualityReport(
        method=f"{cfg.method.upper()}+enriched",
        dof_reduced=result.basis.n_columns,
        condition_number=result.basis.condition_number,
        provenance=_provenance(
            cfg,
            fingerprint_pair(c1, c2),
            {
                "dof_full": sys_.n_global,
                "norm_mode": ecfg.norm_mode,
                "epsilon_tol": ecfg.epsilon_tol,
                "rounds": result.rounds,
                "converged": result.converged,
            },
        ),
    )
    full = solve_modes(sys_.mass, sys_.stiffness, cfg.band)
    pairing, average = pair_and_average(full, reduced, pairing=cfg.pairing)
    report.mac_average = average
    report.pairing = pairing
    report.mac_matrix = mac(full.shapes, reduced.shapes)
    write_mac_csv(out / "enriched_mac.csv", report.mac_matrix)
    plot_mac_heatmap(
        out / "enriched_mac_heatmap.png",
        report.mac_matrix,
        title=f"{report.method}: MAC avg {average:.2f}%",
    )
    write_report_json(out / "enriched_report.json", report)
    _write_run_meta(out, cfg, "enrich")

    status = "converged" if result.converged else "partial"
    click.echo(
        f"enrichment {status} after {result.rounds} round(s); final basis "
        f"{result.basis.n_columns} columns; MAC avg {average:.2f}%"
    )
    if not result.converged:
        sys.exit(EXIT_PARTIAL)


@cli.command()
@click.argument("reports", nargs=-1, required=True, type=click.Path())
@click.option("--output", "output_dir", type=click.Path(), default=".", help="Where to write the comparison files.")
def compare(reports, output_dir):
    """Merge reduce reports into a comparison table (same model only)."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    loaded = []
    fingerprints = set()
    for p in reports:
        d = read_report_json(p)
        fp = d.get("provenance", {}).get("fingerprint", {})
        fingerprints.add((fp.get("matrices"), fp.get("partition")))
        loaded.append(
            QualityReport(
                method=d["method"],
                dof_reduced=int(d["dof_reduced"]),
                condition_number=float(d["condition_number"]),
                mac_average=d.get("mac_average"),
                provenance=d.get("provenance", {}),
            )
        )
    if len(fingerprints) > 1:
        pretty = " vs ".join(
            f"(matrices {m[:12] if m else '?'}..., partition {p[:12] if p else '?'}...)"
            for m, p in sorted(fingerprints, key=str)
        )
        raise FfcmsError(
            f"reports stem from different models and are not comparable: {pretty}"
        )
    table = compare_methods(loaded)
    files = write_comparison(out, table)
    plot_comparison(out / "comparison.png", table)
    click.echo(table.to_text())
    click.echo(f"written: {files['json']}, {files['csv']}, {files['text']}")


@cli.command()
@click.argument("action", type=click.Choice(["save", "load", "reuse-partial"]))
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--path", "db_path", required=True, type=click.Path(), help="Database file (.zip).")
def db(action, config_path, db_path):
    """Manage the coupling-vector database for basis reuse."""
    cfg = load_config(config_path)
    c1, c2 = cfg.build_components()

    if action == "save":
        free = {
            c.id: solve_component_modes(c, cfg.band, include_rigid=cfg.include_rigid)
            for c in (c1, c2)
        }
        if cfg.method == "cross":
            pool = cross_coupling_vectors(c1, c2, free, cfg.omegas)
            vectors = filter_by_rayleigh(
                pool, cfg.band, cfg.rayleigh_keep, policy=cfg.rayleigh_policy
            )
        else:
            Tj = svd_interface_basis(c1, c2, free[1], free[2], cfg.sv_threshold)
            vectors = svd_coupling_vectors(c1, c2, Tj, cfg.omegas)
        database = CouplingDatabase.from_parts(
            c1,
            c2,
            free,
            vectors,
            metadata={
                "method": cfg.method,
                "omegas_hz": list(cfg.omegas_hz),
                "sv_threshold": cfg.sv_threshold,
                "band_hz": [cfg.band.f_min, cfg.band.f_max],
            },
        )
        save_database(database, db_path)
        click.echo(
            f"saved: {len(free)} free-mode sets, {len(vectors)} coupling vectors"
        )
        return

    partial = action == "reuse-partial"
    result = load_database(db_path, c1, c2, partial_reuse=partial)
    if partial and result.partial:
        click.echo(
            f"retained: free modes ({result.retained_free_sets} sets); "
            f"discarded: {result.discarded_vectors} coupling vectors"
        )
    else:
        click.echo(
            f"identical: {result.retained_free_sets} free-mode sets, "
            f"{len(result.database.coupling_vectors)} coupling vectors usable"
        )


def main() -> None:
    """Console entry point: domain errors become exit code 1, not tracebacks."""
    try:
        cli.main(standalone_mode=True)
    except FfcmsError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ERROR)


if __name__ == "__main__":
    main()
