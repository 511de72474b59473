"""Run configuration: JSON file with explicit units at the boundary.

User-facing frequencies are Hz everywhere (field names carry the unit);
the single Hz -> rad/s conversion happens here, when a RunConfig hands
omegas to the numerical layers.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .eigen import BandSpec, TWO_PI
from .enrich import EnrichmentConfig
from .errors import ConfigError
from .models import (
    ComponentModel,
    MaterialSpec,
    build_box_pair,
    build_chain_pair,
    ingest_component,
)

DEFAULT_OMEGAS = ("band_start", "band_mid", "band_end")


@dataclass
class RunConfig:
    model: dict
    band: BandSpec
    method: str = "svd"
    omegas_hz: tuple[float, ...] = ()
    sv_threshold: float = 0.2
    rayleigh_keep: int = 126
    rayleigh_policy: str = "smallest"
    cb_band: Optional[BandSpec] = None
    include_rigid: bool = True
    drop_tol: float = 1e-8
    enrichment: Optional[EnrichmentConfig] = None
    output_dir: Path = Path("out")
    seed: int = 0
    pairing: str = "greedy"
    raw: dict = field(default_factory=dict)

    @property
    def omegas(self) -> list[float]:
        """Sampling frequencies in rad/s (the one unit conversion point)."""
        return [TWO_PI * f for f in self.omegas_hz]

    @property
    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True).encode()
        return hashlib.sha256(canon).hexdigest()

    def fixed_interface_band(self) -> BandSpec:
        """Band for the Craig-Bampton fixed-interface modes (4/3 of the
        study band unless configured explicitly)."""
        if self.cb_band is not None:
            return self.cb_band
        return BandSpec(self.band.f_min, self.band.f_max * 4.0 / 3.0)

    def build_components(self) -> tuple[ComponentModel, ComponentModel]:
        m = self.model
        kind = m["kind"]
        if kind == "chain":
            return build_chain_pair(
                int(m["n1"]),
                int(m["n2"]),
                _material_from(m.get("material", {})),
                element_length=float(m.get("element_length", 1.0)),
                area=float(m.get("area", 1.0)),
            )
        if kind == "box":
            return build_box_pair(
                tuple(m["divisions1"]),
                tuple(m["divisions2"]),
                _material_from(m.get("material", {})),
                element_size=float(m.get("element_size", 0.02)),
            )
        if kind == "ingest":
            comps = []
            for cid in (1, 2):
                spec = m[f"component{cid}"]
                comps.append(
                    ingest_component(
                        spec["mass"],
                        spec["stiffness"],
                        spec["partition"],
                        component_id=cid,
                    )
                )
            return comps[0], comps[1]
        raise ConfigError(f"model.kind must be chain|box|ingest, got {kind!r}")


def _material_from(d: dict) -> MaterialSpec:
    if not d:
        return MaterialSpec.steel()
    try:
        return MaterialSpec(
            youngs_modulus=float(d["youngs_modulus"]),
            density=float(d["density"]),
            poisson_ratio=float(d.get("poisson_ratio", 0.3)),
        )
    except KeyError as exc:
        raise ConfigError(f"material is missing field {exc}") from exc


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"missing field {where}.{key}" if where else f"missing field {key}")
    return d[key]


def load_config(path: Path | str) -> RunConfig:
    """Parse and validate a JSON run configuration."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return parse_config(raw, base_dir=path.parent)


def parse_config(raw: dict, base_dir: Path = Path(".")) -> RunConfig:
    model = _require(raw, "model", "")
    if not isinstance(model, dict) or "kind" not in model:
        raise ConfigError("model must be an object with a 'kind' field")

    band_raw = _require(raw, "band", "")
    try:
        band = BandSpec(
            float(_require(band_raw, "f_min_hz", "band")),
            float(_require(band_raw, "f_max_hz", "band")),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"band: {exc}") from exc

    method = raw.get("method", "svd").lower()
    if method not in ("cb", "cross", "svd"):
        raise ConfigError(f"method must be cb|cross|svd, got {method!r}")

    omegas_hz = tuple(float(x) for x in raw.get("omegas_hz", ()))
    if not omegas_hz:
        omegas_hz = (band.f_min, (band.f_min + band.f_max) / 2.0, band.f_max)
    for f_hz in omegas_hz:
        if not 0.0 <= f_hz <= 2.0 * band.f_max:
            raise ConfigError(
                f"omegas_hz entry {f_hz} outside [0, 2*f_max] = [0, {2*band.f_max}]"
            )

    cb_band = None
    if "cb_band" in raw:
        cb_band = BandSpec(
            float(raw["cb_band"]["f_min_hz"]), float(raw["cb_band"]["f_max_hz"])
        )

    enrichment = None
    if raw.get("enrichment"):
        e = raw["enrichment"]
        try:
            enrichment = EnrichmentConfig(
                epsilon_tol=float(_require(e, "epsilon_tol", "enrichment")),
                arnoldi_per_mode=int(e.get("arnoldi_per_mode", 3)),
                max_rounds=int(e.get("max_rounds", 5)),
                norm_mode=e.get("norm_mode", "flex"),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"enrichment: {exc}") from exc

    # Validate generator parameters eagerly so bad configs fail before
    # any output is written.
    if model["kind"] == "chain":
        for key in ("n1", "n2"):
            if int(_require(model, key, "model")) < 2:
                raise ConfigError(f"model.{key} must be >= 2")
    elif model["kind"] == "box":
        for key in ("divisions1", "divisions2"):
            divs = _require(model, key, "model")
            if len(divs) != 3 or min(int(d) for d in divs) < 1:
                raise ConfigError(f"model.{key} must be 3 positive counts")
    elif model["kind"] == "ingest":
        for cid in (1, 2):
            spec = _require(model, f"component{cid}", "model")
            for key in ("mass", "stiffness", "partition"):
                p = Path(_require(spec, key, f"model.component{cid}"))
                if not p.is_absolute():
                    spec[key] = str((base_dir / p).resolve())
    else:
        raise ConfigError(f"model.kind must be chain|box|ingest, got {model['kind']!r}")
    if "material" in model and model["material"]:
        _material_from(model["material"])  # validates ranges

    output_dir = Path(raw.get("output_dir", "out"))
    if not output_dir.is_absolute():
        output_dir = base_dir / output_dir

    return RunConfig(
        model=model,
        band=band,
        method=method,
        omegas_hz=omegas_hz,
        sv_threshold=float(raw.get("sv_threshold", 0.2)),
        rayleigh_keep=int(raw.get("rayleigh_keep", 126)),
        rayleigh_policy=raw.get("rayleigh_policy", "smallest"),
        cb_band=cb_band,
        include_rigid=bool(raw.get("include_rigid", True)),
        drop_tol=float(raw.get("drop_tol", 1e-8)),
        enrichment=enrichment,
        output_dir=output_dir,
        seed=int(raw.get("seed", 0)),
        pairing=raw.get("pairing", "greedy"),
        raw=raw,
    )
