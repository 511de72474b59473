"""Reusable database of free-free deformations and coupling vectors.

Repositioning a contacting interface invalidates only the coupling
vectors, so the database keeps separate fingerprints for the component
matrices and the DoF partition: a partition-only mismatch still allows
partial reuse (free modes kept, coupling vectors discarded), while a
matrix mismatch makes the whole database stale.

Container format: a zip archive holding a JSON manifest plus Matrix
Market blocks for the mode shapes and coupling-vector columns, written at
full precision so a rebuild from disk is bit-identical to a rebuild from
memory.
"""
from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.io

from .bases import CouplingVector
from .eigen import ModeSet
from .errors import FormatError, StaleDatabaseError
from .models import ComponentModel, ModelFingerprint, fingerprint_pair

FORMAT_VERSION = 1


@dataclass
class CouplingDatabase:
    free_modes: dict[int, ModeSet]
    coupling_vectors: list[CouplingVector]
    fingerprint: ModelFingerprint
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_parts(
        cls,
        c1: ComponentModel,
        c2: ComponentModel,
        free_modes: dict[int, ModeSet],
        coupling_vectors: list[CouplingVector],
        metadata: Optional[dict] = None,
    ) -> "CouplingDatabase":
        return cls(
            free_modes=free_modes,
            coupling_vectors=list(coupling_vectors),
            fingerprint=fingerprint_pair(c1, c2),
            metadata=metadata or {},
        )


@dataclass
class LoadResult:
    database: CouplingDatabase
    partial: bool
    retained_free_sets: int
    discarded_vectors: int


def _write_mm(zf: zipfile.ZipFile, name: str, A: np.ndarray) -> None:
    buf = io.BytesIO()
    scipy.io.mmwrite(buf, np.asarray(A), precision=17)
    zf.writestr(name, buf.getvalue())


def _read_mm(zf: zipfile.ZipFile, name: str) -> np.ndarray:
    with zf.open(name) as fh:
        return np.asarray(scipy.io.mmread(fh), dtype=float)


def save_database(db: CouplingDatabase, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": FORMAT_VERSION,
        "fingerprint": db.fingerprint.to_dict(),
        "metadata": db.metadata,
        "free_modes": {
            str(cid): {
                "frequencies": ms.frequencies.tolist(),
                "rigid_count": ms.rigid_count,
                "dof_context": ms.dof_context,
            }
            for cid, ms in db.free_modes.items()
        },
        "coupling_vectors": [
            {
                "omega": v.omega,
                "rayleigh_root": v.rayleigh_root,
                "method": v.method,
                "source": v.source,
                "receiver": v.receiver,
                "singular_value": v.singular_value,
            }
            for v in db.coupling_vectors
        ],
    }
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("manifest.json", json.dumps(manifest, indent=2, sort_keys=True))
        for cid, ms in db.free_modes.items():
            _write_mm(zf, f"free_shapes_{cid}.mtx", ms.shapes)
        if db.coupling_vectors:
            shapes = np.column_stack([v.shape for v in db.coupling_vectors])
            _write_mm(zf, "coupling_shapes.mtx", shapes)


def load_database(
    path: Path | str,
    c1: Optional[ComponentModel] = None,
    c2: Optional[ComponentModel] = None,
    partial_reuse: bool = False,
) -> LoadResult:
    """Load a database, optionally verifying it against a component pair.

    With components supplied: a matrix-fingerprint mismatch is always a
    StaleDatabaseError; a partition-only mismatch is stale too unless
    `partial_reuse` is set, in which case the free modes are kept and the
    coupling vectors are discarded.
    """
    path = Path(path)
    if not path.exists():
        raise FormatError(f"database file not found: {path}")
    try:
        with zipfile.ZipFile(path) as zf:
            manifest = json.loads(zf.read("manifest.json").decode())
            if manifest.get("format_version") != FORMAT_VERSION:
                raise FormatError(
                    f"unsupported database format version "
                    f"{manifest.get('format_version')}"
                )
            fingerprint = ModelFingerprint.from_dict(manifest["fingerprint"])
            free_modes: dict[int, ModeSet] = {}
            for cid_str, meta in manifest["free_modes"].items():
                shapes = _read_mm(zf, f"free_shapes_{cid_str}.mtx")
                free_modes[int(cid_str)] = ModeSet(
                    frequencies=np.array(meta["frequencies"], dtype=float),
                    shapes=shapes,
                    dof_context=meta["dof_context"],
                    rigid_count=int(meta["rigid_count"]),
                )
            vec_meta = manifest["coupling_vectors"]
            vectors: list[CouplingVector] = []
            if vec_meta:
                shapes = _read_mm(zf, "coupling_shapes.mtx")
                if shapes.ndim == 1:
                    shapes = shapes.reshape(-1, 1)
                for k, meta in enumerate(vec_meta):
                    vectors.append(
                        CouplingVector(
                            shape=shapes[:, k],
                            omega=float(meta["omega"]),
                            rayleigh_root=float(meta["rayleigh_root"]),
                            method=meta["method"],
                            source=int(meta["source"]),
                            receiver=meta["receiver"],
                            singular_value=meta["singular_value"],
                        )
                    )
    except (zipfile.BadZipFile, KeyError, json.JSONDecodeError, ValueError) as exc:
        raise FormatError(f"corrupt database file {path}: {exc}") from exc

    db = CouplingDatabase(
        free_modes=free_modes,
        coupling_vectors=vectors,
        fingerprint=fingerprint,
        metadata=manifest.get("metadata", {}),
    )

    if c1 is None or c2 is None:
        return LoadResult(
            database=db,
            partial=False,
            retained_free_sets=len(free_modes),
            discarded_vectors=0,
        )

    current = fingerprint_pair(c1, c2)
    if current.matrices != fingerprint.matrices:
        raise StaleDatabaseError(
            "database was built from different component matrices "
            f"(stored {fingerprint.matrices[:12]}..., current {current.matrices[:12]}...)"
        )
    if current.partition != fingerprint.partition:
        if not partial_reuse:
            raise StaleDatabaseError(
                "database junction partition differs from the supplied "
                f"components (stored {fingerprint.partition[:12]}..., current "
                f"{current.partition[:12]}...); coupling vectors are stale — "
                "load with partial reuse to keep the free modes"
            )
        discarded = len(db.coupling_vectors)
        db = CouplingDatabase(
            free_modes=db.free_modes,
            coupling_vectors=[],
            fingerprint=current,
            metadata=db.metadata,
        )
        return LoadResult(
            database=db,
            partial=True,
            retained_free_sets=len(db.free_modes),
            discarded_vectors=discarded,
        )
    return LoadResult(
        database=db,
        partial=False,
        retained_free_sets=len(free_modes),
        discarded_vectors=0,
    )
