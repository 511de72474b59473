"""Desk-scale two-component FE model generation and ingestion.

Two generators are provided: an axial spring-mass chain pair (with an exact
analytic spectrum, used as the hard oracle throughout the test suite) and a
pair of rectangular boxes meshed with 8-node trilinear hexahedra sharing a
planar face (a multi-DoF interface in the regime the reduction methods are
meant for). Components can also be ingested from Matrix Market files plus a
partition file, with the structural invariants checked on load.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy.io
import scipy.sparse as sparse

from .errors import (
    FormatError,
    InterfaceIncoherenceError,
    InvalidArgumentError,
    ValidityError,
)

# Dense storage is used below this DoF count; above it, assembly stays sparse.
DENSE_DOF_THRESHOLD = 5000


def dense(A) -> np.ndarray:
    """Dense float view of a possibly-sparse matrix."""
    if sparse.issparse(A):
        return A.toarray()
    return np.asarray(A, dtype=float)


@dataclass(frozen=True)
class MaterialSpec:
    """Linear isotropic material constants.

    poisson_ratio only matters for solid elements; the chain generator
    ignores it.
    """

    youngs_modulus: float  # Pa
    density: float  # kg/m^3
    poisson_ratio: float = 0.3

    def __post_init__(self):
        if self.youngs_modulus <= 0.0:
            raise InvalidArgumentError(
                f"youngs_modulus must be > 0, got {self.youngs_modulus}"
            )
        if self.density <= 0.0:
            raise InvalidArgumentError(f"density must be > 0, got {self.density}")
        if not 0.0 <= self.poisson_ratio < 0.5:
            raise InvalidArgumentError(
                f"poisson_ratio must lie in [0, 0.5), got {self.poisson_ratio}"
            )

    @classmethod
    def steel(cls) -> "MaterialSpec":
        return cls(youngs_modulus=210e9, density=7850.0, poisson_ratio=0.3)

    @classmethod
    def unit(cls) -> "MaterialSpec":
        return cls(youngs_modulus=1.0, density=1.0, poisson_ratio=0.3)


@dataclass(frozen=True)
class DofPartition:
    """Interior/junction split of one component's DoF, both 0-based."""

    interior: np.ndarray
    junction: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "interior", np.asarray(self.interior, dtype=np.int64)
        )
        object.__setattr__(
            self, "junction", np.asarray(self.junction, dtype=np.int64)
        )

    @property
    def n_dof(self) -> int:
        return self.interior.size + self.junction.size

    def validate(self, n_dof: int) -> None:
        both = np.concatenate([self.interior, self.junction])
        if both.size and (both.min() < 0 or both.max() >= n_dof):
            raise InvalidArgumentError(
                f"partition index out of range for {n_dof} DoF "
                f"(min {both.min()}, max {both.max()})"
            )
        if np.intersect1d(self.interior, self.junction).size:
            raise InvalidArgumentError("interior and junction DoF sets overlap")
        if np.unique(both).size != n_dof:
            raise InvalidArgumentError(
                f"partition covers {np.unique(both).size} of {n_dof} DoF"
            )


@dataclass
class ComponentModel:
    """One substructure: mass/stiffness matrices plus its DoF partition.

    Immutable by convention after construction; nothing in the package
    mutates a built component.
    """

    id: int
    mass: np.ndarray
    stiffness: np.ndarray
    partition: DofPartition
    node_coords: Optional[np.ndarray] = None
    dofs_per_node: int = 1
    length_scale: Optional[float] = None

    @property
    def n_dof(self) -> int:
        return self.mass.shape[0]

    @property
    def n_junction(self) -> int:
        return int(self.partition.junction.size)

    def submatrices(self, which: str):
        """Partition blocks of `which` ('mass' or 'stiffness') as (ii, ij, jj)."""
        A = dense(getattr(self, which))
        i, j = self.partition.interior, self.partition.junction
        return A[np.ix_(i, i)], A[np.ix_(i, j)], A[np.ix_(j, j)]

    def dynamic_stiffness(self, omega: float) -> np.ndarray:
        """Component-local K - omega^2 M."""
        return self.stiffness - omega**2 * self.mass

    def validate(self, sym_rtol: float = 1e-10) -> None:
        """Check symmetry, M > 0, K >= 0; raise on violation."""
        for name in ("mass", "stiffness"):
            A = dense(getattr(self, name))
            if A.ndim != 2 or A.shape[0] != A.shape[1]:
                raise FormatError(f"{name} matrix is not square: shape {A.shape}")
            scale = np.abs(A).max() or 1.0
            delta = np.abs(A - A.T)
            worst = np.unravel_index(np.argmax(delta), delta.shape)
            if delta[worst] > sym_rtol * scale:
                raise FormatError(
                    f"{name} matrix asymmetric: entry {worst} differs from its "
                    f"transpose by {delta[worst]:.3e} (scale {scale:.3e})"
                )
        self.partition.validate(self.n_dof)
        wm = np.linalg.eigvalsh(dense(self.mass))
        if wm[0] <= 1e-12 * max(wm[-1], 1.0):
            raise ValidityError(
                f"mass matrix of component {self.id} is not positive definite "
                f"(smallest eigenvalue {wm[0]:.3e})"
            )
        wk = np.linalg.eigvalsh(dense(self.stiffness))
        if wk[0] < -1e-8 * max(wk[-1], 1.0):
            raise ValidityError(
                f"stiffness matrix of component {self.id} is indefinite "
                f"(smallest eigenvalue {wk[0]:.3e})"
            )


# ---------------------------------------------------------------------------
# Chain generator
# ---------------------------------------------------------------------------


def build_chain_pair(
    n1: int,
    n2: int,
    material: MaterialSpec,
    element_length: float = 1.0,
    area: float = 1.0,
) -> tuple[ComponentModel, ComponentModel]:
    """Two free-free axial chains sharing one junction DoF at x = 0.

    Each chain is a uniform lumped-mass spring chain: axial stiffness
    k = E*A/L per element and half the element mass lumped at each end
    node. Component 1 spans x in [-n1*L, 0] with its junction at the last
    node; component 2 spans [0, n2*L] with its junction at node 0.
    """
    if n1 < 2 or n2 < 2:
        raise InvalidArgumentError(f"element counts must be >= 2, got {n1}, {n2}")
    if element_length <= 0 or area <= 0:
        raise InvalidArgumentError("element_length and area must be positive")

    k = material.youngs_modulus * area / element_length
    m = material.density * area * element_length

    def one_chain(n_el: int, comp_id: int) -> ComponentModel:
        n = n_el + 1
        K = np.zeros((n, n))
        M = np.zeros((n, n))
        for e in range(n_el):
            K[e : e + 2, e : e + 2] += k * np.array([[1.0, -1.0], [-1.0, 1.0]])
            M[e, e] += m / 2.0
            M[e + 1, e + 1] += m / 2.0
        if comp_id == 1:
            junction = np.array([n_el])
            coords = (np.arange(n) - n_el) * element_length
        else:
            junction = np.array([0])
            coords = np.arange(n) * element_length
        interior = np.setdiff1d(np.arange(n), junction)
        part = DofPartition(interior=interior, junction=junction)
        return ComponentModel(
            id=comp_id,
            mass=M,
            stiffness=K,
            partition=part,
            node_coords=coords.reshape(-1, 1),
            dofs_per_node=1,
            length_scale=element_length,
        )

    return one_chain(n1, 1), one_chain(n2, 2)


def chain_frequencies_free(n_el: int, k: float, m: float) -> np.ndarray:
    """Exact spectrum (Hz) of a free-free uniform lumped chain.

    The discrete eigenvectors are cos(j*p*pi/N) at node j, which gives
    omega_p = 2*sqrt(k/m)*sin(p*pi/(2N)) for p = 0..N.
    """
    p = np.arange(n_el + 1)
    omega = 2.0 * np.sqrt(k / m) * np.sin(p * np.pi / (2 * n_el))
    return omega / (2.0 * np.pi)


def chain_frequencies_fixed(n_el: int, k: float, m: float) -> np.ndarray:
    """Exact spectrum (Hz) of a uniform lumped chain clamped at one end."""
    p = np.arange(1, n_el + 1)
    omega = 2.0 * np.sqrt(k / m) * np.sin((2 * p - 1) * np.pi / (4 * n_el))
    return omega / (2.0 * np.pi)


# ---------------------------------------------------------------------------
# Hexahedral box generator
# ---------------------------------------------------------------------------

# Local corner order: natural coordinates (xi, eta, zeta) = (+-1, +-1, +-1)
_HEX_CORNERS = np.array(
    [
        [-1, -1, -1],
        [1, -1, -1],
        [1, 1, -1],
        [-1, 1, -1],
        [-1, -1, 1],
        [1, -1, 1],
        [1, 1, 1],
        [-1, 1, 1],
    ],
    dtype=float,
)
_HEX_OFFSETS = ((_HEX_CORNERS + 1) / 2).astype(int)  # grid offsets in (ix, iy, iz)


def elasticity_matrix(material: MaterialSpec) -> np.ndarray:
    """6x6 isotropic elasticity matrix in engineering (Voigt) notation."""
    E, nu = material.youngs_modulus, material.poisson_ratio
    lam = E * nu / ((1 + nu) * (1 - 2 * nu))
    mu = E / (2 * (1 + nu))
    D = np.zeros((6, 6))
    D[:3, :3] = lam
    D[np.arange(3), np.arange(3)] = lam + 2 * mu
    D[np.arange(3, 6), np.arange(3, 6)] = mu
    return D


def hex8_matrices(material: MaterialSpec, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Stiffness and consistent mass of a cube element of side h.

    2x2x2 Gauss quadrature, which is exact for the trilinear integrands on
    an undistorted cube. Both outputs are symmetrized so that assembled
    matrices are symmetric to the last bit.
    """
    D = elasticity_matrix(material)
    g = 1.0 / np.sqrt(3.0)
    pts = [(-g, g)[i] for i in range(2)]
    detJ = (h / 2.0) ** 3
    dnat_to_dx = 2.0 / h

    Ke = np.zeros((24, 24))
    Me = np.zeros((24, 24))
    for xi in pts:
        for eta in pts:
            for zeta in pts:
                shp = np.empty(8)
                dshp = np.empty((8, 3))
                for a in range(8):
                    sx, sy, sz = _HEX_CORNERS[a]
                    shp[a] = (1 + sx * xi) * (1 + sy * eta) * (1 + sz * zeta) / 8.0
                    dshp[a, 0] = sx * (1 + sy * eta) * (1 + sz * zeta) / 8.0
                    dshp[a, 1] = sy * (1 + sx * xi) * (1 + sz * zeta) / 8.0
                    dshp[a, 2] = sz * (1 + sx * xi) * (1 + sy * eta) / 8.0
                dshp *= dnat_to_dx

                B = np.zeros((6, 24))
                N = np.zeros((3, 24))
                for a in range(8):
                    dx, dy, dz = dshp[a]
                    c = 3 * a
                    B[0, c] = dx
                    B[1, c + 1] = dy
                    B[2, c + 2] = dz
                    B[3, c] = dy
                    B[3, c + 1] = dx
                    B[4, c + 1] = dz
                    B[4, c + 2] = dy
                    B[5, c] = dz
                    B[5, c + 2] = dx
                    N[0, c] = N[1, c + 1] = N[2, c + 2] = shp[a]
                Ke += (B.T @ D @ B) * detJ
                Me += material.density * (N.T @ N) * detJ

    Ke = (Ke + Ke.T) / 2.0
    Me = (Me + Me.T) / 2.0
    return Ke, Me


def build_box_pair(
    divisions1: Sequence[int],
    divisions2: Sequence[int],
    material: MaterialSpec,
    element_size: float = 0.02,
) -> tuple[ComponentModel, ComponentModel]:
    """Two hexahedral boxes of cube elements sharing the planar face x = 0.

    Component 1 occupies x <= 0, component 2 occupies x >= 0; both are
    meshed with cube elements of side `element_size`, so the shared-face
    grids coincide exactly when the (ny, nz) divisions match. Junction
    DoF are the 3 translations of each shared-face node, ordered
    lexicographically by the (iy, iz) grid position of the node on both
    sides.
    """
    d1 = tuple(int(d) for d in divisions1)
    d2 = tuple(int(d) for d in divisions2)
    for d in (d1, d2):
        if len(d) != 3 or min(d) < 1:
            raise InvalidArgumentError(f"divisions must be 3 counts >= 1, got {d}")
    if d1[1:] != d2[1:]:
        raise InterfaceIncoherenceError(
            f"shared-face grids differ: component 1 has (ny, nz) = {d1[1:]}, "
            f"component 2 has {d2[1:]}"
        )
    if element_size <= 0:
        raise InvalidArgumentError("element_size must be positive")

    Ke, Me = hex8_matrices(material, element_size)

    def one_box(div: tuple[int, int, int], comp_id: int) -> ComponentModel:
        nx, ny, nz = div
        n_nodes = (nx + 1) * (ny + 1) * (nz + 1)
        n = 3 * n_nodes

        def node_id(ix: int, iy: int, iz: int) -> int:
            return (ix * (ny + 1) + iy) * (nz + 1) + iz

        rows, cols, kv, mv = [], [], [], []
        for ex in range(nx):
            for ey in range(ny):
                for ez in range(nz):
                    nodes = [
                        node_id(ex + ox, ey + oy, ez + oz)
                        for ox, oy, oz in _HEX_OFFSETS
                    ]
                    edofs = np.array(
                        [3 * nd + c for nd in nodes for c in range(3)]
                    )
                    rr = np.repeat(edofs, 24)
                    cc = np.tile(edofs, 24)
                    rows.append(rr)
                    cols.append(cc)
                    kv.append(Ke.ravel())
                    mv.append(Me.ravel())
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        K = sparse.coo_matrix((np.concatenate(kv), (rows, cols)), shape=(n, n))
        M = sparse.coo_matrix((np.concatenate(mv), (rows, cols)), shape=(n, n))
        if n <= DENSE_DOF_THRESHOLD:
            K, M = K.toarray(), M.toarray()
        else:
            K, M = K.tocsr(), M.tocsr()

        # Geometry: component 1 ends at x = 0, component 2 starts there.
        x0 = -nx * element_size if comp_id == 1 else 0.0
        coords = np.empty((n_nodes, 3))
        for ix in range(nx + 1):
            for iy in range(ny + 1):
                for iz in range(nz + 1):
                    coords[node_id(ix, iy, iz)] = (
                        x0 + ix * element_size,
                        iy * element_size,
                        iz * element_size,
                    )

        face_ix = nx if comp_id == 1 else 0
        face_nodes = [
            node_id(face_ix, iy, iz)
            for iy in range(ny + 1)
            for iz in range(nz + 1)
        ]
        junction = np.array([3 * nd + c for nd in face_nodes for c in range(3)])
        interior = np.setdiff1d(np.arange(n), junction)
        part = DofPartition(interior=interior, junction=junction)
        return ComponentModel(
            id=comp_id,
            mass=M,
            stiffness=K,
            partition=part,
            node_coords=coords,
            dofs_per_node=3,
            length_scale=element_size,
        )

    return one_box(d1, 1), one_box(d2, 2)


def rigid_body_vectors(c: ComponentModel) -> np.ndarray:
    """Geometric rigid-body vectors of a component (columns).

    One constant vector for a 1-DoF/node chain; three translations and
    three infinitesimal rotations for a 3-DoF/node solid.
    """
    n = c.n_dof
    if c.dofs_per_node == 1:
        return np.ones((n, 1))
    if c.node_coords is None:
        raise InvalidArgumentError("rigid-body vectors need node coordinates")
    xyz = c.node_coords - c.node_coords.mean(axis=0)
    vecs = np.zeros((n, 6))
    n_nodes = n // 3
    for ax in range(3):
        vecs[ax::3, ax] = 1.0
    for nd in range(n_nodes):
        x, y, z = xyz[nd]
        vecs[3 * nd : 3 * nd + 3, 3] = (0.0, -z, y)
        vecs[3 * nd : 3 * nd + 3, 4] = (z, 0.0, -x)
        vecs[3 * nd : 3 * nd + 3, 5] = (-y, x, 0.0)
    return vecs


def check_coherence(c1: ComponentModel, c2: ComponentModel) -> None:
    """Verify the two junction DoF lists match one-to-one.

    Raises InterfaceIncoherenceError on length mismatch or, when both
    components carry geometry, when matched junction nodes do not
    coincide within 1e-12 of the element scale.
    """
    j1, j2 = c1.partition.junction, c2.partition.junction
    if j1.size != j2.size:
        raise InterfaceIncoherenceError(
            f"junction DoF counts differ: {j1.size} vs {j2.size}"
        )
    if (
        c1.node_coords is not None
        and c2.node_coords is not None
        and c1.dofs_per_node == c2.dofs_per_node
        and c1.length_scale
        and c2.length_scale
    ):
        dpn = c1.dofs_per_node
        tol = 1e-12 * max(c1.length_scale, c2.length_scale)
        p1 = c1.node_coords[j1 // dpn]
        p2 = c2.node_coords[j2 // dpn]
        dist = np.linalg.norm(p1 - p2, axis=1)
        if dist.size and dist.max() > tol:
            worst = int(np.argmax(dist))
            raise InterfaceIncoherenceError(
                f"junction DoF pair {worst} maps to nodes {dist[worst]:.3e} apart"
            )


# ---------------------------------------------------------------------------
# File I/O: Matrix Market matrices + partition files
# ---------------------------------------------------------------------------


def write_matrix(path: Path | str, A: np.ndarray) -> None:
    """Write a symmetric matrix in Matrix Market coordinate format (lower)."""
    coo = sparse.coo_matrix(np.asarray(A))
    scipy.io.mmwrite(str(path), coo, symmetry="symmetric", precision=17)


def write_general_matrix(path: Path | str, A: np.ndarray) -> None:
    """Write a (possibly rectangular) dense matrix in Matrix Market array format."""
    scipy.io.mmwrite(str(path), np.asarray(A, dtype=float), precision=17)


def read_matrix(path: Path | str) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise FormatError(f"matrix file not found: {path}")
    try:
        A = scipy.io.mmread(str(path))
    except Exception as exc:
        raise FormatError(f"cannot parse Matrix Market file {path}: {exc}") from exc
    if sparse.issparse(A):
        A = A.toarray()
    return np.asarray(A, dtype=float)


def write_partition(path: Path | str, part: DofPartition) -> None:
    payload = {
        "interior": part.interior.tolist(),
        "junction": part.junction.tolist(),
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def read_partition(path: Path | str) -> DofPartition:
    path = Path(path)
    if not path.exists():
        raise FormatError(f"partition file not found: {path}")
    try:
        payload = json.loads(path.read_text())
        return DofPartition(
            interior=np.array(payload["interior"], dtype=np.int64),
            junction=np.array(payload["junction"], dtype=np.int64),
        )
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"cannot parse partition file {path}: {exc}") from exc


def export_component(c: ComponentModel, directory: Path | str, prefix: str) -> dict:
    """Write mass/stiffness/partition files; returns the path map."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "mass": directory / f"{prefix}_mass.mtx",
        "stiffness": directory / f"{prefix}_stiffness.mtx",
        "partition": directory / f"{prefix}_partition.json",
    }
    write_matrix(paths["mass"], np.asarray(c.mass))
    write_matrix(paths["stiffness"], np.asarray(c.stiffness))
    write_partition(paths["partition"], c.partition)
    return {k: str(v) for k, v in paths.items()}


def ingest_component(
    mass_file: Path | str,
    stiffness_file: Path | str,
    partition_file: Path | str,
    component_id: int = 1,
) -> ComponentModel:
    """Load a component from files, checking all invariants before returning."""
    M = read_matrix(mass_file)
    K = read_matrix(stiffness_file)
    if M.shape != K.shape:
        raise FormatError(
            f"mass {M.shape} and stiffness {K.shape} dimensions differ"
        )
    part = read_partition(partition_file)
    c = ComponentModel(
        id=component_id, mass=M, stiffness=K, partition=part, dofs_per_node=1
    )
    c.validate()
    return c


# ---------------------------------------------------------------------------
# Fingerprints (used by the coupling database and report comparability)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelFingerprint:
    """Separate digests for the matrices and the partition.

    Repositioning an interface changes only the partition digest; the free
    modes stay reusable in that case while coupling vectors do not.
    """

    matrices: str
    partition: str

    def to_dict(self) -> dict:
        return {"matrices": self.matrices, "partition": self.partition}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelFingerprint":
        return cls(matrices=d["matrices"], partition=d["partition"])


def fingerprint_pair(c1: ComponentModel, c2: ComponentModel) -> ModelFingerprint:
    hm = hashlib.sha256()
    hp = hashlib.sha256()
    for c in (c1, c2):
        hm.update(np.int64(c.n_dof).tobytes())
        hm.update(np.ascontiguousarray(dense(c.mass), dtype=np.float64).tobytes())
        hm.update(np.ascontiguousarray(dense(c.stiffness), dtype=np.float64).tobytes())
        hp.update(np.ascontiguousarray(c.partition.interior, np.int64).tobytes())
        hp.update(b"|")
        hp.update(np.ascontiguousarray(c.partition.junction, np.int64).tobytes())
        hp.update(b"#")
    return ModelFingerprint(matrices=hm.hexdigest(), partition=hp.hexdigest())
