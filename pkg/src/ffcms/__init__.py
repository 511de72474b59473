"""Free-free component mode synthesis for two-component assemblies.

Builds reduction bases from free-free component eigenmodes plus
interface coupling vectors (cross-traced or SVD-derived), scores them
against a full-model oracle and a Craig-Bampton baseline with MAC
metrics, and improves them with a residual-driven Arnoldi enrichment
loop.
"""

from .assembly import (
    AssembledSystem,
    DynamicStiffness,
    assemble,
    condense_stacked,
    dynamic_stiffness,
    split_elastic_interaction,
)
from .bases import (
    CouplingVector,
    InterfaceBasis,
    MethodBasisResult,
    ReductionBasis,
    assemble_method_basis,
    build_cross_basis,
    build_svd_basis,
    craig_bampton_basis,
    constraint_modes,
    cross_coupling_vectors,
    filter_by_rayleigh,
    gram_schmidt_against,
    rayleigh_root,
    svd_coupling_vectors,
    svd_interface_basis,
)
from .database import CouplingDatabase, LoadResult, load_database, save_database
from .eigen import (
    BandSpec,
    ModeSet,
    solve_component_modes,
    solve_fixed_interface_modes,
    solve_modes,
    solve_reduced,
)
from .enrich import (
    EnrichmentConfig,
    EnrichmentResult,
    IndicatorReport,
    enrich,
    indicator,
    residual_force,
)
from .models import (
    ComponentModel,
    DofPartition,
    MaterialSpec,
    build_box_pair,
    build_chain_pair,
    check_coherence,
    export_component,
    fingerprint_pair,
    ingest_component,
)
from .quality import (
    ComparisonTable,
    MacMatrix,
    QualityReport,
    compare_methods,
    mac,
    pair_and_average,
)

__version__ = "0.1.0"
