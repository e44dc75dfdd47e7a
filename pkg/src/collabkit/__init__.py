"""Batch analytics for international research co-production.

Harvests scholarly metadata from OpenAlex into a reproducible page cache,
builds country/institution co-production count tables, derives Jaccard
distance geometry (embedding, Ward clustering, threshold cuts, integration
measures), and emits plot-ready artifacts.
"""

__version__ = "0.1.0"

from .corpus import (
    CountTable,
    Period,
    WorkRecord,
    build_count_table,
    merge_tables,
    top_entities,
    unknown_rate,
)
from .errors import CollabKitError
from .geometry import (
    ClusterCut,
    Dendrogram,
    DistanceMatrix,
    Embedding,
    IcdResult,
    affinity,
    cut_clusters,
    distance_matrix,
    euclidean_embedding,
    icd,
    ward_cluster,
)
from .ingest import (
    ConceptCatalog,
    OpenAlexClient,
    PageCache,
    WorksQuery,
    crawl_concepts,
    expand_concept,
    harvest,
)
from .metrics import (
    IcdSeries,
    KdeCurve,
    YearSeries,
    apply_min_volume_mask,
    bilateral_distance_series,
    intl_collab_rate,
    kde,
)
from .report import ChordData, chord_data, export_series, render_circular_dendrogram

__all__ = [
    "__version__",
    "CollabKitError",
    "CountTable",
    "Period",
    "WorkRecord",
    "build_count_table",
    "merge_tables",
    "top_entities",
    "unknown_rate",
    "ClusterCut",
    "Dendrogram",
    "DistanceMatrix",
    "Embedding",
    "IcdResult",
    "affinity",
    "cut_clusters",
    "distance_matrix",
    "euclidean_embedding",
    "icd",
    "ward_cluster",
    "ConceptCatalog",
    "OpenAlexClient",
    "PageCache",
    "WorksQuery",
    "crawl_concepts",
    "expand_concept",
    "harvest",
    "IcdSeries",
    "KdeCurve",
    "YearSeries",
    "apply_min_volume_mask",
    "bilateral_distance_series",
    "intl_collab_rate",
    "kde",
    "ChordData",
    "chord_data",
    "export_series",
    "render_circular_dendrogram",
]
