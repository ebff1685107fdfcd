"""POI acquisition, normalization, buffering, deduplication, and grouping."""

from .catalog import (  # noqa: F401
    GroupTaxonomy,
    MergeReport,
    MULTIPLE_TYPE,
    NormalizeReport,
    Poi,
    RawPoi,
    add_manual_pois,
    assign_groups,
    assign_primary,
    collapse_harvest_duplicates,
    dedupe_and_merge,
    default_buffer_specs_path,
    default_manual_pois_path,
    default_plan_path,
    default_taxonomy_path,
    exclude_primary_types,
    generate_buffers,
    load_buffer_specs,
    load_catalog,
    load_manual_entries,
    load_taxonomy,
    location_key,
    normalize_catalog,
    save_catalog,
    save_raw_pois,
    load_raw_pois,
)
from .client import (  # noqa: F401
    DENSIFY_TEXT_QUERIES,
    FixturePlacesClient,
    HarvestReport,
    HarvestResult,
    LivePlacesClient,
    QueryBudget,
    QueryPlanEntry,
    canonical_query,
    fetch_nearby,
    fetch_text,
    harvest,
    load_plan,
    select_low_density_cells,
)
