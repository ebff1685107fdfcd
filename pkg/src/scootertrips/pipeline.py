"""Full-pipeline orchestration: run every stage in order, write artifacts and a
manifest with per-stage counts, versions, and the config hash.

Artifacts carry no timestamps, so a rerun with the same config is
byte-identical; the manifest's created_at field is the only exception.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import platform
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, kernels
from .assoc import apply_threshold, associate, catalog_index, sensitivity, write_associated_csv, write_sensitivity_csv
from .config import PipelineConfig, config_hash
from .errors import BudgetExhausted, InvalidConfig, PipelineError
from .geo import make_grid
from .ingest import bounding_box_filter, parse_snapshot_stream
from .poi import (
    FixturePlacesClient,
    QueryBudget,
    default_buffer_specs_path,
    default_manual_pois_path,
    default_plan_path,
    default_taxonomy_path,
    harvest,
    load_buffer_specs,
    load_manual_entries,
    load_plan,
    load_taxonomy,
    normalize_catalog,
    save_catalog,
    save_raw_pois,
    select_low_density_cells,
)
from .poi.client import DENSIFY_TEXT_QUERIES, QueryPlanEntry
from .purpose import (
    TimeSlot,
    build_matrix,
    day_class_predicate,
    drill_down,
    slot_predicate,
    write_drilldown_csv,
    write_matrix_csv,
    write_matrix_long_csv,
)
from .synth import ScenarioConfig, generate, save_truth, write_feed
from .trips import clean_trips, crop_trips, extract_trips, write_trips_csv

log = logging.getLogger(__name__)


class StageFailure(PipelineError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class Manifest:
    config_sha256: str
    stages: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    status: str = "ok"
    failed_stage: str | None = None

    def to_dict(self) -> dict:
        return {
            "package": "scootertrips",
            "package_version": __version__,
            "python_version": platform.python_version(),
            "kernel_backend": kernels.backend(),
            "config_sha256": self.config_sha256,
            "created_at": datetime.now(timezone.utc).isoformat(),
            "status": self.status,
            "failed_stage": self.failed_stage,
            "stages": self.stages,
            "artifacts": self.artifacts,
        }


def _write_manifest(manifest: Manifest, out_dir: Path) -> None:
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")


def run_pipeline(cfg: PipelineConfig, raw_config: dict, out_dir) -> Manifest:
    """Execute every stage; on failure the manifest records the stage and any
    partial artifacts stay on disk with status FAILED."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(config_sha256=config_hash(raw_config))
    stage = "setup"

    def artifact(path: Path) -> Path:
        manifest.artifacts[path.name] = _sha256(path)
        return path

    try:
        # --- simulate (optional) -------------------------------------------------
        feed_path = Path(cfg.feed) if cfg.feed else None
        if feed_path is None:
            stage = "simulate"
            if not cfg.scenario:
                raise InvalidConfig("config needs either paths.feed or paths.scenario")
            scenario = ScenarioConfig.load(cfg.scenario)
            truth, batches = generate(scenario)
            feed_path = out_dir / "feed.jsonl"
            write_feed(batches, feed_path)
            save_truth(truth, out_dir / "truth.json", cadence_s=scenario.cadence_s, timezone_name=scenario.timezone)
            artifact(feed_path)
            artifact(out_dir / "truth.json")
            manifest.stages["simulate"] = {
                "truth_trips": len(truth),
                "batches": len(batches),
                "observations": sum(len(b.observations) for b in batches),
            }

        # --- ingest + extract ----------------------------------------------------
        stage = "ingest"
        stream = parse_snapshot_stream(feed_path, format=cfg.feed_format)
        batches_iter = bounding_box_filter(stream, cfg.bbox) if cfg.ingest_bbox else stream
        stage = "extract"
        raw_trips = extract_trips(batches_iter, timezone_name=cfg.timezone)
        manifest.stages["ingest"] = stream.stats.to_dict()
        manifest.stages["extract"] = {"raw_trips": len(raw_trips)}

        # --- clean ---------------------------------------------------------------
        stage = "clean"
        cleaned, clean_report = clean_trips(raw_trips, cfg.cleaning)
        trips_path = out_dir / "trips.csv"
        write_trips_csv(cleaned, trips_path)
        artifact(trips_path)
        with open(out_dir / "cleaning_report.json", "w", encoding="utf-8") as fh:
            json.dump(clean_report.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")
        artifact(out_dir / "cleaning_report.json")
        manifest.stages["clean"] = clean_report.to_dict()

        # --- region crop (cleaning first, then region selection) ------------------
        stage = "crop"
        region_trips, cropped = crop_trips(cleaned, cfg.bbox)
        manifest.stages["crop"] = {"in_region": len(region_trips), "removed_outside_region": cropped}

        # --- harvest ---------------------------------------------------------------
        stage = "harvest"
        fixtures_dir = os.environ.get("SCOOTER_FIXTURES_DIR") or cfg.fixtures_dir
        if not fixtures_dir:
            raise InvalidConfig("config needs paths.fixtures_dir (or SCOOTER_FIXTURES_DIR)")
        client = FixturePlacesClient(fixtures_dir)
        plan = load_plan(cfg.plan or default_plan_path())
        budget = QueryBudget(cfg.query_budget)
        grid = make_grid(cfg.bbox, cfg.harvest_rows, cfg.harvest_cols)
        result = harvest(client, grid, plan, budget)
        raw_pois = result.pois
        harvest_stats = {
            "grid": [cfg.harvest_rows, cfg.harvest_cols],
            "queries": len(result.report.queries),
            "truncated_queries": result.report.truncated_queries,
            "raw_pois": len(result.pois),
        }
        if cfg.densify:
            grid15 = make_grid(cfg.bbox, cfg.densify_rows, cfg.densify_cols)
            low_cells = select_low_density_cells(grid15, raw_pois, cfg.densify_fraction)
            densify_plan = [QueryPlanEntry(kind="text", term=q) for q in DENSIFY_TEXT_QUERIES]
            densify_result = harvest(client, grid15, densify_plan, budget, cells=low_cells)
            raw_pois = raw_pois + densify_result.pois
            harvest_stats["densify"] = {
                "grid": [cfg.densify_rows, cfg.densify_cols],
                "cells_requeried": len(low_cells),
                "queries": len(densify_result.report.queries),
                "raw_pois": len(densify_result.pois),
            }
        harvest_stats["budget_used"] = budget.used
        pois_path = out_dir / "pois_raw.json"
        save_raw_pois(raw_pois, pois_path)
        artifact(pois_path)
        manifest.stages["harvest"] = harvest_stats

        # --- normalize -------------------------------------------------------------
        stage = "normalize"
        taxonomy = load_taxonomy(cfg.taxonomy or default_taxonomy_path())
        manual = load_manual_entries(cfg.manual_pois or default_manual_pois_path())
        buffer_specs = load_buffer_specs(cfg.buffers or default_buffer_specs_path())
        catalog, normalize_report = normalize_catalog(raw_pois, taxonomy, manual, buffer_specs)
        catalog_path = out_dir / "catalog.json"
        save_catalog(catalog, catalog_path)
        artifact(catalog_path)
        manifest.stages["normalize"] = normalize_report.to_dict()

        # --- associate ---------------------------------------------------------------
        stage = "associate"
        index = catalog_index(catalog)
        associated = associate(region_trips, index)
        within = apply_threshold(associated, cfg.cutoff_m)
        assoc_path = out_dir / "assoc.csv"
        write_associated_csv(associated, assoc_path)
        artifact(assoc_path)
        cut_path = out_dir / "assoc_within_cutoff.csv"
        write_associated_csv(within, cut_path)
        artifact(cut_path)
        manifest.stages["associate"] = {
            "associated": len(associated),
            "within_cutoff": len(within),
            "cutoff_m": cfg.cutoff_m,
            "origin_reassigned": sum(1 for a in associated if a.origin_reassigned),
            "unresolved_collisions": sum(1 for a in associated if a.origin_poi == a.dest_poi),
        }

        # --- sensitivity -----------------------------------------------------------
        stage = "sensitivity"
        groups = list(taxonomy.groups)
        for endpoint in ("origin", "destination"):
            table = sensitivity(associated, cfg.thresholds, endpoint, catalog, groups=groups)
            path = out_dir / f"sensitivity_{endpoint}.csv"
            write_sensitivity_csv(table, path)
            artifact(path)
        manifest.stages["sensitivity"] = {"thresholds": cfg.thresholds}

        # --- report ------------------------------------------------------------------
        stage = "report"
        matrices = []
        overall = build_matrix(within, catalog, groups=groups)
        matrices.append(overall)
        overall_path = out_dir / "matrix_overall.csv"
        write_matrix_csv(overall, overall_path)
        artifact(overall_path)
        for slot in TimeSlot:
            m = build_matrix(within, catalog, slice=slot_predicate(slot, cfg.timezone), slice_key=slot.label, groups=groups)
            matrices.append(m)
            p = out_dir / f"matrix_slot_{slot.label}.csv"
            write_matrix_csv(m, p)
            artifact(p)
        for cls in ("weekday", "weekend"):
            m = build_matrix(within, catalog, slice=day_class_predicate(cls, cfg.timezone), slice_key=cls, groups=groups)
            matrices.append(m)
            p = out_dir / f"matrix_{cls}.csv"
            write_matrix_csv(m, p)
            artifact(p)
        long_path = out_dir / "matrices_long.csv"
        write_matrix_long_csv(matrices, long_path)
        artifact(long_path)
        drill_cells = {}
        for spec in cfg.drilldowns:
            og, dg = spec.split(":", 1)
            drill = drill_down(within, catalog, og, dg)
            safe = f"{og}_{dg}".replace("/", "-").replace(" ", "_")
            p = out_dir / f"drill_{safe}.csv"
            write_drilldown_csv(drill, p)
            artifact(p)
            drill_cells[spec] = drill.total
        manifest.stages["report"] = {
            "matrix_total": overall.total,
            "slots": [s.label for s in TimeSlot],
            "drilldowns": drill_cells,
        }
    except Exception as exc:
        manifest.status = "FAILED"
        manifest.failed_stage = stage
        _write_manifest(manifest, out_dir)
        log.error("pipeline failed at stage %s: %s", stage, exc)
        if isinstance(exc, BudgetExhausted):
            raise  # keeps its dedicated exit code
        if isinstance(exc, PipelineError):
            raise StageFailure(stage, exc) from exc
        raise
    _write_manifest(manifest, out_dir)
    return manifest
