"""End-to-end batch pipeline: two observation years to cohort reports.

Stages run sequentially; the per-card inference inside a year is
partitioned across threads by a stable hash of the card id.  Every
reduction is either a dict merge of disjoint key sets or an iteration in
sorted card order, so the output bytes cannot depend on the thread
count.
"""

from __future__ import annotations

import logging
import os
import zlib
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date

from . import chain, infer
from .cohort import CHANGE_KM_DEFAULT, CohortDelta, build_delta, match_cohort
from .geo import (
    CLUSTER_RADIUS_M,
    Coord,
    DEFAULT_CENTER,
    PlaceIndex,
    Region,
    build_places,
    load_region,
    load_region_features,
    point_in_region,
)
from .groups import DeprivationScore, DeprivationSummary, GroupAssignment, classify, score_deprivation
from .ingest import (
    ObservationWeek,
    Rejection,
    TransactionRecord,
    derive_week_start,
    geocode,
    group_by_card,
    iter_lines,
    load_stops,
    parse_transactions,
)

log = logging.getLogger(__name__)


class MissingInputError(Exception):
    """A configured input path does not exist."""


@dataclass
class RunConfig:
    year1: str
    year2: str
    stops1: str
    stops2: str
    followup: str | None = None
    r4: str | None = None
    taz: str | None = None
    center: Coord = DEFAULT_CENTER
    stay_mode: str = chain.PERMISSIVE
    home_rule: str = infer.HOME_RULE_RELAXED
    stay_min: int = infer.STAY_MIN_DEFAULT
    cluster_m: float = CLUSTER_RADIUS_M
    change_km: float = CHANGE_KM_DEFAULT
    threads: int = 1
    out_dir: str | None = None
    week1_start: date | None = None
    week2_start: date | None = None
    followup_start: date | None = None

    def validate(self) -> None:
        if self.stay_min <= 0 or self.cluster_m <= 0:
            raise ValueError("thresholds must be positive")
        if self.change_km < 0:
            raise ValueError("change_km must be non-negative")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        missing = [
            p
            for p in (self.year1, self.year2, self.stops1, self.stops2, self.followup, self.r4, self.taz)
            if p is not None and not os.path.exists(p)
        ]
        if missing:
            raise MissingInputError(f"missing input file(s): {', '.join(missing)}")


@dataclass
class YearData:
    week: ObservationWeek
    places: PlaceIndex
    profiles: dict[str, infer.YearProfile]
    rejections: list[Rejection]
    stop_rejections: list[Rejection]
    unmatched: Counter
    parsed: int
    kept: int


@dataclass
class PipelineResult:
    config: RunConfig
    year1: YearData
    year2: YearData
    fr_cards: list[str]
    deltas: dict[str, CohortDelta]
    assignments: dict[str, GroupAssignment]
    scores: list[DeprivationScore] = field(default_factory=list)
    dep_summary: DeprivationSummary | None = None
    followup_counts: Counter = field(default_factory=Counter)
    followup_rejections: list[Rejection] = field(default_factory=list)
    r4_region: Region | None = None
    taz_regions: list[Region] | None = None
    taz_counts: list[int] | None = None
    taz_outside: int | None = None
    taz_overlap: bool = False

    @property
    def profiles1(self) -> dict[str, infer.YearProfile]:
        return self.year1.profiles

    @property
    def profiles2(self) -> dict[str, infer.YearProfile]:
        return self.year2.profiles

    @property
    def places1(self) -> PlaceIndex:
        return self.year1.places

    @property
    def places2(self) -> PlaceIndex:
        return self.year2.places


def _infer_cards(
    cards: list[str],
    by_card: dict[str, list[TransactionRecord]],
    places: PlaceIndex,
    week: ObservationWeek,
    cfg: RunConfig,
    label: str,
) -> dict[str, infer.YearProfile]:
    weekdays = week.weekdays
    out: dict[str, infer.YearProfile] = {}
    for card in cards:
        recs = by_card[card]
        legs = chain.build_legs(recs, places.stop_to_place)
        stays = chain.build_stays(card, legs, cfg.stay_mode)
        out[card] = infer.build_profile(
            card,
            label,
            recs[0].card_type,
            legs,
            stays,
            weekdays,
            places.centroid,
            rides=len(recs),
            home_rule=cfg.home_rule,
            stay_min=cfg.stay_min,
        )
    return out


def process_year(
    tx_path: str, stops_path: str, cfg: RunConfig, week_start: date | None
) -> YearData:
    stops, stop_rejections = load_stops(iter_lines(stops_path))
    places = build_places(stops, cfg.cluster_m)
    log.info("%s: %d stops in %d places", stops_path, len(stops), len(places))

    start = week_start or derive_week_start(iter_lines(tx_path)) or date(1970, 1, 5)
    week = ObservationWeek(label=str(start.year), start_date=start)

    records, rejections = parse_transactions(iter_lines(tx_path), week)
    kept, unmatched = geocode(records, stops)
    by_card = group_by_card(kept)
    cards = sorted(by_card)
    log.info(
        "%s: %d records parsed, %d rejected, %d geocoded, %d cards",
        tx_path, len(records), len(rejections), len(kept), len(cards),
    )

    if cfg.threads <= 1 or len(cards) < 2:
        profiles = _infer_cards(cards, by_card, places, week, cfg, week.label)
    else:
        shards: list[list[str]] = [[] for _ in range(cfg.threads)]
        for card in cards:
            shards[zlib.crc32(card.encode()) % cfg.threads].append(card)
        profiles = {}
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            futures = [
                pool.submit(_infer_cards, shard, by_card, places, week, cfg, week.label)
                for shard in shards
                if shard
            ]
            for f in futures:
                profiles.update(f.result())
    return YearData(
        week, places, profiles, rejections, stop_rejections, unmatched, len(records), len(kept)
    )


def _count_followup(path: str, week_start: date | None) -> tuple[Counter, list[Rejection]]:
    start = week_start or derive_week_start(iter_lines(path)) or date(1970, 1, 5)
    week = ObservationWeek(label=str(start.year), start_date=start)
    records, rejections = parse_transactions(iter_lines(path), week)
    counts: Counter = Counter(r.card_id for r in records)
    return counts, rejections


def aggregate_taz(
    centroids: list[Coord], regions: list[Region]
) -> tuple[list[int], int, bool]:
    """Assign each centroid to the first containing region.

    Returns per-region counts, the count outside all regions, and a flag
    telling whether any centroid fell inside more than one region.
    """
    counts = [0] * len(regions)
    outside = 0
    overlap = False
    for c in centroids:
        hits = [i for i, r in enumerate(regions) if point_in_region(c, r)]
        if not hits:
            outside += 1
            continue
        if len(hits) > 1:
            overlap = True
        counts[hits[0]] += 1
    return counts, outside, overlap


def run_pipeline(cfg: RunConfig) -> PipelineResult:
    """Compute everything the configured inputs allow.

    Report files are written separately (see the reports module); this
    function is pure computation plus input loading.
    """
    cfg.validate()

    y1 = process_year(cfg.year1, cfg.stops1, cfg, cfg.week1_start)
    y2 = process_year(cfg.year2, cfg.stops2, cfg, cfg.week2_start)

    r4_region = load_region(cfg.r4, "R4") if cfg.r4 else None
    in_r4 = (lambda c: point_in_region(c, r4_region)) if r4_region is not None else None

    fr_cards = match_cohort(y1.profiles, y2.profiles)
    log.info("cohort: %d frequent riders", len(fr_cards))

    deltas: dict[str, CohortDelta] = {}
    assignments: dict[str, GroupAssignment] = {}
    for card in fr_cards:
        d = build_delta(y1.profiles[card], y2.profiles[card], cfg.center, in_r4, cfg.change_km)
        deltas[card] = d
        assignments[card] = classify(d)

    result = PipelineResult(
        config=cfg,
        year1=y1,
        year2=y2,
        fr_cards=fr_cards,
        deltas=deltas,
        assignments=assignments,
        r4_region=r4_region,
    )

    if cfg.followup:
        counts, rejections = _count_followup(cfg.followup, cfg.followup_start)
        result.followup_counts = counts
        result.followup_rejections = rejections
        result.scores, result.dep_summary = score_deprivation(fr_cards, counts)
        log.info(
            "followup: %d cards seen, %d of %d FRs scored",
            len(counts), result.dep_summary.scored_count, len(fr_cards),
        )

    if cfg.taz:
        regions = load_region_features(cfg.taz)
        homes = [y2.profiles[c].home_centroid for c in fr_cards]
        counts, outside, overlap = aggregate_taz(homes, regions)
        result.taz_regions = regions
        result.taz_counts = counts
        result.taz_outside = outside
        result.taz_overlap = overlap
        if overlap:
            log.warning("overlapping TAZ polygons: homes assigned to first match in file order")

    return result
