"""The 20-group resident taxonomy and the follow-up deprivation score.

Groups cross three axes: housing changed or not (major), job transition
category (middle), and whether the later home sits within the fourth
ring road (minor).  The numbering is fixed; downstream reports rely on
group k always meaning the same triple.

The deprivation score for an FR is its transaction count in a follow-up
observation week years later.  Cards absent from the follow-up data are
unscored; the summary statistics cover scored cards only and use exact
integer accumulation so they do not depend on iteration order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

from .cohort import CHANGED, FOUND, JOBLESS, LOST, NOT_CHANGED, CohortDelta

JOB_RANK = {CHANGED: 0, FOUND: 1, JOBLESS: 2, LOST: 3, NOT_CHANGED: 4}

JOB_LABELS = {
    CHANGED: "Yes",
    FOUND: "Find a job",
    JOBLESS: "Jobless",
    LOST: "Lose the job",
    NOT_CHANGED: "No",
}

LOCATION_WITHIN = "Within R4"
LOCATION_OUT = "Out of R4"

GROUP_COUNT = 20


@dataclass(frozen=True, slots=True)
class GroupAssignment:
    card_id: str
    group: int
    housing_changed: bool
    job_category: str
    within_r4: bool


def group_index(housing_changed: bool, job_category: str, within_r4: bool) -> int:
    """Group number 1..20 for a (housing, job, location) triple."""
    return (0 if housing_changed else 10) + 2 * JOB_RANK[job_category] + (2 if within_r4 else 1)


def group_triple(group: int) -> tuple[str, str, str]:
    """Reverse mapping: the three label columns for a group number."""
    if not 1 <= group <= GROUP_COUNT:
        raise ValueError(f"group out of range: {group}")
    housing = "Yes" if group <= 10 else "No"
    rank = ((group - 1) % 10) // 2
    job = JOB_LABELS[next(c for c, r in JOB_RANK.items() if r == rank)]
    location = LOCATION_WITHIN if group % 2 == 0 else LOCATION_OUT
    return housing, job, location


def classify(delta: CohortDelta) -> GroupAssignment:
    housing_changed = delta.housing_status == CHANGED
    return GroupAssignment(
        card_id=delta.card_id,
        group=group_index(housing_changed, delta.work_status, delta.r4_2010),
        housing_changed=housing_changed,
        job_category=delta.work_status,
        within_r4=delta.r4_2010,
    )


def group_counts(assignments: Iterable[GroupAssignment]) -> dict[int, int]:
    counts = {g: 0 for g in range(1, GROUP_COUNT + 1)}
    for a in assignments:
        counts[a.group] += 1
    return counts


@dataclass(frozen=True, slots=True)
class DeprivationScore:
    card_id: str
    followup_trips: int
    scored: bool


@dataclass(frozen=True, slots=True)
class DeprivationSummary:
    fr_count: int
    scored_count: int
    scored_fraction: float | None
    mean_trips: float | None
    std_trips: float | None


def score_deprivation(
    fr_cards: Iterable[str], followup_counts: Mapping[str, int]
) -> tuple[list[DeprivationScore], DeprivationSummary]:
    """Per-FR follow-up trip counts plus a summary over scored cards.

    The standard deviation is the population form, computed from exact
    integer sums: counts are integers, so sum and sum of squares are
    exact and the result is identical however the cards are ordered.
    """
    scores = []
    n_scored = 0
    total = 0
    total_sq = 0
    for card in sorted(set(fr_cards)):
        trips = followup_counts.get(card, 0)
        scored = trips > 0
        scores.append(DeprivationScore(card, trips, scored))
        if scored:
            n_scored += 1
            total += trips
            total_sq += trips * trips
    fr_count = len(scores)
    if fr_count == 0:
        return scores, DeprivationSummary(0, 0, None, None, None)
    fraction = n_scored / fr_count
    if n_scored == 0:
        return scores, DeprivationSummary(fr_count, 0, fraction, None, None)
    mean = total / n_scored
    variance = (total_sq - total * total / n_scored) / n_scored
    std = math.sqrt(max(variance, 0.0))
    return scores, DeprivationSummary(fr_count, n_scored, fraction, mean, std)


# Alternative scorers (trajectory similarity, residence context) are a
# declared extension point: a scorer maps an FR card id to a numeric
# degree.  Only the follow-up trip count scorer ships.
Scorer = Callable[[str], float]

_SCORERS: dict[str, Scorer] = {}


def register_scorer(name: str, scorer: Scorer) -> None:
    if name in _SCORERS:
        raise ValueError(f"scorer already registered: {name!r}")
    _SCORERS[name] = scorer


def get_scorer(name: str) -> Scorer:
    return _SCORERS[name]


def scorer_names() -> tuple[str, ...]:
    return tuple(sorted(_SCORERS))
