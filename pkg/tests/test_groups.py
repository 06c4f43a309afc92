"""The 20-group taxonomy and deprivation scoring."""

from __future__ import annotations

import pytest

from cardcohort.cohort import CHANGED, FOUND, JOBLESS, LOST, NOT_CHANGED, CohortDelta
from cardcohort.groups import (
    GROUP_COUNT,
    classify,
    get_scorer,
    group_counts,
    group_index,
    group_triple,
    register_scorer,
    score_deprivation,
    scorer_names,
)

# The canonical ordering of the twenty (housing, job, location) triples.
# Housing-changed residents come first; within each half the job axis
# runs changed, found, jobless, lost, unchanged; the out-of-R4 variant
# precedes the within-R4 one.
CANONICAL_TRIPLES = [
    (housing, job, within)
    for housing in (True, False)
    for job in (CHANGED, FOUND, JOBLESS, LOST, NOT_CHANGED)
    for within in (False, True)
]

CANONICAL_LABELS = [
    ("Yes" if housing else "No",
     {CHANGED: "Yes", FOUND: "Find a job", JOBLESS: "Jobless", LOST: "Lose the job", NOT_CHANGED: "No"}[job],
     "Within R4" if within else "Out of R4")
    for housing, job, within in CANONICAL_TRIPLES
]


def delta(card="C", housing=NOT_CHANGED, work=NOT_CHANGED, r4=False) -> CohortDelta:
    return CohortDelta(
        card_id=card,
        housing_status=housing,
        housing_dir=None,
        move_km=0.0,
        move_bin=None,
        work_status=work,
        work_dir=None,
        work_move_km=None,
        work_move_bin=None,
        commute_delta_km=None,
        commute_bin=None,
        r4_2010=r4,
    )


class TestGroupNumbering:
    def test_canonical_triples_number_one_to_twenty(self):
        got = [group_index(*t) for t in CANONICAL_TRIPLES]
        assert got == list(range(1, GROUP_COUNT + 1))

    def test_triple_labels_round_trip(self):
        assert [group_triple(g) for g in range(1, GROUP_COUNT + 1)] == CANONICAL_LABELS

    def test_numbering_is_a_bijection(self):
        assert len({group_index(*t) for t in CANONICAL_TRIPLES}) == GROUP_COUNT

    @pytest.mark.parametrize("bad", [0, 21, -1, 100])
    def test_out_of_range_group_rejected(self, bad):
        with pytest.raises(ValueError):
            group_triple(bad)

    def test_location_parity(self):
        # Even groups are within R4, odd groups outside, in both halves.
        for g in range(1, GROUP_COUNT + 1):
            _, _, location = group_triple(g)
            assert (location == "Within R4") == (g % 2 == 0)


class TestClassify:
    def test_moved_jobless_outside(self):
        a = classify(delta(housing=CHANGED, work=JOBLESS, r4=False))
        assert a.group == 5
        assert a.housing_changed is True
        assert a.job_category == JOBLESS
        assert a.within_r4 is False

    def test_settled_unchanged_within(self):
        a = classify(delta(housing=NOT_CHANGED, work=NOT_CHANGED, r4=True))
        assert a.group == 20

    def test_r4_flag_adds_one(self):
        out = classify(delta(housing=CHANGED, work=LOST, r4=False)).group
        within = classify(delta(housing=CHANGED, work=LOST, r4=True)).group
        assert within == out + 1

    def test_card_id_carried(self):
        assert classify(delta(card="X9")).card_id == "X9"


def test_group_counts_always_has_twenty_keys():
    counts = group_counts([])
    assert sorted(counts) == list(range(1, 21))
    assert sum(counts.values()) == 0
    assignments = [classify(delta(card=f"C{i}", work=JOBLESS)) for i in range(3)]
    counts = group_counts(assignments)
    assert sum(counts.values()) == 3
    assert counts[15] == 3


class TestScoreDeprivation:
    def test_textbook_population_stats(self):
        # 2,4,4,4,5,5,7,9 is the classic example: mean 5, variance 4.
        counts = {f"C{i}": v for i, v in enumerate([2, 4, 4, 4, 5, 5, 7, 9])}
        scores, summary = score_deprivation(sorted(counts), counts)
        assert summary.fr_count == 8
        assert summary.scored_count == 8
        assert summary.scored_fraction == 1.0
        assert summary.mean_trips == pytest.approx(5.0)
        assert summary.std_trips == pytest.approx(2.0)
        assert all(s.scored for s in scores)

    def test_absent_cards_are_unscored(self):
        scores, summary = score_deprivation(["A", "B", "C", "D"], {"B": 3, "D": 7})
        assert summary.fr_count == 4
        assert summary.scored_count == 2
        assert summary.scored_fraction == 0.5
        assert summary.mean_trips == pytest.approx(5.0)
        by_card = {s.card_id: s for s in scores}
        assert not by_card["A"].scored
        assert by_card["A"].followup_trips == 0
        assert by_card["D"].scored

    def test_empty_cohort(self):
        scores, summary = score_deprivation([], {"X": 5})
        assert scores == []
        assert summary.fr_count == 0
        assert summary.scored_fraction is None
        assert summary.mean_trips is None
        assert summary.std_trips is None

    def test_nobody_scored(self):
        scores, summary = score_deprivation(["A"], {})
        assert summary.fr_count == 1
        assert summary.scored_count == 0
        assert summary.scored_fraction == 0.0
        assert summary.mean_trips is None

    def test_order_and_duplicates_do_not_matter(self):
        counts = {"A": 1, "B": 2, "C": 3}
        a = score_deprivation(["C", "A", "B"], counts)
        b = score_deprivation(["A", "B", "C", "A"], counts)
        assert a == b
        assert [s.card_id for s in a[0]] == ["A", "B", "C"]

    def test_single_card_zero_std(self):
        _, summary = score_deprivation(["A"], {"A": 13})
        assert summary.mean_trips == 13.0
        assert summary.std_trips == 0.0


class TestScorerRegistry:
    def test_register_and_fetch(self):
        register_scorer("test-trips-a", lambda card: 1.0)
        register_scorer("test-trips-b", lambda card: 2.0)
        assert get_scorer("test-trips-a")("X") == 1.0
        names = scorer_names()
        assert "test-trips-a" in names and "test-trips-b" in names
        assert list(names) == sorted(names)

    def test_duplicate_name_rejected(self):
        register_scorer("test-trips-dup", lambda card: 0.0)
        with pytest.raises(ValueError):
            register_scorer("test-trips-dup", lambda card: 0.0)

    def test_unknown_name_raises(self):
        with pytest.raises(KeyError):
            get_scorer("no-such-scorer")
