"""Classification, trend, debounce and knowledge-base revision tests."""

import itertools
import random
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wardwatch.engine import (
    AlertEvent,
    Band,
    BandInterval,
    BandTable,
    ClearEvent,
    DebounceConfig,
    ExpertEngine,
    KbProposal,
    KindState,
    KnowledgeBase,
    TrendRule,
    UnknownKindError,
    ValidationError,
    apply_kb_update,
    classify,
    default_kb,
    kb_as_proposal,
    trend_check,
    update_state,
    validate_proposal,
)
from wardwatch.protocol import VitalKind

from reference_impl import brute_force_band_coverage, reference_debounce

KB = default_kb()


class TestClassify:
    def test_normal_body_temperature(self):
        assert classify(VitalKind.BODY_TEMPERATURE, 37.0, KB) is Band.NORMAL

    def test_critical_heart_rate(self):
        assert classify(VitalKind.HEART_RATE, 130.0, KB) is Band.CRITICAL

    def test_boundary_belongs_to_upper_interval(self):
        assert classify(VitalKind.SYSTOLIC_BP, 140.0, KB) is Band.WARNING

    def test_extremes_always_classified(self):
        assert classify(VitalKind.HEART_RATE, -3276.8, KB) is Band.CRITICAL
        assert classify(VitalKind.HEART_RATE, 3276.7, KB) is Band.CRITICAL

    def test_unknown_kind(self):
        kb = replace(KB, tables={VitalKind.HEART_RATE: KB.tables[VitalKind.HEART_RATE]})
        with pytest.raises(UnknownKindError):
            classify(VitalKind.BLOOD_GLUCOSE, 100.0, kb)

    @given(
        value_x10=st.integers(-32768, 32767),
        kind=st.sampled_from(list(VitalKind)),
    )
    def test_totality_against_interval_scan(self, value_x10, kind):
        value = value_x10 / 10
        band = classify(kind, value, KB)
        matches = [
            b
            for lo, hi, b in KB.tables[kind].intervals()
            if (lo is None or value >= lo) and (hi is None or value < hi)
        ]
        assert matches == [band]


class TestTrendCheck:
    def test_sudden_rise_flagged(self):
        window = [(100.0, 70.0), (130.0, 100.0)]
        violation = trend_check(VitalKind.HEART_RATE, window, KB)
        assert violation is not None
        assert violation.delta == pytest.approx(30.0)

    def test_constant_signal_passes(self):
        window = [(float(t), 80.0) for t in range(10)]
        assert trend_check(VitalKind.HEART_RATE, window, KB) is None

    def test_threshold_is_strict(self):
        window = [(0.0, 70.0), (30.0, 95.0)]  # delta exactly 25
        assert trend_check(VitalKind.HEART_RATE, window, KB) is None

    def test_old_samples_fall_out_of_window(self):
        window = [(0.0, 70.0), (100.0, 100.0)]  # 100 s apart, window is 60 s
        assert trend_check(VitalKind.HEART_RATE, window, KB) is None

    def test_kind_without_rule_never_flags(self):
        kb = replace(KB, trends={})
        assert trend_check(VitalKind.HEART_RATE, [(0.0, 0.0), (1.0, 999.0)], kb) is None


def run_bands(bands, kb):
    """Feed a band sequence through update_state using values that land in
    the requested band of the default HR table, one sample per second."""
    values = {Band.NORMAL: 800, Band.WARNING: 1100, Band.CRITICAL: 1300}
    state = KindState()
    events = []
    for i, band in enumerate(bands):
        event = update_state(
            state, 23, VitalKind.HEART_RATE, i * 1000, values[band], band, kb
        )
        if event is not None:
            events.append((i, event))
    return events


# trend rules off so the band sequence alone drives the state machine
KB_NO_TREND = replace(KB, trends={})


class TestUpdateState:
    def test_warning_raise_after_three_consecutive(self):
        events = run_bands(
            [Band.NORMAL, Band.NORMAL, Band.WARNING, Band.WARNING, Band.WARNING],
            KB_NO_TREND,
        )
        assert len(events) == 1
        index, event = events[0]
        assert index == 4 and isinstance(event, AlertEvent)
        assert event.band is Band.WARNING

    def test_critical_raises_immediately(self):
        events = run_bands([Band.CRITICAL], KB_NO_TREND)
        assert len(events) == 1
        assert events[0][0] == 0
        assert events[0][1].band is Band.CRITICAL

    def test_normal_resets_warning_streak(self):
        events = run_bands(
            [Band.WARNING, Band.WARNING, Band.NORMAL,
             Band.WARNING, Band.WARNING, Band.WARNING],
            KB_NO_TREND,
        )
        assert [i for i, _ in events] == [5]

    def test_clear_after_m_normals(self):
        bands = [Band.CRITICAL] + [Band.NORMAL] * 5
        events = run_bands(bands, KB_NO_TREND)
        assert [i for i, _ in events] == [0, 5]
        assert isinstance(events[1][1], ClearEvent)

    def test_active_episode_extends_silently(self):
        bands = [Band.CRITICAL] * 4 + [Band.WARNING] * 4
        events = run_bands(bands, KB_NO_TREND)
        assert len(events) == 1

    def test_new_episode_after_clear(self):
        bands = [Band.CRITICAL] + [Band.NORMAL] * 5 + [Band.CRITICAL]
        events = run_bands(bands, KB_NO_TREND)
        assert [i for i, _ in events] == [0, 5, 6]

    def test_trend_violation_alone_raises_warning(self):
        # all samples classify Normal but jump by 26 bpm within the window
        state = KindState()
        events = []
        series = [(0, 70.0), (10, 96.0), (20, 96.0), (30, 96.0)]
        for ts, value in series:
            event = update_state(
                state, 23, VitalKind.HEART_RATE, ts * 1000, int(value * 10),
                Band.NORMAL, KB,
            )
            if event:
                events.append(event)
        assert len(events) == 1
        assert events[0].band is Band.WARNING
        assert events[0].reason == "trend"

    def test_exhaustive_short_sequences_match_reference(self):
        # sequences up to length 4 here; acceptance covers length <= 8
        for length in range(1, 5):
            for bands in itertools.product(list(Band), repeat=length):
                got = [
                    (i, "raise" if isinstance(e, AlertEvent) else "clear")
                    for i, e in run_bands(list(bands), KB_NO_TREND)
                ]
                want = [
                    (i, what)
                    for i, what, _ in reference_debounce([b.label for b in bands])
                ]
                assert got == want, f"sequence {[b.label for b in bands]}"

    def test_determinism(self):
        bands = [random.Random(5).choice(list(Band)) for _ in range(50)]
        assert run_bands(bands, KB_NO_TREND) == run_bands(bands, KB_NO_TREND)


def interval_table(*bounds_and_bands):
    return tuple(BandInterval(lo, hi, band) for lo, hi, band in bounds_and_bands)


class TestKbUpdate:
    def test_accepted_update_bumps_revision(self):
        proposal = kb_as_proposal(KB)
        tables = dict(proposal.tables)
        tables[VitalKind.HEART_RATE] = interval_table(
            (None, 50.0, Band.CRITICAL),
            (50.0, 55.0, Band.WARNING),
            (55.0, 100.0, Band.NORMAL),
            (100.0, 120.0, Band.WARNING),
            (120.0, None, Band.CRITICAL),
        )
        updated = apply_kb_update(
            KB, replace(proposal, tables=tables), "dr-a", "2026-02-01T00:00:00Z"
        )
        assert updated.revision == KB.revision + 1
        assert updated.author == "dr-a"
        assert classify(VitalKind.HEART_RATE, 57.0, updated) is Band.NORMAL
        assert classify(VitalKind.HEART_RATE, 57.0, KB) is Band.WARNING

    def test_overlap_rejected(self):
        proposal = kb_as_proposal(KB)
        tables = dict(proposal.tables)
        tables[VitalKind.HEART_RATE] = interval_table(
            (None, 60.0, Band.CRITICAL),
            (50.0, 100.0, Band.NORMAL),
            (100.0, None, Band.WARNING),
        )
        with pytest.raises(ValidationError) as err:
            apply_kb_update(KB, replace(proposal, tables=tables), "dr-a", "x")
        assert any("overlap" in e for e in err.value.errors)

    def test_gap_rejected(self):
        proposal = kb_as_proposal(KB)
        tables = dict(proposal.tables)
        tables[VitalKind.HEART_RATE] = interval_table(
            (None, 60.0, Band.WARNING),
            (70.0, None, Band.CRITICAL),
        )
        with pytest.raises(ValidationError) as err:
            apply_kb_update(KB, replace(proposal, tables=tables), "dr-a", "x")
        assert any("gap" in e for e in err.value.errors)

    def test_inverted_interval_rejected(self):
        proposal = kb_as_proposal(KB)
        tables = dict(proposal.tables)
        tables[VitalKind.HEART_RATE] = interval_table(
            (None, 60.0, Band.WARNING),
            (90.0, 60.0, Band.NORMAL),
            (90.0, None, Band.CRITICAL),
        )
        with pytest.raises(ValidationError):
            apply_kb_update(KB, replace(proposal, tables=tables), "dr-a", "x")

    def test_nonpositive_parameters_rejected(self):
        proposal = kb_as_proposal(KB)
        bad_trends = dict(proposal.trends)
        bad_trends[VitalKind.HEART_RATE] = TrendRule(VitalKind.HEART_RATE, -5.0, 25.0)
        with pytest.raises(ValidationError) as err:
            apply_kb_update(KB, replace(proposal, trends=bad_trends), "dr-a", "x")
        assert any("nonpositive" in e for e in err.value.errors)
        with pytest.raises(ValidationError):
            apply_kb_update(
                KB,
                replace(proposal, debounce=DebounceConfig(m_clear=0)),
                "dr-a", "x",
            )

    def test_rejected_update_leaves_kb_identical(self):
        engine = ExpertEngine(default_kb())
        before = engine.kb
        proposal = kb_as_proposal(before)
        tables = dict(proposal.tables)
        tables[VitalKind.HEART_RATE] = interval_table((None, 60.0, Band.WARNING),)
        with pytest.raises(ValidationError):
            engine.apply_kb_update(replace(proposal, tables=tables), "dr-a", "x")
        assert engine.kb == before
        assert engine.kb is before

    def test_every_violation_listed(self):
        proposal = kb_as_proposal(KB)
        tables = dict(proposal.tables)
        tables[VitalKind.HEART_RATE] = interval_table(
            (None, 60.0, Band.WARNING),
            (70.0, 65.0, Band.NORMAL),
            (80.0, None, Band.CRITICAL),
        )
        errors = validate_proposal(replace(proposal, tables=tables))
        assert len(errors) >= 2


def random_interval_proposal(rng: random.Random):
    """Random table on the 0.1 grid, half the time mutated to be invalid.

    Bounds are manipulated in integer tenths and divided once at the end, so
    they stay exactly on representable scaled values and structural validity
    agrees with the brute-force value sweep.
    """
    n = rng.randint(1, 6)
    cuts = sorted(rng.sample(range(-32700, 32700), n - 1)) if n > 1 else []
    lowers: list[int | None] = [None, *cuts]
    uppers: list[int | None] = [*cuts, None]
    mutation = rng.choice(["none", "none", "gap", "overlap", "drop_end"])
    if mutation == "gap" and n > 1:
        i = rng.randrange(1, n)
        if uppers[i] is None or uppers[i] - lowers[i] > 2:
            lowers[i] += 1
    elif mutation == "overlap" and n > 1:
        i = rng.randrange(1, n)
        lowers[i] -= 1
    elif mutation == "drop_end":
        cap = rng.randrange(32000, 32700)
        if lowers[-1] is None or lowers[-1] < cap:
            uppers[-1] = cap
    return [
        BandInterval(
            None if lo is None else lo / 10,
            None if hi is None else hi / 10,
            rng.choice(list(Band)),
        )
        for lo, hi in zip(lowers, uppers)
    ]


class TestKbValidationOracle:
    def test_validation_matches_brute_force_sweep(self):
        rng = random.Random(2024)
        checked_invalid = checked_valid = 0
        for _ in range(150):  # acceptance runs >= 1000
            intervals = random_interval_proposal(rng)
            structurally_ok = not _table_errors(intervals)
            sweep_ok = brute_force_band_coverage(
                [(iv.lower, iv.upper) for iv in intervals]
            )
            assert structurally_ok == sweep_ok
            if structurally_ok:
                checked_valid += 1
            else:
                checked_invalid += 1
        assert checked_valid > 10 and checked_invalid > 10


def _table_errors(intervals):
    proposal = KbProposal(
        tables={VitalKind.HEART_RATE: tuple(intervals)},
        trends={},
        debounce=DebounceConfig(),
    )
    return validate_proposal(proposal)
