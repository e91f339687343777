import pytest

from wardwatch.engine import Band, ValidationError, default_kb
from wardwatch.kb_io import load_kb, load_kb_file, save_kb
from wardwatch.protocol import VitalKind
from wardwatch.textconf import ParseError

from conftest import FIXTURES


def test_default_kb_roundtrip():
    kb = default_kb()
    assert load_kb(save_kb(kb)) == kb


def test_golden_fixture_matches_defaults():
    # the shipped fixture is the canonical rendering of the default rules
    kb = default_kb()
    assert (FIXTURES / "default_kb.txt").read_text() == save_kb(kb)
    assert load_kb_file(FIXTURES / "default_kb.txt") == kb


def test_loaded_defaults_classify():
    kb = load_kb_file(FIXTURES / "default_kb.txt")
    assert kb.tables[VitalKind.HEART_RATE].classify(72.0) is Band.NORMAL
    assert kb.tables[VitalKind.HEART_RATE].classify(130.0) is Band.CRITICAL


def test_band_count_mismatch_rejected():
    text = "[bands heart_rate]\nbreakpoints = 50 60\nbands = normal warning\n"
    with pytest.raises(ValidationError):
        load_kb(text)


def test_non_ascending_breakpoints_rejected():
    text = (
        "[bands heart_rate]\nbreakpoints = 60 50\n"
        "bands = critical warning normal\n"
    )
    with pytest.raises(ValidationError) as err:
        load_kb(text)
    assert any("non-ascending" in e for e in err.value.errors)


def test_unknown_kind_rejected():
    with pytest.raises(ParseError):
        load_kb("[bands pulse_ox]\nbreakpoints = 90\nbands = critical normal\n")


def test_unknown_section_rejected():
    with pytest.raises(ParseError):
        load_kb("[spurious]\nx = 1\n")


def test_empty_document_rejected():
    with pytest.raises(ValidationError):
        load_kb("[meta]\nrevision = 1\n")


def test_meta_fields_carried():
    kb = load_kb(
        "[meta]\nrevision = 9\nauthor = dr-x\nupdated_at = 2026-03-01T10:00:00Z\n"
        "[bands heart_rate]\nbreakpoints = 60 100\nbands = warning normal warning\n"
    )
    assert kb.revision == 9
    assert kb.author == "dr-x"
    assert kb.updated_at == "2026-03-01T10:00:00Z"
