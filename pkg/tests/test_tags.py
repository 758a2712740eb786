import pytest
from hypothesis import given
from hypothesis import strategies as st

from signaddr.errors import ValidationError
from signaddr.tags import (
    COMPONENTS,
    DEFAULT_SCHEME,
    EntitySpan,
    extract_spans,
    is_punct_token,
    is_well_formed,
    repair,
    spans_to_tags,
    tokenize_address,
)

any_tag = st.sampled_from(DEFAULT_SCHEME.tags)


@st.composite
def well_formed(draw):
    tags = []
    for _ in range(draw(st.integers(0, 12))):
        choice = draw(st.sampled_from(["O", "B", "I"]))
        if choice == "I" and tags and tags[-1] != "O":
            tags.append("I-" + tags[-1][2:])
        elif choice == "O":
            tags.append("O")
        else:
            tags.append("B-" + draw(st.sampled_from(COMPONENTS)))
    return tags


def test_scheme_has_eleven_tags():
    assert len(DEFAULT_SCHEME) == 2 * 5 + 1
    assert DEFAULT_SCHEME.decode(DEFAULT_SCHEME.encode(DEFAULT_SCHEME.tags)) == DEFAULT_SCHEME.tags
    with pytest.raises(ValidationError):
        DEFAULT_SCHEME.encode(["B-STREET"])


def test_extract_spans_examples():
    assert extract_spans(["B-HOUSE", "I-HOUSE", "O"]) == [EntitySpan("HOUSE", 0, 2)]
    assert extract_spans(["O", "O"]) == []
    assert extract_spans(["B-ROAD", "B-ROAD"]) == [EntitySpan("ROAD", 0, 1), EntitySpan("ROAD", 1, 2)]


def test_repair_promotes_leading_inside():
    assert repair(["I-AREA", "I-AREA", "O", "I-ROAD"]) == ["B-AREA", "I-AREA", "O", "B-ROAD"]
    assert repair(["B-AREA", "I-ROAD"]) == ["B-AREA", "B-ROAD"]


@given(well_formed())
def test_spans_round_trip(tags):
    assert is_well_formed(tags)
    assert spans_to_tags(extract_spans(tags), len(tags)) == tags


@given(st.lists(any_tag, max_size=12))
def test_repair_makes_well_formed_and_is_idempotent(tags):
    fixed = repair(tags)
    assert is_well_formed(fixed)
    assert repair(fixed) == fixed
    if is_well_formed(tags):
        assert fixed == list(tags)


@given(well_formed())
def test_raw_labels_round_trip_without_adjacent_same_component(tags):
    spans = extract_spans(tags)
    adjacent = any(a.end == b.start and a.label == b.label for a, b in zip(spans, spans[1:]))
    raw = DEFAULT_SCHEME.to_raw(tags)
    if not adjacent:
        assert DEFAULT_SCHEME.from_raw(raw) == tags


def test_spans_to_tags_rejects_overlap():
    with pytest.raises(ValidationError):
        spans_to_tags([EntitySpan("AREA", 0, 2), EntitySpan("ROAD", 1, 3)], 3)
    with pytest.raises(ValidationError):
        EntitySpan("AREA", 2, 2)


def test_tokenize_detaches_punctuation():
    assert tokenize_address("বাড়ি নং ১২, রোড নং ৫। ঢাকা") == ["বাড়ি", "নং", "১২", ",", "রোড", "নং", "৫", "।", "ঢাকা"]
    assert tokenize_address("12/A") == ["12", "/", "A"]
    assert tokenize_address("   ") == []
    assert is_punct_token("।") and is_punct_token(",,") and not is_punct_token("a,")
