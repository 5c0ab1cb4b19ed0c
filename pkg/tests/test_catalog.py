import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mddra.catalog import (
    BANDS,
    PARAMETER_NAMES,
    DistractionClass,
    MddraConfig,
    ParameterSpec,
    SpeedMode,
    ValidationError,
    band_for,
    config_to_document,
    default_catalog,
    load_catalog,
    load_config,
    read_config,
    severity_rank,
)


def test_empty_document_gives_default_catalog():
    cat = load_catalog({})
    assert cat == default_catalog()
    assert [p.max_weight for p in cat.parameters] == [2, 3, 2, 2, 2, 3, 2, 1, 1]
    assert len(cat.parameters) == 9
    assert dict(cat.speed_limits) == {"urban": 30.0, "dual": 60.0, "highway": 70.0}
    assert cat.speed_mode is SpeedMode.SURROUNDINGS_MULTIPLIER


def test_identity_override_of_weather():
    doc = {
        "parameters": [
            {"name": "weather", "max_weight": 3, "actions": [
                {"label": "dry", "weight": 1}, {"label": "rain", "weight": 2}, {"label": "snow", "weight": 3}]}
        ]
    }
    assert load_catalog(doc) == default_catalog()


@pytest.mark.parametrize(
    "doc",
    [
        {"parameters": [{"name": "pedestrians", "max_weight": 0, "actions": [{"label": "not_present", "weight": 0}]}]},
        {"parameters": [{"name": "weather"}, {"name": "weather"}]},
        {"parameters": [{"name": "weather", "actions": [{"label": "dry", "weight": -1}, {"label": "rain", "weight": 2}]}]},
        {"speed_limits": {"urban": 0}},
        {"parameters": [{"name": "road_type", "actions": [
            {"label": "urban", "weight": 1}, {"label": "rural", "weight": 2}, {"label": "highway", "weight": 3}]}]},
        {"colour": "red"},
        {"parameters": [{"name": "weather", "extra": 1}]},
        {"parameters": [{"name": "altitude"}]},
        {"speed_mode": "sideways"},
        {"window": 0},
        [],
    ],
)
def test_malformed_documents_rejected(doc):
    with pytest.raises(ValidationError):
        load_config(doc)


def test_missing_speed_limit_for_new_road_type():
    doc = {
        "parameters": [{"name": "road_type", "actions": [
            {"label": "urban", "weight": 1}, {"label": "rural", "weight": 2}, {"label": "highway", "weight": 3}]}],
    }
    with pytest.raises(ValidationError, match="speed limit"):
        load_config(doc)
    doc["speed_limits"] = {"rural": 50}
    assert load_config(doc).catalog.speed_limit("rural") == 50.0


def test_parameter_spec_invariants():
    with pytest.raises(ValidationError):
        ParameterSpec("x", (("a", 2), ("b", 1)), 2)
    with pytest.raises(ValidationError):
        ParameterSpec("x", (("a", 0), ("b", 1)), 2)
    with pytest.raises(ValidationError):
        ParameterSpec("x", (("a", 0), ("a", 1)), 1)


def test_round_trip_default_config(tmp_path):
    cfg = MddraConfig()
    doc = config_to_document(cfg)
    assert load_config(doc) == cfg
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    assert read_config(path) == cfg


def test_aliases_and_mode():
    cfg = load_config({"parameters": [{"name": "State of Hand"}], "speed_mode": "independent_term", "window": 3})
    assert cfg.catalog.speed_mode is SpeedMode.INDEPENDENT_TERM
    assert cfg.window == 3
    assert cfg.catalog.parameters[0].name == "hand_state"


@pytest.mark.parametrize(
    "score,color,impact,cls",
    [
        (0.45, "Dark Yellow", "Medium", DistractionClass.CARELESS),
        (0.0, "Light Green", "No Impact", DistractionClass.SAFE),
        (0.95, "Red", "Extreme", DistractionClass.EXTREMELY_DANGEROUS),
    ],
)
def test_band_examples(score, color, impact, cls):
    b = band_for(score)
    assert (b.color, b.impact, b.distraction_class) == (color, impact, cls)


def test_band_errors():
    for bad in (-0.01, 1.01, float("nan")):
        with pytest.raises(ValidationError):
            band_for(bad)


def test_severity_rank_examples():
    by_impact = {b.matrix_label: b for b in BANDS}
    assert severity_rank(by_impact["Extreme"]) == 7
    assert severity_rank(by_impact["No Impact"]) == 1
    assert severity_rank(by_impact["Medium"]) == 4
    assert [severity_rank(b) for b in BANDS] == list(range(1, 8))


def test_tiling_on_dense_grid():
    for s in np.linspace(0.0, 1.0, 10001):
        matches = [b for b in BANDS if b.contains(float(s))]
        assert len(matches) == 1
        assert matches[0] is band_for(float(s))


@given(st.floats(0, 1), st.floats(0, 1))
def test_band_monotone(a, b):
    lo, hi = min(a, b), max(a, b)
    assert band_for(lo).rank <= band_for(hi).rank


def test_bands_tile_without_gaps():
    assert BANDS[0].lower == 0.0 and BANDS[-1].upper == 1.0
    for a, b in zip(BANDS, BANDS[1:]):
        assert a.upper == b.lower
    assert PARAMETER_NAMES[0] == "hand_state"
