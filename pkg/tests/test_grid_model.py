import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from blackstart import data_path
from blackstart.grid_model import (
    ParseError,
    SchemaError,
    ValidationError,
    derive_floors,
    grid_from_dict,
    grid_to_dict,
    load_grid,
    save_grid,
)


def test_ieee39_shape(ieee39):
    assert len(ieee39.nodes) == 39
    assert len(ieee39.generators) == 9
    assert ieee39.hvdc.node == 39
    assert ieee39.black_start.id == 31
    assert set(ieee39.source_nodes) == {30, 31, 32, 33, 34, 35, 36, 37, 38, 39}


def test_dangling_branch_endpoint(grid_doc):
    grid_doc["branches"][0]["endpoints"] = [1, 99]
    with pytest.raises(ValidationError, match="branch 1"):
        grid_from_dict(grid_doc)


def test_two_black_start_units(grid_doc):
    grid_doc["generators"][1]["is_black_start"] = True
    with pytest.raises(ValidationError):
        grid_from_dict(grid_doc)


def test_missing_field_names_location(grid_doc):
    del grid_doc["generators"][1]["ramp_rate"]
    with pytest.raises(SchemaError, match="ramp_rate"):
        grid_from_dict(grid_doc)


def test_parse_error(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ParseError):
        load_grid(p)


@pytest.mark.parametrize(
    "path, value",
    [
        (("params", "time_step"), 0.0),
        (("nodes", 0, "voltage_limits"), [1.1, 0.9]),
        (("nodes", 1, "load"), [-1.0, 0.0]),
        (("generators", 0, "ramp_rate"), 0.0),
        (("generators", 0, "transient_reactance"), 0.0),
        (("hvdc", "scr_floor"), 2.5),
        (("hvdc", "bridges"), 0),
    ],
)
def test_invariant_breaches(grid_doc, path, value):
    target = grid_doc
    for key in path[:-1]:
        target = target[key]
    target[path[-1]] = value
    with pytest.raises(ValidationError):
        grid_from_dict(grid_doc)


def test_round_trip(ieee39, tmp_path):
    p = tmp_path / "grid.json"
    save_grid(ieee39, p)
    again = load_grid(p)
    assert grid_to_dict(again) == grid_to_dict(ieee39)


def test_machine_base_reactance_is_converted(grid_doc):
    grid_doc["generators"][0]["reactance_base"] = 200.0
    m = grid_from_dict(grid_doc)
    assert m.generator(1).transient_reactance == pytest.approx(0.15 * 100.0 / 200.0)


def test_floors_fixture(ieee39):
    assert derive_floors(ieee39) == (850.0, 70.0)


@pytest.mark.parametrize("p_dn, expected", [(1000.0, 70.0), (3000.0, 210.0)])
def test_frequency_floor(grid_doc, p_dn, expected):
    grid_doc["hvdc"]["rated_power"] = p_dn
    assert derive_floors(grid_from_dict(grid_doc))[1] == expected


def test_floors_without_hvdc_power(grid_doc):
    grid_doc["hvdc"] = None
    assert derive_floors(grid_from_dict(grid_doc)) == (0.0, 0.0)


def test_scc_floor_formula(grid_doc):
    # start-up absorption 0.07 P_DN * sqrt((1.2/0.7)^2 - 1) against one filter bank
    grid_doc["hvdc"]["filter_min"] = 20.0
    m = grid_from_dict(grid_doc)
    q_d = 7.0 * math.sqrt((1.2 / 0.7) ** 2 - 1.0)
    assert derive_floors(m)[0] == pytest.approx((20.0 - q_d) / 0.1)
    grid_doc["params"]["scc_formula"] = "double"
    assert derive_floors(grid_from_dict(grid_doc))[0] == pytest.approx((40.0 - q_d) / 0.1)


def test_overrides_win(grid_doc):
    grid_doc["params"]["scc_floor_override"] = 123.0
    grid_doc["params"]["frc_floor_override"] = 4.0
    assert derive_floors(grid_from_dict(grid_doc)) == (123.0, 4.0)


@given(st.text(max_size=40))
def test_loader_is_total(tmp_path_factory, text):
    p = tmp_path_factory.mktemp("g") / "grid.json"
    p.write_text(text)
    try:
        load_grid(p)
    except (ParseError, SchemaError, ValidationError):
        pass


@given(
    st.dictionaries(
        st.sampled_from(["params", "nodes", "branches", "generators", "hvdc"]),
        st.one_of(st.none(), st.integers(), st.lists(st.integers(), max_size=3), st.dictionaries(st.text(max_size=3), st.integers(), max_size=2)),
    )
)
def test_loader_total_on_structures(doc):
    try:
        grid_from_dict(doc)
    except (SchemaError, ValidationError):
        pass


def test_bundled_files_load():
    for name in ("ieee39.json", "toy6.json"):
        with open(data_path(name)) as fh:
            grid_from_dict(json.load(fh))
