import itertools
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from jigsawbench.errors import BadDigit, BadLength, ClearanceTooLarge, NoBasePlate, UnsupportedValue
from jigsawbench.geometry import Pose2, distance_to_boundary, polygon_area, polygon_contains_polygon, polygon_intersection_area, transform
from jigsawbench.jigsaw import (
    TEXTURES,
    JigsawCode,
    assembled_poses,
    format_code,
    generate_set,
    layout_poses,
    parse_code,
    set_to_dict,
    set_to_json,
)
from jigsawbench.world import TABLE, SceneObject, WorldState, assembly_fit_check

valid_codes = st.builds(
    lambda a, b, c, d, e: f"{a}{b}{c}{d}{e}1",
    st.integers(0, 2), st.integers(0, 3), st.integers(0, 3), st.integers(0, 9), st.integers(0, 1),
)


def test_sheep_code_decodes():
    c = parse_code("000101")
    assert (c.shape, c.scale, c.thickness, c.base_plate) == (0, 0, 0, 0)
    assert c.theme == "sheep"
    assert not c.has_base_plate
    assert c.fragment_count == 4


@given(valid_codes)
def test_code_round_trip(text):
    assert format_code(parse_code(text)) == text
    assert str(parse_code(text)) == text


@pytest.mark.parametrize("text", ["00010", "0001011", "", 101])
def test_bad_length(text):
    with pytest.raises(BadLength):
        parse_code(text)


@pytest.mark.parametrize("text", ["00010a", "0-0101", "000 01"])
def test_bad_digit(text):
    with pytest.raises(BadDigit):
        parse_code(text)


@pytest.mark.parametrize("text", ["300101", "040101", "004101", "000121", "000102"])
def test_unsupported_value(text):
    with pytest.raises(UnsupportedValue):
        parse_code(text)


def test_code_errors_are_value_errors():
    with pytest.raises(ValueError):
        parse_code("x")


def test_fragment_areas_sum_to_cavity():
    js = generate_set("000101", 0.0)
    total = sum(polygon_area(f.shape) for f in js.fragments)
    assert total == pytest.approx(120 * 178, rel=1e-6)
    assert js.standard_area == pytest.approx(21360.0)


@given(valid_codes)
def test_conservation_every_code(text):
    js = generate_set(text, 0.0)
    total = sum(f.shape.area for f in js.fragments)
    assert total == pytest.approx(js.cavity.area, rel=1e-6)
    assert js.standard_area == js.cavity.area


def test_scale_digit_is_linear():
    a = generate_set("000101").standard_area
    b = generate_set("020101").standard_area
    assert b / a == pytest.approx(1.5 ** 2)


def test_fragments_disjoint_when_assembled():
    js = generate_set("000111", 0.0)
    placed = [transform(f.shape, js.slot_poses[f.id]) for f in js.fragments]
    for a, b in itertools.combinations(placed, 2):
        assert polygon_intersection_area(a, b) == pytest.approx(0.0, abs=1e-6)


def test_assembled_union_is_cavity():
    js = generate_set("100111", 0.0)
    covered = sum(polygon_intersection_area(js.cavity, transform(f.shape, js.slot_poses[f.id]))
                  for f in js.fragments)
    assert covered == pytest.approx(js.cavity.area, rel=1e-6)


def test_generate_deterministic():
    assert set_to_json(generate_set("200111", 0.6)) == set_to_json(generate_set("200111", 0.6))


@given(valid_codes, st.floats(0.0, 3.0), st.floats(0.01, 2.0))
def test_clearance_monotone(text, c, dc):
    a = generate_set(text, c)
    b = generate_set(text, c + dc)
    for fa, fb in zip(a.fragments, b.fragments):
        assert fb.shape.area < fa.shape.area


def test_clearance_too_large():
    with pytest.raises(ClearanceTooLarge):
        generate_set("000101", 200.0)


def test_negative_clearance_rejected():
    with pytest.raises(ValueError):
        generate_set("000101", -0.1)


def test_textures_follow_theme():
    js = generate_set("000311")
    assert js.base.texture.startswith(TEXTURES[3])
    assert len(set(js.labels)) == 4
    assert js.fragment_for_label(js.fragments[2].texture) == js.fragments[2].id
    assert js.fragment_for_label("nothing") is None


def test_fit_within_half_clearance():
    # each fragment lies in its cell and the cell lies in the grown cell
    js = generate_set("000111", 0.6)
    for f in js.fragments:
        placed = transform(f.shape, js.slot_poses[f.id])
        assert polygon_contains_polygon(js.cells[f.id], placed)
        assert polygon_contains_polygon(js.fit_cells[f.id], js.cells[f.id])


def test_edge_gap_is_half_clearance():
    # along every cell edge the eroded fragment sits exactly clearance / 2 inside,
    # so two neighbours leave a gap equal to the clearance
    js = generate_set("000111", 0.6)
    for f in js.fragments:
        placed = transform(f.shape, js.slot_poses[f.id])
        v = js.cells[f.id].vertices
        mids = [((v[i][0] + v[i - 1][0]) / 2, (v[i][1] + v[i - 1][1]) / 2) for i in range(len(v))]
        for m in mids:
            assert distance_to_boundary(placed, m) == pytest.approx(0.3, abs=1e-9)


@pytest.mark.parametrize("theta", [0.0, 0.7, -2.5])
def test_assembled_poses_follow_plate(theta):
    js = generate_set("000111", 0.6)
    plate = Pose2(20.0, -15.0, theta)
    poses = assembled_poses(js, plate)
    objects = [SceneObject(0, plate)] + [SceneObject(fid, p) for fid, p in poses.items()]
    world = WorldState(TABLE, objects, js)
    assert all(assembly_fit_check(world, fid) for fid in poses)
    for fid, p in poses.items():
        assert p.theta == pytest.approx(Pose2(0, 0, theta).theta)


def test_assembled_poses_need_plate():
    with pytest.raises(NoBasePlate):
        assembled_poses(generate_set("000101"), Pose2(0, 0, 0))
    assert len(layout_poses(generate_set("000101"), Pose2(0, 0, 0))) == 4


def test_json_document_shape():
    doc = json.loads(set_to_json(generate_set("000111", 0.6)))
    assert doc["code"] == "000111" and doc["clearance_mm"] == 0.6
    assert {p["kind"] for p in doc["pieces"]} == {"base_plate", "fragment"}
    assert doc["standard_area_mm2"] == pytest.approx(21360.0)
    for p in doc["pieces"]:
        assert {"id", "kind", "texture", "thickness_mm", "vertices_mm"} <= set(p)
    assert set_to_dict(generate_set("000101"))["pieces"][0]["kind"] == "fragment"


def test_code_dataclass_thickness():
    assert JigsawCode(0, 0, 2, 1, 0, 1).thickness_mm == 15.0
