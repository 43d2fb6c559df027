"""Canonical format: determinism, round trips and error taxonomy."""

import json

import pytest
from hypothesis import given, settings

from attrikit.canonical import (
    CanonicalDecodeError,
    CanonicalInvariantError,
    CanonicalSchemaError,
    parse_canonical,
    read_dataset,
    read_dataset_jsonl,
    serialize_canonical,
    write_dataset_dir,
    write_dataset_jsonl,
)
from attrikit.model import (
    BoundingBox,
    CanonicalAgent,
    CanonicalImage,
    Group,
    PersonAttributes,
)
from strategies import canonical_images
from test_model import make_agent, make_image


def three_agent_fixture():
    agents = [
        make_agent(0, attributes=PersonAttributes(age="adult", sex="male", skin="light",
                                                  means_of_transport="pedestrian",
                                                  group_id="g1")),
        make_agent(1, attributes=PersonAttributes(age="kid", sex="unknown", skin="light",
                                                  means_of_transport="bicycle",
                                                  group_id="g1",
                                                  unknown_confidence={"sex": "not_clear"})),
        make_agent(2),
    ]
    return make_image(agents=agents, groups=[Group("g1", (0, 1))], annotator_id="ann_a")


class TestSerialize:
    def test_empty_agents_is_valid(self):
        doc = json.loads(serialize_canonical(make_image()))
        assert doc["agents"] == []
        assert doc["image_meta"]["image_id"] == "img0"

    def test_error_in_labelling_with_value_rejected(self):
        agent = make_agent(0, attributes=PersonAttributes(age="adult"), error=True)
        with pytest.raises(CanonicalInvariantError) as err:
            serialize_canonical(make_image(agents=[agent]))
        assert "error_in_labelling" in str(err.value)

    def test_deterministic_bytes(self):
        image = three_agent_fixture()
        assert serialize_canonical(image) == serialize_canonical(image)

    def test_block_names(self):
        doc = json.loads(serialize_canonical(three_agent_fixture()))
        assert set(doc) == {"image_meta", "groups", "agents"}
        agent = doc["agents"][0]
        assert "annotated_attributes" in agent
        assert "sandbox_tags" in agent
        assert "sub_entities" in agent

    def test_round_trip_three_agent_fixture(self):
        image = three_agent_fixture()
        assert parse_canonical(serialize_canonical(image)) == image


class TestParseErrors:
    def test_malformed_json(self):
        with pytest.raises(CanonicalDecodeError):
            parse_canonical(b"{nope")

    def test_missing_bbox_names_path(self):
        doc = json.loads(serialize_canonical(three_agent_fixture()))
        del doc["agents"][1]["bbox"]
        with pytest.raises(CanonicalSchemaError) as err:
            parse_canonical(json.dumps(doc))
        assert err.value.path == "$.agents[1].bbox"

    def test_duplicate_group_membership_is_invariant_error(self):
        doc = json.loads(serialize_canonical(three_agent_fixture()))
        doc["groups"].append({"group_id": "g2", "members": [0, 2]})
        with pytest.raises(CanonicalInvariantError) as err:
            parse_canonical(json.dumps(doc))
        assert any("already in" in v for v in err.value.violations)

    def test_extra_agent_keys_preserved_in_sandbox(self):
        doc = json.loads(serialize_canonical(three_agent_fixture()))
        doc["agents"][0]["mystery_key"] = [1, 2, 3]
        parsed = parse_canonical(json.dumps(doc))
        assert parsed.agents[0].sandbox_tags["mystery_key"] == [1, 2, 3]

    def test_schema_error_on_wrong_type(self):
        doc = json.loads(serialize_canonical(three_agent_fixture()))
        doc["agents"][0]["uuid"] = 7
        with pytest.raises(CanonicalSchemaError):
            parse_canonical(json.dumps(doc))


class TestRoundTripProperty:
    @given(canonical_images())
    @settings(max_examples=120, deadline=None)
    def test_parse_serialize_identity(self, image):
        assert parse_canonical(serialize_canonical(image)) == image

    @given(canonical_images())
    @settings(max_examples=30, deadline=None)
    def test_serialization_deterministic(self, image):
        assert serialize_canonical(image) == serialize_canonical(image)


class TestDatasetIO:
    def test_jsonl_round_trip(self, tmp_path):
        images = [three_agent_fixture(), make_image(image_id="img1")]
        path = tmp_path / "ds.jsonl"
        assert write_dataset_jsonl(images, path) == 2
        assert list(read_dataset_jsonl(path)) == images

    def test_dir_round_trip(self, tmp_path):
        images = [make_image(image_id="a"), make_image(image_id="b")]
        write_dataset_dir(images, tmp_path / "ds")
        assert read_dataset(tmp_path / "ds") == images

    def test_read_dataset_auto_detects_jsonl(self, tmp_path):
        path = tmp_path / "ds.jsonl"
        write_dataset_jsonl([make_image()], path)
        assert len(read_dataset(path)) == 1
