"""Model invariants and guideline validation rules."""

from attrikit.model import (
    AGE,
    CAR_TYPE,
    COLOUR,
    MEANS_OF_TRANSPORT,
    BoundingBox,
    CanonicalAgent,
    CanonicalImage,
    Group,
    PersonAttributes,
    VehicleAttributes,
    agent_kind,
    validate_attribute_set,
    validate_bbox,
    validate_image,
)


def make_agent(i=0, attributes=None, error=False, kind="person", bbox=None, uuid=None):
    return CanonicalAgent(
        agent_image_id=i,
        uuid=uuid or f"u{i}",
        bbox=bbox or BoundingBox(10.0, 10.0, 110.0, 210.0),
        identity="Pedestrian" if kind == "person" else "Car",
        attributes=attributes,
        sandbox_tags={"agent_kind": kind},
        error_in_labelling=error,
    )


def make_image(agents=(), groups=(), **kwargs):
    defaults = dict(
        image_id="img0",
        source_dataset="fixture",
        split="train",
        file_path="images/img0.png",
        width=1920,
        height=1080,
    )
    defaults.update(kwargs)
    return CanonicalImage(agents=tuple(agents), groups=tuple(groups), **defaults)


class TestAlphabets:
    def test_cardinalities_used_by_outcome_analysis(self):
        assert len(AGE) == 3
        assert len(MEANS_OF_TRANSPORT) == 5
        assert len(COLOUR) == 9
        assert len(CAR_TYPE) == 7


class TestBoundingBox:
    def test_area(self):
        assert BoundingBox(100.0, 100.0, 200.0, 300.0).area() == 20000.0

    def test_degenerate_rejected(self):
        problems = validate_bbox(BoundingBox(5.0, 5.0, 5.0, 10.0), 100, 100)
        assert any("degenerate" in p for p in problems)

    def test_out_of_resolution_rejected(self):
        problems = validate_bbox(BoundingBox(0.0, 0.0, 200.0, 50.0), 100, 100)
        assert any("resolution" in p for p in problems)


class TestAttributeRules:
    def test_car_type_requires_car(self):
        agent = make_agent(
            kind="vehicle",
            attributes=VehicleAttributes(vehicle_type="bus", colour="red", car_type="large"),
        )
        problems = validate_attribute_set(agent, "vehicle")
        assert problems == ["car_type: requires vehicle_type 'car'"]

    def test_car_with_car_type_ok(self):
        agent = make_agent(
            kind="vehicle",
            attributes=VehicleAttributes(vehicle_type="car", colour="red", car_type="large"),
        )
        assert validate_attribute_set(agent, "vehicle") == []

    def test_error_in_labelling_all_unknown_ok(self):
        agent = make_agent(attributes=PersonAttributes(), error=True)
        assert validate_attribute_set(agent, "person") == []

    def test_error_in_labelling_with_value_rejected(self):
        agent = make_agent(attributes=PersonAttributes(age="adult"), error=True)
        problems = validate_attribute_set(agent, "person")
        assert any("error_in_labelling" in p for p in problems)

    def test_qualifier_on_known_value_rejected(self):
        agent = make_agent(
            attributes=PersonAttributes(sex="male", unknown_confidence={"sex": "clear"})
        )
        problems = validate_attribute_set(agent, "person")
        assert problems == ["unknown_confidence: field 'sex' is not 'unknown'"]

    def test_qualifier_on_unknown_ok(self):
        agent = make_agent(
            attributes=PersonAttributes(sex="unknown", unknown_confidence={"sex": "not_clear"})
        )
        assert validate_attribute_set(agent, "person") == []

    def test_label_outside_alphabet(self):
        agent = make_agent(attributes=PersonAttributes(age="elderly"))
        problems = validate_attribute_set(agent, "person")
        assert any("not in alphabet" in p for p in problems)

    def test_kind_mismatch(self):
        agent = make_agent(attributes=PersonAttributes())
        assert validate_attribute_set(agent, "vehicle") == [
            "attributes: expected kind 'vehicle', got 'person'"
        ]

    def test_group_reference_checked_against_image(self):
        member = make_agent(0, attributes=PersonAttributes(group_id="g9"))
        image = make_image(agents=[member])
        problems = validate_attribute_set(member, "person", image)
        assert any("not declared" in p for p in problems)


class TestImageInvariants:
    def test_groups_need_two_members(self):
        agents = [make_agent(0, attributes=PersonAttributes(group_id="g1"))]
        image = make_image(agents=agents, groups=[Group("g1", (0,))])
        assert any("at least 2 members" in p for p in validate_image(image))

    def test_agent_in_two_groups_rejected(self):
        agents = [make_agent(i, attributes=PersonAttributes(group_id="g1")) for i in range(3)]
        image = make_image(
            agents=agents, groups=[Group("g1", (0, 1)), Group("g2", (1, 2))]
        )
        assert any("already in" in p for p in validate_image(image))

    def test_vehicle_in_group_rejected(self):
        person = make_agent(0, attributes=PersonAttributes(group_id="g1"))
        vehicle = make_agent(1, kind="vehicle")
        image = make_image(agents=[person, vehicle], groups=[Group("g1", (0, 1))])
        assert any("not a person" in p for p in validate_image(image))

    def test_duplicate_agent_ids_rejected(self):
        image = make_image(agents=[make_agent(0), make_agent(0, uuid="u1")])
        assert any("duplicate agent_image_id" in p for p in validate_image(image))

    def test_duplicate_uuids_rejected(self):
        image = make_image(agents=[make_agent(0, uuid="same"), make_agent(1, uuid="same")])
        assert any("duplicate uuid" in p for p in validate_image(image))

    def test_member_without_back_reference_flagged(self):
        agents = [
            make_agent(0, attributes=PersonAttributes(group_id="g1")),
            make_agent(1, attributes=PersonAttributes()),
        ]
        image = make_image(agents=agents, groups=[Group("g1", (0, 1))])
        assert any("back-reference" in p for p in validate_image(image))

    def test_valid_grouped_image(self):
        agents = [make_agent(i, attributes=PersonAttributes(group_id="g1")) for i in range(2)]
        image = make_image(agents=agents, groups=[Group("g1", (0, 1))])
        assert validate_image(image) == []


class TestAgentKind:
    def test_kind_from_attributes(self):
        assert agent_kind(make_agent(attributes=PersonAttributes())) == "person"

    def test_kind_from_sandbox(self):
        assert agent_kind(make_agent(kind="vehicle")) == "vehicle"

    def test_unknown_kind(self):
        agent = CanonicalAgent(0, "u0", BoundingBox(0.0, 0.0, 1.0, 1.0), "thing")
        assert agent_kind(agent) is None
