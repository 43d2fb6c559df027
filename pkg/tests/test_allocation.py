"""Area filtering, quota arithmetic, plan construction and claim safety."""

import concurrent.futures
import random

import pytest

from attrikit.allocation import (
    AllocationError,
    AllocationPlan,
    EligibleImage,
    FilterConfig,
    PlanState,
    build_plan,
    compute_quota,
    filter_by_area,
)
from attrikit.errors import ConfigError
from attrikit.model import BoundingBox
from test_model import make_agent, make_image

ANNOTATORS = ("a1", "a2", "a3", "a4", "a5")

# (goal, quota) rows of the published per-dataset allocation tables.
PERSON_GOALS = {
    "kitti": (1000, 60),
    "tdc": (6000, 360),
    "citypersons": (6000, 360),
    "eurocity": (42000, 2520),
    "bdd100k": (10000, 600),
    "nuimages": (25000, 1500),
}
VEHICLE_GOALS = {
    "kitti": (2000, 120),
    "bdd100k": (30000, 1800),
    "nuimages": (18000, 1080),
}


def box_with_area(area, width=100.0):
    return BoundingBox(0.0, 0.0, width, area / width)


def person_image(image_id, areas, split="train"):
    agents = [
        make_agent(i, bbox=box_with_area(area), kind="person")
        for i, area in enumerate(areas)
    ]
    return make_image(image_id=image_id, agents=agents, split=split)


class TestFilterByArea:
    def test_person_boundary_inclusive(self):
        image = person_image("i0", [5999.0, 6000.0, 12000.0])
        index = filter_by_area([image], FilterConfig())
        assert index[0].n_agents == 2

    def test_vehicle_boundary(self):
        agent = make_agent(0, bbox=box_with_area(8000.0), kind="vehicle")
        index = filter_by_area([make_image(agents=[agent])], FilterConfig())
        assert index and index[0].n_agents == 1

    def test_exclusive_boundary_flag(self):
        image = person_image("i0", [6000.0])
        assert filter_by_area([image], FilterConfig(inclusive=False)) == []

    def test_zero_eligible_images_excluded(self):
        image = person_image("i0", [100.0])
        assert filter_by_area([image], FilterConfig()) == []

    def test_discarded_images_excluded(self):
        image = person_image("i0", [9000.0])
        from dataclasses import replace

        assert filter_by_area([replace(image, discard_flag=True)], FilterConfig()) == []

    def test_non_key_frames_excluded(self):
        from dataclasses import replace

        image = person_image("i0", [9000.0])
        follower = replace(image, image_id="i1", sequence_id="s0", key_frame=False)
        key = replace(image, image_id="i2", sequence_id="s0", key_frame=True)
        index = filter_by_area([image, follower, key], FilterConfig())
        assert [e.image_id for e in index] == ["i0", "i2"]


class TestQuota:
    @pytest.mark.parametrize("goal,quota", list(PERSON_GOALS.values()))
    def test_person_table(self, goal, quota):
        assert compute_quota(goal, 5, 0.06) == quota

    @pytest.mark.parametrize("goal,quota", list(VEHICLE_GOALS.values()))
    def test_vehicle_table(self, goal, quota):
        assert compute_quota(goal, 5, 0.06) == quota

    def test_totals(self):
        assert sum(q for _, q in PERSON_GOALS.values()) == 5400
        assert sum(q for _, q in VEHICLE_GOALS.values()) == 3000

    def test_ceil_for_fractional(self):
        assert compute_quota(50, 5, 0.06) == 3
        assert compute_quota(49, 5, 0.06) == 3  # 2.94 rounds up

    def test_needs_two_annotators(self):
        with pytest.raises(ConfigError):
            compute_quota(100, 1, 0.06)


def hundred_singleton_images():
    return [person_image(f"img{i:03d}", [7000.0]) for i in range(100)]


class TestBuildPlan:
    def test_fixture_pool_sizes(self):
        # 100 images x 1 eligible agent, G=50 -> q=3, pool of 3 images.
        eligible = filter_by_area(hundred_singleton_images(), FilterConfig())
        plan = build_plan("fx", eligible, goal=50, annotator_ids=ANNOTATORS, seed=11)
        assert plan.quota == 3
        assert len(plan.inter_pool) == 3
        assert len(plan.exclusive_pool) == 97
        inter_ids = {i for i, _ in plan.inter_pool}
        exclusive_ids = {i for i, _ in plan.exclusive_pool}
        assert not inter_ids & exclusive_ids

    def test_goal_zero_valid(self):
        eligible = filter_by_area(hundred_singleton_images(), FilterConfig())
        plan = build_plan("fx", eligible, goal=0, annotator_ids=ANNOTATORS, seed=1)
        assert plan.quota == 0
        assert plan.inter_pool == ()

    def test_goal_exceeding_eligible(self):
        eligible = filter_by_area(hundred_singleton_images(), FilterConfig())
        with pytest.raises(AllocationError) as err:
            build_plan("fx", eligible, goal=500, annotator_ids=ANNOTATORS, seed=1)
        assert err.value.coverage == pytest.approx(0.2)

    def test_deterministic_in_seed(self):
        eligible = filter_by_area(hundred_singleton_images(), FilterConfig())
        p1 = build_plan("fx", eligible, goal=50, annotator_ids=ANNOTATORS, seed=5)
        p2 = build_plan("fx", eligible, goal=50, annotator_ids=ANNOTATORS, seed=5)
        p3 = build_plan("fx", eligible, goal=50, annotator_ids=ANNOTATORS, seed=6)
        assert p1 == p2
        assert p1 != p3

    def test_split_stratification_proportional(self):
        images = [person_image(f"t{i}", [7000.0], split="train") for i in range(80)]
        images += [person_image(f"v{i}", [7000.0], split="val") for i in range(20)]
        eligible = filter_by_area(images, FilterConfig())
        plan = build_plan("fx", eligible, goal=100, annotator_ids=ANNOTATORS, seed=3)
        # quota 6 -> about 4-5 train, 1-2 val by largest remainder
        splits = ["train" if i.startswith("t") else "val" for i, _ in plan.inter_pool]
        assert splits.count("train") == 5
        assert splits.count("val") == 1

    def test_quota_covered_by_pool(self):
        rng = random.Random(0)
        images = [
            person_image(f"i{i}", [7000.0] * rng.randint(1, 4)) for i in range(60)
        ]
        eligible = filter_by_area(images, FilterConfig())
        plan = build_plan("fx", eligible, goal=100, annotator_ids=ANNOTATORS, seed=9)
        assert plan.inter_agents >= plan.quota

    def test_round_trip_json(self, tmp_path):
        eligible = filter_by_area(hundred_singleton_images(), FilterConfig())
        plan = build_plan("fx", eligible, goal=50, annotator_ids=ANNOTATORS, seed=11)
        path = tmp_path / "plan.json"
        plan.save(path)
        assert AllocationPlan.load(path) == plan


class TestPlanState:
    def build(self, goal=50, seed=11):
        eligible = filter_by_area(hundred_singleton_images(), FilterConfig())
        plan = build_plan("fx", eligible, goal=goal, annotator_ids=ANNOTATORS, seed=seed)
        return plan, PlanState(plan)

    def test_fresh_annotator_gets_first_inter_image(self):
        plan, state = self.build()
        ref = state.next_image("a1")
        assert ref.pool == "inter"
        assert ref.image_id == plan.inter_pool[0][0]

    def test_stable_until_completed(self):
        plan, state = self.build()
        assert state.next_image("a1") == state.next_image("a1")

    def test_transition_to_exclusive_after_quota(self):
        plan, state = self.build()
        for image_id, _ in plan.inter_pool:
            state.record_image_complete("a1", image_id)
        ref = state.next_image("a1")
        assert ref.pool == "exclusive"
        assert ref.newly_claimed

    def test_unknown_annotator_rejected(self):
        _, state = self.build()
        with pytest.raises(ConfigError):
            state.next_image("stranger")

    def test_progress_counters(self):
        plan, state = self.build()
        state.record_image_complete("a1", plan.inter_pool[0][0])
        progress = state.progress("a1")
        assert progress["inter_done"] == 1
        assert progress["inter_quota"] == 3
        assert progress["agents_done"] == 1

    def test_exclusive_images_partition_across_annotators(self):
        plan, state = self.build(goal=50)
        per_annotator = {a: [] for a in ANNOTATORS}
        for annotator in ANNOTATORS:
            while True:
                ref = state.next_image(annotator)
                if ref is None:
                    break
                per_annotator[annotator].append(ref.image_id)
                state.record_image_complete(annotator, ref.image_id)
        exclusive_sets = [
            {i for i in images if i not in {x for x, _ in plan.inter_pool}}
            for images in per_annotator.values()
        ]
        for i in range(len(exclusive_sets)):
            for j in range(i + 1, len(exclusive_sets)):
                assert not exclusive_sets[i] & exclusive_sets[j]
        # simulates completion: distinct agents >= goal
        assert state.distinct_agents_done >= plan.goal

    def test_concurrent_claims_disjoint(self):
        plan, state = self.build(goal=97)

        def drain(annotator):
            claimed = []
            while True:
                ref = state.next_image(annotator)
                if ref is None:
                    return claimed
                if ref.pool == "exclusive":
                    claimed.append(ref.image_id)
                state.record_image_complete(annotator, ref.image_id)

        with concurrent.futures.ThreadPoolExecutor(max_workers=5) as pool:
            results = list(pool.map(drain, ANNOTATORS))
        all_claims = [image_id for claims in results for image_id in claims]
        assert len(all_claims) == len(set(all_claims))

    def test_resubmission_progress_unchanged(self):
        plan, state = self.build()
        image_id = plan.inter_pool[0][0]
        state.record_image_complete("a1", image_id)
        before = state.progress("a1")
        state.record_image_complete("a1", image_id)
        assert state.progress("a1") == before

    def test_discard_skips_image_for_everyone(self):
        plan, state = self.build()
        image_id = plan.inter_pool[0][0]
        state.mark_discarded(image_id)
        state.record_image_complete("a1", image_id, skipped=True)
        assert state.progress("a1")["inter_done"] == 0
        ref = state.next_image("a2")
        assert ref.image_id == plan.inter_pool[1][0]
