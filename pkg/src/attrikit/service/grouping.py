"""Automatic group pre-assignment from bounding-box position and size.

Two person agents are linked when their boxes are horizontally close
relative to their widths, vertically aligned relative to their heights,
and of comparable height. Proposed groups are the connected components
of the link graph with at least two members; side-by-side pedestrians
group, agents more than about a body-width apart do not.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..model import PERSON, BoundingBox, CanonicalAgent, Group, agent_kind


@dataclass(frozen=True)
class GroupParams:
    """Link thresholds: gap < alpha * min width, vertical centre offset
    < beta * min height, height ratio within [1/gamma, gamma]."""

    alpha: float = 0.5
    beta: float = 0.5
    gamma: float = 2.0

    def to_obj(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma}

    @classmethod
    def from_obj(cls, obj) -> "GroupParams":
        return cls(alpha=obj.get("alpha", 0.5), beta=obj.get("beta", 0.5),
                   gamma=obj.get("gamma", 2.0))


class _UnionFind:
    def __init__(self, keys):
        self._parent = {k: k for k in keys}

    def find(self, k):
        root = k
        while self._parent[root] != root:
            root = self._parent[root]
        while self._parent[k] != root:
            self._parent[k], k = root, self._parent[k]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # Deterministic orientation: smaller id becomes the root.
            if rb < ra:
                ra, rb = rb, ra
            self._parent[rb] = ra


def boxes_linked(a: BoundingBox, b: BoundingBox, params: GroupParams) -> bool:
    gap = max(a.x_min, b.x_min) - min(a.x_max, b.x_max)
    if gap >= params.alpha * min(a.width(), b.width()):
        return False
    centre_a = (a.y_min + a.y_max) / 2.0
    centre_b = (b.y_min + b.y_max) / 2.0
    if abs(centre_a - centre_b) >= params.beta * min(a.height(), b.height()):
        return False
    taller, shorter = max(a.height(), b.height()), min(a.height(), b.height())
    return taller <= params.gamma * shorter


def propose_groups(
    agents: Sequence[CanonicalAgent],
    params: GroupParams = GroupParams(),
    prefix: str = "g",
) -> tuple[Group, ...]:
    """Connected-component group proposal over person agents.

    Symmetric and order-invariant: agents are processed by agent_image_id
    and group ids are numbered by smallest member id.
    """
    persons = sorted(
        (a for a in agents if agent_kind(a) == PERSON),
        key=lambda a: a.agent_image_id,
    )
    if len(persons) < 2:
        return ()
    uf = _UnionFind([a.agent_image_id for a in persons])
    for i, first in enumerate(persons):
        for second in persons[i + 1:]:
            if boxes_linked(first.bbox, second.bbox, params):
                uf.union(first.agent_image_id, second.agent_image_id)
    components: dict[int, list[int]] = {}
    for agent in persons:
        components.setdefault(uf.find(agent.agent_image_id), []).append(agent.agent_image_id)
    groups = []
    for root in sorted(components):
        members = sorted(components[root])
        if len(members) >= 2:
            groups.append(Group(group_id=f"{prefix}{len(groups) + 1}", members=tuple(members)))
    return tuple(groups)
