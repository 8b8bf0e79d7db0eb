"""Caching policies expressed as per-class device access plans."""

import enum
from typing import NamedTuple

from .core import ALL_CLASSES, RequestClass


class PolicyKind(enum.Enum):
    BASELINE = "baseline"
    BEAR_WR_OPT = "bear-wr-opt"
    ORACLE = "oracle"

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("_", "-")
        for kind in cls:
            if kind.value == key:
                return kind
        raise ValueError(f"unknown policy {text!r}; expected one of {[k.value for k in cls]}")


NEAR, FAR = "near", "far"
READ, WRITE = "read", "write"
TAG_CHECK = "tag_check"
DATA_READ = "data_read"
FILL = "fill"
DEMAND_WRITE = "demand_write"
WRITEBACK = "writeback"


class Step(NamedTuple):
    target: str
    op: str
    purpose: str
    depends_on: tuple = ()


class AccessPlan(tuple):
    """Ordered tuple of :class:`Step`; ``depends_on`` indexes earlier steps."""

    def __new__(cls, steps):
        steps = tuple(steps)
        for i, step in enumerate(steps):
            if any(d < 0 or d >= i for d in step.depends_on):
                raise ValueError(f"step {i} depends on a step that is not earlier")
        return super().__new__(cls, steps)

    def count(self, target=None, op=None, purpose=None):
        return sum(
            1 for s in self
            if (target is None or s.target == target)
            and (op is None or s.op == op)
            and (purpose is None or s.purpose == purpose)
        )


def _skips_tag_check(policy, cls):
    if cls.is_write and cls.is_hit:
        return policy in (PolicyKind.BEAR_WR_OPT, PolicyKind.ORACLE)
    if not cls.is_hit and not cls.victim_dirty:
        return policy is PolicyKind.ORACLE
    return False


def plan(policy, cls: RequestClass) -> AccessPlan:
    policy = PolicyKind.parse(policy)
    steps = []
    tag = None
    if not _skips_tag_check(policy, cls):
        tag = len(steps)
        steps.append(Step(NEAR, READ, TAG_CHECK))
    after_tag = () if tag is None else (tag,)

    if cls.is_hit and not cls.is_write:
        # the tag-check read returns the data as well
        return AccessPlan(steps)

    if cls.is_write:
        steps.append(Step(NEAR, WRITE, DEMAND_WRITE, after_tag))
    else:
        far = len(steps)
        steps.append(Step(FAR, READ, DATA_READ, after_tag))
        steps.append(Step(NEAR, WRITE, FILL, (far,)))

    if not cls.is_hit and cls.victim_dirty:
        # victim data comes from the tag-check read
        steps.append(Step(FAR, WRITE, WRITEBACK, after_tag))
    return AccessPlan(steps)


def plan_length_table(policy):
    return {c.label: len(plan(policy, c)) for c in ALL_CLASSES}


PLANS = {(p, c): plan(p, c) for p in PolicyKind for c in ALL_CLASSES}
