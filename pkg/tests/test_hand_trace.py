import pytest

import hand_oracle
from dramcache.validation import HAND_CLASSES, HAND_TIMELINE, HAND_TRACE, run_hand_trace

CASES = sorted(HAND_TIMELINE)


def test_frozen_script_matches_oracle_script():
    assert tuple(HAND_TRACE) == tuple(hand_oracle.SCRIPT)


@pytest.mark.parametrize("policy, rt", CASES)
def test_frozen_timeline_is_the_oracle_output(policy, rt):
    oracle = hand_oracle.timeline(policy, rt)
    assert tuple(t for _, _, t in oracle) == HAND_TIMELINE[(policy, rt)]
    assert tuple(lbl for _, lbl, _ in oracle) == HAND_CLASSES


def test_trace_covers_every_class():
    assert set(HAND_CLASSES) == {"rhd", "rhc", "rmd", "rmc", "whd", "whc", "wmd", "wmc"}


@pytest.mark.parametrize("policy, rt", CASES)
def test_simulator_matches_hand_timeline(policy, rt):
    report, retired = run_hand_trace(policy, rt)
    assert [t for _, _, t in retired] == list(HAND_TIMELINE[(policy, rt)])
    assert [lbl for _, lbl, _ in retired] == list(HAND_CLASSES)
    assert report["max_crb"] == 1
