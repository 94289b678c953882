import numpy as np
import pytest

from conftest import small
from layoutforge.drc import Kind
from layoutforge.faults import DUPLICATE, RESIZE, SHIFT, Mutation, apply_mutation, run_campaign


def test_apply_mutation_ops():
    r = np.array([[0, 0, 10, 10], [20, 0, 30, 10]])
    assert apply_mutation(r, Mutation(RESIZE, "metal", 1, 2, 1))[1].tolist() == [20, 0, 31, 10]
    assert apply_mutation(r, Mutation(SHIFT, "metal", 0, 1, 5))[0].tolist() == [0, 5, 10, 15]
    d = apply_mutation(r, Mutation(DUPLICATE, "metal", 0))
    assert len(d) == 3 and d[2].tolist() == r[0].tolist()
    assert r[1].tolist() == [20, 0, 30, 10]
    with pytest.raises(ValueError):
        apply_mutation(r, Mutation("melt", "metal", 0))


def test_small_campaign_detects_most():
    metals = [small("metal_test2", 4000).metal_spec()]
    vias = [small("via_test2", 4000).via_spec()]
    camp = run_campaign(metals, vias, injections=60, seed=3)
    assert len(camp.injections) == 60
    assert {i.mutation.target for i in camp.injections} == {"metal", "via"}
    assert camp.detection_rate >= 0.95
    assert sum(n for _, n in camp.summary().values()) == 60


def test_duplicate_via_reports_pitch():
    vias = [small("via_test4", 4000).via_spec()]
    camp = run_campaign([], vias, injections=40, seed=1)
    dups = [i for i in camp.injections if i.mutation.op == DUPLICATE]
    assert dups and all(i.found & {Kind.ViaPitchX, Kind.ViaPitchY} for i in dups)
