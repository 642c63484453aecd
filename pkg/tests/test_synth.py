import json

import numpy as np
import pytest

from badband.detector import detect
from badband.synth import (
    BENCH60,
    SyntheticSpec,
    clean_snr,
    gap_threshold,
    gen_figure1_cube,
    gen_injected_cube,
    mav_gap,
    score_detection,
)


def small_spec(seed=0, noise_scale=1.0, **kw):
    doc = {"lines": 20, "samples": 20, "bands": 30, "seed": seed,
           "faults": [{"bands": [10, 12], "kind": "pure_noise", "noise_scale": noise_scale}]}
    doc.update(kw)
    return SyntheticSpec.from_dict(doc)


def test_figure1_generator():
    cube, targets = gen_figure1_cube(3)
    assert cube.shape == (51, 51, 3)
    assert len(targets) == 9
    for b in (0, 2):
        assert np.count_nonzero(cube.data[b] == 255.0) == 9
        assert np.all(cube.data[b, targets] == 255.0)
    assert abs(cube.data[1].mean()) < 4 / np.sqrt(51 * 51)
    np.testing.assert_array_equal(gen_figure1_cube(3)[0].data, cube.data)


def test_no_faults_empty_truth():
    cube, truth = gen_injected_cube(SyntheticSpec(5, 5, 4, seed=1))
    assert truth == set()
    assert cube.shape == (5, 5, 4)


def test_dead_band_caught_by_preflight():
    spec = SyntheticSpec.from_dict({"lines": 10, "samples": 10, "bands": 8, "seed": 2,
                                    "faults": [{"bands": 5, "kind": "dead", "value": 3.0}]})
    cube, truth = gen_injected_cube(spec)
    assert truth == {5}
    assert np.all(cube.data[4] == 3.0)
    rep = detect(cube, 0.0, M=20, seed=1)
    assert rep.constant_bands == [5] and 5 in rep.selected_bands


def test_spec_validation():
    with pytest.raises(ValueError):
        SyntheticSpec.from_dict({"lines": 5, "samples": 5, "bands": 10, "faults": [
            {"bands": [2, 4], "kind": "dead"}, {"bands": [4, 6], "kind": "pure_noise"}]})
    with pytest.raises(ValueError):
        SyntheticSpec.from_dict({"lines": 5, "samples": 5, "bands": 10,
                                 "faults": [{"bands": [9, 11], "kind": "dead"}]})
    with pytest.raises(ValueError):
        SyntheticSpec.from_dict({"lines": 5, "samples": 5, "bands": 10,
                                 "faults": [{"bands": 3, "kind": "stripe"}]})
    with pytest.raises(ValueError):
        SyntheticSpec.from_dict({"lines": 5, "samples": 5, "bands": 10, "colour": 1})
    with pytest.raises(ValueError):
        small_spec(noise_scale=0.0)


def test_identical_duplicate_fault_allowed():
    f = {"bands": [2, 3], "kind": "dead"}
    spec = SyntheticSpec.from_dict({"lines": 2, "samples": 2, "bands": 4, "faults": [f, f]})
    assert spec.truth() == {2, 3}


def test_spec_json_roundtrip():
    spec = SyntheticSpec.from_dict(BENCH60)
    again = SyntheticSpec.from_json(json.dumps(spec.to_dict()))
    assert again == spec
    assert spec.truth() == set(range(20, 26)) | {45, 58, 59}


def test_generator_deterministic():
    spec = small_spec(seed=5)
    a, _ = gen_injected_cube(spec)
    b, _ = gen_injected_cube(spec)
    assert np.array_equal(a.data, b.data)
    c, _ = gen_injected_cube(small_spec(seed=6))
    assert not np.array_equal(a.data, c.data)


def test_bench60_clean_snr():
    assert clean_snr(SyntheticSpec.from_dict(BENCH60)) >= 20


def test_score_examples():
    s = score_detection([1, 2, 3], {2, 3, 4}, 10)
    assert s.precision == pytest.approx(2 / 3) and s.recall == pytest.approx(2 / 3)
    assert s.f1 == pytest.approx(2 / 3)
    assert (s.tp, s.fp, s.fn, s.tn) == (2, 1, 1, 6)
    perfect = score_detection({4, 5}, {4, 5}, 6)
    assert perfect.precision == perfect.recall == 1.0
    empty = score_detection([], {1}, 3)
    assert empty.precision == 1.0 and empty.recall == 0.0 and empty.no_predictions
    nothing = score_detection([2], [], 3)
    assert nothing.recall == 1.0 and nothing.no_truth
    with pytest.raises(ValueError):
        score_detection([7], [1], 5)


def test_score_accepts_report(rs):
    cube, truth = gen_injected_cube(small_spec(seed=1))
    rep = detect(cube, 0.0, M=10, seed=1)
    assert score_detection(rep, truth, cube.bands).no_predictions


def test_gap_threshold():
    assert gap_threshold([0.01, 0.02, 0.015, 1.0, 1.2]) == 0.02
    assert gap_threshold([0.0, 0.0, 1.0]) == 0.0
    with pytest.raises(ValueError):
        gap_threshold([1.0])


def test_small_spec_recovered_by_gap():
    spec = small_spec(seed=3)
    cube, truth = gen_injected_cube(spec)
    rep = detect(cube, 0.0, M=200, seed=1)
    t = gap_threshold(rep.mav.values)
    sel = detect(cube, t, M=200, seed=1)
    s = score_detection(sel, truth, cube.bands)
    assert s.precision == 1.0 and s.recall == 1.0


def test_noise_scale_never_shrinks_gap():
    # the norm-weighted score ignores band scale, so the gap is preserved
    for seed in range(20):
        gaps = []
        for scale in (1.0, 4.0):
            cube, truth = gen_injected_cube(small_spec(seed=seed, noise_scale=scale))
            gaps.append(mav_gap(detect(cube, 0.0, M=100, seed=seed).mav.values, truth))
        assert gaps[1] >= gaps[0] * (1 - 1e-9)
