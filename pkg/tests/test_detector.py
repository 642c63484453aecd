import numpy as np
import pytest

from badband.cube import HyperspectralCube, centralize, compute_band_stats
from badband.detector import (
    Detector,
    MavSpectrum,
    cell_seed,
    default_grid,
    detect,
    format_ranges,
    mav_spectrum,
    noise_seed_for,
    parse_ranges,
    preflight_constant_bands,
    sample_targets,
    sensitivity_sweep,
    threshold_bands,
)
from badband.linalg import covariance
from badband.mf import PAPER_LITERAL, mf_detector, nmf_significance
from badband.synth import gen_figure1_cube


def mixed_cube(rs, L=6, n=400):
    x = rs.standard_normal((L, L)) @ rs.standard_normal((L, n)) + rs.normal(0, 3, (L, 1))
    return HyperspectralCube(1, n, x)


def oracle_mav(cube, indices, convention="norm-weighted"):
    stats = compute_band_stats(cube)
    model = covariance(centralize(cube, stats))
    vals = [nmf_significance(mf_detector(model, stats.means, cube.data[:, k]), stats, convention).values
            for k in indices]
    return np.mean(vals, axis=0)


def spectrum(values):
    return MavSpectrum(np.asarray(values, float), 1, 0, 0, "norm-weighted")


# target sampling

def test_sample_full_set():
    s = sample_targets(5, 5, seed=3)
    assert sorted(s.indices.tolist()) == [0, 1, 2, 3, 4]


def test_sample_deterministic_and_distinct():
    a = sample_targets(1000, 50, 99).indices
    b = sample_targets(1000, 50, 99).indices
    assert np.array_equal(a, b)
    assert len(set(a.tolist())) == 50
    assert not np.array_equal(a, sample_targets(1000, 50, 100).indices)


def test_sample_errors():
    with pytest.raises(ValueError):
        sample_targets(5, 0, 1)
    with pytest.raises(ValueError):
        sample_targets(5, 6, 1)


def test_sample_uniform_inclusion():
    N, M, runs = 100, 30, 10_000
    counts = np.zeros(N)
    for seed in range(runs):
        counts[sample_targets(N, M, seed).indices] += 1
    p = M / N
    sigma = np.sqrt(runs * p * (1 - p))
    assert np.max(np.abs(counts - runs * p)) < 4 * sigma


# MAV spectrum

def test_mav_single_target_equals_its_significance(rs):
    cube = mixed_cube(rs)
    mav = mav_spectrum(cube, 1, seed=5)
    np.testing.assert_allclose(mav.values, oracle_mav(cube, mav.indices), rtol=1e-12)


def test_mav_two_targets_oracle(rs):
    cube = mixed_cube(rs)
    for conv in ("norm-weighted", PAPER_LITERAL):
        mav = mav_spectrum(cube, 2, seed=8, convention=conv)
        np.testing.assert_allclose(mav.values, oracle_mav(cube, mav.indices, conv), rtol=1e-12)


def test_mav_chunked_matches_oracle(rs, monkeypatch):
    import badband.detector as det_mod
    monkeypatch.setattr(det_mod, "SOLVE_CHUNK", 7)
    cube = mixed_cube(rs)
    mav = mav_spectrum(cube, 30, seed=2)
    np.testing.assert_allclose(mav.values, oracle_mav(cube, mav.indices), rtol=1e-12)


def test_mav_M_bounds(rs):
    cube = mixed_cube(rs, n=10)
    with pytest.raises(ValueError):
        mav_spectrum(cube, 11, 0)
    with pytest.raises(ValueError):
        detect(cube, 1.0, M=0)


def test_figure1_mav_band2_much_lower():
    # nine random targets: the ratio varies a lot between realizations
    ratios = []
    for seed in range(100):
        cube, _ = gen_figure1_cube(seed)
        v = mav_spectrum(cube, 9, seed=seed).values
        ratios.append(v[1] / min(v[0], v[2]))
    ratios = np.array(ratios)
    assert np.median(ratios) < 0.1
    assert np.mean(ratios < 0.25) >= 0.95


def test_degenerate_targets_are_resampled():
    # most pixels sit exactly at the mean
    n = 200
    x = np.zeros((3, n))
    rs = np.random.default_rng(0)
    x[:, :20] = rs.standard_normal((3, 20))
    x[:, 20:40] = -x[:, :20]
    cube = HyperspectralCube(1, n, x)
    mav = mav_spectrum(cube, 10, seed=4)
    assert mav.skipped_targets > 0
    assert len(set(mav.indices.tolist())) == 10
    assert all(i < 40 for i in mav.indices)
    again = mav_spectrum(cube, 10, seed=4)
    assert np.array_equal(mav.values, again.values)
    with pytest.raises(ValueError):
        mav_spectrum(cube, 41, seed=4)


# thresholding

def test_threshold_extremes_and_inclusive():
    mav = spectrum([0.5, 2.0, 1.0, 3.0])
    assert threshold_bands(mav, 0.0).selected_bands == []
    assert threshold_bands(mav, 3.0).selected_bands == [1, 2, 3, 4]
    assert threshold_bands(mav, 1.0).selected_bands == [1, 3]
    assert threshold_bands(mav, np.nextafter(1.0, 0)).selected_bands == [1]


def test_threshold_monotone(rs):
    mav = spectrum(rs.uniform(0, 5, 40))
    prev = set()
    for t in np.linspace(0, 5, 60):
        cur = set(threshold_bands(mav, t).selected_bands)
        assert prev <= cur
        prev = cur


def test_threshold_validation():
    with pytest.raises(ValueError):
        threshold_bands(spectrum([1.0]), -1.0)
    with pytest.raises(ValueError):
        threshold_bands(spectrum([1.0]), float("nan"))


def test_constant_bands_always_selected():
    rep = threshold_bands(spectrum([5.0, 5.0, 5.0]), 1.0, constant_bands=[1])
    assert rep.selected_bands == [2]
    assert rep.constant_bands == [2]


def test_ranges():
    assert format_ranges([1, 2, 3, 7, 9, 10]) == ["1-3", "7", "9-10"]
    assert format_ranges([]) == []
    text = "1-2, 61-62, 75-76, 83-97, 103-109, 149-164, 218-220"
    # the published list spans 47 bands although its count column says 45
    assert len(parse_ranges(text)) == 47
    assert ", ".join(format_ranges(parse_ranges(text))) == text
    with pytest.raises(ValueError):
        parse_ranges("9-3")


# constant-band preflight

def test_preflight_refills_constant_band(rs):
    x = rs.standard_normal((3, 50))
    x[1] = 4.0
    cube = HyperspectralCube(5, 10, x)
    filled, flagged = preflight_constant_bands(cube, compute_band_stats(cube), seed=11)
    assert flagged == [1]
    assert np.array_equal(filled.data[[0, 2]], x[[0, 2]])
    assert np.std(filled.data[1]) > 0.5
    rep = detect(cube, 0.0, M=10, seed=3)
    assert rep.selected_bands == [2]
    assert rep.noise_injection_seed == noise_seed_for(3)


def test_preflight_all_constant():
    cube = HyperspectralCube(4, 4, np.vstack([np.full(16, 1.0), np.full(16, 2.0)]))
    rep = detect(cube, 0.0, M=4, seed=1)
    assert rep.selected_bands == [1, 2]
    assert rep.degenerate


def test_no_constant_bands_no_noise_seed(rs):
    rep = detect(mixed_cube(rs), 0.0, M=5, seed=1)
    assert rep.noise_injection_seed is None and rep.constant_bands == []


# robustness

def test_scale_robustness(rs):
    cube = mixed_cube(rs, L=8, n=600)
    base = detect(cube, 0.5, M=50, seed=9)
    for c in (1e-3, 2.0, 1e3):
        x = np.array(cube.data)
        x[4] *= c
        rep = detect(cube.with_data(x), 0.5, M=50, seed=9)
        np.testing.assert_allclose(rep.mav.values, base.mav.values, rtol=1e-9)
        assert rep.selected_bands == base.selected_bands


def test_detect_deterministic(rs):
    cube = mixed_cube(rs)
    a = detect(cube, 0.7, M=40, seed=2)
    b = detect(cube, 0.7, M=40, seed=2)
    assert np.array_equal(a.mav.values, b.mav.values)


# sensitivity sweep

def test_default_grid():
    g = default_grid()
    assert g[:10] == list(range(1, 11))
    assert g[-1] == 10000 and len(g) == 37
    assert g == sorted(set(g))


def test_sweep_cell_reproduces_detect(rs):
    x = rs.standard_normal((5, 300))
    x[3] = 1.5
    cube = HyperspectralCube(15, 20, x)
    thres = [0.2, 0.6]
    res = sensitivity_sweep(cube, [3, 20], thres, repeats=3, seed=21)
    for M, t, r, n in res.rows:
        ti = thres.index(t)
        rep = detect(cube, t, M=M, seed=cell_seed(21, M, ti, r), noise_seed=res.noise_seed)
        assert rep.n_selected == n
    assert len(res.summary) == 4
    M, t, mean, std, runs = res.summary[0]
    counts = [n for MM, tt, _, n in res.rows if (MM, tt) == (M, t)]
    assert mean == pytest.approx(np.mean(counts)) and std == pytest.approx(np.std(counts, ddof=1))


def test_sweep_skips_large_M(rs):
    cube = mixed_cube(rs, n=50)
    res = sensitivity_sweep(cube, [5, 60], [1.0], repeats=2, seed=1)
    assert res.skipped_M == [60]
    assert [row[3] for row in res.rows if row[0] == 60] == [None, None]
    assert all(row[0] == 5 for row in res.summary)


def test_sweep_validation(rs):
    cube = mixed_cube(rs, n=50)
    with pytest.raises(ValueError):
        sensitivity_sweep(cube, [5], [], repeats=1)
    with pytest.raises(ValueError):
        sensitivity_sweep(cube, [0], [1.0], repeats=1)
    with pytest.raises(ValueError):
        sensitivity_sweep(cube, [5], [1.0], repeats=0)


def test_detector_reuse_matches_detect(rs):
    cube = mixed_cube(rs)
    det = Detector(cube, noise_seed_for(4))
    assert np.array_equal(det.run(1.0, 12, 4).mav.values, detect(cube, 1.0, M=12, seed=4).mav.values)
