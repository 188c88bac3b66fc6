"""
Tests for dataset generation, splitting, windows, noise and persistence.
"""
import json

import numpy as np
import pytest
from scipy import stats

from exceptions import DatasetFormatError, DomainError
from schemas import GenConfig, QcmParams, RoadClass
from services.dataset import (
    MANIFEST_NAME,
    WINDOW_STREAM,
    Sample,
    add_noise,
    draw_mass,
    generate_dataset,
    load_dataset,
    load_manifest,
    perturb_view,
    reconstruct_kinematics,
    regenerate_sample,
    sample_rng,
    sample_window,
    save_dataset,
    split,
    stack_windows,
    window_start,
)
from services.qcm_sim import simulate
from services.road_synth import generate_road


def _flat_sample(n=20000):
    return Sample(z_ddot=np.zeros(n), y_ddot=np.zeros(n), m3=100, road_index=1, mass_index=1,
                  road_class=RoadClass.A, road_seed=0)


def test_generate_dataset_counts_and_labels(tiny_config, tiny_dataset):
    """L_r * L_m samples, one road record per road, masses inside the range."""
    assert len(tiny_dataset.samples) == 6
    assert [r.index for r in tiny_dataset.roads] == [1, 2, 3]
    ids = {s.sample_id for s in tiny_dataset.samples}
    assert ids == {f"sample_{j}_{i}" for j in (1, 2, 3) for i in (1, 2)}
    for sample in tiny_dataset.samples:
        assert 50 <= sample.m3 <= 200
        assert sample.N == tiny_config.n_steps
        assert sample.target.p1 == pytest.approx(615.0 / sample.m3)


def test_generate_dataset_is_deterministic(tiny_config, tiny_dataset):
    """Same master seed, same data."""
    again = generate_dataset(tiny_config)
    for a, b in zip(tiny_dataset.samples, again.samples):
        assert np.array_equal(a.z_ddot, b.z_ddot)
        assert a.m3 == b.m3


def test_worker_count_does_not_change_the_data(tiny_config, tiny_dataset):
    """Process pool output equals the serial run."""
    pooled = generate_dataset(tiny_config, threads=2)
    for a, b in zip(tiny_dataset.samples, pooled.samples):
        assert (a.road_index, a.mass_index) == (b.road_index, b.mass_index)
        assert np.array_equal(a.y_ddot, b.y_ddot)


def test_master_seed_changes_the_data(tiny_config, tiny_dataset):
    """Another master seed draws other roads."""
    other = generate_dataset(tiny_config.model_copy(update={"master_seed": 12}))
    assert not np.array_equal(other.samples[0].z_ddot, tiny_dataset.samples[0].z_ddot)


def test_draw_mass_is_an_integer_in_range(tiny_config):
    """Uniform integer masses from the configured range."""
    masses = [draw_mass(tiny_config, 1, i) for i in range(1, 200)]
    assert all(isinstance(m, int) and 50 <= m <= 200 for m in masses)
    assert len(set(masses)) > 50


def test_masses_are_uniform_over_the_range():
    """Chi-square over 10^4 draws, one bin per kilogram."""
    config = GenConfig(roads=100, masses=100, train_roads=80)
    masses = [draw_mass(config, j, i) for j in range(1, 101) for i in range(1, 101)]
    counts = np.bincount(np.array(masses) - 50, minlength=151)
    assert counts.sum() == 10_000
    assert stats.chisquare(counts).pvalue > 0.01


def test_sample_matches_direct_simulation(tiny_config, tiny_dataset):
    """Stored accelerations are the simulator output for the recorded road and mass."""
    sample = tiny_dataset.samples[3]
    road = tiny_dataset.roads[sample.road_index - 1]
    profile = generate_road(road.road_class, tiny_config.frequencies, tiny_config.velocity, road.seed)
    trace = simulate(QcmParams(m3=sample.m3), profile, tiny_config.step_width, tiny_config.n_steps)
    assert np.array_equal(trace.z_ddot, sample.z_ddot)
    assert np.array_equal(regenerate_sample(tiny_config, road, sample.mass_index, sample.m3).y_ddot, sample.y_ddot)


def test_split_is_road_disjoint(tiny_dataset):
    """No road appears in both views."""
    train, test = split(tiny_dataset, 2)
    assert train.road_indices == {1, 2}
    assert test.road_indices == {3}
    assert len(train) + len(test) == len(tiny_dataset.samples)


def test_split_rejects_empty_side(tiny_dataset):
    """Both views must be non-empty."""
    with pytest.raises(DomainError):
        split(tiny_dataset, 3)
    with pytest.raises(DomainError):
        split(tiny_dataset, 0)


def test_gen_config_rejects_empty_test_split():
    """train_roads must be smaller than roads."""
    with pytest.raises(ValueError):
        GenConfig(roads=2, masses=2, train_roads=2)


def test_window_bounds_and_contents(tiny_dataset):
    """Windows are contiguous slices inside the trace."""
    sample = tiny_dataset.samples[0]
    rng = np.random.default_rng(0)
    for _ in range(50):
        window = sample_window(sample, rng, length=100)
        assert 0 <= window.start <= sample.N - 100
        assert window.values.shape == (100, 2)
        assert np.array_equal(window.values[:, 0], sample.z_ddot[window.start:window.start + 100])


def test_window_covering_the_whole_trace(tiny_dataset):
    """length == N leaves a single start."""
    sample = tiny_dataset.samples[0]
    window = sample_window(sample, np.random.default_rng(1), length=sample.N)
    assert window.start == 0


def test_window_errors(tiny_dataset):
    """Too long windows and out-of-range starts are rejected."""
    sample = tiny_dataset.samples[0]
    with pytest.raises(DomainError):
        sample_window(sample, np.random.default_rng(0), length=sample.N + 1)
    with pytest.raises(DomainError):
        sample_window(sample, start=sample.N - 10, length=100)


def test_window_starts_are_uniform():
    """Start indices cover {0, ..., N - length} evenly."""
    sample = _flat_sample(n=110)
    rng = np.random.default_rng(3)
    starts = [window_start(sample, rng, 100) for _ in range(11000)]
    counts = np.bincount(starts, minlength=11)
    assert len(counts) == 11
    assert stats.chisquare(counts).pvalue > 1e-3


def test_add_noise_zero_sigma_is_identity(tiny_dataset):
    """sigma = 0 returns the sample untouched."""
    sample = tiny_dataset.samples[0]
    assert add_noise(sample, 0.0, np.random.default_rng(0)) is sample


def test_add_noise_is_gaussian_with_requested_sigma():
    """Noise on each channel is N(0, sigma^2), channels independent."""
    sample = _flat_sample()
    noisy = add_noise(sample, 0.01, np.random.default_rng(4))
    for channel in (noisy.z_ddot, noisy.y_ddot):
        assert stats.kstest(channel / 0.01, "norm").pvalue > 1e-3
    assert abs(np.corrcoef(noisy.z_ddot, noisy.y_ddot)[0, 1]) < 0.05


def test_add_noise_rejects_negative_sigma(tiny_dataset):
    """sigma >= 0."""
    with pytest.raises(DomainError):
        add_noise(tiny_dataset.samples[0], -0.1, np.random.default_rng(0))


def test_perturb_view_depends_only_on_sample_identity(tiny_dataset):
    """Reordering a view does not change the noise a sample receives."""
    train, _ = tiny_dataset.views()
    forward = perturb_view(train, 0.01, seed=5)
    reversed_view = perturb_view(type(train)(train.name, train.samples[::-1], train.config), 0.01, seed=5)
    assert np.array_equal(forward.samples[0].z_ddot, reversed_view.samples[-1].z_ddot)


def test_stack_windows_shape(tiny_dataset):
    """B x length x 2, seat then body."""
    samples = tiny_dataset.samples[:3]
    starts = [window_start(s, sample_rng(0, s, WINDOW_STREAM), 50) for s in samples]
    batch = stack_windows(samples, starts, 50)
    assert batch.shape == (3, 50, 2)
    assert np.array_equal(batch[1, :, 1], samples[1].y_ddot[starts[1]:starts[1] + 50])


def test_reconstruct_kinematics_of_constant_acceleration():
    """The semi-implicit sums of a constant acceleration a: v_k = a h k, x_k = a h^2 k(k+1)/2."""
    h, a = 0.01, 2.0
    acc = np.full(6, a)
    kin = reconstruct_kinematics(acc, np.zeros(6), h)
    k = np.arange(6)
    assert np.allclose(kin.z_dot_hat, a * h * k)
    assert np.allclose(kin.y_dot_next_hat, 0.0)
    assert np.allclose(kin.z_hat, a * h * h * k * (k + 1) / 2)
    assert np.all(kin.y_hat == 0.0)


@pytest.mark.parametrize("road_class", list(RoadClass))
@pytest.mark.parametrize("m3", [50, 125, 200])
def test_reconstruction_tracks_simulated_motion(m3, road_class):
    """Integrated clean accelerations give back the simulated seat and body motion."""
    params = QcmParams(m3=m3)
    profile = generate_road(road_class, 100, 25.0, seed=8)
    h = 0.005
    trace = simulate(params, profile, h, 6000)
    kin = reconstruct_kinematics(trace.z_ddot, trace.y_ddot, h)
    pairs = (
        (kin.z_hat, trace.column("z")), (kin.z_dot_hat, trace.column("w")),
        (kin.y_hat, trace.column("y")), (kin.y_dot_hat, trace.column("v")),
        (kin.y_dot_next_hat, trace.next_column("v")),
    )
    for rebuilt, actual in pairs:
        rms = np.sqrt(np.mean((rebuilt - actual) ** 2)) / np.sqrt(np.mean(actual ** 2))
        assert rms < 5e-2
        assert rms < 1e-6


def test_reconstruct_rejects_bad_step(tiny_dataset):
    """h must be positive."""
    s = tiny_dataset.samples[0]
    with pytest.raises(DomainError):
        reconstruct_kinematics(s.z_ddot, s.y_ddot, 0.0)


def test_save_and_load_round_trip(tmp_path, tiny_dataset):
    """Loading returns the same samples, config and road records."""
    written = save_dataset(tiny_dataset, tmp_path / "data")
    assert written[-1].name == MANIFEST_NAME
    loaded = load_dataset(tmp_path / "data")
    assert loaded.config == tiny_dataset.config
    assert loaded.roads == tiny_dataset.roads
    for a, b in zip(tiny_dataset.samples, loaded.samples):
        assert a.sample_id == b.sample_id
        assert np.array_equal(a.z_ddot, b.z_ddot)
        assert np.array_equal(a.y_ddot, b.y_ddot)


def test_saving_twice_gives_identical_bytes(tmp_path, tiny_dataset):
    """Artifacts are bit-reproducible."""
    save_dataset(tiny_dataset, tmp_path / "a")
    save_dataset(tiny_dataset, tmp_path / "b")
    for name in ("manifest.json", "sample_1_1.f64", "sample_3_2.f64"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_truncated_sample_file_names_the_sample(tmp_path, tiny_dataset):
    """Short files fail with the sample identifier."""
    save_dataset(tiny_dataset, tmp_path)
    path = tmp_path / "sample_2_1.f64"
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(DatasetFormatError, match="sample_2_1") as excinfo:
        load_dataset(tmp_path)
    assert excinfo.value.sample_id == "sample_2_1"


def test_corrupted_sample_fails_hash_check(tmp_path, tiny_dataset):
    """Same size, different content."""
    save_dataset(tiny_dataset, tmp_path)
    path = tmp_path / "sample_1_2.f64"
    data = bytearray(path.read_bytes())
    data[0] ^= 0xFF
    path.write_bytes(bytes(data))
    with pytest.raises(DatasetFormatError, match="sample_1_2"):
        load_dataset(tmp_path)


def test_version_and_count_mismatch(tmp_path, tiny_dataset):
    """Unknown format versions and missing sample records are rejected."""
    save_dataset(tiny_dataset, tmp_path)
    manifest_path = tmp_path / MANIFEST_NAME
    original = json.loads(manifest_path.read_text())

    manifest = dict(original, format_version=99)
    manifest_path.write_text(json.dumps(manifest))
    with pytest.raises(DatasetFormatError, match="version"):
        load_manifest(tmp_path)

    manifest = dict(original, samples=original["samples"][:-1])
    manifest_path.write_text(json.dumps(manifest))
    with pytest.raises(DatasetFormatError):
        load_dataset(tmp_path)


def test_missing_dataset_directory(tmp_path):
    """No manifest, no dataset."""
    with pytest.raises(DatasetFormatError):
        load_dataset(tmp_path / "nowhere")
