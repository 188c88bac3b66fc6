"""
Labelled acceleration dataset: generation, road-disjoint split, windows,
noise and on-disk persistence.

On-disk layout of a dataset directory:

    manifest.json            DatasetManifest (config, per-road class and seed,
                             per-sample mass and hash)
    sample_{j}_{i}.f64       seat then body acceleration, N little-endian
                             float64 values each
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from exceptions import DatasetFormatError, DomainError, SimulationDivergedError
from schemas import (
    DATASET_FORMAT_VERSION,
    DatasetManifest,
    GenConfig,
    QcmParams,
    RoadClass,
    RoadRecord,
    SampleRecord,
)
from services.qcm_sim import TargetParams, simulate_forcing, true_parameters
from services.road_synth import derive_seed, generate_road, sample_road
from storage import f64_bytes, read_f64, read_model, sha256_bytes, write_model

logger = logging.getLogger(__name__)

WINDOW_LENGTH = 500
MANIFEST_NAME = "manifest.json"

# Stream tags keep the class and mass draws independent of the phase draw
CLASS_STREAM = 1
MASS_STREAM = 2
NOISE_STREAM = 3
WINDOW_STREAM = 4


@dataclass(frozen=True)
class Sample:
    """One simulated run: two acceleration channels plus its labels."""
    z_ddot: np.ndarray
    y_ddot: np.ndarray
    m3: int
    road_index: int
    mass_index: int
    road_class: RoadClass
    road_seed: int

    @property
    def sample_id(self) -> str:
        return f"sample_{self.road_index}_{self.mass_index}"

    @property
    def N(self) -> int:
        return int(self.z_ddot.shape[0])

    @property
    def target(self) -> TargetParams:
        return true_parameters(QcmParams(m3=self.m3))

    def values(self) -> np.ndarray:
        """N x 2 array, columns seat and body acceleration."""
        return np.stack([self.z_ddot, self.y_ddot], axis=1)


@dataclass(frozen=True)
class Window:
    """Contiguous frame of a sample starting at row `start`."""
    start: int
    values: np.ndarray


@dataclass(frozen=True)
class Kinematics:
    """Velocities and displacements integrated from recorded accelerations."""
    z_dot_hat: np.ndarray
    y_dot_hat: np.ndarray
    y_dot_next_hat: np.ndarray  # body velocity after step k
    z_hat: np.ndarray
    y_hat: np.ndarray


@dataclass(frozen=True)
class DatasetView:
    """Read-only subset of a dataset (train or test)."""
    name: str
    samples: Tuple[Sample, ...]
    config: GenConfig

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    @property
    def road_indices(self) -> set:
        return {s.road_index for s in self.samples}


@dataclass
class Dataset:
    """All samples of a generated dataset together with their provenance."""
    config: GenConfig
    roads: List[RoadRecord]
    samples: List[Sample] = field(default_factory=list)

    @property
    def train_road_indices(self) -> range:
        return range(1, self.config.train_roads + 1)

    @property
    def test_road_indices(self) -> range:
        return range(self.config.train_roads + 1, self.config.roads + 1)

    def views(self) -> Tuple[DatasetView, DatasetView]:
        return split(self, self.config.train_roads)


def road_record(config: GenConfig, road_index: int) -> RoadRecord:
    """Class and phase seed of road `road_index`, derived from the master seed."""
    rng = np.random.default_rng(derive_seed(config.master_seed, road_index, CLASS_STREAM))
    road_class = list(RoadClass)[int(rng.integers(0, len(RoadClass)))]
    return RoadRecord(index=road_index, road_class=road_class, seed=derive_seed(config.master_seed, road_index))


def draw_mass(config: GenConfig, road_index: int, mass_index: int) -> int:
    """Integer passenger mass, uniform on [mass_min, mass_max]."""
    rng = np.random.default_rng(derive_seed(config.master_seed, road_index, mass_index, MASS_STREAM))
    return int(rng.integers(config.mass_min, config.mass_max + 1))


def _road_values(config: GenConfig, road: RoadRecord) -> np.ndarray:
    profile = generate_road(road.road_class, config.frequencies, config.velocity, road.seed)
    return sample_road(profile, np.arange(config.n_steps) * config.step_width)


def _simulate_sample(config: GenConfig, road: RoadRecord, road_values: np.ndarray, mass_index: int, m3: int) -> Sample:
    try:
        trace = simulate_forcing(QcmParams(m3=m3), road_values, config.step_width)
    except SimulationDivergedError as e:
        raise e.at_sample(road.index, mass_index) from None
    return Sample(
        z_ddot=trace.z_ddot, y_ddot=trace.y_ddot, m3=m3,
        road_index=road.index, mass_index=mass_index,
        road_class=road.road_class, road_seed=road.seed,
    )


def _simulate_road(config: GenConfig, road: RoadRecord) -> List[Sample]:
    """All L_m samples of one road; module-level so worker processes can import it."""
    road_values = _road_values(config, road)
    return [
        _simulate_sample(config, road, road_values, i, draw_mass(config, road.index, i))
        for i in range(1, config.masses + 1)
    ]


def generate_dataset(config: GenConfig, threads: int = 1) -> Dataset:
    """
    Simulate L_r roads times L_m masses.

    Deterministic given config.master_seed; the worker count only changes speed.
    """
    logger.info(
        f"Generating dataset: roads={config.roads}, masses={config.masses}, N={config.n_steps}, "
        f"h={config.step_width}, seed={config.master_seed}, threads={threads}"
    )
    roads = [road_record(config, j) for j in range(1, config.roads + 1)]
    if threads > 1 and len(roads) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            per_road = list(pool.map(_simulate_road, [config] * len(roads), roads))
    else:
        per_road = [_simulate_road(config, road) for road in roads]

    samples = [sample for road_samples in per_road for sample in road_samples]
    classes = sorted({r.road_class.value for r in roads})
    logger.info(f"Generated {len(samples)} samples on road classes {', '.join(classes)}")
    return Dataset(config=config, roads=roads, samples=samples)


def regenerate_sample(config: GenConfig, road: RoadRecord, mass_index: int, m3: int) -> Sample:
    """Rebuild one sample from its recorded descriptors."""
    return _simulate_sample(config, road, _road_values(config, road), mass_index, m3)


def split(dataset: Dataset, train_road_count: int) -> Tuple[DatasetView, DatasetView]:
    """Road-disjoint split: roads 1..count train, the rest test."""
    if not 0 < train_road_count < dataset.config.roads:
        raise DomainError(
            f"train_road_count must lie strictly between 0 and {dataset.config.roads}, got {train_road_count}"
        )
    train = tuple(s for s in dataset.samples if s.road_index <= train_road_count)
    test = tuple(s for s in dataset.samples if s.road_index > train_road_count)
    return DatasetView("train", train, dataset.config), DatasetView("test", test, dataset.config)


def window_start(sample: Sample, rng: np.random.Generator, length: int = WINDOW_LENGTH) -> int:
    """Uniform start index on {0, ..., N - length}."""
    if sample.N < length:
        raise DomainError(f"{sample.sample_id} has {sample.N} rows, shorter than the window ({length})")
    return int(rng.integers(0, sample.N - length + 1))


def sample_window(
    sample: Sample,
    rng: Optional[np.random.Generator] = None,
    length: int = WINDOW_LENGTH,
    start: Optional[int] = None,
) -> Window:
    """Random (or forced, via `start`) contiguous frame of `length` rows."""
    if sample.N < length:
        raise DomainError(f"{sample.sample_id} has {sample.N} rows, shorter than the window ({length})")
    if start is None:
        if rng is None:
            raise DomainError("Either rng or start is required")
        start = window_start(sample, rng, length)
    elif not 0 <= start <= sample.N - length:
        raise DomainError(f"Window start {start} outside 0..{sample.N - length}")
    values = np.stack([sample.z_ddot[start:start + length], sample.y_ddot[start:start + length]], axis=1)
    return Window(start=start, values=values)


def add_noise(sample: Sample, sigma: float, rng: np.random.Generator) -> Sample:
    """Independent Gaussian noise (standard deviation sigma) on both channels."""
    if sigma < 0:
        raise DomainError(f"Noise level must be non-negative, got {sigma}")
    if sigma == 0:
        return sample
    xi = rng.normal(0.0, sigma, size=sample.N)
    nu = rng.normal(0.0, sigma, size=sample.N)
    return replace(sample, z_ddot=sample.z_ddot + xi, y_ddot=sample.y_ddot + nu)


def _integrate(acc: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    velocity_next = np.cumsum(h * acc)
    velocity = np.zeros_like(acc)
    velocity[1:] = velocity_next[:-1]
    position = np.zeros_like(acc)
    position[1:] = np.cumsum(h * velocity[1:])
    return velocity, velocity_next, position


def reconstruct_kinematics(z_ddot: np.ndarray, y_ddot: np.ndarray, h: float) -> Kinematics:
    """
    Integrate accelerations twice with the semi-implicit scheme, from rest.

    velocity_k = velocity_{k-1} + h * acc_{k-1}
    position_k = position_{k-1} + h * velocity_k

    On clean simulator output this reproduces the simulated velocities and
    displacements up to rounding.
    """
    if not h > 0:
        raise DomainError(f"Step width must be positive, got {h}")
    z_ddot = np.asarray(z_ddot, dtype=np.float64)
    y_ddot = np.asarray(y_ddot, dtype=np.float64)
    if z_ddot.shape != y_ddot.shape:
        raise DomainError("Acceleration channels differ in length")
    z_dot, _, z = _integrate(z_ddot, h)
    y_dot, y_dot_next, y = _integrate(y_ddot, h)
    return Kinematics(z_dot_hat=z_dot, y_dot_hat=y_dot, y_dot_next_hat=y_dot_next, z_hat=z, y_hat=y)


def relative_kinematics(kin: Kinematics) -> Tuple[np.ndarray, np.ndarray]:
    """
    Seat-minus-body velocity and displacement as step k couples them:
    (z'_k - y'_{k+1}, z_k - y_k).
    """
    return kin.z_dot_hat - kin.y_dot_next_hat, kin.z_hat - kin.y_hat


def save_dataset(dataset: Dataset, path: Path) -> List[Path]:
    """
    Write sample files, then the manifest.

    Returns the written paths, manifest last.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    written = []
    records = []
    for sample in dataset.samples:
        data = f64_bytes(sample.z_ddot, sample.y_ddot)
        sample_path = path / f"{sample.sample_id}.f64"
        sample_path.write_bytes(data)
        written.append(sample_path)
        records.append(SampleRecord(
            road_index=sample.road_index, mass_index=sample.mass_index, m3=sample.m3, sha256=sha256_bytes(data)
        ))
    manifest = DatasetManifest.from_config(dataset.config, dataset.roads, records)
    manifest_path = path / MANIFEST_NAME
    write_model(manifest_path, manifest)
    written.append(manifest_path)
    logger.info(f"Saved {len(records)} samples to {path}")
    return written


def load_manifest(path: Path) -> DatasetManifest:
    """Read and check the manifest without touching sample files."""
    manifest = read_model(Path(path) / MANIFEST_NAME, DatasetManifest)
    if manifest.format_version != DATASET_FORMAT_VERSION:
        raise DatasetFormatError(
            f"Dataset format version {manifest.format_version} not supported (expected {DATASET_FORMAT_VERSION})"
        )
    if len(manifest.roads) != manifest.L_r:
        raise DatasetFormatError(f"Manifest lists {len(manifest.roads)} roads, L_r is {manifest.L_r}")
    if len(manifest.samples) != manifest.L_r * manifest.L_m:
        raise DatasetFormatError(
            f"Manifest lists {len(manifest.samples)} samples, expected L_r*L_m = {manifest.L_r * manifest.L_m}"
        )
    return manifest


def load_dataset(path: Path) -> Dataset:
    """Load a dataset written by `save_dataset`, verifying size and hash of every sample."""
    path = Path(path)
    manifest = load_manifest(path)
    config = manifest.to_config()
    roads = {road.index: road for road in manifest.roads}
    samples = []
    for record in manifest.samples:
        sample_path = path / f"{record.sample_id}.f64"
        values = read_f64(sample_path, 2 * manifest.N, record.sample_id)
        if sha256_bytes(sample_path.read_bytes()) != record.sha256:
            raise DatasetFormatError("content hash does not match the manifest", record.sample_id)
        road = roads.get(record.road_index)
        if road is None:
            raise DatasetFormatError(f"unknown road index {record.road_index}", record.sample_id)
        samples.append(Sample(
            z_ddot=values[:manifest.N].copy(), y_ddot=values[manifest.N:].copy(), m3=record.m3,
            road_index=record.road_index, mass_index=record.mass_index,
            road_class=road.road_class, road_seed=road.seed,
        ))
    logger.info(f"Loaded {len(samples)} samples from {path}")
    return Dataset(config=config, roads=list(manifest.roads), samples=samples)


def sample_rng(seed: int, sample: Sample, stream: int) -> np.random.Generator:
    """Generator keyed on a run seed and the sample identity, independent of view order."""
    return np.random.default_rng(derive_seed(seed, sample.road_index, sample.mass_index, stream))


def perturb_view(view: DatasetView, sigma: float, seed: int) -> DatasetView:
    """Apply `add_noise` to every sample with per-sample seeded generators."""
    if sigma == 0:
        return view
    noisy = tuple(add_noise(s, sigma, sample_rng(seed, s, NOISE_STREAM)) for s in view.samples)
    return DatasetView(view.name, noisy, view.config)


def stack_windows(samples: Sequence[Sample], starts: Sequence[int], length: int) -> np.ndarray:
    """B x length x 2 batch of windows."""
    batch = np.empty((len(samples), length, 2))
    for b, (sample, start) in enumerate(zip(samples, starts)):
        batch[b, :, 0] = sample.z_ddot[start:start + length]
        batch[b, :, 1] = sample.y_ddot[start:start + length]
    return batch
