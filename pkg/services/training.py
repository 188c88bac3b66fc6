"""
Objectives, training loop and evaluation metrics.

Two objectives train the same estimator:

- labelled: L1 distance between estimate and the true (p1, p2) of the sample;
- unlabelled: squared residual between the recorded seat acceleration and the
  acceleration rebuilt from the estimate and the integrated kinematics.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Protocol, Sequence, Tuple, Union

import numpy as np

from exceptions import DomainError, NonFiniteLossError
from schemas import EvalReport, Objective, ParamStats, RobustnessReport, RobustnessRow, TrainConfig
from services.dataset import (
    NOISE_STREAM,
    WINDOW_STREAM,
    DatasetView,
    Kinematics,
    Sample,
    add_noise,
    perturb_view,
    reconstruct_kinematics,
    relative_kinematics,
    sample_rng,
    stack_windows,
    window_start,
)
from services.net import AdamState, NetParams, adam_step, backward_batch, forward_batch, init_adam
from services.qcm_sim import TargetParams
from services.road_synth import derive_seed

logger = logging.getLogger(__name__)

PARAM_NAMES = ("p1", "p2")
TRAIN_STREAM = 5
TRAIN_NOISE_STREAM = 6


class Predictor(Protocol):
    """Anything that maps a batch of windows (and their samples) to (B, 2) estimates."""
    window_length: int

    def __call__(self, windows: np.ndarray, samples: Sequence[Sample]) -> np.ndarray: ...


class NetworkPredictor:
    """Predictor backed by network parameters, evaluated in fixed-size chunks."""

    def __init__(self, params: NetParams, chunk_size: int = 100):
        self.params = params
        self.chunk_size = chunk_size

    @property
    def window_length(self) -> int:
        return self.params.arch.window_length

    def __call__(self, windows: np.ndarray, samples: Sequence[Sample]) -> np.ndarray:
        outputs = [forward_batch(self.params, windows[i:i + self.chunk_size])[0]
                   for i in range(0, windows.shape[0], self.chunk_size)]
        return np.concatenate(outputs, axis=0) if outputs else np.empty((0, self.params.arch.outputs))


def as_predictor(model: Union[NetParams, Predictor]) -> Predictor:
    return NetworkPredictor(model) if isinstance(model, NetParams) else model


# Objectives

def loss_labelled(p_tilde, p) -> float:
    """Sum of absolute parameter errors."""
    return float(np.sum(np.abs(np.asarray(p, dtype=np.float64) - np.asarray(p_tilde, dtype=np.float64))))


def reproduce_acceleration(p_tilde, kin: Kinematics, indices) -> np.ndarray:
    """Seat acceleration implied by estimated (p1, p2) at `indices`."""
    p1, p2 = (float(a) for a in p_tilde)
    indices = np.asarray(indices)
    dv, dd = relative_kinematics(kin)
    return -p1 * dv[indices] - p2 * dd[indices]


def loss_unlabelled(p_tilde, kin: Kinematics, indices, z_ddot: np.ndarray) -> float:
    """Sum of squared residuals between recorded and reproduced seat acceleration over `indices`."""
    indices = np.asarray(indices)
    residual = np.asarray(z_ddot)[indices] - reproduce_acceleration(p_tilde, kin, indices)
    return float(np.sum(residual ** 2))


def relative_deviation(p: float, p_tilde: float) -> float:
    """|p - p_tilde| / p."""
    if not p > 0:
        raise DomainError(f"True parameter must be positive, got {p}")
    return abs(p - p_tilde) / p


def least_squares_parameters(kin: Kinematics, z_ddot: np.ndarray, indices=None) -> TargetParams:
    """
    Closed-form (p1, p2) minimizing the unlabelled residual, network bypassed.
    """
    dv, dd = relative_kinematics(kin)
    z_ddot = np.asarray(z_ddot, dtype=np.float64)
    if indices is not None:
        dv, dd, z_ddot = dv[indices], dd[indices], z_ddot[indices]
    design = np.stack([-dv, -dd], axis=1)
    solution, *_ = np.linalg.lstsq(design, z_ddot, rcond=None)
    return TargetParams(p1=float(solution[0]), p2=float(solution[1]))


def _labelled_batch(outputs: np.ndarray, targets: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean batch loss and d(mean loss)/d(outputs); subgradient 0 at the kink."""
    batch = outputs.shape[0]
    losses = np.sum(np.abs(targets - outputs), axis=1)
    upstream = np.sign(outputs - targets) / batch
    return float(losses.mean()), upstream


def _unlabelled_batch(outputs: np.ndarray, dv: np.ndarray, dd: np.ndarray, z_ddot: np.ndarray) -> Tuple[float, np.ndarray]:
    """Same as `_labelled_batch` for the residual objective; dv, dd, z_ddot are (B, window)."""
    batch = outputs.shape[0]
    p1 = outputs[:, 0:1]
    p2 = outputs[:, 1:2]
    residual = z_ddot + p1 * dv + p2 * dd
    losses = np.sum(residual ** 2, axis=1)
    upstream = np.stack([2.0 * np.sum(residual * dv, axis=1), 2.0 * np.sum(residual * dd, axis=1)], axis=1) / batch
    return float(losses.mean()), upstream


# Evaluation

@dataclass(frozen=True)
class Predictions:
    """Per-sample estimates on one view, aligned with `samples`."""
    samples: Tuple[Sample, ...]
    starts: np.ndarray
    truth: np.ndarray
    predicted: np.ndarray

    @property
    def relative(self) -> np.ndarray:
        return np.abs(self.truth - self.predicted) / self.truth


def predict_view(
    model: Union[NetParams, Predictor],
    view: DatasetView,
    noise_sigma: float = 0.0,
    seed: int = 0,
    chunk_size: int = 100,
) -> Predictions:
    """
    One window per sample, optionally on noisy data.

    Window starts and noise are keyed on (seed, road, mass), so results do
    not depend on the order of the view.
    """
    if len(view) == 0:
        raise DomainError(f"View '{view.name}' is empty")
    predictor = as_predictor(model)
    length = predictor.window_length
    starts = np.empty(len(view), dtype=np.int64)
    predicted = np.empty((len(view), 2))
    samples = view.samples
    for lo in range(0, len(samples), chunk_size):
        chunk = samples[lo:lo + chunk_size]
        perturbed = [add_noise(s, noise_sigma, sample_rng(seed, s, NOISE_STREAM)) for s in chunk]
        chunk_starts = [window_start(s, sample_rng(seed, s, WINDOW_STREAM), length) for s in chunk]
        windows = stack_windows(perturbed, chunk_starts, length)
        predicted[lo:lo + len(chunk)] = predictor(windows, chunk)
        starts[lo:lo + len(chunk)] = chunk_starts
    truth = np.array([s.target.as_array() for s in samples])
    return Predictions(samples=samples, starts=starts, truth=truth, predicted=predicted)


def summarize(predictions: Predictions, split: str, noise_sigma: float, step: int = 0,
              objective: Optional[str] = None) -> EvalReport:
    rel = predictions.relative
    err = np.abs(predictions.truth - predictions.predicted)
    stats = [
        ParamStats(param=name, mu=float(rel[:, j].mean()), sigma=float(rel[:, j].std()), abs_mean=float(err[:, j].mean()))
        for j, name in enumerate(PARAM_NAMES)
    ]
    return EvalReport(step=step, objective=objective, split=split, noise_sigma=noise_sigma,
                      sample_count=len(predictions.samples), stats=stats)


def evaluate(
    model: Union[NetParams, Predictor],
    view: DatasetView,
    noise_sigma: float = 0.0,
    seed: int = 0,
    step: int = 0,
    objective: Optional[str] = None,
) -> EvalReport:
    """Mean and standard deviation of the relative deviation per parameter."""
    predictions = predict_view(model, view, noise_sigma, seed)
    report = summarize(predictions, view.name, noise_sigma, step, objective)
    logger.info(
        f"Evaluated {view.name} (sigma={noise_sigma}) at step {step}: "
        + ", ".join(f"{s.param} mu={s.mu:.4f} sigma={s.sigma:.4f}" for s in report.stats)
    )
    return report


def deviation_histogram(predictions: Predictions, bins: int = 50) -> List[Dict[str, float]]:
    """Plot-ready histogram rows of the relative deviation per parameter."""
    rows = []
    rel = predictions.relative
    for j, name in enumerate(PARAM_NAMES):
        counts, edges = np.histogram(rel[:, j], bins=bins)
        for count, left, right in zip(counts, edges[:-1], edges[1:]):
            rows.append({"param": name, "bin_left": float(left), "bin_right": float(right), "count": int(count)})
    return rows


def _noise_ratio(noisy: float, clean: float) -> float:
    if clean == 0:
        return float("inf") if noisy > 0 else 1.0
    return noisy / clean


def compare_robustness(
    labelled_clean: EvalReport,
    labelled_noisy: EvalReport,
    unlabelled_clean: EvalReport,
    unlabelled_noisy: EvalReport,
) -> RobustnessReport:
    """Ordering flags and verdict from the four clean/noisy test evaluations."""
    noise_sigma = labelled_noisy.noise_sigma
    rows = [
        RobustnessRow(objective=objective, noise_sigma=report.noise_sigma, param=s.param, mu=s.mu, sigma=s.sigma)
        for objective, reports in ((Objective.LABELLED.value, (labelled_clean, labelled_noisy)),
                                   (Objective.UNLABELLED.value, (unlabelled_clean, unlabelled_noisy)))
        for report in reports
        for s in report.stats
    ]

    lower, ratio_higher = {}, {}
    for name in PARAM_NAMES:
        l_noisy, u_noisy = labelled_noisy.stat(name).mu, unlabelled_noisy.stat(name).mu
        lower[name] = u_noisy < l_noisy
        ratio_higher[name] = (_noise_ratio(l_noisy, labelled_clean.stat(name).mu)
                              > _noise_ratio(u_noisy, unlabelled_clean.stat(name).mu))

    noisy_mus = [(labelled_noisy.stat(n).mu, unlabelled_noisy.stat(n).mu) for n in PARAM_NAMES]
    if all(a == b for a, b in noisy_mus):
        verdict = "no difference"
    elif all(lower.values()):
        verdict = "J_U more robust"
    elif all(b > a for a, b in noisy_mus):
        verdict = "J_L more robust"
    else:
        verdict = "mixed"
    logger.info(f"Robustness verdict at sigma={noise_sigma}: {verdict}")
    return RobustnessReport(noise_sigma=noise_sigma, rows=rows, unlabelled_lower_noisy=lower,
                            labelled_ratio_higher=ratio_higher, verdict=verdict)


def robustness_report(
    labelled: Union[NetParams, Predictor],
    unlabelled: Union[NetParams, Predictor],
    test_view: DatasetView,
    noise_sigma: float,
    seed: int = 0,
) -> RobustnessReport:
    """Clean and noisy test deviation for both estimators, plus the ordering verdict."""
    reports = []
    for objective, model in ((Objective.LABELLED, labelled), (Objective.UNLABELLED, unlabelled)):
        clean = evaluate(model, test_view, 0.0, seed, objective=objective.value)
        noisy = evaluate(model, test_view, noise_sigma, seed, objective=objective.value) if noise_sigma > 0 else clean
        reports.extend([clean, noisy])
    return compare_robustness(*reports)


# Training

@dataclass
class TrainResult:
    params: NetParams
    adam: AdamState
    history: List[EvalReport] = field(default_factory=list)


def _history_point(params: NetParams, train_view: DatasetView, test_view: Optional[DatasetView],
                   config: TrainConfig, step: int) -> List[EvalReport]:
    objective = config.objective.value
    views = [train_view] + ([test_view] if test_view is not None and len(test_view) else [])
    sigmas = [0.0] + ([config.noise_sigma_eval] if config.noise_sigma_eval > 0 else [])
    return [evaluate(params, view, sigma, config.seed, step=step, objective=objective)
            for sigma in sigmas for view in views]


def train(
    train_view: DatasetView,
    test_view: Optional[DatasetView],
    params: NetParams,
    config: TrainConfig,
    adam: Optional[AdamState] = None,
    on_history: Optional[Callable[[List[EvalReport]], None]] = None,
) -> TrainResult:
    """
    Mini-batch training with a fresh random window per batch member and step.

    Fully determined by (config, params, adam, data): batch members and
    window starts come from a generator seeded by config.seed and the Adam
    step count, so a resumed run continues with fresh batches.
    """
    if len(train_view) == 0:
        raise DomainError("Training view is empty")
    adam = adam or init_adam(params, config.learning_rate, config.beta1, config.beta2, config.epsilon)
    history: List[EvalReport] = []
    if config.steps == 0:
        return TrainResult(params, adam, history)

    length = params.arch.window_length
    data_view = perturb_view(train_view, config.noise_sigma_train, derive_seed(config.seed, TRAIN_NOISE_STREAM))
    samples = data_view.samples
    targets = np.array([s.target.as_array() for s in samples])
    n_rows = min(s.N for s in samples)
    if n_rows < length:
        raise DomainError(f"Samples have {n_rows} rows, shorter than the window ({length})")

    relative = None
    if config.objective == Objective.UNLABELLED:
        h = train_view.config.step_width
        relative = [relative_kinematics(reconstruct_kinematics(s.z_ddot, s.y_ddot, h)) for s in samples]

    logger.info(
        f"Training ({config.objective.value}): {config.steps} steps, batch {config.batch_size}, "
        f"lr {config.learning_rate}, {len(samples)} training samples, seed {config.seed}"
    )
    rng = np.random.default_rng(derive_seed(config.seed, TRAIN_STREAM, adam.t))
    point = _history_point(params, train_view, test_view, config, adam.t)
    history.extend(point)
    if on_history:
        on_history(point)

    started = time.monotonic()
    first_step = adam.t
    for _ in range(config.steps):
        step = adam.t + 1
        members = rng.integers(0, len(samples), size=config.batch_size)
        starts = rng.integers(0, n_rows - length + 1, size=config.batch_size)
        batch_samples = [samples[m] for m in members]
        windows = stack_windows(batch_samples, starts, length)
        outputs, cache = forward_batch(params, windows)

        if config.objective == Objective.LABELLED:
            loss, upstream = _labelled_batch(outputs, targets[members])
        else:
            frames = [slice(s, s + length) for s in starts]
            dv = np.stack([relative[m][0][f] for m, f in zip(members, frames)])
            dd = np.stack([relative[m][1][f] for m, f in zip(members, frames)])
            zdd = np.stack([samples[m].z_ddot[f] for m, f in zip(members, frames)])
            loss, upstream = _unlabelled_batch(outputs, dv, dd, zdd)

        if not np.isfinite(loss):
            raise NonFiniteLossError(step, [(s.road_index, s.mass_index) for s in batch_samples])

        grads = backward_batch(params, cache, upstream)
        tensors, adam = adam_step(params.tensors, grads, adam)
        params = params.with_tensors(tensors)
        logger.debug(f"step {step}: loss {loss:.6g}")

        done = step - first_step
        if step % config.eval_every == 0 or done == config.steps:
            elapsed = time.monotonic() - started
            logger.info(f"Step {step}: batch loss {loss:.6g} ({elapsed / done:.3f} s/step)")
            point = _history_point(params, train_view, test_view, config, step)
            history.extend(point)
            if on_history:
                on_history(point)
    return TrainResult(params, adam, history)
