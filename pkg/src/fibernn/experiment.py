"""End-to-end experiment: dataset, training, mapping, optical replay, reports.

The pipeline trains the electronic reference model, folds it into pulse
schedules, replays every test sample through the optical loop, and writes a
JSON report plus figure-ready CSVs. The noise sweep repeats the optical part
with amplifier and detector noise enabled and reports per-sample error bars.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .dataset import Dataset, build_dataset
from .mapping import CollapsedModel, build_schedule, collapse, combine_readouts
from .network import (
    DEFAULT_LAYER_SIZES,
    TrainConfig,
    TrainResult,
    evaluate,
    forward_batch,
    init_network,
    train,
)
from .optics import PhysicsConfig, prepare_pulses, run_prepared, run_schedule

SEED_DERIVATION = (
    "trial rng = numpy default_rng(SeedSequence(entropy=seed, "
    "spawn_key=(sample_index, trial_index)))"
)


@dataclass(frozen=True)
class DatasetConfig:
    per_class: int = 50
    snr_range_db: tuple = (15.0, 25.0)
    n_symbols: int = 4096
    seed: int = 0


@dataclass(frozen=True)
class NetworkConfig:
    layer_sizes: tuple = DEFAULT_LAYER_SIZES
    train: TrainConfig = field(default_factory=TrainConfig)


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment description; echoed verbatim into reports."""

    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    amplifier_noise: bool = True
    detector_noise: bool = True
    monte_carlo_trials: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if self.monte_carlo_trials < 1:
            raise ValueError("monte_carlo_trials must be >= 1")

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """Reseed every stage: dataset, training, and optical trials."""
        return replace(
            self,
            seed=seed,
            dataset=replace(self.dataset, seed=seed),
            network=replace(
                self.network, train=replace(self.network.train, seed=seed)
            ),
        )


def config_to_dict(config: ExperimentConfig) -> dict:
    return dataclasses.asdict(config)


def _build(cls, values: dict, overrides: dict | None = None):
    merged = dict(values)
    if overrides:
        merged.update(overrides)
    fields = {f.name for f in dataclasses.fields(cls)}
    unknown = set(merged) - fields
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**merged)


def config_from_dict(doc: dict) -> ExperimentConfig:
    from .network import TrainConfig as TC
    from .optics import AmplifierParams, DetectorParams, ReadoutConfig, TimeGrid

    doc = dict(doc)
    dataset = _build(DatasetConfig, doc.pop("dataset", {}))
    dataset = replace(dataset, snr_range_db=tuple(dataset.snr_range_db))

    net_doc = dict(doc.pop("network", {}))
    train_cfg = _build(TC, net_doc.pop("train", {}))
    network = _build(NetworkConfig, net_doc, {"train": train_cfg})
    network = replace(network, layer_sizes=tuple(network.layer_sizes))

    phys_doc = dict(doc.pop("physics", {}))
    grid = _build(TimeGrid, phys_doc.pop("grid", {}))
    amplifier = _build(AmplifierParams, phys_doc.pop("amplifier", {}))
    detector = _build(DetectorParams, phys_doc.pop("detector", {}))
    readout = _build(ReadoutConfig, phys_doc.pop("readout", {}))
    curve = phys_doc.pop("activation_curve", None)
    if curve is not None:
        curve = tuple(tuple(row) for row in curve)
    physics = _build(
        PhysicsConfig,
        phys_doc,
        {
            "grid": grid,
            "amplifier": amplifier,
            "detector": detector,
            "readout": readout,
            "activation_curve": curve,
        },
    )
    return _build(
        ExperimentConfig,
        doc,
        {"dataset": dataset, "network": network, "physics": physics},
    )


def trial_rng(base_seed: int, sample_index: int, trial_index: int) -> np.random.Generator:
    """Collision-free per-trial stream; order of execution does not matter."""
    seq = np.random.SeedSequence(
        entropy=base_seed, spawn_key=(sample_index, trial_index)
    )
    return np.random.default_rng(seq)


# ---------------------------------------------------------------------------
# Stages


def compare_outputs(theoretic: np.ndarray, fiber: np.ndarray) -> dict:
    """Per-sample and aggregate deviation metrics between output matrices."""
    a = np.atleast_2d(np.asarray(theoretic, dtype=float))
    b = np.atleast_2d(np.asarray(fiber, dtype=float))
    if a.shape != b.shape:
        raise ValueError(f"output shapes differ: {a.shape} vs {b.shape}")
    deviation = np.abs(a - b)
    agree = np.argmax(a, axis=1) == np.argmax(b, axis=1)
    return {
        "per_sample_max_abs_deviation": deviation.max(axis=1).tolist(),
        "argmax_agreement": agree.tolist(),
        "agreement_count": int(agree.sum()),
        "sample_count": int(len(agree)),
        "max_abs_deviation": float(deviation.max()),
        "mean_abs_deviation": float(deviation.mean()),
    }


def _schedule_outputs(schedule, result) -> np.ndarray:
    return np.array(
        [
            combine_readouts(
                result.product_readouts[g],
                result.reference_readouts[g],
                schedule.segment_count,
            )
            for g in range(schedule.group_count)
        ]
    )


def simulate_sample(
    collapsed: CollapsedModel,
    x: np.ndarray,
    physics: PhysicsConfig,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Optical outputs for one input vector (one run, no averaging)."""
    schedule = build_schedule(collapsed, x)
    result = run_schedule(schedule, physics, rng)
    return _schedule_outputs(schedule, result)


def _train_stage(config: ExperimentConfig, dataset: Dataset) -> TrainResult:
    x, y = dataset.matrices("train")
    net = init_network(config.network.layer_sizes, seed=config.network.train.seed)
    return train(net, x, y, config.network.train)


def _accuracy_block(outputs: np.ndarray, labels: np.ndarray) -> dict:
    pred = np.argmax(outputs, axis=1)
    true = np.argmax(labels, axis=1)
    n = labels.shape[1]
    confusion = np.zeros((n, n), dtype=int)
    for t, p in zip(true, pred):
        confusion[t, p] += 1
    return {
        "accuracy": float(np.mean(pred == true)),
        "confusion": confusion.tolist(),
    }


def _base_report(kind: str, config: ExperimentConfig) -> dict:
    return {
        "schema_version": 1,
        "kind": kind,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "config": config_to_dict(config),
        "seed_derivation": SEED_DERIVATION,
    }


def run_pipeline(config: ExperimentConfig, out_dir: Path | str | None = None) -> dict:
    """Noiseless end-to-end comparison of electronic and optical outputs.

    Writes ``report.json`` and ``outputs_fig4.csv`` when ``out_dir`` is given.
    """
    ds = build_dataset(
        per_class=config.dataset.per_class,
        snr_range_db=config.dataset.snr_range_db,
        seed=config.dataset.seed,
        n_symbols=config.dataset.n_symbols,
    )
    trained = _train_stage(config, ds)
    collapsed = collapse(trained.net)

    x_test, y_test = ds.matrices("test")
    theoretic = forward_batch(trained.net, x_test)

    physics = config.physics.with_noise(False, False)
    fiber = np.array(
        [simulate_sample(collapsed, x, physics) for x in x_test]
    )

    report = _base_report("pipeline", config)
    report["training"] = {
        "loss_kind": config.network.train.loss_kind,
        "epochs_run": trained.epochs_run,
        "final_loss": trained.final_loss,
        "loss_history_tail": [float(v) for v in trained.loss_history[-10:]],
    }
    report["test_samples"] = [
        {"class_name": s.class_name, "snr_db": s.snr_db, "seed": s.seed}
        for s in ds.test
    ]
    report["theoretic"] = {
        "outputs": theoretic.tolist(),
        **_accuracy_block(theoretic, y_test),
    }
    report["fiber"] = {
        "outputs": fiber.tolist(),
        "outputs_std": np.zeros_like(fiber).tolist(),
        **_accuracy_block(fiber, y_test),
    }
    report["comparison"] = compare_outputs(theoretic, fiber)

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_report(report, out / "report.json")
        _write_fig4_csv(out / "outputs_fig4.csv", ds, theoretic, fiber)
    return report


def _sweep_one_sample(args: tuple) -> tuple:
    """Worker: all Monte Carlo trials for one test sample."""
    (sample_index, x, matrix, physics, base_seed, trials) = args
    collapsed = CollapsedModel(effective_matrix=matrix)
    schedule = build_schedule(collapsed, x)
    prepared = prepare_pulses(schedule, physics)
    outputs = np.zeros((trials, collapsed.output_dim))
    for trial in range(trials):
        rng = trial_rng(base_seed, sample_index, trial)
        result = run_prepared(prepared, physics, rng)
        outputs[trial] = _schedule_outputs(schedule, result)
    return sample_index, outputs


def noise_sweep(
    config: ExperimentConfig,
    trials: int | None = None,
    out_dir: Path | str | None = None,
    n_jobs: int = 1,
) -> dict:
    """Monte Carlo noise study over the test set.

    Each sample is replayed ``trials`` times with the configured noise
    sources; the report holds per-sample output means, standard deviations,
    and the fraction of trials whose argmax matches the true class. Writes
    ``report.json`` and ``errorbars_fig5.csv`` when ``out_dir`` is given.
    """
    trials = config.monte_carlo_trials if trials is None else int(trials)
    if trials < 2:
        raise ValueError("noise sweep needs trials >= 2")

    ds = build_dataset(
        per_class=config.dataset.per_class,
        snr_range_db=config.dataset.snr_range_db,
        seed=config.dataset.seed,
        n_symbols=config.dataset.n_symbols,
    )
    trained = _train_stage(config, ds)
    collapsed = collapse(trained.net)

    x_test, y_test = ds.matrices("test")
    theoretic = forward_batch(trained.net, x_test)
    physics = config.physics.with_noise(config.amplifier_noise, config.detector_noise)

    tasks = [
        (i, x_test[i], collapsed.effective_matrix, physics, config.seed, trials)
        for i in range(len(x_test))
    ]
    results: dict = {}
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            for index, outputs in pool.map(_sweep_one_sample, tasks):
                results[index] = outputs
    else:
        for task in tasks:
            index, outputs = _sweep_one_sample(task)
            results[index] = outputs

    all_outputs = np.stack([results[i] for i in range(len(x_test))])  # (n, trials, k)
    mean = all_outputs.mean(axis=1)
    std = all_outputs.std(axis=1)
    true = np.argmax(y_test, axis=1)
    correct_rate = np.array(
        [np.mean(np.argmax(results[i], axis=1) == true[i]) for i in range(len(x_test))]
    )

    report = _base_report("noise_sweep", config)
    report["trials"] = trials
    report["noise_flags"] = {
        "amplifier": config.amplifier_noise,
        "detector": config.detector_noise,
    }
    report["training"] = {
        "loss_kind": config.network.train.loss_kind,
        "epochs_run": trained.epochs_run,
        "final_loss": trained.final_loss,
    }
    report["test_samples"] = [
        {"class_name": s.class_name, "snr_db": s.snr_db, "seed": s.seed}
        for s in ds.test
    ]
    report["theoretic"] = {
        "outputs": theoretic.tolist(),
        **_accuracy_block(theoretic, y_test),
    }
    report["fiber"] = {
        "outputs": mean.tolist(),
        "outputs_std": std.tolist(),
        "correct_rate": correct_rate.tolist(),
        "mean_correct_rate": float(correct_rate.mean()),
        **_accuracy_block(mean, y_test),
    }
    report["comparison"] = compare_outputs(theoretic, mean)
    report["separation"] = _separation_block(mean, std, true)

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_report(report, out / "report.json")
        _write_fig5_csv(out / "errorbars_fig5.csv", ds, mean, std, correct_rate)
    return report


def _separation_block(mean: np.ndarray, std: np.ndarray, true: np.ndarray) -> dict:
    """One-sigma separation of the true-class output from its best competitor:
    mean_true - std_true must exceed max over others of mean + std."""
    separated = []
    for i, t in enumerate(true):
        lower = mean[i, t] - std[i, t]
        upper = max(
            mean[i, k] + std[i, k] for k in range(mean.shape[1]) if k != t
        )
        separated.append(bool(lower > upper))
    return {
        "one_sigma_separated": separated,
        "separated_fraction": float(np.mean(separated)),
    }


# ---------------------------------------------------------------------------
# Output files


def write_report(report: dict, path: Path | str) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True))


def report_without_timestamp(report: dict) -> dict:
    trimmed = dict(report)
    trimmed.pop("created_utc", None)
    return trimmed


def _write_fig4_csv(path: Path, ds: Dataset, theoretic: np.ndarray, fiber: np.ndarray) -> None:
    k = theoretic.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["sample_id", "true_class"]
            + [f"theoretic_{i}" for i in range(k)]
            + [f"fiber_{i}" for i in range(k)]
            + ["argmax_agree"]
        )
        for i, sample in enumerate(ds.test):
            agree = int(np.argmax(theoretic[i]) == np.argmax(fiber[i]))
            writer.writerow(
                [i, sample.class_name]
                + [f"{v:.9g}" for v in theoretic[i]]
                + [f"{v:.9g}" for v in fiber[i]]
                + [agree]
            )


def _write_fig5_csv(
    path: Path,
    ds: Dataset,
    mean: np.ndarray,
    std: np.ndarray,
    correct_rate: np.ndarray,
) -> None:
    k = mean.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["sample_id", "true_class"]
            + [f"mean_{i}" for i in range(k)]
            + [f"std_{i}" for i in range(k)]
            + ["correct_rate"]
        )
        for i, sample in enumerate(ds.test):
            writer.writerow(
                [i, sample.class_name]
                + [f"{v:.9g}" for v in mean[i]]
                + [f"{v:.9g}" for v in std[i]]
                + [f"{correct_rate[i]:.4f}"]
            )
