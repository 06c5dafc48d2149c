"""End-to-end benchmark driver: generate, detect, train, evaluate, compare.

One experiment = a shared dataset (instances, exact labels, symmetry data,
one train/test split) crossed with a grid of augmentation schemes and run
seeds.  The split and the dataset depend only on the dataset seed, so every
scheme sees identical data; run seeds only steer augmentation draws, weight
init, and batch shuffling.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import seeding
from .align import evaluate_prediction, make_aligner
from .augment import SCHEMES, augment
from .bipartite import to_bipartite
from .datagen import BppConfig, GeneratedInstance, gen_bpp, split_dataset
from .gnn import TrainConfig, TrainingSample, predict_probs, train
from .symmetry import SymmetryDetection, analyze_instance

log = logging.getLogger(__name__)


@dataclass
class ExperimentConfig:
    bpp: BppConfig = field(default_factory=BppConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    schemes: tuple = SCHEMES
    seeds: tuple = (0, 1, 2)
    train_fraction: float = 0.6
    train_draws: int = 8    # augmentation samples per training instance
    enum_cap: int = 20000
    detect_budget: int = 1_000_000
    m_values: tuple = (30, 50, 70, 90)


def desk_profile(seed: int = 42) -> ExperimentConfig:
    """Full comparison grid sized for a laptop: 100 instances, 5 schemes, 3 seeds.

    The learning rate is raised above the long-run default so training
    converges within 30 epochs on the small instances this profile uses.
    """
    return ExperimentConfig(
        bpp=BppConfig(num_instances=100, seed=seed),
        train=TrainConfig(hidden=32, epochs=30, batch_size=8, lr=7e-3),
        schemes=SCHEMES,
        seeds=(0, 1, 2),
        train_fraction=0.6,
        train_draws=8,
    )


def smoke_profile(seed: int = 0) -> ExperimentConfig:
    """Two-scheme micro grid that exercises the whole pipeline in seconds."""
    return ExperimentConfig(
        bpp=BppConfig(num_instances=20, seed=seed),
        train=TrainConfig(hidden=32, epochs=10, batch_size=8, lr=7e-3),
        schemes=("noaug", "orbit"),
        seeds=(0,),
        train_fraction=0.6,
        train_draws=8,
    )


def config_to_doc(config: ExperimentConfig) -> dict:
    return {
        "bpp": asdict(config.bpp),
        "train": asdict(config.train),
        "schemes": list(config.schemes),
        "seeds": list(config.seeds),
        "train_fraction": config.train_fraction,
        "train_draws": config.train_draws,
        "enum_cap": config.enum_cap,
        "detect_budget": config.detect_budget,
        "m_values": list(config.m_values),
    }


def config_from_doc(doc: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Overlay a JSON-style dict onto ``base`` (default config when omitted).

    Raises ValueError on unknown keys or schemes so typos fail loudly.
    """
    cfg = base if base is not None else ExperimentConfig()
    known = set(config_to_doc(cfg))
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    for part, cls in (("bpp", BppConfig), ("train", TrainConfig)):
        if part in doc:
            sub = doc[part]
            bad = set(sub) - set(asdict(getattr(cfg, part)))
            if bad:
                raise ValueError(f"unknown {part} keys: {sorted(bad)}")
            cfg = replace(cfg, **{part: replace(getattr(cfg, part), **sub)})
    simple = {k: v for k, v in doc.items() if k not in ("bpp", "train")}
    for key in ("schemes", "seeds", "m_values"):
        if key in simple:
            simple[key] = tuple(simple[key])
    if simple:
        cfg = replace(cfg, **simple)
    for scheme in cfg.schemes:
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    return cfg


@dataclass
class PreparedData:
    data: list[GeneratedInstance]
    detections: list[SymmetryDetection]
    graphs: list
    train_idx: list[int]
    test_idx: list[int]


@dataclass
class RunResult:
    scheme: str
    seed: int
    history: list            # (epoch, train_loss, val_loss)
    best_val_loss: float
    best_epoch: int
    model: object
    scaler: object
    metrics: list             # one dict per test instance


def assemble(
    config: ExperimentConfig,
    data: list[GeneratedInstance],
    detections: list[SymmetryDetection] | None = None,
) -> PreparedData:
    """Build graphs and the train/test split for already-generated data.

    The split depends only on the dataset seed, never on run seeds.
    """
    if detections is None:
        detections = [analyze_instance(g.instance, config.detect_budget) for g in data]
    graphs = [to_bipartite(g.instance) for g in data]
    train_idx, test_idx = split_dataset(
        list(range(len(data))), config.train_fraction, config.bpp.seed
    )
    return PreparedData(data, detections, graphs, train_idx, test_idx)


def prepare(config: ExperimentConfig) -> PreparedData:
    return assemble(config, gen_bpp(config.bpp))


def _draw(prep: PreparedData, idx: int, scheme: str, run_seed: int,
          draw: int, draws_per_instance: int):
    det = prep.detections[idx]
    n = prep.data[idx].instance.num_vars
    seed = seeding.seed_for(run_seed, "augment", idx * max(draws_per_instance, 1) + draw)
    return augment(scheme, n, det.orbits, det.blocks, seed=seed).z


def run_one(prep: PreparedData, scheme: str, run_seed: int,
            config: ExperimentConfig) -> RunResult:
    train_samples = []
    for idx in prep.train_idx:
        for d in range(config.train_draws):
            train_samples.append(
                TrainingSample(
                    instance_id=idx,
                    graph=prep.graphs[idx],
                    z=_draw(prep, idx, scheme, run_seed, d, config.train_draws),
                    label=prep.data[idx].solution.values.copy(),
                )
            )
    val_samples = [
        TrainingSample(
            instance_id=idx,
            graph=prep.graphs[idx],
            z=_draw(prep, idx, scheme, run_seed, 0, config.train_draws),
            label=prep.data[idx].solution.values.copy(),
        )
        for idx in prep.test_idx
    ]

    entries = {
        idx: (prep.data[idx].instance, prep.detections[idx])
        for idx in prep.train_idx + prep.test_idx
    }
    aligner = make_aligner(entries, enum_cap=config.enum_cap, seed=run_seed)

    tc = replace(config.train, seed=run_seed)
    result = train(train_samples, val_samples, tc, aligner=aligner)

    metrics = evaluate_run(prep, scheme, run_seed, config, result.model, result.scaler)

    log.info("run scheme=%s seed=%d best_val=%.4f at epoch %d",
             scheme, run_seed, result.best_val_loss, result.best_epoch)
    return RunResult(scheme, run_seed, result.history, result.best_val_loss,
                     result.best_epoch, result.model, result.scaler, metrics)


def evaluate_run(prep: PreparedData, scheme: str, run_seed: int,
                 config: ExperimentConfig, model, scaler) -> list[dict]:
    """Symmetry-aware test metrics for one trained model, one row per instance."""
    metrics = []
    for idx in prep.test_idx:
        z = _draw(prep, idx, scheme, run_seed, 0, config.train_draws)
        probs = predict_probs(model, scaler, prep.graphs[idx], z)
        pm = evaluate_prediction(
            prep.data[idx].instance,
            prep.detections[idx],
            probs,
            prep.data[idx].solution.values,
            m_values=config.m_values,
            enum_cap=config.enum_cap,
            seed=run_seed,
        )
        row = {"instance": idx, "scheme": scheme, "seed": run_seed,
               "violation": pm.violation,
               "exact_alignment": pm.alignment.exact,
               "alignment_method": pm.alignment.method}
        for m, err in pm.top_m.items():
            row[f"top{m}"] = err
        metrics.append(row)
    return metrics


def run_experiment(config: ExperimentConfig, prep: PreparedData | None = None):
    if prep is None:
        prep = prepare(config)
    runs = []
    for scheme in config.schemes:
        for seed in config.seeds:
            runs.append(run_one(prep, scheme, seed, config))
    return prep, runs


def mean_top_m(runs: list[RunResult], m: int) -> dict:
    """scheme -> mean top-m error over every (seed, test instance)."""
    out: dict = {}
    for scheme in sorted({r.scheme for r in runs}):
        vals = [row[f"top{m}"] for r in runs if r.scheme == scheme for row in r.metrics]
        out[scheme] = float(np.mean(vals)) if vals else float("nan")
    return out


def mean_best_val(runs: list[RunResult]) -> dict:
    """scheme -> mean converged (best-epoch) validation loss over seeds."""
    out: dict = {}
    for scheme in sorted({r.scheme for r in runs}):
        vals = [r.best_val_loss for r in runs if r.scheme == scheme]
        out[scheme] = float(np.mean(vals)) if vals else float("nan")
    return out
