"""Command line pipeline: gen -> detect -> train -> eval, plus verify.

All commands operate on one dataset directory (``--out``) with the layout

    config.json            experiment config the dataset was generated with
    manifest.json          instance count and file list
    instances/inst_*.json  one bundle per instance (model, label, sizes)
    symmetry/symm_*.json   detection sidecar per instance
    symmetry/timing.csv    per-instance detection stats
    checkpoints/*.ckpt     one trained model per (scheme, seed)
    losses.csv             per-epoch train/val losses
    metrics.csv            per-instance symmetry-aware test metrics
    report.md              mean top-m% error table, one row per scheme

Config precedence: command line flags > ``--config`` JSON file > base,
where the base is the ``--profile`` preset when given, otherwise the
dataset's own config.json, otherwise built-in defaults.  Exit codes:
0 ok, 1 usage or bad input, 2 invariant violation, 3 budget exhausted.
"""

from __future__ import annotations

import dataclasses
import logging
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import data_io
from .align import closest_symmetric_label
from .augment import augment
from .datagen import GeneratedInstance, gen_bpp
from .errors import BudgetError, InvariantError, ParseError
from .experiment import (
    ExperimentConfig,
    assemble,
    config_from_doc,
    config_to_doc,
    desk_profile,
    evaluate_run,
    mean_top_m,
    run_one,
    smoke_profile,
)
from .ilp import evaluate
from .symmetry import analyze_instance, verify_symmetry

log = logging.getLogger(__name__)

PROFILES = {"default": ExperimentConfig, "smoke": smoke_profile, "desk": desk_profile}

# canonical report row order, least to most symmetry-aware
REPORT_ORDER = ("noaug", "uniform", "position", "orbit", "orbitplus")


def instance_path(out: Path, i: int) -> Path:
    return out / "instances" / f"inst_{i:04d}.json"


def sidecar_path(out: Path, i: int) -> Path:
    return out / "symmetry" / f"symm_{i:04d}.json"


def checkpoint_path(out: Path, scheme: str, seed: int) -> Path:
    return out / "checkpoints" / f"{scheme}_s{seed}.ckpt"


def resolve_config(out: Path, config_file: str | None, profile: str | None,
                   seed: int | None) -> ExperimentConfig:
    """Layer config sources, later sources winning; see the module docstring."""
    if profile is not None:
        cfg = PROFILES[profile]()
    else:
        cfg = ExperimentConfig()
        stored = out / "config.json"
        if stored.exists():
            cfg = config_from_doc(data_io.read_json(stored), cfg)
    if config_file is not None:
        cfg = config_from_doc(data_io.read_json(config_file), cfg)
    if seed is not None:
        cfg = dataclasses.replace(cfg, bpp=dataclasses.replace(cfg.bpp, seed=seed))
    return cfg


def load_manifest(out: Path) -> dict:
    path = out / "manifest.json"
    if not path.exists():
        raise click.UsageError(f"no manifest at {path}; run `gen` first")
    return data_io.read_json(path)


def load_bundle(out: Path, i: int) -> GeneratedInstance:
    path = instance_path(out, i)
    if not path.exists():
        raise click.UsageError(f"missing instance file {path}")
    inst, sol, sizes, index = data_io.load_instance_bundle(path)
    if sol is None or sizes is None:
        raise ParseError(f"{path}: bundle lacks solution or sizes")
    return GeneratedInstance(index if index is not None else i, sizes, inst, sol)


def load_dataset(out: Path, need_detections: bool = True):
    manifest = load_manifest(out)
    count = manifest["count"]
    data = [load_bundle(out, i) for i in range(count)]
    detections = None
    if need_detections:
        detections = []
        for i in range(count):
            path = sidecar_path(out, i)
            if not path.exists():
                raise click.UsageError(
                    f"missing symmetry sidecar {path}; run `detect` first")
            detections.append(data_io.load_detection(path))
    return manifest, data, detections


common_options = [
    click.option("--out", type=click.Path(path_type=Path), default=Path("run"),
                 show_default=True, help="Dataset directory."),
    click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False),
                 default=None, help="JSON config overlay."),
    click.option("--seed", type=int, default=None,
                 help="Root seed (overrides the dataset seed)."),
    click.option("--profile", type=click.Choice(sorted(PROFILES)), default=None,
                 help="Named preset used as the config base."),
]


def with_common(fn):
    for opt in reversed(common_options):
        fn = opt(fn)
    return fn


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("-v", "--verbose", is_flag=True, help="Log at INFO level.")
def cli(verbose: bool) -> None:
    """Predict solutions of symmetric integer programs with a small GNN."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


@cli.command()
@with_common
@click.option("--count", type=int, default=None, help="Number of instances.")
def gen(out: Path, config_file, seed, profile, count) -> None:
    """Generate a labeled bin packing dataset and write its manifest."""
    cfg = resolve_config(out, config_file, profile, seed)
    if count is not None:
        if count < 0:
            raise click.UsageError("--count must be >= 0")
        cfg = dataclasses.replace(cfg, bpp=dataclasses.replace(cfg.bpp, num_instances=count))
    data = gen_bpp(cfg.bpp)
    files = []
    for pos, g in enumerate(data):
        # files are named by position; the bundle keeps the rng draw index
        path = instance_path(out, pos)
        data_io.save_instance_bundle(path, g.instance, g.solution, g.sizes, g.index)
        files.append(str(path.relative_to(out)))
    data_io.write_json(out / "config.json", config_to_doc(cfg))
    data_io.write_json(out / "manifest.json", {
        "format": 1,
        "count": len(data),
        "seed": cfg.bpp.seed,
        "files": files,
    })
    click.echo(f"wrote {len(data)} instances to {out}")


@cli.command()
@with_common
@click.option("--force", is_flag=True, help="Redo instances that already have sidecars.")
def detect(out: Path, config_file, seed, profile, force) -> None:
    """Detect formulation symmetry for every instance; skip ones already done."""
    cfg = resolve_config(out, config_file, profile, seed)
    manifest = load_manifest(out)
    fresh = skipped = 0
    for i in range(manifest["count"]):
        target = sidecar_path(out, i)
        if target.exists() and not force:
            skipped += 1
            continue
        g = load_bundle(out, i)
        det = analyze_instance(g.instance, cfg.detect_budget)
        data_io.save_detection(target, det)
        fresh += 1
    rows = []
    for i in range(manifest["count"]):
        g = load_bundle(out, i)
        det = data_io.load_detection(sidecar_path(out, i))
        rows.append((i, g.instance.num_vars,
                     float(det.generators.group_order_log10),
                     float(det.detect_seconds)))
    data_io.write_csv(out / "symmetry" / "timing.csv",
                      ["instance", "n", "log10_order", "seconds"], rows)
    click.echo(f"detected {fresh} instances, skipped {skipped} (sidecars present)")


@cli.command()
@with_common
@click.option("--scheme", "schemes", multiple=True,
              help="Augmentation scheme (repeatable; default: config).")
@click.option("--epochs", type=int, default=None, help="Override epoch count.")
def train(out: Path, config_file, seed, profile, schemes, epochs) -> None:
    """Train one model per (scheme, run seed); write checkpoints and loss curves."""
    cfg = resolve_config(out, config_file, profile, seed)
    if schemes:
        cfg = config_from_doc({"schemes": list(schemes)}, cfg)
    if epochs is not None:
        cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, epochs=epochs))
    _, data, detections = load_dataset(out)
    prep = assemble(cfg, data, detections)
    loss_rows = []
    for scheme in cfg.schemes:
        for run_seed in cfg.seeds:
            t0 = time.perf_counter()
            run = run_one(prep, scheme, run_seed, cfg)
            meta = {
                "scheme": scheme,
                "run_seed": run_seed,
                "dataset_seed": cfg.bpp.seed,
                "train_draws": cfg.train_draws,
                "best_epoch": run.best_epoch,
                "best_val_loss": run.best_val_loss,
            }
            data_io.save_checkpoint(checkpoint_path(out, scheme, run_seed),
                                    run.model, run.scaler, meta)
            for epoch, train_loss, val_loss in run.history:
                loss_rows.append((scheme, run_seed, epoch,
                                  float(train_loss), float(val_loss)))
            click.echo(f"trained {scheme} seed={run_seed}"
                       f" best_val={run.best_val_loss:.4f}"
                       f" ({time.perf_counter() - t0:.1f}s)")
    data_io.write_csv(out / "losses.csv",
                      ["scheme", "seed", "epoch", "train_loss", "val_loss"],
                      loss_rows)
    click.echo(f"wrote {out / 'losses.csv'}")


@cli.command(name="eval")
@with_common
@click.option("--scheme", "schemes", multiple=True,
              help="Augmentation scheme (repeatable; default: config).")
def eval_cmd(out: Path, config_file, seed, profile, schemes) -> None:
    """Evaluate trained checkpoints on the test split; write metrics and report."""
    cfg = resolve_config(out, config_file, profile, seed)
    if schemes:
        cfg = config_from_doc({"schemes": list(schemes)}, cfg)
    if not cfg.schemes:
        raise click.UsageError("no schemes to evaluate")
    _, data, detections = load_dataset(out)
    prep = assemble(cfg, data, detections)
    rows = []
    for scheme in cfg.schemes:
        for run_seed in cfg.seeds:
            path = checkpoint_path(out, scheme, run_seed)
            if not path.exists():
                raise click.UsageError(f"missing checkpoint {path}; run `train` first")
            model, scaler, _meta = data_io.load_checkpoint(path)
            rows.extend(evaluate_run(prep, scheme, run_seed, cfg, model, scaler))
    m_cols = [f"top{m}" for m in cfg.m_values]
    header = ["instance", "scheme", "seed", *m_cols,
              "violation", "exact_alignment", "alignment_method"]
    data_io.write_csv(out / "metrics.csv", header,
                      [[row[k] for k in header] for row in rows])
    report = _report_table(rows, cfg)
    data_io.atomic_write_text(out / "report.md", report)
    click.echo(report.rstrip("\n"))
    click.echo(f"wrote {out / 'metrics.csv'} and {out / 'report.md'}")


def _report_table(rows: list[dict], cfg: ExperimentConfig) -> str:
    """Markdown table of mean top-m% errors, one row per scheme."""
    fake_runs = []
    for scheme in cfg.schemes:
        sub = [r for r in rows if r["scheme"] == scheme]
        fake_runs.append(type("R", (), {"scheme": scheme, "metrics": sub})())
    lines = [
        "# Mean top-m% error by augmentation scheme",
        "",
        "| scheme | " + " | ".join(f"m={m}%" for m in cfg.m_values) + " |",
        "|---|" + "---|" * len(cfg.m_values),
    ]
    ordered = [s for s in REPORT_ORDER if s in cfg.schemes]
    ordered += [s for s in cfg.schemes if s not in ordered]
    for scheme in ordered:
        means = [mean_top_m(fake_runs, m)[scheme] for m in cfg.m_values]
        lines.append("| " + scheme + " | "
                     + " | ".join(f"{v:.4f}" for v in means) + " |")
    return "\n".join(lines) + "\n"


@cli.command()
@with_common
def verify(out: Path, config_file, seed, profile) -> None:
    """Re-check dataset invariants: labels, symmetries, orbits, alignment."""
    cfg = resolve_config(out, config_file, profile, seed)
    manifest, data, detections = load_dataset(out)
    failures = []

    def check(name: str, fn) -> None:
        try:
            fn()
        except Exception as exc:  # noqa: BLE001 - report, then fail at the end
            failures.append(name)
            click.echo(f"FAIL {name}: {exc}")
        else:
            click.echo(f"PASS {name}")

    def labels_feasible():
        for g in data:
            obj, viol = evaluate(g.instance, g.solution.values)
            if viol > 1e-9:
                raise InvariantError(f"instance {g.index}: label violates constraints")
            if abs(obj - g.solution.objective) > 1e-9:
                raise InvariantError(f"instance {g.index}: stored objective mismatch")

    def generators_hold():
        for g, det in zip(data, detections):
            for pi, sigma in det.generators.generators:
                if not verify_symmetry(g.instance, pi, sigma):
                    raise InvariantError(f"instance {g.index}: stored generator fails")

    def orbits_partition():
        for g, det in zip(data, detections):
            seen = sorted(v for orb in det.orbits.orbits for v in orb)
            if seen != list(range(g.instance.num_vars)):
                raise InvariantError(f"instance {g.index}: orbits do not partition")
            for k, orb in enumerate(det.orbits.orbits):
                if any(det.orbits.orbit_of[v] != k for v in orb):
                    raise InvariantError(f"instance {g.index}: orbit index mismatch")

    def augmentation_deterministic():
        for g, det in zip(data[:5], detections[:5]):
            n = g.instance.num_vars
            for scheme in cfg.schemes:
                a = augment(scheme, n, det.orbits, det.blocks, seed=123).z
                b = augment(scheme, n, det.orbits, det.blocks, seed=123).z
                if not np.array_equal(a, b):
                    raise InvariantError(f"instance {g.index}: {scheme} draw not deterministic")

    def alignment_sound():
        rng = np.random.default_rng(0)
        for g, det in zip(data[:5], detections[:5]):
            label = g.solution.values
            probs = rng.random(g.instance.num_vars)
            res = closest_symmetric_label(probs, label, det,
                                          enum_cap=cfg.enum_cap, seed=0)
            obj, viol = evaluate(g.instance, res.label)
            ref_obj, ref_viol = evaluate(g.instance, label)
            if abs(obj - ref_obj) > 1e-9 or abs(viol - ref_viol) > 1e-9:
                raise InvariantError(f"instance {g.index}: aligned label left the orbit")
            again = closest_symmetric_label(probs, res.label, det,
                                            enum_cap=cfg.enum_cap, seed=0)
            if not np.array_equal(again.label, res.label):
                raise InvariantError(f"instance {g.index}: alignment not idempotent")

    def manifest_consistent():
        if manifest["count"] != len(data):
            raise InvariantError("manifest count mismatch")

    check("manifest matches instance files", manifest_consistent)
    check("labels feasible and objectives match", labels_feasible)
    check("stored generators are formulation symmetries", generators_hold)
    check("orbits partition the variables", orbits_partition)
    check("augmentation draws deterministic", augmentation_deterministic)
    check("alignment stays in orbit and is idempotent", alignment_sound)

    if failures:
        raise InvariantError(f"{len(failures)} check(s) failed: {', '.join(failures)}")
    click.echo("all checks passed")


def main(argv=None) -> int:
    """Run the CLI mapping exceptions onto the documented exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        return 1
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except InvariantError as exc:
        click.echo(f"invariant violation: {exc}", err=True)
        return 2
    except BudgetError as exc:
        click.echo(f"budget exhausted: {exc}", err=True)
        return 3
    except (ParseError, ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
