"""Command-line driver: synth, train, eval, probe, analyze.

Runs are driven by a JSON config file plus flag overrides (flags win).
Unknown config keys are rejected. Every command writes its fully-resolved
config next to its outputs, and any command rerun from that artifact alone
reproduces the run bit-for-bit (timing lives in run_info.json, which is the
one deliberately non-deterministic output).

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric divergence,
5 invariant violation. Set REFCOMM_LOG=DEBUG|INFO|WARNING for verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import evaluation as ev
from .agents import ChannelSpec, load_agent, save_agent, set_frozen
from .data import (
    SyntheticGenConfig,
    make_splits,
    read_store,
    synth_blobs,
    synth_generate,
    write_store,
)
from .errors import (
    ConfigError,
    DegenerateInputError,
    FormatError,
    InsufficientDataError,
    InvariantViolationError,
    NumericError,
    ParameterError,
    RefcommError,
)
from .estimators import LearnerTrainer, PairTrainer, PopulationTrainer
from .game import PopulationSpec, TrainConfig, vocab_sweep
from .seeding import rng_for

log = logging.getLogger("refcomm")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_INVARIANT = 5

_SCHEMA = {
    "seed": None,
    "test_fraction": None,
    # metadata written into resolved configs; accepted so a resolved config
    # can be passed straight back as --config
    "command": None,
    "mode": None,
    "suite": None,
    "data": None,
    "out": None,
    "checkpoints": None,
    "synth": {
        "num_classes", "images_per_class", "latent_dim", "architectures",
        "sigma_within", "sigma_obs", "ood_num_classes", "blob_count",
    },
    "channel": {
        "kind", "message_dim", "vocab_size", "gumbel_tau", "train_estimator",
        "straight_through",
    },
    "train": {
        "batch_size", "max_epochs", "patience", "lr", "eval_batches",
        "hidden_dim", "cosine_temperature",
    },
    "pair": {"sender_arch", "receiver_arch"},
    "population": {"architectures"},
    "learner": {"arch", "role", "community"},
    "eval": {"repeats", "batch_size", "single_class_size", "blob_count"},
    "analyze": {
        "noise_sigmas", "threshold_quantiles", "vocab_sizes", "distance_images",
        "sweep_architectures", "sweep_max_epochs", "sweep_straight_through",
    },
}


def _validate_config(cfg: dict) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    for key, value in cfg.items():
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        allowed = _SCHEMA[key]
        if isinstance(allowed, set):
            if not isinstance(value, dict):
                raise ConfigError(f"config section {key!r} must be an object")
            unknown = set(value) - allowed
            if unknown:
                raise ConfigError(
                    f"unknown keys in config section {key!r}: {sorted(unknown)}"
                )
    return cfg


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {p} is not valid JSON: {e}") from e
    return _validate_config(cfg)


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_resolved(out: Path, resolved: dict) -> None:
    _write_json(out / "config.resolved.json", resolved)


def _prepare_out(out: Path, force: bool, sentinel: str) -> None:
    if (out / sentinel).exists() and not force:
        raise ConfigError(
            f"output {out / sentinel} already exists; pass --force to overwrite"
        )
    out.mkdir(parents=True, exist_ok=True)


# ---------------------------------------------------------------------------
# store / checkpoint discovery


def _load_stores(data_dir: Path, prefix: str = "") -> dict:
    stores_dir = data_dir / "stores"
    if not stores_dir.is_dir():
        raise InsufficientDataError(f"no stores directory under {data_dir}")
    stores = {}
    for path in sorted(stores_dir.glob(f"{prefix}*.emb")):
        name = path.stem
        if prefix and not name.startswith(prefix):
            continue
        if not prefix and (name.startswith("ood_") or name == "blobs"):
            continue
        store = read_store(path)
        stores[store.architecture_name] = store
    if not stores:
        kind = prefix or "in-domain"
        raise InsufficientDataError(f"no {kind} embedding stores found in {stores_dir}")
    return stores


def _load_checkpoints(ckpt_dir: Path):
    if not ckpt_dir.is_dir():
        raise InsufficientDataError(f"no checkpoint directory {ckpt_dir}")
    senders, receivers = [], []
    for path in sorted(ckpt_dir.glob("*.agt")):
        agent = load_agent(path)
        (senders if agent.role == "sender" else receivers).append(agent)
    if not senders or not receivers:
        raise InsufficientDataError(f"incomplete checkpoints in {ckpt_dir}")
    return senders, receivers


def _save_population(out: Path, senders, receivers) -> None:
    ckpt = out / "checkpoints"
    ckpt.mkdir(parents=True, exist_ok=True)
    for agent in senders:
        save_agent(agent, ckpt / f"sender_{agent.architecture_name}.agt")
    for agent in receivers:
        save_agent(agent, ckpt / f"receiver_{agent.architecture_name}.agt")


def _write_metrics(out: Path, metrics) -> None:
    lines = [json.dumps(rec, sort_keys=True) for rec in metrics.epoch_dicts()]
    (out / "metrics.jsonl").write_text("\n".join(lines) + "\n" if lines else "")
    _write_json(out / "summary.json", metrics.summary_dict())
    _write_json(out / "run_info.json", {"wall_time_seconds": metrics.wall_time})


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args, cfg: dict) -> int:
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    synth_cfg = dict(cfg.get("synth", {}))
    blob_count = synth_cfg.pop("blob_count", 1000)
    if "architectures" in synth_cfg:
        synth_cfg["architectures"] = tuple(
            tuple(a) for a in synth_cfg["architectures"]
        )
    gen = SyntheticGenConfig(seed=seed, **synth_cfg)
    out = Path(args.out)
    _prepare_out(out, args.force, "stores")
    dataset = synth_generate(gen)
    stores_dir = out / "stores"
    stores_dir.mkdir(parents=True, exist_ok=True)
    for name, store in dataset.stores.items():
        write_store(store, stores_dir / f"{name}.emb")
    for name, store in dataset.ood_stores.items():
        write_store(store, stores_dir / f"ood_{name}.emb")
    blobs = synth_blobs(gen.latent_dim, blob_count, seed=seed)
    write_store(blobs, stores_dir / "blobs.emb")
    resolved = {
        "command": "synth",
        "seed": seed,
        "synth": {**gen.to_dict(), "blob_count": blob_count},
        "out": str(out),
    }
    _write_resolved(out, resolved)
    log.info("wrote %d in-domain + %d OOD stores + 1 blob store to %s",
             len(dataset.stores), len(dataset.ood_stores), stores_dir)
    return EXIT_OK


def _channel_from(cfg: dict, args) -> ChannelSpec:
    spec = dict(cfg.get("channel", {}))
    if getattr(args, "channel", None):
        spec["kind"] = args.channel
    if getattr(args, "vocab_size", None):
        spec["vocab_size"] = args.vocab_size
    if getattr(args, "estimator", None):
        spec["train_estimator"] = args.estimator
    return ChannelSpec(**spec)


def _trainer_kwargs(cfg: dict, args, seed: int) -> dict:
    train = dict(cfg.get("train", {}))
    if getattr(args, "epochs", None):
        train["max_epochs"] = args.epochs
    if getattr(args, "batch_size", None):
        train["batch_size"] = args.batch_size
    if getattr(args, "lr", None):
        train["lr"] = args.lr
    return {
        "channel": _channel_from(cfg, args),
        "test_fraction": cfg.get("test_fraction", 0.1),
        "seed": seed,
        **train,
    }


def cmd_train(args, cfg: dict) -> int:
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    data_dir = Path(args.data)
    out = Path(args.out)
    _prepare_out(out, args.force, "summary.json")
    stores = _load_stores(data_dir)
    kwargs = _trainer_kwargs(cfg, args, seed)

    if args.mode == "pair":
        pair_cfg = cfg.get("pair", {})
        trainer = PairTrainer(
            sender_arch=args.sender_arch or pair_cfg.get("sender_arch"),
            receiver_arch=args.receiver_arch or pair_cfg.get("receiver_arch"),
            **kwargs,
        )
        trainer.fit(stores)
        _save_population(out, [trainer.sender_], [trainer.receiver_])
        metrics = trainer.metrics_
        resolved_extra = {
            "pair": {
                "sender_arch": trainer.sender_.architecture_name,
                "receiver_arch": trainer.receiver_.architecture_name,
            }
        }
    elif args.mode == "population":
        pop_cfg = cfg.get("population", {})
        archs = args.architectures.split(",") if args.architectures else \
            pop_cfg.get("architectures")
        trainer = PopulationTrainer(architectures=archs, **kwargs)
        trainer.fit(stores)
        _save_population(out, trainer.population_.senders,
                         trainer.population_.receivers)
        metrics = trainer.metrics_
        resolved_extra = {
            "population": {
                "architectures": [
                    s.architecture_name for s in trainer.population_.senders
                ]
            }
        }
    elif args.mode == "learner":
        if not args.community:
            raise ConfigError("learner mode requires --community DIR")
        community_dir = Path(args.community) / "checkpoints"
        senders, receivers = _load_checkpoints(community_dir)
        for agent in senders + receivers:
            set_frozen(agent, True)
        learner_cfg = cfg.get("learner", {})
        arch = args.learner_arch or learner_cfg.get("arch")
        role = args.learner_role or learner_cfg.get("role", "receiver")
        community = PopulationSpec(senders=senders, receivers=receivers)
        trainer = LearnerTrainer(learner_arch=arch, learner_role=role, **kwargs)
        trainer.fit(stores, community)
        ckpt = out / "checkpoints"
        ckpt.mkdir(parents=True, exist_ok=True)
        save_agent(
            trainer.learner_,
            ckpt / f"{role}_{trainer.learner_.architecture_name}.agt",
        )
        metrics = trainer.metrics_
        resolved_extra = {
            "learner": {
                "arch": trainer.learner_.architecture_name,
                "role": role,
                "community": str(args.community),
            }
        }
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigError(f"unknown train mode {args.mode!r}")

    _write_metrics(out, metrics)
    channel = kwargs["channel"]
    resolved = {
        "command": "train",
        "mode": args.mode,
        "seed": seed,
        "data": str(data_dir),
        "out": str(out),
        "test_fraction": kwargs["test_fraction"],
        "channel": {
            "kind": channel.kind,
            "message_dim": channel.message_dim,
            "vocab_size": channel.vocab_size,
            "gumbel_tau": channel.gumbel_tau,
            "train_estimator": channel.train_estimator,
            "straight_through": channel.straight_through,
        },
        "train": {
            k: v for k, v in kwargs.items()
            if k not in ("channel", "seed", "test_fraction")
        },
        **resolved_extra,
    }
    _write_resolved(out, resolved)
    log.info("trained %s: peak test acc %.4f (epoch %d)", args.mode,
             metrics.peak_test_acc, metrics.epochs_to_peak)
    return EXIT_OK


def _eval_context(args, cfg):
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    data_dir = Path(args.data)
    stores = _load_stores(data_dir)
    senders, receivers = _load_checkpoints(Path(args.checkpoints) / "checkpoints")
    test_fraction = cfg.get("test_fraction", 0.1)
    _, test_ids = make_splits(next(iter(stores.values())), test_fraction, seed)
    return seed, data_dir, stores, senders, receivers, test_ids


def cmd_eval(args, cfg: dict) -> int:
    seed, data_dir, stores, senders, receivers, test_ids = _eval_context(args, cfg)
    ecfg = cfg.get("eval", {})
    repeats = ecfg.get("repeats", 10)
    batch_size = ecfg.get("batch_size", 64)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    suites = (
        ["matrix", "single-class", "ood", "blobs"]
        if args.suite == "all"
        else [args.suite]
    )
    population = PopulationSpec(senders=senders, receivers=receivers)
    reports = {}
    for suite in suites:
        rng = rng_for(seed, "eval", suite)
        if suite == "matrix":
            matrix = ev.eval_matrix(population, stores, test_ids, batch_size,
                                    rng, repeats)
            (out / "matrix.csv").write_text(matrix.to_csv())
            (out / "matrix.txt").write_text(matrix.to_text())
            reports["matrix"] = matrix.to_dict()
        elif suite == "single-class":
            size = ecfg.get("single_class_size", 32)
            stat = ev.eval_single_class(senders[0], receivers[0], stores,
                                        size=size, rng=rng)
            reports["single_class"] = stat.to_dict()
        elif suite == "ood":
            ood_stores = _load_stores(data_dir, prefix="ood_")
            stat = ev.eval_ood(senders[0], receivers[0], ood_stores,
                               batch_size=batch_size, rng=rng, repeats=repeats)
            reports["ood"] = stat.to_dict()
        elif suite == "blobs":
            stat = ev.blob_test(senders[0], receivers[0], batch_size=batch_size,
                                count=ecfg.get("blob_count", 1024), seed=seed,
                                repeats=repeats)
            reports["blobs"] = stat.to_dict()
        else:
            raise ConfigError(f"unknown eval suite {args.suite!r}")
    _write_json(out / "eval.json", reports)
    rows = []
    for name, rep in reports.items():
        if "mean" in rep:
            rows.append([name, f"{rep['mean']:.4f}", f"{rep['chance']:.4f}"])
    if rows:
        (out / "eval.txt").write_text(
            ev.render_table(["suite", "accuracy", "chance"], rows)
        )
    _write_resolved(out, {
        "command": "eval", "suite": args.suite, "seed": seed,
        "data": str(data_dir), "checkpoints": str(args.checkpoints),
        "out": str(out), "eval": ecfg,
    })
    return EXIT_OK


def cmd_probe(args, cfg: dict) -> int:
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    data_dir = Path(args.data)
    senders, _ = _load_checkpoints(Path(args.checkpoints) / "checkpoints")
    ood_stores = _load_stores(data_dir, prefix="ood_")
    probe_train_ids, probe_test_ids = make_splits(
        next(iter(ood_stores.values())), 0.1, seed
    )
    rows = []
    results = {}
    for sender in senders:
        store = ood_stores[sender.architecture_name]
        probe = ev.probe_train(sender, store, probe_train_ids, seed=seed)
        native = probe.score(
            sender.transform(store.vectors_for(probe_test_ids)),
            store.classes_for(probe_test_ids),
        )
        transfers = {}
        for other in senders:
            if other is sender:
                continue
            transfers[other.architecture_name] = ev.probe_transfer(
                probe, other, ood_stores[other.architecture_name], probe_test_ids
            )
        results[sender.architecture_name] = {
            "native": native, "transfers": transfers,
        }
        if transfers:
            tvals = list(transfers.values())
            rows.append([
                sender.architecture_name, f"{native:.4f}",
                f"{float(np.mean(tvals)):.4f}", f"{float(np.std(tvals)):.4f}",
            ])
        else:
            rows.append([sender.architecture_name, f"{native:.4f}", "n/a (single sender)", ""])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "probes.json", results)
    (out / "probes.txt").write_text(
        ev.render_table(["sender", "native", "mean transfer", "sd"], rows)
    )
    _write_resolved(out, {
        "command": "probe", "seed": seed, "data": str(data_dir),
        "checkpoints": str(args.checkpoints), "out": str(out),
    })
    return EXIT_OK


def _sweep_job(payload):
    data_dir, seed, vocab, acfg, tcfg = payload
    stores = _load_stores(Path(data_dir))
    ood_stores = _load_stores(Path(data_dir), prefix="ood_")
    splits = make_splits(next(iter(stores.values())), tcfg["test_fraction"], seed)
    config = TrainConfig(seed=seed, batch_size=tcfg["batch_size"],
                         max_epochs=tcfg["max_epochs"], patience=tcfg["patience"],
                         lr=tcfg["lr"])
    rows = vocab_sweep(
        stores, splits, config, [vocab],
        arch_names=acfg.get("sweep_architectures"),
        ood_stores=ood_stores,
        ood_ids=next(iter(ood_stores.values())).image_ids,
        straight_through=acfg.get("sweep_straight_through", False),
    )
    return rows[0]


def cmd_analyze(args, cfg: dict) -> int:
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    acfg = cfg.get("analyze", {})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports = {}

    if args.suite == "vocab-sweep":
        tcfg = {
            "batch_size": cfg.get("train", {}).get("batch_size", 64),
            "max_epochs": acfg.get("sweep_max_epochs",
                                   cfg.get("train", {}).get("max_epochs", 30)),
            "patience": cfg.get("train", {}).get("patience", 5),
            "lr": cfg.get("train", {}).get("lr", 1e-3),
            "test_fraction": cfg.get("test_fraction", 0.1),
        }
        vocab_sizes = acfg.get("vocab_sizes", [256, 1024, 4096])
        payloads = [(args.data, seed, v, acfg, tcfg) for v in vocab_sizes]
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                rows = list(pool.map(_sweep_job, payloads))
        else:
            rows = [_sweep_job(p) for p in payloads]
        reports["vocab_sweep"] = rows
        (out / "vocab_sweep.txt").write_text(ev.render_table(
            ["vocab", "accuracy", "ood accuracy"],
            [[r["vocab_size"], f"{r['accuracy']:.4f}",
              f"{r.get('ood_accuracy', float('nan')):.4f}"] for r in rows],
        ))
    else:
        if not args.checkpoints:
            raise ConfigError(f"analyze suite {args.suite!r} requires --checkpoints")
        seed_ctx, data_dir, stores, senders, receivers, test_ids = \
            _eval_context(args, cfg)
        suites = (
            ["distances", "pca", "discretize", "noise"]
            if args.suite == "all"
            else [args.suite]
        )
        batch_size = cfg.get("eval", {}).get("batch_size", 64)
        n_dist = acfg.get("distance_images", 512)
        dist_ids = test_ids[: min(n_dist, len(test_ids))]
        for suite in suites:
            rng = rng_for(seed_ctx, "analyze", suite)
            if suite == "distances":
                if len(senders) < 2:
                    raise InsufficientDataError(
                        "distance analysis needs at least two senders"
                    )
                same = ev.message_distances(senders[0], senders[1], stores, dist_ids)
                base = ev.message_distances(senders[0], senders[1], stores,
                                            dist_ids, mismatched=True, rng=rng)
                reports["distances"] = {
                    "same_image": same.to_dict(),
                    "mismatched_baseline": base.to_dict(),
                }
            elif suite == "pca":
                rep = ev.pca_report(senders, stores, dist_ids)
                reports["pca"] = rep.to_dict()
            elif suite == "discretize":
                quantiles = acfg.get("threshold_quantiles",
                                     [0.2, 0.35, 0.5, 0.65, 0.8])
                store0 = stores[senders[0].architecture_name]
                grid = ev.threshold_grid(senders[0], store0, dist_ids,
                                         quantiles=quantiles)
                entries = []
                for theta in grid:
                    stat = ev.discretize_eval(senders[0], receivers[0], stores,
                                              test_ids, mode="threshold",
                                              threshold=theta,
                                              batch_size=batch_size, rng=rng)
                    entries.append({"mode": "threshold", "threshold": theta,
                                    **stat.to_dict()})
                stat = ev.discretize_eval(senders[0], receivers[0], stores,
                                          test_ids, mode="argmax",
                                          batch_size=batch_size, rng=rng)
                entries.append({"mode": "argmax", **stat.to_dict()})
                reports["discretize"] = entries
            elif suite == "noise":
                sigmas = acfg.get("noise_sigmas", [0.0, 0.05, 0.2, 1.0, 10.0])
                entries = []
                for sigma in sigmas:
                    rng_s = rng_for(seed_ctx, "analyze", f"noise/{sigma}")
                    stat = ev.noise_eval(senders[0], receivers[0], stores,
                                         test_ids, sigma,
                                         batch_size=batch_size, rng=rng_s)
                    entries.append({"sigma": sigma, **stat.to_dict()})
                reports["noise"] = entries
            else:
                raise ConfigError(f"unknown analyze suite {args.suite!r}")
    _write_json(out / "analysis.json", reports)
    _write_resolved(out, {
        "command": "analyze", "suite": args.suite, "seed": seed,
        "data": str(args.data),
        "checkpoints": str(args.checkpoints) if args.checkpoints else None,
        "out": str(out), "analyze": acfg,
    })
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser / entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refcomm",
        description="Referential-communication experiments over embedding stores.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_data=True):
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--seed", type=int, help="root seed (overrides config)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="worker pool size")
        p.add_argument("--force", action="store_true",
                       help="overwrite existing outputs")
        if needs_data:
            p.add_argument("--data", required=True,
                           help="dataset directory (from `refcomm synth`)")

    p = sub.add_parser("synth", help="generate synthetic embedding stores")
    common(p, needs_data=False)

    p = sub.add_parser("train", help="train agents (pair, population, learner)")
    common(p)
    p.add_argument("--mode", choices=["pair", "population", "learner"],
                   default="pair")
    p.add_argument("--sender-arch")
    p.add_argument("--receiver-arch")
    p.add_argument("--architectures", help="comma-separated roster (population)")
    p.add_argument("--learner-arch")
    p.add_argument("--learner-role", choices=["sender", "receiver"])
    p.add_argument("--community", help="train dir of the frozen community (learner)")
    p.add_argument("--channel", choices=["continuous", "discrete"])
    p.add_argument("--vocab-size", type=int)
    p.add_argument("--estimator", choices=["gumbel", "reinforce"])
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)

    p = sub.add_parser("eval", help="accuracy suites over trained checkpoints")
    common(p)
    p.add_argument("--checkpoints", required=True, help="train output directory")
    p.add_argument("--suite",
                   choices=["matrix", "single-class", "ood", "blobs", "all"],
                   default="all")

    p = sub.add_parser("probe", help="linear-probe classifier transfer")
    common(p)
    p.add_argument("--checkpoints", required=True)

    p = sub.add_parser("analyze", help="protocol analyses and sweeps")
    common(p)
    p.add_argument("--checkpoints", help="train output directory")
    p.add_argument("--suite",
                   choices=["distances", "pca", "discretize", "noise",
                            "vocab-sweep", "all"],
                   default="all")
    return parser


_COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "probe": cmd_probe,
    "analyze": cmd_analyze,
}


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("REFCOMM_LOG", "INFO").upper(),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        return _COMMANDS[args.command](args, cfg)
    except (ConfigError, ParameterError) as e:
        log.error("%s", e)
        return EXIT_CONFIG
    except (FormatError, InsufficientDataError, DegenerateInputError,
            FileNotFoundError) as e:
        log.error("%s", e)
        return EXIT_DATA
    except NumericError as e:
        log.error("%s", e)
        return EXIT_NUMERIC
    except InvariantViolationError as e:
        log.error("%s", e)
        return EXIT_INVARIANT
    except RefcommError as e:  # anything else library-raised
        log.error("%s", e)
        return EXIT_DATA


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
