"""Command-line entry point.

Every command reads a flat parameter map: built-in defaults, then an optional
``key=value`` config file, then ``--seed``/``--data`` and ``--set key=value``
flags. Unknown keys are rejected. Outputs land in ``--out`` and are written
atomically; each command also writes ``<command>.log`` holding the resolved
configuration and its headline metric.
"""
from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from .controller import ControllerConfig, recover, select_transforms
from .evaluation import (
    ACCURACY_HEADER,
    ASSIGN_HEADER,
    BENCH_HEADER,
    BENCH_SHIFTS,
    ELBOW_HEADER,
    accuracy_table,
    cluster_states,
    default_eval_shifts,
    project_bench,
    to_csv,
)
from .imagecore import SampleSet, atomic_write_bytes, encode_idx, load_idx, synth_dataset
from .learn import (
    TrainHp,
    TrainingDivergedError,
    a2c_train,
    accuracy,
    load_model,
    save_model,
    train_classifier,
)
from .mdpenv import (
    EPISODE_HEADER,
    EnvConfig,
    Policy,
    RecoveryEnv,
    TrainingEnv,
    calibrate_severities,
    episode_csv_rows,
)
from .operability import (
    OperabilityLabelSpec,
    all_families,
    flat_pixels,
    generate_labels,
    save_labeled,
    train_operability,
)
from .transforms import apply, parse_spec, surrogate_suite

COMMON = {
    "seed": 0,
    "data": "synth",
    "synth_n": 2000,
    "out": "out",
    "classifier": "",
    "policy": "",
    "operability": "",
}

# desk defaults; full-scale values stay reachable through --set
COMMANDS = {
    "train-classifier": {"hidden": "128", "epochs": 30, "lr": 0.1, "minibatch": 32},
    "train-policy": {
        "lam": 0.01, "omega": 0.994, "gamma": 0.9, "horizon": 5, "proj_dim": 64, "slices": 128,
        "batch_size": 256, "episodes": 500, "lr": 0.01, "hidden": "128,256",
        "profile": "paper-imagenet",
    },
    "train-operability": {
        "r_max": -0.3, "max_depth": 8, "min_leaf": 5, "sample_size": 256,
        "profile": "paper-imagenet", "holdout": 0.25,
    },
    "calibrate": {"profile": "paper-imagenet", "sample_size": 256},
    "recover": {
        "shift": "identity", "batch_size": 256, "alpha": 0.9, "beta": 0.995, "horizon": 5,
        "literal_alg1": False, "proj_dim": 64, "slices": 128, "frac_threshold": 0.5,
    },
    "eval": {
        "trials": 3, "batch_size": 256, "alpha": 0.9, "beta": 0.995, "horizon": 5,
        "literal_alg1": False, "proj_dim": 64, "slices": 128, "frac_threshold": 0.5,
        "families": "uniform_noise,gamma_a", "profile": "paper-imagenet",
        "bench": True, "cluster": True,
        "bench_sizes": "32,64,128,256", "bench_trials": 5, "bench_dim": 50,
        "cluster_per_shift": 100, "cluster_k_max": 9,
    },
    "project-bench": {"bench_sizes": "32,64,128,256", "bench_trials": 5, "bench_dim": 50},
    "cluster": {"cluster_per_shift": 100, "cluster_k_max": 9, "profile": "paper-imagenet"},
}


class ConfigError(ValueError):
    pass


def _coerce(key, raw, default):
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None
    return raw


def parse_pairs(lines, source="config") -> dict:
    out = {}
    for n, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def resolve_config(command: str, file_pairs: dict, flag_pairs: dict) -> dict:
    """defaults < config file < flags; every key must be declared for the command."""
    defaults = {**COMMON, **COMMANDS[command]}
    cfg = dict(defaults)
    for source in (file_pairs, flag_pairs):
        for key, raw in source.items():
            if key not in defaults:
                raise ConfigError(f"unknown key {key!r} for {command}")
            cfg[key] = _coerce(key, str(raw), defaults[key])
    return cfg


def int_list(text) -> tuple:
    return tuple(int(v) for v in str(text).split(",") if v.strip())


def config_text(cfg: dict) -> str:
    return "".join(f"{k}={cfg[k]}\n" for k in sorted(cfg))


def load_data(cfg) -> SampleSet:
    data = cfg["data"]
    if data == "synth":
        return synth_dataset(cfg["synth_n"], seed=cfg["seed"])
    images = os.path.join(data, "images.idx")
    labels = os.path.join(data, "labels.idx")
    if not os.path.exists(images):
        raise FileNotFoundError(f"dataset not found: {images}")
    return load_idx(images, labels)


def split(samples: SampleSet, seed: int):
    """Fixed train/validation/test split, half/quarter/quarter."""
    order = np.random.default_rng([seed, 7]).permutation(len(samples))
    a, b = len(samples) // 2, (3 * len(samples)) // 4
    return samples.subset(order[:a]), samples.subset(order[a:b]), samples.subset(order[b:])


def _path(cfg, key, name):
    return cfg[key] or os.path.join(cfg["out"], name)


def _write(cfg, name, text):
    atomic_write_bytes(os.path.join(cfg["out"], name), text.encode())


def _log(cfg, command, lines):
    _write(cfg, f"{command}.log", config_text(cfg) + "".join(f"# {ln}\n" for ln in lines))


def controller_config(cfg) -> ControllerConfig:
    return ControllerConfig(alpha=cfg["alpha"], beta=cfg["beta"], horizon=cfg["horizon"],
                            literal_alg1=cfg["literal_alg1"], proj_dim=cfg["proj_dim"],
                            slices=cfg["slices"], seed=cfg["seed"],
                            frac_threshold=cfg["frac_threshold"])


def _require(path, what):
    if not os.path.exists(path):
        raise FileNotFoundError(f"{what} model not found at {path}; train it first")
    return path


def cmd_train_classifier(cfg):
    train, _, test = split(load_data(cfg), cfg["seed"])
    net = train_classifier(flat_pixels(train), train.labels, hidden=int_list(cfg["hidden"]),
                           classes=int(max(train.labels.max(), test.labels.max())) + 1,
                           epochs=cfg["epochs"], lr=cfg["lr"], batch=cfg["minibatch"],
                           seed=cfg["seed"])
    acc = accuracy(net, flat_pixels(test), test.labels)
    save_model(_path(cfg, "classifier", "classifier.json"), net, test_accuracy=acc)
    _log(cfg, "train-classifier", [f"clean test accuracy {acc:.4f}"])
    print(f"clean test accuracy: {acc:.4f}")
    return acc


def cmd_train_policy(cfg):
    train, _, _ = split(load_data(cfg), cfg["seed"])
    env_cfg = EnvConfig(lam=cfg["lam"], omega=cfg["omega"], gamma=cfg["gamma"],
                        horizon=cfg["horizon"], proj_dim=cfg["proj_dim"], slices=cfg["slices"],
                        profile=cfg["profile"], batch_size=cfg["batch_size"])
    env = RecoveryEnv(env_cfg, train, seed=cfg["seed"])
    hp = TrainHp(lr=cfg["lr"], gamma=cfg["gamma"], episodes=cfg["episodes"],
                 hidden=int_list(cfg["hidden"]), seed=cfg["seed"])
    t0 = time.time()
    res = a2c_train(TrainingEnv(env), hp)
    policy = Policy(res.actor, tuple(float(v) for v in env.reference_state), env.actions)
    policy.save(_path(cfg, "policy", "policy.json"))
    log_rows = [[r["episode"], r["terminal_reward"], r["return"], r["epsilon"]] for r in res.log]
    _write(cfg, "policy_log.csv",
           to_csv(("episode", "terminal_reward", "return", "epsilon"), log_rows))
    steps = [{**s, "action": str(env.actions[s["action"]])} for s in res.steps]
    _write(cfg, "episodes.csv", to_csv(EPISODE_HEADER, episode_csv_rows(steps)))
    tail = [r["terminal_reward"] for r in res.log[-50:]]
    avg = float(np.mean(tail)) if tail else float("nan")
    _log(cfg, "train-policy", [f"terminal reward moving average (last 50) {avg:.6f}",
                               f"seconds {time.time() - t0:.1f}"])
    print(f"terminal reward moving average (last 50): {avg:.6f}")
    return policy, res


def operability_labels(cfg, val, classifier, families):
    rng = np.random.default_rng([cfg["seed"], 11])
    order = rng.permutation(len(val))
    n = min(cfg["sample_size"], len(val) // 2)
    V, Vc = val.subset(order[:n]), val.subset(order[n : 2 * n])
    spec = OperabilityLabelSpec(classifier=classifier, profile=cfg["profile"], r_max=cfg["r_max"])
    return generate_labels(V, Vc, families, spec, seed=cfg["seed"])


def cmd_train_operability(cfg):
    _, val, _ = split(load_data(cfg), cfg["seed"])
    classifier = load_model(_require(_path(cfg, "classifier", "classifier.json"), "classifier"),
                            expect="mlp")
    labeled = operability_labels(cfg, val, classifier, all_families(cfg["profile"]))
    save_labeled(os.path.join(cfg["out"], "operability_labels.csv"), labeled)
    model = train_operability(labeled, seed=cfg["seed"], holdout=cfg["holdout"],
                              max_depth=cfg["max_depth"], min_leaf=cfg["min_leaf"])
    verdicts = {r.family: r.label for r in labeled.summary}
    save_model(_path(cfg, "operability", "operability.json"), model.tree,
               heldout_auroc=model.heldout_auroc, family_labels=verdicts)
    lines = [f"held-out AUROC {model.heldout_auroc:.4f}"] + [
        f"{r.family}: r={r.r} label={r.label}" for r in labeled.summary]
    _log(cfg, "train-operability", lines)
    print(f"held-out AUROC: {model.heldout_auroc:.4f}")
    return model, labeled


def cmd_calibrate(cfg):
    _, val, _ = split(load_data(cfg), cfg["seed"])
    report = calibrate_severities(cfg["profile"], val, seed=cfg["seed"],
                                  sample_size=cfg["sample_size"])
    rows = [[r.family, r.severity, r.index, r.value, r.clean_value, r.relative_change]
            for r in report.rows]
    _write(cfg, "calibration.csv", to_csv(("family", "severity", "index", "value", "clean_value",
                                           "relative_change"), rows))
    bad = report.violations()
    msg = "all families within [0.3, 1.0]" if not bad else "re-tune: " + ",".join(bad)
    _log(cfg, "calibrate", [msg])
    print(msg)
    return report


def _models(cfg):
    policy = Policy.load(_require(_path(cfg, "policy", "policy.json"), "policy"))
    tree = load_model(_require(_path(cfg, "operability", "operability.json"), "operability"),
                      expect="tree")
    return policy, tree


def cmd_recover(cfg):
    _, val, test = split(load_data(cfg), cfg["seed"])
    policy, tree = _models(cfg)
    shift = parse_spec(cfg["shift"])
    rng = np.random.default_rng([cfg["seed"], 13])
    batch = test.subset(rng.choice(len(test), size=min(cfg["batch_size"], len(test)),
                                   replace=False))
    V = val.subset(np.arange(min(cfg["batch_size"], len(val))))
    shifted = apply(shift, batch, cfg["seed"])
    report = select_transforms(V, shifted, policy, tree, controller_config(cfg), seed=cfg["seed"])
    recovered = recover(shifted, report, seed=cfg["seed"])
    report.save(os.path.join(cfg["out"], "report.json"))
    img, lab = encode_idx(recovered)
    atomic_write_bytes(os.path.join(cfg["out"], "recovered-images.idx"), img)
    atomic_write_bytes(os.path.join(cfg["out"], "recovered-labels.idx"), lab)
    _log(cfg, "recover", [report.to_json()])
    print(report.to_json())
    return report


def cmd_eval(cfg):
    train, val, test = split(load_data(cfg), cfg["seed"])
    classifier = load_model(_require(_path(cfg, "classifier", "classifier.json"), "classifier"),
                            expect="mlp")
    policy, tree = _models(cfg)
    V = val.subset(np.arange(min(cfg["batch_size"], len(val))))
    shifts = default_eval_shifts(tuple(cfg["families"].split(",")), cfg["profile"])
    cells = accuracy_table(classifier, V, test, policy, tree, shifts, controller_config(cfg),
                           trials=cfg["trials"], batch_size=cfg["batch_size"], seed=cfg["seed"])
    _write(cfg, "accuracy.csv", to_csv(ACCURACY_HEADER, [c.row() for c in cells]))
    if cfg["bench"]:
        cmd_project_bench(cfg, log=False)
    if cfg["cluster"]:
        cmd_cluster(cfg, log=False)
    mean_delta = float(np.mean([c.delta for c in cells if c.severity]))
    _log(cfg, "eval", [f"mean delta over shifted cells {mean_delta:.4f}"])
    print(f"mean delta over shifted cells: {mean_delta:.4f}")
    return cells


def cmd_project_bench(cfg, log=True):
    clean = load_data(cfg)
    written = {}
    for shift in BENCH_SHIFTS:
        rows = project_bench(clean, shift, int_list(cfg["bench_sizes"]), cfg["bench_dim"],
                             cfg["bench_trials"], seed=cfg["seed"])
        name = f"project_bench_{shift}.csv"
        _write(cfg, name, to_csv(BENCH_HEADER, rows))
        written[shift] = rows
    if log:
        _log(cfg, "project-bench", [f"wrote {len(written)} shift types"])
    return written


def cmd_cluster(cfg, log=True):
    clean = load_data(cfg)
    elbow_rows, assign_rows, k = cluster_states(clean, surrogate_suite(cfg["profile"]),
                                                cfg["cluster_per_shift"], cfg["cluster_k_max"],
                                                seed=cfg["seed"])
    _write(cfg, "cluster_elbow.csv", to_csv(ELBOW_HEADER, elbow_rows))
    _write(cfg, "cluster_assign.csv", to_csv(ASSIGN_HEADER, assign_rows))
    if log:
        _log(cfg, "cluster", [f"elbow k={k}"])
    return k


HANDLERS = {
    "train-classifier": cmd_train_classifier,
    "train-policy": cmd_train_policy,
    "train-operability": cmd_train_operability,
    "calibrate": cmd_calibrate,
    "recover": cmd_recover,
    "eval": cmd_eval,
    "project-bench": cmd_project_bench,
    "cluster": cmd_cluster,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shiftrecover")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in HANDLERS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key=value file")
        p.add_argument("--seed", type=int)
        p.add_argument("--data", help="'synth' or a directory with images.idx/labels.idx")
        p.add_argument("--out", help="output directory")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        file_pairs = {}
        if args.config:
            with open(args.config) as fh:
                file_pairs = parse_pairs(fh, args.config)
        flags = parse_pairs(args.set, "--set")
        for key in ("seed", "data", "out"):
            if getattr(args, key) is not None:
                flags[key] = getattr(args, key)
        cfg = resolve_config(args.command, file_pairs, flags)
        os.makedirs(cfg["out"], exist_ok=True)
        HANDLERS[args.command](cfg)
    except (ConfigError, FileNotFoundError, TrainingDivergedError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
