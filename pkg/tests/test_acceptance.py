"""Acceptance criteria 1-11, each at its stated tolerance.

Every test records one PASS/FAIL line (shown in the terminal summary) and then
asserts the verdict. Criteria 8-11 run the desk pipeline and are marked slow.
"""
import csv
import time

import numpy as np
import pytest
from oracles import (
    ScriptedPolicy,
    brute_force_assignment,
    max_grad_rel_error,
    random_architecture,
    record,
    scripted_distance,
)

from shiftrecover import cli
from shiftrecover.controller import ControllerConfig, select_transforms
from shiftrecover.evaluation import bench_winner, error_vs_tv
from shiftrecover.features import haar_dwt, haar_idwt
from shiftrecover.learn import BanditEnv, TrainHp, a2c_train, load_model, mlp_forward
from shiftrecover.metrics import (
    linear_assignment,
    make_projection,
    wasserstein_exact,
    wasserstein_sliced,
)
from shiftrecover.operability import all_families, train_operability
from shiftrecover.transforms import action_library, surrogate_suite


def test_1_projection_contraction():
    t0 = time.time()
    checks = failures = 0
    for i in range(200):
        r = np.random.default_rng([1, i])
        a = r.standard_normal((32, 16))
        b = r.normal(0.5, 1.5, (32, 16))
        for p in (1, 2):
            full = wasserstein_exact(a, b, p)
            for m in (2, 4, 8):
                proj = make_projection(16, m, "orthonormal", seed=i * 10 + m)
                checks += 1
                failures += wasserstein_exact(proj(a), proj(b), p) > full + 1e-9
    elapsed = time.time() - t0
    ok = failures == 0 and elapsed < 30
    assert record(1, ok, f"{checks - failures}/{checks} contractions hold, {elapsed:.1f}s")


def test_2_hungarian_oracle():
    t0 = time.time()
    worst = 0.0
    for i in range(50):
        cost = np.random.default_rng([2, i]).random((6, 6))
        col = linear_assignment(cost)
        worst = max(worst, abs(cost[np.arange(6), col].sum() - brute_force_assignment(cost)))
    elapsed = time.time() - t0
    ok = worst <= 1e-12 and elapsed < 5
    assert record(2, ok, f"max gap {worst:.2e} over 50 instances, {elapsed:.2f}s")


def test_3_sliced_ranks_like_exact():
    sigmas = (0.5, 1.0, 2.0)
    agree = 0
    for i in range(100):
        r = np.random.default_rng([3, i])
        a = r.standard_normal((32, 4))
        shifted = [r.standard_normal((32, 4)) + s * r.standard_normal((32, 4)) for s in sigmas]
        exact = [wasserstein_exact(a, b, 1) for b in shifted]
        sliced = [wasserstein_sliced(a, b, 1, slices=512, seed=i) for b in shifted]
        agree += list(np.argsort(exact)) == list(np.argsort(sliced))
    assert record(3, agree >= 95, f"rankings agree in {agree}/100 trials")


def test_4_haar_round_trip_and_energy():
    worst_rt = worst_energy = 0.0
    for i in range(100):
        img = np.random.default_rng([4, i]).random((28, 28))
        planes = haar_dwt(img)
        worst_rt = max(worst_rt, float(np.abs(haar_idwt(*planes) - img).max()))
        energy = sum(float((c ** 2).sum()) for c in planes)
        worst_energy = max(worst_energy, abs(energy - float((img ** 2).sum())) / float((img ** 2).sum()))
    ok = worst_rt < 1e-12 and worst_energy < 1e-9
    assert record(4, ok, f"round trip {worst_rt:.2e}, energy {worst_energy:.2e}")


def test_5_gradient_check():
    worst = max(max_grad_rel_error(*random_architecture(np.random.default_rng([5, i])))
                for i in range(20))
    assert record(5, worst < 1e-4, f"max relative error {worst:.2e} over 20 architectures")


def test_6_bandit():
    probs = []
    for seed in range(10):
        res = a2c_train(BanditEnv(), TrainHp(lr=1e-3, episodes=300, seed=seed))
        probs.append(float(mlp_forward(res.actor, BanditEnv().state)[1]))
    good = sum(p > 0.9 for p in probs)
    assert record(6, good >= 9, f"{good}/10 seeds reach p(good) > 0.9, min {min(probs):.3f}")


def test_7_algorithm_traces(small):
    actions = action_library()
    ok_gate = lambda batch: (True, 0.0)  # noqa: E731

    def trace(ws, cfg, picks, gate=ok_gate):
        rep = select_transforms(small, small, ScriptedPolicy(actions, picks), None, cfg,
                                distance=scripted_distance(ws), gate=gate)
        return rep.stop, [str(t) for t in rep.sequence]

    a = [str(x) for x in actions]
    got = {
        "harm": trace([10, 9.5, 9.6], ControllerConfig(), [2, 0]),
        "success-default": trace([10, 8.9], ControllerConfig(), [4]),
        "success-literal": trace([10, 8.9], ControllerConfig(literal_alg1=True), [4]),
        "horizon": trace([10, 9.9, 9.8, 9.7, 9.6, 9.5], ControllerConfig(beta=0.9999),
                         [0, 1, 2, 3, 7]),
        "inoperable": trace([10], ControllerConfig(), [], gate=lambda b: (False, 1.0)),
    }
    want = {
        "harm": ("harm", [a[2]]),
        "success-default": ("success", [a[4]]),
        "success-literal": ("success", []),
        "horizon": ("horizon", [a[0], a[1], a[2], a[3], a[7]]),
        "inoperable": ("inoperable", []),
    }
    bad = [k for k in want if got[k] != want[k]]
    assert record(7, not bad, "all five traces match" if not bad else f"mismatch: {bad}")


# desk pipeline

def _cfg(command, out, **overrides):
    return cli.resolve_config(command, {}, {"out": str(out), **overrides})


@pytest.fixture(scope="module")
def desk_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("desk")
    acc = cli.cmd_train_classifier(_cfg("train-classifier", out))
    t0 = time.time()
    cli.cmd_train_policy(_cfg("train-policy", out))
    policy_seconds = time.time() - t0
    cli.cmd_train_operability(_cfg("train-operability", out))
    return out, acc, policy_seconds


@pytest.mark.slow
def test_8_operability(tmp_path):
    aurocs, noise_ok, blur_ok = [], 0, 0
    for seed in range(10):
        out = tmp_path / str(seed)
        out.mkdir()
        cli.cmd_train_classifier(_cfg("train-classifier", out, seed=seed))
        cfg = _cfg("train-operability", out, seed=seed)
        _, val, _ = cli.split(cli.load_data(cfg), seed)
        classifier = load_model(out / "classifier.json", expect="mlp")
        labeled = cli.operability_labels(cfg, val, classifier, all_families())
        try:
            aurocs.append(train_operability(labeled, seed=seed).heldout_auroc)
        except ValueError:
            aurocs.append(float("nan"))  # one label only; no tree can be trained
        noise_ok += labeled.family_label("uniform_noise") == 0
        blur_ok += labeled.family_label("median_blur") == 1
    trained = [a for a in aurocs if a == a]
    ok = len(trained) == 10 and min(trained) >= 0.70 and noise_ok >= 8 and blur_ok >= 8
    detail = (f"AUROC >= 0.70 in {sum(a >= 0.70 for a in trained)}/10 seeds "
              f"({10 - len(trained)} single-class), min {min(trained):.3f}; uniform noise operable "
              f"{noise_ok}/10; median blur inoperable {blur_ok}/10")
    assert record(8, ok, detail)


@pytest.mark.slow
def test_9_desk_recovery(desk_run):
    out, clean_acc, policy_seconds = desk_run
    cells = cli.cmd_eval(_cfg("eval", out, bench="false", cluster="false"))
    graded = [c for c in cells if c.shift in ("uniform_noise", "gamma_a") and c.severity >= 3]
    ident = [c for c in cells if c.shift == "identity"][0]
    each = all(c.acc_recovered >= c.acc_shifted for c in graded)
    mean_delta = float(np.mean([c.delta for c in graded]))
    ok = (clean_acc >= 0.90 and policy_seconds <= 900 and len(graded) == 6 and each
          and mean_delta > 0 and ident.delta == 0)
    cell_text = " ".join(f"{c.shift}@{c.severity}:{c.delta:+.4f}" for c in graded)
    detail = (f"clean acc {clean_acc:.3f}, policy {policy_seconds:.0f}s, {cell_text}, "
              f"mean delta {mean_delta:+.4f}, identity delta {ident.delta:+.4f}")
    assert record(9, ok, detail)


@pytest.mark.slow
def test_10_error_tracks_tv(desk_run):
    out = desk_run[0]
    _, val, test = cli.split(cli.load_data(_cfg("eval", out)), 0)
    classifier = load_model(out / "classifier.json", expect="mlp")
    V, Vc = val.subset(np.arange(256)), test.subset(np.arange(256))
    errs, tvs, r = error_vs_tv(classifier, V, Vc, surrogate_suite(), seed=0)
    assert record(10, len(errs) == 30 and r > 0.3, f"pearson r = {r:.3f} over {len(errs)} cells")


@pytest.mark.slow
def test_11_projection_bench(tmp_path):
    written = cli.cmd_project_bench(_cfg("project-bench", tmp_path), log=False)
    wins, parts = 0, []
    for shift in written:
        with open(tmp_path / f"project_bench_{shift}.csv", newline="") as fh:
            rows = [[r["family"], int(r["sample_size"]), int(r["severity"]), int(r["trial"]),
                     float(r["distance"])] for r in csv.DictReader(fh)]
        means = bench_winner(rows, severity=5)
        wins += means["orthonormal"] >= max(means["gaussian"], means["sparse"])
        parts.append(f"{shift} " + " ".join(f"{f}={means[f]:.3f}" for f in sorted(means)))
    assert record(11, wins >= 2, f"orthonormal leads in {wins}/3; " + "; ".join(parts))

