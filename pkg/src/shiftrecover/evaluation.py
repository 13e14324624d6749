"""Desk-scale experiments: accuracy table, projection benchmark, state-vector clustering."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .controller import ControllerConfig, recover, select_transforms
from .features import image_feature_matrix
from .imagecore import SampleSet
from .learn import accuracy, elbow, elbow_k, kmeans
from .metrics import make_projection, pearson, sliced_divergence, wasserstein_exact
from .operability import flat_pixels
from .transforms import TransformSpec, apply, family_specs, parse_spec

ACCURACY_HEADER = ("shift", "severity", "acc_clean", "acc_shifted", "acc_recovered", "delta")
BENCH_HEADER = ("family", "sample_size", "severity", "trial", "distance")
ELBOW_HEADER = ("k", "inertia")
ASSIGN_HEADER = ("shift", "cluster", "count")

# shift types of the projection benchmark, five severities each
BENCH_SHIFTS = {
    "gaussian_noise": ("gaussian_noise", "sigma", (0.05, 0.1, 0.2, 0.3, 0.5)),
    "impulse_noise": ("impulse_noise", "amount", (0.02, 0.05, 0.1, 0.2, 0.3)),
    "gaussian_blur": ("gaussian_blur", "sigma", (0.5, 1.0, 1.5, 2.0, 3.0)),
}


def cell_seed(*parts) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def default_eval_shifts(families=("uniform_noise", "gamma_a"), profile="paper-imagenet"):
    shifts = [TransformSpec("identity")]
    for fam in families:
        shifts.extend(family_specs(fam, profile))
    return shifts


def shift_label(spec: TransformSpec) -> str:
    return spec.family or str(spec)


@dataclass
class CellResult:
    shift: str
    severity: int
    acc_clean: float
    acc_shifted: float
    acc_recovered: float
    trials: list

    @property
    def delta(self) -> float:
        return self.acc_recovered - self.acc_shifted

    def row(self):
        return [self.shift, self.severity, self.acc_clean, self.acc_shifted, self.acc_recovered,
                self.delta]


def accuracy_table(classifier, V: SampleSet, test: SampleSet, policy, tree, shifts,
                   ccfg: ControllerConfig, trials: int = 3, batch_size: int = 256,
                   seed: int = 0) -> list[CellResult]:
    """Per (shift, severity): mean accuracies over ``trials`` random test batches.

    Each trial draws a batch, corrupts it, lets the controller pick a sequence
    against ``V`` and scores clean, shifted and recovered images.
    """
    out = []
    for ci, shift in enumerate(shifts):
        per = []
        for t in range(trials):
            s = cell_seed(seed, ci, t)
            rng = np.random.default_rng(s)
            idx = rng.choice(len(test), size=min(batch_size, len(test)), replace=False)
            batch = test.subset(idx)
            shifted = apply(shift, batch, s)
            report = select_transforms(V, shifted, policy, tree, ccfg, seed=s)
            recovered = recover(shifted, report, seed=s)
            per.append({
                "acc_clean": accuracy(classifier, flat_pixels(batch), batch.labels),
                "acc_shifted": accuracy(classifier, flat_pixels(shifted), batch.labels),
                "acc_recovered": accuracy(classifier, flat_pixels(recovered), batch.labels),
                "sequence": [str(x) for x in report.sequence],
                "stop": report.stop,
            })
        mean = {k: float(np.mean([p[k] for p in per])) for k in ("acc_clean", "acc_shifted",
                                                               "acc_recovered")}
        out.append(CellResult(shift_label(shift), shift.severity or 0, mean["acc_clean"],
                              mean["acc_shifted"], mean["acc_recovered"], per))
    return out


def bench_specs(shift: str) -> list[TransformSpec]:
    name, key, values = BENCH_SHIFTS[shift]
    return [TransformSpec(name, {key: v}, severity=i + 1, family=shift)
            for i, v in enumerate(values)]


def project_bench(clean: SampleSet, shift: str, sample_sizes=(32, 64, 128, 256), dim: int = 50,
                  trials: int = 5, families=("orthonormal", "gaussian", "sparse"),
                  seed: int = 0) -> list[list]:
    """Exact W1 between clean and shifted samples after each projection family.

    Rows are (family, sample_size, severity, trial, distance); severity 0 is a
    clean-vs-clean baseline.
    """
    x_all = flat_pixels(clean)
    rows = []
    specs = [None] + bench_specs(shift)
    for n in sample_sizes:
        if 2 * n > len(clean):
            raise ValueError(f"sample size {n} needs {2 * n} clean images, have {len(clean)}")
        for t in range(trials):
            s = cell_seed(seed, n, t)
            order = np.random.default_rng(s).permutation(len(clean))
            a_idx, b_idx = order[:n], order[n : 2 * n]
            projs = {f: make_projection(x_all.shape[1], dim, f, s) for f in families}
            xa = x_all[a_idx]
            for spec in specs:
                b = clean.subset(b_idx)
                xb = flat_pixels(b if spec is None else apply(spec, b, s))
                for f in families:
                    d = wasserstein_exact(projs[f](xa), projs[f](xb), p=1)
                    rows.append([f, n, 0 if spec is None else spec.severity, t, d])
    return rows


def bench_winner(rows, severity: int = 5) -> dict:
    """Mean distance per family at the largest sample size and the given severity."""
    n_max = max(r[1] for r in rows)
    out = {}
    for f in {r[0] for r in rows}:
        vals = [r[4] for r in rows if r[0] == f and r[1] == n_max and r[2] == severity]
        out[f] = float(np.mean(vals))
    return out


def error_vs_tv(classifier, V: SampleSet, Vc: SampleSet, suite, seed: int = 0, bins: int = 32,
                slices: int = 64):
    """(error gap, sliced histogram TV) for every surrogate cell and their Pearson r."""
    base_err = 1.0 - accuracy(classifier, flat_pixels(Vc), Vc.labels)
    errs, tvs = [], []
    for i, spec in enumerate(suite):
        shifted = apply(spec, Vc, cell_seed(seed, i))
        errs.append(1.0 - accuracy(classifier, flat_pixels(shifted), Vc.labels) - base_err)
        tvs.append(sliced_divergence(flat_pixels(V), flat_pixels(shifted), "tv", bins, slices, seed))
    return errs, tvs, pearson(errs, tvs)


def cluster_states(clean: SampleSet, shifts, per_shift: int = 100, k_max: int = 9, seed: int = 0):
    """Per-image state vectors of shifted samples, an elbow sweep and the chosen clustering."""
    rng = np.random.default_rng(seed)
    feats, names = [], []
    for i, spec in enumerate(shifts):
        idx = rng.choice(len(clean), size=min(per_shift, len(clean)), replace=False)
        shifted = apply(spec, clean.subset(idx), cell_seed(seed, i))
        feats.append(image_feature_matrix(shifted.grayscale()))
        names.extend([shift_label(spec) if spec.severity is None
                      else f"{shift_label(spec)}@{spec.severity}"] * len(idx))
    x = np.concatenate(feats)
    # standardize so entropy (bits) does not dominate brightness and std
    x = (x - x.mean(axis=0)) / np.where(x.std(axis=0) > 0, x.std(axis=0), 1.0)
    inertias = elbow(x, k_max, seed)
    k = elbow_k(inertias)
    res = kmeans(x, k, seed)
    counts = {}
    for name, c in zip(names, res.assignments):
        counts[(name, int(c))] = counts.get((name, int(c)), 0) + 1
    assign_rows = [[name, c, n] for (name, c), n in sorted(counts.items())]
    elbow_rows = [[i + 1, v] for i, v in enumerate(inertias)]
    return elbow_rows, assign_rows, k


def parse_shift(text: str) -> TransformSpec:
    return parse_spec(text)
