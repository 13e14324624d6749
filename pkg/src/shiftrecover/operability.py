"""Operability labels from distance/accuracy correlation, the gating tree, and the batch vote."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .features import image_feature_matrix
from .imagecore import SampleSet, atomic_write_bytes
from .learn import DecisionTree, accuracy, auroc, tree_fit
from .metrics import DegenerateCorrelationError, Estimator, pearson
from .transforms import PROFILES, apply, family_specs

OPERABLE, INOPERABLE = 0, 1
CSV_HEADER = ("brightness", "std", "entropy", "family", "severity", "label")


@dataclass
class OperabilityLabelSpec:
    """Labeling inputs: a distance, a reference classifier and a severity ladder."""

    distance: object = None  # callable (V, batch) -> float; defaults to the sliced estimator
    classifier: object = None  # Mlp applied to flattened grayscale-or-colour pixels
    profile: str = "paper-imagenet"
    r_max: float = -0.3

    def ladder(self, family: str):
        specs = family_specs(family, self.profile)
        if len(specs) < 3:
            raise ValueError(f"family {family!r} has {len(specs)} severities, need at least 3")
        return specs


@dataclass
class FamilyResult:
    family: str
    distances: list
    accuracies: list
    r: float | None
    label: int | None  # None when the correlation is degenerate


@dataclass
class LabeledSet:
    features: np.ndarray  # (n, 3)
    labels: np.ndarray  # (n,) int, 1 = inoperable
    families: list
    severities: np.ndarray
    summary: list = field(default_factory=list)

    def __len__(self):
        return len(self.labels)

    def subset(self, index) -> LabeledSet:
        index = np.asarray(index)
        return LabeledSet(self.features[index], self.labels[index],
                          [self.families[i] for i in index], self.severities[index], self.summary)

    def family_label(self, family: str):
        for res in self.summary:
            if res.family == family:
                return res.label
        raise KeyError(family)


def flat_pixels(batch: SampleSet) -> np.ndarray:
    return batch.images.reshape(len(batch), -1)


def family_label(distances, accuracies, r_max: float = -0.3):
    """(label, r): operable iff pearson(distance, accuracy) <= r_max."""
    r = pearson(distances, accuracies)
    return (OPERABLE if r <= r_max else INOPERABLE), r


def generate_labels(V: SampleSet, Vc: SampleSet, families, spec: OperabilityLabelSpec,
                    seed: int = 0) -> LabeledSet:
    """Corrupt ``Vc`` along each family's ladder and label every image by the family verdict."""
    if spec.classifier is None:
        raise ValueError("a reference classifier is required")
    distance = spec.distance or Estimator(seed=seed)
    ref = distance.reference(V) if hasattr(distance, "reference") else V
    feats, labels, fams, sevs, summary = [], [], [], [], []
    for fi, family in enumerate(families):
        shifted = [apply(s, Vc, seed + 101 * fi + s.severity) for s in spec.ladder(family)]
        ds = [float(distance(ref, b)) for b in shifted]
        accs = [accuracy(spec.classifier, flat_pixels(b), b.labels) for b in shifted]
        try:
            label, r = family_label(ds, accs, spec.r_max)
        except DegenerateCorrelationError:
            summary.append(FamilyResult(family, ds, accs, None, None))
            continue
        summary.append(FamilyResult(family, ds, accs, r, label))
        for s, b in zip(spec.ladder(family), shifted):
            feats.append(image_feature_matrix(b.grayscale()))
            labels.append(np.full(len(b), label))
            fams.extend([family] * len(b))
            sevs.append(np.full(len(b), s.severity))
    if not feats:
        return LabeledSet(np.empty((0, 3)), np.empty(0, dtype=np.int64), [],
                          np.empty(0, dtype=np.int64), summary)
    return LabeledSet(np.concatenate(feats), np.concatenate(labels).astype(np.int64), fams,
                      np.concatenate(sevs).astype(np.int64), summary)


@dataclass
class OperabilityModel:
    tree: DecisionTree
    heldout_auroc: float


def train_operability(labeled: LabeledSet, seed: int = 0, holdout: float = 0.25,
                      max_depth: int = 8, min_leaf: int = 5) -> OperabilityModel:
    """Fit the gating tree on a random split and score it on the rest."""
    y = labeled.labels
    if len(np.unique(y)) < 2:
        raise ValueError("operability training needs both labels present")
    order = np.random.default_rng(seed).permutation(len(y))
    n_test = max(1, int(round(holdout * len(y))))
    test, train = order[:n_test], order[n_test:]
    tree = tree_fit(labeled.features[train], y[train], max_depth=max_depth, min_leaf=min_leaf)
    try:
        score = auroc(tree.predict_proba(labeled.features[test]), y[test])
    except ValueError:
        score = float("nan")
    return OperabilityModel(tree, score)


def batch_operable(tree: DecisionTree, batch: SampleSet, frac_threshold: float = 0.5):
    """(operable, inoperable fraction) by per-image vote."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    votes = tree.predict_proba(image_feature_matrix(batch.grayscale())) > 0.5
    frac = int(votes.sum()) / len(batch)
    return frac <= frac_threshold, frac


def labeled_to_csv(labeled: LabeledSet) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(CSV_HEADER)
    for f, fam, sev, lab in zip(labeled.features, labeled.families, labeled.severities,
                                labeled.labels):
        w.writerow([repr(float(f[0])), repr(float(f[1])), repr(float(f[2])), fam, int(sev), int(lab)])
    return buf.getvalue()


def save_labeled(path, labeled: LabeledSet) -> None:
    atomic_write_bytes(path, labeled_to_csv(labeled).encode())


def load_labeled(path) -> LabeledSet:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and tuple(rows[0].keys()) != CSV_HEADER:
        raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}")
    feats = np.array([[float(r["brightness"]), float(r["std"]), float(r["entropy"])] for r in rows])
    return LabeledSet(feats.reshape(-1, 3), np.array([int(r["label"]) for r in rows], dtype=np.int64),
                      [r["family"] for r in rows],
                      np.array([int(r["severity"]) for r in rows], dtype=np.int64))


def all_families(profile: str = "paper-imagenet") -> list[str]:
    return list(PROFILES[profile])
