"""Runtime transform selection with an operability gate and success/harm stopping."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .features import batch_state
from .imagecore import SampleSet, atomic_write_bytes
from .metrics import Estimator
from .operability import batch_operable
from .transforms import TransformError, compose, format_spec, parse_spec

STOP_REASONS = ("inoperable", "success", "harm", "horizon")


@dataclass
class ControllerConfig:
    alpha: float = 0.9
    beta: float = 0.995
    horizon: int = 5
    literal_alg1: bool = False
    proj_dim: int = 64
    slices: int = 128
    p: int = 1
    seed: int = 0
    frac_threshold: float = 0.5

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must be in (0, 1]")
        if self.beta <= 0 or (self.literal_alg1 and self.beta > 1):
            raise ValueError("beta must be in (0, 1] in literal mode and positive otherwise")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")

    def estimator(self) -> Estimator:
        return Estimator(dim=self.proj_dim, slices=self.slices, p=self.p, seed=self.seed)


@dataclass
class RecoveryReport:
    sequence: list
    w: list
    stop: str
    inoperable_frac: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({
            "w": [float(x) for x in self.w],
            "sequence": [format_spec(t) for t in self.sequence],
            "stop": self.stop,
            "inoperable_frac": [float(x) for x in self.inoperable_frac],
        })

    @classmethod
    def from_json(cls, text: str) -> RecoveryReport:
        doc = json.loads(text)
        if doc.get("stop") not in STOP_REASONS:
            raise ValueError(f"unknown stop reason {doc.get('stop')!r}")
        return cls([parse_spec(t) for t in doc["sequence"]], list(doc["w"]), doc["stop"],
                   list(doc.get("inoperable_frac", [])))

    def save(self, path) -> None:
        atomic_write_bytes(path, self.to_json().encode())


def _tree_gate(tree, cfg):
    if tree is None:
        return lambda batch: (True, 0.0)
    return lambda batch: batch_operable(tree, batch, cfg.frac_threshold)


def select_transforms(V: SampleSet, Vc: SampleSet, policy, tree, cfg: ControllerConfig,
                      seed: int = 0, distance=None, gate=None) -> RecoveryReport:
    """Greedy policy rollout scored by distance to ``V``.

    ``policy`` needs ``greedy(state) -> index`` and an ``actions`` list.
    ``distance(batch)`` and ``gate(batch) -> (operable, frac)`` default to the
    configured estimator against ``V`` and the operability tree.
    """
    if len(V) == 0 or len(Vc) == 0:
        raise ValueError("both batches must be non-empty")
    if distance is None:
        est = cfg.estimator()
        ref = est.reference(V)
        distance = lambda batch: est(ref, batch)  # noqa: E731
    gate = gate or _tree_gate(tree, cfg)

    w = [float(distance(Vc))]
    seq, fracs = [], []
    current = Vc
    for i in range(1, cfg.horizon + 1):
        operable, frac = gate(current)
        fracs.append(float(frac))
        if not operable:
            return RecoveryReport(seq, w, "inoperable", fracs)
        a = policy.greedy(batch_state(current))
        if not 0 <= a < len(policy.actions):
            raise TransformError(f"policy chose action {a} outside a library of {len(policy.actions)}")
        t_i = policy.actions[a]
        nxt = compose([t_i], current, seed)
        w.append(float(distance(nxt)))
        if w[i] <= cfg.alpha * w[0]:
            if not cfg.literal_alg1:
                seq.append(t_i)
            return RecoveryReport(seq, w, "success", fracs)
        if w[i] >= cfg.beta * w[i - 1]:
            return RecoveryReport(seq, w, "harm", fracs)
        seq.append(t_i)
        current = nxt
    return RecoveryReport(seq, w, "horizon", fracs)


def recover(Vc: SampleSet, report: RecoveryReport, seed: int = 0, shape=None) -> SampleSet:
    """Apply the chosen sequence in selection order; labels are carried through."""
    if shape is not None and tuple(shape) != Vc.shape[1:]:
        raise ValueError(f"report was made for images of shape {tuple(shape)}, got {Vc.shape[1:]}")
    return compose(report.sequence, Vc, seed)
