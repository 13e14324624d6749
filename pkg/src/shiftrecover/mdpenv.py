"""Recovery MDP: corrupted batch in, corrective transform per step, distance-based reward."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .features import StateVector, batch_state
from .imagecore import SampleSet
from .learn import Mlp, load_model, mlp_forward, save_model
from .metrics import Estimator, ssim
from .transforms import (
    POLICY_FAMILIES,
    PROFILES,
    TransformSpec,
    action_library,
    apply,
    family_specs,
    format_spec,
    parse_spec,
)

# state-vector index each surrogate family is tuned against
CALIBRATION_INDEX = {
    "uniform_noise": 2,
    "median_blur": 2,
    "gamma_a": 0,
    "gamma_b": 0,
    "sigmoid_a": 1,
    "sigmoid_b": 1,
}
CALIBRATION_RANGE = (0.3, 1.0)


class EpisodeDoneError(RuntimeError):
    pass


@dataclass
class EnvConfig:
    lam: float = 20.0
    omega: float = 0.994
    gamma: float = 0.9
    horizon: int = 5
    proj_dim: int = 64
    slices: int = 128
    p: int = 1
    profile: str = "paper-imagenet"
    families: tuple = POLICY_FAMILIES
    batch_size: int = 64

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if not 0 <= self.omega < 1:
            raise ValueError("omega must be in [0, 1)")
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must be in [0, 1)")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")

    def estimator(self, seed: int) -> Estimator:
        return Estimator(dim=self.proj_dim, slices=self.slices, p=self.p, seed=seed)

    def surrogates(self) -> list[TransformSpec]:
        return [s for fam in self.families for s in family_specs(fam, self.profile)]


@dataclass
class EnvState:
    batch: SampleSet
    original: SampleSet
    t: int
    state: StateVector
    corruption: TransformSpec | None = None
    estimator_seed: int = 0
    history: list = field(default_factory=list)

    @property
    def done(self) -> bool:
        return bool(self.history) and self.history[-1]["done"]


def regularizer(ssim_value: float, omega: float) -> float:
    """log(1 - ssim) below the similarity gate, else 0 (natural log)."""
    return math.log(1.0 - ssim_value) if ssim_value < omega else 0.0


def relative_state(state, reference) -> np.ndarray:
    """Per-coordinate relative deviation from a reference state vector."""
    ref = np.asarray(reference, dtype=np.float64)
    return (np.asarray(state, dtype=np.float64) - ref) / np.where(np.abs(ref) > 0, np.abs(ref), 1.0)


class RecoveryEnv:
    """The MDP over a clean image pool.

    A fixed reference set V of ``batch_size`` images is held out of ``clean``;
    episodes corrupt fresh sub-batches of the remaining pool. Observations fed
    to a policy are state vectors expressed relative to the state of V.
    """

    def __init__(self, cfg: EnvConfig, clean: SampleSet, seed: int = 0):
        if len(clean) == 0:
            raise ValueError("clean set is empty")
        self.cfg = cfg
        self.actions = action_library()
        self.n_actions = len(self.actions)
        self.state_dim = 3
        rng = np.random.default_rng(seed)
        order = rng.permutation(len(clean))
        n_ref = min(cfg.batch_size, len(clean) // 2) or len(clean)
        self.reference = clean.subset(order[:n_ref])
        self.pool = clean.subset(order[n_ref:]) if len(clean) > n_ref else self.reference
        self.reference_state = batch_state(self.reference)
        self.cells = cfg.surrogates()
        self._ref_cache = {}
        self._current: EnvState | None = None

    def distance(self, batch: SampleSet, seed: int) -> float:
        est = self.cfg.estimator(seed)
        if seed not in self._ref_cache:
            self._ref_cache = {seed: est.reference(self.reference)}
        return est(self._ref_cache[seed], batch)

    def observe(self, state: StateVector) -> np.ndarray:
        return relative_state(state, self.reference_state)

    def sample_initial(self, seed: int) -> EnvState:
        rng = np.random.default_rng(seed)
        size = min(self.cfg.batch_size, len(self.pool))
        idx = rng.choice(len(self.pool), size=size, replace=False)
        corruption = self.cells[int(rng.integers(len(self.cells)))]
        batch = apply(corruption, self.pool.subset(idx), int(rng.integers(2**31)))
        return EnvState(batch, batch, 0, batch_state(batch), corruption,
                        estimator_seed=int(rng.integers(2**31)))

    def reward(self, original: SampleSet, batch: SampleSet, estimator_seed: int):
        w = self.distance(batch, estimator_seed)
        s = ssim(original, batch)
        return -w + self.cfg.lam * regularizer(s, self.cfg.omega), w, s

    def step(self, env_state: EnvState, action: TransformSpec | int, seed: int = 0):
        if env_state.t >= self.cfg.horizon:
            raise EpisodeDoneError(f"episode already ended at t={env_state.t}")
        spec = self.actions[action] if isinstance(action, (int, np.integer)) else action
        batch = apply(spec, env_state.batch, seed)
        r, w, s = self.reward(env_state.original, batch, env_state.estimator_seed)
        t = env_state.t + 1
        done = t == self.cfg.horizon
        record = {"action": str(spec), "wasserstein": w, "ssim": s, "reward": r, "done": done}
        nxt = EnvState(batch, env_state.original, t, batch_state(batch), env_state.corruption,
                       env_state.estimator_seed, env_state.history + [record])
        return nxt, r, done

    # gym-style adapter used by the trainer
    def reset(self, seed: int) -> np.ndarray:
        self._current = self.sample_initial(seed)
        self._step_seed = seed
        return self.observe(self._current.state)

    def step_index(self, action: int):
        nxt, r, done = self.step(self._current, int(action), seed=self._step_seed + self._current.t)
        self._current = nxt
        rec = nxt.history[-1]
        info = {"wasserstein": rec["wasserstein"], "ssim": rec["ssim"]}
        return self.observe(nxt.state), r, done, info


class TrainingEnv:
    """Adapter exposing ``reset``/``step(int)`` for the actor-critic trainer."""

    def __init__(self, env: RecoveryEnv):
        self.env = env
        self.n_actions = env.n_actions
        self.state_dim = env.state_dim

    def reset(self, seed: int):
        return self.env.reset(seed)

    def step(self, action: int):
        return self.env.step_index(action)


@dataclass
class CalibrationRow:
    family: str
    severity: int
    index: int
    value: float
    clean_value: float
    relative_change: float


@dataclass
class CalibrationReport:
    rows: list
    in_range: dict
    monotone: dict

    def violations(self) -> list[str]:
        return [fam for fam, ok in self.in_range.items() if not ok]


def calibrate_severities(profile: str, clean: SampleSet, seed: int = 0,
                         sample_size: int = 256) -> CalibrationReport:
    """Relative change of each family's tuned state index against a clean sample.

    Severity 5 should land inside [0.3, 1.0]; ``monotone`` records whether the
    change grows with severity.
    """
    if len(clean) == 0:
        raise ValueError("clean set is empty")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(clean))
    half = max(1, min(sample_size, len(clean) // 2))
    v = clean.subset(order[:half])
    vc = clean.subset(order[half : 2 * half]) if len(clean) >= 2 * half else v
    clean_state = np.asarray(batch_state(v))
    rows, in_range, monotone = [], {}, {}
    lo, hi = CALIBRATION_RANGE
    for family in PROFILES[profile]:
        i = CALIBRATION_INDEX[family]
        changes = []
        for spec in family_specs(family, profile):
            value = batch_state(apply(spec, vc, seed + spec.severity))[i]
            rel = abs((value - clean_state[i]) / clean_state[i])
            changes.append(rel)
            rows.append(CalibrationRow(family, spec.severity, i, value, float(clean_state[i]), rel))
        in_range[family] = bool(lo <= changes[-1] <= hi)
        monotone[family] = bool(np.all(np.diff(changes) > 0))
    return CalibrationReport(rows, in_range, monotone)


@dataclass
class Policy:
    """Trained actor plus what it needs at deployment: the clean reference state and action list."""

    actor: Mlp
    reference_state: tuple
    actions: list

    def __post_init__(self):
        if self.actor.sizes[-1] != len(self.actions):
            raise ValueError(
                f"policy has {self.actor.sizes[-1]} outputs for {len(self.actions)} actions"
            )

    def probabilities(self, state) -> np.ndarray:
        return mlp_forward(self.actor, relative_state(state, self.reference_state))

    def greedy(self, state) -> int:
        return int(np.argmax(self.probabilities(state)))

    def save(self, path) -> None:
        save_model(path, self.actor, reference_state=[float(v) for v in self.reference_state],
                   actions=[format_spec(a) for a in self.actions])

    @classmethod
    def load(cls, path) -> Policy:
        with open(path) as fh:
            meta = json.load(fh).get("meta", {})
        actor = load_model(path, expect="mlp")
        if "reference_state" not in meta or "actions" not in meta:
            raise ValueError(f"{path}: policy metadata missing")
        return cls(actor, tuple(meta["reference_state"]), [parse_spec(a) for a in meta["actions"]])


def episode_csv_rows(steps) -> list[list]:
    """Rows for the episode log: episode,step,action,wasserstein,ssim,reward."""
    return [[s["episode"], s["step"], s["action"], repr(float(s["wasserstein"])),
             repr(float(s["ssim"])), repr(float(s["reward"]))] for s in steps]


EPISODE_HEADER = ("episode", "step", "action", "wasserstein", "ssim", "reward")
