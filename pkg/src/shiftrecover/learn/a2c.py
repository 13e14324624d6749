"""One-step advantage actor-critic with per-step SGD updates."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .mlp import Mlp, mlp_backward, mlp_forward, sgd_step


class TrainingDivergedError(RuntimeError):
    pass


class Env(Protocol):
    n_actions: int
    state_dim: int

    def reset(self, seed: int) -> np.ndarray: ...

    def step(self, action: int): ...


@dataclass
class TrainHp:
    lr: float = 1e-4
    gamma: float = 0.9
    episodes: int = 1600
    eps_start: float = 0.9
    eps_floor: float = 0.1
    eps_base: float = 0.9
    eps_rate: float = 0.07
    hidden: tuple = (128, 256)
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if not 0 <= self.gamma < 1:
            raise ValueError("discount must be in [0, 1)")

    def epsilon(self, episode: int) -> float:
        """eps_base ** (eps_rate * (episode + 1)), held inside [eps_floor, eps_start]."""
        raw = self.eps_base ** (self.eps_rate * (episode + 1))
        return float(min(self.eps_start, max(self.eps_floor, raw)))


def advantage(reward: float, gamma: float, v_next: float, v: float, done: bool) -> float:
    return reward + gamma * v_next * (0.0 if done else 1.0) - v


@dataclass
class A2CResult:
    actor: Mlp
    critic: Mlp
    log: list = field(default_factory=list)
    steps: list = field(default_factory=list)


def a2c_train(env: Env, hp: TrainHp) -> A2CResult:
    """Train a softmax actor and a scalar critic on ``env``.

    Behaviour is epsilon-greedy over a sampled softmax action. Each transition
    updates both networks once: actor loss -log pi(a|s) * A with A held fixed,
    critic loss A**2.
    """
    rng = np.random.default_rng(hp.seed)
    actor = Mlp.create([env.state_dim, *hp.hidden, env.n_actions], seed=hp.seed + 1,
                       softmax=True, out_scale=0.1)
    critic = Mlp.create([env.state_dim, *hp.hidden, 1], seed=hp.seed + 2, out_scale=0.1)
    result = A2CResult(actor, critic)
    for episode in range(hp.episodes):
        state = env.reset(int(rng.integers(2**31)))
        eps = hp.epsilon(episode)
        done = False
        total = 0.0
        step = 0
        while not done:
            probs = mlp_forward(actor, state)
            if not np.all(np.isfinite(probs)):
                raise TrainingDivergedError(
                    f"policy output is not finite at episode {episode} step {step}"
                )
            if rng.random() < eps:
                action = int(rng.integers(env.n_actions))
            else:
                action = int(rng.choice(env.n_actions, p=probs))
            next_state, reward, done, info = env.step(action)
            v = mlp_forward(critic, state)[0]
            v_next = 0.0 if done else mlp_forward(critic, next_state)[0]
            adv = advantage(reward, hp.gamma, v_next, v, done)
            if not np.isfinite(adv):
                raise TrainingDivergedError(
                    f"non-finite advantage at episode {episode} step {step}: "
                    f"reward={reward}, v={v}, v_next={v_next}"
                )
            grad_logits = probs.copy()
            grad_logits[action] -= 1.0
            sgd_step(actor, mlp_backward(actor, state, grad_logits * adv, through_head=False), hp.lr)
            sgd_step(critic, mlp_backward(critic, state, [-2.0 * adv]), hp.lr)
            result.steps.append({"episode": episode, "step": step, "action": action,
                                 "reward": float(reward), **(info or {})})
            total += reward
            state = next_state
            step += 1
        result.log.append({"episode": episode, "terminal_reward": float(reward),
                           "return": float(total), "steps": step, "epsilon": eps})
    return result


class BanditEnv:
    """One-step environment with fixed per-action rewards and a constant state."""

    def __init__(self, rewards=(0.0, 1.0), state=(1.0, 0.0, 0.0)):
        self.rewards = tuple(float(r) for r in rewards)
        self.state = np.asarray(state, dtype=np.float64)
        self.n_actions = len(self.rewards)
        self.state_dim = len(self.state)

    def reset(self, seed: int) -> np.ndarray:
        return self.state.copy()

    def step(self, action: int):
        return self.state.copy(), self.rewards[action], True, {}
