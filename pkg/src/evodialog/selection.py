"""Strategy selection policies over fitness scores.

Boltzmann is the default; roulette-wheel, uniform-random, and epsilon-greedy
are the ablation variants. All policies return proper probability vectors.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from enum import Enum

from .bank import Strategy
from .errors import NoCandidatesError

ROULETTE_FLOOR = 1e-6


class PolicyKind(str, Enum):
    BOLTZMANN = "boltzmann"
    ROULETTE_WHEEL = "roulette_wheel"
    UNIFORM_RANDOM = "uniform_random"
    EPSILON_GREEDY = "epsilon_greedy"


@dataclass(frozen=True)
class SelectionPolicy:
    kind: PolicyKind = PolicyKind.BOLTZMANN
    temperature: float = 1.0
    epsilon: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must be in [0, 1]")


def selection_distribution(fitnesses: list[float], policy: SelectionPolicy) -> list[float]:
    if not fitnesses:
        raise NoCandidatesError("empty fitness list; run genesis first")
    n = len(fitnesses)
    if policy.kind is PolicyKind.BOLTZMANN:
        # max-shift for numerical stability; softmax is shift-invariant
        peak = max(fitnesses)
        weights = [math.exp((f - peak) / policy.temperature) for f in fitnesses]
    elif policy.kind is PolicyKind.ROULETTE_WHEEL:
        lo = min(fitnesses)
        weights = [max(f - lo, 0.0) + ROULETTE_FLOOR for f in fitnesses]
    elif policy.kind is PolicyKind.UNIFORM_RANDOM:
        weights = [1.0] * n
    else:  # epsilon-greedy
        best = max(range(n), key=lambda i: fitnesses[i])
        probs = [policy.epsilon / n] * n
        probs[best] += 1.0 - policy.epsilon
        return probs
    total = sum(weights)
    return [w / total for w in weights]


def select_index(fitnesses: list[float], policy: SelectionPolicy, rng: random.Random) -> int:
    probs = selection_distribution(fitnesses, policy)
    draw = rng.random()
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if draw < acc:
            return i
    return len(probs) - 1


def select(candidates: list[Strategy], fitnesses: list[float],
           policy: SelectionPolicy, rng: random.Random) -> Strategy:
    """Draw one strategy according to the policy; deterministic given the rng state."""
    if not candidates:
        raise NoCandidatesError("no candidate strategies; run genesis first")
    if len(candidates) != len(fitnesses):
        raise ValueError("candidates and fitnesses must align")
    return candidates[select_index(fitnesses, policy, rng)]
