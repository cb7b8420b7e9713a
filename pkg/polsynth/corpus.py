"""Seeded generator of small valid POMDPs with rational probabilities."""
from fractions import Fraction

import numpy as np

from .models.mdp import Mdp
from .models.pomdp import Pomdp


def random_pomdp(seed: int, max_states: int = 8, max_actions: int = 3, max_observations: int = 4,
                 max_reward: int = 10) -> Pomdp:
    """A POMDP where every state is reachable and observation classes share their actions.

    Successor weights are small integers, so rows are exact fractions summing to 1.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, max_states + 1))
    m = int(rng.integers(1, max_actions + 1))
    k = int(rng.integers(1, min(max_observations, n) + 1))

    obs_fn = [int(z) for z in rng.integers(0, k, size=n)]
    for z, s in enumerate(rng.permutation(n)[:k]):
        obs_fn[int(s)] = z
    enabled = []
    for _ in range(k):
        size = int(rng.integers(1, m + 1))
        enabled.append(sorted(int(a) for a in rng.choice(m, size=size, replace=False)))

    weights = {}
    for s in range(n):
        for a in enabled[obs_fn[s]]:
            support = int(rng.integers(1, min(3, n) + 1))
            weights[(s, a)] = {int(t): int(rng.integers(1, 5)) for t in rng.choice(n, size=support, replace=False)}
    # a spanning path from the initial state keeps every state reachable
    for s in range(1, n):
        u = int(rng.integers(0, s))
        a = enabled[obs_fn[u]][0]
        weights[(u, a)].setdefault(s, int(rng.integers(1, 5)))

    transitions = {}
    rewards = {}
    for key, row in weights.items():
        total = sum(row.values())
        transitions[key] = {t: Fraction(w, total) for t, w in row.items()}
        rewards[key] = float(rng.integers(0, max_reward + 1))

    mdp = Mdp([f"s{s}" for s in range(n)], 0, [f"a{a}" for a in range(m)], transitions, rewards)
    return Pomdp(mdp, [f"z{z}" for z in range(k)], obs_fn)


def random_targets(pomdp: Pomdp, seed: int) -> frozenset:
    """One or two non-initial target states (the initial state if it is the only one)."""
    rng = np.random.default_rng(seed + 7919)
    candidates = [s for s in range(pomdp.num_states) if s != pomdp.initial]
    if not candidates:
        return frozenset({pomdp.initial})
    size = min(len(candidates), int(rng.integers(1, 3)))
    return frozenset(int(s) for s in rng.choice(candidates, size=size, replace=False))


def random_corpus(count: int, seed: int = 0, **limits):
    """(seed, pomdp, targets) for `count` consecutive seeds."""
    for offset in range(count):
        instance_seed = seed + offset
        pomdp = random_pomdp(instance_seed, **limits)
        yield instance_seed, pomdp, random_targets(pomdp, instance_seed)
