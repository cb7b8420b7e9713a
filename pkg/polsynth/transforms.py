"""POMDP-to-POMDP transformations: static randomization, observation and state splitting."""
import itertools
import logging
from enum import Enum
from fractions import Fraction

import networkx as nx

from .errors import InitialStateSplit, InvalidPartition, NotSplittable
from .graph_analysis import pre_observation_map, pre_observations
from .models.mdp import SUM_TOLERANCE, Mdp
from .models.policy import MixtureCatalog, mixture_name
from .models.pomdp import Pomdp, fresh_name

logger = logging.getLogger(__name__)


class RandomizationMode(Enum):
    PURE = "pure"
    LIGHT = "light"
    HEAVY = "heavy"


def apply_randomization(pomdp: Pomdp, mode: RandomizationMode):
    """Adds fixed uniform mixtures of enabled actions as extra actions.

    Only observations shared by at least two states and offering at least two
    actions are augmented. Light adds the mixture over all enabled actions, Heavy
    one mixture per subset of size two or more. Mixture actions are shared by name
    across observations.
    """
    if mode is RandomizationMode.PURE:
        return pomdp, MixtureCatalog()

    mdp = pomdp.mdp
    base_names = mdp.action_names
    action_names = list(base_names)
    index = {name: a for a, name in enumerate(action_names)}
    transitions = dict(mdp.transitions)
    rewards = dict(mdp.rewards)
    mixtures = {}
    by_observation = {}

    for z in range(pomdp.num_observations):
        states = pomdp.states_with_observation(z)
        acts = pomdp.observation_actions(z)
        if len(states) < 2 or len(acts) < 2:
            continue
        if mode is RandomizationMode.LIGHT:
            subsets = [acts]
        else:
            subsets = [c for k in range(2, len(acts) + 1) for c in itertools.combinations(acts, k)]
        added = []
        for members in subsets:
            name = mixture_name(base_names, members)
            if name not in index:
                index[name] = len(action_names)
                action_names.append(name)
            u = index[name]
            weight = Fraction(1, len(members))
            mixtures[u] = {b: weight for b in members}
            added.append(u)
            for s in states:
                row = {}
                for b in members:
                    for t, p in mdp.transition(s, b).items():
                        row[t] = row.get(t, 0) + weight * p
                transitions[(s, u)] = row
                rewards[(s, u)] = sum(mdp.reward(s, b) for b in members) / len(members)
        by_observation[z] = tuple(added)

    randomized = Pomdp(
        Mdp(mdp.state_names, mdp.initial, action_names, transitions, rewards),
        pomdp.observation_names,
        pomdp.obs_fn,
    )
    logger.debug("%s randomization added %d mixture actions", mode.value, len(action_names) - len(base_names))
    return randomized, MixtureCatalog(mixtures, by_observation)


class SplitRelation:
    """origin[t] is the state of the source POMDP that state t of the split POMDP came from."""

    def __init__(self, origin):
        self.origin = tuple(origin)

    @staticmethod
    def identity(num_states: int) -> "SplitRelation":
        return SplitRelation(range(num_states))

    def __iter__(self):
        return iter(self.origin)

    def __len__(self) -> int:
        return len(self.origin)

    def __getitem__(self, t: int) -> int:
        return self.origin[t]

    def __eq__(self, other) -> bool:
        if not isinstance(other, SplitRelation):
            return NotImplemented
        return self.origin == other.origin

    def then(self, later: "SplitRelation") -> "SplitRelation":
        """Relation from the states of a later refinement straight back to this one's source."""
        return SplitRelation(self.origin[o] for o in later.origin)

    def is_surjective_onto(self, num_states: int) -> bool:
        return set(self.origin) == set(range(num_states))

    def __repr__(self) -> str:
        return f"SplitRelation({len(self.origin)} states)"


def splittable_partition(pomdp: Pomdp, z: int):
    """Blocks of the observation class of z with pairwise disjoint pre-observations, or None.

    States are linked when their pre-observation sets intersect; the connected
    components are the blocks, ordered by their smallest state.
    """
    states = pomdp.states_with_observation(z)
    if len(states) < 2:
        return None
    pred = pre_observation_map(pomdp)
    graph = nx.Graph()
    graph.add_nodes_from(states)
    for s, t in itertools.combinations(states, 2):
        if pred[s] & pred[t]:
            graph.add_edge(s, t)
    if nx.number_connected_components(graph) < 2:
        return None
    return sorted((tuple(sorted(component)) for component in nx.connected_components(graph)), key=lambda b: b[0])


def _check_partition(pomdp: Pomdp, z: int, partition) -> None:
    states = set(pomdp.states_with_observation(z))
    seen = set()
    for block in partition:
        if not block:
            raise InvalidPartition("empty block")
        if seen & set(block):
            raise InvalidPartition("blocks overlap")
        seen |= set(block)
    if seen != states:
        raise InvalidPartition(f"blocks do not cover observation {pomdp.observation_names[z]}")
    pred = pre_observation_map(pomdp)
    unions = [frozenset().union(*(pred[s] for s in block)) for block in partition]
    for first, second in itertools.combinations(unions, 2):
        if first & second:
            raise InvalidPartition("blocks share a pre-observation")


def split_observation(pomdp: Pomdp, z: int, partition) -> Pomdp:
    _check_partition(pomdp, z, partition)
    if len(partition) < 2:
        return pomdp
    blocks = sorted((tuple(sorted(block)) for block in partition), key=lambda b: b[0])
    old = pomdp.observation_names[z]
    observations = list(pomdp.observation_names)
    obs_fn = list(pomdp.obs_fn)
    taken = set(observations)
    for k, block in enumerate(blocks, start=1):
        name = fresh_name(f"{old}#{k}", taken)
        taken.add(name)
        if k == 1:
            observations[z] = name
            slot = z
        else:
            observations.append(name)
            slot = len(observations) - 1
        for s in block:
            obs_fn[s] = slot
    logger.debug("split observation %s into %d blocks", old, len(blocks))
    return Pomdp(pomdp.mdp, observations, obs_fn)


def split_all_observations(pomdp: Pomdp) -> Pomdp:
    """Splits observations until no observation class admits a split."""
    changed = True
    while changed:
        changed = False
        for z in range(pomdp.num_observations):
            partition = splittable_partition(pomdp, z)
            if partition is not None:
                pomdp = split_observation(pomdp, z, partition)
                changed = True
                break
    return pomdp


def split_state(pomdp: Pomdp, s: int):
    """Replaces s by one copy per pre-observation (z, a).

    Copy 0 keeps the index of s; the others are appended. A transition into s from a
    state with observation z under action a is routed to copy (s, z, a); self loops of s
    under a go to copy (s, obs(s), a).
    """
    if s == pomdp.initial:
        raise InitialStateSplit(f"the initial state {pomdp.state_names[s]} cannot be split")
    pred = sorted(pre_observations(pomdp, s))
    if len(pred) <= 1:
        raise NotSplittable(f"state {pomdp.state_names[s]} has {len(pred)} pre-observation(s)")

    mdp = pomdp.mdp
    n = mdp.num_states
    copy_of = {pair: (s if k == 0 else n + k - 1) for k, pair in enumerate(pred)}
    state_names = list(mdp.state_names) + [None] * (len(pred) - 1)
    taken = set(mdp.state_names)
    for (zp, a), copy in copy_of.items():
        name = fresh_name(f"{mdp.state_names[s]}[{pomdp.observation_names[zp]}/{mdp.action_names[a]}]", taken)
        taken.add(name)
        state_names[copy] = name

    def reroute(source_obs: int, a: int, row: dict) -> dict:
        routed = {}
        for t, p in row.items():
            target = copy_of[(source_obs, a)] if t == s else t
            routed[target] = routed.get(target, 0) + p
        return routed

    transitions = {}
    rewards = {}
    for (u, a), row in mdp.transitions.items():
        if u == s:
            for copy in copy_of.values():
                transitions[(copy, a)] = reroute(pomdp.observation(s), a, row)
                rewards[(copy, a)] = mdp.reward(s, a)
        else:
            transitions[(u, a)] = reroute(pomdp.observation(u), a, row)
            rewards[(u, a)] = mdp.reward(u, a)

    obs_fn = list(pomdp.obs_fn) + [pomdp.observation(s)] * (len(pred) - 1)
    split = Pomdp(Mdp(state_names, mdp.initial, mdp.action_names, transitions, rewards), pomdp.observation_names, obs_fn)
    relation = SplitRelation(list(range(n)) + [s] * (len(pred) - 1))
    logger.debug("split state %s into %d copies", mdp.state_names[s], len(pred))
    return split, relation


def split_states(pomdp: Pomdp, states):
    """Splits each state of `states` in turn; returns the POMDP and the composed relation."""
    relation = SplitRelation.identity(pomdp.num_states)
    for s in sorted(states):
        pomdp, step = split_state(pomdp, s)
        relation = relation.then(step)
    return pomdp, relation


def check_bisimulation(a: Pomdp, b: Pomdp, relation: SplitRelation) -> bool:
    """Whether relating each state of b to its origin in a is a bisimulation.

    Related states must agree on observation name, enabled action names and rewards,
    and move to every equivalence class with the same probability.
    """
    if len(relation) != b.num_states or any(not 0 <= o < a.num_states for o in relation):
        logger.debug("relation is not total on the split model")
        return False
    if relation[b.initial] != a.initial:
        logger.debug("initial states are not related")
        return False

    for t in range(b.num_states):
        s = relation[t]
        if a.observation_names[a.observation(s)] != b.observation_names[b.observation(t)]:
            logger.debug("observation mismatch at %s", b.state_names[t])
            return False
        a_actions = {a.action_names[x]: x for x in a.enabled_actions(s)}
        b_actions = {b.action_names[x]: x for x in b.enabled_actions(t)}
        if set(a_actions) != set(b_actions):
            logger.debug("enabled actions differ at %s", b.state_names[t])
            return False
        for name, x in a_actions.items():
            y = b_actions[name]
            if abs(float(a.reward(s, x)) - float(b.reward(t, y))) > SUM_TOLERANCE:
                logger.debug("reward mismatch at %s under %s", b.state_names[t], name)
                return False
            class_mass = {}
            for target, p in b.transition(t, y).items():
                c = relation[target]
                class_mass[c] = class_mass.get(c, 0) + p
            expected = a.transition(s, x)
            for c in set(class_mass) | set(expected):
                if abs(float(class_mass.get(c, 0)) - float(expected.get(c, 0))) > SUM_TOLERANCE:
                    logger.debug("class mass mismatch at %s under %s", b.state_names[t], name)
                    return False
    return True
