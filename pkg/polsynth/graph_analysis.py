"""Graph preprocessing for the reachability encoding."""
import logging

import networkx as nx

from .errors import EmptyTarget
from .models.pomdp import Pomdp

logger = logging.getLogger(__name__)


class ReachabilityContext:
    """A POMDP viewed with absorbing targets, restricted to the states that matter.

    State ids are those of the underlying POMDP. States outside `relevant` either cannot
    be reached from the initial state or cannot reach a target at all; their probability
    is the constant 0.
    """

    def __init__(self, pomdp: Pomdp, targets, relevant, problematic, problematic_actions):
        self.pomdp = pomdp
        self.targets = frozenset(targets)
        self.relevant = frozenset(relevant)
        self.problematic = frozenset(problematic)
        self.problematic_actions = frozenset(problematic_actions)

    @property
    def initial_is_irrelevant(self) -> bool:
        return self.pomdp.initial not in self.relevant

    def states(self) -> list:
        return sorted(self.relevant)

    def non_target_states(self) -> list:
        return sorted(self.relevant - self.targets)

    def enabled_actions(self, s: int) -> tuple:
        acts = self.pomdp.enabled_actions(s)
        if s in self.targets:
            return acts[:1]
        return acts

    def transition(self, s: int, a: int) -> dict:
        if s in self.targets:
            return {s: 1}
        return self.pomdp.transition(s, a)

    def __repr__(self) -> str:
        return (
            f"ReachabilityContext(relevant={len(self.relevant)}, targets={len(self.targets)}, "
            f"problematic={len(self.problematic)})"
        )


def _absorbing_graph(pomdp: Pomdp, targets) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(range(pomdp.num_states))
    for (s, a), row in pomdp.mdp.transitions.items():
        if s in targets:
            continue
        graph.add_edges_from((s, t) for t in row)
    graph.add_edges_from((t, t) for t in targets)
    return graph


def problematic_states(pomdp: Pomdp, targets) -> frozenset:
    """States on a cycle along which some scheduler of the underlying MDP avoids the targets.

    The greatest fixpoint of states that have an action keeping them inside the set is
    computed first; of those, only states lying on a cycle of the avoiding subgraph
    are returned.
    """
    targets = set(targets)
    avoiding = set(range(pomdp.num_states)) - targets

    def stays(s, a):
        return all(t in avoiding for t in pomdp.transition(s, a))

    changed = True
    while changed:
        changed = False
        for s in sorted(avoiding):
            if not any(stays(s, a) for a in pomdp.enabled_actions(s)):
                avoiding.discard(s)
                changed = True

    graph = nx.DiGraph()
    graph.add_nodes_from(avoiding)
    for s in avoiding:
        for a in pomdp.enabled_actions(s):
            if stays(s, a):
                graph.add_edges_from((s, t) for t in pomdp.transition(s, a))

    cyclic = set()
    for component in nx.strongly_connected_components(graph):
        if len(component) > 1:
            cyclic.update(component)
        else:
            (v,) = component
            if graph.has_edge(v, v):
                cyclic.add(v)
    return frozenset(cyclic)


def problematic_actions(pomdp: Pomdp, problematic) -> frozenset:
    pairs = set()
    for s in problematic:
        for a in pomdp.enabled_actions(s):
            if all(t in problematic for t in pomdp.transition(s, a)):
                pairs.add((s, a))
    return frozenset(pairs)


def preprocess_reachability(pomdp: Pomdp, targets) -> ReachabilityContext:
    targets = frozenset(targets)
    if not targets:
        raise EmptyTarget("reachability needs at least one target state")

    graph = _absorbing_graph(pomdp, targets)
    forward = nx.descendants(graph, pomdp.initial) | {pomdp.initial}
    backward = set(targets)
    for t in targets:
        backward |= nx.ancestors(graph, t)
    relevant = forward & backward

    if pomdp.initial not in relevant:
        logger.info("initial state cannot reach the targets; value is 0")
        return ReachabilityContext(pomdp, targets, (), (), ())

    problematic = problematic_states(pomdp, targets) & relevant
    actions = problematic_actions(pomdp, problematic)
    logger.debug(
        "reachability context: %d of %d states relevant, %d problematic",
        len(relevant), pomdp.num_states, len(problematic),
    )
    return ReachabilityContext(pomdp, targets & relevant, relevant, problematic, actions)


def pre_observation_map(pomdp: Pomdp) -> list:
    """pred(s) for every state at once, as a list of frozensets of (observation, action)."""
    pred = [set() for _ in range(pomdp.num_states)]
    for (s, a), row in pomdp.mdp.transitions.items():
        z = pomdp.observation(s)
        for t in row:
            pred[t].add((z, a))
    return [frozenset(p) for p in pred]


def pre_observations(pomdp: Pomdp, s: int) -> frozenset:
    return frozenset(
        (pomdp.observation(src), a)
        for (src, a), row in pomdp.mdp.transitions.items()
        if s in row
    )
