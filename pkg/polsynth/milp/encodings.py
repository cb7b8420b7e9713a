"""MILP encodings of reachability, discounted and total-cost specifications.

All blocks of one model share a single family of binary policy variables
sigma[z,a], one per observation and enabled action, with one choice row per
observation.
"""
import logging
import math

from ..errors import InvalidDiscount, InvalidOptions, InvalidSpecification
from ..evaluation import mdp_value_iteration
from ..graph_analysis import ReachabilityContext, preprocess_reachability
from ..models.pomdp import Pomdp
from ..models.specification import GEQ, REACH_KINDS, Specification, SpecKind, SynthesisProblem
from .model import EQ, GE, LE, MAXIMIZE, MINIMIZE, MilpModel

logger = logging.getLogger(__name__)

REACH_UPPER = "reach_upper"
REACH_LOWER = "reach_lower"
DISCOUNTED_UPPER = "discounted_upper"
DISCOUNTED_LOWER = "discounted_lower"
TOTAL_COST = "total_cost"

VMAX_FORMULA = "formula"
VMAX_MDP_VALUE = "mdp_value"

DEFAULT_COST_BOUND_FACTOR = 10.0


class EncodingBlock:
    """Variables one specification contributes to a model."""

    def __init__(self, tag: str, spec: Specification, form: str):
        self.tag = tag
        self.spec = spec
        self.form = form
        self.prob: dict = {}
        self.value: dict = {}
        self.rank: dict = {}
        self.witness: dict = {}
        self.initial = None
        self.context = None
        # reachability block guarding a total-cost block
        self.guard = None
        # cap on total-cost values
        self.bound = None

    def __repr__(self) -> str:
        return f"EncodingBlock({self.tag or 'main'}: {self.form})"


class EncodingMap:
    def __init__(self, pomdp: Pomdp, model: MilpModel):
        self.pomdp = pomdp
        self.model = model
        self.sigma: dict = {}
        self.sigma_pair: dict = {}
        self.blocks: list[EncodingBlock] = []
        self.objective_block = None
        self.vmax = None

    def sigma_for(self, z: int) -> dict:
        """{action: variable} for observation z; empty when z has no policy variables."""
        return {a: var for (zz, a), var in self.sigma.items() if zz == z}

    @property
    def observations(self) -> list:
        return sorted({z for z, _ in self.sigma})

    @property
    def main(self) -> EncodingBlock:
        return self.blocks[self.objective_block if self.objective_block is not None else 0]

    @property
    def p(self) -> dict:
        return self.main.prob

    @property
    def v(self) -> dict:
        return self.main.value

    @property
    def r(self) -> dict:
        return self.main.rank

    @property
    def t(self) -> dict:
        return self.main.witness


class _Encoder:
    def __init__(self, pomdp: Pomdp, name: str):
        self.pomdp = pomdp
        self.model = MilpModel(name)
        self.emap = EncodingMap(pomdp, self.model)

    def _state(self, s: int) -> str:
        return self.pomdp.state_names[s]

    def sigma(self, z: int) -> dict:
        existing = self.emap.sigma_for(z)
        if existing:
            return existing
        zname = self.pomdp.observation_names[z]
        family = {}
        for a in self.pomdp.observation_actions(z):
            var = self.model.add_binary(f"sigma[{zname},{self.pomdp.action_names[a]}]")
            family[a] = var
            self.emap.sigma[(z, a)] = var
            self.emap.sigma_pair[var] = (z, a)
        self.model.add_constraint({var: 1.0 for var in family.values()}, EQ, 1.0, f"choice[{zname}]")
        return family

    def reach_upper(self, tag: str, ctx: ReachabilityContext, spec: Specification) -> EncodingBlock:
        """Probability block with flow and ranking rows; values bound true probabilities from above."""
        block = EncodingBlock(tag, spec, REACH_UPPER)
        block.context = ctx
        model = self.model
        init = self.pomdp.initial
        if ctx.initial_is_irrelevant:
            block.prob[init] = model.add_variable(f"{tag}p[{self._state(init)}]", lb=0.0, ub=0.0)
            block.initial = block.prob[init]
            return block

        for s in ctx.states():
            block.prob[s] = model.add_variable(f"{tag}p[{self._state(s)}]")
        block.initial = block.prob[init]
        for t in sorted(ctx.targets):
            model.add_constraint({block.prob[t]: 1.0}, EQ, 1.0, f"{tag}target[{self._state(t)}]")

        for s in ctx.non_target_states():
            family = self.sigma(self.pomdp.observation(s))
            for a in ctx.enabled_actions(s):
                terms = {block.prob[s]: 1.0, family[a]: 1.0}
                for t, p in ctx.transition(s, a).items():
                    if t in block.prob:
                        terms[block.prob[t]] = terms.get(block.prob[t], 0.0) - float(p)
                model.add_constraint(terms, LE, 1.0, f"{tag}flow[{self._state(s)},{self.pomdp.action_names[a]}]")

        if ctx.problematic:
            epsilon = 1.0 / (len(ctx.problematic) + 1)
            for s in sorted(ctx.problematic):
                block.rank[s] = model.add_variable(f"{tag}r[{self._state(s)}]")
            for s, a in sorted(ctx.problematic_actions):
                family = self.sigma(self.pomdp.observation(s))
                successors = sorted(ctx.transition(s, a))
                for t in successors:
                    if (s, t) not in block.witness:
                        w = model.add_binary(f"{tag}t[{self._state(s)},{self._state(t)}]")
                        block.witness[(s, t)] = w
                        terms = {block.rank[s]: 1.0, w: 1.0}
                        terms[block.rank[t]] = terms.get(block.rank[t], 0.0) - 1.0
                        model.add_constraint(terms, LE, 1.0 - epsilon, f"{tag}rank[{self._state(s)},{self._state(t)}]")
                terms = {block.prob[s]: 1.0, family[a]: 1.0}
                for t in successors:
                    terms[block.witness[(s, t)]] = -1.0
                model.add_constraint(terms, LE, 1.0, f"{tag}witness[{self._state(s)},{self.pomdp.action_names[a]}]")
        return block

    def reach_lower(self, tag: str, ctx: ReachabilityContext, spec: Specification) -> EncodingBlock:
        """Probability block whose values bound true probabilities from below."""
        block = EncodingBlock(tag, spec, REACH_LOWER)
        block.context = ctx
        model = self.model
        init = self.pomdp.initial
        if ctx.initial_is_irrelevant:
            block.prob[init] = model.add_variable(f"{tag}p[{self._state(init)}]", lb=0.0, ub=0.0)
            block.initial = block.prob[init]
            return block

        for s in ctx.states():
            block.prob[s] = model.add_variable(f"{tag}p[{self._state(s)}]")
        block.initial = block.prob[init]
        for t in sorted(ctx.targets):
            model.add_constraint({block.prob[t]: 1.0}, EQ, 1.0, f"{tag}target[{self._state(t)}]")
        for s in ctx.non_target_states():
            family = self.sigma(self.pomdp.observation(s))
            for a in ctx.enabled_actions(s):
                terms = {block.prob[s]: 1.0, family[a]: -1.0}
                for t, p in ctx.transition(s, a).items():
                    if t in block.prob:
                        terms[block.prob[t]] = terms.get(block.prob[t], 0.0) - float(p)
                model.add_constraint(terms, GE, -1.0, f"{tag}flow[{self._state(s)},{self.pomdp.action_names[a]}]")
        return block

    def discounted(self, tag: str, spec: Specification, discount: float, vmax: float, upper: bool) -> EncodingBlock:
        block = EncodingBlock(tag, spec, DISCOUNTED_UPPER if upper else DISCOUNTED_LOWER)
        model = self.model
        pomdp = self.pomdp
        low_r, high_r = pomdp.mdp.reward_range()
        lo, hi = low_r / (1.0 - discount), high_r / (1.0 - discount)
        big_m = vmax if upper else (high_r - low_r) / (1.0 - discount)

        for s in range(pomdp.num_states):
            block.value[s] = model.add_variable(f"{tag}v[{self._state(s)}]", lb=lo, ub=hi)
        block.initial = block.value[pomdp.initial]
        for s in range(pomdp.num_states):
            family = self.sigma(pomdp.observation(s))
            for a in pomdp.enabled_actions(s):
                reward = float(pomdp.reward(s, a))
                terms = {block.value[s]: 1.0}
                terms[family[a]] = big_m if upper else -big_m
                for t, p in pomdp.transition(s, a).items():
                    terms[block.value[t]] = terms.get(block.value[t], 0.0) - discount * float(p)
                name = f"{tag}bellman[{self._state(s)},{pomdp.action_names[a]}]"
                if upper:
                    model.add_constraint(terms, LE, big_m + reward, name)
                else:
                    model.add_constraint(terms, GE, reward - big_m, name)
        return block

    def total_cost(self, tag: str, spec: Specification, factor: float, bound: float = None) -> EncodingBlock:
        """Expected total cost until the absorbing targets, reached with probability one.

        Values are capped at `bound` (default: factor * |S| * max cost); an infinite bound
        leaves only the reachability guard. Cost rows of states the guard does not reach
        with probability one are relaxed.
        """
        pomdp = self.pomdp
        ctx = preprocess_reachability(pomdp, spec.targets)
        guard = self.reach_upper(f"{tag}reach:", ctx, Specification(SpecKind.REACH_MAX, targets=spec.targets))
        self.model.add_constraint({guard.initial: 1.0}, GE, 1.0, f"{tag}almost_sure")

        block = EncodingBlock(tag, spec, TOTAL_COST)
        block.context = ctx
        block.guard = guard
        model = self.model
        init = pomdp.initial
        costs = [
            float(pomdp.reward(s, a))
            for s in ctx.non_target_states() for a in pomdp.enabled_actions(s)
        ]
        if any(c < 0 for c in costs):
            raise InvalidSpecification("undiscounted minimization needs nonnegative costs")
        max_cost = max(costs, default=0.0)
        upper = default_cost_bound(pomdp, max_cost, factor) if bound is None else float(bound)
        block.bound = upper

        if ctx.initial_is_irrelevant:
            block.value[init] = model.add_variable(f"{tag}v[{self._state(init)}]", lb=0.0, ub=0.0)
            block.initial = block.value[init]
            return block
        for s in ctx.states():
            block.value[s] = model.add_variable(f"{tag}v[{self._state(s)}]", lb=0.0,
                                                ub=0.0 if s in ctx.targets else upper)
        block.initial = block.value[init]
        if math.isinf(upper):
            return block

        big_m = upper + max_cost
        for s in ctx.non_target_states():
            family = self.sigma(pomdp.observation(s))
            for a in pomdp.enabled_actions(s):
                terms = {block.value[s]: 1.0, family[a]: -big_m, guard.prob[s]: -big_m}
                for t, p in pomdp.transition(s, a).items():
                    if t in block.value:
                        terms[block.value[t]] = terms.get(block.value[t], 0.0) - float(p)
                model.add_constraint(terms, GE, float(pomdp.reward(s, a)) - 2.0 * big_m,
                                     f"{tag}cost[{self._state(s)},{pomdp.action_names[a]}]")
        return block


def default_cost_bound(pomdp: Pomdp, max_cost: float, factor: float = DEFAULT_COST_BOUND_FACTOR) -> float:
    """First cap on expected total cost; the synthesis driver raises it when it may cut off policies."""
    return factor * pomdp.num_states * max_cost


def compute_vmax(pomdp: Pomdp, discount: float, mode: str = VMAX_FORMULA) -> float:
    """Big-M constant for the discounted encoding."""
    if not 0.0 < discount < 1.0:
        raise InvalidDiscount(f"discount {discount} is not in (0,1)")
    low_r, high_r = pomdp.mdp.reward_range()
    if mode == VMAX_FORMULA:
        if low_r < 0:
            return (high_r - low_r) / (1.0 - discount)
        return max(0.0, high_r) / (1.0 - discount)
    if mode == VMAX_MDP_VALUE:
        values = mdp_value_iteration(pomdp.mdp, discount)
        return max(0.0, float(values.max())) + max(0.0, -low_r) / (1.0 - discount)
    raise InvalidOptions(f"unknown vmax mode {mode}")


def build_reachability_milp(ctx: ReachabilityContext):
    spec = Specification(SpecKind.REACH_MAX, targets=ctx.targets or {ctx.pomdp.initial})
    encoder = _Encoder(ctx.pomdp, "reachability")
    block = encoder.reach_upper("", ctx, spec)
    encoder.emap.blocks.append(block)
    encoder.emap.objective_block = 0
    encoder.model.set_objective(MAXIMIZE, {block.initial: 1.0})
    return encoder.model, encoder.emap


def build_discounted_milp(pomdp: Pomdp, discount: float, vmax: float = None):
    if not 0.0 < discount < 1.0:
        raise InvalidDiscount(f"discount {discount} is not in (0,1)")
    if vmax is None:
        vmax = compute_vmax(pomdp, discount)
    spec = Specification(SpecKind.DISC_REWARD_MAX, discount=discount)
    encoder = _Encoder(pomdp, "discounted")
    block = encoder.discounted("", spec, discount, vmax, upper=True)
    encoder.emap.blocks.append(block)
    encoder.emap.objective_block = 0
    encoder.emap.vmax = vmax
    encoder.model.set_objective(MAXIMIZE, {block.initial: 1.0})
    return encoder.model, encoder.emap


def _block_tag(k: int) -> str:
    return "" if k == 0 else f"s{k + 1}:"


def stack_specifications(problem: SynthesisProblem, ctxs: dict = None, optimize: int = None,
                         vmax_mode: str = VMAX_FORMULA, cost_bound_factor: float = DEFAULT_COST_BOUND_FACTOR,
                         cost_bound: float = None):
    """One model for all specifications of problem, sharing the policy variables.

    The optimizing specification (or, with `optimize`, the spec at that index, whose own
    threshold is then left out) provides the objective; every threshold becomes a row
    on its block's initial-state variable. Without an optimizing spec, the first spec's
    quantity is optimized in its own direction.
    """
    problem.validate()
    if not problem.specs:
        raise InvalidSpecification("problem has no specification")

    explicit = optimize is not None
    if optimize is None:
        objectives = [k for k, spec in enumerate(problem.specs) if spec.is_objective]
        optimize = objectives[0] if objectives else 0
    ctxs = dict(ctxs or {})
    pomdp = problem.pomdp
    encoder = _Encoder(pomdp, "stacked")
    emap = encoder.emap

    for k, spec in enumerate(problem.specs):
        tag = _block_tag(k)
        if spec.kind in REACH_KINDS:
            ctx = ctxs.get(k) or preprocess_reachability(pomdp, spec.targets)
            if spec.maximizes:
                block = encoder.reach_upper(tag, ctx, spec)
            else:
                block = encoder.reach_lower(tag, ctx, spec)
        elif spec.kind is SpecKind.UNDISC_REWARD_MIN:
            block = encoder.total_cost(tag, spec, cost_bound_factor, cost_bound)
        else:
            vmax = compute_vmax(pomdp, spec.discount, vmax_mode)
            block = encoder.discounted(tag, spec, spec.discount, vmax, upper=spec.maximizes)
            if emap.vmax is None:
                emap.vmax = vmax
        emap.blocks.append(block)

        if spec.is_threshold and not (explicit and k == optimize):
            sense = GE if spec.op == GEQ else LE
            encoder.model.add_constraint({block.initial: 1.0}, sense, float(spec.bound), f"{tag}threshold")

    emap.objective_block = optimize
    target = problem.specs[optimize]
    encoder.model.set_objective(MAXIMIZE if target.maximizes else MINIMIZE, {emap.blocks[optimize].initial: 1.0})
    logger.info("stacked %d specification block(s): %r", len(problem.specs), encoder.model)
    return encoder.model, emap
