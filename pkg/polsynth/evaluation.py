"""Policy evaluation oracles: induced chains, exact linear solves and value iteration."""
import itertools
import logging
import math
from collections import deque

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvalidDiscount, InvalidPolicy, SingularSystem, TooManyPolicies
from .models.mdp import Dtmc, Mdp
from .models.policy import MixtureCatalog, StationaryPolicy
from .models.pomdp import Pomdp
from .models.specification import DISCOUNTED_KINDS, REACH_KINDS, Specification

logger = logging.getLogger(__name__)

BRUTE_FORCE_LIMIT = 10 ** 6
# systems up to this size are solved densely
DENSE_LIMIT = 400
RESIDUAL_TOLERANCE = 1e-10


def _choice_distribution(pomdp: Pomdp, s: int, a: int, catalog: MixtureCatalog) -> dict:
    if a in pomdp.enabled_actions(s):
        return {a: 1}
    if catalog.is_mixture(a) and all(b in pomdp.enabled_actions(s) for b in catalog.distribution(a)):
        return catalog.distribution(a)
    raise InvalidPolicy(
        f"action {a} is not enabled in {pomdp.state_names[s]} "
        f"(observation {pomdp.observation_names[pomdp.observation(s)]})"
    )


def induce_dtmc(pomdp: Pomdp, policy: StationaryPolicy, catalog: MixtureCatalog = None) -> Dtmc:
    catalog = catalog or MixtureCatalog()
    rows = []
    rewards = []
    for s in range(pomdp.num_states):
        a = policy.action_for(pomdp.observation(s))
        row = {}
        reward = 0.0
        for b, weight in _choice_distribution(pomdp, s, a, catalog).items():
            for t, p in pomdp.transition(s, b).items():
                row[t] = row.get(t, 0) + weight * p
            reward += float(weight) * pomdp.reward(s, b)
        rows.append(row)
        rewards.append(reward)
    return Dtmc(pomdp.state_names, pomdp.initial, rows, rewards)


def _matrix(dtmc: Dtmc):
    data, indices, indptr = [], [], [0]
    for row in dtmc.transitions:
        for t, p in sorted(row.items()):
            indices.append(t)
            data.append(float(p))
        indptr.append(len(indices))
    n = dtmc.num_states
    return sp.csr_matrix((data, indices, indptr), shape=(n, n))


def _solve(system, rhs: np.ndarray) -> np.ndarray:
    """Direct solve of a square sparse system; dense elimination for small sizes."""
    if rhs.size == 0:
        return rhs
    try:
        if rhs.size <= DENSE_LIMIT:
            x = np.linalg.solve(system.toarray(), rhs)
        else:
            x = spla.spsolve(system.tocsc(), rhs)
    except (np.linalg.LinAlgError, RuntimeError) as exc:
        raise SingularSystem(str(exc)) from exc
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(x)):
        raise SingularSystem("linear system has no unique solution")
    residual = np.max(np.abs(system @ x - rhs))
    if residual > 1e-6:
        raise SingularSystem(f"residual {residual:g} after direct solve")
    if residual > RESIDUAL_TOLERANCE:
        logger.debug("direct solve residual %g", residual)
    return x


def _backward_closure(transitions, sources) -> set:
    """States with a path into `sources` (graph-theoretic, probabilities ignored)."""
    preds = [[] for _ in transitions]
    for s, row in enumerate(transitions):
        for t, p in row.items():
            if p != 0:
                preds[t].append(s)
    seen = set(sources)
    queue = deque(seen)
    while queue:
        t = queue.popleft()
        for s in preds[t]:
            if s not in seen:
                seen.add(s)
                queue.append(s)
    return seen


def eval_reachability(dtmc: Dtmc, targets) -> np.ndarray:
    targets = set(targets)
    x = np.zeros(dtmc.num_states)
    x[sorted(targets)] = 1.0
    unknown = sorted(_backward_closure(dtmc.transitions, targets) - targets)
    if not unknown:
        return x
    P = _matrix(dtmc)
    P_uu = P[unknown][:, unknown]
    b = np.asarray(P[unknown][:, sorted(targets)].sum(axis=1)).ravel()
    x[unknown] = _solve(sp.identity(len(unknown), format="csr") - P_uu, b)
    return np.clip(x, 0.0, 1.0)


def eval_discounted(dtmc: Dtmc, discount: float) -> np.ndarray:
    if not 0.0 < discount < 1.0:
        raise InvalidDiscount(f"discount {discount} is not in (0,1)")
    P = _matrix(dtmc)
    R = np.array(dtmc.rewards, dtype=float)
    return _solve(sp.identity(dtmc.num_states, format="csr") - discount * P, R)


def eval_total_reward(dtmc: Dtmc, absorbing) -> np.ndarray:
    """Expected total reward until the absorbing set; infinite where it is not reached surely."""
    absorbing = set(absorbing)
    reach = eval_reachability(dtmc, absorbing)
    v = np.zeros(dtmc.num_states)
    sure = [s for s in range(dtmc.num_states) if s not in absorbing and reach[s] >= 1.0 - 1e-9]
    for s in range(dtmc.num_states):
        if s not in absorbing and reach[s] < 1.0 - 1e-9:
            v[s] = math.inf
    if sure:
        P = _matrix(dtmc)
        R = np.array(dtmc.rewards, dtype=float)
        P_ss = P[sure][:, sure]
        v[sure] = _solve(sp.identity(len(sure), format="csr") - P_ss, R[sure])
    return v


def _pair_matrices(mdp: Mdp):
    pairs = list(mdp.transitions)
    data, indices, indptr = [], [], [0]
    for key in pairs:
        for t, p in sorted(mdp.transitions[key].items()):
            indices.append(t)
            data.append(float(p))
        indptr.append(len(indices))
    P = sp.csr_matrix((data, indices, indptr), shape=(len(pairs), mdp.num_states))
    R = np.array([mdp.reward(s, a) for s, a in pairs], dtype=float)
    owners = np.array([s for s, _ in pairs], dtype=int)
    starts = np.flatnonzero(np.r_[True, owners[1:] != owners[:-1]])
    return P, R, owners, starts


def mdp_value_iteration(mdp: Mdp, discount: float, residual: float = 1e-9, max_iterations: int = 1_000_000) -> np.ndarray:
    """Optimal discounted values of the underlying MDP by Bellman iteration."""
    if not 0.0 < discount < 1.0:
        raise InvalidDiscount(f"discount {discount} is not in (0,1)")
    P, R, owners, starts = _pair_matrices(mdp)
    v = np.zeros(mdp.num_states)
    for iteration in range(max_iterations):
        q = R + discount * (P @ v)
        updated = np.full(mdp.num_states, -math.inf)
        updated[owners[starts]] = np.maximum.reduceat(q, starts)
        change = np.max(np.abs(updated - v)) if v.size else 0.0
        v = updated
        if discount / (1.0 - discount) * change <= residual:
            logger.debug("value iteration converged after %d sweeps", iteration + 1)
            break
    return v


def mdp_max_reachability(mdp: Mdp, targets, tolerance: float = 1e-12, max_iterations: int = 1_000_000) -> np.ndarray:
    """Maximal reachability probabilities of the underlying MDP, iterated from below."""
    targets = set(targets)
    successors = [dict() for _ in range(mdp.num_states)]
    for (s, a), row in mdp.transitions.items():
        for t, p in row.items():
            successors[s][t] = p
    relevant = _backward_closure(successors, targets)
    P, _, owners, starts = _pair_matrices(mdp)
    x = np.zeros(mdp.num_states)
    x[sorted(targets)] = 1.0
    fixed = np.array([s in targets or s not in relevant for s in range(mdp.num_states)])
    for _ in range(max_iterations):
        q = P @ x
        updated = np.zeros(mdp.num_states)
        updated[owners[starts]] = np.maximum.reduceat(q, starts)
        updated[fixed] = x[fixed]
        change = np.max(np.abs(updated - x)) if x.size else 0.0
        x = updated
        if change <= tolerance:
            break
    return x


def evaluate_specification(pomdp: Pomdp, spec: Specification, policy: StationaryPolicy,
                           catalog: MixtureCatalog = None) -> float:
    """Value of spec's quantity at the initial state under policy."""
    dtmc = induce_dtmc(pomdp, policy, catalog)
    if spec.kind in REACH_KINDS:
        values = eval_reachability(dtmc, spec.targets)
    elif spec.kind in DISCOUNTED_KINDS:
        values = eval_discounted(dtmc, spec.discount)
    else:
        values = eval_total_reward(dtmc, spec.targets)
    return float(values[pomdp.initial])


def policy_choices(pomdp: Pomdp, catalog: MixtureCatalog = None) -> dict:
    """Selectable actions per nonempty observation."""
    catalog = catalog or MixtureCatalog()
    choices = {}
    for z in range(pomdp.num_observations):
        if not pomdp.states_with_observation(z):
            continue
        acts = list(pomdp.observation_actions(z))
        acts.extend(a for a in catalog.by_observation.get(z, ()) if a not in acts)
        choices[z] = acts
    return choices


def enumerate_policies_bruteforce(pomdp: Pomdp, spec: Specification, catalog: MixtureCatalog = None):
    """Exact optimum over all stationary policies, by exhaustive evaluation.

    Returns (best value, best policy); the first optimal policy in enumeration order wins.
    """
    choices = policy_choices(pomdp, catalog)
    count = math.prod(len(acts) for acts in choices.values())
    if count > BRUTE_FORCE_LIMIT:
        raise TooManyPolicies(f"{count} stationary policies exceed the limit of {BRUTE_FORCE_LIMIT}")

    maximize = spec.maximizes
    observations = list(choices)
    best_value, best_policy = None, None
    for combination in itertools.product(*(choices[z] for z in observations)):
        policy = StationaryPolicy(dict(zip(observations, combination)))
        value = evaluate_specification(pomdp, spec, policy, catalog)
        if best_value is None or (value > best_value if maximize else value < best_value):
            best_value, best_policy = value, policy
    logger.debug("enumerated %d policies, best %.9g", count, best_value)
    return best_value, best_policy
