"""Reader for the Cassandra `.pomdp` format and the reduction to deterministic observations."""
import logging
import re
from collections import deque
from fractions import Fraction

import numpy as np

from .errors import ModelSyntaxError, SemanticsError
from .models.mdp import SUM_TOLERANCE, Mdp, parse_probability
from .models.pomdp import Pomdp, fresh_name

logger = logging.getLogger(__name__)

_ENTRY_KEYWORDS = {"discount", "values", "states", "actions", "observations", "start", "T", "O", "R"}
_TOKEN = re.compile(r":|[^\s:]+")


class GeneralPomdp:
    """POMDP whose observations are drawn from obs_dist[(action, entered state)]."""

    def __init__(self, mdp: Mdp, observation_names, obs_dist: dict, discount: float = None):
        self.mdp = mdp
        self.observation_names = tuple(observation_names)
        self.obs_dist = {key: dict(row) for key, row in sorted(obs_dist.items())}
        self.discount = discount

    @property
    def num_states(self) -> int:
        return self.mdp.num_states

    @property
    def num_actions(self) -> int:
        return self.mdp.num_actions

    @property
    def num_observations(self) -> int:
        return len(self.observation_names)

    def observation_distribution(self, a: int, s: int) -> dict:
        return self.obs_dist.get((a, s), {})

    def row_errors(self) -> list:
        errors = []
        for (a, s), row in self.obs_dist.items():
            total = sum(row.values())
            if abs(float(total) - 1.0) > SUM_TOLERANCE:
                errors.append(
                    f"observation distribution sums to {float(total):g} for action "
                    f"{self.mdp.action_names[a]} in state {self.mdp.state_names[s]}"
                )
        return errors

    def __repr__(self) -> str:
        return (
            f"GeneralPomdp(states={self.num_states}, actions={self.num_actions}, "
            f"observations={self.num_observations})"
        )


def _tokenize(text: str) -> list:
    tokens = []
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0]
        tokens.extend((tok, number) for tok in _TOKEN.findall(line))
    return tokens


class _CassandraReader:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.discount = None
        self.values_sign = 1.0
        self.states = None
        self.actions = None
        self.observations = None
        self.start = None

    # Token helpers
    def _line(self) -> int:
        if self.pos < len(self.tokens):
            return self.tokens[self.pos][1]
        return self.tokens[-1][1] if self.tokens else 1

    def _peek(self, offset: int = 0):
        k = self.pos + offset
        return self.tokens[k][0] if k < len(self.tokens) else None

    def _next(self) -> str:
        if self.pos >= len(self.tokens):
            raise ModelSyntaxError(self._line(), "unexpected end of file")
        tok = self.tokens[self.pos][0]
        self.pos += 1
        return tok

    def _expect(self, expected: str) -> None:
        line = self._line()
        tok = self._next()
        if tok != expected:
            raise ModelSyntaxError(line, f"expected '{expected}', found '{tok}'")

    def _at_entry(self) -> bool:
        tok = self._peek()
        if tok not in _ENTRY_KEYWORDS:
            return False
        if self._peek(1) == ":":
            return True
        return tok == "start" and self._peek(1) in ("include", "exclude") and self._peek(2) == ":"

    def _until_entry(self) -> list:
        items = []
        while self.pos < len(self.tokens) and not self._at_entry():
            items.append(self._next())
        return items

    def _number(self, kind: str = "number"):
        line = self._line()
        tok = self._next()
        try:
            return parse_probability(tok)
        except (ValueError, ZeroDivisionError):
            raise ModelSyntaxError(line, f"expected a {kind}, found '{tok}'")

    def _ids(self, names, what: str) -> list:
        line = self._line()
        tok = self._next()
        if tok == "*":
            return list(range(len(names)))
        return self._resolve(tok, names, what, line)

    # Header
    def _name_list(self, key: str) -> list:
        line = self._line()
        items = self._until_entry()
        if len(items) == 1 and items[0].isdigit():
            return [str(i) for i in range(int(items[0]))]
        if not items:
            raise ModelSyntaxError(line, f"'{key}' needs a count or a list of names")
        return items

    def _read_start(self, mode: str) -> None:
        line = self._line()
        n = len(self._require("states", line))
        items = self._until_entry()
        dist = [Fraction(0)] * n
        if mode in ("include", "exclude"):
            chosen = set()
            for item in items:
                chosen.update(self._resolve(item, self.states, "state", line))
            if mode == "exclude":
                chosen = set(range(n)) - chosen
            for s in chosen:
                dist[s] = Fraction(1, len(chosen))
        elif items == ["uniform"] or (n == 1 and len(items) == 1):
            dist = [Fraction(1, n)] * n
        elif len(items) == 1:
            (s,) = self._resolve(items[0], self.states, "state", line)
            dist[s] = Fraction(1)
        elif len(items) == n:
            try:
                dist = [parse_probability(item) for item in items]
            except (ValueError, ZeroDivisionError):
                raise ModelSyntaxError(line, "malformed start distribution")
        else:
            raise ModelSyntaxError(line, f"start distribution needs {n} entries")
        if abs(float(sum(dist)) - 1.0) > SUM_TOLERANCE:
            raise SemanticsError(f"line {line}: start distribution sums to {float(sum(dist)):g}")
        self.start = dist

    @staticmethod
    def _resolve(token: str, names, what: str, line: int) -> list:
        if token in names:
            return [names.index(token)]
        if token.isdigit() and int(token) < len(names):
            return [int(token)]
        raise ModelSyntaxError(line, f"unknown {what} '{token}'")

    def _require(self, key: str, line: int) -> list:
        value = getattr(self, key)
        if value is None:
            raise ModelSyntaxError(line, f"'{key}' must be declared before this entry")
        return value

    # Entries
    def _values(self, count: int, line: int, keywords=()):
        if count and self._peek() in keywords:
            return self._next()
        return [self._number("probability" if keywords else "value") for _ in range(count)]

    def _read_transition(self, T, specified) -> None:
        line = self._line()
        S = len(self._require("states", line))
        acts = self._ids(self.actions, "action")
        src = dst = None
        if self._peek() == ":":
            self._next()
            src = self._ids(self.states, "state")
            if self._peek() == ":":
                self._next()
                dst = self._ids(self.states, "state")
        if dst is not None:
            (p,) = self._values(1, line)
            for a in acts:
                for s in src:
                    for t in dst:
                        T[a, s, t] = p
                    specified[a, s] = True
        elif src is not None:
            row = self._values(S, line, keywords=("uniform",))
            if row == "uniform":
                row = [Fraction(1, S)] * S
            for a in acts:
                for s in src:
                    T[a, s, :] = row
                    specified[a, s] = True
        else:
            matrix = self._values(S * S, line, keywords=("uniform", "identity"))
            for a in acts:
                for s in range(S):
                    if matrix == "uniform":
                        T[a, s, :] = [Fraction(1, S)] * S
                    elif matrix == "identity":
                        T[a, s, :] = [Fraction(int(t == s)) for t in range(S)]
                    else:
                        T[a, s, :] = matrix[s * S:(s + 1) * S]
                    specified[a, s] = True

    def _read_observation(self, O, specified) -> None:
        line = self._line()
        S = len(self._require("states", line))
        Z = len(self._require("observations", line))
        acts = self._ids(self.actions, "action")
        dst = obs = None
        if self._peek() == ":":
            self._next()
            dst = self._ids(self.states, "state")
            if self._peek() == ":":
                self._next()
                obs = self._ids(self.observations, "observation")
        if obs is not None:
            (p,) = self._values(1, line)
            for a in acts:
                for t in dst:
                    for z in obs:
                        O[a, t, z] = p
                    specified[a, t] = True
        elif dst is not None:
            row = self._values(Z, line, keywords=("uniform",))
            if row == "uniform":
                row = [Fraction(1, Z)] * Z
            for a in acts:
                for t in dst:
                    O[a, t, :] = row
                    specified[a, t] = True
        else:
            matrix = self._values(S * Z, line, keywords=("uniform",))
            for a in acts:
                for t in range(S):
                    O[a, t, :] = [Fraction(1, Z)] * Z if matrix == "uniform" else matrix[t * Z:(t + 1) * Z]
                    specified[a, t] = True

    def _read_reward(self, R) -> None:
        line = self._line()
        S = len(self._require("states", line))
        Z = len(self._require("observations", line))
        acts = self._ids(self.actions, "action")
        self._expect(":")
        src = self._ids(self.states, "state")
        dst = obs = None
        if self._peek() == ":":
            self._next()
            dst = self._ids(self.states, "state")
            if self._peek() == ":":
                self._next()
                obs = self._ids(self.observations, "observation")
        if obs is not None:
            (r,) = self._values(1, line)
            R[np.ix_(acts, src, dst, obs)] = float(r)
        elif dst is not None:
            row = [float(v) for v in self._values(Z, line)]
            for z in range(Z):
                R[np.ix_(acts, src, dst, [z])] = row[z]
        else:
            matrix = [float(v) for v in self._values(S * Z, line)]
            for t in range(S):
                for z in range(Z):
                    R[np.ix_(acts, src, [t], [z])] = matrix[t * Z + z]

    def read(self) -> GeneralPomdp:
        T = O = R = None
        t_specified = o_specified = None
        while self.pos < len(self.tokens):
            line = self._line()
            if not self._at_entry():
                raise ModelSyntaxError(line, f"unexpected token '{self._peek()}'")
            key = self._next()
            if key == "start" and self._peek() in ("include", "exclude"):
                mode = self._next()
                self._expect(":")
                self._read_start(mode)
                continue
            self._expect(":")
            if key == "discount":
                self.discount = float(self._number("discount"))
            elif key == "values":
                kind = self._next()
                if kind not in ("reward", "cost"):
                    raise ModelSyntaxError(line, f"values must be 'reward' or 'cost', found '{kind}'")
                self.values_sign = 1.0 if kind == "reward" else -1.0
            elif key in ("states", "actions", "observations"):
                setattr(self, key, self._name_list(key))
            elif key == "start":
                self._read_start("dist")
            else:
                S = len(self._require("states", line))
                A = len(self._require("actions", line))
                Z = len(self._require("observations", line))
                if T is None:
                    T = np.full((A, S, S), Fraction(0), dtype=object)
                    O = np.full((A, S, Z), Fraction(0), dtype=object)
                    R = np.zeros((A, S, S, Z))
                    t_specified = np.zeros((A, S), dtype=bool)
                    o_specified = np.zeros((A, S), dtype=bool)
                if key == "T":
                    self._read_transition(T, t_specified)
                elif key == "O":
                    self._read_observation(O, o_specified)
                else:
                    self._read_reward(R)
        for key in ("states", "actions", "observations"):
            self._require(key, self._line())
        if T is None:
            raise SemanticsError("model has no transition entries")
        return self._build(T, O, R, t_specified, o_specified)

    def _build(self, T, O, R, t_specified, o_specified) -> GeneralPomdp:
        S, A, Z = len(self.states), len(self.actions), len(self.observations)
        for a in range(A):
            for s in range(S):
                where = f"action {self.actions[a]}, state {self.states[s]}"
                if not t_specified[a, s]:
                    raise SemanticsError(f"unspecified transition row for {where}")
                total = sum(T[a, s, :])
                if abs(float(total) - 1.0) > SUM_TOLERANCE:
                    raise SemanticsError(f"transition row for {where} sums to {float(total):g}")
                if not o_specified[a, s]:
                    raise SemanticsError(f"unspecified observation row for {where}")
                total = sum(O[a, s, :])
                if abs(float(total) - 1.0) > SUM_TOLERANCE:
                    raise SemanticsError(f"observation row for {where} sums to {float(total):g}")

        # Rewards conditioned on successor/observation collapse to their expectation
        Tf = T.astype(float)
        Of = O.astype(float)
        expected = np.einsum("ast,atz,astz->sa", Tf, Of, R) * self.values_sign

        state_names = list(self.states)
        action_names = list(self.actions)
        observation_names = list(self.observations)
        transitions = {}
        rewards = {}
        obs_dist = {}
        for s in range(S):
            for a in range(A):
                transitions[(s, a)] = {t: T[a, s, t] for t in range(S) if T[a, s, t] != 0}
                rewards[(s, a)] = float(expected[s, a])
        for a in range(A):
            for t in range(S):
                obs_dist[(a, t)] = {z: O[a, t, z] for z in range(Z) if O[a, t, z] != 0}

        initial = 0
        if self.start is not None:
            support = [s for s, p in enumerate(self.start) if p != 0]
            if len(support) == 1:
                initial = support[0]
            else:
                # dispatch state: one action into the start distribution; a start state shows
                # the observation it would show when entered under the first action
                initial = S
                state_names.append(fresh_name("start", set(state_names)))
                dispatch = len(action_names)
                action_names.append(fresh_name("start", set(action_names)))
                init_obs = len(observation_names)
                observation_names.append(fresh_name("init", set(observation_names)))
                transitions[(initial, dispatch)] = {s: self.start[s] for s in support}
                rewards[(initial, dispatch)] = 0.0
                for t in range(S):
                    obs_dist[(dispatch, t)] = dict(obs_dist[(0, t)])
                for a in range(len(action_names)):
                    obs_dist[(a, initial)] = {init_obs: Fraction(1)}
                logger.debug("start distribution over %d states encoded by a dispatch state", len(support))

        mdp = Mdp(state_names, initial, action_names, transitions, rewards)
        return GeneralPomdp(mdp, observation_names, obs_dist, discount=self.discount)


def parse_cassandra(text: str) -> GeneralPomdp:
    """Parses a Cassandra `.pomdp` file; later entries override earlier ones."""
    return _CassandraReader(text).read()


def determinize_with_origin(gp: GeneralPomdp):
    """Product construction over (state, observation-on-entry) pairs.

    Returns the Pomdp and, per product state, the index of its source state. Product
    states that cannot be reached from the initial pair are dropped.
    """
    mdp = gp.mdp

    init_obs = set()
    for a in range(mdp.num_actions):
        init_obs.update(z for z, p in gp.observation_distribution(a, mdp.initial).items() if p != 0)
    if not init_obs:
        raise SemanticsError(f"initial state {mdp.state_names[mdp.initial]} has no observation")
    root = (mdp.initial, min(init_obs))

    # Breadth-first over reachable pairs keeps the numbering deterministic
    index = {root: 0}
    order = [root]
    queue = deque([root])
    rows = {}
    while queue:
        s, z = queue.popleft()
        for a in mdp.enabled_actions(s):
            row = {}
            for t, p in mdp.transition(s, a).items():
                for z2, q in sorted(gp.observation_distribution(a, t).items()):
                    if q == 0:
                        continue
                    pair = (t, z2)
                    if pair not in index:
                        index[pair] = len(order)
                        order.append(pair)
                        queue.append(pair)
                    row[index[pair]] = row.get(index[pair], 0) + p * q
            rows[(index[(s, z)], a)] = row

    used_obs = sorted({z for _, z in order})
    obs_index = {z: i for i, z in enumerate(used_obs)}
    state_names = [f"{mdp.state_names[s]}|{gp.observation_names[z]}" for s, z in order]
    rewards = {(i, a): mdp.reward(order[i][0], a) for (i, a) in rows}
    product = Mdp(state_names, 0, mdp.action_names, rows, rewards)
    pomdp = Pomdp(
        product,
        [gp.observation_names[z] for z in used_obs],
        [obs_index[z] for _, z in order],
    )
    origin = tuple(s for s, _ in order)
    logger.info("determinized %d states into %d product states", mdp.num_states, len(order))
    return pomdp, origin


def determinize_observations(gp: GeneralPomdp) -> Pomdp:
    pomdp, _ = determinize_with_origin(gp)
    return pomdp
