from fractions import Fraction

# Distribution sums are checked against this tolerance everywhere
SUM_TOLERANCE = 1e-9


def format_probability(p) -> str:
    """Text form of a probability: exact `a/b` for rationals, `repr` for doubles."""
    if isinstance(p, Fraction):
        return str(p.numerator) if p.denominator == 1 else f"{p.numerator}/{p.denominator}"
    return repr(float(p))


def parse_probability(token: str):
    """Parses `a/b`, a decimal literal or a float.

    Decimal literals with at most 9 fractional digits become exact rationals so that
    row sums of small hand-written models can be checked exactly.
    """
    token = token.strip()
    if "/" in token:
        num, den = token.split("/", 1)
        return Fraction(int(num), int(den))
    if "e" not in token.lower():
        fractional = token.split(".", 1)[1] if "." in token else ""
        if len(fractional) <= 9:
            return Fraction(token)
    return float(token)


class Mdp:
    """Finite MDP with a partial transition function over integer state/action ids.

    transitions maps (state, action) to {successor: probability}; the pairs present
    define which actions are enabled. Instances are never mutated after construction.
    """

    def __init__(self, state_names, initial: int, action_names, transitions: dict, rewards: dict):
        self.state_names = tuple(state_names)
        self.initial = initial
        self.action_names = tuple(action_names)
        self.transitions = {
            key: {t: p for t, p in row.items() if p != 0}
            for key, row in sorted(transitions.items())
        }
        self.rewards = dict(sorted(rewards.items()))

        enabled = [[] for _ in self.state_names]
        for (s, a) in self.transitions:
            if 0 <= s < len(enabled):
                enabled[s].append(a)
        self._enabled = tuple(tuple(sorted(acts)) for acts in enabled)
        self._state_index = {name: i for i, name in enumerate(self.state_names)}
        self._action_index = {name: i for i, name in enumerate(self.action_names)}

    @property
    def num_states(self) -> int:
        return len(self.state_names)

    @property
    def num_actions(self) -> int:
        return len(self.action_names)

    def enabled_actions(self, s: int) -> tuple:
        return self._enabled[s]

    def transition(self, s: int, a: int) -> dict:
        return self.transitions.get((s, a), {})

    def probability(self, s: int, a: int, t: int):
        return self.transitions.get((s, a), {}).get(t, 0)

    def successors(self, s: int, a: int) -> tuple:
        return tuple(sorted(self.transitions.get((s, a), {})))

    def reward(self, s: int, a: int) -> float:
        return self.rewards.get((s, a), 0.0)

    def state_index(self, name: str) -> int:
        return self._state_index[name]

    def action_index(self, name: str) -> int:
        return self._action_index[name]

    def has_state(self, name: str) -> bool:
        return name in self._state_index

    def has_action(self, name: str) -> bool:
        return name in self._action_index

    def reward_range(self):
        values = [self.reward(s, a) for (s, a) in self.transitions]
        if not values:
            return 0.0, 0.0
        return float(min(values)), float(max(values))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Mdp):
            return NotImplemented
        return (
            self.state_names == other.state_names
            and self.initial == other.initial
            and self.action_names == other.action_names
            and self.transitions == other.transitions
            and {k: float(v) for k, v in self.rewards.items()}
            == {k: float(v) for k, v in other.rewards.items()}
        )

    def __repr__(self) -> str:
        return f"Mdp(states={self.num_states}, actions={self.num_actions}, pairs={len(self.transitions)})"

    def to_dict(self) -> dict:
        """Convert the MDP to a JSON-friendly dictionary keyed by names."""
        return {
            "states": list(self.state_names),
            "initial": self.state_names[self.initial],
            "actions": list(self.action_names),
            "transitions": [
                {
                    "state": self.state_names[s],
                    "action": self.action_names[a],
                    "successors": {self.state_names[t]: format_probability(p) for t, p in row.items()},
                    "reward": float(self.reward(s, a)),
                }
                for (s, a), row in self.transitions.items()
            ],
        }

    @staticmethod
    def from_dict(data: dict) -> "Mdp":
        states = list(data.get("states", []))
        actions = list(data.get("actions", []))
        s_index = {name: i for i, name in enumerate(states)}
        a_index = {name: i for i, name in enumerate(actions)}
        transitions = {}
        rewards = {}
        for entry in data.get("transitions", []):
            key = (s_index[entry["state"]], a_index[entry["action"]])
            transitions[key] = {
                s_index[t]: parse_probability(str(p)) for t, p in entry.get("successors", {}).items()
            }
            rewards[key] = float(entry.get("reward", 0.0))
        return Mdp(states, s_index[data["initial"]], actions, transitions, rewards)


class Dtmc:
    """Markov chain induced by fixing a stationary policy; rows indexed like the POMDP's states."""

    def __init__(self, state_names, initial: int, transitions, rewards):
        self.state_names = tuple(state_names)
        self.initial = initial
        self.transitions = tuple(dict(row) for row in transitions)
        self.rewards = tuple(float(r) for r in rewards)

    @property
    def num_states(self) -> int:
        return len(self.state_names)

    def row_errors(self) -> list:
        errors = []
        for s, row in enumerate(self.transitions):
            total = sum(row.values())
            if abs(float(total) - 1.0) > SUM_TOLERANCE:
                errors.append(f"distribution sum {float(total):g} at {self.state_names[s]}")
        return errors

    def __repr__(self) -> str:
        return f"Dtmc(states={self.num_states})"
