import re
from fractions import Fraction

from ..errors import InvalidPolicy
from .pomdp import Pomdp


def mixture_name(action_names, members) -> str:
    """Action name of the uniform mixture over `members`, e.g. `mix(a:1/2,b:1/2)`."""
    weight = Fraction(1, len(members))
    return "mix(" + ",".join(f"{action_names[a]}:{weight}" for a in members) + ")"


class MixtureCatalog:
    """Mixture actions added by static randomization.

    mixtures maps a mixture action id to its fixed distribution over base action ids;
    by_observation lists the mixture actions added for each observation.
    """

    def __init__(self, mixtures: dict = None, by_observation: dict = None):
        self.mixtures = {a: dict(dist) for a, dist in sorted((mixtures or {}).items())}
        self.by_observation = {z: tuple(acts) for z, acts in sorted((by_observation or {}).items())}

    def is_mixture(self, a: int) -> bool:
        return a in self.mixtures

    def distribution(self, a: int) -> dict:
        if a in self.mixtures:
            return self.mixtures[a]
        return {a: Fraction(1)}

    def __len__(self) -> int:
        return len(self.mixtures)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MixtureCatalog):
            return NotImplemented
        return self.mixtures == other.mixtures and self.by_observation == other.by_observation

    def to_dict(self, pomdp: Pomdp) -> dict:
        names = pomdp.action_names
        return {
            names[a]: {names[b]: str(w) for b, w in dist.items()}
            for a, dist in self.mixtures.items()
        }


class StationaryPolicy:
    """Observation-based stationary policy: observation id -> action id.

    The chosen action may be a mixture action of the POMDP it was computed for; the
    matching MixtureCatalog resolves it to a distribution over base actions.
    """

    def __init__(self, choice: dict):
        self.choice = dict(sorted(choice.items()))

    def action_for(self, z: int) -> int:
        if z not in self.choice:
            raise InvalidPolicy(f"policy has no choice for observation {z}")
        return self.choice[z]

    def enabledness_errors(self, pomdp: Pomdp) -> list:
        errors = []
        for z in range(pomdp.num_observations):
            states = pomdp.states_with_observation(z)
            if not states:
                continue
            a = self.choice.get(z)
            if a is None:
                errors.append(f"no action chosen for observation {pomdp.observation_names[z]}")
                continue
            for s in states:
                if a not in pomdp.enabled_actions(s):
                    errors.append(
                        f"action {pomdp.action_names[a]} not enabled in {pomdp.state_names[s]} "
                        f"(observation {pomdp.observation_names[z]})"
                    )
        return errors

    def is_valid_for(self, pomdp: Pomdp) -> bool:
        return not self.enabledness_errors(pomdp)

    def __eq__(self, other) -> bool:
        if not isinstance(other, StationaryPolicy):
            return NotImplemented
        return self.choice == other.choice

    def __repr__(self) -> str:
        return f"StationaryPolicy({self.choice})"

    def to_lines(self, pomdp: Pomdp) -> list:
        """One `obs <name> -> <action>` line per observation, in observation order."""
        return [
            f"obs {pomdp.observation_names[z]} -> {pomdp.action_names[a]}"
            for z, a in self.choice.items()
        ]

    def to_dict(self, pomdp: Pomdp) -> dict:
        return {pomdp.observation_names[z]: pomdp.action_names[a] for z, a in self.choice.items()}

    @staticmethod
    def from_text(text: str, pomdp: Pomdp) -> "StationaryPolicy":
        choice = {}
        for number, raw in enumerate(text.splitlines(), start=1):
            line = re.split(r"(?:^|\s)#", raw, maxsplit=1)[0].strip()
            if not line:
                continue
            parts = line.split(None, 1)
            if parts[0] != "obs" or len(parts) < 2 or "->" not in parts[1]:
                raise InvalidPolicy(f"line {number}: expected `obs <name> -> <action>`")
            obs_name, action_name = (piece.strip() for piece in parts[1].split("->", 1))
            if not pomdp.has_observation(obs_name):
                raise InvalidPolicy(f"line {number}: unknown observation {obs_name}")
            if not pomdp.mdp.has_action(action_name):
                raise InvalidPolicy(f"line {number}: unknown action {action_name}")
            choice[pomdp.observation_index(obs_name)] = pomdp.mdp.action_index(action_name)
        policy = StationaryPolicy(choice)
        errors = policy.enabledness_errors(pomdp)
        if errors:
            raise InvalidPolicy("; ".join(errors))
        return policy
