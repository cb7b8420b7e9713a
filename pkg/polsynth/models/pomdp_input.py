from collections import deque

from .mdp import SUM_TOLERANCE
from .pomdp import Pomdp


class ValidationReport:
    def __init__(self, errors=None):
        self.errors: list[str] = list(errors or [])

    def __bool__(self) -> bool:
        # truthy when something is wrong, so `if report:` reads naturally
        return bool(self.errors)

    def __len__(self) -> int:
        return len(self.errors)

    def __iter__(self):
        return iter(self.errors)

    def to_dict(self) -> dict:
        return {"valid": not self.errors, "errors": list(self.errors)}


class PomdpInput:
    """Collects every violated model invariant instead of stopping at the first one."""

    def __init__(self, pomdp: Pomdp):
        self.pomdp = pomdp
        self.errors: list[str] = []

    def validating_initial(self) -> bool:
        if not 0 <= self.pomdp.initial < self.pomdp.num_states:
            self.errors.append(f"initial state {self.pomdp.initial} is not a state")
        return len(self.errors) == 0

    def validating_distributions(self) -> bool:
        mdp = self.pomdp.mdp
        for (s, a), row in mdp.transitions.items():
            where = f"({self._state(s)},{self._action(a)})"
            if any(p < 0 for p in row.values()):
                self.errors.append(f"negative probability at {where}")
            if any(not 0 <= t < mdp.num_states for t in row):
                self.errors.append(f"successor out of range at {where}")
            total = sum(row.values())
            if abs(float(total) - 1.0) > SUM_TOLERANCE:
                self.errors.append(f"distribution sum {float(total):g} at {where}")
        return len(self.errors) == 0

    def validating_rewards(self) -> bool:
        mdp = self.pomdp.mdp
        for key in mdp.rewards:
            if key not in mdp.transitions:
                s, a = key
                self.errors.append(f"reward defined outside the transition domain at ({self._state(s)},{self._action(a)})")
        for key in mdp.transitions:
            if key not in mdp.rewards:
                s, a = key
                self.errors.append(f"missing reward at ({self._state(s)},{self._action(a)})")
        return len(self.errors) == 0

    def validating_enabled_actions(self) -> bool:
        for s in range(self.pomdp.num_states):
            if not self.pomdp.enabled_actions(s):
                self.errors.append(f"state {self._state(s)} has no enabled action")
        return len(self.errors) == 0

    def validating_observations(self) -> bool:
        pomdp = self.pomdp
        if len(pomdp.obs_fn) != pomdp.num_states:
            self.errors.append("observation function is not total on the states")
            return False
        for s, z in enumerate(pomdp.obs_fn):
            if not 0 <= z < pomdp.num_observations:
                self.errors.append(f"state {self._state(s)} has an unknown observation {z}")
        for z in range(pomdp.num_observations):
            states = pomdp.states_with_observation(z)
            action_sets = {pomdp.enabled_actions(s) for s in states}
            if len(action_sets) > 1:
                shown = " vs ".join(
                    "{" + ",".join(self._action(a) for a in acts) + "}" for acts in sorted(action_sets)
                )
                self.errors.append(
                    f"states sharing observation {pomdp.observation_names[z]} enable different actions: {shown}"
                )
        return len(self.errors) == 0

    def validating_reachability(self) -> bool:
        pomdp = self.pomdp
        if not 0 <= pomdp.initial < pomdp.num_states:
            return False
        seen = {pomdp.initial}
        queue = deque([pomdp.initial])
        while queue:
            s = queue.popleft()
            for a in pomdp.enabled_actions(s):
                for t in pomdp.transition(s, a):
                    if t not in seen and 0 <= t < pomdp.num_states:
                        seen.add(t)
                        queue.append(t)
        for s in range(pomdp.num_states):
            if s not in seen:
                self.errors.append(f"state {self._state(s)} is unreachable from the initial state")
        return len(self.errors) == 0

    def validate(self) -> bool:
        """
        Runs all validation checks and returns True if valid
        """
        self.validating_initial()
        self.validating_distributions()
        self.validating_rewards()
        self.validating_enabled_actions()
        self.validating_observations()
        self.validating_reachability()
        return len(self.errors) == 0

    def _state(self, s: int) -> str:
        names = self.pomdp.state_names
        return names[s] if 0 <= s < len(names) else str(s)

    def _action(self, a: int) -> str:
        names = self.pomdp.action_names
        return names[a] if 0 <= a < len(names) else str(a)


def validate(pomdp: Pomdp) -> ValidationReport:
    checker = PomdpInput(pomdp)
    checker.validate()
    return ValidationReport(checker.errors)
