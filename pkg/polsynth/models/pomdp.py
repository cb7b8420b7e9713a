import logging

from .mdp import Mdp

logger = logging.getLogger(__name__)


class Pomdp:
    """An MDP together with a total, deterministic observation function.

    obs_fn[s] is the index into observation_names of the observation of state s.
    """

    def __init__(self, mdp: Mdp, observation_names, obs_fn):
        self.mdp = mdp
        self.observation_names = tuple(observation_names)
        self.obs_fn = tuple(obs_fn)

        by_obs = [[] for _ in self.observation_names]
        for s, z in enumerate(self.obs_fn):
            if 0 <= z < len(by_obs):
                by_obs[z].append(s)
        self._states_by_obs = tuple(tuple(states) for states in by_obs)
        self._obs_index = {name: i for i, name in enumerate(self.observation_names)}

    # Delegates to the underlying MDP
    @property
    def num_states(self) -> int:
        return self.mdp.num_states

    @property
    def num_actions(self) -> int:
        return self.mdp.num_actions

    @property
    def num_observations(self) -> int:
        return len(self.observation_names)

    @property
    def initial(self) -> int:
        return self.mdp.initial

    @property
    def state_names(self) -> tuple:
        return self.mdp.state_names

    @property
    def action_names(self) -> tuple:
        return self.mdp.action_names

    def enabled_actions(self, s: int) -> tuple:
        return self.mdp.enabled_actions(s)

    def transition(self, s: int, a: int) -> dict:
        return self.mdp.transition(s, a)

    def reward(self, s: int, a: int) -> float:
        return self.mdp.reward(s, a)

    def observation(self, s: int) -> int:
        return self.obs_fn[s]

    def observation_index(self, name: str) -> int:
        return self._obs_index[name]

    def has_observation(self, name: str) -> bool:
        return name in self._obs_index

    def states_with_observation(self, z: int) -> tuple:
        return self._states_by_obs[z]

    def observation_actions(self, z: int) -> tuple:
        """Enabled actions of an observation class (taken from its lowest-index state)."""
        states = self._states_by_obs[z]
        if not states:
            return ()
        return self.mdp.enabled_actions(states[0])

    def is_unique_observation(self, z: int) -> bool:
        return len(self._states_by_obs[z]) == 1

    def has_incoming(self, s: int) -> bool:
        return any(s in row for row in self.mdp.transitions.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Pomdp):
            return NotImplemented
        return (
            self.mdp == other.mdp
            and self.observation_names == other.observation_names
            and self.obs_fn == other.obs_fn
        )

    def __repr__(self) -> str:
        return (
            f"Pomdp(states={self.num_states}, actions={self.num_actions}, "
            f"observations={self.num_observations})"
        )

    def to_dict(self) -> dict:
        data = self.mdp.to_dict()
        data["observations"] = list(self.observation_names)
        data["observation_of"] = {
            self.state_names[s]: self.observation_names[z] for s, z in enumerate(self.obs_fn)
        }
        return data

    @staticmethod
    def from_dict(data: dict) -> "Pomdp":
        mdp = Mdp.from_dict(data)
        observations = list(data.get("observations", []))
        o_index = {name: i for i, name in enumerate(observations)}
        obs_of = data.get("observation_of", {})
        obs_fn = [o_index[obs_of[name]] for name in mdp.state_names]
        return Pomdp(mdp, observations, obs_fn)


def fresh_name(base: str, taken) -> str:
    name = base
    k = 1
    while name in taken:
        name = f"{base}{k}"
        k += 1
    return name


def needs_initial_normalization(pomdp: Pomdp) -> bool:
    z = pomdp.observation(pomdp.initial)
    return not pomdp.is_unique_observation(z) or pomdp.has_incoming(pomdp.initial)


def normalize_initial(pomdp: Pomdp) -> Pomdp:
    """Ensures the initial state has a unique observation and no incoming transitions.

    A fresh state copying the old initial state's outgoing rows and rewards is appended
    and made initial; models that already conform are returned unchanged. An initial
    state without predecessors only needs a fresh observation.
    """
    if not needs_initial_normalization(pomdp):
        return pomdp

    if not pomdp.has_incoming(pomdp.initial):
        observations = list(pomdp.observation_names) + [fresh_name("init", set(pomdp.observation_names))]
        obs_fn = list(pomdp.obs_fn)
        obs_fn[pomdp.initial] = len(observations) - 1
        logger.info("normalized initial state: fresh observation %s", observations[-1])
        return Pomdp(pomdp.mdp, observations, obs_fn)

    mdp = pomdp.mdp
    old = mdp.initial
    new = mdp.num_states
    state_names = list(mdp.state_names) + [fresh_name(f"{mdp.state_names[old]}#init", set(mdp.state_names))]
    transitions = dict(mdp.transitions)
    rewards = dict(mdp.rewards)
    for a in mdp.enabled_actions(old):
        transitions[(new, a)] = dict(mdp.transition(old, a))
        rewards[(new, a)] = mdp.reward(old, a)

    observations = list(pomdp.observation_names) + [fresh_name("init", set(pomdp.observation_names))]
    obs_fn = list(pomdp.obs_fn) + [len(observations) - 1]
    logger.info("normalized initial state: added %s with observation %s", state_names[-1], observations[-1])
    return Pomdp(Mdp(state_names, new, mdp.action_names, transitions, rewards), observations, obs_fn)
