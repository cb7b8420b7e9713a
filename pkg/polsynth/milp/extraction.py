import logging

from ..errors import NoIncumbent, NonIntegralPolicy
from ..models.policy import StationaryPolicy
from .branch_and_bound import SolveResult
from .encodings import EncodingMap

logger = logging.getLogger(__name__)


def extract_policy(result: SolveResult, emap: EncodingMap, tol: float = 1e-6) -> StationaryPolicy:
    """Reads the chosen action of every observation off the sigma variables.

    Observations that received no policy variables (none of their states matter to any
    block) take their lowest enabled action.
    """
    if not result.has_incumbent:
        raise NoIncumbent(f"solver finished with status {result.status} and no incumbent")
    pomdp = emap.pomdp
    values = result.assignment.values
    choice = {}
    for z in range(pomdp.num_observations):
        acts = pomdp.observation_actions(z)
        if not acts:
            continue
        family = emap.sigma_for(z)
        if not family:
            choice[z] = acts[0]
            continue
        chosen = [a for a, var in family.items() if values[emap.model.variables[var].name] >= 1.0 - tol]
        if len(chosen) != 1:
            raise NonIntegralPolicy(
                f"observation {pomdp.observation_names[z]} selects {len(chosen)} actions"
            )
        choice[z] = chosen[0]
    logger.debug("extracted policy over %d observations", len(choice))
    return StationaryPolicy(choice)
