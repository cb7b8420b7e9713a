import math
from enum import Enum

from ..errors import ConflictingSpecs, InvalidSpecification
from .pomdp import Pomdp


class SpecKind(Enum):
    REACH_MAX = "reach_max"
    REACH_THRESHOLD = "reach_threshold"
    DISC_REWARD_MAX = "disc_reward_max"
    DISC_REWARD_THRESHOLD = "disc_reward_threshold"
    UNDISC_REWARD_MIN = "undisc_reward_min"


REACH_KINDS = {SpecKind.REACH_MAX, SpecKind.REACH_THRESHOLD}
DISCOUNTED_KINDS = {SpecKind.DISC_REWARD_MAX, SpecKind.DISC_REWARD_THRESHOLD}
THRESHOLD_KINDS = {SpecKind.REACH_THRESHOLD, SpecKind.DISC_REWARD_THRESHOLD}
OPTIMIZING_KINDS = {SpecKind.REACH_MAX, SpecKind.DISC_REWARD_MAX, SpecKind.UNDISC_REWARD_MIN}

GEQ = ">="
LEQ = "<="


class Specification:
    def __init__(self, kind: SpecKind, targets=None, discount: float = None,
                 op: str = None, bound: float = None):
        self.kind = kind
        self.targets = frozenset(targets) if targets is not None else None
        self.discount = discount
        self.op = op
        self.bound = bound
        self.errors: list[str] = []

    def validate(self) -> bool:
        """Checks the field invariants; fills self.errors and returns True when well-formed."""
        self.errors = []
        needs_targets = self.kind in REACH_KINDS or self.kind is SpecKind.UNDISC_REWARD_MIN
        if needs_targets and not self.targets:
            self.errors.append(f"{self.kind.value} needs a nonempty target set")
        if not needs_targets and self.targets is not None:
            self.errors.append(f"{self.kind.value} takes no target set")
        if self.kind in DISCOUNTED_KINDS:
            if self.discount is None or not (0.0 < self.discount < 1.0):
                self.errors.append(f"{self.kind.value} needs a discount in (0,1)")
        elif self.discount is not None:
            self.errors.append(f"{self.kind.value} takes no discount")
        if self.kind in THRESHOLD_KINDS:
            if self.op not in (GEQ, LEQ):
                self.errors.append(f"threshold operator must be {GEQ} or {LEQ}")
            if self.bound is None or not math.isfinite(self.bound):
                self.errors.append("threshold bound must be finite")
        return len(self.errors) == 0

    @property
    def is_threshold(self) -> bool:
        return self.kind in THRESHOLD_KINDS

    @property
    def is_objective(self) -> bool:
        return self.kind in OPTIMIZING_KINDS

    @property
    def maximizes(self) -> bool:
        """Direction in which this spec's quantity is optimized."""
        if self.kind is SpecKind.UNDISC_REWARD_MIN:
            return False
        if self.is_threshold:
            return self.op == GEQ
        return True

    def is_met_by(self, value: float, tol: float = 1e-9) -> bool:
        if not self.is_threshold:
            return True
        if self.op == GEQ:
            return value >= self.bound - tol
        return value <= self.bound + tol

    def key(self) -> tuple:
        targets = tuple(sorted(self.targets)) if self.targets is not None else None
        return (self.kind.value, targets, self.discount, self.op, self.bound)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Specification):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def describe(self, pomdp: Pomdp = None) -> str:
        parts = [self.kind.value]
        if self.is_threshold:
            parts.append(f"{self.op} {self.bound:g}")
        if self.targets is not None:
            if pomdp is not None:
                names = [pomdp.state_names[s] for s in sorted(self.targets)]
                shown = ",".join(names[:4]) + (",..." if len(names) > 4 else "")
            else:
                shown = f"{len(self.targets)} states"
            parts.append(f"target={{{shown}}}")
        if self.discount is not None:
            parts.append(f"discount={self.discount:g}")
        return " ".join(parts)

    def __repr__(self) -> str:
        return f"Specification({self.describe()})"


class SynthesisProblem:
    """A POMDP plus an ordered list of specifications; at most one optimizing spec."""

    def __init__(self, pomdp: Pomdp, specs, options: dict = None):
        self.pomdp = pomdp
        self.specs = tuple(specs)
        self.options = dict(options or {})

    def validate(self) -> None:
        objectives = [spec for spec in self.specs if spec.is_objective]
        if len(objectives) > 1:
            raise ConflictingSpecs(
                "at most one maximize/minimize specification is allowed, got "
                + ", ".join(spec.kind.value for spec in objectives)
            )
        for spec in self.specs:
            if not spec.validate():
                raise InvalidSpecification("; ".join(spec.errors))
            if spec.targets is not None and any(not 0 <= s < self.pomdp.num_states for s in spec.targets):
                raise InvalidSpecification(f"{spec.kind.value}: target state out of range")

    @property
    def objective(self):
        for spec in self.specs:
            if spec.is_objective:
                return spec
        return None

    @property
    def thresholds(self) -> tuple:
        return tuple(spec for spec in self.specs if spec.is_threshold)

    @property
    def is_multi_objective(self) -> bool:
        return len(self.specs) > 1

    def with_pomdp(self, pomdp: Pomdp, relation=None) -> "SynthesisProblem":
        """Same specifications over a refined POMDP; targets are pulled back through relation."""
        if relation is None:
            return SynthesisProblem(pomdp, self.specs, self.options)
        specs = []
        for spec in self.specs:
            targets = spec.targets
            if targets is not None:
                targets = {t for t, origin in enumerate(relation) if origin in spec.targets}
            specs.append(Specification(spec.kind, targets, spec.discount, spec.op, spec.bound))
        return SynthesisProblem(pomdp, specs, self.options)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SynthesisProblem):
            return NotImplemented
        return self.pomdp == other.pomdp and self.specs == other.specs and self.options == other.options

    def __repr__(self) -> str:
        return f"SynthesisProblem({self.pomdp!r}, specs={list(self.specs)})"
