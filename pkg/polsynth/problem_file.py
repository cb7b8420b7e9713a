"""Native problem files and the explicit model format.

A problem file is line oriented; `#` at the start of a line or after whitespace starts a
comment (names such as `yellow#1` keep theirs):

    model cassandra <path> | model explicit <path>
    label <name> <state> [<state> ...]
    spec <kind> [<op> <bound>] [target=<label>[,<label>...]] [discount=<beta>]
    option <randomization|timeout|discount|max_iters> <value>

Explicit model lines (`observation`, `action`, `state`, `trans`, `reward`, `init`) may
also appear inline instead of a `model` line.
"""
import logging
import math
import re
from pathlib import Path

from .cassandra import determinize_with_origin, parse_cassandra
from .errors import ModelSyntaxError, SemanticsError, UnknownLabel
from .models.mdp import Mdp, format_probability, parse_probability
from .models.pomdp import Pomdp, normalize_initial
from .models.pomdp_input import validate
from .models.specification import GEQ, LEQ, Specification, SpecKind, SynthesisProblem

logger = logging.getLogger(__name__)

MODEL_KEYWORDS = ("observation", "action", "state", "trans", "reward", "init")
OPTION_TYPES = {"randomization": str, "timeout": float, "discount": float, "max_iters": int}
RANDOMIZATION_MODES = ("pure", "light", "heavy")
COMMENT = re.compile(r"(?:^|\s)#")


def _strip(raw: str) -> str:
    return COMMENT.split(raw, maxsplit=1)[0].strip()


def _probability(token: str, line: int):
    try:
        p = parse_probability(token)
    except (ValueError, ZeroDivisionError):
        raise ModelSyntaxError(line, f"bad probability {token}")
    if p < 0 or p > 1:
        raise ModelSyntaxError(line, f"probability {token} outside [0,1]")
    return p


def _real(token: str, line: int, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ModelSyntaxError(line, f"bad {what} {token}")
    if not math.isfinite(value):
        raise ModelSyntaxError(line, f"{what} must be finite")
    return value


class _ExplicitBuilder:
    """Accumulates explicit model lines; `build` checks them against the model invariants."""

    def __init__(self):
        self.observations: list[str] = []
        self.actions: list[str] = []
        self.states: list[str] = []
        self.obs_of: dict = {}
        self.rows: dict = {}
        self.rewards: dict = {}
        self.initial = None
        self.seen_lines = 0

    def _observation(self, name: str) -> None:
        if name not in self.observations:
            self.observations.append(name)

    def _action(self, name: str) -> None:
        if name not in self.actions:
            self.actions.append(name)

    def _known_state(self, name: str, line: int) -> str:
        if name not in self.obs_of:
            raise ModelSyntaxError(line, f"unknown state {name}")
        return name

    def feed(self, words: list, line: int) -> None:
        self.seen_lines += 1
        keyword = words[0]
        if keyword == "observation":
            if len(words) != 2:
                raise ModelSyntaxError(line, "expected `observation <name>`")
            self._observation(words[1])
        elif keyword == "action":
            if len(words) != 2:
                raise ModelSyntaxError(line, "expected `action <name>`")
            self._action(words[1])
        elif keyword == "state":
            if len(words) != 3 or not words[2].startswith("obs="):
                raise ModelSyntaxError(line, "expected `state <id> obs=<obs>`")
            name, obs = words[1], words[2][len("obs="):]
            if name in self.obs_of:
                raise ModelSyntaxError(line, f"state {name} declared twice")
            if not obs:
                raise ModelSyntaxError(line, "empty observation name")
            self._observation(obs)
            self.states.append(name)
            self.obs_of[name] = obs
        elif keyword == "trans":
            if len(words) != 5:
                raise ModelSyntaxError(line, "expected `trans <s> <a> <s'> <p>`")
            s = self._known_state(words[1], line)
            t = self._known_state(words[3], line)
            self._action(words[2])
            self.rows.setdefault((s, words[2]), {})[t] = _probability(words[4], line)
        elif keyword == "reward":
            if len(words) != 4:
                raise ModelSyntaxError(line, "expected `reward <s> <a> <r>`")
            s = self._known_state(words[1], line)
            self._action(words[2])
            self.rewards[(s, words[2])] = _real(words[3], line, "reward")
        elif keyword == "init":
            if len(words) != 2:
                raise ModelSyntaxError(line, "expected `init <s>`")
            self.initial = self._known_state(words[1], line)

    def build(self) -> Pomdp:
        if not self.states:
            raise SemanticsError("model declares no states")
        s_index = {name: i for i, name in enumerate(self.states)}
        a_index = {name: i for i, name in enumerate(self.actions)}
        o_index = {name: i for i, name in enumerate(self.observations)}
        for key in self.rewards:
            if key not in self.rows:
                raise SemanticsError(f"reward for ({key[0]},{key[1]}) which has no transitions")
        transitions = {
            (s_index[s], a_index[a]): {s_index[t]: p for t, p in row.items()}
            for (s, a), row in self.rows.items()
        }
        rewards = {(s_index[s], a_index[a]): self.rewards.get((s, a), 0.0) for (s, a) in self.rows}
        initial = s_index[self.initial] if self.initial is not None else 0
        mdp = Mdp(self.states, initial, self.actions, transitions, rewards)
        pomdp = Pomdp(mdp, self.observations, [o_index[self.obs_of[s]] for s in self.states])
        report = validate(pomdp)
        if report:
            raise SemanticsError("; ".join(report.errors))
        return pomdp


def parse_explicit_model(text: str) -> Pomdp:
    builder = _ExplicitBuilder()
    for number, raw in enumerate(text.splitlines(), start=1):
        line = _strip(raw)
        if not line:
            continue
        words = line.split()
        if words[0] not in MODEL_KEYWORDS:
            raise ModelSyntaxError(number, f"unexpected keyword {words[0]}")
        builder.feed(words, number)
    return builder.build()


def serialize_model(pomdp: Pomdp) -> list:
    """Explicit-format lines for pomdp, declaring observation and action order."""
    lines = [f"observation {name}" for name in pomdp.observation_names]
    lines += [f"action {name}" for name in pomdp.action_names]
    for s, name in enumerate(pomdp.state_names):
        lines.append(f"state {name} obs={pomdp.observation_names[pomdp.observation(s)]}")
    lines.append(f"init {pomdp.state_names[pomdp.initial]}")
    names = pomdp.state_names
    for (s, a), row in pomdp.mdp.transitions.items():
        action = pomdp.action_names[a]
        for t, p in row.items():
            lines.append(f"trans {names[s]} {action} {names[t]} {format_probability(p)}")
        reward = float(pomdp.reward(s, a))
        if reward != 0.0:
            lines.append(f"reward {names[s]} {action} {reward!r}")
    return lines


class _LoadedModel:
    def __init__(self, pomdp: Pomdp, source_names, origin, discount=None):
        self.pomdp = pomdp
        # names a label may use, and for each POMDP state the index of the named state it came from
        self.source_names = list(source_names)
        self.origin = list(origin)
        self.discount = discount

    def resolve(self, names, line: int) -> set:
        index = {name: i for i, name in enumerate(self.source_names)}
        wanted = set()
        for name in names:
            if name not in index:
                raise UnknownLabel(f"line {line}: unknown state {name}")
            wanted.add(index[name])
        return {s for s, o in enumerate(self.origin) if o in wanted}


def _load_model(kind: str, path: Path, line: int) -> _LoadedModel:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelSyntaxError(line, f"cannot read model {path}: {exc.strerror}")
    if kind == "explicit":
        pomdp = parse_explicit_model(text)
        return _LoadedModel(pomdp, pomdp.state_names, range(pomdp.num_states))
    if kind == "cassandra":
        general = parse_cassandra(text)
        pomdp, origin = determinize_with_origin(general)
        logger.info("determinized %s: %d states from %d", path.name, pomdp.num_states, general.num_states)
        return _LoadedModel(pomdp, general.mdp.state_names, origin, general.discount)
    raise ModelSyntaxError(line, f"unknown model kind {kind}")


def _parse_spec(words: list, line: int):
    """(kind, op, bound, label names, discount) of a `spec` line."""
    try:
        kind = SpecKind(words[1])
    except (IndexError, ValueError):
        raise ModelSyntaxError(line, "expected `spec <kind> ...` with a known kind")
    rest = words[2:]
    op = bound = None
    if rest and rest[0] in (GEQ, LEQ):
        if len(rest) < 2:
            raise ModelSyntaxError(line, "threshold operator without bound")
        op, bound = rest[0], _real(rest[1], line, "bound")
        rest = rest[2:]
    labels, discount = None, None
    for word in rest:
        key, sep, value = word.partition("=")
        if not sep or not value:
            raise ModelSyntaxError(line, f"expected key=value, got {word}")
        if key == "target":
            labels = value.split(",")
        elif key == "discount":
            discount = _real(value, line, "discount")
        else:
            raise ModelSyntaxError(line, f"unknown spec key {key}")
    return kind, op, bound, labels, discount


def _parse_option(words: list, line: int):
    if len(words) != 3 or words[1] not in OPTION_TYPES:
        raise ModelSyntaxError(line, "expected `option <" + "|".join(OPTION_TYPES) + "> <value>`")
    key, value = words[1], words[2]
    if key == "randomization":
        if value not in RANDOMIZATION_MODES:
            raise ModelSyntaxError(line, f"randomization must be one of {', '.join(RANDOMIZATION_MODES)}")
        return key, value
    try:
        parsed = OPTION_TYPES[key](value)
    except ValueError:
        raise ModelSyntaxError(line, f"bad value {value} for option {key}")
    if parsed <= 0:
        raise ModelSyntaxError(line, f"option {key} must be positive")
    return key, parsed


def parse_problem(text: str, base_dir=None) -> SynthesisProblem:
    """Parses a problem file; model paths are relative to base_dir (default: cwd)."""
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    builder = _ExplicitBuilder()
    loaded = None
    labels = {}
    raw_specs = []
    options = {}

    for number, raw in enumerate(text.splitlines(), start=1):
        line = _strip(raw)
        if not line:
            continue
        words = line.split()
        keyword = words[0]
        if keyword == "model":
            if loaded is not None:
                raise ModelSyntaxError(number, "more than one model line")
            if len(words) != 3:
                raise ModelSyntaxError(number, "expected `model <cassandra|explicit> <path>`")
            loaded = _load_model(words[1], base / words[2], number)
        elif keyword in MODEL_KEYWORDS:
            builder.feed(words, number)
        elif keyword == "label":
            if len(words) < 3:
                raise ModelSyntaxError(number, "expected `label <name> <state> ...`")
            labels[words[1]] = (words[2:], number)
        elif keyword == "spec":
            raw_specs.append((_parse_spec(words, number), number))
        elif keyword == "option":
            key, value = _parse_option(words, number)
            options[key] = value
        else:
            raise ModelSyntaxError(number, f"unexpected keyword {keyword}")

    if loaded is not None and builder.seen_lines:
        raise ModelSyntaxError(0, "both a model line and inline model lines")
    if loaded is None:
        if not builder.seen_lines:
            raise ModelSyntaxError(0, "problem has no model")
        pomdp = builder.build()
        loaded = _LoadedModel(pomdp, pomdp.state_names, range(pomdp.num_states))
    if not raw_specs:
        raise ModelSyntaxError(0, "problem has no spec line")

    resolved = {name: loaded.resolve(names, line) for name, (names, line) in labels.items()}
    pomdp = loaded.pomdp
    normalized = normalize_initial(pomdp)
    if normalized.num_states > pomdp.num_states:
        # the fresh initial state stands in for the old one
        for states in resolved.values():
            if pomdp.initial in states:
                states.add(normalized.initial)

    specs = []
    for (kind, op, bound, label_names, discount), line in raw_specs:
        targets = None
        if label_names is not None:
            targets = set()
            for name in label_names:
                if name not in resolved:
                    raise UnknownLabel(f"line {line}: unknown label {name}")
                targets |= resolved[name]
        if discount is None and kind in (SpecKind.DISC_REWARD_MAX, SpecKind.DISC_REWARD_THRESHOLD):
            discount = options.get("discount", loaded.discount)
        specs.append(Specification(kind, targets, discount, op, bound))

    problem = SynthesisProblem(normalized, specs, options)
    problem.validate()
    logger.info("parsed problem: %r", problem)
    return problem


def load_problem(path) -> SynthesisProblem:
    path = Path(path)
    return parse_problem(path.read_text(encoding="utf-8"), base_dir=path.parent)


def serialize_problem(problem: SynthesisProblem) -> str:
    """Problem text with the model written inline in explicit form."""
    pomdp = problem.pomdp
    lines = ["# generated by polsynth"]
    lines += serialize_model(pomdp)
    for k, spec in enumerate(problem.specs, start=1):
        if spec.targets is not None:
            lines.append(f"label target{k} " + " ".join(pomdp.state_names[s] for s in sorted(spec.targets)))
    for k, spec in enumerate(problem.specs, start=1):
        words = ["spec", spec.kind.value]
        if spec.is_threshold:
            words += [spec.op, repr(float(spec.bound))]
        if spec.targets is not None:
            words.append(f"target=target{k}")
        if spec.discount is not None:
            words.append(f"discount={spec.discount!r}")
        lines.append(" ".join(words))
    for key, value in problem.options.items():
        lines.append(f"option {key} {value!r}" if isinstance(value, float) else f"option {key} {value}")
    return "\n".join(lines) + "\n"
