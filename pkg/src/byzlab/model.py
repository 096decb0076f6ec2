"""Agents, fault classes, scenarios and transcripts.

Everything here is an immutable value object. Scenarios are loaded from
and written to a small JSON format; see :func:`scenario_from_dict`.
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping

SILENCE = "silence"

# Message symbols. OM carries the bits "0"/"1"; the attack protocols carry
# ATTACK, and GARBLED is what a corrupting device turns an ATTACK into.
ATTACK = "attack"
GARBLED = "garbled"
OM_ALPHABET = ("0", "1")
ATTACK_ALPHABET = (ATTACK, GARBLED)


class ScenarioError(ValueError):
    """Base class for scenario parse/validation failures."""


class InvalidChannel(ScenarioError):
    pass


class ClassNotAllowed(ScenarioError):
    pass


class BadParameter(ScenarioError):
    pass


class FaultClass(str, Enum):
    CORRUPT = "corrupt"  # m/m'
    DROP = "drop"  # m/phi
    SPURIOUS = "spurious"  # phi/m'


ALL_CLASSES = frozenset(FaultClass)
CLASS_ORDER = (FaultClass.CORRUPT, FaultClass.DROP, FaultClass.SPURIOUS)


class Decision(str, Enum):
    ATTACK = "attack"
    RETREAT = "retreat"


class ProtocolKind(str, Enum):
    OM = "om"
    ONE_ROUND_MM = "one_round_mm"
    MKN = "mkn"

    @property
    def alphabet(self) -> tuple[str, ...]:
        return OM_ALPHABET if self is ProtocolKind.OM else ATTACK_ALPHABET

    @property
    def admissible_classes(self) -> frozenset[FaultClass]:
        if self is ProtocolKind.OM:
            return ALL_CLASSES
        if self is ProtocolKind.ONE_ROUND_MM:
            return frozenset({FaultClass.CORRUPT})
        return frozenset({FaultClass.CORRUPT, FaultClass.DROP})

    @property
    def decisions(self) -> tuple:
        """Decision domain in canonical enumeration order."""
        if self is ProtocolKind.OM:
            return (0, 1)
        return (Decision.RETREAT, Decision.ATTACK)

    def horizon(self, bound: int) -> int:
        return 1 if self is ProtocolKind.ONE_ROUND_MM else bound + 1


def sort_classes(classes: Iterable[FaultClass]) -> list[FaultClass]:
    classes = set(classes)
    return [c for c in CLASS_ORDER if c in classes]


def class_maps(kind: FaultClass, alphabet: tuple[str, ...]) -> list[dict[str, str]]:
    """Every total map on ``alphabet + silence`` consistent with ``kind``.

    Corrupt changes every message into a different message, Drop silences
    every message, Spurious turns silence into some message. All three are
    the identity outside their domain.
    """
    ident = {s: s for s in alphabet}
    if kind is FaultClass.DROP:
        return [{**{s: SILENCE for s in alphabet}, SILENCE: SILENCE}]
    if kind is FaultClass.SPURIOUS:
        return [{**ident, SILENCE: s} for s in alphabet]
    return [{**m, SILENCE: SILENCE} for m in _maps_without_fixed_points(alphabet)]


def _maps_without_fixed_points(alphabet: tuple[str, ...]) -> list[dict[str, str]]:
    result = []
    for images in itertools.product(alphabet, repeat=len(alphabet)):
        if all(a != b for a, b in zip(alphabet, images)):
            result.append(dict(zip(alphabet, images)))
    return result


def map_matches_class(mapping: Mapping[str, str], kind: FaultClass, alphabet) -> bool:
    domain = set(alphabet) | {SILENCE}
    if set(mapping) != domain or not set(mapping.values()) <= domain:
        return False
    if kind is FaultClass.CORRUPT:
        return mapping[SILENCE] == SILENCE and all(
            mapping[s] != s and mapping[s] != SILENCE for s in alphabet
        )
    if kind is FaultClass.DROP:
        return all(mapping[s] == SILENCE for s in domain)
    return mapping[SILENCE] != SILENCE and all(mapping[s] == s for s in alphabet)


@dataclass(frozen=True)
class Strategy:
    """Per-round symbol maps. Round r uses ``rounds[min(r, len) - 1]``,
    so a single entry is a persistent strategy."""

    rounds: tuple[tuple[tuple[str, str], ...], ...]

    @classmethod
    def of(cls, *maps: Mapping[str, str]) -> "Strategy":
        if not maps:
            raise BadParameter("strategy needs at least one round map")
        return cls(tuple(tuple(sorted(m.items())) for m in maps))

    def map_for(self, rnd: int) -> dict[str, str]:
        return dict(self.rounds[min(rnd, len(self.rounds)) - 1])

    def to_dict(self) -> dict:
        return {"rounds": [dict(r) for r in self.rounds]}


@dataclass(frozen=True)
class FaultSpec:
    sender: int
    receiver: int
    kind: FaultClass
    strategy: Strategy | None = None  # None: drawn from the scenario seed

    @property
    def channel(self) -> tuple[int, int]:
        return (self.sender, self.receiver)


@dataclass(frozen=True)
class Scenario:
    n: int
    protocol: ProtocolKind
    bound: int
    instigator: int
    decision: Any
    faults: tuple[FaultSpec, ...] = ()
    allowed: frozenset[FaultClass] = ALL_CLASSES
    seed: int = 0

    def __post_init__(self):
        validate(self)

    @property
    def horizon(self) -> int:
        return self.protocol.horizon(self.bound)

    @property
    def alphabet(self) -> tuple[str, ...]:
        return self.protocol.alphabet


def validate(s: Scenario) -> None:
    if not isinstance(s.n, int) or s.n < 2:
        raise BadParameter(f"n must be an integer >= 2, got {s.n!r}")
    if not isinstance(s.bound, int) or s.bound < 0:
        raise BadParameter(f"bound must be a non-negative integer, got {s.bound!r}")
    if not 0 <= s.instigator < s.n:
        raise InvalidChannel(f"instigator {s.instigator} out of range for n={s.n}")
    if s.decision not in s.protocol.decisions:
        raise BadParameter(f"decision {s.decision!r} invalid for protocol {s.protocol.value}")
    if not isinstance(s.seed, int) or not 0 <= s.seed < 2**64:
        raise BadParameter("seed must be a 64-bit unsigned integer")
    extra = s.allowed - s.protocol.admissible_classes
    if extra:
        names = ", ".join(c.value for c in sort_classes(extra))
        raise ClassNotAllowed(f"protocol {s.protocol.value} rules out fault classes: {names}")
    seen = set()
    for f in s.faults:
        for agent in f.channel:
            if not 0 <= agent < s.n:
                raise InvalidChannel(f"channel {f.channel} references agent outside [0, {s.n})")
        if f.sender == f.receiver:
            raise InvalidChannel(f"channel {f.channel} is a self-loop")
        if f.channel in seen:
            raise BadParameter(f"more than one fault on channel {f.channel}")
        seen.add(f.channel)
        if f.kind not in s.allowed:
            raise ClassNotAllowed(f"fault on {f.channel} has class {f.kind.value}, not allowed")
        if f.strategy is not None:
            for m in f.strategy.rounds:
                if not map_matches_class(dict(m), f.kind, s.alphabet):
                    raise BadParameter(
                        f"strategy on {f.channel} is not a {f.kind.value} map: {dict(m)}"
                    )


@dataclass(frozen=True)
class Partition:
    reliable: frozenset[int]
    traitors: frozenset[int]


def classify_agents(s: Scenario) -> Partition:
    """Traitors are the agents owning at least one faulty device."""
    traitors = frozenset(f.sender for f in s.faults)
    return Partition(frozenset(range(s.n)) - traitors, traitors)


def resolve_strategies(s: Scenario) -> tuple[FaultSpec, ...]:
    """Fill in missing strategies deterministically from the seed."""
    out = []
    for f in s.faults:
        if f.strategy is None:
            rng = random.Random(f"{s.seed}:{f.sender}:{f.receiver}")
            choice = rng.choice(class_maps(f.kind, s.alphabet))
            f = FaultSpec(f.sender, f.receiver, f.kind, Strategy.of(choice))
        out.append(f)
    return tuple(out)


# --- transcripts -------------------------------------------------------------


@dataclass(frozen=True)
class Event:
    sender: int
    receiver: int
    attempted: str
    delivered: str
    fault: FaultClass | None
    path: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {
            "from": self.sender,
            "to": self.receiver,
            "attempted": self.attempted,
            "delivered": self.delivered,
            "fault": self.fault.value if self.fault else None,
            "path": list(self.path),
        }


@dataclass(frozen=True)
class RoundRecord:
    round: int
    events: tuple[Event, ...]


@dataclass(frozen=True)
class Transcript:
    rounds: tuple[RoundRecord, ...]
    decisions: Mapping[int, tuple[Any, int]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "rounds": [
                {"round": r.round, "events": [e.to_dict() for e in r.events]}
                for r in self.rounds
            ],
            "decisions": decisions_to_dict(self.decisions),
        }


def decision_to_json(value):
    return value.value if isinstance(value, Decision) else value


def decisions_to_dict(decisions: Mapping[int, tuple[Any, int]]) -> dict:
    return {
        str(a): {"value": decision_to_json(v), "round": r}
        for a, (v, r) in sorted(decisions.items())
    }


# --- scenario file format ----------------------------------------------------

_KEYS = ("n", "protocol", "bound", "instigator", "decision", "allowed_faults", "faults", "seed")
_REQUIRED = ("n", "protocol", "bound", "instigator", "decision")
_FAULT_KEYS = {"from", "to", "kind", "strategy"}


def _parse_decision(raw, protocol: ProtocolKind):
    if protocol is ProtocolKind.OM:
        if isinstance(raw, bool) or raw not in (0, 1):
            raise BadParameter(f"OM decision must be 0 or 1, got {raw!r}")
        return int(raw)
    try:
        return Decision(raw)
    except ValueError:
        raise BadParameter(f"decision must be 'attack' or 'retreat', got {raw!r}") from None


def _parse_class(raw) -> FaultClass:
    try:
        return FaultClass(raw)
    except ValueError:
        raise BadParameter(f"unknown fault class {raw!r}") from None


def _parse_int(raw, name: str) -> int:
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise BadParameter(f"{name} must be an integer, got {raw!r}")
    return raw


def _parse_strategy(raw) -> Strategy:
    if not isinstance(raw, dict) or set(raw) != {"rounds"}:
        raise BadParameter("strategy must be an object with exactly the key 'rounds'")
    rounds = raw["rounds"]
    if not isinstance(rounds, list) or not rounds:
        raise BadParameter("strategy.rounds must be a non-empty array")
    maps = []
    for m in rounds:
        if not isinstance(m, dict) or not all(isinstance(v, str) for v in m.values()):
            raise BadParameter("each strategy round must map symbols to symbols")
        maps.append(m)
    return Strategy.of(*maps)


def scenario_from_dict(config: Mapping[str, Any]) -> Scenario:
    if not isinstance(config, Mapping):
        raise BadParameter("scenario must be a JSON object")
    unknown = set(config) - set(_KEYS)
    if unknown:
        raise BadParameter(f"unknown scenario keys: {sorted(unknown)}")
    missing = [k for k in _REQUIRED if k not in config]
    if missing:
        raise BadParameter(f"missing scenario keys: {missing}")
    try:
        protocol = ProtocolKind(config["protocol"])
    except ValueError:
        raise BadParameter(f"unknown protocol {config['protocol']!r}") from None

    if "allowed_faults" in config:
        raw = config["allowed_faults"]
        if not isinstance(raw, list):
            raise BadParameter("allowed_faults must be an array")
        allowed = frozenset(_parse_class(c) for c in raw)
    else:
        allowed = protocol.admissible_classes

    faults = []
    raw_faults = config.get("faults", [])
    if not isinstance(raw_faults, list):
        raise BadParameter("faults must be an array")
    for entry in raw_faults:
        if not isinstance(entry, dict):
            raise BadParameter("each fault must be an object")
        extra = set(entry) - _FAULT_KEYS
        if extra or not {"from", "to", "kind"} <= set(entry):
            raise BadParameter(f"fault entries need from/to/kind (+ optional strategy): {entry}")
        strategy = _parse_strategy(entry["strategy"]) if "strategy" in entry else None
        faults.append(
            FaultSpec(
                _parse_int(entry["from"], "from"),
                _parse_int(entry["to"], "to"),
                _parse_class(entry["kind"]),
                strategy,
            )
        )

    return Scenario(
        n=_parse_int(config["n"], "n"),
        protocol=protocol,
        bound=_parse_int(config["bound"], "bound"),
        instigator=_parse_int(config["instigator"], "instigator"),
        decision=_parse_decision(config["decision"], protocol),
        faults=tuple(faults),
        allowed=allowed,
        seed=_parse_int(config.get("seed", 0), "seed"),
    )


build_scenario = scenario_from_dict


def scenario_to_dict(s: Scenario) -> dict:
    faults = []
    for f in s.faults:
        entry = {"from": f.sender, "to": f.receiver, "kind": f.kind.value}
        if f.strategy is not None:
            entry["strategy"] = f.strategy.to_dict()
        faults.append(entry)
    return {
        "n": s.n,
        "protocol": s.protocol.value,
        "bound": s.bound,
        "instigator": s.instigator,
        "decision": decision_to_json(s.decision),
        "allowed_faults": [c.value for c in sort_classes(s.allowed)],
        "faults": faults,
        "seed": s.seed,
    }


def dumps_scenario(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=2) + "\n"


def loads_scenario(text: str) -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BadParameter(f"scenario is not valid JSON: {exc}") from None
    return scenario_from_dict(data)


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return loads_scenario(fh.read())
