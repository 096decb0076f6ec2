"""Synchronous round execution with device faults between send and delivery."""

from __future__ import annotations

from collections import defaultdict
from typing import Any, Iterable, NamedTuple, Protocol as _Protocol

from .model import (
    SILENCE,
    Event,
    FaultClass,
    FaultSpec,
    RoundRecord,
    Scenario,
    Transcript,
    resolve_strategies,
)


class HorizonExceeded(RuntimeError):
    """A state machine tried to send after the declared round horizon."""


class DecisionRevised(RuntimeError):
    """A state machine tried to change a decision it already made."""


class Message(NamedTuple):
    symbol: str
    # senders along the causal chain, originator first, this hop's sender last
    path: tuple[int, ...]


class StateMachine(_Protocol):
    """What the engine needs from a protocol.

    ``send`` runs at the start of round r, ``receive`` at its end with the
    messages delivered in that round. Both are pure: they return new state.
    """

    n: int
    horizon: int

    def initial_state(self, agent: int) -> Any: ...

    def send(self, agent: int, state: Any, rnd: int) -> list[tuple[int, Message]]: ...

    def receive(
        self, agent: int, state: Any, rnd: int, inbox: list[tuple[int, Message]]
    ) -> tuple[Any, Any]: ...

    def finalize(self, agent: int, state: Any) -> Any: ...


def apply_fault(spec: FaultSpec | None, attempted: str, rnd: int = 1) -> str:
    """Deliver ``attempted`` through a device with fault ``spec``.

    Absent spec is the identity. The strategy map of each class is already
    the identity outside the class's domain, so this is a table lookup.
    """
    if spec is None:
        return attempted
    if spec.strategy is None:
        raise ValueError("fault strategy unresolved; call resolve_strategies first")
    return spec.strategy.map_for(rnd)[attempted]


class FaultPlan:
    """Static fault assignment: one FaultSpec per faulty channel."""

    def __init__(self, faults: Iterable[FaultSpec]):
        self.by_channel = {f.channel: f for f in faults}
        self._maps: dict[tuple[tuple[int, int], int], dict[str, str]] = {}
        self._spurious = sorted(
            c for c, f in self.by_channel.items() if f.kind is FaultClass.SPURIOUS
        )

    def transform(self, channel, rnd: int, symbol: str) -> tuple[str, FaultClass | None]:
        spec = self.by_channel.get(channel)
        if spec is None:
            return symbol, None
        key = (channel, rnd)
        mapping = self._maps.get(key)
        if mapping is None:
            mapping = self._maps[key] = spec.strategy.map_for(rnd)
        out = mapping[symbol]
        return out, (spec.kind if out != symbol else None)

    def silent_candidates(self, rnd: int) -> list[tuple[int, int]]:
        return self._spurious


def run_round(machine: StateMachine, states: list, rnd: int, plan) -> tuple[list, RoundRecord, dict]:
    """One synchronous round: every agent sends, devices act, every agent receives.

    Returns the new states, the round record and ``{agent: decision}`` for
    agents that decided this round.
    """
    n = machine.n
    sends: dict[tuple[int, int], list[Message]] = defaultdict(list)
    for a in range(n):
        for to, msg in machine.send(a, states[a], rnd):
            sends[(a, to)].append(msg)

    events = []
    inboxes: list[list[tuple[int, Message]]] = [[] for _ in range(n)]
    for channel in sorted(sends):
        sender, receiver = channel
        for msg in sends[channel]:
            out, cls = plan.transform(channel, rnd, msg.symbol)
            events.append(Event(sender, receiver, msg.symbol, out, cls, msg.path))
            if out != SILENCE:
                inboxes[receiver].append((sender, Message(out, msg.path)))
    # at most one spurious message per silent channel per round
    for channel in plan.silent_candidates(rnd):
        if channel in sends:
            continue
        out, cls = plan.transform(channel, rnd, SILENCE)
        if out != SILENCE:
            sender, receiver = channel
            events.append(Event(sender, receiver, SILENCE, out, cls, (sender,)))
            inboxes[receiver].append((sender, Message(out, (sender,))))

    new_states = list(states)
    decided = {}
    for a in range(n):
        new_states[a], decision = machine.receive(a, states[a], rnd, inboxes[a])
        if decision is not None:
            decided[a] = decision
    return new_states, RoundRecord(rnd, tuple(events)), decided


def execute(machine: StateMachine, plan) -> Transcript:
    """Run ``machine`` to its horizon under ``plan`` and resolve undecided agents."""
    states = [machine.initial_state(a) for a in range(machine.n)]
    decisions: dict[int, tuple[Any, int]] = {}
    records = []
    for rnd in range(1, machine.horizon + 1):
        states, record, decided = run_round(machine, states, rnd, plan)
        records.append(record)
        for a, value in decided.items():
            if a in decisions:
                if decisions[a][0] != value:
                    raise DecisionRevised(f"agent {a} revised {decisions[a][0]!r} -> {value!r}")
                continue
            decisions[a] = (value, rnd)
    for a in range(machine.n):
        if machine.send(a, states[a], machine.horizon + 1):
            raise HorizonExceeded(f"agent {a} sends after round {machine.horizon}")
        if a not in decisions:
            decisions[a] = (machine.finalize(a, states[a]), machine.horizon)
    return Transcript(tuple(records), decisions)


def run_protocol(scenario: Scenario, machine_factory=None) -> Transcript:
    """Run ``scenario`` end to end; seed-drawn strategies are resolved first."""
    if machine_factory is None:
        from .protocols import machine_for

        machine_factory = machine_for
    machine = machine_factory(scenario)
    if machine.horizon != scenario.horizon:
        raise HorizonExceeded(
            f"machine horizon {machine.horizon} differs from declared {scenario.horizon}"
        )
    return execute(machine, FaultPlan(resolve_strategies(scenario)))
