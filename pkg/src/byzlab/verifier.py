"""Interactive-consistency verdicts, the bound table, and adversary search.

Two search routes share one adversary space:

``mode="full"``
    enumerates the literal product of per-channel options.
``mode="lazy"`` (default)
    a replaying depth-first search that picks a channel's option only when
    that channel is first consulted by the engine. Channels that never carry
    traffic (and cannot fire spuriously) stay fault-free, which is the most
    demanding member of the class of assignments producing the same run.
"""

from __future__ import annotations

import itertools
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Iterable, Iterator, Sequence

from .engine import FaultPlan, execute
from .model import (
    FaultClass,
    FaultSpec,
    Scenario,
    Strategy,
    Transcript,
    class_maps,
    classify_agents,
    sort_classes,
)
from .protocols import machine_for

DEFAULT_CAP = 10**7


class IncompleteTranscript(ValueError):
    pass


class SearchSpaceTooLarge(ValueError):
    def __init__(self, cardinality: int, cap: int):
        super().__init__(f"strategy space has {cardinality} assignments, cap is {cap}")
        self.cardinality = cardinality
        self.cap = cap


@dataclass(frozen=True)
class Verdict:
    ic1: bool
    ic2: bool
    rounds_used: int
    horizon_respected: bool

    @property
    def ok(self) -> bool:
        return self.ic1 and self.ic2 and self.horizon_respected

    def to_dict(self) -> dict:
        return {
            "ic1": self.ic1,
            "ic2": self.ic2,
            "rounds_used": self.rounds_used,
            "horizon_respected": self.horizon_respected,
        }


def check_verdict(t: Transcript, s: Scenario) -> Verdict:
    missing = [a for a in range(s.n) if a not in t.decisions]
    if missing:
        raise IncompleteTranscript(f"agents without a decision: {missing}")
    reliable = sorted(classify_agents(s).reliable)
    values = [t.decisions[a][0] for a in reliable]
    ic1 = len(set(values)) <= 1
    # vacuous when the instigator owns a faulty device
    ic2 = s.instigator not in reliable or all(v == s.decision for v in values)
    rounds_used = max((t.decisions[a][1] for a in reliable), default=0)
    horizon_respected = rounds_used <= s.horizon and len(t.rounds) <= s.horizon
    return Verdict(ic1, ic2, rounds_used, horizon_respected)


# --- bound table ---------------------------------------------------------------


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    horizon: int | None
    min_agents: int
    protocol: str

    def summary(self) -> str:
        if self.feasible:
            return f"feasible, horizon {self.horizon}"
        return f"infeasible (needs {self.min_agents})"

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "horizon": self.horizon,
            "min_agents": self.min_agents,
            "protocol": self.protocol,
            "summary": self.summary(),
        }


def bound_oracle(n: int, bound: int, allowed_classes: Iterable[FaultClass]) -> Feasibility:
    """Feasibility and round horizon of agreement for ``bound`` faulty agents.

    With spurious generation possible the problem is the Byzantine generals
    problem: n >= 3*bound + 1 and bound + 1 rounds. Without it, loss faults
    still need bound + 1 rounds but any n works; corruption alone takes one
    round. With at most one agent left reliable, agreement is vacuous.
    """
    if n < 1 or bound < 0:
        raise ValueError("need n >= 1 and bound >= 0")
    classes = set(allowed_classes)
    if FaultClass.SPURIOUS in classes:
        need = 3 * bound + 1
        ok = n >= need or n - bound <= 1
        return Feasibility(ok, bound + 1 if ok else None, need, "om")
    if FaultClass.DROP in classes:
        return Feasibility(True, bound + 1, 1, "mkn")
    return Feasibility(True, 1, 1, "one_round_mm")


# --- adversary search ----------------------------------------------------------


@dataclass(frozen=True)
class Counterexample:
    scenario: Scenario
    verdict: Verdict


@dataclass(frozen=True)
class SearchReport:
    scenarios_checked: int
    violations: int
    cardinality: int
    worst: Counterexample | None

    @property
    def all_pass(self) -> bool:
        return self.worst is None

    def to_dict(self) -> dict:
        from .model import scenario_to_dict

        worst = None
        if self.worst is not None:
            worst = {
                "scenario": scenario_to_dict(self.worst.scenario),
                "verdict": self.worst.verdict.to_dict(),
            }
        return {
            "all_pass": self.all_pass,
            "scenarios_checked": self.scenarios_checked,
            "violations": self.violations,
            "cardinality": self.cardinality,
            "counterexample": worst,
        }


def _channel_options(kind_list, alphabet, horizon) -> list:
    """None, then for each class its strategies (per-round when it has choices)."""
    opts: list = [None]
    for kind in kind_list:
        maps = class_maps(kind, alphabet)
        if len(maps) == 1:
            opts.append((kind, (maps[0],)))
            continue
        for combo in itertools.product(range(len(maps)), repeat=horizon):
            if len(set(combo)) == 1:
                opts.append((kind, (maps[combo[0]],)))
            else:
                opts.append((kind, tuple(maps[i] for i in combo)))
    return opts


def _traitor_channels(n: int, traitors: Iterable[int]) -> list[tuple[int, int]]:
    return sorted((t, j) for t in traitors for j in range(n) if j != t)


def search_cardinality(template: Scenario, traitors, decisions=None) -> int:
    decisions = template.protocol.decisions if decisions is None else tuple(decisions)
    per_channel = len(
        _channel_options(sort_classes(template.allowed), template.alphabet, template.horizon)
    )
    channels = _traitor_channels(template.n, traitors)
    return len(decisions) * per_channel ** len(channels)


def _concrete(template: Scenario, decision, faults: Sequence[FaultSpec]) -> Scenario:
    return Scenario(
        n=template.n,
        protocol=template.protocol,
        bound=template.bound,
        instigator=template.instigator,
        decision=decision,
        faults=tuple(sorted(faults, key=lambda f: f.channel)),
        allowed=template.allowed,
        seed=template.seed,
    )


class _LazyPlan:
    """Fault plan that draws adversary choices from a replay prefix."""

    def __init__(self, channels, kinds, alphabet, prefix):
        self.channels = set(channels)
        self.kinds = kinds
        self.maps = {k: class_maps(k, alphabet) for k in kinds}
        self.prefix = prefix
        self.trail: list[tuple[int, int]] = []
        self.kind_of: dict[tuple[int, int], FaultClass | None] = {}
        self.round_map: dict[tuple[tuple[int, int], int], int] = {}
        self._silent = sorted(self.channels) if FaultClass.SPURIOUS in kinds else []

    def _choose(self, width: int) -> int:
        i = len(self.trail)
        c = self.prefix[i] if i < len(self.prefix) else 0
        self.trail.append((c, width))
        return c

    def transform(self, channel, rnd, symbol):
        if channel not in self.channels:
            return symbol, None
        if channel not in self.kind_of:
            c = self._choose(len(self.kinds) + 1)
            self.kind_of[channel] = None if c == 0 else self.kinds[c - 1]
        kind = self.kind_of[channel]
        if kind is None:
            return symbol, None
        maps = self.maps[kind]
        key = (channel, rnd)
        if key not in self.round_map:
            self.round_map[key] = self._choose(len(maps)) if len(maps) > 1 else 0
        out = maps[self.round_map[key]][symbol]
        return out, (kind if out != symbol else None)

    def silent_candidates(self, rnd):
        return self._silent

    def faults(self, horizon: int) -> list[FaultSpec]:
        out = []
        for channel, kind in self.kind_of.items():
            if kind is None:
                continue
            maps = self.maps[kind]
            chosen = [maps[self.round_map.get((channel, r), 0)] for r in range(1, horizon + 1)]
            if all(m == chosen[0] for m in chosen):
                chosen = chosen[:1]
            out.append(FaultSpec(channel[0], channel[1], kind, Strategy.of(*chosen)))
        return out

    def next_prefix(self) -> list[int] | None:
        trail = list(self.trail)
        while trail and trail[-1][0] == trail[-1][1] - 1:
            trail.pop()
        if not trail:
            return None
        return [c for c, _ in trail[:-1]] + [trail[-1][0] + 1]


def iter_adversaries(
    template: Scenario, traitors: Iterable[int], decision, mode: str = "lazy"
) -> Iterator[tuple[Scenario, Transcript]]:
    """Yield ``(concrete scenario, transcript)`` for every adversary choice.

    Traitors control their outgoing channels only. In lazy mode each
    yielded scenario stands for the whole class of assignments that agree
    on the consulted channels.
    """
    base = _concrete(template, decision, ())
    machine = machine_for(base)
    kinds = sort_classes(template.allowed)
    channels = _traitor_channels(template.n, sorted(set(traitors)))
    if mode == "full":
        options = _channel_options(kinds, template.alphabet, template.horizon)
        for combo in itertools.product(options, repeat=len(channels)):
            faults = [
                FaultSpec(c[0], c[1], opt[0], Strategy.of(*opt[1]))
                for c, opt in zip(channels, combo)
                if opt is not None
            ]
            yield _concrete(template, decision, faults), execute(machine, FaultPlan(faults))
    elif mode == "lazy":
        prefix: list[int] | None = []
        while prefix is not None:
            plan = _LazyPlan(channels, kinds, template.alphabet, prefix)
            transcript = execute(machine, plan)
            yield _concrete(template, decision, plan.faults(template.horizon)), transcript
            prefix = plan.next_prefix()
    else:
        raise ValueError(f"unknown search mode {mode!r}")


def _search_unit(args) -> tuple[int, int, Counterexample | None]:
    """Search one (traitor set, decision) unit. Returns checked, violations, first."""
    template, traitors, decision, mode = args
    checked = violations = 0
    first = None
    for scenario, transcript in iter_adversaries(template, traitors, decision, mode):
        checked += 1
        verdict = check_verdict(transcript, scenario)
        if not verdict.ok:
            violations += 1
            if first is None:
                first = Counterexample(scenario, verdict)
    return checked, violations, first


def _run_units(units, workers: int, cardinality: int) -> SearchReport:
    if workers > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_search_unit, units))
    else:
        results = [_search_unit(u) for u in units]
    checked = sum(r[0] for r in results)
    violations = sum(r[1] for r in results)
    # units are in canonical order, so the first hit is the lexicographic first
    worst = next((r[2] for r in results if r[2] is not None), None)
    return SearchReport(checked, violations, cardinality, worst)


def _decisions(template, decisions):
    return template.protocol.decisions if decisions is None else tuple(decisions)


def exhaustive_search(
    template: Scenario,
    traitors: Iterable[int] | None = None,
    *,
    decisions: Iterable[Any] | None = None,
    cap: int = DEFAULT_CAP,
    mode: str = "lazy",
    workers: int = 1,
) -> SearchReport:
    """Try every fault strategy on the outgoing channels of ``traitors``.

    ``traitors`` defaults to the senders of the template's faults; the
    template's own fault strategies are ignored. ``decisions`` defaults to
    the protocol's whole decision domain.
    """
    if traitors is None:
        traitors = classify_agents(template).traitors
    traitors = sorted(set(traitors))
    for t in traitors:
        if not 0 <= t < template.n:
            raise ValueError(f"traitor {t} out of range")
    decisions = _decisions(template, decisions)
    cardinality = search_cardinality(template, traitors, decisions)
    if cardinality > cap:
        raise SearchSpaceTooLarge(cardinality, cap)
    units = [(template, tuple(traitors), d, mode) for d in decisions]
    return _run_units(units, workers, cardinality)


def traitor_sets(n: int, max_size: int) -> list[tuple[int, ...]]:
    return [
        combo
        for size in range(0, min(max_size, n) + 1)
        for combo in itertools.combinations(range(n), size)
    ]


def search_all_traitor_sets(
    template: Scenario,
    max_traitors: int,
    *,
    decisions: Iterable[Any] | None = None,
    cap: int = DEFAULT_CAP,
    mode: str = "lazy",
    workers: int = 1,
) -> SearchReport:
    """:func:`exhaustive_search` over every traitor set of size <= max_traitors."""
    decisions = _decisions(template, decisions)
    sets = traitor_sets(template.n, max_traitors)
    cardinality = 0
    for ts in sets:
        size = search_cardinality(template, ts, decisions)
        if size > cap:
            raise SearchSpaceTooLarge(size, cap)
        cardinality += size
    units = [(template, ts, d, mode) for d in decisions for ts in sets]
    return _run_units(units, workers, cardinality)


def sample_search(
    template: Scenario,
    max_traitors: int,
    samples: int,
    seed: int = 0,
) -> SearchReport:
    """Seeded random adversaries, for sizes where enumeration is out of reach."""
    rng = random.Random(seed)
    machine_cache = {}
    kinds = sort_classes(template.allowed)
    options = _channel_options(kinds, template.alphabet, template.horizon)
    violations = 0
    first = None
    for _ in range(samples):
        decision = rng.choice(template.protocol.decisions)
        size = rng.randint(0, max_traitors)
        traitors = rng.sample(range(template.n), size)
        faults = []
        for c in _traitor_channels(template.n, traitors):
            opt = rng.choice(options)
            if opt is not None:
                faults.append(FaultSpec(c[0], c[1], opt[0], Strategy.of(*opt[1])))
        if decision not in machine_cache:
            machine_cache[decision] = machine_for(_concrete(template, decision, ()))
        transcript = execute(machine_cache[decision], FaultPlan(faults))
        verdict = check_verdict(transcript, _concrete(template, decision, faults))
        if not verdict.ok:
            violations += 1
            if first is None:
                first = Counterexample(_concrete(template, decision, faults), verdict)
    return SearchReport(samples, violations, samples, first)
