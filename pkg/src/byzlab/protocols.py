"""State machines for the three agreement protocols.

* :class:`OralMessages` -- the recursive oral-messages algorithm OM(m),
  majority voting with default 0 (ties also go to 0).
* :class:`OneRoundMM` -- the one-round protocol for corruption-only faults:
  attack is a broadcast, retreat is silence.
* :class:`MKN` -- the recursive M(k, n) algorithm for corruption and loss
  faults, where every receiver of a first message becomes the commander of
  M(k-1, n-1) towards everyone outside the message's sender-set.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import permutations
from typing import Iterable

from .engine import Message
from .model import ATTACK, OM_ALPHABET, Decision, ProtocolKind, Scenario

OM_DEFAULT = 0


def sender_set(lineage: Iterable) -> frozenset[int]:
    """Senders of a message and of all its causal ancestors.

    ``lineage`` is either a message path (agent ids, originator first) or a
    chain of :class:`Message` objects whose paths are merged.
    """
    out = set()
    for item in lineage:
        if isinstance(item, Message):
            out.update(item.path)
        else:
            out.add(item)
    return frozenset(out)


def _majority(votes: list[int]) -> int:
    ones = sum(votes)
    return 1 if 2 * ones > len(votes) else OM_DEFAULT


class OralMessages:
    def __init__(self, m: int, n: int, commander: int, value: int):
        if n < 1 or m < 0:
            raise ValueError("OM needs n >= 1 and m >= 0")
        self.m, self.n, self.commander, self.value = m, n, commander, value
        self.horizon = m + 1
        # _paths[(i, L)]: every relay path of length L that lieutenant i may
        # legitimately receive (starts at commander, distinct, excludes i)
        self._paths: dict[tuple[int, int], list[tuple[int, ...]]] = {}
        for i in range(n):
            others = [a for a in range(n) if a not in (i, commander)]
            for length in range(1, m + 2):
                self._paths[(i, length)] = [
                    (commander,) + rest for rest in permutations(others, length - 1)
                ]

    def initial_state(self, agent):
        return {}

    def send(self, agent, state, rnd):
        if rnd > self.horizon:
            return []
        if agent == self.commander:
            if rnd != 1:
                return []
            msg = Message(str(self.value), (agent,))
            return [(j, msg) for j in range(self.n) if j != agent]
        if rnd == 1:
            return []
        out = []
        for path in self._paths[(agent, rnd - 1)]:
            relayed = Message(str(state.get(path, OM_DEFAULT)), path + (agent,))
            out.extend((j, relayed) for j in range(self.n) if j not in relayed.path)
        return out

    def receive(self, agent, state, rnd, inbox):
        if agent == self.commander:
            return state, (self.value if rnd == 1 else None)
        new = None
        for sender, msg in inbox:
            path = msg.path
            if (
                msg.symbol not in OM_ALPHABET
                or len(path) != rnd
                or path[0] != self.commander
                or path[-1] != sender
                or agent in path
                or len(set(path)) != len(path)
            ):
                continue
            if new is None:
                new = dict(state)
            new.setdefault(path, int(msg.symbol))
        return (state if new is None else new), None

    def finalize(self, agent, state):
        if agent == self.commander:
            return self.value

        def resolve(path):
            direct = state.get(path, OM_DEFAULT)
            if len(path) == self.m + 1:
                return direct
            votes = [direct] + [
                resolve(path + (j,)) for j in range(self.n) if j not in path and j != agent
            ]
            return _majority(votes)

        return resolve((self.commander,))


class OneRoundMM:
    horizon = 1

    def __init__(self, n: int, commander: int, decision: Decision):
        self.n, self.commander, self.decision = n, commander, decision

    def initial_state(self, agent):
        return None

    def send(self, agent, state, rnd):
        if rnd == 1 and agent == self.commander and self.decision is Decision.ATTACK:
            msg = Message(ATTACK, (agent,))
            return [(j, msg) for j in range(self.n) if j != agent]
        return []

    def receive(self, agent, state, rnd, inbox):
        if agent == self.commander:
            return state, self.decision
        return state, (Decision.ATTACK if inbox else Decision.RETREAT)

    def finalize(self, agent, state):
        return Decision.RETREAT


@dataclass(frozen=True)
class MknState:
    decided: Decision | None = None
    decided_round: int | None = None
    trigger: tuple[int, ...] = ()  # path of the message that triggered the decision
    sender_set_seen: frozenset[int] = frozenset()


class MKN:
    def __init__(self, k: int, n: int, instigator: int, decision: Decision):
        if k < 0 or n < 1:
            raise ValueError("M(k, n) needs k >= 0 and n >= 1")
        self.k, self.n, self.instigator, self.decision = k, n, instigator, decision
        self.horizon = k + 1

    def initial_state(self, agent):
        return MknState()

    def send(self, agent, state, rnd):
        if agent == self.instigator:
            if rnd == 1 and self.decision is Decision.ATTACK:
                msg = Message(ATTACK, (agent,))
                return [(j, msg) for j in range(self.n) if j != agent]
            return []
        # a receiver in round j <= k commands M(k - j, .) in round j + 1
        if (
            state.decided is Decision.ATTACK
            and state.decided_round == rnd - 1
            and state.decided_round <= self.k
        ):
            path = state.trigger + (agent,)
            msg = Message(ATTACK, path)
            excluded = sender_set(path)
            return [(j, msg) for j in range(self.n) if j not in excluded]
        return []

    def receive(self, agent, state, rnd, inbox):
        if agent == self.instigator:
            return state, (self.decision if rnd == 1 else None)
        if state.decided is not None or not inbox:
            return state, None
        seen = state.sender_set_seen.union(*(sender_set(m.path) for _, m in inbox))
        # several first messages in one round: the smallest path triggers
        trigger = min(m.path for _, m in inbox)
        new = replace(
            state,
            decided=Decision.ATTACK,
            decided_round=rnd,
            trigger=trigger,
            sender_set_seen=seen,
        )
        return new, Decision.ATTACK

    def finalize(self, agent, state):
        if agent == self.instigator:
            return self.decision
        return state.decided or Decision.RETREAT


def om_machine(m, n, commander, value) -> OralMessages:
    return OralMessages(m, n, commander, value)


def one_round_mm_machine(n, commander, decision) -> OneRoundMM:
    return OneRoundMM(n, commander, decision)


def mkn_machine(k, n, instigator, decision) -> MKN:
    return MKN(k, n, instigator, decision)


def machine_for(s: Scenario):
    if s.protocol is ProtocolKind.OM:
        return OralMessages(s.bound, s.n, s.instigator, s.decision)
    if s.protocol is ProtocolKind.ONE_ROUND_MM:
        return OneRoundMM(s.n, s.instigator, s.decision)
    return MKN(s.bound, s.n, s.instigator, s.decision)
