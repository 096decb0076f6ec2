import sys

import pytest

from byzlab.model import Decision, FaultClass, ProtocolKind, Scenario

CD = frozenset({FaultClass.CORRUPT, FaultClass.DROP})


def om(n, m, value=1, faults=(), commander=0, seed=0):
    return Scenario(n, ProtocolKind.OM, m, commander, value, tuple(faults), seed=seed)


def mkn(n, k, decision=Decision.ATTACK, faults=(), instigator=0):
    return Scenario(n, ProtocolKind.MKN, k, instigator, decision, tuple(faults), allowed=CD)


def one_round(n, decision=Decision.ATTACK, faults=()):
    return Scenario(
        n, ProtocolKind.ONE_ROUND_MM, 0, 0, decision, tuple(faults),
        allowed=frozenset({FaultClass.CORRUPT}),
    )


@pytest.fixture
def om_config():
    return {
        "n": 4,
        "protocol": "om",
        "bound": 1,
        "instigator": 0,
        "decision": 1,
        "allowed_faults": ["corrupt", "drop", "spurious"],
        "faults": [
            {
                "from": 1,
                "to": 2,
                "kind": "corrupt",
                "strategy": {"rounds": [{"0": "1", "1": "0", "silence": "silence"}]},
            }
        ],
        "seed": 7,
    }


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
