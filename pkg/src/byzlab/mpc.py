"""Shamir-shared arithmetic for curious players over a prime field.

Secrets live as degree-<=t polynomials evaluated at public points
``alphas``. Addition is local; multiplication multiplies shares locally
(degree 2t) and then runs the degree-reduction sub-protocol with the public
matrix C, where ``h(alpha_i) = sum_j C[i][j] * g(alpha_j)``.

Randomness is injected: anything with ``randrange(p)`` works, e.g.
``random.Random(seed)`` or a :class:`Tape` for exhaustive enumeration.
"""

from __future__ import annotations

import itertools
import json
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

DEFAULT_PRIME = 2147483647


class MpcError(ValueError):
    pass


class FieldTooSmall(MpcError):
    pass


class InconsistentShares(MpcError):
    pass


class NotEnoughShares(MpcError):
    pass


class MismatchedSession(MpcError):
    pass


class DegreeTooHigh(MpcError):
    pass


class ThresholdTooHigh(MpcError):
    pass


class CoalitionTooLarge(MpcError):
    pass


class CircuitError(MpcError):
    pass


class SearchSpaceTooLarge(MpcError):
    def __init__(self, cardinality: int, cap: int):
        super().__init__(f"audit space has {cardinality} runs, cap is {cap}")
        self.cardinality = cardinality


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    small = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
    for q in small:
        if p % q == 0:
            return p == q
    d, s = p - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    # deterministic for p < 3.3e24
    for a in small:
        x = pow(a, d, p)
        if x in (1, p - 1):
            continue
        for _ in range(s - 1):
            x = x * x % p
            if x == p - 1:
                break
        else:
            return False
    return True


def default_alphas(n: int) -> tuple[int, ...]:
    return tuple(range(1, n + 1))


def check_field(p: int, alphas: Sequence[int]) -> None:
    if not is_prime(p):
        raise MpcError(f"modulus {p} is not prime")
    if len(alphas) >= p:
        raise FieldTooSmall(f"{len(alphas)} players need a field larger than GF({p})")
    reduced = [a % p for a in alphas]
    if 0 in reduced or len(set(reduced)) != len(reduced):
        raise FieldTooSmall(f"evaluation points {tuple(alphas)} not distinct and nonzero mod {p}")


def evaluate_poly(coeffs: Sequence[int], x: int, p: int) -> int:
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % p
    return acc


def interpolate_at(xs: Sequence[int], ys: Sequence[int], x: int, p: int) -> int:
    """Value at ``x`` of the unique degree < len(xs) polynomial through the points."""
    total = 0
    for i, (xi, yi) in enumerate(zip(xs, ys)):
        num = den = 1
        for j, xj in enumerate(xs):
            if j != i:
                num = num * (x - xj) % p
                den = den * (xi - xj) % p
        total = (total + yi * num * pow(den, -1, p)) % p
    return total


class Tape:
    """Replays a fixed sequence of field elements as randomness."""

    def __init__(self, values: Iterable[int]):
        self._values = list(values)
        self._pos = 0

    def randrange(self, p: int) -> int:
        if self._pos >= len(self._values):
            raise IndexError("randomness tape exhausted")
        v = self._values[self._pos]
        self._pos += 1
        return v % p


class _Counting:
    def __init__(self):
        self.count = 0

    def randrange(self, p):
        self.count += 1
        return 0


@dataclass(frozen=True)
class ShareVector:
    shares: tuple[int, ...]
    alphas: tuple[int, ...]
    t: int
    p: int

    @property
    def n(self) -> int:
        return len(self.shares)

    def session(self) -> tuple:
        return (self.alphas, self.t, self.p)


def share(
    secret: int,
    t: int,
    n: int,
    rng=None,
    p: int = DEFAULT_PRIME,
    alphas: Sequence[int] | None = None,
) -> ShareVector:
    """Deal ``secret`` with a random degree-<=t polynomial g, g(0) = secret."""
    alphas = default_alphas(n) if alphas is None else tuple(alphas)
    if len(alphas) != n:
        raise MpcError("need one evaluation point per player")
    check_field(p, alphas)
    if not 0 <= t < n:
        raise ThresholdTooHigh(f"threshold {t} needs 0 <= t < n={n}")
    rng = random.Random() if rng is None else rng
    coeffs = [secret % p] + [rng.randrange(p) for _ in range(t)]
    return ShareVector(tuple(evaluate_poly(coeffs, a, p) for a in alphas), alphas, t, p)


def reconstruct(v: ShareVector, subset: Iterable[int] | None = None) -> int:
    """Free term of the polynomial through the shares of ``subset``.

    Extra shares beyond t + 1 must lie on the same degree-<=t polynomial.
    """
    idx = list(range(v.n)) if subset is None else sorted(set(subset))
    if len(idx) < v.t + 1:
        raise NotEnoughShares(f"{len(idx)} shares cannot determine a degree-{v.t} polynomial")
    base = idx[: v.t + 1]
    xs = [v.alphas[i] for i in base]
    ys = [v.shares[i] for i in base]
    for i in idx[v.t + 1 :]:
        if interpolate_at(xs, ys, v.alphas[i], v.p) != v.shares[i]:
            raise InconsistentShares(f"share of player {i} is off the degree-{v.t} polynomial")
    return interpolate_at(xs, ys, 0, v.p)


def add_shares(a: ShareVector, b: ShareVector) -> ShareVector:
    if a.session() != b.session():
        raise MismatchedSession("shares come from different sessions")
    return ShareVector(
        tuple((x + y) % a.p for x, y in zip(a.shares, b.shares)), a.alphas, a.t, a.p
    )


# --- degree reduction ----------------------------------------------------------


def _mat_mul(a, b, p):
    return [[sum(x * y for x, y in zip(row, col)) % p for col in zip(*b)] for row in a]


def _mat_inv(m, p):
    n = len(m)
    aug = [list(row) + [int(i == j) for j in range(n)] for i, row in enumerate(m)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] % p), None)
        if pivot is None:
            raise MpcError("evaluation matrix is singular")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv = pow(aug[col][col], -1, p)
        aug[col] = [x * inv % p for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [(x - f * y) % p for x, y in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


@dataclass(frozen=True)
class ReductionMatrix:
    entries: tuple[tuple[int, ...], ...]  # entries[i][j] = c_{i,j}
    alphas: tuple[int, ...]
    t: int
    p: int

    def apply(self, a: Sequence[int]) -> tuple[int, ...]:
        return tuple(sum(c * x for c, x in zip(row, a)) % self.p for row in self.entries)


def reduction_matrix(alphas: Sequence[int], t: int, p: int) -> ReductionMatrix:
    """C = V diag(1,..,1,0,..,0) V^-1: interpolate, drop degrees > t, re-evaluate."""
    alphas = tuple(alphas)
    n = len(alphas)
    if 2 * t >= n:
        raise DegreeTooHigh(f"degree 2t={2 * t} products are not determined by {n} points")
    check_field(p, alphas)
    vander = [[pow(a, k, p) for k in range(n)] for a in alphas]
    truncate = [[int(i == j and i <= t) for j in range(n)] for i in range(n)]
    c = _mat_mul(_mat_mul(vander, truncate, p), _mat_inv(vander, p), p)
    return ReductionMatrix(tuple(tuple(r) for r in c), alphas, t, p)


# --- the multi-party session ---------------------------------------------------


@dataclass
class Session:
    """Runs honest curious players and records what each one sees."""

    n: int
    t: int
    p: int
    rng: object
    alphas: tuple[int, ...] = ()
    rerandomize: bool = True
    views: list[list[tuple]] = field(default_factory=list)

    def __post_init__(self):
        if not self.alphas:
            self.alphas = default_alphas(self.n)
        check_field(self.p, self.alphas)
        if not self.views:
            self.views = [[] for _ in range(self.n)]
        self._matrix = None

    @property
    def matrix(self) -> ReductionMatrix:
        if self._matrix is None:
            self._matrix = reduction_matrix(self.alphas, self.t, self.p)
        return self._matrix

    def _rand(self, player, tag):
        v = self.rng.randrange(self.p)
        self.views[player].append(("rand", tag, v))
        return v

    def deal(self, dealer: int, secret: int, tag, degree: int | None = None):
        """``dealer`` shares ``secret``; every other player records its share."""
        degree = self.t if degree is None else degree
        coeffs = [secret % self.p] + [self._rand(dealer, tag) for _ in range(degree)]
        shares = tuple(evaluate_poly(coeffs, a, self.p) for a in self.alphas)
        for i in range(self.n):
            if i != dealer:
                self.views[i].append(("recv", tag, dealer, shares[i]))
        return ShareVector(shares, self.alphas, self.t, self.p)

    def multiply(self, a: ShareVector, b: ShareVector, tag) -> ShareVector:
        if a.session() != b.session() or a.session() != (self.alphas, self.t, self.p):
            raise MismatchedSession("shares come from different sessions")
        c = self.matrix.entries
        g = [x * y % self.p for x, y in zip(a.shares, b.shares)]
        if self.rerandomize:
            # each player adds a random degree-2t sharing of zero so the
            # truncated polynomial's upper coefficients are uniform
            for j in range(self.n):
                coeffs = [0] + [self._rand(j, (tag, "zero")) for _ in range(2 * self.t)]
                z = [evaluate_poly(coeffs, al, self.p) for al in self.alphas]
                for i in range(self.n):
                    if i != j:
                        self.views[i].append(("recv", (tag, "zero"), j, z[i]))
                g = [(x + y) % self.p for x, y in zip(g, z)]
        # P_j deals c_{i,j} g(alpha_j) for every i
        sub = [
            [self.deal(j, c[i][j] * g[j], (tag, "sub", i)) for i in range(self.n)]
            for j in range(self.n)
        ]
        new = []
        for i in range(self.n):
            # shares of h(alpha_i): every player sums its sub-shares over j
            held = [sum(sub[j][i].shares[mu] for j in range(self.n)) % self.p for mu in range(self.n)]
            for mu in range(self.n):
                if mu != i:
                    self.views[i].append(("recv", (tag, "h"), mu, held[mu]))
            hv = ShareVector(tuple(held), self.alphas, self.t, self.p)
            new.append(reconstruct(hv))
        return ShareVector(tuple(new), self.alphas, self.t, self.p)

    def open(self, v: ShareVector, to: Iterable[int], tag) -> dict[int, int]:
        out = {}
        for i in to:
            for mu in range(self.n):
                if mu != i:
                    self.views[i].append(("open", tag, mu, v.shares[mu]))
            out[i] = reconstruct(v)
            self.views[i].append(("out", tag, out[i]))
        return out


def mul_with_reduction(
    a: ShareVector,
    b: ShareVector,
    C: ReductionMatrix | None = None,
    rng=None,
    *,
    rerandomize: bool = True,
) -> ShareVector:
    """Product of two sharings, brought back to degree t by re-sharing."""
    if a.session() != b.session():
        raise MismatchedSession("shares come from different sessions")
    if 2 * a.t >= a.n:
        raise DegreeTooHigh(f"2t={2 * a.t} >= n={a.n}")
    session = Session(a.n, a.t, a.p, random.Random() if rng is None else rng, a.alphas,
                      rerandomize=rerandomize)
    if C is not None:
        if (C.alphas, C.t, C.p) != a.session():
            raise MismatchedSession("reduction matrix built for another session")
        session._matrix = C
    return session.multiply(a, b, "mul")


# --- circuits --------------------------------------------------------------------

OPS = ("input", "const", "add", "mul", "output")


@dataclass(frozen=True)
class Gate:
    op: str
    args: tuple[int, ...] = ()
    player: int | None = None
    value: int | None = None  # const gates only


@dataclass(frozen=True)
class Circuit:
    """Straight-line gates; a gate's wire id is its index."""

    gates: tuple[Gate, ...]

    def validate(self, n: int) -> None:
        for w, g in enumerate(self.gates):
            if g.op not in OPS:
                raise CircuitError(f"gate {w}: unknown op {g.op!r}")
            if any(not 0 <= a < w for a in g.args):
                raise CircuitError(f"gate {w}: arguments must be earlier wires")
            if any(self.gates[a].op == "output" for a in g.args):
                raise CircuitError(f"gate {w}: output gates produce no wire")
            want = {"input": 0, "const": 0, "add": 2, "mul": 2, "output": 1}[g.op]
            if len(g.args) != want:
                raise CircuitError(f"gate {w}: {g.op} takes {want} argument(s)")
            if g.op == "input" and (g.player is None or not 0 <= g.player < n):
                raise CircuitError(f"gate {w}: input player must be in [0, {n})")
            if g.op == "output" and g.player is not None and not 0 <= g.player < n:
                raise CircuitError(f"gate {w}: output player must be in [0, {n})")
            if g.op == "const" and not isinstance(g.value, int):
                raise CircuitError(f"gate {w}: const needs an integer value")

    def input_gates(self) -> list[int]:
        return [w for w, g in enumerate(self.gates) if g.op == "input"]

    def recipients(self, w: int, n: int) -> list[int]:
        g = self.gates[w]
        return list(range(n)) if g.player is None else [g.player]


def _normalise_inputs(circuit: Circuit, inputs: Mapping[int, object]) -> dict[int, int]:
    """Map player -> value(s) onto input wires, in wire order per player."""
    per_player = defaultdict(list)
    for w in circuit.input_gates():
        per_player[circuit.gates[w].player].append(w)
    out = {}
    for player, wires in per_player.items():
        if player not in inputs:
            raise CircuitError(f"no input for player {player}")
        vals = inputs[player]
        vals = list(vals) if isinstance(vals, (list, tuple)) else [vals]
        if len(vals) != len(wires):
            raise CircuitError(f"player {player} owns {len(wires)} input(s), got {len(vals)}")
        out.update(zip(wires, (int(v) for v in vals)))
    return out


def plain_evaluate(circuit: Circuit, inputs: Mapping[int, object], p: int, n: int) -> dict:
    """Direct field evaluation: ``{player: {output wire: value}}``."""
    circuit.validate(n)
    wires = _normalise_inputs(circuit, inputs)
    vals: dict[int, int] = {}
    outputs: dict[int, dict[int, int]] = defaultdict(dict)
    for w, g in enumerate(circuit.gates):
        if g.op == "input":
            vals[w] = wires[w] % p
        elif g.op == "const":
            vals[w] = g.value % p
        elif g.op == "add":
            vals[w] = (vals[g.args[0]] + vals[g.args[1]]) % p
        elif g.op == "mul":
            vals[w] = vals[g.args[0]] * vals[g.args[1]] % p
        else:
            for i in circuit.recipients(w, n):
                outputs[i][w] = vals[g.args[0]]
    return dict(outputs)


@dataclass(frozen=True)
class MpcResult:
    outputs: dict[int, dict[int, int]]
    views: tuple[tuple[tuple, ...], ...]


def evaluate_circuit(
    circuit: Circuit,
    inputs: Mapping[int, object],
    n: int,
    t: int,
    rng=None,
    p: int = DEFAULT_PRIME,
    *,
    alphas: Sequence[int] | None = None,
    rerandomize: bool = True,
) -> MpcResult:
    """Evaluate gate by gate on shares; every player's view is recorded."""
    if t > (n - 1) // 2:
        raise ThresholdTooHigh(f"t={t} exceeds floor((n-1)/2)={(n - 1) // 2} for n={n}")
    if t < 0:
        raise ThresholdTooHigh("t must be non-negative")
    circuit.validate(n)
    wires_in = _normalise_inputs(circuit, inputs)
    session = Session(n, t, p, random.Random() if rng is None else rng,
                      tuple(alphas or ()), rerandomize=rerandomize)
    vals: dict[int, ShareVector] = {}
    outputs: dict[int, dict[int, int]] = defaultdict(dict)
    for w, g in enumerate(circuit.gates):
        if g.op == "input":
            session.views[g.player].append(("input", w, wires_in[w] % p))
            vals[w] = session.deal(g.player, wires_in[w], ("in", w))
        elif g.op == "const":
            vals[w] = ShareVector((g.value % p,) * n, session.alphas, t, p)
        elif g.op == "add":
            vals[w] = add_shares(vals[g.args[0]], vals[g.args[1]])
        elif g.op == "mul":
            vals[w] = session.multiply(vals[g.args[0]], vals[g.args[1]], ("mul", w))
        else:
            for i, v in session.open(vals[g.args[0]], circuit.recipients(w, n), ("out", w)).items():
                outputs[i][w] = v
    return MpcResult(dict(outputs), tuple(tuple(v) for v in session.views))


# --- privacy audit ----------------------------------------------------------------


@dataclass(frozen=True)
class AuditResult:
    passed: bool
    runs: int
    groups: int
    witness: dict | None = None

    def to_dict(self) -> dict:
        return {"passed": self.passed, "runs": self.runs, "groups": self.groups,
                "witness": self.witness}


def count_randomness(circuit: Circuit, n: int, t: int, p: int, rerandomize=True) -> int:
    counter = _Counting()
    per_player = Counter(g.player for g in circuit.gates if g.op == "input")
    inputs = {pl: [0] * k for pl, k in per_player.items()}
    evaluate_circuit(circuit, inputs, n, t, counter, p, rerandomize=rerandomize)
    return counter.count


def privacy_audit(
    circuit: Circuit,
    coalition: Iterable[int],
    n: int,
    t: int,
    p: int,
    *,
    cap: int = 10**6,
    rerandomize: bool = True,
) -> AuditResult:
    """Exhaustively compare the coalition's view distributions.

    For every fixing of the coalition's inputs and outputs, the multiset of
    joint views over all randomness must be the same for every choice of the
    other players' inputs that produces those outputs.
    """
    coalition = sorted(set(coalition))
    if len(coalition) > (n - 1) // 2:
        raise CoalitionTooLarge(
            f"coalition of {len(coalition)} is not a proper minority bound floor((n-1)/2)"
        )
    if any(not 0 <= i < n for i in coalition):
        raise CoalitionTooLarge("coalition members must be players")
    check_field(p, default_alphas(n))
    circuit.validate(n)
    draws = count_randomness(circuit, n, t, p, rerandomize)
    in_wires = circuit.input_gates()
    total = p ** (len(in_wires) + draws)
    if total > cap:
        raise SearchSpaceTooLarge(total, cap)

    members = set(coalition)
    # key -> {other players' inputs -> Counter(view)}
    groups: dict[tuple, dict[tuple, Counter]] = defaultdict(lambda: defaultdict(Counter))
    for values in itertools.product(range(p), repeat=len(in_wires)):
        by_player = defaultdict(list)
        for w, v in zip(in_wires, values):
            by_player[circuit.gates[w].player].append(v)
        own = tuple(v for w, v in zip(in_wires, values) if circuit.gates[w].player in members)
        others = tuple(v for w, v in zip(in_wires, values) if circuit.gates[w].player not in members)
        for tape in itertools.product(range(p), repeat=draws):
            res = evaluate_circuit(circuit, by_player, n, t, Tape(tape), p, rerandomize=rerandomize)
            outs = tuple(sorted((i, tuple(sorted(res.outputs.get(i, {}).items()))) for i in coalition))
            view = tuple(res.views[i] for i in coalition)
            groups[(own, outs)][others][view] += 1

    for key, dists in groups.items():
        items = list(dists.items())
        ref_inputs, ref = items[0]
        for other_inputs, dist in items[1:]:
            if dist != ref:
                witness = {
                    "coalition_inputs": list(key[0]),
                    "coalition_outputs": [[i, [list(o) for o in outs]] for i, outs in key[1]],
                    "other_inputs_a": list(ref_inputs),
                    "other_inputs_b": list(other_inputs),
                }
                return AuditResult(False, total, len(groups), witness)
    return AuditResult(True, total, len(groups))


# --- circuit file --------------------------------------------------------------


def circuit_from_dict(data: Mapping) -> tuple[Circuit, dict]:
    if not isinstance(data, Mapping) or not {"p", "n", "t", "gates"} <= set(data):
        raise CircuitError("circuit file needs p, n, t and gates")
    unknown = set(data) - {"p", "n", "t", "gates"}
    if unknown:
        raise CircuitError(f"unknown circuit keys: {sorted(unknown)}")
    gates = []
    for g in data["gates"]:
        if not isinstance(g, Mapping) or "op" not in g or set(g) - {"op", "args", "player", "value"}:
            raise CircuitError(f"malformed gate {g!r}")
        gates.append(Gate(g["op"], tuple(g.get("args", ())), g.get("player"), g.get("value")))
    params = {k: data[k] for k in ("p", "n", "t")}
    for k, v in params.items():
        if isinstance(v, bool) or not isinstance(v, int):
            raise CircuitError(f"{k} must be an integer")
    circuit = Circuit(tuple(gates))
    circuit.validate(params["n"])
    return circuit, params


def circuit_to_dict(circuit: Circuit, p: int, n: int, t: int) -> dict:
    gates = []
    for g in circuit.gates:
        entry = {"op": g.op}
        if g.args:
            entry["args"] = list(g.args)
        if g.player is not None:
            entry["player"] = g.player
        if g.value is not None:
            entry["value"] = g.value
        gates.append(entry)
    return {"p": p, "n": n, "t": t, "gates": gates}


def load_circuit(path) -> tuple[Circuit, dict]:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CircuitError(f"circuit is not valid JSON: {exc}") from None
    return circuit_from_dict(data)


# common circuits


def and_circuit() -> Circuit:
    return Circuit((Gate("input", player=0), Gate("input", player=1), Gate("mul", (0, 1)),
                    Gate("output", (2,))))


def sum_circuit(n: int) -> Circuit:
    gates = [Gate("input", player=i) for i in range(n)]
    acc = 0
    for i in range(1, n):
        gates.append(Gate("add", (acc, i)))
        acc = len(gates) - 1
    gates.append(Gate("output", (acc,)))
    return Circuit(tuple(gates))
