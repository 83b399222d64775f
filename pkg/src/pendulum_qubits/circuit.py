"""Gate-level circuits: IR, reference unitaries, and the ``.qc`` text format.

The text format is line oriented::

    # Bell pair
    qubits 2
    h 0
    cnot 0 1
    measure all

Angles accept rational multiples of pi (``pi``, ``-pi/2``, ``3pi/4``,
``3*pi/4``) or plain decimal radians (``0.25``, ``1e-3``).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import PendulumError, QubitIndexError
from .qstate import MAX_QUBITS

ONE_QUBIT = ("rz", "rx", "not", "h")
TWO_QUBIT = ("cnot", "cphase", "swap")
MEASUREMENTS = ("measure", "measure_all")
ANGLED = ("rz", "rx", "cphase")
KINDS = ONE_QUBIT + TWO_QUBIT + MEASUREMENTS


@dataclass(frozen=True)
class GateOp:
    kind: str
    qubits: tuple[int, ...] = ()
    angle: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        want = 0 if self.kind == "measure_all" else 2 if self.kind in TWO_QUBIT else 1
        if len(self.qubits) != want:
            raise ValueError(f"{self.kind} takes {want} qubit(s), got {len(self.qubits)}")
        if any(q < 0 for q in self.qubits):
            raise QubitIndexError(f"negative qubit index in {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"{self.kind} needs distinct qubits, got {self.qubits}")
        if self.kind in ANGLED:
            if self.angle is None or not math.isfinite(self.angle):
                raise ValueError(f"{self.kind} needs a finite angle")
            object.__setattr__(self, "angle", float(self.angle))
        elif self.angle is not None:
            raise ValueError(f"{self.kind} takes no angle")

    @property
    def is_measurement(self) -> bool:
        return self.kind in MEASUREMENTS

    def __str__(self) -> str:
        if self.kind == "measure_all":
            return "measure all"
        parts = [self.kind, *map(str, self.qubits)]
        if self.angle is not None:
            parts.append(format_angle(self.angle))
        return " ".join(parts)


def rz(q: int, angle: float) -> GateOp:
    return GateOp("rz", (q,), angle)


def rx(q: int, angle: float) -> GateOp:
    return GateOp("rx", (q,), angle)


def not_(q: int) -> GateOp:
    return GateOp("not", (q,))


def h(q: int) -> GateOp:
    return GateOp("h", (q,))


def cnot(control: int, target: int) -> GateOp:
    return GateOp("cnot", (control, target))


def cphase(control: int, target: int, angle: float) -> GateOp:
    return GateOp("cphase", (control, target), angle)


def swap(a: int, b: int) -> GateOp:
    return GateOp("swap", (a, b))


def measure(q: int) -> GateOp:
    return GateOp("measure", (q,))


def measure_all() -> GateOp:
    return GateOp("measure_all")


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    ops: tuple[GateOp, ...] = ()
    source_spans: tuple[tuple[int, int], ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "ops", tuple(self.ops))
        for op in self.ops:
            for q in op.qubits:
                if q >= self.n_qubits:
                    raise QubitIndexError(f"qubit {q} out of range for {self.n_qubits} qubits")

    @property
    def has_measurements(self) -> bool:
        return any(op.is_measurement for op in self.ops)


# ---------------------------------------------------------------------------
# text format

@dataclass(frozen=True)
class Diagnostic:
    line: int
    column: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}, col {self.column}: {self.message}"


class CircuitParseError(PendulumError, ValueError):
    """Raised with every diagnostic collected while parsing a circuit."""

    def __init__(self, diagnostics: Sequence[Diagnostic]):
        self.diagnostics = tuple(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


_NUMBER = r"(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
_PI_RE = re.compile(rf"^([+-])?(?:({_NUMBER})\*?)?pi(?:/(\d+))?$")
_FLOAT_RE = re.compile(rf"^[+-]?{_NUMBER}$")
_INT_RE = re.compile(r"^\d+$")

_ARITY = {
    "rz": (1, True),
    "rx": (1, True),
    "not": (1, False),
    "h": (1, False),
    "cnot": (2, False),
    "cphase": (2, True),
    "swap": (2, False),
    "measure": (1, False),
}


def _pi_multiple(negative: bool, coef: float, denom: int) -> float:
    value = coef * math.pi / denom
    return -value if negative else value


def parse_angle(token: str) -> float:
    """Parse ``pi``-multiples or decimal radians; raises ValueError."""
    text = token.strip().lower()
    m = _PI_RE.match(text)
    if m:
        sign, coef, denom = m.groups()
        d = int(denom) if denom else 1
        if d == 0:
            raise ValueError("division by zero in angle")
        return _pi_multiple(sign == "-", float(coef) if coef else 1.0, d)
    if _FLOAT_RE.match(text):
        return float(text)
    raise ValueError(f"malformed angle {token!r}")


def format_angle(angle: float) -> str:
    """Inverse of :func:`parse_angle`, preferring ``kpi/q`` when it is exact."""
    if angle == 0:
        return "0"
    for denom in range(1, 65):
        k = round(angle * denom / math.pi)
        if k == 0 or abs(k) > 10_000:
            continue
        if _pi_multiple(k < 0, float(abs(k)), denom) == angle:
            coef = "" if abs(k) == 1 else str(abs(k))
            sign = "-" if k < 0 else ""
            return f"{sign}{coef}pi" + (f"/{denom}" if denom > 1 else "")
    return repr(float(angle))


def parse_circuit(text: str, max_qubits: int = MAX_QUBITS) -> Circuit:
    """Parse circuit text, collecting every diagnostic before raising."""
    diags: list[Diagnostic] = []
    ops: list[GateOp] = []
    spans: list[tuple[int, int]] = []
    n_qubits: Optional[int] = None
    header_seen = False
    missing_reported = False
    instructions_seen = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        tokens = [(m.group(), m.start() + 1) for m in re.finditer(r"\S+", body)]
        if not tokens:
            continue
        word, col = tokens[0][0].lower(), tokens[0][1]
        args = tokens[1:]

        if word == "qubits":
            if header_seen:
                diags.append(Diagnostic(lineno, col, "duplicate 'qubits' header"))
                continue
            header_seen = True
            if instructions_seen:
                diags.append(Diagnostic(lineno, col, "'qubits' header must precede instructions"))
            if len(args) != 1 or not _INT_RE.match(args[0][0]):
                diags.append(Diagnostic(lineno, col, "header must read 'qubits <n>'"))
                continue
            n = int(args[0][0])
            if not 1 <= n <= max_qubits:
                diags.append(Diagnostic(lineno, args[0][1], f"qubit count {n} outside [1, {max_qubits}]"))
                continue
            n_qubits = n
            continue

        instructions_seen = True
        if not header_seen and not missing_reported:
            diags.append(Diagnostic(lineno, col, "missing 'qubits <n>' header"))
            missing_reported = True

        if word == "measure" and len(args) == 1 and args[0][0].lower() == "all":
            ops.append(measure_all())
            spans.append((lineno, col))
            continue
        if word not in _ARITY:
            diags.append(Diagnostic(lineno, col, f"unknown instruction {tokens[0][0]!r}"))
            continue

        n_q, angled = _ARITY[word]
        want = n_q + int(angled)
        if len(args) != want:
            usage = " ".join([word] + ["q"] * n_q + (["angle"] if angled else []))
            diags.append(Diagnostic(lineno, col, f"{word} takes {want} argument(s): '{usage}'"))
            continue

        line_ok = True
        qubits: list[int] = []
        for tok, tcol in args[:n_q]:
            if not _INT_RE.match(tok):
                diags.append(Diagnostic(lineno, tcol, f"invalid qubit index {tok!r}"))
                line_ok = False
                continue
            q = int(tok)
            if n_qubits is not None and q >= n_qubits:
                diags.append(Diagnostic(lineno, tcol, f"qubit {q} out of range"))
                line_ok = False
            qubits.append(q)
        if line_ok and len(set(qubits)) != len(qubits):
            diags.append(Diagnostic(lineno, col, f"{word} needs distinct qubits"))
            line_ok = False

        angle = None
        if angled:
            tok, tcol = args[-1]
            try:
                angle = parse_angle(tok)
            except ValueError as exc:
                diags.append(Diagnostic(lineno, tcol, str(exc)))
                line_ok = False

        if line_ok:
            ops.append(GateOp(word, tuple(qubits), angle))
            spans.append((lineno, col))

    if not header_seen and not missing_reported:
        diags.append(Diagnostic(1, 1, "missing 'qubits <n>' header"))
    if diags:
        raise CircuitParseError(diags)
    assert n_qubits is not None
    return Circuit(n_qubits, tuple(ops), tuple(spans))


def format_circuit(circuit: Circuit) -> str:
    lines = [f"qubits {circuit.n_qubits}"]
    lines.extend(str(op) for op in circuit.ops)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# reference unitaries

def _rz_matrix(angle: float) -> np.ndarray:
    return np.diag([1.0, np.exp(1j * angle)]).astype(np.complex128)


def _rx_matrix(angle: float) -> np.ndarray:
    # symmetric pair combination untouched, antisymmetric one gains e^{i angle}
    e = np.exp(1j * angle)
    return 0.5 * np.array([[1 + e, 1 - e], [1 - e, 1 + e]], dtype=np.complex128)


_NOT = np.array([[0, 1], [1, 0]], dtype=np.complex128)


def single_qubit_matrix(g: GateOp) -> np.ndarray:
    if g.kind == "rz":
        return _rz_matrix(g.angle)
    if g.kind == "rx":
        return _rx_matrix(g.angle)
    if g.kind == "not":
        return _NOT.copy()
    if g.kind == "h":
        half = math.pi / 2
        return _rz_matrix(half) @ _rx_matrix(half) @ _rz_matrix(half)
    raise ValueError(f"{g.kind} is not a single-qubit gate")


def bit(index: int, qubit: int, n_qubits: int) -> int:
    """Digit of ``qubit`` in pendulum ``index`` (qubit 0 is the MSB)."""
    return (index >> (n_qubits - 1 - qubit)) & 1


def unitary_of_gate(g: GateOp, n_qubits: int) -> np.ndarray:
    """Dense 2**n x 2**n reference matrix of a non-measurement gate."""
    if g.is_measurement:
        raise ValueError("measurements have no unitary")
    if any(q >= n_qubits for q in g.qubits):
        raise QubitIndexError(f"{g} does not fit in {n_qubits} qubits")
    dim = 1 << n_qubits
    if g.kind in ONE_QUBIT:
        (q,) = g.qubits
        left = np.eye(1 << q, dtype=np.complex128)
        right = np.eye(1 << (n_qubits - q - 1), dtype=np.complex128)
        return np.kron(np.kron(left, single_qubit_matrix(g)), right)

    a, b = g.qubits
    u = np.zeros((dim, dim), dtype=np.complex128)
    for k in range(dim):
        ba, bb = bit(k, a, n_qubits), bit(k, b, n_qubits)
        if g.kind == "cnot":
            image = k ^ (1 << (n_qubits - 1 - b)) if ba else k
            u[image, k] = 1.0
        elif g.kind == "cphase":
            u[k, k] = np.exp(1j * g.angle) if ba and bb else 1.0
        else:  # swap
            image = k
            if ba != bb:
                image = k ^ (1 << (n_qubits - 1 - a)) ^ (1 << (n_qubits - 1 - b))
            u[image, k] = 1.0
    return u


def circuit_unitary(c: Circuit) -> np.ndarray:
    if c.has_measurements:
        raise ValueError("circuit contains measurements")
    u = np.eye(1 << c.n_qubits, dtype=np.complex128)
    for op in c.ops:
        u = unitary_of_gate(op, c.n_qubits) @ u
    return u


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, atol: float) -> bool:
    """True if ``a == e^{i chi} b`` elementwise within ``atol`` for some chi."""
    return phase_aligned_distance(a, b) <= atol


def phase_aligned_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Max-abs distance between ``a`` and ``b`` after removing the best global phase."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    overlap = np.vdot(b, a)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.max(np.abs(a - phase * b)))


def random_circuit(
    n_qubits: int, n_gates: int, rng: np.random.Generator, kinds: Iterable[str] = ONE_QUBIT + TWO_QUBIT
) -> Circuit:
    """Random measurement-free circuit; used by equivalence checks."""
    kinds = [k for k in kinds if n_qubits >= 2 or k not in TWO_QUBIT]
    ops = []
    for _ in range(n_gates):
        kind = kinds[rng.integers(len(kinds))]
        if kind in TWO_QUBIT:
            qs = tuple(int(q) for q in rng.choice(n_qubits, size=2, replace=False))
        else:
            qs = (int(rng.integers(n_qubits)),)
        angle = float(rng.uniform(-2 * math.pi, 2 * math.pi)) if kind in ANGLED else None
        ops.append(GateOp(kind, qs, angle))
    return Circuit(n_qubits, tuple(ops))
