import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pendulum_qubits.circuit import (
    Circuit,
    CircuitParseError,
    GateOp,
    circuit_unitary,
    cnot,
    cphase,
    equal_up_to_phase,
    format_angle,
    format_circuit,
    h,
    not_,
    parse_angle,
    parse_circuit,
    random_circuit,
    rx,
    rz,
    single_qubit_matrix,
    swap,
    unitary_of_gate,
)
from pendulum_qubits.errors import QubitIndexError

HADAMARD = np.array([[1, 1], [1, -1]]) / math.sqrt(2)


class TestGateOp:
    def test_distinct_qubits(self):
        with pytest.raises(ValueError):
            cnot(1, 1)

    def test_negative_index(self):
        with pytest.raises(QubitIndexError):
            not_(-1)

    def test_angle_required(self):
        with pytest.raises(ValueError):
            GateOp("rz", (0,))

    def test_no_angle_on_not(self):
        with pytest.raises(ValueError):
            GateOp("not", (0,), 1.0)

    def test_non_finite_angle(self):
        with pytest.raises(ValueError):
            rz(0, math.inf)

    def test_circuit_index_bound(self):
        with pytest.raises(QubitIndexError):
            Circuit(2, (cnot(0, 2),))


class TestReferenceMatrices:
    def test_rz_pi(self):
        np.testing.assert_allclose(single_qubit_matrix(rz(0, math.pi)), np.diag([1, -1]), atol=1e-15)

    def test_rx_half_pi_is_conjugate_of_textbook_form(self):
        textbook = np.array([[1, 1j], [1j, 1]]) / math.sqrt(2)
        u = single_qubit_matrix(rx(0, math.pi / 2))
        assert equal_up_to_phase(u.conj(), textbook, atol=1e-12)
        assert not equal_up_to_phase(u, textbook, atol=1e-3)

    def test_not(self):
        np.testing.assert_allclose(single_qubit_matrix(not_(0)), [[0, 1], [1, 0]], atol=1e-15)

    def test_h_is_hadamard(self):
        assert equal_up_to_phase(single_qubit_matrix(h(0)), HADAMARD, atol=1e-12)

    def test_h_composition(self):
        q = math.pi / 2
        composed = single_qubit_matrix(rz(0, q)) @ single_qubit_matrix(rx(0, q)) @ single_qubit_matrix(rz(0, q))
        assert equal_up_to_phase(composed, HADAMARD, atol=1e-12)

    def test_cnot_truth_table(self):
        u = unitary_of_gate(cnot(0, 1), 2)
        np.testing.assert_array_equal(u @ [0, 0, 1, 0], [0, 0, 0, 1])
        np.testing.assert_array_equal(u @ [0, 1, 0, 0], [0, 1, 0, 0])

    def test_cphase(self):
        np.testing.assert_allclose(unitary_of_gate(cphase(0, 1, 0.7), 2), np.diag([1, 1, 1, np.exp(0.7j)]))

    def test_swap(self):
        u = unitary_of_gate(swap(0, 1), 2)
        np.testing.assert_array_equal(u @ [0, 1, 0, 0], [0, 0, 1, 0])

    def test_single_qubit_embedding(self):
        u = unitary_of_gate(not_(1), 2)
        np.testing.assert_array_equal(u, np.kron(np.eye(2), [[0, 1], [1, 0]]))


class TestCircuitUnitary:
    def test_empty(self):
        np.testing.assert_array_equal(circuit_unitary(Circuit(2, ())), np.eye(4))

    def test_double_not(self):
        np.testing.assert_allclose(circuit_unitary(Circuit(1, (not_(0), not_(0)))), np.eye(2), atol=1e-15)

    def test_double_cnot(self):
        np.testing.assert_allclose(circuit_unitary(Circuit(2, (cnot(0, 1), cnot(0, 1)))), np.eye(4), atol=1e-15)

    def test_rejects_measurement(self):
        with pytest.raises(ValueError):
            circuit_unitary(parse_circuit("qubits 1\nmeasure 0\n"))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 4), st.integers(0, 12), st.integers(0, 2**32 - 1))
    def test_unitary(self, n, k, seed):
        u = circuit_unitary(random_circuit(n, k, np.random.default_rng(seed)))
        np.testing.assert_allclose(u.conj().T @ u, np.eye(1 << n), atol=1e-12)


class TestParser:
    def test_cnot(self):
        assert parse_circuit("qubits 2\ncnot 0 1").ops == (cnot(0, 1),)

    def test_rz(self):
        c = parse_circuit("qubits 1\nrz 0 pi/2")
        assert c.n_qubits == 1 and c.ops == (rz(0, math.pi / 2),)

    def test_out_of_range(self):
        with pytest.raises(CircuitParseError) as err:
            parse_circuit("qubits 2\ncnot 0 5")
        (d,) = err.value.diagnostics
        assert d.line == 2 and "qubit 5 out of range" in d.message

    def test_collects_all_diagnostics(self):
        with pytest.raises(CircuitParseError) as err:
            parse_circuit("qubits 2\nfoo\nbar\nh 9\n")
        assert [d.line for d in err.value.diagnostics] == [2, 3, 4]

    def test_error_message_mentions_lines(self):
        with pytest.raises(CircuitParseError, match="line 2"):
            parse_circuit("qubits 1\nh\n")

    def test_source_spans_ignored_in_equality(self):
        assert parse_circuit("qubits 1\n\n\nnot 0") == parse_circuit("qubits 1\nnot 0")


class TestAngles:
    @pytest.mark.parametrize(
        "text, value",
        [("pi", math.pi), ("-pi/2", -math.pi / 2), ("3pi/4", 3 * math.pi / 4), ("3*pi/4", 3 * math.pi / 4),
         ("0.25", 0.25), ("1e-3", 1e-3), ("-2", -2.0), ("PI", math.pi)],
    )
    def test_parse(self, text, value):
        assert parse_angle(text) == pytest.approx(value, rel=1e-15)

    @pytest.mark.parametrize("text", ["", "pi/", "2pi/0", "tau", "1..2", "pi*2"])
    def test_malformed(self, text):
        with pytest.raises(ValueError):
            parse_angle(text)

    def test_format_prefers_pi_fractions(self):
        assert format_angle(math.pi / 2) == "pi/2"
        assert format_angle(-3 * math.pi / 4) == "-3pi/4"
        assert format_angle(0.0) == "0"

    @given(st.floats(-100, 100, allow_nan=False))
    def test_format_is_exact_inverse(self, a):
        assert parse_angle(format_angle(a)) == a


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5), st.integers(0, 15), st.integers(0, 2**32 - 1))
def test_round_trip(n, k, seed):
    c = random_circuit(n, k, np.random.default_rng(seed), kinds=("rz", "rx", "not", "h", "cnot", "cphase", "swap", "measure"))
    text = format_circuit(c)
    again = parse_circuit(text)
    assert again == c
    assert format_circuit(again) == text
