import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pendulum_qubits.circuit import (
    Circuit,
    circuit_unitary,
    cnot,
    measure,
    not_,
    parse_circuit,
    random_circuit,
    rx,
)
from pendulum_qubits.compiler import ControlSegment, PhysicalParams, compile_circuit
from pendulum_qubits.envelope_sim import (
    apply_gate,
    apply_schedule,
    apply_segment,
    prepare_singlet,
    run,
    run_shots,
    singlet_circuit,
)
from pendulum_qubits.errors import QubitIndexError
from pendulum_qubits.qstate import EnvelopeState, fidelity, init_ground, is_product_two_qubit, probabilities, random_state
from pendulum_qubits.rng import shot_rng

R = 1 / math.sqrt(2)
P = PhysicalParams.from_ratio(0.01)
DW = P.delta_omega_budget


class TestApplyGate:
    def test_not(self):
        np.testing.assert_array_equal(apply_gate(EnvelopeState(1, np.array([1, 0])), not_(0)).amplitudes, [0, 1])

    def test_half_transfer(self):
        out = apply_gate(EnvelopeState(1, np.array([0, 1])), rx(0, math.pi / 2))
        np.testing.assert_allclose(np.abs(out.amplitudes), [R, R], atol=1e-15)

    def test_cnot(self):
        out = apply_gate(EnvelopeState(2, np.array([0, 0, 1, 0])), cnot(0, 1))
        np.testing.assert_array_equal(out.amplitudes, [0, 0, 0, 1])

    def test_out_of_range(self):
        with pytest.raises(QubitIndexError):
            apply_gate(init_ground(1), cnot(0, 1))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 4), st.integers(1, 10), st.integers(0, 2**32 - 1))
    def test_matches_dense_unitary(self, n, k, seed):
        g = np.random.default_rng(seed)
        c = random_circuit(n, k, g)
        s = random_state(n, g)
        out = s
        for op in c.ops:
            out = apply_gate(out, op)
        np.testing.assert_allclose(out.amplitudes, circuit_unitary(c) @ s.amplitudes, atol=1e-12)


class TestApplySegment:
    def test_detuning_flips_relative_phase(self):
        out = apply_segment(EnvelopeState(1, np.array([R, R])), ControlSegment(math.pi / DW, {1: DW}))
        np.testing.assert_allclose(out.amplitudes, [R, -R], atol=1e-12)

    def test_spring_is_not(self):
        out = apply_segment(EnvelopeState(1, np.array([0, 1])), ControlSegment(math.pi / DW, springs=((0, 1, DW),)))
        assert fidelity(out, EnvelopeState(1, np.array([1, 0]))) == pytest.approx(1.0, abs=1e-12)

    def test_zero_duration_is_exact_identity(self, rng):
        s = random_state(2, rng)
        out = apply_segment(s, ControlSegment(0.0, {1: DW}, ((2, 3, DW),)))
        np.testing.assert_array_equal(out.amplitudes, s.amplitudes)

    @given(st.floats(0, 1000), st.floats(-2, 2))
    def test_symmetric_mode_untouched(self, t, w):
        # in-phase motion of a sprung pair never stretches the spring
        s = EnvelopeState(1, np.array([R, R]))
        seg = ControlSegment(t, springs=((0, 1, abs(w) + 1e-3),))
        np.testing.assert_allclose(apply_segment(s, seg).amplitudes, s.amplitudes, atol=1e-12)

    def test_linearity(self, rng):
        a, b = random_state(2, rng).amplitudes, random_state(2, rng).amplitudes
        seg = ControlSegment(17.0, {0: 0.3}, ((2, 3, DW),))
        lhs = apply_segment(EnvelopeState(2, a + 2j * b), seg).amplitudes
        rhs = apply_segment(EnvelopeState(2, a), seg).amplitudes + 2j * apply_segment(EnvelopeState(2, b), seg).amplitudes
        np.testing.assert_allclose(lhs, rhs, atol=1e-13)

    def test_index_bound(self):
        with pytest.raises(QubitIndexError):
            apply_segment(init_ground(1), ControlSegment(1.0, {2: DW}))


class TestSinglet:
    def test_amplitudes(self):
        np.testing.assert_allclose(prepare_singlet().amplitudes, [0, R, -R, 0])

    def test_entangled(self):
        ok, res = is_product_two_qubit(prepare_singlet())
        assert not ok and res == pytest.approx(0.5)

    def test_circuit_prepares_it(self):
        assert fidelity(run(singlet_circuit()).state, prepare_singlet()) == pytest.approx(1.0, abs=1e-12)


class TestRun:
    def test_not_then_measure(self):
        c = parse_circuit("qubits 1\nnot 0\nmeasure 0\n")
        assert all(r.outcomes == [1] for r in run_shots(c, 50, seed=1))

    def test_ground_measure_all(self):
        c = parse_circuit("qubits 2\nmeasure all\n")
        assert all(r.outcomes == ["00"] for r in run_shots(c, 20, seed=0))

    def test_singlet_only_opposite(self):
        c = parse_circuit("qubits 2\nh 0\ncnot 0 1\nnot 1\nrz 0 pi\nmeasure all\n")
        outs = {r.outcomes[0] for r in run_shots(c, 10_000, seed=2)}
        assert outs == {"01", "10"}

    def test_threads_do_not_change_results(self):
        c = parse_circuit("qubits 2\nh 0\nh 1\nmeasure 0\nmeasure 1\n")
        a = [r.outcomes for r in run_shots(c, 200, seed=4, threads=1)]
        b = [r.outcomes for r in run_shots(c, 200, seed=4, threads=4)]
        assert a == b

    def test_sequential_consistency(self):
        # measuring qubit 0 then qubit 1 samples the same joint law as the Born rule
        s = random_state(2, np.random.default_rng(8))
        c = Circuit(2, (measure(0), measure(1)))
        n = 20_000
        counts = np.zeros(4)
        for i in range(n):
            o = run(c, rng=shot_rng(6, i), initial=s).outcomes
            counts[2 * o[0] + o[1]] += 1
        p = probabilities(s)
        sigma = np.sqrt(p * (1 - p) / n)
        assert np.all(np.abs(counts / n - p) <= 4 * sigma + 1e-12)


class TestBackendEquivalence:
    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 4), st.integers(0, 12), st.integers(0, 2**32 - 1))
    def test_gates_vs_schedule(self, n, k, seed):
        g = np.random.default_rng(seed)
        c = random_circuit(n, k, g)
        s = random_state(n, g)
        by_gates = run(c, initial=s).state
        by_schedule, _ = apply_schedule(s, compile_circuit(c, P))
        assert fidelity(by_gates, by_schedule) == pytest.approx(1.0, abs=1e-9)

    def test_schedule_measurement_needs_rng(self):
        sched = compile_circuit(parse_circuit("qubits 1\nmeasure 0\n"), P)
        with pytest.raises(ValueError):
            apply_schedule(init_ground(1), sched)
