import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causalorder.causal import enumerate_compatible
from causalorder.control import (
    PAULI_X,
    PAULI_Z,
    PhaseVector,
    ProcessFamily,
    build_switch,
    check_unbiased,
    classical_control,
    coherent_control_cp,
    coherent_control_of_diagram,
    coherent_control_pure,
    discard_control,
    discard_control_mixture,
    eq1_deviation,
    extract_phase,
    fourier_basis,
    no_signalling_deviation,
    nogo_witness,
    purification_dependence,
    shared_purifications,
    shift_control_outputs,
    superpose,
    verify_eq1,
)
from causalorder.diagram import compile_order, purify_diagram
from causalorder.process import (
    CPMap,
    QuantumInstrument,
    channel_distance,
    compose,
    dbl,
    discard,
    is_normalised,
    tensor,
    trace_defect,
)
from causalorder.randomized import (
    random_channel,
    random_cp_map,
    random_env_unitaries,
    random_instrument,
    random_pure_map,
    random_unitary,
)
from causalorder.tensor import basis_vector, max_abs
from oracles import haar_unitary, random_density, switch_formula

DEPHASE = CPMap.from_kraus([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def channel(f):
    return QuantumInstrument.from_channel(f, normalised=True)


def unitary_switch(u, v):
    return build_switch(2, u.shape[0], [channel(dbl(u)), channel(dbl(v))])


# --- classical and pure control ----------------------------------------------

def test_classical_control_singleton(rng):
    f = random_channel(2, 2, 2, rng)
    cp = classical_control(ProcessFamily.of([f]))
    assert channel_distance(cp.g, f) <= 1e-12


def test_classical_control_of_identities():
    cp = classical_control(ProcessFamily.of([CPMap.identity(2), CPMap.identity(2)]))
    assert channel_distance(cp.g, tensor(DEPHASE, CPMap.identity(2))) <= 1e-12


def test_classical_control_random_families(rng):
    for _ in range(20):
        n = int(rng.integers(1, 4))
        fam = ProcessFamily.of([random_cp_map(2, 3, 2, rng) for _ in range(n)])
        assert verify_eq1(classical_control(fam))


def test_coherent_control_pure_cnot():
    cp = coherent_control_pure(ProcessFamily.of([dbl(np.eye(2)), dbl(PAULI_X)]))
    assert channel_distance(cp.g, dbl(CNOT)) <= 1e-12
    assert verify_eq1(cp)


def test_coherent_control_pure_phase_gate():
    fam = ProcessFamily.of([dbl(np.eye(2)), dbl(np.eye(2))])
    cp = coherent_control_pure(fam, PhaseVector.from_list(fam.index, [0, math.pi]))
    assert channel_distance(cp.g, dbl(np.kron(PAULI_Z, np.eye(2)))) <= 1e-12


def test_coherent_control_pure_singleton(rng):
    u = random_unitary(3, rng)
    cp = coherent_control_pure(ProcessFamily.of([dbl(u)]), PhaseVector({"0": 2.5}))
    assert channel_distance(cp.g, dbl(u)) <= 1e-12


def test_coherent_control_pure_rejects_mixed():
    with pytest.raises(ValueError):
        coherent_control_pure(ProcessFamily.of([DEPHASE, CPMap.identity(2)]))


def test_coherent_control_cp_matches_pure_for_unitaries(rng):
    fam = ProcessFamily.of([dbl(random_unitary(2, rng)) for _ in range(3)])
    phase = PhaseVector.from_list(fam.index, [0.1, 0.7, 2.0])
    a = coherent_control_pure(fam, phase)
    b = coherent_control_cp(fam, phase)
    assert channel_distance(a.g, b.g) <= 1e-10


def test_coherent_control_cp_identity_and_dephasing():
    fam = ProcessFamily.of([CPMap.identity(2), DEPHASE])
    cp = coherent_control_cp(fam)
    assert eq1_deviation(cp) <= 1e-9
    assert no_signalling_deviation(cp) <= 1e-9


def test_eq1_measure_side_by_hand(rng):
    """``(m (x) id) . G`` against a dense Kraus expansion of ``sum_x |x><x| (x) F_x``."""
    fam = ProcessFamily.of([random_channel(2, 2, 2, rng), random_channel(2, 2, 1, rng)])
    cp = coherent_control_cp(fam)
    rho = random_density(rng, 4)
    measured = sum(np.kron(np.outer(e, e), np.eye(2)) @ cp.g(rho) @ np.kron(np.outer(e, e), np.eye(2))
                   for e in np.eye(2))
    expect = np.zeros((4, 4), dtype=complex)
    for x, f in enumerate(fam.members):
        proj = np.kron(np.outer(np.eye(2)[x], np.eye(2)[x]), np.eye(2))
        block = (proj @ rho @ proj)[2 * x:2 * x + 2, 2 * x:2 * x + 2]
        expect[2 * x:2 * x + 2, 2 * x:2 * x + 2] = f(block)
    assert max_abs(measured - expect) <= 1e-10


def test_corrupted_control_fails(rng):
    fam = ProcessFamily.of([dbl(np.eye(2)), dbl(PAULI_X)])
    cp = coherent_control_pure(fam)
    broken = shift_control_outputs(cp)
    assert not verify_eq1(broken)
    assert eq1_deviation(broken) >= 1e-2


# --- phase extraction ---------------------------------------------------------

def test_extract_phase_examples():
    fam = ProcessFamily.of([dbl(np.eye(2)), dbl(PAULI_X)])
    cp = coherent_control_pure(fam, PhaseVector.from_list(fam.index, [0, 1.234]))
    got = extract_phase(cp.g, fam)
    assert got.phases["0"] == pytest.approx(0, abs=1e-9)
    assert got.phases["1"] == pytest.approx(1.234, abs=1e-9)
    zero = extract_phase(CPMap.from_kraus([CNOT]), fam)
    assert max(min(v, 2 * math.pi - v) for v in zero.phases.values()) <= 1e-9


def test_extract_phase_random_round_trips(rng):
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(1, 4))
        d_in = int(rng.integers(1, 3))
        fam = ProcessFamily.of([dbl(random_unitary(d_in + 1, rng)[:, :d_in]) for _ in range(n)])
        phases = rng.uniform(0, 2 * math.pi, n)
        cp = coherent_control_pure(fam, PhaseVector.from_list(fam.index, phases))
        got = extract_phase(cp.g, fam)
        for x, p in zip(fam.index, phases):
            d = (got.phases[x] - (p - phases[0])) % (2 * math.pi)
            worst = max(worst, min(d, 2 * math.pi - d))
    assert worst <= 1e-8


def test_extract_phase_rejects_non_controlled():
    fam = ProcessFamily.of([dbl(np.eye(2)), dbl(PAULI_X)])
    with pytest.raises(ValueError):
        extract_phase(dbl(np.eye(4)), fam)


def test_phase_vector():
    p = PhaseVector({"a": 7.0, "b": -1.0})
    assert p.phases["a"] == pytest.approx(7.0 - 2 * math.pi)
    assert 0 <= p.phases["b"] < 2 * math.pi
    with pytest.raises(ValueError):
        p.factors(["a"])


# --- no-go witness ------------------------------------------------------------

def test_nogo_witness_separates():
    assert nogo_witness().distance > 0.05


def test_nogo_equal_unitaries_agree(rng):
    fam = nogo_witness().family
    for _ in range(10):
        u = random_unitary(2, rng)
        assert purification_dependence(fam, [u, u])[2] <= 1e-9


def test_common_environment_unitary_cancels(rng):
    for _ in range(10):
        fam = ProcessFamily.of([random_cp_map(2, 2, int(rng.integers(1, 4)), rng) for _ in range(3)])
        env = max(p.env_dim for p in shared_purifications(fam))
        u = random_unitary(env, rng)
        assert purification_dependence(fam, [u] * 3, PhaseVector.from_list(fam.index, [0, 1, 2]))[2] <= 1e-9


def test_nogo_trivial_environments(rng):
    fam = ProcessFamily.of([dbl(random_unitary(2, rng)) for _ in range(2)])
    phases = [np.array([[np.exp(1j * t)]]) for t in rng.uniform(0, 6, 2)]
    assert purification_dependence(fam, phases)[2] <= 1e-9


# --- switch and coherent control of diagrams ----------------------------------

@pytest.mark.parametrize("n,count", [(1, 1), (2, 2), (3, 6)])
def test_build_switch_counts(n, count, rng):
    phi, _ = build_switch(n, 2, [channel(dbl(random_unitary(2, rng))) for _ in range(n)])
    assert len(enumerate_compatible(phi)) == count


def test_switch_of_one_degenerates(rng):
    inst = random_instrument(2, 2, 1, 2, rng)
    phi, delta = build_switch(1, 2, [inst])
    s = superpose(phi, delta)
    assert s.measurement_outcomes.labels == ("0",)
    for (i, o), f in inst.branches.items():
        assert channel_distance(s.branches[(i, o, "0")], f) <= 1e-10


def test_diagram_control_matches_hand_built_switch(rng):
    u, v = haar_unitary(rng, 2), haar_unitary(rng, 2)
    phi, delta = unitary_switch(u, v)
    cp = coherent_control_of_diagram(phi, delta)
    p0, p1 = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    hand = np.kron(p0, v @ u) + np.kron(p1, u @ v)
    assert channel_distance(cp.g, dbl(hand)) <= 1e-10
    assert verify_eq1(cp)


def test_feeding_a_basis_order_gives_that_diagram(rng):
    phi, delta = build_switch(2, 2, [random_instrument(2, 2, 2, 1, rng), random_instrument(2, 2, 1, 2, rng)])
    cp = coherent_control_of_diagram(phi, delta)
    for k, c in enumerate(enumerate_compatible(phi)):
        prep = CPMap.from_kraus([basis_vector(k, 2)])
        routed = compose(tensor(discard(2), CPMap.identity(cp.g.dim_out.total // 2)),
                         compose(cp.g, tensor(prep, CPMap.identity(cp.g.dim_in.total // 2))))
        expect = compile_order(phi, delta, c).instrument.to_cpmap()
        assert max_abs(routed.choi - expect.choi) <= 1e-10


def test_diagram_control_purification_invariance(rng):
    phi, delta = build_switch(2, 2, [random_instrument(2, 2, 1, 2, rng), channel(DEPHASE)])
    pd = purify_diagram(phi, delta)
    phase = PhaseVector.from_list([c.canonical_key for c in enumerate_compatible(phi)], [0.3, 1.9])
    base = coherent_control_of_diagram(phi, delta, phase, pd)
    for _ in range(20):
        changed = pd.with_env_unitaries(random_env_unitaries(pd, rng))
        assert channel_distance(base.g, coherent_control_of_diagram(phi, delta, phase, changed).g) <= 1e-8


# --- superposition of causal orders ------------------------------------------

def test_xz_switch_never_gives_plus(rng):
    s = superpose(*unitary_switch(PAULI_X, PAULI_Z))
    assert s.measurement_outcomes.labels == ("+", "-")
    for _ in range(20):
        probs = s.outcome_probabilities(random_density(rng, 2), "0,0")
        assert probs["+"] <= 1e-9
        assert probs["-"] == pytest.approx(1, abs=1e-9)


def test_identity_switch_never_gives_minus(rng):
    s = superpose(*unitary_switch(np.eye(2), np.eye(2)))
    for _ in range(5):
        assert s.outcome_probabilities(random_density(rng, 2), "0,0")["-"] <= 1e-9


@pytest.mark.parametrize("phase", [0.0, 0.8, math.pi])
def test_switch_branches_match_formula(phase, rng):
    u, v = haar_unitary(rng, 2), haar_unitary(rng, 2)
    phi, delta = unitary_switch(u, v)
    keys = [c.canonical_key for c in enumerate_compatible(phi)]
    s = superpose(phi, delta, PhaseVector.from_list(keys, [0.0, phase]))
    for label, op in switch_formula(u, v, phase).items():
        assert max_abs(s.branches[("0,0", "0,0", label)].choi - dbl(op).choi) <= 1e-10


def test_superposition_is_trace_preserving(rng):
    phi, delta = build_switch(3, 2, [random_instrument(2, 2, 2, 2, rng) for _ in range(3)])
    s = superpose(phi, delta)
    assert len(s.measurement_outcomes) == 6
    for i in s.input_set:
        assert max_abs(trace_defect(s.channel(i))) <= 1e-9


def test_custom_measurement_basis(rng):
    phi, delta = unitary_switch(PAULI_X, PAULI_Z)
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    a = superpose(phi, delta, measurement=h)
    b = superpose(phi, delta)
    for key, f in b.branches.items():
        assert channel_distance(a.branches[key], f) <= 1e-12
    with pytest.raises(ValueError):
        superpose(phi, delta, measurement=np.eye(2))
    with pytest.raises(ValueError):
        check_unbiased(np.eye(3))
    check_unbiased(fourier_basis(5))


# --- discarding the control ---------------------------------------------------

def test_point_mass_mixture(rng):
    fam = ProcessFamily.of([random_channel(2, 2, 2, rng) for _ in range(3)])
    cp = coherent_control_cp(fam)
    assert channel_distance(discard_control_mixture(cp, [0, 1, 0]), fam.members[1]) <= 1e-12


def test_uniform_mixture_on_switch(rng):
    u, v = haar_unitary(rng, 2), haar_unitary(rng, 2)
    cp = coherent_control_of_diagram(*unitary_switch(u, v))
    mix = discard_control_mixture(cp, [0.5, 0.5])
    expect = CPMap.from_kraus([v @ u / np.sqrt(2), u @ v / np.sqrt(2)])
    assert max_abs(mix.choi - expect.choi) <= 1e-10
    assert channel_distance(discard_control(cp, [0.5, 0.5]), mix) <= 1e-9


def test_mixture_routes_agree(rng):
    fam = ProcessFamily.of([random_channel(2, 3, 2, rng) for _ in range(3)])
    for cp in (classical_control(fam), coherent_control_cp(fam)):
        w = rng.dirichlet(np.ones(3))
        w = w / w.sum()
        assert channel_distance(discard_control(cp, w), discard_control_mixture(cp, w)) <= 1e-9


def test_mixture_rejects_bad_weights(rng):
    cp = classical_control(ProcessFamily.of([CPMap.identity(2)] * 2))
    with pytest.raises(ValueError):
        discard_control_mixture(cp, [0.7, 0.7])
    with pytest.raises(ValueError):
        discard_control_mixture(cp, {"9": 1.0})


# --- properties ---------------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 3), st.integers(1, 3))
def test_controlled_processes_satisfy_eq1(seed, n, d_in, d_out):
    rng = np.random.default_rng(seed)
    fam = ProcessFamily.of([random_cp_map(d_in, d_out, int(rng.integers(1, 3)), rng) for _ in range(n)])
    phase = PhaseVector.from_list(fam.index, rng.uniform(0, 2 * math.pi, n))
    assert eq1_deviation(classical_control(fam)) <= 1e-8
    assert eq1_deviation(coherent_control_cp(fam, phase)) <= 1e-8
    pure = ProcessFamily.of([random_pure_map(d_in, d_out, rng) for _ in range(n)])
    assert eq1_deviation(coherent_control_pure(pure, phase)) <= 1e-8


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 3))
def test_normalised_families_do_not_signal(seed, n, d):
    rng = np.random.default_rng(seed)
    fam = ProcessFamily.of([random_channel(d, d, int(rng.integers(1, 3)), rng) for _ in range(n)])
    cp = coherent_control_cp(fam, PhaseVector.from_list(fam.index, rng.uniform(0, 6, n)))
    assert is_normalised(cp.g)
    assert no_signalling_deviation(cp) <= 1e-9
