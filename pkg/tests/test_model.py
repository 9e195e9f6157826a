import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wignerdecay.hilbert import Operator, SubsystemLayout, build_operators, partial_trace
from wignerdecay.model import (
    DecayProfile,
    DegenerateGroundWarning,
    ModelParams,
    build_hamiltonian,
    decay_factor,
    hamiltonian_at,
    initial_state,
    longitudinal_term,
    thermal_state,
    tls_negativity_estimate,
)


def small(**kw):
    base = dict(fock_dim=12)
    base.update(kw)
    return ModelParams(**base)


# -- parameters and profiles -------------------------------------------------


@pytest.mark.parametrize(
    "changes",
    [
        {"omega": 0.0},
        {"omega0": -1.0},
        {"gR": -0.1},
        {"T": -0.01},
        {"kappa": float("nan")},
        {"n_ancillas": 4},
        {"coupling_type": "dicke"},
        {"fock_dim": 1},
    ],
)
def test_params_rejected(changes):
    with pytest.raises(ValueError):
        ModelParams(**changes)


def test_working_point_defaults():
    p = ModelParams()
    assert (p.omega, p.omega0, p.omegaA, p.gR, p.gA0, p.T, p.kappa) == (1.0, 2.0, 2.4, 0.6, 0.8, 0.02, 2e-3)
    assert p.layout.total_dim == 120


def test_profile_invariants():
    with pytest.raises(ValueError):
        DecayProfile("instant", 1.0)
    with pytest.raises(ValueError):
        DecayProfile("gaussian", 0.0)
    assert DecayProfile("gaussian", 2.0).switch_off_time == 4.0


def test_decay_factor_examples():
    inst = DecayProfile()
    assert decay_factor(-1e-12, inst) == 1.0
    assert decay_factor(0.0, inst) == 1.0
    assert decay_factor(1e-12, inst) == 0.0
    assert decay_factor(2.0, DecayProfile("gaussian", 1.0)) == pytest.approx(math.exp(-4), rel=1e-14)
    assert decay_factor(1.5, DecayProfile("exponential", 1.5)) == pytest.approx(math.exp(-2), rel=1e-14)


@given(st.floats(0, 50), st.sampled_from(["gaussian", "exponential"]), st.floats(0.01, 10))
@settings(max_examples=50, deadline=None)
def test_decay_factor_bounded_and_monotone(t, kind, tS):
    prof = DecayProfile(kind, tS)
    f = decay_factor(t, prof)
    assert 0.0 <= f <= 1.0
    assert decay_factor(t + 0.1, prof) <= f


# -- Hamiltonians ------------------------------------------------------------


def test_decoupled_spectrum():
    p = small(gR=0.0, gA0=0.0, n_ancillas=1, fock_dim=6)
    evals = np.linalg.eigvalsh(build_hamiltonian(p).matrix)
    expected = sorted(
        p.omega * n + s0 * p.omega0 / 2 + s1 * p.omegaA / 2
        for n, s0, s1 in itertools.product(range(6), (1, -1), (1, -1))
    )
    assert np.allclose(evals, expected, atol=1e-12)


@pytest.mark.parametrize("norm, scale", [("ladder", 1.0), ("quadrature", 0.5)])
@pytest.mark.parametrize("gA", [0.3, 0.8])
def test_longitudinal_ground_energy(norm, scale, gA):
    # Displaced-oscillator shift: -gA^2/omega for Xc = a + a^dag, half that for (a + a^dag)/sqrt(2).
    p = ModelParams(gR=0.0, gA0=gA, coupling_norm=norm, fock_dim=40)
    e0 = np.linalg.eigvalsh(build_hamiltonian(p).matrix)[0]
    assert e0 == pytest.approx(-scale * gA**2 / p.omega - p.omega0 / 2 - p.omegaA / 2, abs=1e-10)


def test_working_point_hamiltonian_hermitian():
    h = build_hamiltonian(ModelParams()).matrix
    assert h.shape == (120, 120)
    assert np.max(np.abs(h - h.conj().T)) < 1e-12


@pytest.mark.parametrize("n_anc", [1, 2, 3])
def test_linear_in_longitudinal_coupling(n_anc):
    p = small(n_ancillas=n_anc, fock_dim=6)
    ops = build_operators(p.layout)
    diff = build_hamiltonian(p, gA_value=0.7, ops=ops).matrix - build_hamiltonian(p, gA_value=0.0, ops=ops).matrix
    assert np.max(np.abs(diff - 0.7 * longitudinal_term(p, ops).matrix)) < 1e-12


@pytest.mark.parametrize("n_anc", [1, 2])
def test_rabi_parity_symmetry(n_anc):
    p = small(n_ancillas=n_anc, gA0=0.0)
    ops = build_operators(p.layout)
    parity = np.diag(np.exp(1j * np.pi * np.diag(ops.n.matrix).real)) @ ops.sz[0].matrix
    h = build_hamiltonian(p, ops=ops).matrix
    assert np.max(np.abs(parity @ h - h @ parity)) < 1e-10


def test_jcm_matches_rabi_single_excitation_element():
    for norm in ("ladder", "quadrature"):
        rabi = build_hamiltonian(small(coupling_norm=norm, gA0=0.0)).matrix
        jcm = build_hamiltonian(small(coupling_norm=norm, gA0=0.0, coupling_type="jcm")).matrix
        # Index layout (n, qubit0, ancilla); qubit index 0 = excited.
        e0 = 0 * 4 + 0 * 2 + 1
        g1 = 1 * 4 + 1 * 2 + 1
        assert jcm[e0, g1] == pytest.approx(rabi[e0, g1], abs=1e-14)
        assert abs(rabi[e0, g1]) > 0
        # Counter-rotating element present only for the Rabi form.
        e1 = 1 * 4 + 0 * 2 + 1
        g0 = 0 * 4 + 1 * 2 + 1
        assert abs(jcm[e1, g0]) < 1e-14 < abs(rabi[e1, g0])


def test_hamiltonian_at_follows_profile():
    p = small()
    prof = DecayProfile("gaussian", 1.0)
    h = hamiltonian_at(1.0, p, prof).matrix
    ref = build_hamiltonian(p, gA_value=p.gA0 * math.exp(-1)).matrix
    assert np.max(np.abs(h - ref)) < 1e-14
    swapped = p.with_(decaying="rabi")
    h2 = hamiltonian_at(5.0, swapped, DecayProfile()).matrix
    assert np.max(np.abs(h2 - build_hamiltonian(p, gR_value=0.0).matrix)) < 1e-14


# -- thermal state -----------------------------------------------------------


@pytest.mark.parametrize("T", [0.1, 0.5, 2.0])
def test_harmonic_thermal_populations(T):
    lay = SubsystemLayout(80, 0)
    ops = build_operators(lay)
    tau = thermal_state(Operator(ops.n.matrix, lay), T)
    pops = np.diag(tau.matrix).real
    nbar = 1.0 / math.expm1(1.0 / T)
    assert np.sum(np.arange(80) * pops) == pytest.approx(nbar, rel=1e-8)
    assert pops[1] / pops[0] == pytest.approx(math.exp(-1.0 / T), rel=1e-10)


def test_thermal_commutes_and_boltzmann():
    p = ModelParams()
    h = build_hamiltonian(p)
    tau = thermal_state(h, 0.3)
    assert np.max(np.abs(tau.matrix @ h.matrix - h.matrix @ tau.matrix)) < 1e-9
    e, v = np.linalg.eigh(h.matrix)
    pops = np.real(np.einsum("ia,ij,ja->a", v.conj(), tau.matrix, v))
    for i, j in [(0, 1), (0, 5), (3, 10)]:
        assert pops[j] / pops[i] == pytest.approx(math.exp(-(e[j] - e[i]) / 0.3), rel=1e-8)


def test_zero_temperature_ground_projector():
    h = build_hamiltonian(small())
    tau = thermal_state(h, 0.0)
    lam = np.linalg.eigvalsh(tau.matrix)
    assert lam[-1] == pytest.approx(1.0, abs=1e-10)
    assert np.sum(lam > 1e-10) == 1


def test_degenerate_ground_flagged():
    lay = SubsystemLayout(2, 1)
    h = Operator(np.diag([0.0, 0.0, 1.0, 1.0]).astype(complex), lay)
    with pytest.warns(DegenerateGroundWarning):
        tau = thermal_state(h, 0.0)
    assert np.allclose(np.diag(tau.matrix).real, [0.5, 0.5, 0, 0])


def test_no_overflow_at_low_temperature():
    tau = thermal_state(build_hamiltonian(ModelParams()), 1e-4)
    assert np.all(np.isfinite(tau.matrix))
    assert abs(np.trace(tau.matrix) - 1) < 1e-12


def test_working_point_initial_oscillator_populations():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        tau = initial_state(ModelParams())
    pops = np.diag(partial_trace(tau, 0).matrix).real
    assert set(np.argsort(pops)[-2:]) == {1, 2}


# -- negativity estimate -----------------------------------------------------


def test_tls_negativity_estimate():
    assert tls_negativity_estimate(1.0) == pytest.approx(-1 / math.pi)
    assert tls_negativity_estimate(0.5) == pytest.approx(-(0.5 / math.pi) * math.exp(-0.5))
    assert abs(tls_negativity_estimate(1e-3)) < 1e-200
    for bad in (0.0, 1.5, -0.2):
        with pytest.raises(ValueError):
            tls_negativity_estimate(bad)
