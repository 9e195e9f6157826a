import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wignerdecay.analysis import fidelity
from wignerdecay.dynamics import (
    BathSpec,
    IntegrationError,
    TimeGrid,
    _segments,
    bose_einstein,
    build_generator,
    evolve,
    evolve_fixed,
    verify_thermalization,
)
from wignerdecay.hilbert import (
    DensityMatrix,
    Operator,
    SubsystemLayout,
    build_operators,
    fock_state,
    hermitian_function,
    random_density,
)
from wignerdecay.model import DecayProfile, ModelParams, build_hamiltonian, thermal_state

WP = ModelParams()


def resolved(params=WP, **kw):
    return BathSpec(**kw).resolved(params)


# -- bath spec ---------------------------------------------------------------


@pytest.mark.parametrize(
    "kw",
    [
        {"coupling_ops": ("Q",)},
        {"coupling_ops": ("X0",)},
        {"base_rate": -1.0},
        {"temperature": -0.1},
        {"zero_freq_policy": "maybe"},
        {"refresh_fraction": 0.0},
        {"min_rebuilds": 0},
    ],
)
def test_bath_spec_rejected(kw):
    with pytest.raises(ValueError):
        BathSpec(**kw)


def test_bath_spec_resolution_and_operators():
    b = BathSpec().resolved(WP)
    assert (b.base_rate, b.temperature) == (WP.kappa, WP.T)
    ops = build_operators(WP.layout)
    assert len(b.operators(ops)) == 3  # X and sigma_x of both qubits
    assert len(BathSpec(coupling_ops=("sx1",)).operators(ops)) == 1
    with pytest.raises(ValueError):
        BathSpec(coupling_ops=("sx5",)).operators(ops)


def test_unresolved_bath_rejected():
    with pytest.raises(ValueError):
        build_generator(build_hamiltonian(WP), BathSpec())


def test_time_grid():
    g = TimeGrid(0.0, 1.0, 0.25)
    assert np.allclose(g.times, [0, 0.25, 0.5, 0.75, 1.0])
    with pytest.raises(ValueError):
        TimeGrid(1.0, 0.5)
    with pytest.raises(ValueError):
        TimeGrid(0.0, 1.0, 0.1, dt_int=0.2)


def test_bose_einstein():
    assert bose_einstein(1.0, 0.0) == 0.0
    assert bose_einstein(1.0, 0.5) == pytest.approx(1 / math.expm1(2.0))
    assert np.isfinite(bose_einstein(1e3, 1e-3))


# -- generator ---------------------------------------------------------------


@pytest.mark.parametrize("T", [0.02, 0.3, 1.0])
def test_detailed_balance(T):
    gen = build_generator(build_hamiltonian(WP), resolved(temperature=T))
    assert gen.detailed_balance_residual() < 1e-9
    assert np.allclose(gen.rate_matrix.sum(axis=0), 0.0, atol=1e-15)


@given(
    st.sampled_from([0.3, 0.5, 0.7, 0.9]),
    st.sampled_from([0.0, 0.2, 0.6, 1.0, 1.2]),
    st.sampled_from([0.02, 0.1, 1.0]),
    st.sampled_from(["drop", "keep"]),
)
@settings(max_examples=12, deadline=None)
def test_gibbs_state_stationary(gR, gA, T, policy):
    p = WP.with_(gR=gR, gA0=gA, T=T, fock_dim=20)
    h = build_hamiltonian(p)
    gen = build_generator(h, resolved(p, zero_freq_policy=policy))
    tau = thermal_state(h, T)
    assert np.max(np.abs(gen.derivative(tau))) < 1e-8


def test_zero_temperature_has_no_uphill_rates():
    gen = build_generator(build_hamiltonian(WP), resolved(temperature=0.0))
    assert np.all(np.triu(gen.rates, 1) == 0.0)


def test_keep_policy_adds_dephasing():
    p = WP.with_(fock_dim=12)
    drop = build_generator(build_hamiltonian(p), resolved(p))
    keep = build_generator(build_hamiltonian(p), resolved(p, zero_freq_policy="keep"))
    assert np.all(drop.dephasing == 0.0)
    assert keep.dephasing.max() > 0.0


def test_single_mode_damping():
    lay = SubsystemLayout(10, 0)
    ops = build_operators(lay)
    h = Operator(ops.n.matrix, lay)
    kappa = 0.05
    bath = BathSpec(coupling_ops=("X",), base_rate=kappa, temperature=0.0)
    rho1 = fock_state(1, lay).density()
    times = np.linspace(0, 60, 7)
    states = evolve_fixed(rho1, h, bath, times)
    for t, s in zip(times, states):
        assert s[1, 1].real == pytest.approx(math.exp(-kappa * t / 2), abs=1e-12)


def test_unitary_limit_matches_direct_propagation():
    p = WP.with_(fock_dim=16, kappa=0.0)
    h = build_hamiltonian(p)
    rng = np.random.default_rng(11)
    rho0 = random_density(h.dim, rng)
    times = [0.3, 2.0, 7.5]
    states = evolve_fixed(rho0, h, resolved(p), times)
    for t, s in zip(times, states):
        u = hermitian_function(h, lambda e: np.exp(-1j * e * t)).matrix
        assert np.max(np.abs(s - u @ rho0 @ u.conj().T)) < 1e-8


def test_kappa_zero_keeps_eigen_populations():
    p = WP.with_(fock_dim=12, kappa=0.0)
    h = build_hamiltonian(p)
    gen = build_generator(h, resolved(p))
    rho0 = random_density(h.dim, np.random.default_rng(2))
    (final,) = evolve_fixed(rho0, h, resolved(p), [40.0])
    assert np.allclose(np.diag(gen.to_eigen(final)), np.diag(gen.to_eigen(rho0)), atol=1e-10)


def test_energy_monotone_at_zero_temperature():
    p = WP.with_(fock_dim=12, kappa=0.05, T=0.0)
    h = build_hamiltonian(p)
    bath = resolved(p)
    rho0 = random_density(h.dim, np.random.default_rng(5))
    times = np.linspace(0.5, 80, 40)
    energies = [np.real(np.trace(h.matrix @ s)) for s in evolve_fixed(rho0, h, bath, times)]
    assert np.all(np.diff(energies) <= 1e-8)


# -- evolve ------------------------------------------------------------------


def test_segments_schedule():
    bath = resolved()
    grid = TimeGrid(0, 10, 0.05)
    segs = _segments(WP, DecayProfile("gaussian", 1.0), bath, grid)
    # 2 tS / (tS/8) = 16 frozen windows plus the coupling-free tail.
    assert len(segs) == 17
    assert segs[0][0] == 0.0 and segs[-2][1] == pytest.approx(2.0)
    assert segs[-1] == (pytest.approx(2.0), 10, 0.0)
    factors = [f for _, _, f in segs[:-1]]
    assert all(a > b for a, b in zip(factors, factors[1:]))
    short = _segments(WP, DecayProfile("exponential", 0.01), bath, grid)
    assert len(short) == 17
    assert _segments(WP, DecayProfile(), bath, grid) == [(0.0, 10, 0.0)]


def test_fixed_hamiltonian_keeps_gibbs_state():
    h = build_hamiltonian(WP)
    tau = thermal_state(h, WP.T)
    times = np.linspace(0, 50, 11)
    for s in evolve_fixed(tau, h, resolved(), times):
        assert fidelity(0.5 * (s + s.conj().T), tau.matrix) >= 0.9999


def test_working_point_run_is_physical():
    ev = evolve(None, WP, grid=TimeGrid(0, 5, 0.05))
    assert ev.trace_drift < 1e-6
    assert ev.min_eigenvalue.min() >= -1e-6
    assert ev.coupling[0] == WP.gA0 and np.all(ev.coupling[1:] == 0.0)
    assert ev.reduced.shape == (101, 30, 30)


def test_no_decay_run_is_stationary():
    # A vanishing initial coupling makes the instant decay a no-op.
    p = WP.with_(gA0=0.0)
    ev = evolve(None, p, grid=TimeGrid(0, 20, 1.0))
    assert np.max(np.abs(ev.reduced - ev.reduced[0])) < 1e-10


def test_integration_failure_reported():
    p = WP.with_(fock_dim=6)
    # Oscillator level 0 carries weight -0.04 after tracing out the qubits.
    pops = np.full(p.layout.total_dim, 1.04 / 20)
    pops[:4] = -0.01
    bad = np.diag(pops).astype(complex)
    with pytest.raises(IntegrationError):
        evolve(DensityMatrix(bad, p.layout, check=False), p, grid=TimeGrid(0, 1, 0.5))


def test_layout_mismatch_rejected():
    with pytest.raises(ValueError):
        evolve(thermal_state(build_hamiltonian(WP.with_(fock_dim=10)), 0.02), WP)


def test_exports(tmp_path):
    ev = evolve(None, WP.with_(fock_dim=12), grid=TimeGrid(0, 1, 0.25))
    ev.write_csv(tmp_path / "ev.csv", header="demo run")
    lines = (tmp_path / "ev.csv").read_text().splitlines()
    assert lines[0] == "# demo run"
    rows = list(csv.reader(lines[1:]))
    assert rows[0] == ["t", "trace", "n", "X", "P", "energy", "coupling", "min_eig"]
    assert len(rows) == 6
    paths = ev.write_state_json(tmp_path / "states", every=2)
    assert len(paths) == 3
    doc = json.loads(paths[1].read_text())
    assert doc["dims"] == [12] and doc["t"] == 0.5


# -- thermalization ----------------------------------------------------------


def test_thermalization_from_ground_state():
    h = build_hamiltonian(WP)
    ground = thermal_state(h, 0.0).matrix
    assert verify_thermalization(WP, rho0=ground) >= 0.999


def test_thermalization_from_gibbs_state():
    tau = thermal_state(build_hamiltonian(WP), WP.T).matrix
    assert verify_thermalization(WP, rho0=tau) >= 0.9999


def test_no_thermalization_without_dissipation():
    assert verify_thermalization(WP.with_(kappa=0.0), seed=3) < 0.999


def test_random_perturbation_converges_eventually():
    # The slowest relaxation mode is far below kappa; give it time.
    assert verify_thermalization(WP, seed=0, t_long=200.0 / WP.kappa) >= 0.999
