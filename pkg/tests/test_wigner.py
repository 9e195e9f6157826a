import csv
import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wignerdecay.dynamics import TimeGrid, evolve
from wignerdecay.hilbert import SubsystemLayout, displacement, fock_state, random_density, squeeze
from wignerdecay.model import ModelParams
from wignerdecay.wigner import (
    GridTooSmallWarning,
    PhaseSpaceGrid,
    integrated_negativity,
    min_negativity,
    negativity_record,
    negativity_series,
    wigner_laguerre,
    wigner_map,
    wigner_point_parity,
)

DIM = 30
LAY = SubsystemLayout(DIM, 0)
GRID = PhaseSpaceGrid()
I_FOCK1 = 2 * math.exp(-0.5) - 1


def ket(n):
    return fock_state(n, LAY).amplitudes


def proj(v):
    return np.outer(v, v.conj())


def closest(grid, x, p):
    return int(np.argmin(np.abs(grid.xs - x))), int(np.argmin(np.abs(grid.ps - p)))


# -- grid --------------------------------------------------------------------


def test_grid_validation():
    with pytest.raises(ValueError):
        PhaseSpaceGrid(points=2)
    with pytest.raises(ValueError):
        PhaseSpaceGrid(x_min=1.0, x_max=-1.0)
    with pytest.raises(ValueError):
        PhaseSpaceGrid(p_max=float("inf"))


def test_grid_geometry():
    assert GRID.dx == pytest.approx(0.05)
    fine = GRID.refined(2)
    assert fine.points == 401 and fine.dx == pytest.approx(0.025)
    assert PhaseSpaceGrid.for_ancillas(1) == GRID
    g3 = PhaseSpaceGrid.for_ancillas(3)
    assert (g3.x_min, g3.x_max, g3.points) == (-9.0, 9.0, 361)
    assert g3.dx == pytest.approx(0.05)


# -- analytic states ---------------------------------------------------------


def test_vacuum_and_fock_origin_values():
    i, j = closest(GRID, 0, 0)
    assert wigner_map(proj(ket(0))).values[i, j] == pytest.approx(1 / math.pi, abs=1e-6)
    assert wigner_map(proj(ket(1))).values[i, j] == pytest.approx(-1 / math.pi, abs=1e-6)


@pytest.mark.parametrize("n", [0, 1, 2, 5])
def test_fock_origin_parity_rule(n):
    i, j = closest(GRID, 0, 0)
    assert wigner_map(proj(ket(n))).values[i, j] == pytest.approx((-1) ** n / math.pi, abs=1e-6)


def test_coherent_state_peak():
    x0, p0 = 1.0, -0.5
    psi = displacement(complex(x0, p0) / math.sqrt(2), LAY).matrix @ ket(0)
    wm = wigner_map(proj(psi))
    i, j = np.unravel_index(np.argmax(wm.values), wm.values.shape)
    assert (GRID.xs[i], GRID.ps[j]) == (pytest.approx(x0), pytest.approx(p0))
    assert wm.values[i, j] == pytest.approx(1 / math.pi, abs=1e-6)


def test_fock1_integrated_negativity():
    assert integrated_negativity(wigner_map(proj(ket(1)))) == pytest.approx(I_FOCK1, abs=1e-3)


def test_vacuum_has_no_negativity():
    wm = wigner_map(proj(ket(0)))
    assert integrated_negativity(wm) == 0.0
    assert min_negativity(wm)[0] >= -1e-9


def test_displaced_fock1_invariance():
    psi = displacement(0.3, LAY).matrix @ ket(1)
    wm = wigner_map(proj(psi))
    assert integrated_negativity(wm) == pytest.approx(I_FOCK1, abs=1e-3)
    n, x, p = min_negativity(wm)
    assert n == pytest.approx(-1 / math.pi, abs=1e-3)
    assert (x, p) == (pytest.approx(0.3 * math.sqrt(2), abs=0.02), pytest.approx(0.0, abs=0.02))


def test_squeezed_fock1_minimum_invariant():
    psi = squeeze(0.2, LAY).matrix @ ket(1)
    n, x, p = min_negativity(wigner_map(proj(psi)))
    assert n == pytest.approx(-1 / math.pi, abs=1e-3)
    assert integrated_negativity(wigner_map(proj(psi))) == pytest.approx(I_FOCK1, abs=1e-3)


def test_fock1_minimum_location():
    n, x, p = min_negativity(wigner_map(proj(ket(1))))
    assert n == pytest.approx(-1 / math.pi, abs=1e-6)
    assert abs(x) < 1e-6 and abs(p) < 1e-6


def test_minimum_refinement_off_grid():
    # Minimum between grid nodes: the quadratic refinement must land far
    # closer to the exact value than the raw grid minimum does.
    beta = complex(0.0123, -0.0311)
    psi = displacement(beta, LAY).matrix @ ket(1)
    wm = wigner_map(proj(psi))
    n, x, p = min_negativity(wm)
    exact = -1 / math.pi
    assert n <= wm.values.min()
    assert abs(n - exact) < 0.05 * abs(wm.values.min() - exact)
    assert x == pytest.approx(math.sqrt(2) * beta.real, abs=2e-3)
    assert p == pytest.approx(math.sqrt(2) * beta.imag, abs=2e-3)


def test_normalization_and_marginals():
    xs = GRID.xs
    psi0 = math.pi**-0.25 * np.exp(-xs**2 / 2)
    psi1 = math.sqrt(2) * xs * psi0
    for n, wave in ((0, psi0), (1, psi1)):
        wm = wigner_map(proj(ket(n)))
        assert wm.norm == pytest.approx(1.0, abs=1e-3)
        marginal = wm.values.sum(axis=1) * GRID.dp
        assert np.max(np.abs(marginal - wave**2)) < 1e-3


def test_boundary_warning():
    psi = displacement(3.4, LAY).matrix @ ket(0)
    with pytest.warns(GridTooSmallWarning):
        wm = wigner_map(proj(psi), PhaseSpaceGrid(-3, 3, -3, 3, 61))
    assert wm.boundary_max > 1e-4
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        wigner_map(proj(ket(0)))


# -- random states -----------------------------------------------------------


@given(st.integers(0, 100_000))
@settings(max_examples=15, deadline=None)
def test_random_state_properties(seed):
    rng = np.random.default_rng(seed)
    small = random_density(8, rng)
    rho = np.zeros((DIM, DIM), dtype=complex)
    rho[:8, :8] = small
    wm = wigner_map(rho, PhaseSpaceGrid(-6, 6, -6, 6, 121))
    assert wm.imag_residue < 1e-10
    assert np.max(np.abs(wm.values)) <= 1 / math.pi + 1e-6
    assert wm.norm == pytest.approx(1.0, abs=1e-3)
    rec = negativity_record(rho, PhaseSpaceGrid(-6, 6, -6, 6, 121))
    assert rec.integrated_negativity >= 0
    assert (rec.min_value < -1e-6) == (rec.integrated_negativity > 1e-9)


def test_evaluator_matches_references():
    rng = np.random.default_rng(7)
    rho = np.zeros((DIM, DIM), dtype=complex)
    rho[:12, :12] = random_density(12, rng)
    grid = PhaseSpaceGrid(-4, 4, -4, 4, 41)
    fast = wigner_map(rho, grid, warn=False).values
    lag = wigner_laguerre(rho, grid.xs, grid.ps)
    assert np.max(np.abs(fast - lag)) < 1e-10
    for x, p in [(0.0, 0.0), (0.6, -1.2), (-2.0, 1.4)]:
        i, j = closest(grid, x, p)
        assert wigner_point_parity(rho, grid.xs[i], grid.ps[j]) == pytest.approx(fast[i, j], abs=1e-9)


# -- exports and series ------------------------------------------------------


def test_map_exports(tmp_path):
    grid = PhaseSpaceGrid(-2, 2, -2, 2, 5)
    wm = wigner_map(proj(ket(1)), grid, warn=False)
    wm.write_csv(tmp_path / "w.csv", header="state |1>")
    lines = (tmp_path / "w.csv").read_text().splitlines()
    assert lines[0] == "# state |1>"
    assert lines[1] == "x,p,W"
    assert len(lines) == 2 + 25
    wm.write_json(tmp_path / "w.json")
    doc = json.loads((tmp_path / "w.json").read_text())
    assert np.allclose(doc["W"], wm.values)
    assert doc["grid"]["points"] == 5


def test_negativity_series(tmp_path):
    p = ModelParams(fock_dim=20)
    ev = evolve(None, p, grid=TimeGrid(0, 4, 0.5))
    series = negativity_series(ev, PhaseSpaceGrid(-5, 5, -5, 5, 101))
    assert len(series.records) == 9
    assert series.t_star == series.times[np.argmin(series.minima)]
    assert series.t_star_integrated == series.times[np.argmax(series.integrated)]
    assert series.integrated[0] < 1e-6
    series.write_csv(tmp_path / "neg.csv", header="run")
    lines = (tmp_path / "neg.csv").read_text().splitlines()
    assert lines[0] == "# run"
    assert lines[1].startswith("# t_star = ")
    header = next(row for row in csv.reader(lines) if not row[0].startswith("#"))
    assert header == ["t", "I_neg", "N", "x_star", "p_star"]
