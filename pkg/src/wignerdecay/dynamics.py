"""Weak-coupling global thermal dynamics.

The dissipator is built in the eigenbasis of the total Hamiltonian.  Each
Bohr transition ``a -> b`` gets the rate::

    Gamma(a->b) = kappa * sum_A |<b|A|a>|^2 * w(E_a - E_b)

with ``w(D) = nbar(D) + 1`` for downhill and ``nbar(|D|)`` for uphill jumps,
``nbar`` the Bose-Einstein occupation.  The generator is the Lindbladian
with jump operators ``sqrt(Gamma) |b><a|``: populations follow a classical
rate equation and the coherence ``rho_ab`` rotates at ``E_a - E_b`` while
decaying at ``(Gamma_a + Gamma_b)/2``.  The Gibbs state is a fixed point, and
for a fixed Hamiltonian the propagator is available in closed form, so time
stepping is exact up to rounding.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .hilbert import (
    DensityMatrix,
    Operator,
    OperatorSet,
    SubsystemLayout,
    build_operators,
    density_to_json,
    reduce_to_oscillator,
)
from .model import (
    DecayProfile,
    ModelParams,
    build_hamiltonian,
    decay_factor,
    hamiltonian_at,
    thermal_state,
)

COUPLING_NAMES = ("X", "P", "n", "sx", "sy", "sz")
ZERO_FREQ_POLICIES = ("drop", "keep")

TRACE_DRIFT_TOL = 1e-6
NEG_EIG_TOL = 1e-6


class IntegrationError(RuntimeError):
    """Evolution produced a state outside the trace / positivity tolerance."""


@dataclass(frozen=True)
class BathSpec:
    """System-bath coupling and generator options.

    ``base_rate`` and ``temperature`` default to ``kappa`` and ``T`` of the
    model parameters when left as ``None``.  ``coupling_ops`` names
    operators: ``X``, ``P``, ``n`` act on the oscillator; ``sx``, ``sy``,
    ``sz`` mean that Pauli operator on every qubit, ``sx0``, ``sx1``, ... on
    a single one.
    """

    coupling_ops: tuple[str, ...] = ("X", "sx")
    base_rate: float | None = None
    temperature: float | None = None
    secular_cluster_tol: float = 1e-8
    zero_freq_policy: str = "drop"
    zero_freq_weight: float = 1.0
    refresh_fraction: float = 0.125
    min_rebuilds: int = 4

    def __post_init__(self):
        object.__setattr__(self, "coupling_ops", tuple(self.coupling_ops))
        for name in self.coupling_ops:
            base = name.rstrip("0123456789")
            if base not in COUPLING_NAMES or (base != name and base not in ("sx", "sy", "sz")):
                raise ValueError(f"unknown coupling operator {name!r}")
        if self.base_rate is not None and not self.base_rate >= 0:
            raise ValueError(f"base_rate must be non-negative, got {self.base_rate}")
        if self.temperature is not None and not self.temperature >= 0:
            raise ValueError(f"temperature must be non-negative, got {self.temperature}")
        if not self.secular_cluster_tol > 0:
            raise ValueError("secular_cluster_tol must be positive")
        if self.zero_freq_policy not in ZERO_FREQ_POLICIES:
            raise ValueError(f"zero_freq_policy must be one of {ZERO_FREQ_POLICIES}")
        if not 0 < self.refresh_fraction <= 1:
            raise ValueError("refresh_fraction must lie in (0, 1]")
        if self.min_rebuilds < 1:
            raise ValueError("min_rebuilds must be >= 1")

    def resolved(self, params: ModelParams) -> "BathSpec":
        return BathSpec(
            coupling_ops=self.coupling_ops,
            base_rate=params.kappa if self.base_rate is None else self.base_rate,
            temperature=params.T if self.temperature is None else self.temperature,
            secular_cluster_tol=self.secular_cluster_tol,
            zero_freq_policy=self.zero_freq_policy,
            zero_freq_weight=self.zero_freq_weight,
            refresh_fraction=self.refresh_fraction,
            min_rebuilds=self.min_rebuilds,
        )

    def operators(self, ops: OperatorSet) -> list[Operator]:
        out = []
        for name in self.coupling_ops:
            base = name.rstrip("0123456789")
            if base in ("X", "P", "n"):
                out.append(getattr(ops, base))
                continue
            family = getattr(ops, base)
            if base == name:
                out.extend(family)
            else:
                idx = int(name[len(base):])
                if idx >= len(family):
                    raise ValueError(f"coupling operator {name!r} refers to a missing qubit")
                out.append(family[idx])
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["coupling_ops"] = list(self.coupling_ops)
        return d


@dataclass(frozen=True)
class TimeGrid:
    """Output times ``t_start, t_start + dt_out, ..., t_end``.

    ``dt_int`` caps the length of a frozen-generator window during a finite
    decay; ``None`` leaves the refresh schedule of the bath spec in charge.
    """

    t_start: float = 0.0
    t_end: float = 30.0
    dt_out: float = 0.05
    dt_int: float | None = None

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError("t_end must exceed t_start")
        if not self.dt_out > 0:
            raise ValueError("dt_out must be positive")
        if self.dt_int is not None and not 0 < self.dt_int <= self.dt_out:
            raise ValueError("dt_int must satisfy 0 < dt_int <= dt_out")

    @property
    def times(self) -> np.ndarray:
        n = int(math.floor((self.t_end - self.t_start) / self.dt_out + 1e-9))
        return self.t_start + self.dt_out * np.arange(n + 1)

    def to_dict(self) -> dict:
        return asdict(self)


def bose_einstein(delta, T: float):
    """Thermal occupation ``1/(exp(delta/T) - 1)`` for ``delta > 0``; 0 at T = 0."""
    delta = np.asarray(delta, dtype=float)
    if T == 0:
        return np.zeros_like(delta)
    with np.errstate(over="ignore"):
        return 1.0 / np.expm1(delta / T)


def _cluster_frequencies(values: np.ndarray, tol: float) -> np.ndarray:
    """Replace each value by the mean of its chain-linked cluster (gaps < tol)."""
    if values.size == 0:
        return values
    order = np.argsort(values, kind="stable")
    s = values[order]
    breaks = np.concatenate(([True], np.diff(s) >= tol))
    labels = np.cumsum(breaks) - 1
    means = np.bincount(labels, weights=s) / np.bincount(labels)
    out = np.empty_like(values)
    out[order] = means[labels]
    return out


@dataclass(frozen=True, eq=False)
class Propagator:
    """Closed-form propagation over a fixed duration in the eigenbasis."""

    tau: float
    populations: np.ndarray
    coherences: np.ndarray

    def apply(self, rho_eig: np.ndarray) -> np.ndarray:
        p = np.diag(rho_eig).real
        out = rho_eig * self.coherences
        np.fill_diagonal(out, self.populations @ p)
        return out


@dataclass(frozen=True, eq=False)
class GeneratorCache:
    """Eigendecomposition of H plus the jump rates of the global generator.

    ``rates[a, b]`` is ``Gamma(a -> b)`` in the eigenbasis ordered by energy.
    """

    layout: SubsystemLayout
    energies: np.ndarray
    vectors: np.ndarray
    rates: np.ndarray
    dephasing: np.ndarray
    temperature: float
    base_rate: float
    _props: dict = field(default_factory=dict, repr=False)

    @property
    def out_rates(self) -> np.ndarray:
        return self.rates.sum(axis=1)

    @property
    def coherence_decay(self) -> np.ndarray:
        g = self.out_rates
        return 0.5 * (g[:, None] + g[None, :]) + self.dephasing

    @property
    def rate_matrix(self) -> np.ndarray:
        """Classical generator ``M`` with ``dp/dt = M p`` (columns sum to 0)."""
        return self.rates.T - np.diag(self.out_rates)

    def to_eigen(self, rho: np.ndarray) -> np.ndarray:
        v = self.vectors
        return v.conj().T @ rho @ v

    def from_eigen(self, rho_eig: np.ndarray) -> np.ndarray:
        v = self.vectors
        return v @ rho_eig @ v.conj().T

    def derivative(self, rho) -> np.ndarray:
        """Lab-frame ``d rho/dt`` for the current generator."""
        r = self.to_eigen(np.asarray(getattr(rho, "matrix", rho)))
        e = self.energies
        d = (-1j * (e[:, None] - e[None, :]) - self.coherence_decay) * r
        np.fill_diagonal(d, self.rate_matrix @ np.diag(r).real)
        return self.from_eigen(d)

    def propagator(self, tau: float) -> Propagator:
        key = round(float(tau), 12)
        prop = self._props.get(key)
        if prop is None:
            e = self.energies
            pops = scipy.linalg.expm(self.rate_matrix * tau)
            coh = np.exp((-1j * (e[:, None] - e[None, :]) - self.coherence_decay) * tau)
            prop = Propagator(tau, pops, coh)
            if len(self._props) < 64:
                self._props[key] = prop
        return prop

    def gibbs_eigen(self) -> np.ndarray:
        """Gibbs state in the eigenbasis (diagonal)."""
        shifted = self.energies - self.energies[0]
        if self.temperature == 0:
            w = (shifted <= 1e-10).astype(float)
        else:
            w = np.exp(-shifted / self.temperature)
        return np.diag(w / w.sum()).astype(complex)

    def detailed_balance_residual(self, max_exponent: float = 30.0) -> float:
        """Largest relative deviation of ``Gamma(a->b)/Gamma(b->a)`` from ``exp((E_a-E_b)/T)``."""
        if self.temperature == 0:
            return 0.0
        e = self.energies
        x = (e[:, None] - e[None, :]) / self.temperature
        r = self.rates
        mask = (r > 0) & (r.T > 0) & (np.abs(x) < max_exponent)
        if not mask.any():
            return 0.0
        ratio = r[mask] / r.T[mask]
        return float(np.max(np.abs(ratio / np.exp(x[mask]) - 1.0)))


def build_generator(H: Operator, bath: BathSpec, ops: OperatorSet | None = None) -> GeneratorCache:
    """Assemble the global secular generator for a fixed Hamiltonian.

    ``bath`` must carry an explicit ``base_rate`` and ``temperature`` (see
    :meth:`BathSpec.resolved`).
    """
    if bath.base_rate is None or bath.temperature is None:
        raise ValueError("bath spec must be resolved (base_rate and temperature set)")
    T = float(bath.temperature)
    if T < 0:
        raise ValueError("negative temperature")
    m = H.matrix
    if np.max(np.abs(m - m.conj().T)) > 1e-9:
        raise ValueError("build_generator requires a Hermitian Hamiltonian")
    energies, vectors = np.linalg.eigh(0.5 * (m + m.conj().T))
    dim = energies.size
    kappa = float(bath.base_rate)
    rates = np.zeros((dim, dim))
    dephasing = np.zeros((dim, dim))
    if kappa > 0:
        ops = ops or build_operators(H.layout)
        strength = np.zeros((dim, dim))
        diag_terms = []
        for A in bath.operators(ops):
            ae = vectors.conj().T @ A.matrix @ vectors
            # Exact Hermiticity keeps the pair weights symmetric down to round-off.
            ae = 0.5 * (ae + ae.conj().T)
            strength += np.abs(ae) ** 2
            diag_terms.append(np.diag(ae).real)
        # strength[b, a] = sum_A |<b|A|a>|^2 ; work with s_ab = rate weight for a -> b
        s = strength.T
        delta = energies[:, None] - energies[None, :]  # delta[a, b] = E_a - E_b
        tol = bath.secular_cluster_tol
        coupled = s > 0
        np.fill_diagonal(coupled, False)
        absd = np.abs(delta[coupled])
        clustered = _cluster_frequencies(absd, tol)
        zero = clustered < tol
        weight = np.zeros_like(clustered)
        nz = ~zero
        nb = bose_einstein(clustered[nz], T)
        down = (delta[coupled] > 0)[nz]
        weight[nz] = np.where(down, nb + 1.0, nb)
        if bath.zero_freq_policy == "keep":
            weight[zero] = bath.zero_freq_weight
            for d in diag_terms:
                dephasing += 0.5 * bath.zero_freq_weight * kappa * (d[:, None] - d[None, :]) ** 2
        rates[coupled] = kappa * s[coupled] * weight
    return GeneratorCache(
        layout=H.layout,
        energies=energies,
        vectors=vectors,
        rates=rates,
        dephasing=dephasing,
        temperature=T,
        base_rate=kappa,
    )


@dataclass
class EvolutionResult:
    """Reduced oscillator states on the output grid plus run diagnostics."""

    times: np.ndarray
    reduced: np.ndarray
    coupling: np.ndarray
    trace: np.ndarray
    min_eigenvalue: np.ndarray
    energy: np.ndarray
    layout: SubsystemLayout
    full_states: np.ndarray | None = None

    def __len__(self):
        return len(self.times)

    @property
    def oscillator_layout(self) -> SubsystemLayout:
        return self.layout.oscillator()

    def state(self, i: int) -> DensityMatrix:
        return DensityMatrix(self.reduced[i], self.oscillator_layout, check=False)

    def state_at(self, t: float) -> DensityMatrix:
        return self.state(int(np.argmin(np.abs(self.times - t))))

    @property
    def trace_drift(self) -> float:
        return float(np.max(np.abs(self.trace - 1.0)))

    def moments(self) -> dict[str, np.ndarray]:
        n = self.layout.fock_dim
        a = np.diag(np.sqrt(np.arange(1, n)), 1)
        num = np.arange(n)
        mean_a = np.einsum("tij,ji->t", self.reduced, a)
        return {
            "n": np.einsum("tii,i->t", self.reduced, num).real,
            "X": np.sqrt(2.0) * mean_a.real,
            "P": np.sqrt(2.0) * mean_a.imag,
        }

    def write_csv(self, path, header: str | None = None) -> None:
        mom = self.moments()
        with open(path, "w", newline="") as fh:
            if header:
                for line in header.splitlines():
                    fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "trace", "n", "X", "P", "energy", "coupling", "min_eig"])
            for i, t in enumerate(self.times):
                w.writerow([
                    f"{t:.10g}",
                    f"{self.trace[i]:.15g}",
                    f"{mom['n'][i]:.15g}",
                    f"{mom['X'][i]:.15g}",
                    f"{mom['P'][i]:.15g}",
                    f"{self.energy[i]:.15g}",
                    f"{self.coupling[i]:.15g}",
                    f"{self.min_eigenvalue[i]:.6e}",
                ])

    def write_state_json(self, directory, every: int = 1) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for i in range(0, len(self.times), every):
            doc = density_to_json(self.state(i))
            doc["t"] = float(self.times[i])
            p = directory / f"state_{i:05d}.json"
            with open(p, "w") as fh:
                json.dump(doc, fh)
            paths.append(p)
        return paths


def _segments(params: ModelParams, profile: DecayProfile, bath: BathSpec, grid: TimeGrid):
    """(t_begin, t_end, coupling factor) pieces of the piecewise-frozen generator."""
    t0, t1 = grid.t_start, grid.t_end
    segs = []
    if t0 < 0:
        segs.append((t0, min(0.0, t1), 1.0))
    start = max(t0, 0.0)
    if profile.kind != "instant" and start < min(profile.switch_off_time, t1):
        window = profile.tS * bath.refresh_fraction
        if grid.dt_int is not None:
            window = min(window, grid.dt_int)
        n_win = max(bath.min_rebuilds, int(math.ceil(profile.switch_off_time / window - 1e-9)))
        edges = np.linspace(0.0, profile.switch_off_time, n_win + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            if b <= start or a >= t1:
                continue
            lo, hi = max(a, start), min(b, t1)
            segs.append((lo, hi, decay_factor(0.5 * (a + b), profile)))
        start = max(start, profile.switch_off_time)
    if start < t1 or not segs:
        segs.append((start, t1, 0.0))
    return segs


def _coupling_value(params: ModelParams, factor: float) -> float:
    base = params.gA0 if params.decaying == "ancilla" else params.gR
    return base * factor


def _hamiltonian_for_factor(params: ModelParams, factor: float, ops: OperatorSet) -> Operator:
    if params.decaying == "ancilla":
        return build_hamiltonian(params, gA_value=params.gA0 * factor, ops=ops)
    return build_hamiltonian(params, gR_value=params.gR * factor, ops=ops)


def evolve(
    rho0: DensityMatrix | None,
    params: ModelParams,
    profile: DecayProfile = DecayProfile(),
    bath: BathSpec = BathSpec(),
    grid: TimeGrid = TimeGrid(),
    store_full: bool = False,
    check: bool = True,
) -> EvolutionResult:
    """Run the decay protocol and store the reduced oscillator state per output time.

    ``rho0=None`` starts from the thermal state of the pre-decay Hamiltonian.
    The instant profile uses the post-decay generator from ``t = 0``.  A finite
    profile freezes the generator on windows of ``refresh_fraction * tS``
    across ``[0, 2 tS]`` (coupling sampled at the window midpoint) and switches
    the decaying coupling fully off afterwards.
    """
    layout = params.layout
    ops = build_operators(layout)
    bath = bath.resolved(params)
    if rho0 is None:
        rho0 = thermal_state(hamiltonian_at(0.0, params, profile, ops), params.T)
    if rho0.layout != layout:
        raise ValueError(f"initial state layout {rho0.layout} does not match model layout {layout}")
    return _evolve_segments(rho0.matrix, params, _segments(params, profile, bath, grid), bath, grid, ops, store_full, check)


def _evolve_segments(rho, params, segments, bath, grid, ops, store_full, check):
    layout = ops.layout
    times = grid.times
    n_out = len(times)
    nf = layout.fock_dim
    reduced = np.empty((n_out, nf, nf), dtype=complex)
    full = np.empty((n_out, layout.total_dim, layout.total_dim), dtype=complex) if store_full else None
    coupling = np.empty(n_out)
    trace = np.empty(n_out)
    min_eig = np.empty(n_out)
    energy = np.empty(n_out)

    k = 0
    rho_lab = np.asarray(rho, dtype=complex)
    tol = 1e-9 * grid.dt_out
    for si, (a, b, factor) in enumerate(segments):
        last = si == len(segments) - 1
        gen = build_generator(_hamiltonian_for_factor(params, factor, ops), bath, ops)
        r = gen.to_eigen(rho_lab)
        t_cur = a
        while k < n_out and (times[k] < b - tol or (last and times[k] <= b + tol)):
            r = gen.propagator(times[k] - t_cur).apply(r)
            t_cur = times[k]
            lab = gen.from_eigen(r)
            red = reduce_to_oscillator(lab, layout)
            red = 0.5 * (red + red.conj().T)
            reduced[k] = red
            if full is not None:
                full[k] = lab
            coupling[k] = _coupling_value(params, factor) if times[k] > 0 else _coupling_value(params, 1.0)
            trace[k] = np.trace(red).real
            min_eig[k] = np.linalg.eigvalsh(red)[0]
            energy[k] = float(np.real(np.sum(np.diag(r) * gen.energies)))
            if check:
                if abs(trace[k] - 1.0) > TRACE_DRIFT_TOL:
                    raise IntegrationError(f"trace drift {trace[k] - 1.0:.3e} at t={times[k]:.6g}")
                if min_eig[k] < -NEG_EIG_TOL:
                    raise IntegrationError(f"negative eigenvalue {min_eig[k]:.3e} at t={times[k]:.6g}")
            k += 1
        if b > t_cur:
            r = gen.propagator(b - t_cur).apply(r)
        rho_lab = gen.from_eigen(r)
    return EvolutionResult(times, reduced, coupling, trace, min_eig, energy, layout, full)


def evolve_fixed(rho0, H: Operator, bath: BathSpec, times) -> list[np.ndarray]:
    """Full-space states at ``times`` (relative to the start) under a fixed generator."""
    gen = build_generator(H, bath)
    r = gen.to_eigen(np.asarray(getattr(rho0, "matrix", rho0)))
    out = []
    t_prev = 0.0
    for t in times:
        r = gen.propagator(t - t_prev).apply(r)
        t_prev = t
        out.append(gen.from_eigen(r))
    return out


def verify_thermalization(
    params: ModelParams,
    bath: BathSpec = BathSpec(),
    seed: int = 0,
    t_long: float | None = None,
    perturbation: float = 0.5,
    rho0: np.ndarray | None = None,
) -> float:
    """Fidelity to the Gibbs state after a long evolution with the pre-decay H fixed.

    The initial state mixes the Gibbs state with a random density matrix
    (weight ``perturbation``) unless ``rho0`` is given.  ``t_long`` defaults
    to ``10/kappa``.
    """
    from .analysis import fidelity
    from .hilbert import random_density

    bath = bath.resolved(params)
    H = build_hamiltonian(params)
    tau = thermal_state(H, bath.temperature)
    if rho0 is None:
        rng = np.random.default_rng(seed)
        rho0 = (1 - perturbation) * tau.matrix + perturbation * random_density(H.dim, rng)
    if t_long is None:
        t_long = 10.0 / bath.base_rate if bath.base_rate > 0 else 1e3
    (final,) = evolve_fixed(rho0, H, bath, [t_long])
    final = 0.5 * (final + final.conj().T)
    return fidelity(final, tau.matrix)
