"""Qubit-oscillator Hamiltonians, decay profiles and the global thermal state.

The Hamiltonian with ``k`` ancillas reads::

    H = w n + (w0/2) sz_0 + sum_i (wA/2) sz_i + gA(t) sum_i sz_i Xc + gR sx_0 Xc

where ``Xc`` is the coupling quadrature: ``a + a^dag`` for
``coupling_norm="ladder"`` (default) or ``(a + a^dag)/sqrt(2)`` for
``coupling_norm="quadrature"``.  The ``jcm`` variant replaces the
transversal term by ``gR c (s+ a + s- a^dag)`` with ``c = <0|Xc|1>``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .hilbert import (
    DensityMatrix,
    Operator,
    OperatorSet,
    SubsystemLayout,
    build_operators,
)

COUPLING_TYPES = ("rabi", "jcm")
COUPLING_NORMS = ("ladder", "quadrature")
DECAYING_COUPLINGS = ("ancilla", "rabi")
DECAY_KINDS = ("instant", "gaussian", "exponential")


class DegenerateGroundWarning(RuntimeWarning):
    """Zero-temperature state built from a degenerate ground space."""


@dataclass(frozen=True)
class ModelParams:
    """Scalars of the qubit-oscillator model; defaults are the working point.

    ``decaying`` selects which coupling is switched off at t = 0:
    ``"ancilla"`` (longitudinal gA, the protocol) or ``"rabi"`` (gR, the
    swapped-stability control).
    """

    omega: float = 1.0
    omega0: float = 2.0
    omegaA: float = 2.4
    gR: float = 0.6
    gA0: float = 0.8
    T: float = 0.02
    kappa: float = 2e-3
    n_ancillas: int = 1
    coupling_type: str = "rabi"
    coupling_norm: str = "ladder"
    decaying: str = "ancilla"
    fock_dim: int = 30

    def __post_init__(self):
        for name in ("omega", "omega0", "omegaA"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite number, got {v!r}")
        for name in ("gR", "gA0", "T", "kappa"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be a non-negative finite number, got {v!r}")
        if self.n_ancillas not in (1, 2, 3) or isinstance(self.n_ancillas, bool):
            raise ValueError(f"n_ancillas must be 1, 2 or 3, got {self.n_ancillas!r}")
        if self.coupling_type not in COUPLING_TYPES:
            raise ValueError(f"coupling_type must be one of {COUPLING_TYPES}, got {self.coupling_type!r}")
        if self.coupling_norm not in COUPLING_NORMS:
            raise ValueError(f"coupling_norm must be one of {COUPLING_NORMS}, got {self.coupling_norm!r}")
        if self.decaying not in DECAYING_COUPLINGS:
            raise ValueError(f"decaying must be one of {DECAYING_COUPLINGS}, got {self.decaying!r}")
        if not isinstance(self.fock_dim, int) or isinstance(self.fock_dim, bool) or self.fock_dim < 2:
            raise ValueError(f"fock_dim must be an integer >= 2, got {self.fock_dim!r}")

    @property
    def layout(self) -> SubsystemLayout:
        return SubsystemLayout(self.fock_dim, 1 + self.n_ancillas)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


@dataclass(frozen=True)
class DecayProfile:
    """Time course of the decaying coupling; ``tS = 0`` iff ``kind == "instant"``."""

    kind: str = "instant"
    tS: float = 0.0

    def __post_init__(self):
        if self.kind not in DECAY_KINDS:
            raise ValueError(f"kind must be one of {DECAY_KINDS}, got {self.kind!r}")
        if not (isinstance(self.tS, (int, float)) and math.isfinite(self.tS) and self.tS >= 0):
            raise ValueError(f"tS must be a non-negative finite number, got {self.tS!r}")
        if (self.kind == "instant") != (self.tS == 0):
            raise ValueError("tS must be 0 exactly for the instant profile and positive otherwise")

    @property
    def switch_off_time(self) -> float:
        """Time after which the coupling is treated as fully off."""
        return 2.0 * self.tS

    def to_dict(self) -> dict:
        return asdict(self)


def decay_factor(t: float, profile: DecayProfile) -> float:
    """Fraction of the initial coupling remaining at time ``t``.

    Equal to 1 for ``t <= 0``.  The instant profile drops to 0 for any
    ``t > 0``.
    """
    if t <= 0:
        return 1.0
    if profile.kind == "instant":
        return 0.0
    if profile.kind == "gaussian":
        return math.exp(-((t / profile.tS) ** 2))
    return math.exp(-2.0 * t / profile.tS)


def _coupling_quadrature(ops: OperatorSet, norm: str) -> Operator:
    x = ops.a + ops.adag
    return x if norm == "ladder" else x / math.sqrt(2.0)


def coupling_matrix_element(norm: str) -> float:
    """<0|Xc|1> for the chosen coupling normalization."""
    return 1.0 if norm == "ladder" else 1.0 / math.sqrt(2.0)


def longitudinal_term(params: ModelParams, ops: OperatorSet | None = None) -> Operator:
    """``sum_i sz_i Xc`` over all ancillas (coefficient 1)."""
    ops = ops or build_operators(params.layout)
    xc = _coupling_quadrature(ops, params.coupling_norm)
    out = Operator(np.zeros((ops.layout.total_dim,) * 2), ops.layout)
    for sz in ops.sz[1:]:
        out = out + sz @ xc
    return out


def transversal_term(params: ModelParams, ops: OperatorSet | None = None) -> Operator:
    """Stable qubit-oscillator interaction with coefficient 1."""
    ops = ops or build_operators(params.layout)
    if params.coupling_type == "rabi":
        return ops.sx[0] @ _coupling_quadrature(ops, params.coupling_norm)
    c = coupling_matrix_element(params.coupling_norm)
    return c * (ops.sp[0] @ ops.a + ops.sm[0] @ ops.adag)


def build_hamiltonian(
    params: ModelParams,
    gA_value: float | None = None,
    gR_value: float | None = None,
    ops: OperatorSet | None = None,
) -> Operator:
    """Total Hamiltonian at couplings (``gA_value``, ``gR_value``).

    Missing couplings default to ``params.gA0`` and ``params.gR``.
    """
    gA = params.gA0 if gA_value is None else float(gA_value)
    gR = params.gR if gR_value is None else float(gR_value)
    ops = ops or build_operators(params.layout)
    h = params.omega * ops.n + 0.5 * params.omega0 * ops.sz[0]
    for sz in ops.sz[1:]:
        h = h + 0.5 * params.omegaA * sz
    if gA:
        h = h + gA * longitudinal_term(params, ops)
    if gR:
        h = h + gR * transversal_term(params, ops)
    return h


def hamiltonian_at(t: float, params: ModelParams, profile: DecayProfile, ops: OperatorSet | None = None) -> Operator:
    """Hamiltonian at time ``t`` with the decaying coupling scaled by the profile."""
    f = decay_factor(t, profile)
    if params.decaying == "ancilla":
        return build_hamiltonian(params, gA_value=params.gA0 * f, ops=ops)
    return build_hamiltonian(params, gR_value=params.gR * f, ops=ops)


def thermal_state(H: Operator, T: float, degeneracy_tol: float = 1e-10) -> DensityMatrix:
    """Gibbs state ``exp(-H/T)/Z``.

    The ground energy is subtracted before exponentiating.  At ``T = 0`` the
    ground projector is returned; a degenerate ground space is averaged and
    reported with :class:`DegenerateGroundWarning`.
    """
    if T < 0:
        raise ValueError(f"temperature must be non-negative, got {T}")
    m = H.matrix
    if np.max(np.abs(m - m.conj().T)) > 1e-9:
        raise ValueError("thermal_state requires a Hermitian Hamiltonian")
    evals, vecs = np.linalg.eigh(0.5 * (m + m.conj().T))
    shifted = evals - evals[0]
    if T == 0:
        ground = shifted <= degeneracy_tol * max(1.0, abs(evals[0]))
        g = int(ground.sum())
        if g > 1:
            warnings.warn(
                f"ground space is {g}-fold degenerate; returning the uniform mixture",
                DegenerateGroundWarning,
                stacklevel=2,
            )
        weights = ground.astype(float) / g
    else:
        weights = np.exp(-shifted / T)
        weights /= weights.sum()
    rho = (vecs * weights) @ vecs.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(rho, H.layout, check=False)


def initial_state(params: ModelParams) -> DensityMatrix:
    """Thermal state of the pre-decay Hamiltonian at the bath temperature."""
    return thermal_state(build_hamiltonian(params), params.T)


def tls_negativity_estimate(p: float) -> float:
    """Wigner-minimum estimate for a qubit excitation ``p`` swapped into the oscillator."""
    if not 0 < p <= 1:
        raise ValueError(f"excitation probability must lie in (0, 1], got {p}")
    return -(p / math.pi) * math.exp(-(1.0 - p) / (2.0 * p))
