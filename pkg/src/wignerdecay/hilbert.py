"""Dense operator algebra on the oscillator (x) qubits Hilbert space.

Subsystem ordering is fixed: the oscillator first, then the stable
two-level system, then the ancillas.  Qubit basis index 0 is the excited
state, so ``sigma_z = diag(1, -1)``.

Quadrature convention: ``X = (a + a^dag)/sqrt(2)``, ``P = i(a^dag - a)/sqrt(2)``
(vacuum variance 1/2).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
# |e><g| with index 0 = excited
SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.T.copy()

HERMITIAN_TOL = 1e-9


class DimensionError(ValueError):
    """Raised when matrix shapes disagree with a subsystem layout."""


class InvalidStateError(ValueError):
    """Raised when a matrix violates density-matrix invariants."""


@dataclass(frozen=True)
class SubsystemLayout:
    """Tensor structure ``[oscillator, stable TLS, ancilla_1, ...]``.

    ``tls_count = 0`` describes a reduced oscillator-only state.
    """

    fock_dim: int
    tls_count: int = 1

    def __post_init__(self):
        if int(self.fock_dim) != self.fock_dim or self.fock_dim < 2:
            raise ValueError(f"fock_dim must be an integer >= 2, got {self.fock_dim}")
        if int(self.tls_count) != self.tls_count or self.tls_count < 0:
            raise ValueError(f"tls_count must be a non-negative integer, got {self.tls_count}")

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.fock_dim,) + (2,) * self.tls_count

    @property
    def total_dim(self) -> int:
        return self.fock_dim * 2**self.tls_count

    @property
    def n_subsystems(self) -> int:
        return 1 + self.tls_count

    def oscillator(self) -> "SubsystemLayout":
        return SubsystemLayout(self.fock_dim, 0)


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense square matrix tagged with its layout."""

    matrix: np.ndarray
    layout: SubsystemLayout

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        d = self.layout.total_dim
        if m.shape != (d, d):
            raise DimensionError(f"matrix shape {m.shape} does not match layout dimension {d}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.layout.total_dim

    def dag(self) -> "Operator":
        return Operator(self.matrix.conj().T, self.layout)

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0) <= tol)

    def expect(self, state) -> complex:
        """``Tr(rho A)`` for a density matrix or ``<psi|A|psi>`` for a ket."""
        if isinstance(state, PureState):
            v = state.amplitudes
            return complex(v.conj() @ self.matrix @ v)
        return complex(np.trace(as_matrix(state) @ self.matrix))

    def _coerce(self, other):
        if isinstance(other, Operator):
            if other.layout != self.layout:
                raise DimensionError("operator layouts differ")
            return other.matrix
        return other

    def __add__(self, other):
        return Operator(self.matrix + self._coerce(other), self.layout)

    __radd__ = __add__

    def __sub__(self, other):
        return Operator(self.matrix - self._coerce(other), self.layout)

    def __rsub__(self, other):
        return Operator(self._coerce(other) - self.matrix, self.layout)

    def __neg__(self):
        return Operator(-self.matrix, self.layout)

    def __mul__(self, scalar):
        if isinstance(scalar, Operator):
            return NotImplemented
        return Operator(self.matrix * scalar, self.layout)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Operator(self.matrix / scalar, self.layout)

    def __matmul__(self, other):
        if isinstance(other, PureState):
            return PureState(self.matrix @ other.amplitudes, self.layout, check=False)
        return Operator(self.matrix @ self._coerce(other), self.layout)


class DensityMatrix(Operator):
    """Hermitian, unit-trace, positive semidefinite operator.

    Validation runs on construction unless ``check=False``.
    """

    def __init__(self, matrix, layout: SubsystemLayout, check: bool = True):
        super().__init__(matrix, layout)
        if check:
            self.validate()

    def validate(self, herm_tol: float = 1e-10, trace_tol: float = 1e-8, eig_tol: float = 1e-8):
        m = self.matrix
        herm = np.max(np.abs(m - m.conj().T), initial=0.0)
        if herm > herm_tol:
            raise InvalidStateError(f"density matrix not Hermitian (residual {herm:.3e})")
        tr = np.trace(m).real
        if abs(tr - 1.0) > trace_tol:
            raise InvalidStateError(f"density matrix trace {tr!r} differs from 1")
        lam = self.min_eigenvalue()
        if lam < -eig_tol:
            raise InvalidStateError(f"density matrix has negative eigenvalue {lam:.3e}")
        return self

    def min_eigenvalue(self) -> float:
        m = self.matrix
        return float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def eigenvalues(self) -> np.ndarray:
        m = self.matrix
        return np.linalg.eigvalsh(0.5 * (m + m.conj().T))

    @classmethod
    def from_pure(cls, psi: "PureState") -> "DensityMatrix":
        v = psi.amplitudes
        return cls(np.outer(v, v.conj()), psi.layout, check=False)

    def to_json(self) -> dict:
        return density_to_json(self)

    @classmethod
    def from_json(cls, doc: dict) -> "DensityMatrix":
        return density_from_json(doc)


class PureState:
    """Normalized ket on a layout."""

    __slots__ = ("amplitudes", "layout")

    def __init__(self, amplitudes, layout: SubsystemLayout, check: bool = True):
        v = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if v.shape[0] != layout.total_dim:
            raise DimensionError(f"ket length {v.shape[0]} does not match layout dimension {layout.total_dim}")
        if check:
            norm2 = float(np.vdot(v, v).real)
            if abs(norm2 - 1.0) > 1e-10:
                raise InvalidStateError(f"ket squared norm {norm2!r} differs from 1")
        v.setflags(write=False)
        self.amplitudes = v
        self.layout = layout

    def density(self) -> DensityMatrix:
        return DensityMatrix.from_pure(self)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def as_matrix(x) -> np.ndarray:
    """Plain complex ndarray view of an Operator, PureState projector or array."""
    if isinstance(x, Operator):
        return x.matrix
    if isinstance(x, PureState):
        v = x.amplitudes
        return np.outer(v, v.conj())
    return np.asarray(x, dtype=complex)


def fock_state(n: int, layout: SubsystemLayout) -> PureState:
    """Oscillator Fock ket |n> (layout must be oscillator-only)."""
    if layout.tls_count:
        raise DimensionError("fock_state expects an oscillator-only layout")
    if not 0 <= n < layout.fock_dim:
        raise ValueError(f"Fock index {n} outside truncation {layout.fock_dim}")
    v = np.zeros(layout.fock_dim, dtype=complex)
    v[n] = 1.0
    return PureState(v, layout)


def ladder(fock_dim: int) -> np.ndarray:
    """Truncated annihilation operator on the oscillator factor alone."""
    return np.diag(np.sqrt(np.arange(1, fock_dim, dtype=float)), 1).astype(complex)


def tensor_embed(op, slot: int, layout: SubsystemLayout) -> Operator:
    """Embed a single-factor matrix at ``slot`` with identities elsewhere."""
    m = np.asarray(op, dtype=complex)
    dims = layout.dims
    if not 0 <= slot < len(dims):
        raise IndexError(f"slot {slot} outside layout with {len(dims)} subsystems")
    if m.shape != (dims[slot], dims[slot]):
        raise DimensionError(f"factor matrix shape {m.shape} does not match subsystem dimension {dims[slot]}")
    left = int(np.prod(dims[:slot], dtype=int))
    right = int(np.prod(dims[slot + 1:], dtype=int))
    out = np.kron(np.kron(np.eye(left), m), np.eye(right))
    return Operator(out, layout)


@dataclass(frozen=True, eq=False)
class OperatorSet:
    """All elementary operators of a layout, embedded in the full space."""

    layout: SubsystemLayout
    a: Operator
    adag: Operator
    n: Operator
    X: Operator
    P: Operator
    sx: tuple[Operator, ...] = field(default=())
    sy: tuple[Operator, ...] = field(default=())
    sz: tuple[Operator, ...] = field(default=())
    sp: tuple[Operator, ...] = field(default=())
    sm: tuple[Operator, ...] = field(default=())

    @property
    def identity(self) -> Operator:
        return Operator(np.eye(self.layout.total_dim), self.layout)


def build_operators(layout: SubsystemLayout) -> OperatorSet:
    """Ladder, number, quadrature and Pauli operators for ``layout``.

    TLS operators are indexed from 0 (stable TLS) to ``tls_count - 1``.
    """
    a0 = ladder(layout.fock_dim)
    x0 = (a0 + a0.conj().T) / np.sqrt(2.0)
    p0 = 1j * (a0.conj().T - a0) / np.sqrt(2.0)
    emb = lambda m, s: tensor_embed(m, s, layout)  # noqa: E731
    slots = range(1, layout.n_subsystems)
    return OperatorSet(
        layout=layout,
        a=emb(a0, 0),
        adag=emb(a0.conj().T, 0),
        n=emb(a0.conj().T @ a0, 0),
        X=emb(x0, 0),
        P=emb(p0, 0),
        sx=tuple(emb(SIGMA_X, s) for s in slots),
        sy=tuple(emb(SIGMA_Y, s) for s in slots),
        sz=tuple(emb(SIGMA_Z, s) for s in slots),
        sp=tuple(emb(SIGMA_PLUS, s) for s in slots),
        sm=tuple(emb(SIGMA_MINUS, s) for s in slots),
    )


def hermitian_function(H, f: Callable[[np.ndarray], np.ndarray], tol: float = HERMITIAN_TOL):
    """Apply a scalar function through the eigendecomposition ``V f(L) V^dag``.

    Accepts an Operator (returns an Operator) or a bare square array
    (returns an array).
    """
    m = as_matrix(H)
    resid = np.max(np.abs(m - m.conj().T), initial=0.0)
    if resid > tol:
        raise ValueError(f"hermitian_function requires a Hermitian matrix (residual {resid:.3e})")
    evals, vecs = np.linalg.eigh(0.5 * (m + m.conj().T))
    out = (vecs * np.asarray(f(evals))) @ vecs.conj().T
    if isinstance(H, Operator):
        return Operator(out, H.layout)
    return out


def _oscillator_unitary(generator: np.ndarray, layout: SubsystemLayout) -> Operator:
    # exp(G) with G anti-Hermitian, computed as exp(-i K) with K = i G Hermitian
    u = hermitian_function(1j * generator, lambda lam: np.exp(-1j * lam))
    return tensor_embed(u, 0, layout)


def displacement(alpha: complex, layout: SubsystemLayout) -> Operator:
    """``D(alpha) = exp(alpha a^dag - alpha^* a)`` acting on the oscillator."""
    a = ladder(layout.fock_dim)
    return _oscillator_unitary(alpha * a.conj().T - np.conj(alpha) * a, layout)


def squeeze(xi: complex, layout: SubsystemLayout) -> Operator:
    """``S(xi) = exp((xi^* a^2 - xi a^dag^2)/2)`` acting on the oscillator.

    For real ``xi = s > 0`` the X quadrature is squeezed: Var(X) = exp(-2s)/2.
    """
    a = ladder(layout.fock_dim)
    return _oscillator_unitary(0.5 * (np.conj(xi) * a @ a - xi * a.conj().T @ a.conj().T), layout)


def partial_trace(rho, keep, layout: SubsystemLayout | None = None):
    """Reduce onto the subsystems listed in ``keep`` (int or sequence).

    Returns a DensityMatrix when given one, otherwise a bare array (then
    ``layout`` is required).
    """
    if isinstance(rho, Operator):
        layout = rho.layout
    if layout is None:
        raise ValueError("layout required for a bare matrix")
    keep_list = [keep] if np.isscalar(keep) else list(keep)
    nsub = layout.n_subsystems
    for k in keep_list:
        if not 0 <= k < nsub:
            raise IndexError(f"subsystem index {k} outside layout with {nsub} subsystems")
    if sorted(set(keep_list)) != keep_list:
        raise ValueError("keep indices must be sorted and unique")
    dims = layout.dims
    m = as_matrix(rho).reshape(dims + dims)
    traced = [k for k in range(nsub) if k not in keep_list]
    # trace the highest axes first so remaining indices stay valid
    for ax in sorted(traced, reverse=True):
        cur = m.ndim // 2
        m = np.trace(m, axis1=ax, axis2=ax + cur)
    dk = int(np.prod([dims[k] for k in keep_list], dtype=int))
    out = m.reshape(dk, dk)
    if not isinstance(rho, Operator):
        return out
    if keep_list == [0]:
        new_layout = layout.oscillator()
    elif keep_list[0] == 0:
        new_layout = SubsystemLayout(layout.fock_dim, len(keep_list) - 1)
    else:
        # qubit-only reductions have no oscillator factor; return the bare matrix
        return out
    if isinstance(rho, DensityMatrix):
        return DensityMatrix(out, new_layout, check=False)
    return Operator(out, new_layout)


def reduce_to_oscillator(matrix: np.ndarray, layout: SubsystemLayout) -> np.ndarray:
    """Fast oscillator reduction of a bare full-space matrix."""
    d = 2**layout.tls_count
    n = layout.fock_dim
    return np.einsum("iaja->ij", np.asarray(matrix).reshape(n, d, n, d))


def tensor_product(*ops) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for m in ops:
        out = np.kron(out, as_matrix(m))
    return out


def density_to_json(rho: DensityMatrix) -> dict:
    m = rho.matrix
    return {"dims": list(rho.layout.dims), "re": m.real.tolist(), "im": m.imag.tolist()}


def density_from_json(doc: dict, check: bool = True) -> DensityMatrix:
    dims = list(doc["dims"])
    if not dims or any(d != 2 for d in dims[1:]):
        raise DimensionError(f"unsupported dims {dims}; expected [fock_dim, 2, 2, ...]")
    layout = SubsystemLayout(int(dims[0]), len(dims) - 1)
    m = np.asarray(doc["re"], dtype=float) + 1j * np.asarray(doc["im"], dtype=float)
    return DensityMatrix(m, layout, check=check)


def save_density(rho: DensityMatrix, path) -> None:
    with open(path, "w") as fh:
        json.dump(density_to_json(rho), fh)


def load_density(path, check: bool = True) -> DensityMatrix:
    with open(path) as fh:
        return density_from_json(json.load(fh), check=check)


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random full-rank (or given-rank) density matrix, Ginibre construction."""
    r = dim if rank is None else rank
    g = rng.normal(size=(dim, r)) + 1j * rng.normal(size=(dim, r))
    m = g @ g.conj().T
    return m / np.trace(m).real


def commutator(A, B) -> np.ndarray:
    a, b = as_matrix(A), as_matrix(B)
    return a @ b - b @ a


__all__: Sequence[str] = [
    "SubsystemLayout",
    "Operator",
    "DensityMatrix",
    "PureState",
    "OperatorSet",
    "DimensionError",
    "InvalidStateError",
    "build_operators",
    "displacement",
    "squeeze",
    "hermitian_function",
    "tensor_embed",
    "partial_trace",
    "reduce_to_oscillator",
    "fock_state",
    "ladder",
    "tensor_product",
    "density_to_json",
    "density_from_json",
    "save_density",
    "load_density",
    "random_density",
    "commutator",
]
