"""Characterization of a negativity-optimized oscillator state.

* non-Gaussian core: undo displacement and squeezing so that the Shannon
  entropy of the Fock populations is minimal;
* fidelity to displaced, squeezed two-component Fock superpositions, with
  an optional fully dephased comparator;
* quantum Fisher information for phase rotations ``exp(-i theta n)``.

All searches use Nelder-Mead restarted from a fixed lattice, so results are
deterministic.
"""

from __future__ import annotations

import csv
import itertools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .hilbert import (
    DensityMatrix,
    PureState,
    SubsystemLayout,
    as_matrix,
    displacement,
    ladder,
    squeeze,
)

BETA_BOX = 5.0
S_BOX = 2.0
TEST_VARIANTS = ("fock01", "fock24", "custom")


class ConvergenceWarning(RuntimeWarning):
    """A simplex search exhausted its budget."""


class TruncationWarning(RuntimeWarning):
    """A Gaussian operation pushed weight onto the highest Fock levels."""


@dataclass(frozen=True)
class GaussianParams:
    beta: complex = 0j
    s: float = 0.0

    def __post_init__(self):
        if abs(self.beta.real) > BETA_BOX or abs(self.beta.imag) > BETA_BOX or abs(self.s) > S_BOX:
            raise ValueError(f"Gaussian parameters outside the search box: beta={self.beta}, s={self.s}")

    def to_dict(self) -> dict:
        return {"beta_re": self.beta.real, "beta_im": self.beta.imag, "s": self.s}


def _osc_layout(rho) -> SubsystemLayout:
    if isinstance(rho, DensityMatrix):
        if rho.layout.tls_count:
            raise ValueError("expected an oscillator-only state")
        return rho.layout
    return SubsystemLayout(as_matrix(rho).shape[0], 0)


def gaussian_unitary(params: GaussianParams, fock_dim: int) -> np.ndarray:
    """``S(s) D(beta)`` as a bare matrix."""
    layout = SubsystemLayout(fock_dim, 0)
    d = displacement(params.beta, layout).matrix
    if params.s == 0:
        return d
    return squeeze(params.s, layout).matrix @ d


def _edge_weight(m: np.ndarray, levels: int = 2) -> float:
    return float(np.diag(m).real[-levels:].sum())


def apply_gaussian(rho, params: GaussianParams, check: bool = True) -> DensityMatrix:
    """``S(s) D(beta) rho D(beta)^dag S(s)^dag`` on an oscillator state.

    With ``check`` a :class:`TruncationWarning` flags more than 1e-6 of weight
    in the two highest Fock levels.
    """
    layout = _osc_layout(rho)
    u = gaussian_unitary(params, layout.fock_dim)
    out = u @ as_matrix(rho) @ u.conj().T
    out = 0.5 * (out + out.conj().T)
    if check and _edge_weight(out) > 1e-6:
        warnings.warn(
            f"Gaussian operation leaves {_edge_weight(out):.2e} weight at the Fock cutoff",
            TruncationWarning,
            stacklevel=2,
        )
    return DensityMatrix(out, layout, check=False)


def fock_populations(rho) -> np.ndarray:
    return np.clip(np.diag(as_matrix(rho)).real, 0.0, None)


def fock_entropy(rho) -> float:
    """Shannon entropy (nats) of the Fock populations, ``0 ln 0 = 0``."""
    p = fock_populations(rho)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def dephase(rho) -> DensityMatrix:
    """Keep only the Fock-diagonal part."""
    m = as_matrix(rho)
    return DensityMatrix(np.diag(np.diag(m)), _osc_layout(rho), check=False)


@dataclass(frozen=True)
class CoreStateResult:
    params: GaussianParams
    entropy: float
    core: DensityMatrix
    dominant: int
    converged: bool = True
    evaluations: int = 0

    @property
    def populations(self) -> np.ndarray:
        return fock_populations(self.core)

    def to_dict(self) -> dict:
        return {
            **self.params.to_dict(),
            "entropy": self.entropy,
            "dominant_fock": self.dominant,
            "populations": self.populations[:12].tolist(),
            "converged": self.converged,
            "evaluations": self.evaluations,
        }


@dataclass(frozen=True)
class _Run:
    value: float
    x: tuple
    converged: bool
    nfev: int


def _simplex(fun, x0, bounds=None, xatol=1e-6, fatol=1e-12, maxiter=4000) -> _Run:
    res = minimize(
        fun,
        np.asarray(x0, float),
        method="Nelder-Mead",
        bounds=bounds,
        options={"xatol": xatol, "fatol": fatol, "maxiter": maxiter, "maxfev": 2 * maxiter},
    )
    return _Run(float(res.fun), tuple(float(v) for v in res.x), bool(res.success), int(res.nfev))


def _multistart(fun, starts, workers: int = 1, **kw) -> tuple[_Run, int, bool]:
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(lambda s: _simplex(fun, s, **kw), starts))
    else:
        runs = [_simplex(fun, s, **kw) for s in starts]
    best = min(runs, key=lambda r: (r.value, r.x))
    return best, sum(r.nfev for r in runs), best.converged


CORE_LATTICE = tuple(itertools.product((-1.0, 0.0, 1.0), (-1.0, 0.0, 1.0), (-0.5, 0.0, 0.5)))


def optimize_core(rho_star, starts=CORE_LATTICE, workers: int = 1, xatol: float = 1e-6) -> CoreStateResult:
    """Minimize the Fock entropy of ``S(s) D(beta) rho D^dag S^dag`` over (Re beta, Im beta, s).

    The identity transformation is always included as a candidate.
    """
    m = as_matrix(rho_star)
    dim = m.shape[0]
    layout = _osc_layout(rho_star)

    def entropy(v):
        u = gaussian_unitary(GaussianParams(complex(v[0], v[1]), v[2]), dim)
        return fock_entropy(u @ m @ u.conj().T)

    bounds = [(-BETA_BOX, BETA_BOX), (-BETA_BOX, BETA_BOX), (-S_BOX, S_BOX)]
    starts = list(starts)
    if (0.0, 0.0, 0.0) not in starts:
        starts.append((0.0, 0.0, 0.0))
    best, nfev, ok = _multistart(entropy, starts, workers, bounds=bounds, xatol=xatol)
    identity = fock_entropy(m)
    if identity < best.value:
        best = _Run(identity, (0.0, 0.0, 0.0), True, 0)
    if not ok:
        warnings.warn("core-state search did not converge within budget", ConvergenceWarning, stacklevel=2)
    params = GaussianParams(complex(best.x[0], best.x[1]), best.x[2])
    core = apply_gaussian(DensityMatrix(m, layout, check=False), params)
    return CoreStateResult(
        params=params,
        entropy=best.value,
        core=core,
        dominant=int(np.argmax(fock_populations(core))),
        converged=ok,
        evaluations=nfev,
    )


@dataclass(frozen=True)
class TestStateParams:
    """Parameters of ``D(alpha) S(xi) (sqrt(p)|m> + sqrt(1-p)|n>)``.

    ``fock01`` fixes ``(m, n) = (0, 1)``, ``fock24`` fixes ``(2, 4)``.
    """

    __test__ = False  # not a pytest class

    variant: str = "fock01"
    alpha: complex = 0j
    xi: float = 0.0
    p: float = 1.0
    m: int | None = None
    n: int | None = None

    def __post_init__(self):
        if self.variant not in TEST_VARIANTS:
            raise ValueError(f"variant must be one of {TEST_VARIANTS}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"population p must lie in [0, 1], got {self.p}")
        if self.variant == "custom" and (self.m is None or self.n is None):
            raise ValueError("custom variant needs the Fock pair (m, n)")

    @property
    def pair(self) -> tuple[int, int]:
        if self.variant == "fock01":
            return (0, 1)
        if self.variant == "fock24":
            return (2, 4)
        return (int(self.m), int(self.n))

    def to_dict(self) -> dict:
        m, n = self.pair
        return {
            "variant": self.variant,
            "alpha_re": self.alpha.real,
            "alpha_im": self.alpha.imag,
            "xi": self.xi,
            "p": self.p,
            "m": m,
            "n": n,
        }


def make_test_state(params: TestStateParams, fock_dim: int = 30) -> PureState:
    layout = SubsystemLayout(fock_dim, 0)
    m, n = params.pair
    if max(m, n) >= fock_dim:
        raise ValueError("Fock pair outside the truncation")
    v = np.zeros(fock_dim, dtype=complex)
    v[m] = math.sqrt(params.p)
    v[n] = math.sqrt(1.0 - params.p)
    if params.xi:
        v = squeeze(params.xi, layout).matrix @ v
    if params.alpha:
        v = displacement(params.alpha, layout).matrix @ v
    return PureState(v / np.linalg.norm(v), layout, check=False)


def _psd_sqrt(m: np.ndarray, name: str) -> np.ndarray:
    lam, vec = np.linalg.eigh(0.5 * (m + m.conj().T))
    if lam[0] < -1e-8:
        raise ValueError(f"{name} is not positive semidefinite (eigenvalue {lam[0]:.3e})")
    return (vec * np.sqrt(np.clip(lam, 0.0, None))) @ vec.conj().T


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2``; ``<psi|rho|psi>`` for a ket."""
    if isinstance(sigma, PureState) or isinstance(rho, PureState):
        ket, other = (sigma, rho) if isinstance(sigma, PureState) else (rho, sigma)
        if isinstance(other, PureState):
            return float(abs(np.vdot(ket.amplitudes, other.amplitudes)) ** 2)
        m = as_matrix(other)
        _psd_sqrt(m, "rho")
        v = ket.amplitudes
        return float(min(1.0, max(0.0, np.real(v.conj() @ m @ v))))
    a, b = as_matrix(rho), as_matrix(sigma)
    if a.shape != b.shape:
        raise ValueError("fidelity requires equal dimensions")
    ra = _psd_sqrt(a, "rho")
    _psd_sqrt(b, "sigma")
    inner = ra @ b @ ra
    lam = np.clip(np.linalg.eigvalsh(0.5 * (inner + inner.conj().T)), 0.0, None)
    return float(min(1.0, np.sqrt(lam).sum() ** 2))


@dataclass(frozen=True)
class FidelityResult:
    params: TestStateParams
    fidelity: float
    dephased: bool
    converged: bool = True
    xi_gain: float | None = None

    def to_dict(self) -> dict:
        d = {**self.params.to_dict(), "fidelity": self.fidelity, "dephased": self.dephased, "converged": self.converged}
        if self.xi_gain is not None:
            d["xi_gain"] = self.xi_gain
        return d


_P_STARTS = tuple(math.asin(math.sqrt(p)) for p in (0.1, 0.5, 0.9))
_ALPHA_STARTS = (-1.0, 0.0, 1.0)
_XI_STARTS = (-0.3, 0.0, 0.3)


def _fidelity_objective(rho: np.ndarray, variant: str, dephased: bool, with_xi: bool, pair=None):
    dim = rho.shape[0]
    root = _psd_sqrt(rho, "rho") if dephased else None

    def params_of(v):
        if with_xi:
            re, im, xi, theta = v
        else:
            (re, im, theta), xi = v, 0.0
        m, n = pair if pair else (None, None)
        return TestStateParams(variant, complex(re, im), float(xi), math.sin(theta) ** 2, m, n)

    def value(v):
        psi = make_test_state(params_of(v), dim).amplitudes
        if not dephased:
            return float(np.real(psi.conj() @ rho @ psi))
        inner = root @ np.diag(np.abs(psi) ** 2) @ root
        lam = np.clip(np.linalg.eigvalsh(0.5 * (inner + inner.conj().T)), 0.0, None)
        return float(np.sqrt(lam).sum() ** 2)

    return value, params_of


def optimize_fidelity(
    rho_star,
    variant: str = "fock01",
    dephased: bool = False,
    pair: tuple[int, int] | None = None,
    include_xi: bool | None = None,
    workers: int = 1,
) -> FidelityResult:
    """Best test-state fidelity over the variant's parameters.

    ``fock01`` searches (Re alpha, Im alpha, xi, p); ``fock24`` searches
    (Re alpha, Im alpha, p) with ``xi = 0`` and then re-optimizes with
    ``xi`` free from that optimum, recording the gain as ``xi_gain``.
    ``dephased`` compares against the Fock-diagonal part of the test
    projector (Uhlmann fidelity with a mixed state).
    """
    rho = as_matrix(rho_star)
    if include_xi is None:
        include_xi = variant != "fock24"
    value, params_of = _fidelity_objective(rho, variant, dephased, include_xi, pair)
    if include_xi:
        starts = list(itertools.product(_ALPHA_STARTS, _ALPHA_STARTS, _XI_STARTS, _P_STARTS))
        bounds = [(-BETA_BOX, BETA_BOX), (-BETA_BOX, BETA_BOX), (-S_BOX, S_BOX), (None, None)]
    else:
        starts = list(itertools.product(_ALPHA_STARTS, _ALPHA_STARTS, _P_STARTS))
        bounds = [(-BETA_BOX, BETA_BOX), (-BETA_BOX, BETA_BOX), (None, None)]
    best, _, ok = _multistart(lambda v: -value(v), starts, workers, bounds=bounds)
    if not ok:
        warnings.warn("fidelity search did not converge within budget", ConvergenceWarning, stacklevel=2)
    params = params_of(best.x)
    fval = -best.value
    xi_gain = None
    if not include_xi:
        value4, _ = _fidelity_objective(rho, variant, dephased, True, pair)
        re, im, theta = best.x
        seeds = [(re, im, xi0, theta) for xi0 in (-0.1, 0.1)]
        b4 = [_simplex(lambda v: -value4(v), s4) for s4 in seeds]
        xi_gain = max(0.0, max(-r.value for r in b4) - fval)
    return FidelityResult(params, float(fval), dephased, ok, xi_gain)


@dataclass(frozen=True)
class QfiResult:
    qfi_ng: float
    qfi_coherent: float
    alpha: complex = field(default=0j)

    @property
    def ratio(self) -> float:
        return self.qfi_ng / self.qfi_coherent if self.qfi_coherent > 0 else math.inf

    def to_dict(self) -> dict:
        return {
            "qfi_ng": self.qfi_ng,
            "qfi_coherent": self.qfi_coherent,
            "alpha_re": self.alpha.real,
            "alpha_im": self.alpha.imag,
            "ratio": self.ratio,
        }


def qfi_number(rho, cutoff: float = 1e-12) -> float:
    """Mixed-state QFI for the generator n (sum over eigenpairs with l_k + l_l > cutoff)."""
    m = as_matrix(rho)
    lam, vec = np.linalg.eigh(0.5 * (m + m.conj().T))
    lam = np.clip(lam, 0.0, None)
    num = np.arange(m.shape[0], dtype=float)
    gen = (vec.conj().T * num) @ vec
    s = lam[:, None] + lam[None, :]
    mask = s > cutoff
    terms = np.where(mask, (lam[:, None] - lam[None, :]) ** 2 / np.where(mask, s, 1.0), 0.0)
    return float(2.0 * np.sum(terms * np.abs(gen) ** 2))


def coherent_state(alpha: complex, fock_dim: int) -> PureState:
    layout = SubsystemLayout(fock_dim, 0)
    v = np.zeros(fock_dim, dtype=complex)
    v[0] = 1.0
    return PureState(displacement(alpha, layout).matrix @ v, layout, check=False)


def qfi_phase(rho) -> QfiResult:
    """QFI of ``rho`` and of the coherent state with the same first moments.

    The matched amplitude is ``alpha = <a> = (<X> + i <P>)/sqrt(2)``.
    """
    m = as_matrix(rho)
    dim = m.shape[0]
    alpha = complex(np.trace(m @ ladder(dim)))
    coh = coherent_state(alpha, dim).density()
    return QfiResult(qfi_number(m), qfi_number(coh.matrix), alpha)


def write_modulus_csv(rho, path, n_max: int = 8, header: str | None = None) -> None:
    """Table of ``|rho_mn|`` for ``m, n < n_max``."""
    m = np.abs(as_matrix(rho))[:n_max, :n_max]
    with open(path, "w", newline="") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m"] + [f"n={k}" for k in range(m.shape[1])])
        for i, row in enumerate(m):
            w.writerow([i] + [f"{v:.10e}" for v in row])
