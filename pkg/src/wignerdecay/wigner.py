"""Wigner functions of oscillator states and their negativity functionals.

Normalization: ``W(x, p) = (1/pi) int dy <x+y|rho|x-y> exp(-2 i p y)`` with
``X = (a + a^dag)/sqrt(2)``, so ``int W dx dp = 1`` and the vacuum value at
the origin is ``1/pi``.

The default evaluator discretizes that integral on a fine position grid
built from Hermite functions; the integrand is smooth with Gaussian tails so
the trapezoid rule converges spectrally.  :func:`wigner_laguerre` evaluates
the Fock-basis Laguerre expansion instead and serves as an independent
reference.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import eval_genlaguerre, gammaln

from .hilbert import as_matrix

BOUNDARY_TOL = 1e-4


class GridTooSmallWarning(RuntimeWarning):
    """Wigner function non-negligible on the grid boundary."""


@dataclass(frozen=True)
class PhaseSpaceGrid:
    x_min: float = -5.0
    x_max: float = 5.0
    p_min: float = -5.0
    p_max: float = 5.0
    points: int = 201
    p_points: int | None = None

    def __post_init__(self):
        for name in ("x_min", "x_max", "p_min", "p_max"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not self.x_min < self.x_max or not self.p_min < self.p_max:
            raise ValueError("grid bounds must satisfy min < max")
        if self.points < 3 or (self.p_points is not None and self.p_points < 3):
            raise ValueError("at least 3 points per axis required")

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.points)

    @property
    def ps(self) -> np.ndarray:
        return np.linspace(self.p_min, self.p_max, self.p_points or self.points)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.points - 1)

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / ((self.p_points or self.points) - 1)

    def refined(self, factor: int = 2) -> "PhaseSpaceGrid":
        """Same bounds with the spacing divided by ``factor``."""
        pp = self.p_points or self.points
        return PhaseSpaceGrid(
            self.x_min, self.x_max, self.p_min, self.p_max,
            (self.points - 1) * factor + 1,
            None if self.p_points is None else (pp - 1) * factor + 1,
        )

    @classmethod
    def for_ancillas(cls, n_ancillas: int) -> "PhaseSpaceGrid":
        """Square grid with spacing 0.05 wide enough for ``n_ancillas`` displacements.

        Each ancilla widens the reachable phase-space region, so the half
        width grows by 2 per extra ancilla (5, 7, 9).
        """
        if n_ancillas not in (1, 2, 3):
            raise ValueError(f"n_ancillas must be 1, 2 or 3, got {n_ancillas!r}")
        half = 5.0 + 2.0 * (n_ancillas - 1)
        return cls(-half, half, -half, half, int(round(2 * half / 0.05)) + 1)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class WignerMap:
    """``values[i, j] = W(xs[i], ps[j])``."""

    grid: PhaseSpaceGrid
    values: np.ndarray
    imag_residue: float = 0.0

    @property
    def norm(self) -> float:
        return float(self.values.sum() * self.grid.dx * self.grid.dp)

    @property
    def boundary_max(self) -> float:
        v = np.abs(self.values)
        return float(max(v[0].max(), v[-1].max(), v[:, 0].max(), v[:, -1].max()))

    def write_csv(self, path, header: str | None = None) -> None:
        xs, ps = self.grid.xs, self.grid.ps
        with open(path, "w", newline="") as fh:
            if header:
                for line in header.splitlines():
                    fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "p", "W"])
            for i, x in enumerate(xs):
                for j, p in enumerate(ps):
                    w.writerow([f"{x:.10g}", f"{p:.10g}", f"{self.values[i, j]:.12e}"])

    def to_json(self) -> dict:
        return {"grid": self.grid.to_dict(), "W": self.values.tolist()}

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)


def hermite_functions(z: np.ndarray, n_max: int) -> np.ndarray:
    """Position wavefunctions ``<z|n>`` for ``n < n_max``, shape ``(len(z), n_max)``."""
    z = np.asarray(z, dtype=float)
    out = np.zeros((z.size, n_max))
    out[:, 0] = np.pi**-0.25 * np.exp(-0.5 * z * z)
    if n_max > 1:
        out[:, 1] = math.sqrt(2.0) * z * out[:, 0]
    for n in range(2, n_max):
        out[:, n] = math.sqrt(2.0 / n) * z * out[:, n - 1] - math.sqrt((n - 1) / n) * out[:, n - 2]
    return out


class WignerEvaluator:
    """Precomputed quadrature for one grid and Fock truncation.

    Immutable after construction; :meth:`__call__` is safe to use from
    several threads.
    """

    def __init__(self, grid: PhaseSpaceGrid, fock_dim: int, max_step: float = 0.05):
        self.grid = grid
        self.fock_dim = fock_dim
        xs, ps = grid.xs, grid.ps
        radius = math.sqrt(2 * fock_dim + 1) + 7.0
        # nyquist bound for exp(-2ipy) times the Hermite-function oscillations
        h_max = min(max_step, math.pi / (2 * max(abs(grid.p_min), abs(grid.p_max)) + 2 * radius))
        sub = max(1, int(math.ceil(grid.dx / h_max - 1e-9)))
        h = grid.dx / sub
        k_max = int(math.ceil(radius / h))
        ks = np.arange(-k_max, k_max + 1)
        nz = (xs.size - 1) * sub + 2 * k_max + 1
        z = grid.x_min - k_max * h + h * np.arange(nz)
        self._phi = hermite_functions(z, fock_dim)
        centre = np.arange(xs.size)[:, None] * sub + k_max
        self._flat = ((centre + ks[None, :]) * nz + (centre - ks[None, :])).ravel()
        self._shape = (xs.size, ks.size)
        self._fourier = np.exp(-2j * np.outer(ks * h, ps)) * (h / np.pi)

    def complex_values(self, rho) -> np.ndarray:
        m = as_matrix(rho)
        if m.shape != (self.fock_dim, self.fock_dim):
            raise ValueError(f"expected an oscillator matrix of size {self.fock_dim}, got {m.shape}")
        phi = self._phi
        q = (phi @ m) @ phi.T
        kern = q.ravel()[self._flat].reshape(self._shape)
        return kern @ self._fourier

    def __call__(self, rho, warn: bool = True) -> WignerMap:
        w = self.complex_values(rho)
        wm = WignerMap(self.grid, np.ascontiguousarray(w.real), float(np.max(np.abs(w.imag))))
        if warn and wm.boundary_max > BOUNDARY_TOL:
            warnings.warn(
                f"|W| reaches {wm.boundary_max:.2e} on the grid boundary; enlarge the grid",
                GridTooSmallWarning,
                stacklevel=2,
            )
        return wm


_EVALUATORS: dict = {}


def evaluator_for(grid: PhaseSpaceGrid, fock_dim: int) -> WignerEvaluator:
    key = (grid, fock_dim)
    ev = _EVALUATORS.get(key)
    if ev is None:
        if len(_EVALUATORS) > 8:
            _EVALUATORS.clear()
        ev = _EVALUATORS[key] = WignerEvaluator(grid, fock_dim)
    return ev


def wigner_map(rho, grid: PhaseSpaceGrid = PhaseSpaceGrid(), warn: bool = True) -> WignerMap:
    """Wigner function of an oscillator-only state on ``grid``."""
    m = as_matrix(rho)
    return evaluator_for(grid, m.shape[0])(m, warn=warn)


def wigner_laguerre(rho, xs, ps) -> np.ndarray:
    """Reference Wigner function from the Laguerre form of ``W_{|m><n|}``.

    For ``m >= n``::

        W_mn(a) = (-1)^n / pi * sqrt(n!/m!) * (2 a*)^(m-n) * exp(-2|a|^2) * L_n^(m-n)(4|a|^2)

    with ``a = (x + i p)/sqrt(2)``; the ``m < n`` terms are complex conjugates.
    Returns ``W[i, j]`` at ``(xs[i], ps[j])``.
    """
    m = as_matrix(rho)
    dim = m.shape[0]
    X, Pm = np.meshgrid(np.asarray(xs, float), np.asarray(ps, float), indexing="ij")
    alpha = (X + 1j * Pm) / math.sqrt(2.0)
    r2 = 4.0 * np.abs(alpha) ** 2
    gauss = np.exp(-0.5 * r2)
    w = np.zeros(X.shape, dtype=complex)
    for mm in range(dim):
        for nn in range(mm + 1):
            c = m[mm, nn]
            k = mm - nn
            pref = (-1) ** nn * math.exp(0.5 * (gammaln(nn + 1) - gammaln(mm + 1)))
            term = pref * (2.0 * np.conj(alpha)) ** k * gauss * eval_genlaguerre(nn, k, r2) / np.pi
            w += c * term
            if k:
                w += m[nn, mm] * np.conj(term)
    return w.real


def wigner_point_parity(rho, x: float, p: float) -> float:
    """Displaced-parity value ``(1/pi) Tr[rho D(a) Pi D(a)^dag]`` at one point.

    The displacement is exponentiated in a Fock space 40 levels larger than
    ``rho`` so its truncation error stays negligible.
    """
    m = as_matrix(rho)
    dim = m.shape[0]
    alpha = (x + 1j * p) / math.sqrt(2.0)
    # work in a larger space so the truncated displacement is accurate
    big = dim + 40
    a = np.diag(np.sqrt(np.arange(1, big)), 1)
    gen = alpha * a.conj().T - np.conj(alpha) * a
    evals, vecs = np.linalg.eigh(1j * gen)
    disp = (vecs * np.exp(-1j * evals)) @ vecs.conj().T
    parity = np.diag((-1.0) ** np.arange(big))
    op = disp @ parity @ disp.conj().T
    return float(np.real(np.trace(m @ op[:dim, :dim])) / np.pi)


def integrated_negativity(wmap: WignerMap) -> float:
    """Trapezoidal integral of the pointwise negative part ``max(-W, 0)``."""
    neg = np.maximum(-wmap.values, 0.0)
    return float(trapezoid(trapezoid(neg, wmap.grid.ps, axis=1), wmap.grid.xs))


def min_negativity(wmap: WignerMap) -> tuple[float, float, float]:
    """Global minimum ``(N, x*, p*)`` refined by a local quadratic fit.

    The fit uses the 3x3 neighbourhood of the grid argmin and is accepted
    only when its stationary point is a minimum inside that neighbourhood
    and lies below the grid value.
    """
    v = wmap.values
    xs, ps = wmap.grid.xs, wmap.grid.ps
    i, j = np.unravel_index(int(np.argmin(v)), v.shape)
    best = (float(v[i, j]), float(xs[i]), float(ps[j]))
    if not (0 < i < v.shape[0] - 1 and 0 < j < v.shape[1] - 1):
        return best
    dx, dp = wmap.grid.dx, wmap.grid.dp
    u, w = np.meshgrid([-1.0, 0.0, 1.0], [-1.0, 0.0, 1.0], indexing="ij")
    u, w = u.ravel(), w.ravel()
    design = np.column_stack([np.ones(9), u, w, u * u, u * w, w * w])
    c = np.linalg.lstsq(design, v[i - 1:i + 2, j - 1:j + 2].ravel(), rcond=None)[0]
    hess = np.array([[2 * c[3], c[4]], [c[4], 2 * c[5]]])
    if np.linalg.eigvalsh(hess)[0] <= 0:
        return best
    su, sw = np.linalg.solve(hess, -c[1:3])
    if abs(su) > 1 or abs(sw) > 1:
        return best
    val = c[0] + c[1] * su + c[2] * sw + c[3] * su * su + c[4] * su * sw + c[5] * sw * sw
    if val > best[0]:
        return best
    return float(val), float(xs[i] + su * dx), float(ps[j] + sw * dp)


@dataclass(frozen=True)
class NegativityRecord:
    time: float
    integrated_negativity: float
    min_value: float
    x_star: float
    p_star: float


@dataclass
class NegativitySeries:
    """Per-time negativity functionals and the optimal times.

    ``t_star`` is where ``N(t)`` is deepest; ``t_star_integrated`` maximizes
    ``I^-(t)``.
    """

    records: list[NegativityRecord]
    boundary_max: float = 0.0
    _arrays: dict = field(default_factory=dict, repr=False)

    def _col(self, name):
        if name not in self._arrays:
            self._arrays[name] = np.array([getattr(r, name) for r in self.records])
        return self._arrays[name]

    @property
    def times(self) -> np.ndarray:
        return self._col("time")

    @property
    def integrated(self) -> np.ndarray:
        return self._col("integrated_negativity")

    @property
    def minima(self) -> np.ndarray:
        return self._col("min_value")

    @property
    def index_star(self) -> int:
        return int(np.argmin(self.minima))

    @property
    def index_star_integrated(self) -> int:
        return int(np.argmax(self.integrated))

    @property
    def t_star(self) -> float:
        return float(self.times[self.index_star])

    @property
    def t_star_integrated(self) -> float:
        return float(self.times[self.index_star_integrated])

    @property
    def best(self) -> NegativityRecord:
        return self.records[self.index_star]

    def write_csv(self, path, header: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header:
                for line in header.splitlines():
                    fh.write(f"# {line}\n")
            fh.write(f"# t_star = {self.t_star:.10g}  N(t_star) = {self.best.min_value:.12g}\n")
            fh.write(
                f"# t_star_integrated = {self.t_star_integrated:.10g}  "
                f"I_neg(t_star_integrated) = {self.integrated[self.index_star_integrated]:.12g}\n"
            )
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "I_neg", "N", "x_star", "p_star"])
            for r in self.records:
                w.writerow([
                    f"{r.time:.10g}",
                    f"{r.integrated_negativity:.12e}",
                    f"{r.min_value:.12e}",
                    f"{r.x_star:.10g}",
                    f"{r.p_star:.10g}",
                ])


def negativity_record(rho, grid: PhaseSpaceGrid, time: float = 0.0, warn: bool = True) -> NegativityRecord:
    wm = wigner_map(rho, grid, warn=warn)
    n, xs, ps = min_negativity(wm)
    return NegativityRecord(time, integrated_negativity(wm), n, xs, ps)


def negativity_series(evolution, grid: PhaseSpaceGrid = PhaseSpaceGrid(), warn: bool = True) -> NegativitySeries:
    """One :class:`NegativityRecord` per stored reduced state.

    A single :class:`GridTooSmallWarning` is emitted if any map touches the
    boundary.
    """
    ev = evaluator_for(grid, evolution.reduced.shape[1])
    records = []
    edge = 0.0
    for t, rho in zip(evolution.times, evolution.reduced):
        wm = ev(rho, warn=False)
        edge = max(edge, wm.boundary_max)
        n, xs, ps = min_negativity(wm)
        records.append(NegativityRecord(float(t), integrated_negativity(wm), n, xs, ps))
    if warn and edge > BOUNDARY_TOL:
        warnings.warn(
            f"|W| reaches {edge:.2e} on the grid boundary during the run; enlarge the grid",
            GridTooSmallWarning,
            stacklevel=2,
        )
    return NegativitySeries(records, edge)
