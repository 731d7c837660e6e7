"""Wigner functions and Lee-Jeong quantumness.

Phase-space coordinates are the dimensionless quadratures x = (a + a^dag)/sqrt(2),
p = (a - a^dag)/(i sqrt(2)), so the vacuum is exp(-(x^2 + p^2)) / pi and
W integrates to one over dx dp.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .fock import build_ladder


class ContainmentError(ValueError):
    """The Wigner function is not negligible on the grid boundary."""


class NumericalInconsistencyError(ArithmeticError):
    pass


CONTAINMENT_TOL = 1e-8


@dataclass(frozen=True)
class PhaseSpaceGrid:
    x_min: float = -7.5
    x_max: float = 7.5
    p_min: float = -7.5
    p_max: float = 7.5
    n_x: int = 251
    n_p: int = 251

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.p_max > self.p_min):
            raise ValueError("grid bounds must satisfy max > min")
        for n in (self.n_x, self.n_p):
            if n < 3 or n % 2 == 0:
                raise ValueError(f"grid point counts must be odd and >= 3, got {n}")

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_x)

    @property
    def ps(self) -> np.ndarray:
        return np.linspace(self.p_min, self.p_max, self.n_p)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_x - 1)

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / (self.n_p - 1)


@dataclass
class WignerField:
    grid: PhaseSpaceGrid
    values: np.ndarray  # values[i, j] = W(xs[i], ps[j])

    def boundary_max(self) -> float:
        v = self.values
        return float(max(np.abs(v[0]).max(), np.abs(v[-1]).max(),
                         np.abs(v[:, 0]).max(), np.abs(v[:, -1]).max()))

    def integral(self) -> float:
        return _trapezoid2(self.values, self.grid.dx, self.grid.dp)

    def to_csv(self, path) -> None:
        xs, ps = self.grid.xs, self.grid.ps
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "p", "w"])
            for i, x in enumerate(xs):
                for j, p in enumerate(ps):
                    w.writerow([f"{x:.17g}", f"{p:.17g}", f"{self.values[i, j]:.17g}"])


def _trapezoid2(values, dx, dp):
    return float(np.trapezoid(np.trapezoid(values, dx=dp, axis=1), dx=dx))


def wigner(rho: np.ndarray, grid: PhaseSpaceGrid = PhaseSpaceGrid()) -> WignerField:
    """Wigner function from the Fock-basis Laguerre kernel.

    W = exp(-2|z|^2)/pi * sum_{m, k} c_k Re[rho[m, m+k] (-1)^m sqrt(m!/(m+k)!)
        (2z)^k L_m^k(4|z|^2)] with z = (x + ip)/sqrt(2), c_0 = 1, c_k = 2.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    d = rho.shape[0]
    X, P = np.meshgrid(grid.xs, grid.ps, indexing="ij")
    z2 = (X + 1j * P) * np.sqrt(2.0)
    r = np.abs(z2) ** 2  # 4|z|^2
    W = np.zeros(X.shape)
    for k in range(d):
        diag = np.diagonal(rho, offset=k)
        if not np.any(diag):
            continue
        acc = np.zeros(X.shape, dtype=np.complex128)
        l_prev, l_cur = None, np.ones_like(r)
        for m in range(d - k):
            # generalized Laguerre recurrence in the degree m
            if m == 1:
                l_prev, l_cur = l_cur, 1.0 + k - r
            elif m > 1:
                l_prev, l_cur = l_cur, ((2 * m - 1 + k - r) * l_cur - (m - 1 + k) * l_prev) / m
            c = diag[m]
            if c != 0:
                scale = (-1) ** m * np.exp(0.5 * (gammaln(m + 1) - gammaln(m + k + 1)))
                acc += (c * scale) * l_cur
        W += (1.0 if k == 0 else 2.0) * np.real(acc * z2 ** k)
    return WignerField(grid, W * np.exp(-0.5 * r) / np.pi)


def _check_containment(field, tol):
    b = field.boundary_max()
    if b >= tol:
        raise ContainmentError(f"|W| reaches {b:.3g} on the grid boundary (limit {tol:g}); "
                               "enlarge the grid")


def _central_diff(values, h, axis):
    # fourth-order central stencil; drops two points at each end of ``axis``
    v = np.moveaxis(values, axis, 0)
    g = (v[:-4] - 8.0 * v[1:-3] + 8.0 * v[3:-1] - v[4:]) / (12.0 * h)
    return np.moveaxis(g, 0, axis)


def lee_jeong_integral(field: WignerField, containment_tol: float = CONTAINMENT_TOL) -> float:
    """Lee-Jeong I from phase space: (pi/2) * integral of |grad W|^2 - 2 W^2.

    Derivatives by fourth-order central differences; the two outermost rows
    and columns are left out of the trapezoid quadrature.
    """
    _check_containment(field, containment_tol)
    W = field.values
    gx = _central_diff(W, field.grid.dx, 0)[:, 2:-2]
    gp = _central_diff(W, field.grid.dp, 1)[2:-2, :]
    integrand = gx ** 2 + gp ** 2 - 2.0 * W[2:-2, 2:-2] ** 2
    return 0.5 * np.pi * _trapezoid2(integrand, field.grid.dx, field.grid.dp)


def _lee_jeong_raw(rho):
    rho = np.asarray(rho, dtype=np.complex128)
    d = rho.shape[-1]
    lad = build_ladder(d)
    n = np.arange(d)
    # -tr(rho D(rho)) = tr(rho^2 N) - tr(rho a rho a^dag)
    rho2 = rho @ rho
    number_term = np.einsum("...ii,i->...", rho2, n)
    jump_term = np.einsum("...ij,...ji->...", rho @ lad.a, rho @ lad.a_dag)
    return number_term - jump_term


def lee_jeong_trace(rho: np.ndarray) -> float:
    """I(rho) = -tr(rho D_a(rho)); may be negative."""
    val = _lee_jeong_raw(rho)
    if abs(val.imag) > 1e-8:
        raise NumericalInconsistencyError(f"Lee-Jeong trace has imaginary part {val.imag:.3g}")
    return float(val.real)


def quantumness_Q(rho: np.ndarray) -> float:
    return max(lee_jeong_trace(rho), 0.0)


def wigner_negativity(field: WignerField, containment_tol: float = CONTAINMENT_TOL) -> float:
    """Volume of the negative part of W."""
    _check_containment(field, containment_tol)
    return _trapezoid2(np.maximum(-field.values, 0.0), field.grid.dx, field.grid.dp)


def lee_jeong_series(snapshots) -> np.ndarray:
    """I for each density matrix in a stack of shape (steps, d, d)."""
    snaps = np.asarray(snapshots, dtype=np.complex128)
    if snaps.ndim != 3:
        raise ValueError("expected a stack of density matrices")
    vals = _lee_jeong_raw(snaps)
    if snaps.shape[0] and np.max(np.abs(vals.imag)) > 1e-8:
        raise NumericalInconsistencyError("Lee-Jeong trace has a non-negligible imaginary part")
    return vals.real


def average_quantumness(snapshots) -> tuple[float, np.ndarray]:
    """Mean of Q over the snapshots, and the per-step Q curve."""
    if len(snapshots) == 0:
        raise ValueError("average_quantumness needs at least one snapshot")
    q = np.maximum(lee_jeong_series(snapshots), 0.0)
    return float(q.mean()), q


def write_quantumness_csv(path, snapshots, dt: float, normalize: bool = False, t0: float = 0.0) -> None:
    """``step,t,I,Q`` rows with t = t0 + step * dt; with ``normalize`` Q is divided by its maximum."""
    i_vals = lee_jeong_series(snapshots)
    q = np.maximum(i_vals, 0.0)
    if normalize and q.max() > 0:
        q = q / q.max()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "t", "I", "Q"])
        for k, (iv, qv) in enumerate(zip(i_vals, q)):
            w.writerow([k, f"{t0 + k * dt:.17g}", f"{iv:.17g}", f"{qv:.17g}"])
