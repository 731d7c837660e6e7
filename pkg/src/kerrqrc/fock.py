"""Truncated single-mode Fock space: ladder operators and state constructors.

States are plain numpy arrays: kets are complex vectors of length ``d_t`` and
density matrices are complex ``d_t x d_t`` arrays.
"""

from __future__ import annotations

import csv
import hashlib
import json
import warnings
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

DEFAULT_DIM = 25
LEAKAGE_WARN = 1e-6


class InvalidDimensionError(ValueError):
    pass


class TruncationWarning(UserWarning):
    """A state has non-negligible weight near the truncation edge."""


class DegenerateStateWarning(UserWarning):
    pass


class Ladder(NamedTuple):
    a: np.ndarray
    a_dag: np.ndarray
    N: np.ndarray
    X: np.ndarray


def _check_dim(d_t):
    if int(d_t) != d_t or d_t < 2:
        raise InvalidDimensionError(f"truncation dimension must be an integer >= 2, got {d_t}")
    return int(d_t)


def build_ladder(d_t: int) -> Ladder:
    """Annihilation, creation, number and position (a + a^dag) operators."""
    d_t = _check_dim(d_t)
    a = np.diag(np.sqrt(np.arange(1, d_t, dtype=np.float64)), 1).astype(np.complex128)
    a_dag = a.conj().T.copy()
    # N built directly so its diagonal is exactly 0..d_t-1
    N = np.diag(np.arange(d_t, dtype=np.float64)).astype(np.complex128)
    return Ladder(a, a_dag, N, a + a_dag)


def fock_state(n: int, d_t: int = DEFAULT_DIM) -> np.ndarray:
    d_t = _check_dim(d_t)
    if not 0 <= n < d_t:
        raise InvalidDimensionError(f"level {n} outside truncated space of dimension {d_t}")
    psi = np.zeros(d_t, dtype=np.complex128)
    psi[n] = 1.0
    return psi


def _coherent_unnormalized(alpha, d_t):
    n = np.arange(d_t)
    alpha = complex(alpha)
    if alpha == 0:
        return fock_state(0, d_t)
    # |alpha>^n / sqrt(n!) e^{-|alpha|^2/2}, in logs to survive large n
    log_mag = n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1) - 0.5 * abs(alpha) ** 2
    return np.exp(log_mag) * np.exp(1j * np.angle(alpha) * n)


def coherent_weight(alpha: complex, d_t: int) -> float:
    """Squared norm of the coherent state captured by the first ``d_t`` levels."""
    return float(np.sum(np.abs(_coherent_unnormalized(alpha, _check_dim(d_t))) ** 2))


def coherent_state(alpha: complex, d_t: int = DEFAULT_DIM) -> np.ndarray:
    """Coherent state |alpha>, renormalized after truncation.

    Warns with :class:`TruncationWarning` when ``|alpha|^2 > d_t / 2``.
    """
    d_t = _check_dim(d_t)
    if abs(alpha) ** 2 > d_t / 2:
        warnings.warn(f"|alpha|^2 = {abs(alpha) ** 2:.3g} is poorly contained in d_t = {d_t}",
                      TruncationWarning, stacklevel=2)
    psi = _coherent_unnormalized(alpha, d_t)
    return psi / np.linalg.norm(psi)


def cat_state(alpha: complex, d_t: int = DEFAULT_DIM) -> np.ndarray:
    """Even cat state, normalized (|alpha> + |-alpha>)."""
    d_t = _check_dim(d_t)
    if alpha == 0:
        warnings.warn("cat state with alpha = 0 is the vacuum", DegenerateStateWarning, stacklevel=2)
        return fock_state(0, d_t)
    # |alpha> + |-alpha> doubles the even amplitudes and cancels the odd ones exactly
    psi = _coherent_unnormalized(alpha, d_t)
    psi[1::2] = 0.0
    return psi / np.linalg.norm(psi)


def mixed_cat(alpha: complex, d_t: int = DEFAULT_DIM) -> np.ndarray:
    """Classical counterpart of the cat: equal mixture of |alpha> and |-alpha>."""
    d_t = _check_dim(d_t)
    if alpha == 0:
        warnings.warn("mixed cat with alpha = 0 is the vacuum", DegenerateStateWarning, stacklevel=2)
    plus = coherent_state(alpha, d_t)
    minus = coherent_state(-alpha, d_t)
    rho = 0.5 * (np.outer(plus, plus.conj()) + np.outer(minus, minus.conj()))
    return rho / np.trace(rho).real


def haar_random_state(d: int, d_t: int = DEFAULT_DIM, rng_seed: int | None = None,
                      zeta: np.ndarray | None = None) -> np.ndarray:
    """Haar-random pure state supported on the first ``d`` Fock levels.

    Amplitude n is ``zeta[2n] + 1j * zeta[2n + 1]`` over the norm of all 2d
    standard normals. The normals come from ``numpy.random.default_rng(seed)``
    (PCG64, ziggurat sampler), so a seed regenerates the state bit-exactly.
    ``zeta`` can be supplied directly instead of a seed.
    """
    d_t = _check_dim(d_t)
    if d < 1 or d > d_t:
        raise InvalidDimensionError(f"support dimension {d} must lie in 1..{d_t}")
    if zeta is None:
        zeta = np.random.default_rng(rng_seed).standard_normal(2 * d)
    zeta = np.asarray(zeta, dtype=np.float64)
    if zeta.shape != (2 * d,):
        raise ValueError(f"expected {2 * d} gaussian variates, got shape {zeta.shape}")
    psi = np.zeros(d_t, dtype=np.complex128)
    psi[:d] = zeta[0::2] + 1j * zeta[1::2]
    return psi / np.sqrt(np.sum(zeta ** 2))


def density_matrix(state: np.ndarray) -> np.ndarray:
    """|psi><psi| for a ket; density matrices pass through as a complex copy."""
    state = np.asarray(state, dtype=np.complex128)
    if state.ndim == 1:
        return np.outer(state, state.conj())
    return state.copy()


def validate_density_matrix(rho: np.ndarray, tol: float = 1e-10, eig_tol: float = 1e-9) -> np.ndarray:
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidDimensionError(f"density matrix must be square, got shape {rho.shape}")
    _check_dim(rho.shape[0])
    if not np.all(np.isfinite(rho)):
        raise ValueError("density matrix has non-finite entries")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise ValueError(f"density matrix trace {np.trace(rho).real!r} differs from 1")
    if np.linalg.eigvalsh(rho).min() < -eig_tol:
        raise ValueError("density matrix has negative eigenvalues")
    return rho


def top_population(rho: np.ndarray, levels: int = 3) -> float:
    """Population on the highest ``levels`` Fock states (truncation leakage)."""
    rho = np.asarray(rho)
    diag = rho.diagonal() if rho.ndim == 2 else np.abs(rho) ** 2
    return float(np.real(diag[-levels:]).sum())


def state_hash(*states: np.ndarray) -> str:
    h = hashlib.sha256()
    for s in states:
        h.update(np.ascontiguousarray(s, dtype=np.complex128).tobytes())
    return h.hexdigest()[:16]


def state_to_csv(psi: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "re", "im"])
        for n, c in enumerate(np.asarray(psi, dtype=np.complex128)):
            w.writerow([n, repr(float(c.real)), repr(float(c.imag))])


def state_from_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    psi = np.zeros(len(rows), dtype=np.complex128)
    for row in rows:
        psi[int(row["n"])] = float(row["re"]) + 1j * float(row["im"])
    return psi


def state_to_json(psi: np.ndarray) -> str:
    psi = np.asarray(psi, dtype=np.complex128)
    data = np.empty(2 * psi.size)
    data[0::2] = psi.real
    data[1::2] = psi.imag
    return json.dumps({"dim": int(psi.size), "data": data.tolist()})


def state_from_json(text: str) -> np.ndarray:
    rec = json.loads(text)
    data = np.asarray(rec["data"], dtype=np.float64)
    if data.size != 2 * rec["dim"]:
        raise ValueError("interleaved re/im array does not match dim")
    return data[0::2] + 1j * data[1::2]
