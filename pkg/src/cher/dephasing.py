"""Pure-dephasing maps as time series: dephasing factors, generator-basis maps and chi matrices."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .lie import build_generators, generator_coordinates, root_system, simultaneous_diagonalizer

PURE_DEPHASING_TOL = 1e-8


class NotPureDephasingError(ValueError):
    def __init__(self, residual: float, time_index: int, threshold: float):
        self.residual = residual
        self.time_index = time_index
        self.threshold = threshold
        super().__init__(
            f"not pure dephasing: relative off-diagonal ladder-basis mass {residual:.3e} "
            f"at time index {time_index} exceeds {threshold:.1e}"
        )


def _check_grid(times) -> np.ndarray:
    t = np.asarray(times, dtype=float).reshape(-1)
    if t.size == 0:
        raise ValueError("empty time grid")
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be strictly increasing")
    return t


@dataclass(frozen=True)
class DephasingFactors:
    """Complex factors phi_m(t) on the positive roots of su(n).

    Negative-root factors are never stored; ``factor(m)`` returns the
    conjugate for a negative root index.
    """

    n: int
    times: np.ndarray
    factors: dict
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        t = _check_grid(self.times)
        if t[0] != 0.0:
            raise ValueError(f"time grid must start at 0, got {t[0]}")
        rs = root_system(self.n)
        clean = {}
        for m, arr in self.factors.items():
            m = int(m)
            if m not in rs.positive_indices:
                raise ValueError(f"{m} is not a positive-root index of su({self.n})")
            arr = np.array(arr, dtype=complex).reshape(-1)
            if arr.shape != t.shape:
                raise ValueError(f"factor {m} has {arr.size} samples, grid has {t.size}")
            if abs(arr[0] - 1.0) > 1e-8:
                raise ValueError(f"factor {m} must equal 1 at t=0, got {arr[0]}")
            arr[0] = 1.0
            worst = np.max(np.abs(arr))
            if worst > 1.0 + 1e-9:
                raise ValueError(f"factor {m} exceeds unit modulus: max |phi| = {worst}")
            arr.setflags(write=False)
            clean[m] = arr
        t = t.copy()
        t.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "factors", dict(sorted(clean.items())))

    def factor(self, m: int) -> np.ndarray:
        if m in self.factors:
            return self.factors[m]
        rs = root_system(self.n)
        p = m - 1
        if p in rs.positive_indices and p in self.factors:
            return np.conj(self.factors[p])
        raise KeyError(f"no factor for root index {m}")

    def __mul__(self, other: "DephasingFactors") -> "DephasingFactors":
        return compose(self, other)


@dataclass(frozen=True)
class DynamicalMapSeries:
    """Generator-basis maps acting on state vectors rho = {1/n, rho_vec}."""

    n: int
    times: np.ndarray
    maps: np.ndarray  # (T, n**2, n**2)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        t = _check_grid(self.times)
        N = self.n * self.n
        if self.maps.shape != (t.size, N, N):
            raise ValueError(f"maps must have shape {(t.size, N, N)}, got {self.maps.shape}")


@dataclass(frozen=True)
class ChiSeries:
    n: int
    times: np.ndarray
    chi: np.ndarray  # (T, n**2, n**2), generator order, identity at 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        t = _check_grid(self.times)
        N = self.n * self.n
        chi = np.asarray(self.chi)
        if chi.shape != (t.size, N, N):
            raise ValueError(f"chi must have shape {(t.size, N, N)}, got {chi.shape}")
        herm = np.max(np.abs(chi - np.conj(np.swapaxes(chi, 1, 2))), initial=0.0)
        if herm > 1e-9:
            raise ValueError(f"chi is not Hermitian (max deviation {herm:.2e})")


def compose(f: DephasingFactors, g: DephasingFactors) -> DephasingFactors:
    """Pointwise product of two factor series (the map composition)."""
    if f.n != g.n:
        raise ValueError("factor series have different dimensions")
    if f.times.shape != g.times.shape or np.any(f.times != g.times):
        raise ValueError("factor series live on different time grids; resample explicitly")
    keys = set(f.factors) | set(g.factors)
    one = np.ones_like(f.times, dtype=complex)
    return DephasingFactors(
        f.n, f.times, {m: f.factors.get(m, one) * g.factors.get(m, one) for m in keys}
    )


def resample(f: DephasingFactors, times) -> DephasingFactors:
    """Linear interpolation of every factor onto a new grid (no extrapolation)."""
    t = _check_grid(times)
    if t[0] < f.times[0] or t[-1] > f.times[-1]:
        raise ValueError("resampling grid extends beyond the source grid")
    out = {
        m: np.interp(t, f.times, v.real) + 1j * np.interp(t, f.times, v.imag)
        for m, v in f.factors.items()
    }
    return DephasingFactors(f.n, t, out, dict(f.metadata, resampled=True))


def identity_factors(n: int, times) -> DephasingFactors:
    t = _check_grid(times)
    return DephasingFactors(n, t, {m: np.ones(t.size, complex) for m in root_system(n).positive_indices})


def ladder_diagonal(f: DephasingFactors) -> np.ndarray:
    """Diagonal of the ladder-basis map at every time, shape (T, n**2)."""
    rs = root_system(f.n)
    missing = [m for m in rs.positive_indices if m not in f.factors]
    if missing:
        raise KeyError(f"missing dephasing factor for root index {missing[0]}")
    D = np.ones((f.times.size, f.n * f.n), dtype=complex)
    for m in rs.positive_indices:
        D[:, m] = f.factors[m]
        D[:, m + 1] = np.conj(f.factors[m])
    return D


def map_from_factors(f: DephasingFactors) -> DynamicalMapSeries:
    D = ladder_diagonal(f)
    X, Xinv = simultaneous_diagonalizer(f.n)
    maps = np.einsum("ij,tj,jk->tik", Xinv, D, X)
    imag = np.max(np.abs(maps.imag), initial=0.0)
    if imag > 1e-10:
        raise ValueError(f"map is not real (imaginary residue {imag:.2e})")
    return DynamicalMapSeries(f.n, f.times, np.ascontiguousarray(maps.real), dict(f.metadata))


def factors_from_map(m: DynamicalMapSeries, threshold: float = PURE_DEPHASING_TOL) -> DephasingFactors:
    X, Xinv = simultaneous_diagonalizer(m.n)
    D = np.einsum("ij,tjk,kl->til", X, m.maps, Xinv)
    diag = np.diagonal(D, axis1=1, axis2=2)
    off = D - np.einsum("ti,ij->tij", diag, np.eye(D.shape[1]))
    rel = np.linalg.norm(off, axis=(1, 2)) / np.maximum(np.linalg.norm(D, axis=(1, 2)), 1e-300)
    worst = int(np.argmax(rel))
    if rel[worst] > threshold:
        raise NotPureDephasingError(float(rel[worst]), worst, threshold)
    rs = root_system(m.n)
    fixed = [0, *build_generators(m.n).csa_indices]
    dev = np.abs(diag[:, fixed] - 1.0)
    if dev.max() > max(threshold, 1e-10) * 10:
        t_idx = int(np.unravel_index(np.argmax(dev), dev.shape)[0])
        raise NotPureDephasingError(float(dev.max()), t_idx, threshold)
    pair_dev = max(
        float(np.max(np.abs(diag[:, k + 1] - np.conj(diag[:, k])))) for k in rs.positive_indices
    )
    if pair_dev > max(threshold, 1e-10) * 10:
        raise ValueError(f"opposite-root entries are not conjugate (deviation {pair_dev:.2e})")
    return DephasingFactors(
        m.n, m.times, {k: diag[:, k] for k in rs.positive_indices},
        dict(m.metadata, offdiag_residual=float(rel[worst])),
    )


def state_vector(rho: np.ndarray, n: int) -> np.ndarray:
    return generator_coordinates(rho, build_generators(n))


def validate_state(rho: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > tol:
        raise ValueError(f"density matrix does not have unit trace (trace {np.trace(rho).real:.6g})")
    if np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() < -tol:
        raise ValueError("density matrix is not positive semidefinite")
    return rho


def apply_map(m: DynamicalMapSeries, rho0: np.ndarray) -> np.ndarray:
    """Evolve ``rho0`` through every map of the series; returns (T, n, n)."""
    rho0 = validate_state(rho0)
    if rho0.shape != (m.n, m.n):
        raise ValueError(f"state must be {m.n}x{m.n}")
    gens = build_generators(m.n)
    v = generator_coordinates(rho0, gens)
    vt = np.einsum("tij,j->ti", m.maps, v)
    return np.einsum("ti,iab->tab", vt, gens.generators)


@lru_cache(maxsize=None)
def _trace_tensors(n: int):
    L = build_generators(n).generators
    T4 = np.einsum("jab,lbc,kcd,mda->jlkm", L, L, L, L)
    w = np.full(n * n, 0.5)
    w[0] = 1.0 / n
    # vec(E)[(j,k)] = w_j sum_lm chi_lm T4[j,l,k,m]
    lin = (w[:, None, None, None] * T4).transpose(0, 2, 1, 3).reshape(n**4, n**4)
    lin_inv = np.linalg.inv(lin)
    for a in (T4, lin, lin_inv):
        a.setflags(write=False)
    return T4, lin, lin_inv


def reconstruct_from_chi(c: ChiSeries, gens=None) -> DynamicalMapSeries:
    """Generator-basis map from a chi-matrix series via the trace formulas."""
    n = c.n
    gens = gens if gens is not None else build_generators(n)
    if gens.n != n:
        raise ValueError(f"chi series is for n={n} but generator set is for n={gens.n}")
    chi = np.asarray(c.chi, dtype=complex)
    L = gens.generators
    T4, _, _ = _trace_tensors(n)
    T3 = np.einsum("jab,lbc,mca->jlm", L, L, L)
    E = np.empty_like(chi)
    E[:, 1:, 1:] = 0.5 * np.einsum("tlm,jlkm->tjk", chi, T4[1:, :, 1:, :])
    E[:, 1:, 0] = 0.5 * np.einsum("tlm,jlm->tj", chi, T3[1:])
    E[:, 0, 1:] = np.einsum("tlm,lkm->tk", chi, T3[:, 1:, :]) / n
    E[:, 0, 0] = chi[:, 0, 0] + (2.0 / n) * np.einsum("tll->t", chi[:, 1:, 1:])
    imag = np.max(np.abs(E.imag), initial=0.0)
    meta = dict(c.metadata, chi_imag_residue=float(imag))
    maps = E.real if imag < 1e-9 else E
    return DynamicalMapSeries(n, c.times, np.ascontiguousarray(maps), meta)


def chi_from_map(m: DynamicalMapSeries, gens=None) -> ChiSeries:
    n = m.n
    if gens is not None and gens.n != n:
        raise ValueError("generator set dimension mismatch")
    if np.max(np.abs(m.maps[:, 0, 0] - 1.0)) > 1e-9 or np.max(np.abs(m.maps[:, 0, 1:])) > 1e-9:
        raise ValueError("map is not trace preserving")
    _, _, lin_inv = _trace_tensors(n)
    vecE = m.maps.reshape(m.times.size, -1).astype(complex)
    chi = (vecE @ lin_inv.T).reshape(m.times.size, n * n, n * n)
    chi = 0.5 * (chi + np.conj(np.swapaxes(chi, 1, 2)))
    return ChiSeries(n, m.times, chi, dict(m.metadata))


def choi_matrices(m: DynamicalMapSeries) -> np.ndarray:
    """Choi matrices sum_ab E(|a><b|) (x) |a><b|, shape (T, n**2, n**2)."""
    n = m.n
    gens = build_generators(n)
    units = np.zeros((n * n, n, n), dtype=complex)
    for a in range(n):
        for b in range(n):
            units[a * n + b, a, b] = 1.0
    coords = generator_coordinates(units, gens)  # (n*n, N)
    images = np.einsum("tij,aj,ipq->tapq", m.maps, coords, gens.generators)
    choi = np.zeros((m.times.size, n * n, n * n), dtype=complex)
    for a in range(n):
        for b in range(n):
            # block (p, a), (q, b): E(|a><b|)_{pq}
            choi[:, a::n, b::n] = images[:, a * n + b]
    return choi


def cp_violation(m: DynamicalMapSeries) -> float:
    """Smallest Choi eigenvalue over the series (negative means not CP)."""
    ch = choi_matrices(m)
    ch = 0.5 * (ch + np.conj(np.swapaxes(ch, 1, 2)))
    return float(np.linalg.eigvalsh(ch).min())
