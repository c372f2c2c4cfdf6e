"""Dephasing phase and decoherence function of spin-boson baths.

Units are natural (hbar = k_B = 1): temperatures are energies, times are in
units of 1 / frequency.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, quad_vec

from .dephasing import DephasingFactors


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectralDensity:
    """Bath spectral density J(omega).

    ``kind="ohmic"`` is ``omega**s * wc**(1-s) * exp(-omega/wc)`` with
    ``s = power`` (1 by default); ``kind="tabulated"`` interpolates ``table``
    linearly and vanishes outside it.
    """

    kind: str = "ohmic"
    wc: float = 1.0
    power: float = 1.0
    table: np.ndarray | None = None
    cutoff_multiple: float = 50.0

    def __post_init__(self):
        if self.kind == "ohmic":
            if self.wc <= 0:
                raise ValueError("cutoff frequency must be positive")
            if self.power <= 0:
                raise ValueError("Ohmic power must be positive")
        elif self.kind == "tabulated":
            if self.table is None:
                raise ValueError("tabulated spectral density needs a table")
            tab = np.asarray(self.table, dtype=float)
            if tab.ndim != 2 or tab.shape[1] != 2 or tab.shape[0] < 2:
                raise ValueError("table must have two columns (omega, J) and at least two rows")
            if np.any(np.diff(tab[:, 0]) <= 0):
                raise ValueError("table frequencies must be strictly increasing")
            if tab[0, 0] < 0 or np.any(tab[:, 1] < 0):
                raise ValueError("table must have omega >= 0 and J >= 0")
            object.__setattr__(self, "table", tab)
        else:
            raise ValueError(f"unknown spectral density kind {self.kind!r}")

    @property
    def omega_max(self) -> float:
        if self.kind == "ohmic":
            return self.cutoff_multiple * self.wc
        return float(self.table[-1, 0])

    def __call__(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        return w * self.over_omega(w)

    def over_omega(self, w) -> np.ndarray:
        """J(omega) / omega, finite at omega = 0 for the Ohmic family with power >= 1."""
        w = np.asarray(w, dtype=float)
        if self.kind == "ohmic":
            s = self.power
            with np.errstate(divide="ignore", invalid="ignore"):
                base = (w / self.wc) ** (s - 1.0) if s != 1.0 else np.ones_like(w)
            return np.where(w > 0, base * np.exp(-w / self.wc), 1.0 if s == 1.0 else 0.0)
        tab = self.table
        J = np.interp(w, tab[:, 0], tab[:, 1], left=0.0, right=0.0)
        slope0 = (tab[1, 1] - tab[0, 1]) / (tab[1, 0] - tab[0, 0]) if tab[0, 0] == 0 else 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(w > 0, J / np.where(w > 0, w, 1.0), slope0)


@dataclass(frozen=True)
class BathParams:
    temperature: float = 0.0
    coupling_prefactor: float = 1.0

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class ModelFactors:
    times: np.ndarray
    theta: np.ndarray
    Phi: np.ndarray
    metadata: dict = field(default_factory=dict)


def load_spectral_table(path) -> SpectralDensity:
    tab = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    return SpectralDensity(kind="tabulated", table=tab)


def _kernels(w: float, t: np.ndarray, T: float) -> tuple[np.ndarray, np.ndarray]:
    """(wt - sin wt)/w and coth * (1 - cos wt)/w, both finite as w -> 0."""
    x = w * t
    small = np.abs(x) < 1e-3
    x2 = x * x
    series = x * x2 / 6.0 * (1.0 - x2 / 20.0 + x2 * x2 / 840.0)
    g1 = np.where(small, series, x - np.sin(x))
    g2 = 2.0 * np.sin(0.5 * x) ** 2
    if w > 0:
        g1 = g1 / w
        g2 = g2 / w
        if T > 0:
            g2 = g2 / np.tanh(w / (2.0 * T)) if w / (2.0 * T) > 1e-8 else g2 * 2.0 * T / w
    else:
        g1 = np.zeros_like(t)
        g2 = 2.0 * T * t * t if T > 0 else np.zeros_like(t)
    return g1, g2


def _theta_phi_values(sd: SpectralDensity, bath: BathParams, t: np.ndarray, epsabs=1e-11, epsrel=1e-12):
    t = np.asarray(t, dtype=float)
    T = bath.temperature
    pref = 4.0 * bath.coupling_prefactor

    def integrand(w):
        g1, g2 = _kernels(w, t, T)
        jw = float(sd.over_omega(w))
        return np.concatenate([jw * g1, jw * g2])

    wmax = sd.omega_max
    points = None
    if sd.kind == "tabulated":
        points = sd.table[1:-1, 0]
    res, err, info = quad_vec(
        integrand, 0.0, wmax, epsabs=epsabs, epsrel=epsrel, norm="max", limit=20000,
        points=points, full_output=True,
    )
    theta, Phi = pref * res[: t.size], pref * res[t.size :]
    tail = _tail_bound(sd, T, t) * pref
    return theta, Phi, pref * err, info, tail


def _tail_bound(sd: SpectralDensity, T: float, t: np.ndarray) -> np.ndarray:
    if sd.kind == "tabulated":
        return np.zeros_like(t)
    wmax = sd.omega_max
    mass, _ = quad(lambda w: float(sd.over_omega(w)), wmax, np.inf)
    coth = 1.0 if T == 0 else 1.0 / np.tanh(wmax / (2 * T))
    return mass * (np.abs(t) + 1.0 / wmax) + mass * 2.0 * coth / wmax


def compute_theta_phi(
    sd: SpectralDensity, bath: BathParams, grid, tol: float = 1e-9
) -> ModelFactors:
    """theta(t) and Phi(t) by adaptive Gauss-Kronrod quadrature over [0, omega_max]."""
    t = np.asarray(grid, dtype=float).reshape(-1)
    if t[0] != 0.0:
        raise ValueError("time grid must start at 0")
    theta, Phi, err, info, tail = _theta_phi_values(sd, bath, t)
    if info.status != 0 or err > tol:
        # locate the worst time point with independent scalar quadratures
        worst, worst_err = 0, -1.0
        for i, ti in enumerate(t):
            e = max(
                quad(lambda w: float(sd.over_omega(w)) * _kernels(w, np.array([ti]), bath.temperature)[k][0],
                     0, sd.omega_max, limit=2000)[1]
                for k in (0, 1)
            )
            if e > worst_err:
                worst, worst_err = i, e
        raise QuadratureError(
            f"quadrature did not converge (error estimate {err:.2e}); worst at t={t[worst]:.6g}"
        )
    if np.max(tail) > tol:
        i = int(np.argmax(tail))
        raise QuadratureError(f"spectral tail beyond omega_max contributes {tail[i]:.2e} at t={t[i]:.6g}")
    theta[0] = 0.0
    Phi[0] = 0.0
    meta = {
        "spectral_density": sd.kind,
        "wc": sd.wc if sd.kind == "ohmic" else None,
        "power": sd.power if sd.kind == "ohmic" else None,
        "temperature": bath.temperature,
        "coupling_prefactor": bath.coupling_prefactor,
        "omega_max": sd.omega_max,
        "quadrature_error": float(err),
        "tail_bound": float(np.max(tail)),
    }
    return ModelFactors(t, theta, Phi, meta)


def ohmic_closed_form(grid, wc: float = 1.0) -> ModelFactors:
    """Zero-temperature Ohmic theta and Phi in closed form."""
    t = np.asarray(grid, dtype=float).reshape(-1)
    theta = 4.0 * wc * t - 4.0 * np.arctan(wc * t)
    Phi = 2.0 * np.log1p((wc * t) ** 2)
    meta = {"spectral_density": "ohmic", "wc": wc, "power": 1.0, "temperature": 0.0,
            "coupling_prefactor": 1.0, "closed_form": True}
    return ModelFactors(t, theta, Phi, meta)


def single_qubit_factor(model: ModelFactors) -> DephasingFactors:
    """phi(t) = exp(-i theta(t) - Phi(t))."""
    return DephasingFactors(2, model.times, {1: np.exp(-1j * model.theta - model.Phi)}, dict(model.metadata))


def qubit_pair_factors(sd: SpectralDensity, bath: BathParams, grid, model: ModelFactors | None = None) -> DephasingFactors:
    """Two qubits with equal couplings to a common bath (su(4) root numbering)."""
    if model is None:
        model = compute_theta_phi(sd, bath, grid)
    th, Ph = model.theta, model.Phi
    plus = np.exp(1j * th - Ph)
    minus = np.exp(-1j * th - Ph)
    factors = {
        1: plus,
        4: plus,
        6: np.ones_like(plus),
        9: np.exp(-4.0 * Ph),
        11: minus,
        13: minus,
    }
    meta = dict(model.metadata, model="qubit-pair-common-bath")
    return DephasingFactors(4, model.times, factors, meta)


def relative_phase_factor(phi_rel: float, cfg, grid, partner_state: str = "+x") -> DephasingFactors:
    """Reduced single-qubit factor with couplings g_2k = g_1k exp(i phi_rel).

    ``cfg`` is a :class:`cher.oracle.ModeConfig` whose ``g_1k`` are used for
    both qubits (the second with the relative phase applied).
    """
    from .oracle import ModeConfig, reduced_single_qubit

    modes = [(w, g1, g1 * np.exp(1j * phi_rel)) for w, g1, _ in cfg.modes]
    shifted = ModeConfig(modes=modes, fock_cutoff=cfg.fock_cutoff, temperature=cfg.temperature, method=cfg.method)
    f = reduced_single_qubit(shifted, grid, partner_state=partner_state)
    return DephasingFactors(2, f.times, f.factors, dict(f.metadata, phi_rel=float(phi_rel)))
