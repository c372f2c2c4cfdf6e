"""Finite-mode spin-boson simulator used as an independent check of the dephasing factors.

Model: H = sum_k w_k b_k^+ b_k + sum_{j,k} sz_j (g_jk b_k^+ + g_jk^* b_k), one or two
qubits.  On joint sz eigenstates the bath sees a displaced oscillator per
mode with amplitude z_k = sum_j g_jk s_j, so every coherence factor is a
product over modes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_legendre

from .dephasing import DephasingFactors
from .lie import positive_root_pairs

FOCK_CAP = 400
LEAKAGE_TOL = 1e-6
METHODS = ("analytic-displacement", "truncated-fock")


class TruncationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModeConfig:
    """Modes as (omega_k, g_1k, g_2k); ``n_qubits=1`` ignores g_2k."""

    modes: list
    fock_cutoff: int = 20
    temperature: float = 0.0
    method: str = "analytic-displacement"
    n_qubits: int = 2

    def __post_init__(self):
        modes = [(float(w), complex(g1), complex(g2)) for w, g1, g2 in self.modes]
        if not modes:
            raise ValueError("at least one mode is required")
        if any(w <= 0 for w, _, _ in modes):
            raise ValueError("mode frequencies must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.method == "truncated-fock" and not 2 <= self.fock_cutoff <= FOCK_CAP:
            raise ValueError(f"fock_cutoff must lie in [2, {FOCK_CAP}] for the truncated-fock path")
        if self.n_qubits not in (1, 2):
            raise ValueError("n_qubits must be 1 or 2")
        object.__setattr__(self, "modes", modes)

    @property
    def omegas(self) -> np.ndarray:
        return np.array([m[0] for m in self.modes])

    @property
    def couplings(self) -> np.ndarray:
        """(n_qubits, n_modes) complex coupling matrix."""
        g = np.array([[m[1] for m in self.modes], [m[2] for m in self.modes]])
        return g[: self.n_qubits]


@dataclass(frozen=True)
class DiscretizedBath:
    omegas: np.ndarray
    weights: np.ndarray  # |g_k|^2 = weights_k, i.e. J(w) dw -> sum_k weights_k delta(w - w_k)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(self.weights <= 0) or np.any(self.omegas <= 0):
            raise ValueError("nodes and weights must be positive")

    def mode_config(self, phi_rel: float = 0.0, **kw) -> ModeConfig:
        g = np.sqrt(self.weights)
        modes = [(w, gk, gk * np.exp(1j * phi_rel)) for w, gk in zip(self.omegas, g)]
        return ModeConfig(modes=modes, **kw)

    def Phi(self, times, temperature: float = 0.0) -> np.ndarray:
        """Discrete decoherence function 4 sum_k |g_k|^2 coth (1 - cos w_k t) / w_k^2."""
        t = np.asarray(times, dtype=float)
        w = self.omegas
        c = _coth(w, temperature)
        return 4.0 * (1.0 - np.cos(np.outer(t, w))) @ (self.weights * c / w**2)


def discretize_bath(sd, n_modes: int) -> DiscretizedBath:
    """Gauss-Legendre nodes on [0, omega_max] with weights J(w_k) dw_k."""
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    if n_modes == 1:
        # single mode at the spectral centroid carrying the full weight
        from scipy.integrate import quad

        mass = quad(lambda w: float(sd(w)), 0, sd.omega_max, limit=500)[0]
        mean = quad(lambda w: w * float(sd(w)), 0, sd.omega_max, limit=500)[0] / mass
        return DiscretizedBath(np.array([mean]), np.array([mass]), {"nodes": "centroid", "n_modes": 1})
    x, wts = roots_legendre(n_modes)
    W = sd.omega_max
    w = 0.5 * W * (x + 1.0)
    weights = 0.5 * W * wts * sd(w)
    keep = weights > 0
    return DiscretizedBath(w[keep], weights[keep], {"nodes": "gauss-legendre", "n_modes": int(keep.sum()), "omega_max": W})


def _coth(w: np.ndarray, T: float) -> np.ndarray:
    if T == 0:
        return np.ones_like(w)
    return 1.0 / np.tanh(w / (2.0 * T))


def _spin_configs(n_qubits: int) -> np.ndarray:
    """sz eigenvalues per basis state, basis ordered |uu>, |ud>, |du>, |dd>."""
    if n_qubits == 1:
        return np.array([[1.0], [-1.0]])
    return np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])


def _analytic_factor(z_a, z_b, w, t, T) -> np.ndarray:
    """<U_b^+ U_a> per time, product over modes."""
    wt = np.outer(t, w)
    alpha = (1.0 - np.exp(1j * wt)) / w
    f = (wt - np.sin(wt)) / w**2
    phase = (np.abs(z_a) ** 2 - np.abs(z_b) ** 2) * f
    ba, bb = z_a * alpha, z_b * alpha
    disp = -0.5 * np.abs(ba - bb) ** 2 * _coth(w, T)
    cross = np.imag(np.conj(bb) * ba)
    return np.exp((1j * (phase + cross) + disp).sum(axis=1))


def _ladder(d: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, d)), 1)


def _fock_factor(z_a, z_b, w, t, T, cutoff) -> tuple[np.ndarray, float]:
    """Tr[exp(i H_b t) exp(-i H_a t) rho_B] per mode with H = w b^+b + z b^+ + z^* b."""
    b = _ladder(cutoff)
    num = np.arange(cutoff, dtype=float)
    out = np.ones(t.size, dtype=complex)
    leak = 0.0
    for k in range(w.size):
        if T > 0:
            pops = np.exp(-w[k] * num / T)
            # Boltzmann weight lost above the cutoff
            leak = max(leak, float(np.exp(-w[k] * cutoff / T) / pops.sum()))
            pops /= pops.sum()
        else:
            pops = np.zeros(cutoff)
            pops[0] = 1.0
        occ = pops > 1e-16
        evol = {}
        for z in {z_a[k], z_b[k]}:
            H = w[k] * np.diag(num) + z * b.conj().T + np.conj(z) * b
            E, V = np.linalg.eigh(H)
            # columns: U(t) |n> for the thermally occupied n
            U = np.einsum("ij,tj,jn->tin", V, np.exp(-1j * np.outer(t, E)), V.conj().T[:, occ])
            leak = max(leak, float(np.max(np.abs(U[:, -1, :]) ** 2 @ pops[occ])))
            evol[z] = U
        Ua, Ub = evol[z_a[k]], evol[z_b[k]]
        out *= np.einsum("tin,tin,n->t", Ub.conj(), Ua, pops[occ])
    return out, leak


def reduced_coherences(cfg: ModeConfig, grid) -> DephasingFactors:
    """Coherence factors of all positive roots after tracing out the modes."""
    t = np.asarray(grid, dtype=float).reshape(-1)
    n = 2 if cfg.n_qubits == 1 else 4
    spins = _spin_configs(cfg.n_qubits)
    Z = spins @ cfg.couplings  # (n, n_modes) displacement amplitude per basis state
    w = cfg.omegas
    factors = {}
    leak = 0.0
    for m, (a, b) in positive_root_pairs(n).items():
        if cfg.method == "analytic-displacement":
            factors[m] = _analytic_factor(Z[a], Z[b], w, t, cfg.temperature)
        else:
            factors[m], lk = _fock_factor(Z[a], Z[b], w, t, cfg.temperature, cfg.fock_cutoff)
            leak = max(leak, lk)
    if leak > LEAKAGE_TOL:
        raise TruncationError(
            f"Fock truncation leakage {leak:.2e} exceeds {LEAKAGE_TOL:.0e}; "
            f"increase fock_cutoff above {cfg.fock_cutoff} (try {2 * cfg.fock_cutoff})"
        )
    meta = {"model": "mode-oracle", "method": cfg.method, "n_modes": len(cfg.modes),
            "temperature": cfg.temperature}
    if cfg.method == "truncated-fock":
        meta["fock_leakage"] = leak
    return DephasingFactors(n, t, factors, meta)


PARTNER_STATES = {"+x": (0.5, 0.5), "up": (1.0, 0.0), "down": (0.0, 1.0)}


def reduced_single_qubit(cfg: ModeConfig, grid, partner_state: str = "+x") -> DephasingFactors:
    """Coherence factor of qubit 1 alone, averaging over the partner's sz populations."""
    if partner_state not in PARTNER_STATES:
        raise ValueError(f"unknown partner state {partner_state!r}; expected one of {sorted(PARTNER_STATES)}")
    if cfg.n_qubits == 1:
        return reduced_coherences(cfg, grid)
    pair = reduced_coherences(cfg, grid)
    p_up, p_down = PARTNER_STATES[partner_state]
    # rho1_{ud} = p_up rho_{uu,du} + p_down rho_{ud,dd}: roots 4 and 11
    phi = p_up * pair.factors[4] + p_down * pair.factors[11]
    meta = dict(pair.metadata, partner_state=partner_state)
    return DephasingFactors(2, pair.times, {1: phi}, meta)
