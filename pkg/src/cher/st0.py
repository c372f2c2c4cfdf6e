"""Free-induction-decay tomography of a singlet-triplet (S-T0) qubit.

Units: energies in ueV, times in ns, fields in T, angular frequencies in rad/ns.

The Bloch axes follow the usual S-T0 convention
|Z> = |S>, |X> = (|S> + |T0>)/sqrt2, |Y> = (|S> - i|T0>)/sqrt2, and r_j = 2 P_j - 1.
Note that |Y> is the -1 eigenstate of the standard sigma_y in the (S, T0) basis,
so this frame is mirrored relative to the textbook Bloch sphere; the simulation
measures these projectors directly, and the recovery formulas are written in
the same frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import savgol_filter
from scipy.special import roots_hermitenorm

from .measure import nonclassicality_negativity
from .retrieval import InversionError, QuasiDistribution, invert_1d

HBAR = 0.6582119569  # ueV ns
ENVELOPES = ("gaussian", "quasi-static")

_S = np.array([1.0, 0.0], dtype=complex)
_T0 = np.array([0.0, 1.0], dtype=complex)
AXIS_STATES = {
    "X": (_S + _T0) / np.sqrt(2.0),
    "Y": (_S - 1j * _T0) / np.sqrt(2.0),
    "Z": _S,
}
INITIAL_STATES = {"-Y": (0.0, -1.0, 0.0), "+X": (1.0, 0.0, 0.0), "-X": (-1.0, 0.0, 0.0), "+Y": (0.0, 1.0, 0.0)}


@dataclass(frozen=True)
class ST0Params:
    J: float = 0.37
    delta_B: float = 10.5e-3
    g_factor: float = -0.44
    mu_B: float = 57.8
    T2star: float = 30.0
    hbar: float = HBAR
    envelope: str = "gaussian"
    initial_state: str = "-Y"

    def __post_init__(self):
        if not self.T2star > 0:
            raise ValueError("T2star must be positive")
        if self.envelope not in ENVELOPES:
            raise ValueError(f"unknown envelope {self.envelope!r}; expected one of {ENVELOPES}")
        if self.initial_state not in INITIAL_STATES:
            raise ValueError(f"unknown initial state {self.initial_state!r}")

    @property
    def zeeman(self) -> float:
        """g mu_B Delta B in ueV."""
        return self.g_factor * self.mu_B * self.delta_B

    @property
    def omega(self) -> float:
        return float(np.hypot(self.J, 2.0 * self.zeeman) / self.hbar)

    @property
    def Omega(self) -> float:
        """Angle between the |S> axis and the lower-energy eigenvector."""
        return float(np.arctan2(-2.0 * self.zeeman, self.J))

    def hamiltonian(self, zeeman: float | None = None) -> np.ndarray:
        z = self.zeeman if zeeman is None else zeeman
        return np.array([[-self.J, z], [z, 0.0]], dtype=complex)


@dataclass(frozen=True)
class ReturnProbabilities:
    tau: np.ndarray
    P: np.ndarray  # (len(tau), 3) for X, Y, Z


@dataclass(frozen=True)
class Trajectory:
    tau: np.ndarray
    r: np.ndarray  # (len(tau), 3)

    def __post_init__(self):
        if np.max(np.linalg.norm(self.r, axis=1)) > 1.0 + 1e-9:
            raise ValueError("Bloch vector longer than 1")

    @classmethod
    def from_probabilities(cls, probs: ReturnProbabilities, clamp: bool = False) -> "Trajectory":
        r = 2.0 * probs.P - 1.0
        if clamp:
            norm = np.linalg.norm(r, axis=1, keepdims=True)
            r = r / np.maximum(norm, 1.0)
        return cls(probs.tau, r)


@dataclass(frozen=True)
class AxisFit:
    Omega: float
    omega: float
    normal: np.ndarray
    offset: float
    planarity: float  # smallest / middle singular value of the centered cloud


@dataclass(frozen=True)
class NoiseConfig:
    sigma: float = 0.05
    repeats: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")


@dataclass(frozen=True)
class NoiseStudy:
    mean: float
    std: float
    values: np.ndarray
    failures: int
    settings: dict = field(default_factory=dict)


def default_tau_grid(params: ST0Params, step: float = 0.2, span: float = 4.0) -> np.ndarray:
    """Uniform grid on [0, span * T2star]."""
    n = int(round(span * params.T2star / step)) + 1
    return step * np.arange(n)


def _projector(v: np.ndarray) -> np.ndarray:
    return np.outer(v, v.conj())


def _rho_from_bloch(r) -> np.ndarray:
    rho = 0.5 * np.eye(2, dtype=complex)
    for j, rj in zip("XYZ", r):
        rho = rho + 0.5 * rj * (2.0 * _projector(AXIS_STATES[j]) - np.eye(2))
    return rho


def _evolve(H: np.ndarray, rho0: np.ndarray, tau: np.ndarray, decay: np.ndarray, hbar: float) -> np.ndarray:
    """rho(tau) with eigenbasis coherences multiplied by ``decay``; shape (T, 2, 2)."""
    E, V = np.linalg.eigh(H)
    r = V.conj().T @ rho0 @ V
    ph = np.exp(-1j * np.subtract.outer(E, E)[None] * tau[:, None, None] / hbar)
    ph[:, 0, 1] *= decay
    ph[:, 1, 0] *= decay
    return np.einsum("ab,tbc,cd->tad", V, r[None] * ph, V.conj().T)


def simulate_return_probs(params: ST0Params, tau) -> ReturnProbabilities:
    """Return probabilities onto |X>, |Y>, |Z> after free induction decay.

    ``envelope="gaussian"`` multiplies the coherence in the Hamiltonian
    eigenbasis by exp(-(tau/T2star)^2).  ``envelope="quasi-static"`` instead
    averages unitary evolutions over a Gaussian spread of the field gradient
    whose width gives the same 1/e time for the bare frequency; the axis then
    wobbles together with the frequency.
    """
    t = np.asarray(tau, dtype=float)
    rho0 = _rho_from_bloch(INITIAL_STATES[params.initial_state])
    if params.envelope == "gaussian":
        rho = _evolve(params.hamiltonian(), rho0, t, np.exp(-((t / params.T2star) ** 2)), params.hbar)
    else:
        z0 = params.zeeman
        # sigma_omega = sqrt2 / T2star, mapped through d(hbar omega)/d(zeeman) = 4 z / (hbar omega)
        hw = params.hbar * params.omega
        sigma_z = params.hbar * np.sqrt(2.0) / params.T2star * hw / (4.0 * abs(z0))
        x, w = roots_hermitenorm(80)
        w = w / w.sum()
        rho = np.zeros((t.size, 2, 2), dtype=complex)
        for xi, wi in zip(x, w):
            rho += wi * _evolve(params.hamiltonian(z0 + sigma_z * xi), rho0, t, np.ones_like(t), params.hbar)
    P = np.stack([np.real(np.einsum("a,tab,b->t", v.conj(), rho, v)) for v in AXIS_STATES.values()], axis=1)
    return ReturnProbabilities(t, np.clip(P, 0.0, 1.0))


def identify_axis(traj: Trajectory, planarity_tol: float = 1e-6) -> AxisFit:
    """Least-squares plane through the trajectory; Omega from its normal, omega from the phase slope.

    The normal is oriented along the angular momentum r x dr/dtau, so the
    motion is counterclockwise about it and omega comes out positive.
    """
    r = np.asarray(traj.r)
    c = r.mean(axis=0)
    _, s, Vt = np.linalg.svd(r - c, full_matrices=False)
    if s[0] <= 0 or s[1] < planarity_tol * s[0]:
        raise ValueError("degenerate trajectory: points are (nearly) collinear")
    n = Vt[2]
    L = np.cross(r[:-1], np.diff(r, axis=0)).sum(axis=0)
    if np.dot(L, n) < 0:
        n = -n
    offset = float(np.dot(c, n))
    e1 = Vt[0] - np.dot(Vt[0], n) * n
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    d = r - offset * n
    u, v = d @ e1, d @ e2
    phase = np.unwrap(np.arctan2(v, u))
    rad2 = u * u + v * v
    # weighted linear fit of the phase, heavier where the disk radius is large
    A = np.stack([traj.tau, np.ones_like(traj.tau)], axis=1)
    wts = rad2 / rad2.max()
    coef, *_ = np.linalg.lstsq(A * wts[:, None], phase * wts, rcond=None)
    Omega = float(np.arctan2(n[0], n[2]))
    return AxisFit(Omega, float(coef[0]), n, offset, float(s[2] / s[1]))


def rotate_standard_form(r: np.ndarray, Omega: float) -> np.ndarray:
    """Bloch vectors after R_Omega = exp(i Omega sigma_Y / 2)."""
    r = np.asarray(r)
    c, s = np.cos(Omega), np.sin(Omega)
    x = r[:, 0] * c - r[:, 2] * s
    z = r[:, 0] * s + r[:, 2] * c
    return np.stack([x, r[:, 1], z], axis=1)


def dephasing_factor(traj: Trajectory, fit: AxisFit, project: bool = True) -> np.ndarray:
    """phi(tau) read from the rotated X'-Y' components.

    In the standard form r_X' = int p sin(w tau), r_Y' = -int p cos(w tau) for
    the -Y initial state, so phi = int p exp(-i w tau) = -r_Y' - i r_X'.
    """
    rr = rotate_standard_form(traj.r, fit.Omega)
    if project:
        # drop the Y-tilt of the fitted normal as well, then clamp to the disk
        rr[:, 2] = fit.offset
        rmax = np.sqrt(max(1.0 - fit.offset**2, 0.0))
        rad = np.hypot(rr[:, 0], rr[:, 1])
        scale = np.where(rad > rmax, rmax / np.maximum(rad, 1e-300), 1.0)
        rr[:, 0] *= scale
        rr[:, 1] *= scale
    phi = -rr[:, 1] - 1j * rr[:, 0]
    return phi


def recover_distribution(
    traj: Trajectory,
    fit: AxisFit,
    project: bool = True,
    window: float | None = None,
    tail_threshold: float = 1e-3,
) -> QuasiDistribution:
    """Quasi-distribution over the rotation frequency omega (rad/ns)."""
    phi = dephasing_factor(traj, fit, project=project)
    # the initial state is prepared, not measured
    phi = phi.copy()
    phi[0] = 1.0
    q = invert_1d(traj.tau, phi, label="omega", window=window, tail_threshold=tail_threshold,
                  coordinates="omega")
    return q


def distribution_moments(q: QuasiDistribution) -> tuple[float, float]:
    x = q.axes[0].values
    w = q.density * q.cell_volume
    mean = float(np.dot(x, w))
    return mean, float(np.sqrt(max(np.dot((x - mean) ** 2, w), 0.0)))


def smooth_probabilities(P: np.ndarray, window: int = 7) -> np.ndarray:
    """Local quadratic least squares over ``window`` points (Savitzky-Golay)."""
    if window < 3:
        return P
    return savgol_filter(P, window, 2, axis=0, mode="interp")


def _one_run(params, probs: ReturnProbabilities, sigma, rng, smoothing_window, window, tail_threshold):
    P = probs.P
    if sigma > 0:
        P = np.clip(P + rng.normal(0.0, sigma, size=P.shape), 0.0, 1.0)
        P = smooth_probabilities(P, smoothing_window)
    traj = Trajectory.from_probabilities(ReturnProbabilities(probs.tau, P), clamp=True)
    fit = identify_axis(traj)
    q = recover_distribution(traj, fit, project=True, window=window, tail_threshold=tail_threshold)
    return nonclassicality_negativity(q).value, fit, q


def noise_study(
    params: ST0Params,
    tau,
    noise: NoiseConfig,
    smoothing_window: int = 7,
    window: float | None = 0.25,
    tail_threshold: float = 1e-3,
) -> NoiseStudy:
    """Mean and spread of N over noisy repetitions of the tomography data.

    Repeat ``i`` draws from ``default_rng([seed, i])`` so results do not
    depend on evaluation order.  A tail window (fraction ``window`` of the
    grid) is applied to every repeat and to the noiseless reference alike.
    """
    probs = simulate_return_probs(params, tau)
    clean, fit, _ = _one_run(params, probs, 0.0, None, smoothing_window, window, tail_threshold)
    values = []
    failures = 0
    for i in range(noise.repeats):
        rng = np.random.default_rng([noise.seed, i])
        try:
            values.append(_one_run(params, probs, noise.sigma, rng, smoothing_window, window, tail_threshold)[0])
        except (InversionError, ValueError):
            failures += 1
    vals = np.array(values)
    mean = float(vals.mean()) if vals.size else float("nan")
    std = float(vals.std()) if vals.size else float("nan")
    settings = {
        "sigma": noise.sigma, "repeats": noise.repeats, "seed": noise.seed,
        "smoothing_window": smoothing_window, "tail_window": window,
        "noiseless_N": clean, "noiseless_omega": fit.omega, "noiseless_Omega": fit.Omega,
    }
    return NoiseStudy(mean, std, vals, failures, settings)
