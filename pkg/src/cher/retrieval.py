"""Retrieval of the canonical Hamiltonian-ensemble (quasi-)distribution.

Conventions: a dephasing factor is the characteristic function

    phi(t) = integral p(x) exp(-i x t) dx,

so the density is recovered as ``p(x) = (1/2pi) integral phi(t) exp(i x t) dt``.
Time series are sampled on uniform grids starting at t = 0; the negative-time
half is the conjugate, ``phi(-t) = conj(phi(t))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lie import RootSystem

MASS_TOL = 1e-6
DEFAULT_T_MAX = 40.0
DEFAULT_SAMPLES = 4096
DEFAULT_PAIR_SAMPLES = 192


class InversionError(ValueError):
    pass


class InsufficientDecayError(InversionError):
    pass


class NoInversionStrategy(InversionError):
    pass


@dataclass(frozen=True)
class Axis:
    label: str
    start: float
    step: float
    size: int

    @property
    def values(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.size)


@dataclass(frozen=True)
class Delta:
    label: str
    location: float
    mass: float = 1.0


@dataclass(frozen=True)
class InversionReport:
    grid: dict
    window: float | None
    max_imag_residue: float
    mass_defect: float
    forward_residuals: dict = field(default_factory=dict)
    notes: tuple = ()

    def as_dict(self) -> dict:
        return {
            "grid": self.grid,
            "window": self.window,
            "max_imag_residue": self.max_imag_residue,
            "mass_defect": self.mass_defect,
            "forward_residuals": self.forward_residuals,
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class QuasiDistribution:
    """Real density on a regular grid, times point-mass factors.

    Grid point ``i`` sits at ``basis @ (start + i * step)``; ``basis`` is the
    identity unless the grid was sheared by :func:`change_variables`.
    """

    coordinates: str
    axes: tuple
    density: np.ndarray
    deltas: tuple = ()
    basis: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)
    check_mass: bool = True

    def __post_init__(self):
        if self.coordinates not in ("lambda", "simple-root", "omega"):
            raise ValueError(f"unknown coordinate tag {self.coordinates!r}")
        dens = np.asarray(self.density)
        if np.iscomplexobj(dens):
            raise ValueError("density must be real")
        shape = tuple(a.size for a in self.axes)
        if dens.shape != shape:
            raise ValueError(f"density shape {dens.shape} does not match axes {shape}")
        labels = [a.label for a in self.axes] + [d.label for d in self.deltas]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate axis/delta labels {labels}")
        if any(d.mass < 0 for d in self.deltas):
            raise ValueError("delta factors must carry nonnegative mass")
        if self.basis is not None:
            B = np.asarray(self.basis, dtype=float)
            if B.shape != (len(self.axes),) * 2:
                raise ValueError("basis must be square with one column per axis")
            object.__setattr__(self, "basis", B)
        dens = np.array(dens, dtype=float)
        dens.setflags(write=False)
        object.__setattr__(self, "density", dens)
        object.__setattr__(self, "axes", tuple(self.axes))
        object.__setattr__(self, "deltas", tuple(self.deltas))
        if self.check_mass and abs(self.total_mass - 1.0) > MASS_TOL:
            raise ValueError(f"quasi-distribution is not normalized (mass {self.total_mass:.9g})")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(a.label for a in self.axes)

    @property
    def cell_volume(self) -> float:
        vol = float(np.prod([a.step for a in self.axes])) if self.axes else 1.0
        if self.basis is not None:
            vol *= abs(np.linalg.det(self.basis))
        return vol

    @property
    def normalization(self) -> float:
        return float(self.density.sum() * self.cell_volume)

    @property
    def total_mass(self) -> float:
        return self.normalization * float(np.prod([d.mass for d in self.deltas]))

    def points(self) -> np.ndarray:
        """Coordinates of every grid point, shape (*density.shape, ndim)."""
        if not self.axes:
            return np.zeros((0,))
        mesh = np.stack(np.meshgrid(*[a.values for a in self.axes], indexing="ij"), axis=-1)
        if self.basis is not None:
            mesh = mesh @ self.basis.T
        return mesh

    def same_grid(self, other: "QuasiDistribution", tol: float = 1e-12) -> bool:
        if self.coordinates != other.coordinates or len(self.axes) != len(other.axes):
            return False
        for a, b in zip(self.axes, other.axes):
            if a.label != b.label or a.size != b.size:
                return False
            if abs(a.start - b.start) > tol or abs(a.step - b.step) > tol:
                return False
        Ba = np.eye(len(self.axes)) if self.basis is None else self.basis
        Bb = np.eye(len(other.axes)) if other.basis is None else other.basis
        return bool(np.allclose(Ba, Bb, atol=tol, rtol=0))

    def with_density(self, density: np.ndarray, **meta) -> "QuasiDistribution":
        return QuasiDistribution(
            self.coordinates, self.axes, density, self.deltas, self.basis,
            dict(self.metadata, **meta), check_mass=False,
        )


def _uniform_step(times: np.ndarray) -> float:
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise InversionError("need at least two time samples")
    if t[0] != 0.0:
        raise InversionError("time grid must start at 0")
    dt = (t[-1] - t[0]) / (t.size - 1)
    if np.max(np.abs(np.diff(t) - dt)) > 1e-9 * max(dt, 1.0):
        raise InversionError("time grid must be uniform")
    return float(dt)


def raised_cosine_window(times: np.ndarray, fraction: float) -> np.ndarray:
    """1 on the first ``1 - fraction`` of the grid, cosine taper to 0 at the end."""
    t = np.asarray(times, dtype=float)
    T = t[-1]
    t0 = (1.0 - fraction) * T
    w = np.ones_like(t)
    tail = t > t0
    if fraction > 0:
        w[tail] = 0.5 * (1.0 + np.cos(np.pi * (t[tail] - t0) / (T - t0)))
    return w


def detect_delta(times, values, tol: float = 1e-10) -> Delta | None:
    """Point mass at c if phi(t) = exp(-i c t) to within ``tol``."""
    t = np.asarray(times, dtype=float)
    phi = np.asarray(values, dtype=complex)
    if np.max(np.abs(np.abs(phi) - 1.0)) > tol:
        return None
    phase = np.unwrap(np.angle(phi))
    denom = float(np.dot(t, t))
    c = -float(np.dot(t, phase - phase[0])) / denom if denom > 0 else 0.0
    if np.max(np.abs(phi - np.exp(-1j * c * t))) < tol:
        return Delta("x", c)
    return None


def invert_1d(
    times,
    values,
    label: str = "x",
    window: float | None = None,
    tail_threshold: float = 1e-3,
    coordinates: str = "simple-root",
    delta_tol: float = 1e-10,
) -> QuasiDistribution:
    """Density whose characteristic function is the sampled ``phi``.

    The half-line samples are extended by conjugation to an odd-length
    periodic sequence of length ``2N - 1`` and transformed with one FFT; the
    frequency step is ``2 pi / ((2N - 1) dt)`` and the span is set by Nyquist.
    """
    t = np.asarray(times, dtype=float)
    phi = np.asarray(values, dtype=complex)
    if phi.shape != t.shape:
        raise InversionError("times and values differ in length")
    dt = _uniform_step(t)
    if abs(phi[0] - 1.0) > 1e-8:
        raise InversionError(f"phi(0) must be 1, got {phi[0]}")
    if np.max(np.abs(phi)) > 1.0 + 1e-9:
        raise InversionError("|phi| exceeds 1")

    delta = detect_delta(t, phi, delta_tol)
    if delta is not None:
        d = Delta(label, delta.location)
        report = InversionReport({"kind": "delta"}, None, 0.0, 0.0, {"delta": 0.0})
        return QuasiDistribution(coordinates, (), np.array(1.0), (d,), metadata={"report": report})

    if window is None and abs(phi[-1]) >= tail_threshold:
        raise InsufficientDecayError(
            f"|phi(T_max)| = {abs(phi[-1]):.3e} is not below {tail_threshold:.1e}; "
            "extend the grid or request a tail window (mixed delta + dense directions are not supported)"
        )
    w = raised_cosine_window(t, window) if window else np.ones_like(t)
    f = phi * w
    N = t.size
    M = 2 * N - 1
    seq = np.concatenate([f, np.conj(f[:0:-1])])
    dens = np.fft.fftshift(np.fft.ifft(seq)) * (M * dt / (2.0 * np.pi))
    dx = 2.0 * np.pi / (M * dt)
    imag = float(np.max(np.abs(dens.imag)) / max(np.max(np.abs(dens.real)), 1e-300))
    if imag > 1e-8:
        raise InversionError(f"inverse transform is not real (relative residue {imag:.2e})")
    dens = dens.real
    axis = Axis(label, -(N - 1) * dx, dx, M)
    mass = float(dens.sum() * dx)
    # forward check on the sampled grid
    back = np.fft.ifftshift(dens).astype(complex)
    fwd = np.fft.fft(back)[:N] * dx
    resid = float(np.max(np.abs(fwd - f)))
    report = InversionReport(
        grid={"t_max": float(t[-1]), "samples": int(N), "dt": dt, "dx": dx, "span": [axis.start, axis.values[-1]]},
        window=window,
        max_imag_residue=imag,
        mass_defect=abs(1.0 - mass),
        forward_residuals={label: resid},
    )
    return QuasiDistribution(coordinates, (axis,), dens, (), metadata={"report": report})


# -- qubit-pair correlated inversion ------------------------------------------------

def pair_kernel(t1, t13, wc: float = 1.0) -> np.ndarray:
    """Two-time kernel exp(i theta(t1 - t13) - Psi(t1, t13)) of the Ohmic, T=0 qubit pair."""
    t1 = np.asarray(t1, dtype=float)
    t13 = np.asarray(t13, dtype=float)
    s = t1 + t13
    d = t1 - t13
    p = t1 * t13
    theta = 4.0 * wc * d - 4.0 * np.arctan(wc * d)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
        expo = np.where(s != 0, 8.0 * p / np.where(s != 0, s * s, 1.0), np.where(p < 0, -np.inf, 0.0))
        tau = np.exp2(expo)
        # Psi = 2 tau ln(1 + wc^2 s^2 / tau) = 2 tau [ln(tau + wc^2 s^2) - ln tau]
        log_tau = expo * np.log(2.0)
        psi = np.where(
            tau > 0,
            2.0 * tau * (np.log(tau + (wc * s) ** 2) - log_tau),
            0.0,
        )
        psi = np.where((s == 0) & (p == 0), 0.0, psi)
    return np.exp(1j * theta - psi)


def _gate_pair(factors, sd, bath, tol: float) -> None:
    if factors.n != 4:
        raise NoInversionStrategy("correlated pair inversion needs su(4) factors")
    if sd is None or sd.kind != "ohmic" or sd.power != 1.0:
        raise NoInversionStrategy("no inversion strategy: pair ansatz holds only for the Ohmic spectral density")
    if bath is not None and bath.temperature != 0:
        raise NoInversionStrategy("no inversion strategy: pair ansatz holds only at zero temperature")
    f = factors.factors
    if np.max(np.abs(f[6] - 1.0)) > tol:
        raise NoInversionStrategy("no inversion strategy: phi_6 is not identically 1")
    if np.max(np.abs(f[4] - f[1])) > tol or np.max(np.abs(f[11] - f[13])) > tol:
        raise NoInversionStrategy("no inversion strategy: couplings are not equal (phi_4 != phi_1 or phi_11 != phi_13)")


def invert_pair_correlated(factors, sd, bath=None, window: float | None = None, tol: float = 1e-10) -> QuasiDistribution:
    """Density over (x1, x13) times delta(x6) for the qubit pair on a common Ohmic bath.

    The kernel is evaluated on the full symmetric time grid built from the
    factors' (uniform) grid, checked against phi_1, phi_13 and phi_9 on the
    axes and the diagonal, and inverted with a 2-D FFT.
    """
    _gate_pair(factors, sd, bath, tol)
    t = factors.times
    dt = _uniform_step(t)
    wc = sd.wc
    f = factors.factors
    for name, got, want in (
        ("(t, 0) vs phi_1", pair_kernel(t, 0.0 * t, wc), f[1]),
        ("(0, t) vs phi_13", pair_kernel(0.0 * t, t, wc), f[13]),
        ("(t, t) vs phi_9", pair_kernel(t, t, wc), f[9]),
    ):
        err = float(np.max(np.abs(got - want)))
        if err > tol:
            raise InversionError(f"ansatz consistency failure on slice {name}: max deviation {err:.2e}")

    N = t.size
    M = 2 * N - 1
    full = dt * (np.arange(M) - (N - 1))
    T1, T13 = np.meshgrid(full, full, indexing="ij")
    K = pair_kernel(T1, T13, wc)
    if window:
        half = raised_cosine_window(t, window)
        w = np.concatenate([half[:0:-1], half])
        K = K * w[:, None] * w[None, :]
    edge = float(max(np.max(np.abs(K[0])), np.max(np.abs(K[:, 0]))))
    dens = np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(K))) * (M * dt / (2 * np.pi)) ** 2
    dx = 2 * np.pi / (M * dt)
    imag = float(np.max(np.abs(dens.imag)) / np.max(np.abs(dens.real)))
    if imag > 1e-8:
        raise InversionError(f"inverse transform is not real (relative residue {imag:.2e})")
    dens = dens.real
    start = -(N - 1) * dx
    axes = (Axis("x1", start, dx, M), Axis("x13", start, dx, M))
    mass = float(dens.sum() * dx * dx)
    report = InversionReport(
        grid={"t_max": float(t[-1]), "samples": int(N), "dt": dt, "dx": dx, "span": [start, start + (M - 1) * dx]},
        window=window,
        max_imag_residue=imag,
        mass_defect=abs(1.0 - mass),
        notes=(f"max |kernel| on the time-box edge = {edge:.3e}",),
    )
    q = QuasiDistribution("simple-root", axes, dens, (Delta("x6", 0.0),), metadata={"report": report, "wc": wc})
    return q


# -- forward transform and change of variables --------------------------------------

def _axis_root(label: str) -> int:
    if not label.startswith("x"):
        raise ValueError(f"axis label {label!r} does not name a simple root")
    return int(label[1:])


def _projected_sum(q: QuasiDistribution, coef: np.ndarray, times: np.ndarray) -> np.ndarray:
    """sum_i p_i exp(-i (coef . x_i) t) dV for every t."""
    dens = q.density
    if not q.axes:
        return np.full(times.shape, float(dens), dtype=complex)
    vol = q.cell_volume
    steps = np.array([a.step for a in q.axes])
    starts = np.array([a.start for a in q.axes])
    B = np.eye(len(q.axes)) if q.basis is None else q.basis
    c = B.T @ coef  # coefficients on the raw axis coordinates u
    keep = np.abs(c) > 1e-14
    marg = dens.sum(axis=tuple(np.flatnonzero(~keep))) if (~keep).any() else dens
    c, steps, starts = c[keep], steps[keep], starts[keep]
    if c.size == 0:
        return np.full(times.shape, marg.sum() * vol, dtype=complex)
    offset = float(np.dot(c, starts))
    incr = c * steps
    base = np.min(np.abs(incr))
    ratios = incr / base
    if np.allclose(ratios, np.round(ratios), atol=1e-9):
        # lattice projection: y = offset + base * (sum_k r_k i_k)
        r = np.round(ratios).astype(int)
        idx = np.zeros(marg.shape, dtype=int)
        for k, rk in enumerate(r):
            shape = [1] * marg.ndim
            shape[k] = marg.shape[k]
            idx = idx + rk * np.arange(marg.shape[k]).reshape(shape)
        lo = idx.min()
        w = np.bincount((idx - lo).ravel(), weights=marg.ravel())
        y = offset + base * (lo + np.arange(w.size))
    else:
        mesh = np.meshgrid(*[np.arange(s) for s in marg.shape], indexing="ij")
        y = offset + sum(ik * mesh[k] for k, ik in enumerate(incr)).ravel()
        w = marg.ravel()
    out = np.empty(times.shape, dtype=complex)
    chunk = max(1, 4_000_000 // max(w.size, 1))
    for i in range(0, times.size, chunk):
        tt = times[i : i + chunk]
        out[i : i + chunk] = np.exp(-1j * np.outer(tt, y)) @ w
    return out * vol


def forward_transform(q: QuasiDistribution, roots: RootSystem, times) -> dict[int, np.ndarray]:
    """phi_m(t) for every positive root, evaluated from the (quasi-)distribution."""
    t = np.asarray(times, dtype=float)
    out = {}
    if q.coordinates == "lambda":
        if q.deltas:
            raise ValueError("delta factors are only supported in simple-root coordinates")
        if len(q.axes) != roots.n - 1:
            raise ValueError(f"lambda-space grid must have {roots.n - 1} axes")
        for m in roots.positive_indices:
            out[m] = _projected_sum(q, roots.root(m), t)
        return out

    simple = list(roots.simple_indices)
    dense_roots = [_axis_root(a.label) for a in q.axes]
    delta_roots = {_axis_root(d.label): d for d in q.deltas}
    covered = set(dense_roots) | set(delta_roots)
    if covered != set(simple) or len(dense_roots) + len(delta_roots) != len(simple):
        raise ValueError(
            f"axes {sorted(covered)} do not match the simple roots {simple} of su({roots.n})"
        )
    for m in roots.positive_indices:
        coef_all = dict(zip(simple, roots.simple_coefficients(m)))
        coef = np.array([coef_all[r] for r in dense_roots])
        phase = np.ones_like(t, dtype=complex)
        for r, d in delta_roots.items():
            phase *= d.mass * np.exp(-1j * coef_all[r] * d.location * t)
        out[m] = _projected_sum(q, coef, t) * phase
    return out


def change_variables(q: QuasiDistribution, roots: RootSystem, inverse: bool = False) -> QuasiDistribution:
    """Re-express a lambda-space density in simple-root coordinates x_m = alpha_m . lambda.

    The grid is carried along exactly (its basis is multiplied by the change
    matrix) and the Jacobian is folded into the density values.
    ``inverse=True`` maps simple-root coordinates back to lambda space.
    """
    A = roots.change_matrix
    if abs(np.linalg.det(A)) < 1e-12:
        raise ValueError("singular change-of-variables matrix")
    d = len(q.axes)
    if d != roots.n - 1 or q.deltas:
        raise ValueError("change of variables needs a dense grid over the full Cartan space")
    B = np.eye(d) if q.basis is None else q.basis
    if not inverse:
        if q.coordinates != "lambda":
            raise ValueError("expected lambda-space coordinates")
        newB, scale, tag = A @ B, roots.jacobian, "simple-root"
        labels = [f"x{m}" for m in roots.simple_indices]
    else:
        if q.coordinates != "simple-root":
            raise ValueError("expected simple-root coordinates")
        newB, scale, tag = np.linalg.solve(A, B), 1.0 / roots.jacobian, "lambda"
        labels = [f"lambda{k * k - 1}" for k in range(2, roots.n + 1)]
    axes = tuple(Axis(lab, a.start, a.step, a.size) for lab, a in zip(labels, q.axes))
    if np.allclose(newB, np.eye(d), atol=1e-13, rtol=0):
        newB = None
    return QuasiDistribution(tag, axes, q.density * scale, (), newB, dict(q.metadata))


# -- helpers --------------------------------------------------------------------------

def marginal(q: QuasiDistribution, label: str) -> QuasiDistribution:
    """1-D marginal of a dense axis-aligned grid."""
    if q.basis is not None:
        raise ValueError("marginals need an axis-aligned grid")
    k = q.labels.index(label)
    others = tuple(i for i in range(len(q.axes)) if i != k)
    vol = float(np.prod([q.axes[i].step for i in others]))
    dens = q.density.sum(axis=others) * vol
    return QuasiDistribution(q.coordinates, (q.axes[k],), dens, (), metadata={}, check_mass=False)


def grid_convolve(p: QuasiDistribution, r: QuasiDistribution) -> QuasiDistribution:
    """Linear convolution of two 1-D densities on the same grid, cropped to that grid."""
    if len(p.axes) != 1 or not p.same_grid(r):
        raise ValueError("convolution needs two 1-D densities on the same grid")
    a = p.axes[0]
    full = np.convolve(p.density, r.density) * a.step
    # full[i] sits at 2*start + i*step; the grid point j sits at start + j*step
    shift = int(round(-a.start / a.step))
    dens = full[shift : shift + a.size]
    return QuasiDistribution(p.coordinates, p.axes, dens, (), metadata={}, check_mass=False)


def density_on(q: QuasiDistribution, x) -> np.ndarray:
    """Linear interpolation of a 1-D density."""
    a = q.axes[0]
    return np.interp(x, a.values, q.density, left=0.0, right=0.0)
