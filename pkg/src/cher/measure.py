"""Nonclassicality of a (quasi-)distribution: N = inf_p D(q, p) over probability densities p."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .dephasing import DephasingFactors
from .lie import RootSystem, root_system
from .retrieval import (
    InversionError,
    NoInversionStrategy,
    QuasiDistribution,
    detect_delta,
    invert_1d,
    invert_pair_correlated,
)

LP_CELL_CAP = 4096
FAITHFUL_TOL = 1e-9


class LPError(RuntimeError):
    pass


@dataclass(frozen=True)
class NonclassicalityResult:
    value: float
    method: str
    grid: dict
    delta_note: str = ""
    argmin: np.ndarray | None = None
    refinement_delta: float | None = None
    span_delta: float | None = None
    reports: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.value >= 0:
            raise ValueError(f"nonclassicality must be >= 0, got {self.value}")

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "method": self.method,
            "grid": self.grid,
            "delta_note": self.delta_note,
            "refinement_delta": self.refinement_delta,
            "span_delta": self.span_delta,
            "reports": {k: (v.as_dict() if hasattr(v, "as_dict") else v) for k, v in self.reports.items()},
        }


def _grid_info(q: QuasiDistribution) -> dict:
    pts = q.points()
    info = {"labels": list(q.labels), "steps": [a.step for a in q.axes], "sizes": [a.size for a in q.axes]}
    if q.axes:
        flat = pts.reshape(-1, len(q.axes))
        info["spans"] = [[float(flat[:, k].min()), float(flat[:, k].max())] for k in range(len(q.axes))]
    return info


def _delta_note(q: QuasiDistribution) -> str:
    if not q.deltas:
        return ""
    if any(d.mass < 0 for d in q.deltas):
        raise AssertionError("delta factor with negative mass")
    names = ", ".join(f"{d.label} at {d.location:g}" for d in q.deltas)
    return f"point masses ({names}) are nonnegative and excluded from the negativity"


def _check_normalized(q: QuasiDistribution) -> None:
    if abs(q.total_mass - 1.0) > 1e-6:
        raise ValueError(f"input is not normalized (total mass {q.total_mass:.9g})")


def variational_distance(p: QuasiDistribution, q: QuasiDistribution) -> float:
    """Total-variation distance 1/2 int |p - q|, point masses included.

    Point masses at different locations have disjoint supports, so they
    contribute the full mass of both sides.
    """
    if len(p.axes) != len(q.axes) or (p.axes and not p.same_grid(q)):
        raise ValueError("variational distance needs identical grids")
    if sorted(d.label for d in p.deltas) != sorted(d.label for d in q.deltas):
        raise ValueError("variational distance needs identical delta structure")
    loc_p = sorted((d.label, d.location) for d in p.deltas)
    loc_q = sorted((d.label, d.location) for d in q.deltas)
    mp = float(np.prod([d.mass for d in p.deltas]))
    mq = float(np.prod([d.mass for d in q.deltas]))
    a = np.atleast_1d(p.density) * mp
    b = np.atleast_1d(q.density) * mq
    if loc_p == loc_q:
        return 0.5 * float(np.abs(a - b).sum()) * p.cell_volume
    return 0.5 * float(np.abs(a).sum() + np.abs(b).sum()) * p.cell_volume


def nonclassicality_negativity(q: QuasiDistribution) -> NonclassicalityResult:
    """Negative mass of the density; deltas contribute nothing."""
    _check_normalized(q)
    dens = np.atleast_1d(q.density)
    value = float(np.maximum(-dens, 0.0).sum()) * q.cell_volume
    if float(dens.min()) >= -FAITHFUL_TOL:
        value = 0.0
    return NonclassicalityResult(value, "negativity", _grid_info(q), _delta_note(q))


def nonclassicality_lp(q: QuasiDistribution, cap: int = LP_CELL_CAP) -> NonclassicalityResult:
    """min_p 1/2 sum |q_i - p_i| dV  subject to p >= 0 and sum p_i dV = 1."""
    _check_normalized(q)
    dens = np.atleast_1d(q.density).ravel()
    N = dens.size
    if N > cap:
        raise ValueError(f"grid has {N} cells, above the LP cap of {cap}")
    dV = q.cell_volume
    mass = float(np.prod([d.mass for d in q.deltas]))
    # variables [p, u]; u_i >= |q_i - p_i|
    I = sparse.identity(N, format="csr")
    A_ub = sparse.vstack([sparse.hstack([-I, -I]), sparse.hstack([I, -I])], format="csr")
    b_ub = np.concatenate([-dens, dens])
    A_eq = sparse.csr_matrix(np.concatenate([np.full(N, dV), np.zeros(N)])[None, :])
    c = np.concatenate([np.zeros(N), np.full(N, 0.5 * dV)])
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0 / mass], bounds=(0, None), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise LPError(f"LP solver failed: {res.message}")
    p = res.x[:N].reshape(np.shape(q.density))
    return NonclassicalityResult(max(float(res.fun), 0.0), "lp-oracle", _grid_info(q), _delta_note(q), argmin=p)


def product_negativity(parts) -> float:
    """Negative mass of a product of independent 1-D quasi-densities.

    With P and M the positive and negative masses of each factor, the
    product's negative mass is built up pairwise as P_f M_g + M_f P_g.
    """
    P, M = 1.0, 0.0
    for q in parts:
        if q.axes:
            d = q.density
            pos = float(np.maximum(d, 0).sum()) * q.cell_volume
            neg = float(np.maximum(-d, 0).sum()) * q.cell_volume
        else:
            pos, neg = float(q.total_mass), 0.0
        P, M = P * pos + M * neg, P * neg + M * pos
    return M


# -- dynamics -> measure ------------------------------------------------------------

def _simple_structure(factors: DephasingFactors, roots: RootSystem, tol: float) -> bool:
    """True when every non-simple factor is the product of its simple-root factors."""
    simple = roots.simple_indices
    for m in roots.positive_indices:
        if m in simple:
            continue
        coef = np.round(roots.simple_coefficients(m)).astype(int)
        pred = np.ones_like(factors.times, dtype=complex)
        for s, c in zip(simple, coef):
            pred = pred * factors.factor(s) ** c
        if np.max(np.abs(pred - factors.factor(m))) > tol:
            return False
    return True


def _pair_model(factors: DephasingFactors):
    from .spin_boson import BathParams, SpectralDensity

    meta = factors.metadata or {}
    if meta.get("model") != "qubit-pair-common-bath":
        return None
    if meta.get("spectral_density") != "ohmic" or (meta.get("power") or 1.0) != 1.0:
        return None
    if (meta.get("temperature") or 0.0) != 0.0:
        return None
    return SpectralDensity("ohmic", wc=float(meta.get("wc") or 1.0)), BathParams(0.0)


def _invert(times, phi, label, window, tail_threshold) -> QuasiDistribution:
    return invert_1d(times, phi, label=label, window=window, tail_threshold=tail_threshold)


def _dynamics_value(factors, roots, window, tail_threshold, tol):
    """(value, reports, parts-or-dense) for one time grid."""
    n = factors.n
    t = factors.times
    if n == 2:
        q = _invert(t, factors.factor(1), "x1", window, tail_threshold)
        r = nonclassicality_negativity(q)
        return r.value, {"x1": q.metadata.get("report")}, r
    if _simple_structure(factors, roots, tol):
        parts = []
        reports = {}
        for s in roots.simple_indices:
            q = _invert(t, factors.factor(s), f"x{s}", window, tail_threshold)
            parts.append(q)
            reports[f"x{s}"] = q.metadata.get("report")
        value = product_negativity(parts)
        grid = {"factors": {p.deltas[0].label if not p.axes else p.labels[0]: _grid_info(p) for p in parts}}
        note = "; ".join(filter(None, (_delta_note(p) for p in parts)))
        return value, reports, NonclassicalityResult(max(value, 0.0), "negativity", grid, note)
    model = _pair_model(factors) if n == 4 else None
    if model is None:
        raise NoInversionStrategy(
            "no inversion strategy: correlated factors outside the Ohmic T=0 qubit-pair regime"
        )
    q = invert_pair_correlated(factors, model[0], model[1], window=window)
    r = nonclassicality_negativity(q)
    return r.value, {"x1,x13": q.metadata.get("report")}, r


def _subgrid(factors: DephasingFactors, sl: slice) -> DephasingFactors:
    return DephasingFactors(
        factors.n, factors.times[sl], {m: v[sl] for m, v in factors.factors.items()}, dict(factors.metadata)
    )


def nonclassicality_of_dynamics(
    factors: DephasingFactors,
    roots: RootSystem | None = None,
    window: float | None = None,
    tail_threshold: float = 1e-3,
    tol: float = 1e-8,
    sensitivity: bool = True,
) -> NonclassicalityResult:
    """Invert the dephasing factors to their CHER and measure its negativity.

    Strategies: a delta or 1-D inversion for a qubit; independent 1-D
    inversions when every factor factorizes over the simple roots; the gated
    pair ansatz for two qubits on a common Ohmic zero-temperature bath.

    ``refinement_delta`` is N(full) - N(time grid truncated to T_max/2), i.e.
    halving the frequency resolution; ``span_delta`` is N(full) - N(every
    second sample), i.e. halving the frequency span.
    """
    roots = roots or root_system(factors.n)
    value, reports, res = _dynamics_value(factors, roots, window, tail_threshold, tol)
    refine = span = None
    N = factors.times.size
    if sensitivity and N >= 8:
        try:
            refine = value - _dynamics_value(_subgrid(factors, slice(0, N // 2 + 1)), roots, window, tail_threshold, tol)[0]
        except InversionError:
            refine = None
        try:
            span = value - _dynamics_value(_subgrid(factors, slice(0, None, 2)), roots, window, tail_threshold, tol)[0]
        except InversionError:
            span = None
    return NonclassicalityResult(
        value=max(value, 0.0),
        method=res.method,
        grid=res.grid,
        delta_note=res.delta_note,
        refinement_delta=refine,
        span_delta=span,
        reports=reports,
    )


def refinement_delta_of_grid(q: QuasiDistribution) -> float | None:
    """N(q) - N(q coarsened by 2 along every axis), the discretization indicator for stored grids."""
    if not q.axes or q.basis is not None or any(a.size < 4 for a in q.axes):
        return None
    d = q.density
    sl = tuple(slice(0, (a.size // 2) * 2) for a in q.axes)
    d = d[sl]
    for k in range(d.ndim):
        shape = list(d.shape)
        shape[k : k + 1] = [shape[k] // 2, 2]
        d = d.reshape(shape).mean(axis=k + 1)
    vol = q.cell_volume * 2 ** d.ndim
    mass = float(d.sum()) * vol
    neg = float(np.maximum(-d, 0).sum()) * vol / mass if mass > 0 else 0.0
    return nonclassicality_negativity(q).value - neg


__all__ = [
    "LP_CELL_CAP",
    "LPError",
    "NonclassicalityResult",
    "detect_delta",
    "nonclassicality_lp",
    "nonclassicality_negativity",
    "nonclassicality_of_dynamics",
    "product_negativity",
    "refinement_delta_of_grid",
    "variational_distance",
]
