"""Command-line interface.

Every subcommand writes its artifacts atomically under ``--out`` (default
``$CHER_OUTPUT_DIR`` or ``./cher-out``) and prints a JSON summary on stdout.
Exit status: 0 success, 1 validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io as cio
from .dephasing import (
    NotPureDephasingError,
    chi_from_map,
    cp_violation,
    factors_from_map,
    map_from_factors,
    reconstruct_from_chi,
)
from .lie import root_system
from .measure import (
    LP_CELL_CAP,
    LPError,
    nonclassicality_lp,
    nonclassicality_negativity,
    nonclassicality_of_dynamics,
    refinement_delta_of_grid,
)
from .oracle import TruncationError, discretize_bath, reduced_coherences, reduced_single_qubit
from .retrieval import (
    DEFAULT_PAIR_SAMPLES,
    DEFAULT_SAMPLES,
    DEFAULT_T_MAX,
    InversionError,
    invert_1d,
    invert_pair_correlated,
)
from .spin_boson import (
    BathParams,
    QuadratureError,
    SpectralDensity,
    compute_theta_phi,
    load_spectral_table,
    qubit_pair_factors,
    single_qubit_factor,
)
from .st0 import (
    NoiseConfig,
    ST0Params,
    Trajectory,
    default_tau_grid,
    distribution_moments,
    identify_axis,
    noise_study,
    recover_distribution,
    simulate_return_probs,
)

NUMERICAL_ERRORS = (QuadratureError, InversionError, LPError, TruncationError, NotPureDephasingError,
                    np.linalg.LinAlgError, FloatingPointError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _positive(kind):
    def parse(s):
        v = kind(s)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {s}")
        return v
    return parse


def _nonneg(s):
    v = float(s)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {s}")
    return v


def _fraction(s):
    v = float(s)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {s}")
    return v


def _config(args) -> dict:
    skip = {"func", "out"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _outdir(args) -> Path:
    return Path(args.out) if args.out else cio.default_output_dir()


def _time_grid(t_max: float, samples: int) -> np.ndarray:
    return np.linspace(0.0, t_max, samples)


def _spectral(args) -> SpectralDensity:
    if getattr(args, "table", None):
        return load_spectral_table(args.table)
    return SpectralDensity("ohmic", wc=args.wc)


# -- subcommands ------------------------------------------------------------------------

def cmd_roots(args, h):
    rs = root_system(args.n)
    labels = [f"lambda{k * k - 1}" for k in range(2, args.n + 1)]
    rows = ["m,positive,simple," + ",".join(labels)]
    for m, vec in rs.roots:
        rows.append(f"{m},{int(m in rs.positive_indices)},{int(m in rs.simple_indices)}," + ",".join(f"{v:.17g}" for v in vec))
    text = f"# format_version {cio.FORMAT_VERSION}\n# config_hash {h}\n# jacobian {rs.jacobian:.17g}\n" + "\n".join(rows) + "\n"
    if args.out is None:
        sys.stdout.write(text)
        return None
    path = cio.atomic_write(_outdir(args) / f"roots_n{args.n}.csv", text)
    return {"roots_csv": str(path), "positive": list(rs.positive_indices), "simple": list(rs.simple_indices),
            "jacobian": rs.jacobian}


def _model_factors(args):
    grid = _time_grid(args.t_max, args.samples)
    sd = _spectral(args)
    bath = BathParams(temperature=args.temperature, coupling_prefactor=args.coupling)
    if args.model == "relative-phase":
        bath_modes = discretize_bath(sd, args.modes)
        cfg = bath_modes.mode_config(args.phi_rel, temperature=args.temperature)
        return reduced_single_qubit(cfg, grid, partner_state=args.partner_state)
    model = compute_theta_phi(sd, bath, grid)
    if args.model == "qubit":
        return single_qubit_factor(model)
    return qubit_pair_factors(sd, bath, grid, model=model)


def cmd_factors(args, h):
    f = _model_factors(args)
    out = _outdir(args)
    jpath = cio.save_factors(out / f"factors_{args.model}.json", f, h)
    cpath = cio.atomic_write(out / f"factors_{args.model}.csv", cio.factors_csv(f, h))
    return {"factors_json": str(jpath), "factors_csv": str(cpath), "n": f.n, "roots": sorted(f.factors)}


def _retrieve(f, window, tail):
    """All quasi-distributions for a factor set, keyed by file stem."""
    if f.n == 2:
        return {"cher_x1": invert_1d(f.times, f.factor(1), "x1", window=window, tail_threshold=tail)}
    if f.n == 4 and f.metadata.get("model") == "qubit-pair-common-bath":
        meta = f.metadata
        sd = SpectralDensity("ohmic", wc=float(meta.get("wc") or 1.0), power=float(meta.get("power") or 1.0)) \
            if meta.get("spectral_density") == "ohmic" else None
        bath = BathParams(temperature=float(meta.get("temperature") or 0.0))
        return {"cher_x1_x13": invert_pair_correlated(f, sd, bath, window=window)}
    rs = root_system(f.n)
    return {f"cher_x{s}": invert_1d(f.times, f.factor(s), f"x{s}", window=window, tail_threshold=tail)
            for s in rs.simple_indices}


def cmd_retrieve(args, h):
    f = cio.load_factors(args.input)
    out = _outdir(args)
    written = {}
    for stem, q in _retrieve(f, args.window, args.tail_threshold).items():
        path = cio.save_qd(out / f"{stem}.csv", q, h)
        rep = q.metadata.get("report")
        written[stem] = {"path": str(path), "report": rep.as_dict() if rep else None}
    return {"distributions": written}


def cmd_measure(args, h):
    q = cio.load_qd(args.input)
    if args.method == "lp":
        res = nonclassicality_lp(q, cap=args.lp_cap)
    else:
        res = nonclassicality_negativity(q)
    doc = {"value": res.value, "method": res.method, "grid": res.grid,
           "refinement_delta": refinement_delta_of_grid(q), "delta_note": res.delta_note}
    if args.method == "both":
        doc["lp_value"] = nonclassicality_lp(q, cap=args.lp_cap).value
    path = cio.save_result(_outdir(args) / f"{Path(args.input).stem}_measure.json", doc, h)
    return dict(doc, result_json=str(path))


def cmd_chi(args, h):
    chi = cio.load_chi(args.input)
    m = reconstruct_from_chi(chi)
    f = factors_from_map(m, threshold=args.threshold)
    out = _outdir(args)
    cp = cp_violation(m)
    fpath = cio.save_factors(out / "chi_factors.json", f, h)
    doc = {"factors_json": str(fpath), "cp_violation": cp, "n": chi.n,
           "chi_imag_residue": m.metadata.get("chi_imag_residue"),
           "roundtrip_error": float(np.max(np.abs(chi_from_map(m).chi - chi.chi)))}
    if args.measure:
        doc["nonclassicality"] = nonclassicality_of_dynamics(f, window=args.window).as_dict()
    cio.save_result(out / "chi_result.json", doc, h)
    return doc


def cmd_st0(args, h):
    params = ST0Params(J=args.j, delta_B=args.db * 1e-3, T2star=args.t2star, envelope=args.envelope)
    tau = default_tau_grid(params, step=args.tau_step, span=args.tau_span)
    probs = simulate_return_probs(params, tau)
    traj = Trajectory.from_probabilities(probs)
    fit = identify_axis(traj)
    q = recover_distribution(traj, fit)
    clean = nonclassicality_negativity(q).value
    study = noise_study(params, tau, NoiseConfig(args.noise_sigma, args.repeats, args.seed),
                        smoothing_window=args.smoothing_window, window=args.noise_window)
    out = _outdir(args)
    tag = f"st0_J{args.j:g}"
    head = f"# format_version {cio.FORMAT_VERSION}\n# config_hash {h}\n"
    cio.atomic_write(out / f"{tag}_probabilities.csv",
                     cio._savetxt(np.column_stack([tau, probs.P]), head + "tau_ns,P_X,P_Y,P_Z"))
    cio.atomic_write(out / f"{tag}_trajectory.csv",
                     cio._savetxt(np.column_stack([tau, traj.r]), head + "tau_ns,r_X,r_Y,r_Z"))
    cio.save_qd(out / f"{tag}_p_omega.csv", q, h)
    mean, std = distribution_moments(q)
    doc = {"omega": fit.omega, "Omega": fit.Omega, "Omega_deg": float(np.degrees(fit.Omega)),
           "omega_expected": params.omega, "p_center": mean, "p_std": std,
           "N_noiseless": clean, "N_mean": study.mean, "N_std": study.std, "failures": study.failures,
           "noise_settings": study.settings}
    cio.save_result(out / f"{tag}_result.json", doc, h)
    return doc


def cmd_oracle(args, h):
    cfg = cio.load_modes(args.modes)
    if args.method:
        cfg = type(cfg)(cfg.modes, cfg.fock_cutoff, cfg.temperature, args.method, cfg.n_qubits)
    grid = _time_grid(args.t_max, args.samples)
    f = reduced_single_qubit(cfg, grid, args.partner_state) if args.reduced else reduced_coherences(cfg, grid)
    out = _outdir(args)
    path = cio.save_factors(out / "oracle_factors.json", f, h)
    cio.atomic_write(out / "oracle_factors.csv", cio.factors_csv(f, h))
    return {"factors_json": str(path), "n": f.n, "method": cfg.method, "modes": len(cfg.modes)}


def cmd_pipeline(args, h):
    out = _outdir(args)
    sd = SpectralDensity("ohmic", wc=args.wc)
    if args.name == "pair-ohmic":
        grid = _time_grid(args.t_max / args.wc, args.grid)
        f = qubit_pair_factors(sd, BathParams(0.0), grid)
        q = invert_pair_correlated(f, sd, BathParams(0.0), window=args.window)
        qpath = cio.save_qd(out / "pair_cher_x1_x13.csv", q, h)
        res = nonclassicality_of_dynamics(f, window=args.window)
        doc = {"cher_csv": str(qpath), **res.as_dict()}
        doc["min_density"] = float(q.density.min())
        cio.save_result(out / "pair_measure.json", doc, h)
        return doc
    if args.name == "qubit-ohmic":
        grid = _time_grid(args.t_max / args.wc, args.grid)
        f = single_qubit_factor(compute_theta_phi(sd, BathParams(args.temperature), grid))
        q = invert_1d(f.times, f.factor(1), "x1", window=args.window)
        qpath = cio.save_qd(out / "qubit_cher_x1.csv", q, h)
        res = nonclassicality_of_dynamics(f, window=args.window)
        doc = {"cher_csv": str(qpath), **res.as_dict()}
        cio.save_result(out / "qubit_measure.json", doc, h)
        return doc
    # relative-phase sweep
    grid = _time_grid(args.t_max / args.wc, args.grid)
    bath = discretize_bath(sd, args.modes)
    phis = np.linspace(0.0, np.pi, args.points)
    values = []
    for phi in phis:
        cfg = bath.mode_config(phi, temperature=args.temperature)
        f = reduced_single_qubit(cfg, grid, partner_state=args.partner_state)
        values.append(nonclassicality_of_dynamics(f, window=args.window, sensitivity=False).value)
    head = f"# format_version {cio.FORMAT_VERSION}\n# config_hash {h}\nphi_rel,N"
    path = cio.atomic_write(out / "relative_phase_N.csv", cio._savetxt(np.column_stack([phis, values]), head))
    doc = {"curve_csv": str(path), "phi_rel": phis.tolist(), "N": values}
    cio.save_result(out / "relative_phase_result.json", doc, h)
    return doc


# -- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cher", description="Canonical Hamiltonian-ensemble retrieval and nonclassicality.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.add_argument("--out", default=None, help=f"output directory (default ${cio.OUTPUT_DIR_ENV} or ./cher-out)")
        sp.set_defaults(func=func)
        return sp

    sp = add("roots", cmd_roots, "Root table of su(n) as CSV (stdout unless --out is given).")
    sp.add_argument("--n", type=_positive(int), required=True)

    def grid_args(sp, samples=DEFAULT_SAMPLES):
        sp.add_argument("--t-max", type=_positive(float), default=DEFAULT_T_MAX)
        sp.add_argument("--samples", type=_positive(int), default=samples)

    sp = add("factors", cmd_factors, "Model dephasing factors on a time grid.")
    sp.add_argument("--model", choices=["qubit", "pair", "relative-phase"], required=True)
    sp.add_argument("--wc", type=_positive(float), default=1.0)
    sp.add_argument("--temperature", type=_nonneg, default=0.0)
    sp.add_argument("--coupling", type=_positive(float), default=1.0)
    sp.add_argument("--table", default=None, help="spectral density CSV (omega, J)")
    sp.add_argument("--phi-rel", type=float, default=0.0)
    sp.add_argument("--modes", type=_positive(int), default=256)
    sp.add_argument("--partner-state", choices=["+x", "up", "down"], default="+x")
    grid_args(sp)

    sp = add("retrieve", cmd_retrieve, "Invert dephasing factors (JSON) into CHER grids (CSV).")
    sp.add_argument("--input", required=True)
    sp.add_argument("--window", type=_fraction, default=None)
    sp.add_argument("--tail-threshold", type=_positive(float), default=1e-3)

    sp = add("measure", cmd_measure, "Nonclassicality of a stored quasi-distribution.")
    sp.add_argument("--input", required=True)
    sp.add_argument("--method", choices=["negativity", "lp", "both"], default="negativity")
    sp.add_argument("--lp-cap", type=_positive(int), default=LP_CELL_CAP)

    sp = add("chi", cmd_chi, "Dephasing factors from a chi-matrix time series.")
    sp.add_argument("--input", required=True)
    sp.add_argument("--threshold", type=_positive(float), default=1e-8)
    sp.add_argument("--measure", action="store_true")
    sp.add_argument("--window", type=_fraction, default=None)

    sp = add("st0", cmd_st0, "Simulated S-T0 tomography, axis recovery, CHER and noise study.")
    sp.add_argument("action", choices=["simulate"])
    sp.add_argument("--j", type=float, default=0.37, help="exchange energy (ueV)")
    sp.add_argument("--db", type=float, default=10.5, help="hyperfine gradient (mT)")
    sp.add_argument("--t2star", type=_positive(float), default=30.0, help="dephasing time (ns)")
    sp.add_argument("--envelope", choices=["gaussian", "quasi-static"], default="gaussian")
    sp.add_argument("--noise-sigma", type=_nonneg, default=0.05)
    sp.add_argument("--repeats", type=_positive(int), default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--tau-step", type=_positive(float), default=0.2)
    sp.add_argument("--tau-span", type=_positive(float), default=4.0, help="grid length in units of T2star")
    sp.add_argument("--smoothing-window", type=int, default=7)
    sp.add_argument("--noise-window", type=_fraction, default=0.25)

    sp = add("oracle", cmd_oracle, "Finite-mode spin-boson coherences from a mode file.")
    sp.add_argument("--modes", required=True)
    sp.add_argument("--method", choices=["analytic-displacement", "truncated-fock"], default=None)
    sp.add_argument("--reduced", action="store_true", help="emit qubit 1's reduced factor")
    sp.add_argument("--partner-state", choices=["+x", "up", "down"], default="+x")
    grid_args(sp, samples=1024)

    sp = add("pipeline", cmd_pipeline, "End-to-end runs: pair-ohmic, qubit-ohmic, relative-phase.")
    sp.add_argument("name", choices=["pair-ohmic", "qubit-ohmic", "relative-phase"])
    sp.add_argument("--wc", type=_positive(float), default=1.0)
    sp.add_argument("--grid", type=_positive(int), default=None,
                    help="nonnegative time samples per axis (defaults: pair 192, others 4096)")
    sp.add_argument("--t-max", type=_positive(float), default=DEFAULT_T_MAX, help="in units of 1/wc")
    sp.add_argument("--temperature", type=_nonneg, default=0.0)
    sp.add_argument("--window", type=_fraction, default=None)
    sp.add_argument("--modes", type=_positive(int), default=256)
    sp.add_argument("--points", type=_positive(int), default=9)
    sp.add_argument("--partner-state", choices=["+x", "up", "down"], default="+x")
    return p


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if getattr(args, "grid", "unset") is None:
        args.grid = DEFAULT_PAIR_SAMPLES if args.name == "pair-ohmic" else DEFAULT_SAMPLES
    h = cio.config_hash(_config(args))
    try:
        summary = args.func(args, h)
    except NUMERICAL_ERRORS as exc:
        print(json.dumps({"status": "error", "kind": "numerical", "message": str(exc)}))
        return 2
    except (ValueError, KeyError, OSError, cio.SchemaError) as exc:
        print(json.dumps({"status": "error", "kind": "validation", "message": str(exc)}))
        return 1
    if summary is not None:
        print(cio.dumps({"status": "ok", "command": args.command, "config_hash": h, **summary}), end="")
    return 0


def main() -> None:
    sys.exit(dispatch())
