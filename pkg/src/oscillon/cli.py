"""Command-line front end: ``oscillon <command> --config run.cfg``."""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import sys
from importlib import metadata
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from . import __version__
from .config import DEMO_CONFIG, RunConfig, parse_config
from .diagnostics import ROW_FIELDS, Recorder, localization_metric
from .dynamics import LinearPropagator, StepperConfig, evolve, linear_propagate_exact
from .errors import InsufficientDecades, OscillonError, UncertifiedInput
from .potential import (
    QUOTED_TUPLE_VMINUS,
    QUOTED_TUPLE_VPLUS,
    GrowthCertificate,
    Potential,
    builtin,
    derive_constants,
    search_certificate,
    verify_growth,
)
from .pullback import (
    PullbackRun,
    absorber_entry,
    box_dimension_estimate,
    decay_fit,
    decomposition_sweep,
    default_s_grid,
    dissipative_check,
    forward_decay_check,
    pullback_convergence,
    run_family,
    thermal_state,
)
from .spectral import Grid, State, energy_X, l2_norm

__all__ = ["main", "run", "make_initial", "load_potential", "COMMANDS"]

COMMANDS = (
    "simulate", "pullback", "decay", "forward-decay", "decompose",
    "dimension", "verify-potential", "compare-oracle",
)


# --- setup --------------------------------------------------------------------

def load_potential(cfg: RunConfig):
    """Potential, certificate (or None) and rate constants (or None)."""
    if cfg.potential == "custom":
        pot = Potential(cfg.coefficients, name="custom")
        if cfg.certificate:
            cert = GrowthCertificate(int(cfg.certificate[0]), *cfg.certificate[1:5])
        else:
            cert = search_certificate(pot)
    else:
        pot, cert = builtin(cfg.potential, cfg.alpha)
    consts = derive_constants(pot, cert, cfg.H) if cert is not None else None
    return pot, cert, consts


def make_initial(cfg: RunConfig, grid: Grid, pot: Optional[Potential] = None) -> State:
    """Seeded initial state at time ``cfg.s`` with ``E_{X_s} = amplitude``."""
    q = pot.q if pot is not None else 2
    if cfg.init_kind == "thermal":
        return thermal_state(
            grid, cfg.seed, cfg.amplitude, cfg.s, cfg.H, q, cfg.k0,
            cfg.mean_fraction, cfg.v_fraction,
        )
    if cfg.init_kind == "mode":
        if cfg.amplitude == 0:
            return State.zeros(grid, cfg.s)
        shape = np.sin(2.0 * np.pi * cfg.mode_k * grid.x) if cfg.mode_k else np.ones(grid.N)
        zero = np.zeros(grid.N)

        def g(a):
            return energy_X(State(a * shape, zero, cfg.s), q, cfg.H) - cfg.amplitude

        hi = 1.0
        while g(hi) < 0:
            hi *= 2.0
        a = brentq(g, 0.0, hi, xtol=1e-300, rtol=1e-15)
        return State(a * shape, zero, cfg.s)
    data = np.loadtxt(cfg.init_path, delimiter=",", ndmin=2)
    if data.shape != (2, grid.N):
        raise ValueError(f"{cfg.init_path}: expected 2 rows of {grid.N} values, got {data.shape}")
    return State(data[0], data[1], cfg.s)


def _stepper(cfg: RunConfig) -> StepperConfig:
    return StepperConfig(cfg.method, cfg.dt, cfg.adapt, cfg.local_error_target, cfg.dealias)


def _require(consts, what: str):
    if consts is None:
        raise UncertifiedInput(f"{what} needs a certified potential")
    return consts


# --- output -------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_csv(path: str, header: Sequence[str], rows) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])
    return path


def _versions() -> dict:
    out = {"python": platform.python_version(), "oscillon": __version__}
    for pkg in ("numpy", "scipy", "mpmath", "matplotlib"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = "unknown"
    return out


def _constants_dict(cert, consts) -> dict:
    if consts is None:
        return {}
    exact = {k: str(v) for k, v in consts.__dict__.items()}
    return {
        "certificate": [str(x) for x in cert.astuple()],
        "phisecond_c": str(cert.phisecond_c),
        "values": consts.as_dict(),
        "exact": exact,
    }


def write_manifest(out: str, command: str, cfg: RunConfig, cert, consts, files, extra=None) -> str:
    path = os.path.join(out, "manifest.json")
    doc = {
        "command": command,
        "seed": cfg.seed,
        "config": cfg.to_text(),
        "config_values": cfg.as_dict(),
        "constants": _constants_dict(cert, consts),
        "versions": _versions(),
        "files": sorted(os.path.basename(f) for f in files if f),
    }
    if extra:
        doc["results"] = extra
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return str(x)


def _figures(cfg: RunConfig):
    if not cfg.figures:
        return None
    from . import plotting

    return plotting


# --- commands -----------------------------------------------------------------

def _cmd_simulate(cfg, pot, cert, consts, out, threads, say):
    grid = Grid(cfg.N)
    z = make_initial(cfg, grid, pot)
    rec = Recorder(pot, consts, cfg.H, cfg.snapshot_stride).start(z)
    evolve(z, cfg.t, _stepper(cfg), pot, cfg.H, rec)
    files = [write_csv(os.path.join(out, "timeseries.csv"), ROW_FIELDS, (r.values() for r in rec.rows))]
    files.append(write_csv(
        os.path.join(out, "heatmap.csv"), ["t"] + [f"x={x:.17g}" for x in grid.x],
        ([f.t, *f.density] for f in rec.frames),
    ))
    locs = [localization_metric(f) for f in rec.frames if np.mean(f.density) > 0]
    plots = _figures(cfg)
    if plots:
        files.append(plots.plot_timeseries(rec.rows, os.path.join(out, "timeseries.png")))
        if rec.frames:
            files.append(plots.plot_heatmap(rec.frames, os.path.join(out, "heatmap.png")))
    res = {"steps": len(rec.rows), "snapshots": len(rec.frames)}
    if locs:
        half = locs[len(locs) // 2:]
        res.update(localization_end=locs[-1], localization_final_half_min=min(half))
        say(f"localization metric: end {locs[-1]:.4g}, final-half min {min(half):.4g}")
    say(f"{len(rec.rows)} steps, {len(rec.frames)} snapshots -> {out}")
    return files, res


def _s_grid(cfg):
    s_values = list(cfg.s_values) if cfg.s_values else default_s_grid(cfg.t, cfg.imax)
    floor = LinearPropagator(cfg.N, cfg.H).horizon()
    kept = [s for s in s_values if s >= floor and s <= cfg.t]
    return sorted(kept, reverse=True)


def _family(cfg, pot, s_list):
    return PullbackRun(
        pot, cfg.H, cfg.t, s_list, cfg.amplitude, cfg.N,
        tuple(cfg.seed + i for i in range(cfg.seeds)), cfg.k0, cfg.mean_fraction,
        cfg.v_fraction, _stepper(cfg),
    )


def _cmd_pullback(cfg, pot, cert, consts, out, threads, say):
    run = _family(cfg, pot, _s_grid(cfg))
    rows, monotone = pullback_convergence(run, consts, threads=threads)
    files = [write_csv(
        os.path.join(out, "pullback.csv"), ["s", "t", "E_end", "dist_prev", "bound_rhs", "violation"],
        ((r.s, r.t, r.E_end, r.dist_prev, r.bound_rhs, r.violation) for r in rows),
    )]
    plots = _figures(cfg)
    if plots:
        files.append(plots.plot_pullback(rows, os.path.join(out, "pullback.png")))
    say(f"{len(rows)} start times; distances nonincreasing after burn-in: {monotone}")
    return files, {"monotone_after_burn_in": monotone, "rows": len(rows)}


def _cmd_decay(cfg, pot, cert, consts, out, threads, say):
    run = _family(cfg, pot, _s_grid(cfg))
    results = run_family(run, threads)
    files = []
    res = {}
    if consts is not None:
        rep = dissipative_check(run, consts, results)
        files.append(write_csv(
            os.path.join(out, "decay.csv"), ["s", "seed", "t", "E_start", "E_end", "violation"],
            zip(rep.s, rep.seeds, [run.t] * len(rep.s), rep.E_start, rep.E_end, rep.violations),
        ))
        res["max_violation"] = rep.max_violation
        ab = [absorber_entry(pot, consts, cfg.seed + i, cfg.factor, cfg.s, cfg.N, cfg.k0, _stepper(cfg))
              for i in range(cfg.seeds)]
        files.append(write_csv(
            os.path.join(out, "absorber.csv"),
            ["seed", "R_start", "R_A", "horizon", "entry_time", "entered"],
            ((cfg.seed + i, a.R_start, a.R_A, a.horizon,
              a.entry_time if a.entry_time is not None else math.nan, a.entered) for i, a in enumerate(ab)),
        ))
        res["absorber_all_entered"] = all(a.entered for a in ab)
        say(f"dissipative bound: max violation {rep.max_violation:.4g}; "
            f"absorber entered in all runs: {res['absorber_all_entered']}")
    quantity = "E_Xt" if not pot.is_linear else "gradient"
    try:
        fit = decay_fit(run, consts, results, quantity=quantity)
    except InsufficientDecades as exc:
        fit = None
        res["fit_error"] = str(exc)
        say(f"no decay fit: {exc}")
    else:
        res.update(rate=fit.rate, mu=fit.mu, margin=fit.margin, decades=fit.decades, quantity=quantity)
        say(f"fitted decay rate of {quantity}: {fit.rate:.6g}" + (f" (mu = {fit.mu:.6g})" if fit.mu else ""))
    plots = _figures(cfg)
    if plots:
        el = [run.t - r.s for r in results]
        en = [energy_X(r.end, pot.q, cfg.H) for r in results]
        rate = fit.rate if fit is not None and quantity == "E_Xt" else None
        files.append(plots.plot_decay(el, np.array(en), rate, os.path.join(out, "decay.png")))
    return files, res


def _cmd_forward(cfg, pot, cert, consts, out, threads, say):
    consts = _require(consts, "forward-decay")
    grid = Grid(cfg.N)
    reports = []
    for i in range(cfg.seeds):
        z = thermal_state(grid, cfg.seed + i, cfg.amplitude, cfg.s, cfg.H, pot.q, cfg.k0,
                          cfg.mean_fraction, cfg.v_fraction)
        reports.append((cfg.seed + i, forward_decay_check(cfg.s, z, cfg.t, consts, pot, _stepper(cfg))))
    rows = ((seed, t, v, b, v - b) for seed, rep in reports
            for t, v, b in zip(rep.times, rep.vL2sq, rep.bound))
    files = [write_csv(os.path.join(out, "forward_decay.csv"),
                       ["seed", "t", "vL2sq", "bound", "violation"], rows)]
    worst = max(rep.max_violation for _, rep in reports)
    plots = _figures(cfg)
    if plots:
        files.append(plots.plot_forward(reports, os.path.join(out, "forward_decay.png")))
    say(f"forward bound: max violation {worst:.4g}")
    return files, {"max_violation": worst}


def _cmd_decompose(cfg, pot, cert, consts, out, threads, say):
    consts = _require(consts, "decompose")
    s_values = list(cfg.s_values) if cfg.s_values else [cfg.t - i for i in range(1, 13)]
    reps = decomposition_sweep(cfg.t, s_values, pot, cert, consts, cfg.N, cfg.seed, cfg.fill,
                               cfg.k0, cfg.mean_fraction or 0.5, cfg.dt, threads)
    files = [write_csv(
        os.path.join(out, "decomposition.csv"),
        ["s", "t", "max_reconstruction", "P_max_violation", "N_sup", "N_end", "K2", "mu1"],
        ((r.s, r.t, r.max_reconstruction, r.P_max_violation, r.N_sup, r.N_end, r.K2, r.mu1) for r in reps),
    )]
    sups = [r.N_sup for r in reps]
    spread = max(sups) / min(sups) if min(sups) > 0 else math.inf
    plots = _figures(cfg)
    if plots:
        files.append(plots.plot_decomposition(reps, os.path.join(out, "decomposition.png")))
    res = {
        "max_reconstruction": max(r.max_reconstruction for r in reps),
        "P_max_violation": max(r.P_max_violation for r in reps),
        "N_sup_max": max(sups), "N_sup_spread": spread,
    }
    say(f"reconstruction {res['max_reconstruction']:.3g}, P violation {res['P_max_violation']:.3g}, "
        f"N spread {spread:.3g}")
    return files, res


def _cmd_dimension(cfg, pot, cert, consts, out, threads, say):
    run = PullbackRun(pot, cfg.H, cfg.t, (cfg.s,), cfg.amplitude, cfg.N,
                      tuple(cfg.seed + i for i in range(cfg.points)), cfg.k0,
                      cfg.mean_fraction, cfg.v_fraction, _stepper(cfg), trace=False)
    ends = [r.end for r in run_family(run, threads)]
    eps = cfg.eps if cfg.eps else tuple(np.logspace(-6, 1, 36))
    est = box_dimension_estimate(ends, eps, pot.q, cfg.H, cfg.modes)
    files = [write_csv(os.path.join(out, "dimension.csv"), ["eps", "count", "in_window"],
                       zip(est.eps, est.counts, est.window))]
    plots = _figures(cfg)
    if plots:
        files.append(plots.plot_dimension(est, os.path.join(out, "dimension.png")))
    say(f"box-counting dimension {est.dimension:.4g} (diameter {est.diameter:.3g}, {len(ends)} points)")
    return files, {"dimension": est.dimension, "diameter": est.diameter}


def _cmd_verify(cfg, pot, cert, consts, out, threads, say):
    if cert is None:
        say(f"{pot.name}: linear equation, no certificate needed")
        return [], {"linear": True}
    verdict = verify_growth(pot, cert)
    say(f"potential {pot.name}: V(y) coefficients (y^1..y^{pot.degree}) = {pot.to_text()}")
    say(f"certificate (q, a0, a1, a2, a3) = ({', '.join(str(x) for x in cert.astuple())}), "
        f"phi'' constant {cert.phisecond_c}: {'valid' if verdict else 'INVALID'}")
    res = {"valid": bool(verdict)}
    literal = {"Vplus": QUOTED_TUPLE_VPLUS, "Vminus": QUOTED_TUPLE_VMINUS}.get(cfg.potential)
    if literal is not None and tuple(cert.astuple()) != literal:
        lv = verify_growth(pot, GrowthCertificate(*literal))
        say(f"literature tuple {literal}: {'valid' if lv else f'fails ({lv.clause}) at y = {lv.witness:.6g}'}")
        res["literature_tuple_valid"] = bool(lv)
    for k, v in consts.as_dict().items():
        say(f"  {k:6s} = {v:.17g}" if isinstance(v, float) else f"  {k:6s} = {v}")
    files = [write_csv(os.path.join(out, "constants.csv"), ["name", "value", "exact"],
                       ((k, float(v), str(v)) for k, v in consts.__dict__.items()))]
    return files, res


def _cmd_oracle(cfg, pot, cert, consts, out, threads, say):
    from .oracle import fd_solve, mode_ode_solve  # cross-check only

    grid = Grid(cfg.N)
    z = make_initial(cfg, grid, pot)
    ref, _ = evolve(z, cfg.t, _stepper(cfg), pot, cfg.H)
    Ms = [int(m) for m in cfg.oracle_M]
    dt_fd = 0.25 * math.exp(cfg.H * cfg.s) / max(Ms)
    errs = []
    for M in Ms:
        e = fd_solve(z, cfg.s, cfg.t, pot, cfg.H, M, dt_fd)
        errs.append((M, l2_norm(e.u - ref.u), l2_norm(e.v - ref.v)))
    rows = [(M, eu, ev, (errs[i - 1][1] / eu) if i else math.nan) for i, (M, eu, ev) in enumerate(errs)]
    files = [write_csv(os.path.join(out, "oracle.csv"), ["M", "L2_u", "L2_v", "ratio"], rows)]
    mode_rows = []
    for k in (0, 1, 4, 31):
        if k > grid.N // 2 - 1:
            continue
        u0 = np.cos(2 * np.pi * k * grid.x)
        exact = linear_propagate_exact(State(u0, 0 * u0, cfg.s), cfg.t, cfg.H)
        uk, vk = mode_ode_solve(k, (1.0, 0.0), cfg.s, cfg.t, cfg.H, 1e-12)
        scale = 1.0 if k == 0 else 2.0
        eu = scale * np.fft.rfft(exact.u)[k].real / grid.N
        ev = scale * np.fft.rfft(exact.v)[k].real / grid.N
        mode_rows.append((k, abs(eu - uk), abs(ev - vk)))
    files.append(write_csv(os.path.join(out, "modes.csv"), ["k", "u_diff", "v_diff"], mode_rows))
    plots = _figures(cfg)
    if plots:
        files.append(plots.plot_oracle([r[0] for r in rows], np.array([r[1] for r in rows]),
                                       os.path.join(out, "oracle.png")))
    say("FD vs spectral: " + ", ".join(f"M={M}: {eu:.3g}" for M, eu, _ in errs))
    return files, {"fd": rows, "modes": mode_rows}


_DISPATCH = {
    "simulate": _cmd_simulate,
    "pullback": _cmd_pullback,
    "decay": _cmd_decay,
    "forward-decay": _cmd_forward,
    "decompose": _cmd_decompose,
    "dimension": _cmd_dimension,
    "verify-potential": _cmd_verify,
    "compare-oracle": _cmd_oracle,
}


def run(cfg: RunConfig, command: str, threads: int = 1, stream=None) -> int:
    """Execute one subcommand; returns the process exit code."""
    stream = stream or sys.stdout

    def say(msg):
        print(msg, file=stream)

    pot, cert, consts = load_potential(cfg)
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    files, res = _DISPATCH[command](cfg, pot, cert, consts, out, threads, say)
    files.append(write_manifest(out, command, cfg, cert, consts, files, res))
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = argparse.ArgumentParser(prog="oscillon", description=__doc__)
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", metavar="PATH", help="run configuration (default: built-in demo)")
    ap.add_argument("--out", metavar="DIR", help="output directory (overrides [output] directory)")
    ap.add_argument("--seed", type=int, help="override [init] seed")
    ap.add_argument("--threads", type=int, default=1, metavar="K", help="worker processes")
    ap.add_argument("--no-figures", action="store_true", help="skip the PNG figures")
    args = ap.parse_args(argv)
    try:
        if args.config:
            with open(args.config) as fh:
                text = fh.read()
        else:
            text = DEMO_CONFIG
        cfg = parse_config(text)
        if args.out:
            cfg.out_dir = args.out
        if args.seed is not None:
            cfg.seed = args.seed
        if args.no_figures:
            cfg.figures = False
        return run(cfg, args.command, max(1, args.threads))
    except (OscillonError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
