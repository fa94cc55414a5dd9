"""Command-line front end: figures, pricing, transforms, oracles, sweeps, eigenproblems.

Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .errors import ConvergenceError, DomainError
from .geometry import connection_coefficients, eigen_residual, laplacian_residual, metric_from_payoff, unit_metric
from .higher_order import (build_sl_problem, collect_l2_coefficients, l2_grid_residual, liouville_transform,
                           random_test_functions, sl_eigensolve, sl_matrices, transformed_eigensolve)
from .oracle import evolution_drift, heisenberg_expectation_curve
from .outputs import atomic_write, csv_text, dumps_json
from .payoffs import Payoff, segment_delta
from .plotting import line_chart_svg
from .pricing import (SPECTRAL_DRIFT_CONSTANT, calibrate_spectral_constant, classical_limit_sweep,
                      first_order_price, hamiltonian, martingale_check, quantum_drift_commutator,
                      quantum_drift_spectral, segment_distributions, zeroth_price)
from .spectral import CONVENTION, distribution_moments, eigen_transform, parseval_check
from .statespace import MarketState, conjugate, make_gaussian, normalize

EXIT_IO, EXIT_VALIDATION, EXIT_CONVERGENCE = 1, 2, 3

DEFAULTS = {
    "figure": 1,
    "state": {"kind": "gaussian", "x0": 0.0, "sigma_s": 0.2, "alpha": 0.0, "k0": 0.0},
    "payoff": {"kind": "call", "strike": 0.0, "epsilon": 1e-3, "beta": 1.0},
    "hamiltonian": {"sigma_h": 0.2, "potential": "none", "strength": 0.0, "centre": 0.0},
    "t": 0.0,
    "rate": 0.0,
    "lambda_min": None,
    "lambda_max": None,
    "n": None,
    "grid_n": 4097,
    "x_min": None,
    "x_max": None,
    "steps": 4,
    "t_max": 0.5,
    "samples": 51,
    "sigmas": [0.05, 0.1, 0.2, 0.4],
    "interval": None,
    "eigen_count": 3,
    "eigen_n": 512,
    "matrix": False,
    "dump_operator": False,
    "out": None,
    "formats": ["csv", "json", "svg"],
}

# figure windows in wavenumber k = lambda / sigma_h^2
FIGURE_K = 40.0
FIGURE_POINTS = 2001

MATRIX_STATES = {"real": dict(alpha=0.0, k0=0.0), "chirped": dict(alpha=1.0, k0=0.0),
                 "boosted": dict(alpha=0.0, k0=0.5)}
MATRIX_PAYOFFS = {"call": dict(kind="call"), "straddle": dict(kind="straddle"),
                  "smooth_call": dict(kind="smooth_call", beta=10.0)}


def load_schema() -> dict:
    return json.loads(resources.files("qdrift").joinpath("run_config.schema.json").read_text())


# ---------------------------------------------------------------- config


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = {**out[k], **v}
        else:
            out[k] = v
    return out


def _flag_overrides(args) -> dict:
    o: dict = {}
    state, payoff, ham = {}, {}, {}
    if args.state is not None:
        if args.state == "gaussian":
            state["kind"] = "gaussian"
        else:
            try:
                loaded = json.loads(Path(args.state).read_text())
            except json.JSONDecodeError as exc:
                raise DomainError(f"state file is not valid JSON: {exc}") from exc
            o["state"] = loaded
    for flag, key in (("x0", "x0"), ("sigma_s", "sigma_s"), ("alpha", "alpha"), ("k0", "k0")):
        if getattr(args, flag) is not None:
            state[key] = getattr(args, flag)
    for flag, key in (("payoff", "kind"), ("strike", "strike"), ("beta", "beta"), ("epsilon", "epsilon")):
        if getattr(args, flag) is not None:
            payoff[key] = getattr(args, flag)
    for flag, key in (("sigma_h", "sigma_h"), ("potential", "potential"),
                      ("potential_strength", "strength"), ("potential_centre", "centre")):
        if getattr(args, flag) is not None:
            ham[key] = getattr(args, flag)
    if state:
        o["state"] = {**o.get("state", {}), **state}
    if payoff:
        o["payoff"] = payoff
    if ham:
        o["hamiltonian"] = ham
    for key in ("t", "rate", "lambda_min", "lambda_max", "n", "grid_n", "x_min", "x_max", "steps",
                "t_max", "samples", "sigmas", "interval", "eigen_count", "eigen_n", "out"):
        v = getattr(args, key, None)
        if v is not None:
            o[key] = v
    if getattr(args, "format", None):
        o["formats"] = sorted(set(args.format))
    if getattr(args, "matrix", False):
        o["matrix"] = True
    if getattr(args, "dump_operator", False):
        o["dump_operator"] = True
    if getattr(args, "figure_id", None) is not None:
        o["figure"] = args.figure_id
    return o


def resolve_config(args) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if args.config:
        try:
            user = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise DomainError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise DomainError("config must be a JSON object")
        if user.get("state", {}).get("kind") == "grid":
            cfg["state"] = {}
        cfg = _merge(cfg, user)
    over = _flag_overrides(args)
    if over.get("state", {}).get("kind") == "grid":
        cfg["state"] = {}
    cfg = _merge(cfg, over)
    cfg["command"] = args.command
    if cfg["state"].get("kind") == "grid":
        cfg["state"] = {k: cfg["state"][k] for k in ("kind", "x", "re", "im") if k in cfg["state"]}
    if cfg["payoff"].get("kind") == "custom":
        cfg["payoff"] = {k: v for k, v in cfg["payoff"].items() if k in ("kind", "nodes", "values")}
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    errors = list(jsonschema.Draft202012Validator(load_schema()).iter_errors(cfg))
    if errors:
        exc = errors[0]
        # for oneOf failures report the branch whose 'kind' matched
        sub = [e for e in exc.context if e.validator != "const"]
        if sub:
            exc = max(sub, key=lambda e: len(e.absolute_path))
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise DomainError(f"invalid config at {where}: {exc.message}")
    if cfg["payoff"]["kind"] == "custom" and not ("nodes" in cfg["payoff"] and "values" in cfg["payoff"]):
        raise DomainError("custom payoffs need 'nodes' and 'values'")
    lo, hi = cfg["lambda_min"], cfg["lambda_max"]
    if (lo is None) != (hi is None) or (lo is not None and not lo < hi):
        raise DomainError("give both --lambda-min and --lambda-max with lambda_min < lambda_max")
    if cfg["interval"] is not None and not cfg["interval"][0] < cfg["interval"][1]:
        raise DomainError("interval must satisfy a < b")


def build_state(cfg) -> MarketState:
    return normalize(MarketState.from_dict(cfg["state"]))


def build_payoff(cfg) -> Payoff:
    return Payoff.from_dict(cfg["payoff"])


def build_hamiltonian(cfg):
    h = cfg["hamiltonian"]
    return hamiltonian(h["sigma_h"], h["potential"], h["strength"], h["centre"])


def _x_grid(cfg, state: MarketState):
    if cfg["x_min"] is None and cfg["x_max"] is None:
        return None
    if state.is_grid:
        lo, hi = state.support()
    else:
        lo, hi = state.support(10.0)
    lo = lo if cfg["x_min"] is None else cfg["x_min"]
    hi = hi if cfg["x_max"] is None else cfg["x_max"]
    if not lo < hi:
        raise DomainError("x_min must be below x_max")
    return np.linspace(lo, hi, int(cfg["grid_n"]))


# ---------------------------------------------------------------- emitters


class Emitter:
    """Collects outputs; writes files when an output directory is set."""

    def __init__(self, cfg: dict, stream=None):
        self.cfg = cfg
        self.stream = stream or sys.stdout
        self.out = Path(cfg["out"]) if cfg["out"] else None
        self.formats = set(cfg["formats"])
        self.written: list[str] = []

    @property
    def meta(self) -> dict:
        # the output location is not part of the computation; leaving it out
        # keeps files byte-identical wherever they are written
        cfg = {k: v for k, v in self.cfg.items() if k != "out"}
        return {"config": cfg, "convention": CONVENTION, "version": __version__}

    def _write(self, name: str, text: str):
        if self.out is None:
            return
        self.written.append(str(atomic_write(self.out / name, text)))

    def csv(self, name: str, columns, rows, extra: dict | None = None):
        if "csv" in self.formats:
            self._write(name, csv_text(columns, rows, {**self.meta, **(extra or {})}))

    def json(self, name: str, report: dict):
        if "json" in self.formats:
            self._write(name, dumps_json({"meta": self.meta, "report": report}))

    def svg(self, name: str, *args, **kw):
        if "svg" in self.formats and self.out is not None:
            self._write(name, line_chart_svg(*args, **kw))

    def show(self, report: dict):
        self.stream.write(dumps_json(report))


# ---------------------------------------------------------------- commands


def _window(sigma_h: float, n: int = FIGURE_POINTS):
    s2 = sigma_h * sigma_h
    return -FIGURE_K * s2, FIGURE_K * s2, n


def _figure_curve(state, g, sigma_h):
    lo, hi, n = _window(sigma_h)
    return eigen_transform(state, g, sigma_h, lo, hi, n, check_tails=False)


def _spectral_mu(state, g, sigma_h):
    return quantum_drift_spectral(eigen_transform(state, g, sigma_h))


def cmd_figure(cfg, em: Emitter) -> dict:
    fid = cfg["figure"]
    call_metric = metric_from_payoff(Payoff("call", 0.0))
    if fid == 1:
        state = make_gaussian(0.0, 0.2)
        sig = 0.2
        curves = {"g=1": (state, unit_metric(), sig), "g=1_{x>0}": (state, call_metric, sig)}
        title = "Return distribution, real Gaussian"
    elif fid == 2:
        state = make_gaussian(0.0, 0.2, 1.0)
        curves = {"sigma_h=0.2": (state, call_metric, 0.2), "sigma_h=0.1": (state, call_metric, 0.1)}
        title = "Return distribution, chirped Gaussian, g=1_{x>0}"
    else:
        plus = make_gaussian(0.0, 0.2, 1.0)
        curves = {"alpha=+1": (plus, call_metric, 0.2), "alpha=-1": (conjugate(plus), call_metric, 0.2)}
        title = "Return distribution, chirp alpha=+1 and alpha=-1"

    dists = {lab: _figure_curve(*args) for lab, args in curves.items()}
    summary = {"figure": fid, "curves": {}}
    for lab, d in dists.items():
        mean, var = distribution_moments(d)
        st, g, sig = curves[lab]
        summary["curves"][lab] = {
            "window_mean": mean,
            "window_variance": var,
            "spectral_drift": _spectral_mu(st, g, sig),
            "mass": d.grid_mass,
        }
    labs = list(dists)
    c = summary["curves"]
    if fid == 1:
        summary["checks"] = {
            "means_zero": all(abs(c[l]["window_mean"]) <= 1e-6 for l in labs),
            "indicator_variance_larger": c[labs[1]]["window_variance"] > c[labs[0]]["window_variance"],
        }
    elif fid == 2:
        a, b = dists[labs[0]], dists[labs[1]]
        err = float(np.max(np.abs(a.density - b.density)) / np.max(a.density))
        wa, wb = math.sqrt(c[labs[0]]["window_variance"]), math.sqrt(c[labs[1]]["window_variance"])
        summary["checks"] = {
            "rescale_factor": float(a.lambdas[-1] / b.lambdas[-1]),
            "rescale_max_rel_error": err,
            "width_ratio_0.1_over_0.2": wb / wa,
            "narrower_curve": labs[1] if wb < wa else labs[0],
        }
    else:
        mp, mm = c[labs[0]]["spectral_drift"], c[labs[1]]["spectral_drift"]
        summary["checks"] = {"drift_sum": mp + mm, "opposite_sign": mp * mm < 0,
                             "window_mean_sum": c[labs[0]]["window_mean"] + c[labs[1]]["window_mean"]}

    if fid == 2:
        cols, data = [], []
        for lab in labs:
            cols += [f"lambda[{lab}]", f"density[{lab}]"]
            data += [dists[lab].lambdas, dists[lab].density]
    else:
        cols = ["lambda"] + [f"density[{lab}]" for lab in labs]
        data = [dists[labs[0]].lambdas] + [dists[lab].density for lab in labs]
    name = f"figure{fid}"
    em.csv(f"{name}.csv", cols, zip(*data), {"figure": fid})
    em.json(f"{name}.json", summary)
    em.svg(f"{name}.svg", [dists[l].lambdas for l in labs], [dists[l].density for l in labs], labs,
           title, "lambda", "|psi~(lambda/sigma^2)|^2")
    return summary


def cmd_price(cfg, em: Emitter) -> dict:
    state, p, H = build_state(cfg), build_payoff(cfg), build_hamiltonian(cfg)
    mart = martingale_check(state, H).to_dict()
    report = {"inputs": {k: cfg[k] for k in ("state", "payoff", "hamiltonian", "t", "rate")}}
    if cfg["t"] == 0:
        p0 = zeroth_price(state, p)
        report.update(p0=p0, price=math.exp(0.0) * p0)
    else:
        exp = first_order_price(state, p, H, cfg["t"], cfg["rate"])
        report.update(exp.to_dict())
        report["martingale"] = mart
    em.json("price.json", report)
    return report


def cmd_transform(cfg, em: Emitter) -> dict:
    state, p = build_state(cfg), build_payoff(cfg)
    sig = cfg["hamiltonian"]["sigma_h"]
    seg_list = segment_delta(p).active()
    if not seg_list:
        raise DomainError("payoff has no segment with non-zero delta")
    report = {"segments": []}
    series = []
    for i, seg in enumerate(seg_list):
        g = metric_from_payoff(p, seg)
        if cfg["lambda_min"] is None:
            d = eigen_transform(state, g, sig)
        else:
            d = eigen_transform(state, g, sig, cfg["lambda_min"], cfg["lambda_max"], cfg["n"])
        mean, var = distribution_moments(d)
        report["segments"].append({
            "segment": seg.to_dict(), "mass": d.mass, "mean": mean, "variance": var,
            "parseval_error": parseval_check(d, state, g), "spectral_drift": quantum_drift_spectral(d),
            "points": int(d.lambdas.size),
        })
        suffix = "" if len(seg_list) == 1 else f"_seg{i}"
        em.csv(f"transform{suffix}.csv", ["lambda", "re_psi_tilde", "im_psi_tilde", "density"],
               zip(d.lambdas, d.samples.real, d.samples.imag, d.density), {"segment": seg.to_dict()})
        series.append((d.lambdas, d.density, f"segment {seg.lo:g}..{seg.hi:g} ({seg.sign:+d})"))
    em.json("transform.json", report)
    em.svg("transform.svg", [s[0] for s in series], [s[1] for s in series], [s[2] for s in series],
           "Return distribution", "lambda", "|psi~(lambda/sigma^2)|^2")
    return report


def _oracle_row(label, state, p, H, x=None):
    mu_c = quantum_drift_commutator(state, p, H)
    mu_s = quantum_drift_spectral(segment_distributions(state, p, H.sigma_h)) if not state.is_grid else float("nan")
    mu_f = evolution_drift(state, p, H, x)
    vals = [v for v in (mu_s, mu_c, mu_f) if math.isfinite(v)]
    scale = max(abs(v) for v in vals)
    spread = max(vals) - min(vals)
    rel = spread / scale if scale > 1e-8 else spread
    return {"case": label, "mu_spectral": mu_s, "mu_commutator": mu_c, "mu_finite_difference": mu_f,
            "max_pairwise_diff": spread, "agreement_metric": rel}


def cmd_oracle(cfg, em: Emitter) -> dict:
    H = build_hamiltonian(cfg)
    rows = []
    if cfg["matrix"]:
        sig_s = cfg["state"].get("sigma_s", 0.2)
        for sn, sk in MATRIX_STATES.items():
            for pn, pk in MATRIX_PAYOFFS.items():
                rows.append(_oracle_row(f"{sn}/{pn}", make_gaussian(0.0, sig_s, **sk), Payoff(**pk), H))
    else:
        state, p = build_state(cfg), build_payoff(cfg)
        x = _x_grid(cfg, state)
        rows.append(_oracle_row("configured", state, p, H, x))
        res = heisenberg_expectation_curve(state, p, H, cfg["t_max"], cfg["samples"], cfg["steps"], x)
        em.csv("oracle_evolution.csv", ["t", "E_U", "E_X", "E_P", "norm"], res.rows(), {"evolution": res.meta})
        em.svg("oracle_evolution.svg", [res.times], [res.e_u], ["E[U](t)"], "Heisenberg expectation",
               "t", "E[U]")
        rows[0]["norm_drift"] = res.norm_drift
    cols = ["case", "mu_spectral", "mu_commutator", "mu_finite_difference", "max_pairwise_diff", "agreement_metric"]
    em.csv("oracle.csv", cols, ([r[c] for c in cols] for r in rows))
    report = {"rows": rows, "spectral_constant": SPECTRAL_DRIFT_CONSTANT,
              "calibrated_constant": calibrate_spectral_constant()}
    em.json("oracle.json", report)
    return report


def cmd_sweep(cfg, em: Emitter) -> dict:
    state, p = build_state(cfg), build_payoff(cfg)
    rows = classical_limit_sweep(state, p, cfg["sigmas"])
    cols = ["sigma_h", "mu", "abs_mu", "mean_lambda", "width", "width_ratio", "rescale_error"]
    table = [[r.sigma_h, r.mu, abs(r.mu), r.mean_lambda, r.width, r.width_ratio, abs(r.width_ratio - 1.0)]
             for r in rows]
    em.csv("sweep.csv", cols, table)
    mus = [abs(r.mu) for r in rows]
    sig = [r.sigma_h for r in rows]
    order = np.argsort(sig)
    sm = np.array(mus)[order]
    report = {"rows": [r.to_dict() for r in rows],
              "abs_mu_monotone_in_sigma": bool(np.all(np.diff(sm) >= 0) or np.all(np.diff(sm) <= 0)),
              "max_rescale_error": max(t[-1] for t in table)}
    if len(rows) > 1 and min(mus) > 0:
        slope = np.polyfit(np.log(sig), np.log(mus), 1)[0]
        report["measured_mu_exponent"] = float(slope)
    em.json("sweep.json", report)
    em.svg("sweep.svg", [np.array(sig)[order]], [sm], ["|mu|"], "Drift against Hamiltonian volatility",
           "sigma_h", "|mu|")
    return report


def _interval(cfg):
    return tuple(cfg["interval"]) if cfg["interval"] is not None else (-2.0, 2.0)


def cmd_eigen(cfg, em: Emitter) -> dict:
    p = build_payoff(cfg)
    a, b = _interval(cfg)
    sl = build_sl_problem(p, cfg["hamiltonian"]["sigma_h"], a, b)
    n, k = cfg["eigen_n"], cfg["eigen_count"]
    base = sl_eigensolve(sl, n, k)
    fine = sl_eigensolve(sl, 2 * n + 1, k)
    wkb = transformed_eigensolve(liouville_transform(sl), n, k)
    report = {
        "interval": [a, b],
        "sl_eigenvalues": base.eigenvalues,
        "l2_eigenvalues": base.l2_eigenvalues,
        "refined_sl_eigenvalues": fine.eigenvalues,
        "transformed_sl_eigenvalues": wkb.eigenvalues,
        "refinement_rel_error": np.abs(base.eigenvalues / fine.eigenvalues - 1.0),
        "transform_rel_error": np.abs(wkb.eigenvalues / fine.eigenvalues - 1.0),
    }
    em.json("eigen.json", report)
    if cfg["dump_operator"]:
        A, W = sl_matrices(sl, n)
        off = np.r_[A.diagonal(1), np.nan]
        em.csv("eigen_operator.csv", ["x", "A_diag", "A_upper", "W_diag"],
               zip(base.x, A.diagonal(), off, W.diagonal()))
    return report


def cmd_residual(cfg, em: Emitter) -> dict:
    p = build_payoff(cfg)
    a, b = _interval(cfg)
    sig = cfg["hamiltonian"]["sigma_h"]
    n = 2048
    x = np.linspace(a, b, n)
    co = collect_l2_coefficients(p, sig)
    tests = random_test_functions(5, seed=0)
    g = metric_from_payoff(p)
    xm = x[(x > g.lo) & (x < g.hi)]
    phi = np.cos(3.0 * xm) + 0.5 * np.sin(xm)
    report = {
        "interval": [a, b],
        "c3_max": float(np.max(np.abs(co.c3(x)))),
        "l2_grid_residual_n2048": l2_grid_residual(p, sig, x, tests),
        "l2_grid_residual_n1024": l2_grid_residual(p, sig, np.linspace(a, b, 1024), tests),
        "laplacian_residual_displayed": laplacian_residual(g, xm, connection_coefficients(g, "displayed"), phi,
                                                           form="composed"),
        "laplacian_residual_composed": laplacian_residual(g, xm, connection_coefficients(g, "composed"), phi,
                                                          form="composed"),
        "eigen_residual": eigen_residual(g, 0.1, sig, xm),
    }
    em.json("residual.json", report)
    return report


COMMANDS = {"figure": cmd_figure, "price": cmd_price, "transform": cmd_transform, "oracle": cmd_oracle,
            "sweep": cmd_sweep, "eigen": cmd_eigen, "residual": cmd_residual}


# ---------------------------------------------------------------- parser


def _common_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(add_help=False)
    ap.add_argument("--config", help="JSON run configuration (flags override it)")
    g = ap.add_argument_group("state")
    g.add_argument("--state", help="'gaussian' or a JSON state file")
    g.add_argument("--x0", type=float)
    g.add_argument("--sigma-s", type=float)
    g.add_argument("--alpha", type=float)
    g.add_argument("--k0", type=float)
    g = ap.add_argument_group("payoff")
    g.add_argument("--payoff", choices=["forward", "call", "put", "straddle", "floor", "digital",
                                        "smooth_call", "exponential"])
    g.add_argument("--strike", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--epsilon", type=float)
    g = ap.add_argument_group("hamiltonian")
    g.add_argument("--sigma-h", type=float)
    g.add_argument("--potential", choices=["none", "linear", "harmonic"])
    g.add_argument("--potential-strength", type=float)
    g.add_argument("--potential-centre", type=float)
    g = ap.add_argument_group("pricing and grids")
    g.add_argument("--t", type=float)
    g.add_argument("--rate", type=float)
    g.add_argument("--lambda-min", type=float)
    g.add_argument("--lambda-max", type=float)
    g.add_argument("--n", type=int)
    g.add_argument("--grid-n", type=int)
    g.add_argument("--x-min", type=float)
    g.add_argument("--x-max", type=float)
    g.add_argument("--steps", type=int)
    g.add_argument("--t-max", type=float)
    g.add_argument("--samples", type=int)
    g = ap.add_argument_group("output")
    g.add_argument("--out", help="output directory (files are written only when given)")
    g.add_argument("--format", action="append", choices=["csv", "json", "svg"],
                   help="restrict written formats (repeatable)")
    return ap


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    ap = argparse.ArgumentParser(prog="qdrift", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"qdrift {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    f = sub.add_parser("figure", parents=[common], help="reproduce a return-distribution figure")
    f.add_argument("figure_id", type=int, choices=[1, 2, 3])
    sub.add_parser("price", parents=[common], help="zeroth/first-order price report")
    sub.add_parser("transform", parents=[common], help="return distribution per delta segment")
    o = sub.add_parser("oracle", parents=[common], help="spectral vs commutator vs evolution drift")
    o.add_argument("--matrix", action="store_true", help="run the call/straddle/smooth_call x state matrix")
    s = sub.add_parser("sweep", parents=[common], help="drift and width across sigma_h")
    s.add_argument("--sigmas", type=float, nargs="+")
    e = sub.add_parser("eigen", parents=[common], help="second-order Sturm-Liouville eigenvalues")
    e.add_argument("--interval", type=float, nargs=2, metavar=("A", "B"))
    e.add_argument("--eigen-count", type=int)
    e.add_argument("--eigen-n", type=int)
    e.add_argument("--dump-operator", action="store_true")
    r = sub.add_parser("residual", parents=[common], help="operator residual checks")
    r.add_argument("--interval", type=float, nargs=2, metavar=("A", "B"))
    sub.add_parser("schema", help="print the run-configuration JSON schema")
    return ap


def main(argv=None, stream=None) -> int:
    stream = stream or sys.stdout
    args = build_parser().parse_args(argv)
    if args.command == "schema":
        stream.write(dumps_json(load_schema()))
        return 0
    try:
        cfg = resolve_config(args)
        em = Emitter(cfg, stream)
        report = COMMANDS[args.command](cfg, em)
        em.show(report)
    except DomainError as exc:
        print(f"qdrift: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConvergenceError as exc:
        print(f"qdrift: no convergence: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OSError as exc:
        print(f"qdrift: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0
