"""Command-line front end.

    landau-spectra predict|toeplitz|sweep|levelset|selftest --config FILE --out DIR

Exit codes: 0 success, 1 runtime error, 2 configuration error, 3 soft
failure (a sweep missing its tolerance, or a failed self-test property).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import eigencount, hamiltonian, landau, levelset
from .errors import DegenerateShiftError, LandauSpectraError
from .landau import BasisSlice, LandauModel
from .potentials import Potential, potential_from_dict, potential_to_dict, square

log = logging.getLogger("landau_spectra")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_SOFT = 0, 1, 2, 3
DEFAULT_TOLERANCE = 0.10
FIT_RANGE = (1.8, 2.2)
J_SWEEP_LEVELS = 8
ZERO_CUT = 1e-12


class ConfigError(Exception):
    pass


# -- output helpers -----------------------------------------------------------------

def fmt(x):
    """Reals with 17 significant digits; integers, None and strings as-is."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def render_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) for x in r])
    return buf.getvalue()


def write_outputs(out_dir: str, files: dict):
    """Write every file via a temporary sibling and an atomic rename."""
    os.makedirs(out_dir, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=out_dir)
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            staged.append((tmp, os.path.join(out_dir, name)))
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, final in staged:
        os.replace(tmp, final)


# -- configuration -----------------------------------------------------------------

def _require(cfg, key, kind=None):
    if key not in cfg:
        raise ConfigError(f"missing config field {key!r}")
    val = cfg[key]
    if kind is not None and not isinstance(val, kind):
        raise ConfigError(f"config field {key!r} has the wrong type")
    return val


def load_model(cfg) -> LandauModel:
    m = cfg.get("model", {})
    if not isinstance(m, dict):
        raise ConfigError("'model' must be an object")
    return LandauModel(float(m.get("B", 1.0)))


def load_potential(cfg) -> Potential:
    return potential_from_dict(_require(cfg, "potential", dict))


def load_window(cfg, model) -> hamiltonian.WindowSpec:
    win = _require(cfg, "window", list)
    if len(win) != 2:
        raise ConfigError("'window' must be [lam1, lam2]")
    return hamiltonian.validate_window(model, float(win[0]), float(win[1]))


def thread_cap() -> int:
    raw = os.environ.get("THREADS")
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"THREADS must be a positive integer, got {raw!r}")
    return n


# -- predict -----------------------------------------------------------------------------

def exceptional_scan(V, series: levelset.CoefficientSeries, B: float):
    """Warnings for lam_i - Lambda_q that are plateau values of V."""
    warnings = []
    lam1, lam2 = series.window
    for q, _ in series.terms:
        for lam in (lam1, lam2):
            x = lam - B * (2 * q + 1)
            res = levelset.level_mass(V, x)
            if res.exceptional_flag:
                warnings.append(
                    f"lam - Lambda_{q} = {x:.17g} is an exceptional value "
                    f"(level set of area {res.value:.6g})")
    return warnings


def predict(model, V, window):
    A = levelset.script_A(V, window.lam1, window.lam2, model.B)
    Bs = levelset.script_B(V, square(V), window.shift, window.a, model.B)
    diff = abs(A.total - Bs.total)
    rel = diff / abs(A.total) if A.total else diff
    return {
        "A": A.as_dict(),
        "B": Bs.as_dict(),
        "identity": {"relative_difference": rel, "pass": rel <= 1e-9},
        "exceptional_warnings": exceptional_scan(V, A, model.B),
    }


def cmd_predict(cfg):
    model = load_model(cfg)
    V = load_potential(cfg)
    window = load_window(cfg, model)
    report = predict(model, V, window)
    report["potential"] = potential_to_dict(V) if not _is_grid(V) else {"shape": "grid_sampled"}
    return {"report.json": render_json(report)}, EXIT_OK


def _is_grid(V):
    return type(V).__name__ == "GridSampled"


# -- toeplitz --------------------------------------------------------------------------

def toeplitz_spectrum(model, V, q, t, margin, path="auto"):
    slc = BasisSlice.for_potential(model, q, V, t, margin)
    if path == "radial" or (path == "auto" and V.is_radial):
        pairs = landau.radial_toeplitz_eigs(model, q, V, t, slc.alpha_max)
        ev = np.sort(np.array([v for _, v in pairs]))
        return ev, "radial", slc
    blk = landau.assemble_toeplitz(model, q, q, V, slc, slc)
    return eigencount.hermitian_eigenvalues(blk.entries).eigenvalues, "dense", slc


def cmd_toeplitz(cfg):
    model = load_model(cfg)
    V = load_potential(cfg)
    q = int(_require(cfg, "q"))
    t = float(_require(cfg, "t"))
    if q < 0 or not t > 0:
        raise ConfigError("need q >= 0 and t > 0")
    margin = float(cfg.get("margin", landau.DEFAULT_MARGIN))
    path = cfg.get("path", "auto")
    if path not in ("auto", "radial", "dense"):
        raise ConfigError("'path' must be auto, radial or dense")
    lambdas = [float(x) for x in cfg.get("lambdas", [])]
    if any(not x > 0 for x in lambdas):
        raise ConfigError("thresholds in 'lambdas' must be positive")
    ev, used, slc = toeplitz_spectrum(model, V, q, t, margin, path)
    # magnitudes below 1e-12 sup|V| are rounding noise of the dense path
    nonzero = ev[np.abs(ev) > ZERO_CUT * V.norms().sup]
    pref = t * t * model.B / (2 * math.pi)
    rows = []
    for lam in lambdas:
        n_plus, n_minus = eigencount.counting_functions(ev, lam)
        a_plus = levelset.sup_measure(V, lam, +1).value
        a_minus = levelset.sup_measure(V, lam, -1).value
        rows.append({"lambda": lam, "n_plus": n_plus, "n_minus": n_minus,
                     "predicted_plus": pref * a_plus, "predicted_minus": pref * a_minus})
    abs_sum = float(np.sum(np.abs(ev)))
    bound = pref * V.norms().l1
    report = {
        "q": q, "t": t, "B": model.B, "path": used, "alpha_max": slc.alpha_max,
        "dimension": int(ev.size),
        "nonzero_count": int(nonzero.size),
        "thresholds": rows,
        "trace": {"trace": float(np.sum(ev)), "predicted": pref * V.integral(),
                  "abs_sum": abs_sum, "bound": bound, "pass": abs_sum <= bound * (1 + 1e-9)},
    }
    spectrum = render_csv(["index", "eigenvalue"], [(i, x) for i, x in enumerate(nonzero)])
    return {"spectrum.csv": spectrum, "report.json": render_json(report)}, EXIT_OK


# -- sweep -------------------------------------------------------------------------------

@dataclass
class SweepConfig:
    model: LandauModel
    potential: Potential
    window: hamiltonian.WindowSpec
    t_values: list
    J: object = "auto"
    margin: float = landau.DEFAULT_MARGIN
    outputs: list = field(default_factory=lambda: ["csv", "json", "plotdata"])
    seed: int = 0
    tolerance: float = DEFAULT_TOLERANCE


def load_sweep(cfg) -> SweepConfig:
    model = load_model(cfg)
    V = load_potential(cfg)
    window = load_window(cfg, model)
    ts = [float(x) for x in _require(cfg, "t_values", list)]
    if not ts or any(not x > 0 for x in ts) or any(b <= a for a, b in zip(ts, ts[1:])):
        raise ConfigError("'t_values' must be a nonempty increasing list of positive reals")
    J = cfg.get("J", "auto")
    if J != "auto" and (not isinstance(J, int) or J < window.nu + 1):
        raise ConfigError(f"'J' must be 'auto' or an integer >= {window.nu + 1}")
    outputs = cfg.get("outputs", ["csv", "json", "plotdata"])
    if any(o not in ("csv", "json", "plotdata") for o in outputs):
        raise ConfigError("'outputs' entries must be csv, json or plotdata")
    return SweepConfig(model, V, window, ts, J, float(cfg.get("margin", landau.DEFAULT_MARGIN)),
                       list(outputs), int(cfg.get("seed", 0)),
                       float(cfg.get("tolerance", DEFAULT_TOLERANCE)))


def sweep_point(sc: SweepConfig, t: float):
    """Count at one t; J chosen by a J-sweep when J is 'auto'."""
    window = sc.window
    warnings = []
    for attempt in range(2):
        try:
            conv = None
            if sc.J == "auto":
                Js = list(range(window.nu + 1, window.nu + 1 + J_SWEEP_LEVELS))
                conv = hamiltonian.j_convergence(sc.model, sc.potential, window, t, Js, sc.margin)
                J = conv.J_converged if conv.converged else Js[-1]
            else:
                J = sc.J
            wc = hamiltonian.count_window(sc.model, sc.potential, window, J, t, sc.margin)
            break
        except DegenerateShiftError:
            if attempt:
                raise
            warnings.append(f"t={t:.17g}: shift on the spectrum, window nudged by 1e-8")
            window = hamiltonian.validate_window(sc.model, window.lam1 + 1e-8, window.lam2 + 1e-8)
    return {
        "t": t,
        "N": wc.count,
        "J_used": wc.J,
        "j_converged": None if conv is None else conv.converged,
        "j_rows": None if conv is None else conv.rows,
        "audit_ok": wc.audit_ok,
        "audit_count": wc.audit_count,
        "diagonal_only_count": wc.diagonal_only_count,
        "alpha_max": wc.alpha_max,
        "warnings": warnings,
    }


def fit_power(ts, ns):
    """Least-squares (p, c) in log N = p log t + log c."""
    p, logc = np.polyfit(np.log(ts), np.log(ns), 1)
    return float(p), float(math.exp(logc))


def run_sweep(sc: SweepConfig, threads: int = 1):
    A = levelset.script_A(sc.potential, sc.window.lam1, sc.window.lam2, sc.model.B)
    pred = A.total
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda t: sweep_point(sc, t), sc.t_values))
    else:
        rows = [sweep_point(sc, t) for t in sc.t_values]
    for r in rows:
        r["N_over_t2"] = r["N"] / r["t"] ** 2
        r["predicted"] = pred
        r["relative_error"] = r["N_over_t2"] / pred - 1.0 if pred else None
    fit = None
    if all(r["N"] > 0 for r in rows) and len(rows) >= 2:
        upper = rows[len(rows) // 2 :] if len(rows) >= 4 else rows
        p, c = fit_power([r["t"] for r in upper], [r["N"] for r in upper])
        fit = {"p": p, "c": c, "t_used": [r["t"] for r in upper]}
    final = rows[-1]
    if pred:
        err_ok = final["relative_error"] is not None and abs(final["relative_error"]) <= sc.tolerance
    else:
        err_ok = final["N"] == 0
    fit_ok = fit is None and all(r["N"] == 0 for r in rows) or (
        fit is not None and FIT_RANGE[0] <= fit["p"] <= FIT_RANGE[1])
    j_ok = all(r["j_converged"] in (None, True) for r in rows)
    warnings = exceptional_scan(sc.potential, A, sc.model.B)
    for r in rows:
        warnings.extend(r.pop("warnings"))
    report = {
        "rows": rows,
        "fit": fit,
        "prediction": A.as_dict(),
        "exceptional_warnings": warnings,
        "tolerance": sc.tolerance,
        "checks": {"final_relative_error": err_ok, "fit_exponent": fit_ok,
                   "j_convergence": j_ok,
                   "audit": all(r["audit_ok"] for r in rows)},
    }
    report["pass"] = err_ok and fit_ok
    return report


def cmd_sweep(cfg):
    sc = load_sweep(cfg)
    threads = thread_cap()
    report = run_sweep(sc, threads)
    files = {}
    if "json" in sc.outputs:
        files["report.json"] = render_json(report)
    if "csv" in sc.outputs:
        header = ["t", "N", "N_over_t2", "predicted", "relative_error", "J_used",
                  "j_converged", "audit_ok", "diagonal_only_count"]
        files["sweep.csv"] = render_csv(header, [[r[h] for h in header] for r in report["rows"]])
    if "plotdata" in sc.outputs:
        lines = [f"# t N/t^2 ; predicted constant A = {fmt(report['prediction']['total'])}"]
        lines += [f"{fmt(r['t'])} {fmt(r['N_over_t2'])}" for r in report["rows"]]
        files["sweep.dat"] = "\n".join(lines) + "\n"
    return files, (EXIT_OK if report["pass"] else EXIT_SOFT)


# -- levelset -----------------------------------------------------------------------------

def cmd_levelset(cfg):
    V = load_potential(cfg)
    queries = _require(cfg, "queries", list)
    results = []
    for qd in queries:
        kind = qd.get("type")
        if kind == "between":
            res = levelset.measure_between(V, float(qd["lam"]), float(qd["mu"]))
        elif kind == "sup":
            sign = qd.get("sign", "+")
            res = levelset.sup_measure(V, float(qd["lam"]), -1 if sign in ("-", -1) else 1)
        elif kind == "mass":
            tol = qd.get("tol")
            res = levelset.level_mass(V, float(qd["lam"]), None if tol is None else float(tol))
        else:
            raise ConfigError(f"unknown level-set query type {kind!r}")
        results.append({"query": qd, "value": res.value, "method": res.method,
                        "error_bound": res.error_bound, "exceptional": res.exceptional_flag})
    norms = V.norms()
    report = {"results": results,
              "norms": {"l1": norms.l1, "l2sq": norms.l2sq, "sup": norms.sup}}
    return {"report.json": render_json(report)}, EXIT_OK


# -- selftest ------------------------------------------------------------------------------

def cmd_selftest(cfg):
    from .selftest import run_selftest
    results = run_selftest(int(cfg.get("seed", 0)), bool(cfg.get("quick", False)), thread_cap())
    report = {"properties": [r.as_dict() for r in results],
              "all_pass": all(r.passed for r in results)}
    return {"report.json": render_json(report)}, (EXIT_OK if report["all_pass"] else EXIT_SOFT)


COMMANDS = {
    "predict": cmd_predict,
    "toeplitz": cmd_toeplitz,
    "sweep": cmd_sweep,
    "levelset": cmd_levelset,
    "selftest": cmd_selftest,
}


def build_parser():
    p = argparse.ArgumentParser(prog="landau-spectra",
                                description="Gap eigenvalue counts for expanding potentials "
                                            "in a constant magnetic field.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON configuration file (optional for selftest)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _read_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _read_config(args.config)
        if args.command != "selftest" and not cfg:
            raise ConfigError(f"{args.command} needs --config")
        files, code = COMMANDS[args.command](cfg)
    except (ConfigError, KeyError, TypeError, ValueError) as exc:
        # ValueError covers DomainError, GapViolationError and ShapeError
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LandauSpectraError, ArithmeticError, MemoryError) as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        write_outputs(args.out, files)
    except OSError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return code


if __name__ == "__main__":
    sys.exit(main())
