"""Command-line driver: ``qsdlab <command> [options]``.

Commands
--------
specfun-check   special functions on a probe set against a decimal oracle
kummer dump     hitting density/survival, transition density and spectral atoms
qsd table       density and CDF of a quasi-stationary distribution
evolve doa      domain-of-attraction run (JSON report plus CSV series)
mc validate     Monte Carlo hitting times against the closed-form CDF
verify-all      the full acceptance suite

Options may also come from a TOML file given with ``--config``; flags win
over the file, which wins over the built-in defaults.  The file uses one
table per command (``[qsd]``, ``[evolve]``, ``[mc]``, ``[kummer]``,
``[specfun-check]``, ``[verify-all]``) with keys named like the long
flags (dashes or underscores).

Exit codes: 0 success, 1 numerical failure, 2 bad arguments, 3 acceptance
failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from .errors import DomainError, QsdLabError

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE, EXIT_ACCEPT = 0, 1, 2, 3

DOA_DEFAULTS = {
    1: {"alpha": 1.0, "beta": 0.0, "gamma": 1.0, "delta": 1.0},
    2: {"alpha": 1.0, "beta": 1.0, "gamma": 0.0, "delta": 0.5},
    3: {"alpha": 1.0, "beta": -1.0, "gamma": 0.5, "delta": 0.25},
}

DEFAULTS = {
    "specfun-check": {"out": "specfun.csv"},
    "kummer": {"alpha": 1.0, "beta": 1.0, "gamma": 0.0, "x": 1.0, "t": 1.0, "t_max": 10.0,
               "n": 200, "n_atoms": 20, "out": "kummer"},
    "qsd": {"alpha": 1.0, "beta": 1.0, "gamma": 0.0, "lambda_": None, "n": 200, "x_min": 0.01,
            "x_max": None, "out": "qsd.csv"},
    "evolve": {"case": 2, "alpha": None, "beta": None, "gamma": None, "delta": None, "tmax": 40.0,
               "tmin": 0.5, "n_times": 12, "slowly": "one", "s_probe": 1.0, "out": "report.json"},
    "mc": {"alpha": 1.0, "beta": 0.0, "gamma": 0.0, "x0": 1.0, "n": 10_000, "dt": 1e-3,
           "seed": 12345, "t_max": 20.0, "halve_dt": False, "n_points": 200, "out": "mc.csv"},
    "verify-all": {"only": None, "out": None},
}


class UsageError(Exception):
    """Bad arguments detected after parsing (exit code 2)."""


class NumericalFailure(Exception):
    def __init__(self, where, exc):
        super().__init__(f"{where}: {type(exc).__name__}: {exc}")
        self.where = where


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def write_atomic(path, text):
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    path = os.path.abspath(path)
    d = os.path.dirname(path)
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _stem(path, suffix):
    root, _ = os.path.splitext(path)
    return root + suffix


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def load_config(path):
    try:
        import tomllib
    except ImportError:  # Python < 3.11
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"invalid TOML in {path}: {exc}") from exc
    return data


def resolve(args, command, file_cfg):
    """Merge flags over the file section over the defaults for ``command``."""
    defaults = DEFAULTS[command]
    section = {k.replace("-", "_"): v for k, v in file_cfg.get(command, {}).items()}
    if "lambda" in section:
        section["lambda_"] = section.pop("lambda")
    unknown = set(section) - set(defaults)
    if unknown:
        raise UsageError(f"unknown keys in [{command}] config: {', '.join(sorted(unknown))}")
    out = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        out[key] = flag if flag is not None else section.get(key, default)
    return argparse.Namespace(**out)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="qsdlab", description="Quasi-stationary distributions of Kummer diffusions.")
    p.add_argument("--config", help="TOML file with per-command defaults")
    p.add_argument("--threads", type=int, help="thread cap (sets QSDLAB_THREADS)")
    p.add_argument("-q", "--quiet", action="store_true", help="suppress the summary line")
    sub = p.add_subparsers(dest="command", metavar="command")
    sub.required = True

    def params(sp):
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--beta", type=float)
        sp.add_argument("--gamma", type=float)

    sp = sub.add_parser("specfun-check", help="probe set against the decimal series oracle")
    sp.add_argument("--out", help="CSV path (function, params, value, oracle, relerr)")

    sk = sub.add_parser("kummer", help="closed-form tables")
    kd = sk.add_subparsers(dest="action", metavar="action")
    kd.required = True
    d = kd.add_parser("dump", help="hitting law, transition density and spectral atoms")
    params(d)
    d.add_argument("--x", type=float, help="starting point")
    d.add_argument("--t", type=float, help="time of the transition-density slice")
    d.add_argument("--t-max", dest="t_max", type=float)
    d.add_argument("--n", type=int, help="points per table")
    d.add_argument("--n-atoms", dest="n_atoms", type=int)
    d.add_argument("--out", help="path prefix for the three CSV files")

    sq = sub.add_parser("qsd", help="quasi-stationary distributions")
    qd = sq.add_subparsers(dest="action", metavar="action")
    qd.required = True
    t = qd.add_parser("table", help="density and CDF on a log grid")
    params(t)
    t.add_argument("--lambda", dest="lambda_", type=float, help="0 < lambda <= lambda0 (default lambda0)")
    t.add_argument("--n", type=int)
    t.add_argument("--x-min", dest="x_min", type=float)
    t.add_argument("--x-max", dest="x_max", type=float)
    t.add_argument("--out")

    se = sub.add_parser("evolve", help="conditioned evolution")
    ed = se.add_subparsers(dest="action", metavar="action")
    ed.required = True
    r = ed.add_parser("doa", help="domain-of-attraction experiment")
    r.add_argument("--case", type=int, choices=(1, 2, 3))
    params(r)
    r.add_argument("--delta", type=float)
    r.add_argument("--tmax", type=float)
    r.add_argument("--tmin", type=float)
    r.add_argument("--n-times", dest="n_times", type=int)
    r.add_argument("--slowly", choices=("one", "log"), help="slowly varying factor of the tail")
    r.add_argument("--s-probe", dest="s_probe", type=float)
    r.add_argument("--out", help="JSON report; the CSV series goes next to it")

    sm = sub.add_parser("mc", help="Monte Carlo")
    md = sm.add_subparsers(dest="action", metavar="action")
    md.required = True
    v = md.add_parser("validate", help="simulated hitting times against the closed form")
    params(v)
    v.add_argument("--x0", type=float)
    v.add_argument("--n", type=int, help="number of paths")
    v.add_argument("--dt", type=float)
    v.add_argument("--seed", type=int)
    v.add_argument("--t-max", dest="t_max", type=float)
    v.add_argument("--halve-dt", dest="halve_dt", action="store_const", const=True)
    v.add_argument("--n-points", dest="n_points", type=int)
    v.add_argument("--out", help="CSV path; the summary JSON goes next to it")

    va = sub.add_parser("verify-all", help="run the acceptance suite")
    va.add_argument("--only", help="comma-separated check numbers")
    va.add_argument("--out", help="optional JSON file with all results")
    return p


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _params(cfg):
    from .kummer import KummerParams
    try:
        return KummerParams(cfg.alpha, cfg.beta, cfg.gamma)
    except DomainError as exc:
        raise UsageError(str(exc)) from exc


def _guard(where, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except (QsdLabError, ArithmeticError, ValueError) as exc:
        raise NumericalFailure(where, exc) from exc


def cmd_specfun_check(cfg):
    from . import acceptance, specfun
    rows = []
    for nu, x in acceptance.BESSEL_PROBES:
        val = _guard("specfun.bessel_i", specfun.bessel_i, nu, x).value
        ref = acceptance._oracle_bessel_i(nu, x)
        rows.append(("bessel_i", f"nu={nu:g};x={x:g}", val, ref, abs(val / ref - 1.0)))
    for a, b, x in acceptance.KUMMER_PROBES:
        val = _guard("specfun.kummer_m", specfun.kummer_m, a, b, x).value
        ref = acceptance._oracle_kummer_m(a, b, x)
        rows.append(("kummer_m", f"a={a:g};b={b:g};x={x:g}", val, ref, abs(val - ref) / abs(ref)))
    for a in (0.5, 1.0, 2.0, 5.0):
        for x in (0.01, 1.0, 50.0):
            val = _guard("specfun.tricomi_u", specfun.tricomi_u, a, a + 1.0, x).value
            ref = x ** -a
            rows.append(("tricomi_u", f"a={a:g};b={a + 1:g};x={x:g}", val, ref, abs(val / ref - 1.0)))
    write_atomic(cfg.out, csv_text(("function", "params", "value", "oracle", "relerr"), rows))
    worst = max(r[4] for r in rows)
    ok = worst < 1e-9
    return (EXIT_OK if ok else EXIT_ACCEPT), \
        f"specfun-check: {len(rows)} probes, max relerr {worst:.2e} ({'PASS' if ok else 'FAIL'}) -> {cfg.out}"


def cmd_kummer_dump(cfg):
    from . import kummer
    p = _params(cfg)
    if not (cfg.x > 0 and cfg.t > 0 and cfg.t_max > 0 and cfg.n >= 2):
        raise UsageError("x, t and t-max must be positive and n >= 2")
    ts = np.geomspace(cfg.t_max * 1e-3, cfg.t_max, cfg.n)
    f = _guard("kummer.hitting_density", kummer.hitting_density, p, cfg.x, ts)
    s = [_guard("kummer.survival", kummer.survival, p, cfg.x, t) for t in ts]
    ys = np.geomspace(cfg.x * 1e-3, cfg.x * 1e2, cfg.n)
    dens = _guard("kummer.transition_density", kummer.transition_density, p, cfg.t, cfg.x, ys)
    spec = kummer.spectral_measure(p, n_atoms=max(cfg.n_atoms, 1))
    prefix = cfg.out
    write_atomic(prefix + "_hitting.csv", csv_text(("t", "density", "survival"), zip(ts, f, s)))
    write_atomic(prefix + "_transition.csv", csv_text(("y", "density"), zip(ys, dens)))
    atoms = [(i, loc, m) for i, (loc, m) in enumerate(spec.atoms[:cfg.n_atoms])]
    write_atomic(prefix + "_atoms.csv", csv_text(("n", "location", "mass"), atoms))
    return EXIT_OK, (f"kummer dump {p} {p.case.value}: lambda0 {kummer.lambda0_closed(p):g}, "
                     f"{len(atoms)} atoms -> {prefix}_{{hitting,transition,atoms}}.csv")


def cmd_qsd_table(cfg):
    from . import kummer, qsd
    p = _params(cfg)
    if not p.case.has_qsd_family:
        raise UsageError(f"{p.case.value} has no quasi-stationary distribution family")
    lam0 = kummer.lambda0_closed(p)
    lam = lam0 if cfg.lambda_ is None else cfg.lambda_
    if not 0 < lam <= lam0:
        raise UsageError(f"lambda must lie in (0, {lam0:g}]")
    q = _guard("qsd.make_qsd", qsd.make_qsd, p, lam)
    x_max = cfg.x_max if cfg.x_max is not None else q.x_tail
    if not (0 < cfg.x_min < x_max and cfg.n >= 2):
        raise UsageError("need 0 < x-min < x-max and n >= 2")
    x = np.geomspace(cfg.x_min, x_max, cfg.n)
    dens = _guard("qsd.density", q.density, x)
    cdf = _guard("qsd.qsd_cdf", qsd.qsd_cdf, q, x)
    write_atomic(cfg.out, csv_text(("x", "density", "cdf"), zip(x, dens, cdf)))
    return EXIT_OK, f"qsd table {p} lambda={lam:g}: mass {q.normalization:.9f}, {cfg.n} rows -> {cfg.out}"


def cmd_evolve_doa(cfg):
    from . import evolve
    from .kummer import CaseLabel
    base = DOA_DEFAULTS[cfg.case]
    for key in ("alpha", "beta", "gamma", "delta"):
        if getattr(cfg, key) is None:
            setattr(cfg, key, base[key])
    p = _params(cfg)
    wanted = {1: CaseLabel.CASE1, 2: CaseLabel.CASE2, 3: CaseLabel.CASE3}[cfg.case]
    if p.case is not wanted:
        raise UsageError(f"--case {cfg.case} needs {wanted.value} parameters, got {p.case.value}")
    if not 0 < cfg.tmin < cfg.tmax or cfg.n_times < 2:
        raise UsageError("need 0 < tmin < tmax and n-times >= 2")
    try:
        init = evolve.initial_for_case(p, cfg.delta, cfg.slowly)
    except DomainError as exc:
        raise UsageError(str(exc)) from exc
    t_grid = np.geomspace(cfg.tmin, cfg.tmax, cfg.n_times)
    rep = _guard("evolve.doa_experiment", evolve.doa_experiment, p, init, t_grid, cfg.s_probe)
    coh = evolve.coherence_check(rep)
    doc = _jsonable(rep.to_dict())
    doc["coherence"] = _jsonable(coh)
    write_atomic(cfg.out, json.dumps(doc, indent=2) + "\n")
    csv_path = _stem(cfg.out, ".csv")
    write_atomic(csv_path, csv_text(("t", "ks", "tail_ratio_err"), rep.rows()))
    return EXIT_OK, (f"evolve doa case {cfg.case} {p} delta={cfg.delta:g}: predicted {rep.predicted_lambda:.6g}, "
                     f"measured {rep.measured_lambda:.6g}, final KS {rep.ks_to_target[-1]:.3e} -> {cfg.out}")


def cmd_mc_validate(cfg):
    from . import montecarlo
    p = _params(cfg)
    try:
        sim = montecarlo.SimConfig(dt=cfg.dt, n_paths=cfg.n, seed=cfg.seed, x0=cfg.x0, t_max=cfg.t_max)
    except DomainError as exc:
        raise UsageError(str(exc)) from exc
    sample = _guard("montecarlo.simulate_hitting", montecarlo.simulate_hitting, p, sim)
    ks = _guard("montecarlo.empirical_vs_closed", montecarlo.empirical_vs_closed, p, sample)
    summary = {"ks": ks, "band": montecarlo.kolmogorov_band(max(sample.times.size, 1)),
               "censored": sample.censored, "absorbed": int(sample.times.size), "n": cfg.n, "dt": cfg.dt,
               "seed": cfg.seed, "x0": cfg.x0, "t_max": cfg.t_max, "params": str(p)}
    if cfg.halve_dt:
        half = montecarlo.SimConfig(dt=cfg.dt / 2, n_paths=cfg.n, seed=cfg.seed, x0=cfg.x0, t_max=cfg.t_max)
        s2 = _guard("montecarlo.simulate_hitting", montecarlo.simulate_hitting, p, half)
        summary["ks_half"] = montecarlo.empirical_vs_closed(p, s2)
        summary["shift"] = abs(summary["ks_half"] - ks)
    rows = montecarlo.ecdf_table(p, sample, cfg.n_points)
    write_atomic(cfg.out, csv_text(("t", "empirical_cdf", "closed_cdf"), rows))
    write_atomic(_stem(cfg.out, ".json"), json.dumps(_jsonable(summary), indent=2) + "\n")
    return EXIT_OK, (f"mc validate {p} x0={cfg.x0:g} n={cfg.n} dt={cfg.dt:g}: KS {ks:.4f}, "
                     f"censored {sample.censored} -> {cfg.out}")


def cmd_verify_all(cfg, echo):
    from . import acceptance
    only = None
    if cfg.only:
        try:
            only = {int(v) for v in str(cfg.only).split(",") if v.strip()}
        except ValueError as exc:
            raise UsageError(f"--only expects comma-separated integers, got {cfg.only!r}") from exc
        if not only <= set(range(1, 11)):
            raise UsageError("check numbers run from 1 to 10")
    results = acceptance.run_all(only, echo=echo)
    if cfg.out:
        doc = [{"number": r.number, "name": r.name, "passed": r.passed, "summary": r.summary,
                "seconds": r.seconds, "details": _jsonable(r.details)} for r in results]
        write_atomic(cfg.out, json.dumps(doc, indent=2) + "\n")
    failed = [r.number for r in results if not r.passed]
    msg = f"verify-all: {len(results) - len(failed)}/{len(results)} passed"
    if failed:
        msg += f", failed {failed}"
    return (EXIT_ACCEPT if failed else EXIT_OK), msg


COMMANDS = {
    ("specfun-check", None): ("specfun-check", cmd_specfun_check),
    ("kummer", "dump"): ("kummer", cmd_kummer_dump),
    ("qsd", "table"): ("qsd", cmd_qsd_table),
    ("evolve", "doa"): ("evolve", cmd_evolve_doa),
    ("mc", "validate"): ("mc", cmd_mc_validate),
    ("verify-all", None): ("verify-all", None),
}


def run(argv=None, stdout=None, stderr=None):
    """Parse ``argv``, run the command and return the exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse prints usage itself
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.threads is not None:
        if args.threads < 1:
            parser.print_usage(stderr)
            print("qsdlab: error: --threads must be >= 1", file=stderr)
            return EXIT_USAGE
        os.environ["QSDLAB_THREADS"] = str(args.threads)
    key = (args.command, getattr(args, "action", None))
    section, fn = COMMANDS[key]
    try:
        file_cfg = load_config(args.config) if args.config else {}
        cfg = resolve(args, section, file_cfg)
        if fn is None:
            code, msg = cmd_verify_all(cfg, echo=None if args.quiet else (lambda s: print(s, file=stdout)))
        else:
            code, msg = fn(cfg)
    except UsageError as exc:
        parser.print_usage(stderr)
        print(f"qsdlab: error: {exc}", file=stderr)
        return EXIT_USAGE
    except NumericalFailure as exc:
        print(f"qsdlab: numerical failure in {exc}", file=stderr)
        return EXIT_NUMERIC
    if not args.quiet:
        print(msg, file=stdout)
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
