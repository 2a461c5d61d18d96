"""Command line entry point: every verification pipeline as a subcommand.

Subcommands: eigen, sweep, certify, solve, fermi-demo, report.  Each writes
CSV (or line-record) artifacts into the directory named by the DEGENLAB_OUT
environment variable (default: current directory) and exits 0 when all its
checks pass, 1 when any fails, 2 on usage or configuration errors.

Configuration is a flat key=value text file ('#' comments allowed); command
line overrides come as key=value pairs or --key value flags.  Outputs are
byte deterministic: floats are printed with 12 significant digits, newline
line endings, and the header comments record the tool version, a hash of the
effective configuration, the grid description, and tolerances.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import (OperatorSpec, RhoWeight, assemble, convergence_study,
                       manufactured_problem, solve_linear)
from .certify import (verify_gamma_rectangle, verify_phi_bound,
                      verify_v_inequality, v_minimum)
from .geometry import EmbeddedCurve, build_half_grid, fermi_mu
from .holder import ProblemFamily, epsilon_sweep
from .potentials import v_limit, v_limit_deriv
from .spectral import eigen_stability_sweep, hardy_quotient, trace_eigen
from .weights import WeightFamily


def fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def _config_hash(cfg: dict) -> str:
    blob = "\n".join(f"{k}={cfg[k]}" for k in sorted(cfg)).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _load_config(path: str | None) -> dict:
    cfg: dict = {}
    if not path:
        return cfg
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    for line in p.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"bad config line (expected key=value): {line!r}")
        k, v = line.split("=", 1)
        cfg[k.strip()] = v.strip()
    return cfg


class ConfigError(ValueError):
    pass


def _outdir() -> Path:
    d = Path(os.environ.get("DEGENLAB_OUT", "."))
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write(path: Path, header: list, rows: list, columns: list):
    lines = [f"# degenlab {__version__}"]
    lines += [f"# {h}" for h in header]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _float(tok: str) -> float:
    """Float parser accepting plain literals and fractions like 1/64."""
    if "/" in tok:
        num, den = tok.split("/", 1)
        return float(num) / float(den)
    return float(tok)


def _floats(s: str) -> list:
    return [_float(tok) for tok in s.replace(",", " ").split()]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_eigen(cfg: dict) -> int:
    a_list = _floats(cfg.get("a", "-0.5 0 0.5"))
    h = _float(cfg.get("h", "1/64"))
    eps = _float(cfg.get("eps", "0.0"))
    aux_list = _floats(cfg.get("aux_a", "0.5 -1"))
    r_list = _floats(cfg.get("r_list", "1 4 16 64"))
    sweep_a = _float(cfg.get("sweep_a", "0.5"))
    rows = []
    ok = True
    for a in a_list:
        res = trace_eigen(a, eps, h)
        rows.append(res.csv_row())
        ok &= abs(res.lam - (1.0 - a)) <= 0.05
    for a in aux_list:
        res = trace_eigen(a - 2.0, eps, h)
        rows.append(res.csv_row())
        ok &= abs(res.lam - (3.0 - a)) <= 0.1
    hres = hardy_quotient(None, h)
    rows.append(hres.csv_row())
    ok &= hres.lam >= 0.25                   # conformity bound at every h
    if h <= 1.0 / 64 + 1e-12:
        ok &= hres.lam <= 0.40               # bracketed value at the reference h
    for r, lam in eigen_stability_sweep(sweep_a, r_list, h, form="rho"):
        rows.append((f"lambda_r[a={sweep_a:g}]", sweep_a, r, h, lam, 0.0))
    header = [f"config-hash: {_config_hash(cfg)}",
              f"grid: half-disk polar mesh, h={fmt(h)}",
              "tolerances: trace 0.05, auxiliary 0.1, hardy [0.25,0.40]"]
    _write(_outdir() / "eigen.csv", header, rows,
           ["quotient_id", "a", "eps_or_r", "h", "lambda", "residual"])
    return 0 if ok else 1


def _family_from_cfg(cfg: dict) -> ProblemFamily:
    a = _float(cfg.get("a", "0.5"))
    mu_kind = cfg.get("mu", "const")
    if mu_kind == "const":
        mu_inv = None
        mu_inv_dx = None
    elif mu_kind.startswith("quadratic"):
        c = float(mu_kind.split(":")[1]) if ":" in mu_kind else 0.1

        def mu_inv(x, y, c=c):
            return 1.0 / (1.0 + c * x * x)

        def mu_inv_dx(x, y, c=c):
            return -2.0 * c * x / (1.0 + c * x * x) ** 2
    else:
        raise ConfigError(f"unknown mu kind {mu_kind!r}")
    b = 1.0 - a

    def f(x, y, b=b):
        return (y ** b) * math.cos(math.pi * x)

    def trace_factor(x, y):
        return math.cos(math.pi * x / 2.0) * (1.0 + 0.5 * y * y)

    return ProblemFamily(a=a, f=f, trace_factor=trace_factor,
                         mu_inverse=mu_inv, mu_inverse_dx=mu_inv_dx,
                         name=f"a={a:g},mu={mu_kind}")


def cmd_sweep(cfg: dict) -> int:
    family = _family_from_cfg(cfg)
    eps_list = _floats(cfg.get("eps_list", "1 0.3 0.1 0.03 0.01 0"))
    alpha = _float(cfg.get("alpha", "0.4"))
    h = _float(cfg.get("h", "1/64"))
    mode = cfg.get("mode", "ratio_c0")
    rep = epsilon_sweep(family, eps_list, alpha, mode=mode, grid_h=h)
    rows = [(e, s, sup) for e, s, sup, _ in rep.per_eps]
    header = [f"config-hash: {_config_hash(cfg)}",
              f"grid: half-rectangle cell-centered, h={fmt(h)}",
              f"family: {rep.family} mode={mode} alpha={fmt(alpha)}",
              f"tolerances: tau={fmt(rep.tau)} slope_tol={fmt(rep.slope_tol)}"]
    _write(_outdir() / "sweep.csv", header, rows, ["eps", "seminorm", "sup_norm"])
    (_outdir() / "sweep_verdict.txt").write_text(rep.verdict() + "\n")
    plot_rows = [(e if e > 0 else min(x for x in eps_list if x > 0) / 10.0, s)
                 for e, s, _ in rows]
    _write(_outdir() / "sweep_plot.dat", ["two-column plot data: eps seminorm"],
           plot_rows, ["eps", "seminorm"])
    return 0 if rep.passed else 1


def cmd_certify(cfg: dict) -> int:
    budget = int(cfg.get("budget", 200_000))
    a_samples = _floats(cfg.get("phi_a", "0.9 0.5 0 -1 -3 -10"))
    lines = [f"# degenlab {__version__}",
             f"# config-hash: {_config_hash(cfg)}",
             "# certificates: target_id domain bound threshold pass status"]
    ok = True
    for rep in verify_phi_bound(a_samples, budget=budget):
        lines.append(rep.record())
        ok &= rep.passed
    rep = verify_v_inequality(budget=budget // 2)
    lines.append(rep.record())
    ok &= rep.passed
    t_star, vmin = v_minimum()
    lines.append(f"v_minimum t={fmt(t_star)} value={fmt(vmin)}")
    lines.append(f"v_at_5.1 value={fmt(v_limit(5.1))}")
    lines.append(f"v_prime_at_5.1 value={fmt(v_limit_deriv(5.1))}")
    repv = verify_gamma_rectangle(budget=budget, form="v_bound")
    lines.append(repv.record())
    ok &= repv.passed
    repw = verify_gamma_rectangle(budget=budget, form="exact")
    lines.append(repw.record())
    ok &= repw.passed
    (_outdir() / "certify.txt").write_text("\n".join(lines) + "\n")
    return 0 if ok else 1


def cmd_solve(cfg: dict) -> int:
    a = _float(cfg.get("a", "0.5"))
    h_list = _floats(cfg.get("h_list", "0.0625 0.03125 0.015625"))
    b = 1.0 - a

    def u_exact(x, y):
        return math.copysign(abs(y) ** b, y) * (1.0 - x * x)

    def factory(h):
        grid = build_half_grid(1, "half_rectangle", h)
        fam = WeightFamily(a, 0.0)
        op = assemble(grid, RhoWeight(fam), OperatorSpec(), parity="odd")
        rhs, exact = manufactured_problem(u_exact, op, mode="discrete")
        return op, rhs, exact

    rows = convergence_study(factory, h_list)
    ok = all(err <= 1e-8 for _, err, _ in rows)   # discrete mode recovers exactly
    header = [f"config-hash: {_config_hash(cfg)}",
              f"manufactured odd problem, a={fmt(a)}, discrete consistency mode",
              "tolerances: recovery at solver tolerance"]
    _write(_outdir() / "solve_orders.csv", header,
           [(h, e, o if isinstance(o, str) else fmt(o)) for h, e, o in rows],
           ["h", "max_error", "order"])
    grid = build_half_grid(1, "half_rectangle", h_list[-1])
    fam = WeightFamily(a, 0.0)
    op = assemble(grid, RhoWeight(fam), OperatorSpec(), parity="odd")
    rhs, exact = manufactured_problem(u_exact, op, mode="discrete")
    rep = solve_linear(op, rhs)
    frows = [(p[0], p[1], v) for p, v in zip(grid.centers, rep.field.values)]
    _write(_outdir() / "solve_field.csv",
           [f"config-hash: {_config_hash(cfg)}", f"grid: {grid.describe()}",
            f"tolerances: solver relative residual {fmt(rep.tolerance)}"],
           frows, ["x", "y", "value"])
    return 0 if ok else 1


def cmd_fermi_demo(cfg: dict) -> int:
    a = _float(cfg.get("a", "0.5"))
    radius = _float(cfg.get("radius", "2.0"))
    h = _float(cfg.get("h", "1/32"))
    alpha = _float(cfg.get("alpha", "0.4"))
    eps_list = _floats(cfg.get("eps_list", "1 0.1 0.01 0"))
    curve = EmbeddedCurve.circle(radius, arc=2.0, theta0=-0.5)
    # 1) metric factor against the finite-difference Jacobian of the chart map
    step = 1e-5
    rows_mu = []
    worst = 0.0
    for t in np.linspace(0.05, 0.95, 7):
        for y in (0.0, 0.25, 0.5):
            mu = fermi_mu(curve, float(t), float(y))
            zp = curve.point(float(t) + step, float(y))
            zm = curve.point(float(t) - step, float(y))
            jac = float(np.linalg.norm(zp - zm) / (2 * step))
            worst = max(worst, abs(mu - jac))
            rows_mu.append((float(t), float(y), mu, jac, abs(mu - jac)))
    ok = worst <= 1e-6
    _write(_outdir() / "fermi_mu_check.csv",
           [f"config-hash: {_config_hash(cfg)}",
            f"circle radius {fmt(radius)}, tolerance 1e-6"],
           rows_mu, ["t", "y", "mu", "jacobian_fd", "abs_diff"])

    # 2) quotient tables in the straightened chart (mu = speed * (1 - y k))
    speed = 2.0
    kap = 1.0 / radius

    def mu_inv(x, y):
        return 1.0 / (speed * (1.0 - y * kap))

    def mu_inv_dx(x, y):
        return 0.0

    b = 1.0 - a

    def f(x, y):
        return (y ** b) * math.cos(math.pi * x)

    def trace_factor(x, y):
        return math.cos(math.pi * x / 2.0) * (1.0 + 0.5 * y * y)

    family = ProblemFamily(a=a, f=f, trace_factor=trace_factor,
                           mu_inverse=mu_inv, mu_inverse_dx=mu_inv_dx,
                           name=f"fermi-circle[R={radius:g},a={a:g}]")
    rep_c0 = epsilon_sweep(family, eps_list, alpha, mode="ratio_c0", grid_h=h)
    rep_c1r = epsilon_sweep(family, eps_list, alpha, mode="ratio_c1", grid_h=h,
                            restricted="sqrt_eps")
    rep_c1u = epsilon_sweep(family, eps_list, alpha, mode="ratio_c1", grid_h=h)
    for name, rep in (("fermi_c0.csv", rep_c0),
                      ("fermi_c1_restricted.csv", rep_c1r),
                      ("fermi_c1_unrestricted.csv", rep_c1u)):
        _write(_outdir() / name,
               [f"config-hash: {_config_hash(cfg)}",
                f"grid: half-rectangle cell-centered, h={fmt(h)}",
                rep.verdict().splitlines()[0],
                f"restricted: {rep.restricted}",
                f"tolerances: tau={fmt(rep.tau)} slope_tol={fmt(rep.slope_tol)}"],
               [(e, s, sup) for e, s, sup, _ in rep.per_eps],
               ["eps", "seminorm", "sup_norm"])
    ok &= rep_c0.passed and rep_c1r.passed   # unrestricted table is reported, not judged
    return 0 if ok else 1


def cmd_report(cfg: dict) -> int:
    out = _outdir()
    checks = []
    for name in ("eigen.csv", "sweep.csv", "certify.txt", "solve_orders.csv",
                 "fermi_mu_check.csv"):
        p = out / name
        checks.append((name, "present" if p.exists() else "missing"))
    all_present = all(v == "present" for _, v in checks)
    fails = []
    cert = out / "certify.txt"
    if cert.exists():
        for line in cert.read_text().splitlines():
            if "pass=no" in line:
                fails.append(line.split()[0])
    verdict = out / "sweep_verdict.txt"
    if verdict.exists() and "FAIL" in verdict.read_text():
        fails.append("sweep")
    rows = checks + [("failed_targets", ";".join(fails) if fails else "none")]
    _write(out / "summary.csv", [f"config-hash: {_config_hash(cfg)}"],
           rows, ["artifact", "status"])
    return 0 if (all_present and not fails) else 1


COMMANDS = {
    "eigen": cmd_eigen,
    "sweep": cmd_sweep,
    "certify": cmd_certify,
    "solve": cmd_solve,
    "fermi-demo": cmd_fermi_demo,
    "report": cmd_report,
}


def run(argv) -> int:
    parser = argparse.ArgumentParser(
        prog="degenlab",
        description="verification pipelines for degenerate/singular elliptic weights")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", default=None, help="flat key=value file")
    parser.add_argument("overrides", nargs="*",
                        help="key=value pairs (or --key value flags) applied after "
                             "the config file")
    # pull --key value flag pairs out before argparse sees them
    kept: list = []
    flag_overrides: list = []
    i = 0
    argv = list(argv)
    while i < len(argv):
        tok = argv[i]
        if tok.startswith("--") and tok != "--config" and "=" not in tok \
                and i + 1 < len(argv):
            flag_overrides.append(f"{tok[2:]}={argv[i + 1]}")
            i += 2
        elif tok.startswith("--") and tok != "--config" and "=" in tok:
            flag_overrides.append(tok[2:])
            i += 1
        else:
            kept.append(tok)
            i += 1
    try:
        ns = parser.parse_args(kept)
    except SystemExit as e:
        return 2 if e.code not in (0,) else 0
    try:
        cfg = _load_config(ns.config)
        for tok in list(ns.overrides) + flag_overrides:
            if "=" not in tok:
                raise ConfigError(f"override must be key=value or --key value: {tok!r}")
            k, v = tok.split("=", 1)
            cfg[k.strip()] = v.strip()
        return COMMANDS[ns.command](cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except Exception as e:                      # failed checks exit 1, crashes too
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
