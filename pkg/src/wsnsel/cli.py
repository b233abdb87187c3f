"""Command-line front end: gen | solve | verify | simulate | mc | report.

Exit codes: 0 success/pass, 1 verification failure, 2 infeasible,
3 I/O or parse error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from .metrics import MCConfig, aggregates_to_csv, monte_carlo, rows_to_csv
from .model import GenConfig, ReliabilityParams, Scenario, generate_scenario
from .selection import SelectConfig, SelectionInfeasible, Solution, linksel, ssls, ssrls
from .simulate import SimConfig, simulate_routing
from .solver import NumericalBreakdown
from .svgplot import bar_chart, network_plot
from .verify import verify_all

EXIT_OK, EXIT_VERIFY, EXIT_INFEASIBLE, EXIT_IO, EXIT_NUMERICAL = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; remap to the I/O-or-parse code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_IO)


def _build_parser() -> _Parser:
    p = _Parser(prog="wsnsel", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="generate a random scenario", parents=[])
    g.add_argument("--J", type=int, default=30)
    g.add_argument("--K", type=int, default=1)
    g.add_argument("--m", type=int, default=2)
    g.add_argument("--rbar", type=float, default=0.4)
    g.add_argument("--snr-db", type=float, default=0.0)
    g.add_argument("--side", type=float, default=5.0)
    g.add_argument("--d", type=float, default=1.74)
    g.add_argument("--beta", type=float, default=2.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="scenario.json")

    so = sub.add_parser("solve", help="run a selection method")
    so.add_argument("--scenario", required=True)
    so.add_argument("--method", choices=("ssls", "ssrls", "linksel"), default="ssls")
    so.add_argument("--gamma", type=float, default=0.5)
    so.add_argument("--alpha1", type=float, default=1.0)
    so.add_argument("--alpha2", type=float, default=1.0)
    so.add_argument("--alpha3", type=float, default=1.0)
    so.add_argument("--alpha", type=float, default=1.0)
    so.add_argument("--r0", type=float, default=0.2)
    so.add_argument("--iters", type=int, default=30)
    so.add_argument("--eps", type=float, default=1e-3)
    so.add_argument("--delta", type=float, default=2e-4)
    so.add_argument("--out", default="solution.json")

    v = sub.add_parser("verify", help="check a solution against its scenario")
    v.add_argument("--scenario", required=True)
    v.add_argument("--solution", required=True)
    v.add_argument("--tol", type=float, default=1e-6)
    v.add_argument("--gamma", type=float, default=0.5)
    v.add_argument("--r0", type=float, default=0.2)
    v.add_argument("--out", default=None)

    si = sub.add_parser("simulate", help="slotted-time routing simulation")
    si.add_argument("--scenario", required=True)
    si.add_argument("--solution", required=True)
    si.add_argument("--horizon", type=int, default=20000)
    si.add_argument("--drain", type=int, default=5000)
    si.add_argument("--seed", type=int, default=0)
    si.add_argument("--noiseless", action="store_true")
    si.add_argument("--theta", type=float, nargs="+", default=None)
    si.add_argument("--trace", default=None)
    si.add_argument("--out", default="sim.json")

    m = sub.add_parser("mc", help="seeded Monte Carlo over scenario cells")
    m.add_argument(
        "--cells",
        default="30,1,2,0.4,ssls",
        help="semicolon-separated J,K,m,rbar,method tuples",
    )
    m.add_argument("--trials", type=int, default=10)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", default="metrics.csv")
    m.add_argument("--agg-out", default=None)

    r = sub.add_parser("report", help="tidy CSV + SVG charts from metric CSVs")
    r.add_argument("--metrics", default=None)
    r.add_argument("--scenario", default=None)
    r.add_argument("--solution", default=None)
    r.add_argument("--out-dir", default="report")
    return p


def _cmd_gen(a) -> int:
    cfg = GenConfig(
        J=a.J, K=a.K, m=a.m, rbar=a.rbar, snr_db=a.snr_db, area_side=a.side,
        seed=a.seed, reliability=ReliabilityParams(d=a.d, beta=a.beta),
    )
    Path(a.out).write_text(generate_scenario(cfg).to_json())
    print(f"wrote {a.out} (J={a.J}, K={a.K}, m={a.m}, rbar={a.rbar}, seed={a.seed})")
    return EXIT_OK


def _cmd_solve(a) -> int:
    s = Scenario.from_json(Path(a.scenario).read_text())
    cfg = SelectConfig(
        gamma=a.gamma, alpha1=a.alpha1, alpha2=a.alpha2, alpha3=a.alpha3,
        alpha=a.alpha, r0=a.r0, iters=a.iters, eps=a.eps, delta=a.delta,
    )
    method = {"ssls": ssls, "ssrls": ssrls, "linksel": linksel}[a.method]
    try:
        sol = method(s, cfg)
    except SelectionInfeasible as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    Path(a.out).write_text(sol.to_json(cfg))
    n_sens = len(sol.active_sensors())
    n_links = int(np.sum(sol.T > 0))
    n_relays = (
        int(np.sum((sol.nu == 1) & (sol.r == 0))) if sol.nu is not None else 0
    )
    obj = sol.trace[-1]["objective"] if sol.trace else float("nan")
    print(
        f"{a.method}: {n_sens} active sensors, {n_relays} relays, "
        f"{n_links} links, objective {obj:.6g} -> {a.out}"
    )
    return EXIT_OK


def _cmd_verify(a) -> int:
    s = Scenario.from_json(Path(a.scenario).read_text())
    sol = Solution.from_json(Path(a.solution).read_text())
    rep = verify_all(s, sol, SelectConfig(gamma=a.gamma, r0=a.r0), tol=a.tol)
    text = rep.to_json()
    if a.out:
        Path(a.out).write_text(text)
    print(text)
    if rep.overall:
        return EXIT_OK
    print("failed checks: " + ", ".join(rep.failures()), file=sys.stderr)
    return EXIT_VERIFY


def _cmd_simulate(a) -> int:
    s = Scenario.from_json(Path(a.scenario).read_text())
    sol = Solution.from_json(Path(a.solution).read_text())
    cfg = SimConfig(
        horizon=a.horizon, drain=a.drain, seed=a.seed, noiseless=a.noiseless,
        theta=a.theta,
    )
    if a.trace:
        with open(a.trace, "w") as fh:
            rep = simulate_routing(s, sol, cfg, trace_file=fh)
    else:
        rep = simulate_routing(s, sol, cfg)
    Path(a.out).write_text(rep.to_json())
    print(
        f"delivery_ratio {rep.delivery_ratio:.4f} "
        f"({rep.delivered}/{rep.generated}) -> {a.out}"
    )
    return EXIT_OK


def _parse_cells(text: str):
    cells = []
    for part in text.split(";"):
        f = part.split(",")
        if len(f) != 5:
            raise ValueError(f"bad cell {part!r}; need J,K,m,rbar,method")
        cells.append((int(f[0]), int(f[1]), int(f[2]), float(f[3]), f[4]))
    return cells


def _cmd_mc(a) -> int:
    mc = MCConfig(cells=_parse_cells(a.cells), trials=a.trials, master_seed=a.seed)
    rows, agg = monte_carlo(mc)
    Path(a.out).write_text(rows_to_csv(rows))
    if a.agg_out:
        Path(a.agg_out).write_text(aggregates_to_csv(agg))
    flagged = sum(r.status != "ok" for r in rows)
    print(f"wrote {len(rows)} rows to {a.out} ({flagged} flagged)")
    return EXIT_OK


_REPORT_METRICS = ("P_trr", "P_alp", "pct_sensors", "pct_links", "pct_relays")


def _cmd_report(a) -> int:
    out = Path(a.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    wrote = []
    if a.metrics:
        with open(a.metrics, newline="") as fh:
            rows = list(csv.DictReader(fh))
        cells = {}
        for row in rows:
            if row["status"] != "ok":
                continue
            key = (int(row["J"]), float(row["rbar"]), row["method"])
            cells.setdefault(key, []).append(row)
        tidy = io.StringIO()
        tidy.write("metric,J,rbar,method,mean,std,n\n")
        for metric in _REPORT_METRICS:
            labels, values = [], []
            for key in sorted(cells):
                vals = np.array([float(r[metric]) for r in cells[key]])
                J, rbar, method = key
                std = vals.std(ddof=1) if len(vals) > 1 else 0.0
                tidy.write(
                    f"{metric},{J},{rbar:.10g},{method},"
                    f"{vals.mean():.10g},{std:.10g},{len(vals)}\n"
                )
                labels.append(f"J={J} rbar={rbar:g} {method}")
                values.append(float(vals.mean()))
            svg = bar_chart(labels, values, metric)
            (out / f"{metric}.svg").write_text(svg)
            wrote.append(f"{metric}.svg")
        (out / "tidy.csv").write_text(tidy.getvalue())
        wrote.append("tidy.csv")
    if a.scenario and a.solution:
        s = Scenario.from_json(Path(a.scenario).read_text())
        sol = Solution.from_json(Path(a.solution).read_text())
        (out / "network.svg").write_text(network_plot(s, sol))
        wrote.append("network.svg")
    if not wrote:
        print("nothing to do: pass --metrics and/or --scenario+--solution",
              file=sys.stderr)
        return EXIT_IO
    print(f"wrote {', '.join(wrote)} in {out}")
    return EXIT_OK


_COMMANDS = {
    "gen": _cmd_gen,
    "solve": _cmd_solve,
    "verify": _cmd_verify,
    "simulate": _cmd_simulate,
    "mc": _cmd_mc,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.cmd](args)
    except (OSError, json.JSONDecodeError, ValueError, KeyError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_IO
    except (NumericalBreakdown, FloatingPointError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except RuntimeError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
