"""Selection metrics and the seeded Monte Carlo experiment harness."""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .model import GenConfig, generate_scenario
from .selection import (
    SelectConfig,
    SelectionInfeasible,
    Solution,
    linksel,
    ssls,
    ssrls,
)
from .solver import SolverConfig
from .verify import verify_all

_METHODS = {"ssls": ssls, "ssrls": ssrls, "linksel": linksel}

CSV_HEADER = (
    "cell_id,J,K,m,rbar,method,trial,seed,status,P_trr,P_alp,"
    "pct_sensors,pct_links,pct_relays,band1,band2,band3,band4"
)

_BANDS = (0.25, 0.5, 0.75)  # band edges above the activity threshold


def p_trr(sol: Solution) -> float:
    """Total relative acquisition rate, as a percentage of J."""
    return 100.0 * float(np.sum(sol.r)) / len(sol.r)


def p_alp(sol: Solution) -> float:
    """Aggregate network link probability, as a percentage of J."""
    return 100.0 * float(np.sum(sol.T)) / len(sol.r)


def active_percentages(sol: Solution, delta: float | None = None) -> tuple:
    """(sensors%, links%, relays%); link denominator is J*(J+K)."""
    J, num_nodes = sol.T.shape
    sensors = 100.0 * int(np.sum(sol.r > 0)) / J
    links = 100.0 * int(np.sum(sol.T > 0)) / (J * num_nodes)
    relays = 0.0
    if sol.nu is not None:
        relays = 100.0 * int(np.sum((sol.nu == 1) & (sol.r == 0))) / J
    return sensors, links, relays


def band_percentages(sol: Solution) -> np.ndarray:
    """Active-link percentages by routing probability: [delta, 0.25),
    [0.25, 0.5), [0.5, 0.75), [0.75, 1]; they sum to the active-link
    percentage."""
    J, num_nodes = sol.T.shape
    t = sol.T[sol.T > 0]
    edges = np.array([0.0, *_BANDS, np.inf])
    counts, _ = np.histogram(t, bins=edges)
    return 100.0 * counts / (J * num_nodes)


@dataclass(frozen=True)
class MetricsRow:
    cell_id: str
    J: int
    K: int
    m: int
    rbar: float
    method: str
    trial: int
    seed: int
    status: str  # "ok", "infeasible", "verify_failed:<checks>", "error:<msg>"
    P_trr: float | None = None
    P_alp: float | None = None
    pct_sensors: float | None = None
    pct_links: float | None = None
    pct_relays: float | None = None
    bands: tuple | None = None

    def csv_line(self) -> str:
        def num(v):
            return "" if v is None else f"{v:.10g}"

        bands = self.bands if self.bands is not None else (None,) * 4
        cells = [
            self.cell_id,
            str(self.J),
            str(self.K),
            str(self.m),
            f"{self.rbar:.10g}",
            self.method,
            str(self.trial),
            str(self.seed),
            self.status,
            num(self.P_trr),
            num(self.P_alp),
            num(self.pct_sensors),
            num(self.pct_links),
            num(self.pct_relays),
            *[num(b) for b in bands],
        ]
        return ",".join(cells)


@dataclass(frozen=True)
class MCConfig:
    """cells: (J, K, m, rbar, method) tuples; trial seeds derive from the
    master seed so the whole table is reproducible byte for byte."""

    cells: tuple
    trials: int = 10
    master_seed: int = 0
    select: SelectConfig = field(default_factory=SelectConfig)
    solver: SolverConfig | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("need trials >= 1")
        object.__setattr__(self, "cells", tuple(tuple(c) for c in self.cells))
        for c in self.cells:
            if len(c) != 5 or c[4] not in _METHODS:
                raise ValueError(f"bad cell {c}; need (J, K, m, rbar, method)")


def _trial_seed(master: int, cell_idx: int, trial: int) -> int:
    return int(np.random.SeedSequence([master, cell_idx, trial]).generate_state(1)[0])


def metrics_row(
    cell_id: str,
    J: int,
    K: int,
    m: int,
    rbar: float,
    method: str,
    trial: int,
    seed: int,
    select: SelectConfig,
    solver: SolverConfig | None,
) -> MetricsRow:
    """Run one (cell, trial): generate, solve, verify, measure."""
    base = dict(
        cell_id=cell_id, J=J, K=K, m=m, rbar=rbar, method=method, trial=trial,
        seed=seed,
    )
    s = generate_scenario(GenConfig(J=J, K=K, m=m, rbar=rbar, seed=seed))
    try:
        sol = _METHODS[method](s, select, solver)
    except SelectionInfeasible:
        return MetricsRow(status="infeasible", **base)
    except Exception as e:  # solver breakdown: recorded, never aborts the run
        return MetricsRow(status=f"error:{type(e).__name__}", **base)
    rep = verify_all(s, sol, select)
    if not rep.overall:
        return MetricsRow(
            status="verify_failed:" + "+".join(rep.failures()), **base
        )
    sens, links, relays = active_percentages(sol)
    return MetricsRow(
        status="ok",
        P_trr=p_trr(sol),
        P_alp=p_alp(sol),
        pct_sensors=sens,
        pct_links=links,
        pct_relays=relays,
        bands=tuple(band_percentages(sol)),
        **base,
    )


def monte_carlo(mc: MCConfig) -> tuple[list[MetricsRow], list[dict]]:
    """All (cell, trial) rows in deterministic order, plus per-cell mean/std
    aggregates over the rows that solved and verified."""
    rows = []
    for ci, (J, K, m, rbar, method) in enumerate(mc.cells):
        cell_id = f"{method}_J{J}_K{K}_m{m}_r{rbar:g}"
        for trial in range(mc.trials):
            rows.append(
                metrics_row(
                    cell_id, J, K, m, rbar, method, trial,
                    _trial_seed(mc.master_seed, ci, trial), mc.select, mc.solver,
                )
            )
    aggregates = []
    for ci, (J, K, m, rbar, method) in enumerate(mc.cells):
        cell_id = f"{method}_J{J}_K{K}_m{m}_r{rbar:g}"
        ok = [r for r in rows if r.cell_id == cell_id and r.status == "ok"]
        agg = {
            "cell_id": cell_id, "J": J, "K": K, "m": m, "rbar": rbar,
            "method": method, "n_ok": len(ok),
            "n_flagged": mc.trials - len(ok),
        }
        for name in ("P_trr", "P_alp", "pct_sensors", "pct_links", "pct_relays"):
            vals = np.array([getattr(r, name) for r in ok])
            agg[f"{name}_mean"] = float(vals.mean()) if len(ok) else None
            agg[f"{name}_std"] = (
                float(vals.std(ddof=1)) if len(ok) > 1 else 0.0 if ok else None
            )
        aggregates.append(agg)
    return rows, aggregates


def rows_to_csv(rows: list[MetricsRow]) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for r in rows:
        buf.write(r.csv_line() + "\n")
    return buf.getvalue()


def aggregates_to_csv(aggregates: list[dict]) -> str:
    if not aggregates:
        return ""
    cols = list(aggregates[0])
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    for a in aggregates:
        cells = []
        for c in cols:
            v = a[c]
            cells.append(
                "" if v is None else f"{v:.10g}" if isinstance(v, float) else str(v)
            )
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()
