"""Independent feasibility and structure checks for selection outputs.

Everything here works from a Scenario and a Solution alone, recomputing link
reliabilities and the estimation error from scratch, so a bug in the solver
cannot hide from the checker.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import Scenario, build_edges, mse_rate, SingularInformation
from .selection import SelectConfig, Solution


@dataclass(frozen=True)
class CheckResult:
    """One named check: pass/fail with the worst-case signed margin.

    margin is the largest constraint violation found (positive = violated);
    a skipped check reports passed=True with margin 0 and a note.
    """

    passed: bool
    margin: float = 0.0
    note: str = ""
    offenders: tuple = ()

    def to_dict(self) -> dict:
        d = {"passed": self.passed, "margin": self.margin}
        if self.note:
            d["note"] = self.note
        if self.offenders:
            d["offenders"] = list(self.offenders)
        return d


@dataclass(frozen=True)
class VerifyReport:
    box_and_rows: CheckResult
    surrogate: CheckResult
    flow: CheckResult
    nonconvex_consistency: CheckResult
    mse: CheckResult
    connectivity: CheckResult

    @property
    def overall(self) -> bool:
        return all(
            c.passed
            for c in (
                self.box_and_rows,
                self.surrogate,
                self.flow,
                self.nonconvex_consistency,
                self.mse,
                self.connectivity,
            )
        )

    def to_json(self) -> str:
        doc = {
            name: getattr(self, name).to_dict()
            for name in (
                "box_and_rows",
                "surrogate",
                "flow",
                "nonconvex_consistency",
                "mse",
                "connectivity",
            )
        }
        doc["overall"] = self.overall
        return json.dumps(doc, indent=1)

    def failures(self) -> list[str]:
        return [
            name
            for name in (
                "box_and_rows",
                "surrogate",
                "flow",
                "nonconvex_consistency",
                "mse",
                "connectivity",
            )
            if not getattr(self, name).passed
        ]


def flow_residuals(s: Scenario, sol: Solution) -> np.ndarray:
    """Per-sensor (r_in, r_out, slack), shape (J, 3).

    r_in is the rate at which messages enter sensor i's queue: its own
    generation r_i * rbar_i plus successful relayed arrivals sum_p T_pi R_pi.
    r_out is the service rate sum_p T_ip R_ip; slack = r_out - r_in must be
    nonnegative for the queue to empty infinitely often.
    """
    J = s.num_sensors
    R = build_edges(s).reliability_matrix(J, s.num_nodes)
    gen = sol.r * s.max_rates
    inflow = (sol.T[:, :J] * R[:, :J]).sum(axis=0)
    outflow = (sol.T * R).sum(axis=1)
    r_in = gen + inflow
    return np.column_stack([r_in, outflow, outflow - r_in])


def check_connectivity(
    s: Scenario, sol: Solution, delta: float | None = None
) -> CheckResult:
    """Every active node must reach some access point along T > 0 edges."""
    J = s.num_sensors
    start = sol.active_nodes()
    adj = [np.flatnonzero(sol.T[i] > 0.0) for i in range(J)]
    reaches_ap = np.zeros(J, dtype=bool)
    # reverse BFS from the APs: mark every sensor with a forward path
    rev = [[] for _ in range(J)]
    frontier = []
    for i in range(J):
        for p in adj[i]:
            if p >= J:
                if not reaches_ap[i]:
                    reaches_ap[i] = True
                    frontier.append(i)
            else:
                rev[p].append(i)
    while frontier:
        p = frontier.pop()
        for i in rev[p]:
            if not reaches_ap[i]:
                reaches_ap[i] = True
                frontier.append(i)
    offending = [int(i) for i in start if not reaches_ap[i]]
    return CheckResult(
        passed=not offending,
        margin=float(len(offending)),
        note="" if not offending else "active nodes with no path to an AP",
        offenders=tuple(offending),
    )


def _box_and_rows(s: Scenario, sol: Solution, cfg: SelectConfig, tol: float):
    viol = [
        np.max(-sol.r, initial=-np.inf),
        np.max(sol.r - 1.0, initial=-np.inf),
        np.max(-sol.T, initial=-np.inf),
        np.max(sol.T - 1.0, initial=-np.inf),
        np.max(sol.T.sum(axis=1) - 1.0, initial=-np.inf),
    ]
    if sol.nu is not None:
        viol += [np.max(-sol.nu), np.max(sol.nu - 1.0)]
    if sol.method == "linksel":
        r0 = np.broadcast_to(np.asarray(cfg.r0, dtype=float), (s.num_sensors,))
        viol.append(np.max(r0 - sol.r))
    worst = float(max(viol))
    return CheckResult(passed=worst <= tol, margin=worst)


def _surrogate(sol: Solution, s: Scenario, tol: float) -> CheckResult:
    J = s.num_sensors
    if sol.method == "linksel":
        return CheckResult(passed=True, note="no per-link surrogate bound")
    if sol.nu is not None:
        cap_src, cap_dst = sol.nu, sol.nu
        extra = float(np.max(sol.r - sol.nu))  # r_i <= nu_i
    else:
        cap_src, cap_dst = sol.r, sol.r
        extra = -np.inf
    worst = float(np.max(sol.T - cap_src[:, None]))  # T_ip <= cap_i
    worst = max(worst, float(np.max(sol.T[:, :J] - cap_dst[None, :])))
    worst = max(worst, extra)
    return CheckResult(passed=worst <= tol, margin=worst)


def _nonconvex(sol: Solution, s: Scenario, tol: float) -> CheckResult:
    """Post-threshold on/off consistency: an inactive node neither sends nor
    receives, and every positive entry clears the threshold."""
    J = s.num_sensors
    active = np.zeros(J, dtype=bool)
    active[sol.active_nodes()] = True
    worst = float(np.max(sol.T[~active, :], initial=0.0))
    worst = max(worst, float(np.max(sol.T[:, :J][:, ~active], initial=0.0)))
    worst = max(worst, float(np.max(sol.r[~active], initial=0.0)))
    sub = [
        np.min(sol.T[sol.T > 0], initial=np.inf),
        np.min(sol.r[sol.r > 0], initial=np.inf),
    ]
    below = float(sol.delta - min(sub))
    worst = max(worst, below)
    return CheckResult(passed=worst <= tol, margin=worst)


def _mse(s: Scenario, sol: Solution, cfg: SelectConfig, tol: float) -> CheckResult:
    if sol.method == "linksel":
        return CheckResult(passed=True, note="no estimation-error bound")
    try:
        f = mse_rate(s, sol.r)
    except SingularInformation:
        return CheckResult(
            passed=False, margin=np.inf, note="information matrix singular"
        )
    margin = float(f - cfg.gamma)
    return CheckResult(passed=margin <= tol, margin=margin)


def verify_all(
    s: Scenario,
    sol: Solution,
    cfg: SelectConfig | None = None,
    tol: float = 1e-6,
) -> VerifyReport:
    cfg = cfg or SelectConfig()
    res = flow_residuals(s, sol)
    flow_worst = float(np.max(-res[:, 2]))
    return VerifyReport(
        box_and_rows=_box_and_rows(s, sol, cfg, tol),
        surrogate=_surrogate(sol, s, tol),
        flow=CheckResult(passed=flow_worst <= tol, margin=flow_worst),
        nonconvex_consistency=_nonconvex(sol, s, tol),
        mse=_mse(s, sol, cfg, tol),
        connectivity=check_connectivity(s, sol, sol.delta),
    )
