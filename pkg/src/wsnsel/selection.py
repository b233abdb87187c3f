"""Reweighted-l1 selection procedures over the structured solver.

Three pipelines share the machinery:
  - ssls:    joint sensor and link selection under an MSE-rate bound
  - ssrls:   sensor, relay, and link selection with an activation vector
             projected to Boolean values at the end
  - linksel: routing-only selection with log-utility rates, no MSE bound

All of them eliminate structurally-dead variables up front: routing entries
for node pairs out of radio range, and sensors that cannot satisfy their
flow inequality with a positive rate (no usable outgoing edge).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict, replace

import numpy as np
import scipy.sparse as sp

from scipy.optimize import linprog

from .model import Scenario, build_edges
from .solver import (
    MseConstraint,
    SolveResult,
    SolverConfig,
    Status,
    StructuredProblem,
    phase1,
    solve,
)


class SelectionInfeasible(Exception):
    """The selection program has no feasible point; the message says why."""


@dataclass(frozen=True)
class SelectConfig:
    """Selection parameters; defaults follow the simulation setup used
    throughout (gamma 0.5, 30 reweight iterations, threshold 2e-4)."""

    gamma: float = 0.5
    alpha1: float = 1.0
    alpha2: float = 1.0
    alpha3: float = 1.0
    iters: int = 30
    eps: float = 1e-3
    delta: float = 2e-4
    r0: float = 0.2
    alpha: float = 1.0
    battery_levels: np.ndarray | None = None

    def __post_init__(self):
        if self.gamma <= 0 or self.iters < 1 or self.eps <= 0:
            raise ValueError("gamma, iters and eps must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must be in (0, 1)")
        if min(self.alpha1, self.alpha2, self.alpha3, self.alpha) < 0:
            raise ValueError("importance weights must be nonnegative")
        if self.battery_levels is not None:
            object.__setattr__(
                self, "battery_levels", np.asarray(self.battery_levels, dtype=float)
            )

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["battery_levels"] is not None:
            d["battery_levels"] = list(d["battery_levels"])
        return d


@dataclass(frozen=True)
class Solution:
    """Rates, routing matrix, and (for ssrls) the Boolean activation vector."""

    method: str
    r: np.ndarray  # (J,)
    T: np.ndarray  # (J, J+K)
    nu: np.ndarray | None  # (J,) in {0,1}, ssrls only
    delta: float
    reweight_iters: int = 0
    trace: tuple[dict, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "r", np.asarray(self.r, dtype=float))
        object.__setattr__(self, "T", np.asarray(self.T, dtype=float))
        if self.nu is not None:
            object.__setattr__(self, "nu", np.asarray(self.nu, dtype=float))

    def active_sensors(self) -> np.ndarray:
        return np.flatnonzero(self.r > 0)

    def active_nodes(self) -> np.ndarray:
        """Sensor-side nodes that participate: r>0, or nu=1 for ssrls."""
        if self.nu is not None:
            return np.flatnonzero(self.nu > 0)
        if self.method == "linksel":
            return np.arange(len(self.r))
        return np.flatnonzero(self.r > 0)

    def to_json(self, config: SelectConfig | None = None) -> str:
        doc = {
            "method": self.method,
            "r": self.r.tolist(),
            "T": self.T.tolist(),
            "nu": self.nu.tolist() if self.nu is not None else None,
            "delta": self.delta,
            "config": config.to_dict() if config is not None else None,
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Solution":
        doc = json.loads(text)
        return cls(
            method=doc["method"],
            r=np.array(doc["r"]),
            T=np.array(doc["T"]),
            nu=np.array(doc["nu"]) if doc.get("nu") is not None else None,
            delta=doc["delta"],
        )


@dataclass(frozen=True)
class ReweightState:
    """Cumulative reweighting weights; tau counts completed updates."""

    w: np.ndarray
    W: np.ndarray
    v: np.ndarray | None
    eps: float
    tau: int = 0

    @classmethod
    def initial(
        cls,
        J: int,
        num_nodes: int,
        eps: float,
        with_activation: bool = False,
        battery_levels: np.ndarray | None = None,
    ) -> "ReweightState":
        w = np.ones(J)
        v = np.ones(J) if with_activation else None
        if battery_levels is not None:
            with np.errstate(divide="ignore"):
                inv = np.where(battery_levels > 0, 1.0 / battery_levels, np.inf)
            w = inv.copy()
            if v is not None:
                v = inv.copy()
        return cls(w=w, W=np.ones((J, num_nodes)), v=v, eps=eps)


_W_CAP = 1e6  # cumulative weights saturate here; a capped entry is already
# three orders of magnitude past decisive at the 2e-4 threshold, and letting
# them grow unboundedly wrecks the conditioning of later solves


def reweight_update(
    state: ReweightState,
    r_hat: np.ndarray,
    T_hat: np.ndarray,
    nu_hat: np.ndarray | None = None,
) -> ReweightState:
    """w <- w / (eps + estimate), componentwise, for every weight family."""
    v = state.v
    if v is not None and nu_hat is not None:
        v = np.minimum(v / (state.eps + nu_hat), _W_CAP)
    return ReweightState(
        w=np.minimum(state.w / (state.eps + r_hat), _W_CAP),
        W=np.minimum(state.W / (state.eps + T_hat), _W_CAP),
        v=v,
        eps=state.eps,
        tau=state.tau + 1,
    )


def threshold(sol: Solution, delta: float) -> Solution:
    """Zero every entry strictly below delta; a value equal to delta survives."""
    r = np.where(sol.r < delta, 0.0, sol.r)
    T = np.where(sol.T < delta, 0.0, sol.T)
    nu = None
    if sol.nu is not None:
        nu = np.where(sol.nu < delta, 0.0, sol.nu)
    return Solution(
        method=sol.method,
        r=r,
        T=T,
        nu=nu,
        delta=delta,
        reweight_iters=sol.reweight_iters,
        trace=sol.trace,
    )


# ---------------------------------------------------------------------------
# problem layout


@dataclass(frozen=True)
class _Support:
    """Screening support: entries outside it are fixed to zero.

    After a reweighting pass, variables below a tenth of the final threshold
    carry weights that guarantee they stay pinned; dropping them shrinks the
    subsequent solves dramatically without changing the limit point.
    """

    sensors: np.ndarray  # bool (J,)
    edges: frozenset


@dataclass(frozen=True)
class _Layout:
    """Variable indexing after structural elimination.

    Sensors without a usable outgoing edge cannot carry positive rate (their
    flow inequality reads r_i * rbar_i <= 0), so they and their incident
    edges drop out; the removal cascades.
    """

    act: np.ndarray  # active sensor ids
    edges: tuple[tuple[int, int], ...]
    R: np.ndarray
    with_nu: bool
    J: int
    num_nodes: int

    @property
    def n_rates(self) -> int:
        return len(self.act)

    @property
    def n_vars(self) -> int:
        n = len(self.act) + len(self.edges)
        if self.with_nu:
            n += len(self.act)
        return n

    def r_pos(self) -> dict[int, int]:
        return {int(i): k for k, i in enumerate(self.act)}

    def nu_offset(self) -> int:
        return len(self.act) + len(self.edges)


def _build_layout(
    s: Scenario,
    with_nu: bool,
    keep_all_sensors: bool = False,
    dead: np.ndarray | None = None,
    support: "_Support | None" = None,
) -> _Layout:
    es = build_edges(s)
    alive = np.ones(s.num_sensors, dtype=bool)
    if dead is not None:
        alive[dead] = False
    if support is not None and not keep_all_sensors:
        alive &= support.sensors
    edges = [
        (i, p)
        for (i, p) in es.edges
        if alive[i] and (p >= s.num_sensors or alive[p])
    ]
    if support is not None:
        edges = [e for e in edges if e in support.edges]
    rel = {e: r for e, r in zip(es.edges, es.R)}
    if not keep_all_sensors:
        # a sensor with no path to an AP cannot carry positive rate: summing
        # the flow rows over its stranded component forces every rate to 0,
        # so the component is feasible only on the boundary; drop it
        reaches = np.zeros(s.num_sensors, dtype=bool)
        rev: dict[int, list[int]] = {}
        frontier = []
        for i, p in edges:
            if p >= s.num_sensors:
                if not reaches[i]:
                    reaches[i] = True
                    frontier.append(i)
            else:
                rev.setdefault(p, []).append(i)
        while frontier:
            p = frontier.pop()
            for i in rev.get(p, []):
                if not reaches[i]:
                    reaches[i] = True
                    frontier.append(i)
        alive &= reaches
        edges = [
            (i, p)
            for (i, p) in edges
            if alive[i] and (p >= s.num_sensors or alive[p])
        ]
    edges = tuple(edges)
    return _Layout(
        act=np.flatnonzero(alive),
        edges=edges,
        R=np.array([rel[e] for e in edges]),
        with_nu=with_nu,
        J=s.num_sensors,
        num_nodes=s.num_nodes,
    )


def _linear_rows(s: Scenario, lay: _Layout, include_surrogate: bool, r0=None):
    """Constraint rows shared by all three problems.

    include_surrogate adds the per-link bounds (T <= r or T <= nu); r0, when
    given, adds the lower rate bounds r_i >= r0_i.
    """
    J = s.num_sensors
    rp = lay.r_pos()
    ne = len(lay.edges)
    nr = lay.n_rates
    t_off = nr
    nu_off = lay.nu_offset() if lay.with_nu else None

    rows, cols, vals, rhs = [], [], [], []
    row = 0

    def add(entries, b):
        nonlocal row
        for c, v in entries:
            rows.append(row)
            cols.append(c)
            vals.append(v)
        rhs.append(b)
        row += 1

    if include_surrogate:
        for k, (i, p) in enumerate(lay.edges):
            tv = t_off + k
            if lay.with_nu:
                add([(tv, 1.0), (nu_off + rp[i], -1.0)], 0.0)
                if p < J:
                    add([(tv, 1.0), (nu_off + rp[p], -1.0)], 0.0)
            else:
                add([(tv, 1.0), (rp[i], -1.0)], 0.0)
                if p < J:
                    add([(tv, 1.0), (rp[p], -1.0)], 0.0)
    if lay.with_nu:
        for i in lay.act:
            add([(rp[i], 1.0), (nu_off + rp[i], -1.0)], 0.0)  # r_i <= nu_i

    out_by, in_by = {}, {}
    for k, (i, p) in enumerate(lay.edges):
        out_by.setdefault(i, []).append(k)
        if p < J:
            in_by.setdefault(p, []).append(k)
    for i in lay.act:
        out = out_by.get(int(i), [])
        add([(t_off + k, 1.0) for k in out], 1.0)  # row sum <= 1
    for i in lay.act:
        entries = [(rp[i], float(s.max_rates[i]))]
        for k in in_by.get(int(i), []):
            entries.append((t_off + k, float(lay.R[k])))
        for k in out_by.get(int(i), []):
            entries.append((t_off + k, -float(lay.R[k])))
        add(entries, 0.0)  # flow: generated + inflow <= outflow
    if r0 is not None:
        r0 = np.broadcast_to(np.asarray(r0, dtype=float), (J,))
        for i in lay.act:
            if r0[i] > 0:
                add([(rp[i], -1.0)], -float(r0[i]))

    G = sp.csr_matrix(
        (vals, (rows, cols)), shape=(row, lay.n_vars)
    )
    return G, np.array(rhs)


def _mse_for(s: Scenario, lay: _Layout, gamma: float) -> MseConstraint:
    var_idx = np.full(s.num_sensors, -1)
    for k, i in enumerate(lay.act):
        var_idx[i] = k
    return MseConstraint(scenario=s, var_idx=var_idx, gamma=gamma)


def _weighted_cost(
    lay: _Layout, cfg: SelectConfig, state: ReweightState
) -> np.ndarray:
    c = np.zeros(lay.n_vars)
    c[: lay.n_rates] = cfg.alpha1 * state.w[lay.act]
    for k, (i, p) in enumerate(lay.edges):
        c[lay.n_rates + k] = cfg.alpha2 * state.W[i, p]
    if lay.with_nu:
        c[lay.nu_offset() :] = cfg.alpha3 * state.v[lay.act]
    return c


def assemble_ssls(
    s: Scenario,
    cfg: SelectConfig,
    state: ReweightState,
    support: _Support | None = None,
    dead: np.ndarray | None = None,
) -> tuple[StructuredProblem, _Layout]:
    if dead is None:
        dead = _dead_from_battery(cfg)
    lay = _build_layout(s, with_nu=False, dead=dead, support=support)
    G, h = _linear_rows(s, lay, include_surrogate=True)
    p = StructuredProblem(
        n_vars=lay.n_vars,
        linear_cost=_weighted_cost(lay, cfg, state),
        G=G,
        h=h,
        mse_constraint=_mse_for(s, lay, cfg.gamma),
    )
    return p, lay


def assemble_ssrls(
    s: Scenario,
    cfg: SelectConfig,
    state: ReweightState,
    support: _Support | None = None,
    dead: np.ndarray | None = None,
) -> tuple[StructuredProblem, _Layout]:
    if dead is None:
        dead = _dead_from_battery(cfg)
    lay = _build_layout(s, with_nu=True, dead=dead, support=support)
    G, h = _linear_rows(s, lay, include_surrogate=True)
    p = StructuredProblem(
        n_vars=lay.n_vars,
        linear_cost=_weighted_cost(lay, cfg, state),
        G=G,
        h=h,
        mse_constraint=_mse_for(s, lay, cfg.gamma),
        # activation variables appear in every incident surrogate row; keep
        # them in the dense Newton block
        dense_cols=np.arange(lay.nu_offset(), lay.n_vars),
    )
    return p, lay


def assemble_linksel(
    s: Scenario,
    cfg: SelectConfig,
    state: ReweightState,
    support: _Support | None = None,
    dead: np.ndarray | None = None,
) -> tuple[StructuredProblem, _Layout]:
    lay = _build_layout(s, with_nu=False, keep_all_sensors=True, support=support)
    G, h = _linear_rows(s, lay, include_surrogate=False, r0=cfg.r0)
    c = np.zeros(lay.n_vars)
    for k, (i, p) in enumerate(lay.edges):
        c[lay.n_rates + k] = cfg.alpha * state.W[i, p]
    q = np.zeros(lay.n_vars)
    q[lay.n_rates :] = 1.0  # V(T) = -T^2 as a cost
    p = StructuredProblem(
        n_vars=lay.n_vars,
        linear_cost=c,
        quad_diag=q,
        neglog_idx=np.arange(lay.n_rates),
        neglog_wts=np.ones(lay.n_rates),
        G=G,
        h=h,
    )
    return p, lay


_CAP_TAU = 1e-6  # capability below this is suspect and re-checked exactly


def _zero_capability_sensors(
    s: Scenario, with_nu: bool, dead: np.ndarray | None
) -> np.ndarray | None:
    """Sensors whose maximum sustainable rate over the routing polytope is
    exactly zero.

    Such sensors (e.g. a pair whose usable links mostly feed each other) make
    the feasible set nonempty but interior-free, which no barrier method can
    enter; they are dead in every solution and are eliminated up front. A
    single LP maximizing sum_i min(r_i, tau) screens all sensors at once;
    only the suspects below tau get an exact per-sensor max-r_i LP.
    """
    dead = set() if dead is None else set(int(i) for i in dead)
    while True:
        lay = _build_layout(s, with_nu=with_nu, dead=np.array(sorted(dead), int))
        if lay.n_rates == 0:
            break
        G, h = _linear_rows(s, lay, include_surrogate=True)
        n, nr = lay.n_vars, lay.n_rates
        A = sp.hstack([G, sp.csr_matrix((G.shape[0], nr))], format="csr")
        # t_k <= r_k rows for the screening objective max sum t
        T_rows = sp.hstack(
            [-sp.eye(nr, n, format="csr"), sp.eye(nr, format="csr")], format="csr"
        )
        A = sp.vstack([A, T_rows], format="csr")
        b = np.concatenate([h, np.zeros(nr)])
        c = np.concatenate([np.zeros(n), -np.ones(nr)])
        bounds = [(0, 1)] * n + [(0, _CAP_TAU)] * nr
        res = linprog(c, A_ub=A, b_ub=b, bounds=bounds, method="highs")
        if res.status != 0:
            break  # screening is best-effort; phase-1 remains the arbiter
        t = res.x[n:]
        newly = []
        for k in np.flatnonzero(t < 0.5 * _CAP_TAU):
            obj = np.zeros(n)
            obj[k] = -1.0
            one = linprog(obj, A_ub=G, b_ub=h, bounds=[(0, 1)] * n, method="highs")
            if one.status == 0 and -one.fun < 1e-9:
                newly.append(int(lay.act[k]))
        if not newly:
            break
        dead.update(newly)
    return np.array(sorted(dead), dtype=int) if dead else None


def _dead_from_battery(cfg: SelectConfig) -> np.ndarray | None:
    if cfg.battery_levels is None:
        return None
    return np.flatnonzero(cfg.battery_levels <= 0)


def _expand(lay: _Layout, x: np.ndarray):
    """Scatter solver variables back to full-size r, T (and nu)."""
    r = np.zeros(lay.J)
    r[lay.act] = x[: lay.n_rates]
    T = np.zeros((lay.J, lay.num_nodes))
    for k, (i, p) in enumerate(lay.edges):
        T[i, p] = x[lay.n_rates + k]
    nu = None
    if lay.with_nu:
        nu = np.zeros(lay.J)
        nu[lay.act] = x[lay.nu_offset() :]
    return r, T, nu


def _pack(lay: _Layout, r: np.ndarray, T: np.ndarray, nu: np.ndarray | None):
    """Inverse of _expand for a (possibly different) layout."""
    x = np.empty(lay.n_vars)
    x[: lay.n_rates] = r[lay.act]
    for k, (i, p) in enumerate(lay.edges):
        x[lay.n_rates + k] = T[i, p]
    if lay.with_nu:
        x[lay.nu_offset() :] = nu[lay.act]
    return x


def _next_support(
    method: str, cut: float, r: np.ndarray, T: np.ndarray, nu: np.ndarray | None
) -> _Support:
    if method == "linksel":
        sensors = np.ones(len(r), dtype=bool)
    elif method == "ssrls":
        sensors = (r >= cut) | (nu >= cut)
    else:
        sensors = r >= cut
    ii, pp = np.nonzero(T >= cut)
    return _Support(sensors=sensors, edges=frozenset(zip(ii.tolist(), pp.tolist())))


def _reweight_loop(
    s: Scenario,
    cfg: SelectConfig,
    assemble,
    method: str,
    solver_cfg: SolverConfig | None,
) -> Solution:
    solver_cfg = solver_cfg or SolverConfig()
    state = ReweightState.initial(
        s.num_sensors,
        s.num_nodes,
        cfg.eps,
        with_activation=(method == "ssrls"),
        battery_levels=cfg.battery_levels,
    )
    dead = _dead_from_battery(cfg)
    if method != "linksel":
        dead = _zero_capability_sensors(s, with_nu=(method == "ssrls"), dead=dead)
    problem, lay = assemble(s, cfg, state, dead=dead)
    if lay.n_rates == 0:
        raise SelectionInfeasible("no sensor has a usable path; flow forces r = 0")
    x0, reason = phase1(problem, solver_cfg)
    if x0 is None:
        raise SelectionInfeasible(reason)

    cut = cfg.delta / 10.0
    trace = []
    result: SolveResult | None = None
    r = T = nu = None
    prev_full = None
    support = None
    screening = True
    for it in range(cfg.iters):
        problem, lay = assemble(s, cfg, state, support, dead=dead)
        it_cfg = solver_cfg if it == 0 else replace(solver_cfg, t0=1e2)
        result = solve(problem, it_cfg, x0=x0)
        if result.status == Status.INFEASIBLE and support is not None:
            # screening fixed too much; redo this pass on the full problem
            # and stop screening for this run
            support, screening = None, False
            problem, lay = assemble(s, cfg, state, dead=dead)
            x0, reason = phase1(problem, solver_cfg)
            if x0 is None:
                raise SelectionInfeasible(reason)
            result = solve(problem, solver_cfg, x0=x0)
        if result.status == Status.INFEASIBLE:
            raise SelectionInfeasible(result.message)
        if result.status == Status.NUMERICAL_BREAKDOWN:
            raise RuntimeError(f"solver breakdown: {result.message}")
        r, T, nu = _expand(lay, result.x)
        trace.append(
            {
                "objective": result.objective,
                "active_sensors": int(np.sum(r >= cfg.delta)),
                "active_links": int(np.sum(T >= cfg.delta)),
                "objective_trace": list(result.objective_trace),
            }
        )
        full = np.concatenate([r, T.ravel()] + ([nu] if nu is not None else []))
        if prev_full is not None and np.max(np.abs(full - prev_full)) < 1e-5:
            break  # weights (hence iterates) have stabilized
        prev_full = full
        if method == "linksel":
            # partial reweighting: rate weights are never updated
            state = ReweightState(
                w=state.w,
                W=np.minimum(state.W / (state.eps + T), _W_CAP),
                v=None,
                eps=state.eps,
                tau=state.tau + 1,
            )
        else:
            state = reweight_update(state, r, T, nu)
        if screening:
            support = _next_support(method, cut, r, T, nu)
            nxt = _build_layout(
                s,
                with_nu=(method == "ssrls"),
                keep_all_sensors=(method == "linksel"),
                dead=dead if method != "linksel" else None,
                support=support,
            )
            x0 = _pack(nxt, r, T, nu)
        else:
            x0 = result.x

    sol = Solution(
        method=method,
        r=r,
        T=T,
        nu=nu,
        delta=cfg.delta,
        reweight_iters=cfg.iters,
        trace=tuple(trace),
    )
    return _finalize(sol, cfg)


def _finalize(sol: Solution, cfg: SelectConfig) -> Solution:
    """Threshold and restore the exact on/off consistency of the original
    (nonconvex) problems, zeroing routing entries of switched-off nodes."""
    sol = threshold(sol, cfg.delta)
    J = len(sol.r)
    r, T = sol.r.copy(), sol.T.copy()
    nu = sol.nu
    if sol.method == "ssls":
        active = r > 0
        T[~active, :] = 0.0
        T[:, :J][:, ~active] = 0.0
    elif sol.method == "ssrls":
        # a node stays on if any evidence of use survives thresholding
        active = (sol.nu > 0) | (r > 0) | (T.max(axis=1) >= cfg.delta)
        active |= np.max(T[:, :J], axis=0) >= cfg.delta
        T[~active, :] = 0.0
        T[:, :J][:, ~active] = 0.0
        r[~active] = 0.0
        nu = active.astype(float)
    return Solution(
        method=sol.method,
        r=r,
        T=T,
        nu=nu,
        delta=sol.delta,
        reweight_iters=sol.reweight_iters,
        trace=sol.trace,
    )


def ssls(
    s: Scenario, cfg: SelectConfig | None = None, solver_cfg: SolverConfig | None = None
) -> Solution:
    """Sparse sensor and link selection via iterative reweighting."""
    return _reweight_loop(s, cfg or SelectConfig(), assemble_ssls, "ssls", solver_cfg)


def ssrls(
    s: Scenario, cfg: SelectConfig | None = None, solver_cfg: SolverConfig | None = None
) -> Solution:
    """Sparse sensor, relay, and link selection; activation made Boolean by
    projecting every surviving entry to 1."""
    return _reweight_loop(s, cfg or SelectConfig(), assemble_ssrls, "ssrls", solver_cfg)


def linksel(
    s: Scenario, cfg: SelectConfig | None = None, solver_cfg: SolverConfig | None = None
) -> Solution:
    """Link selection under log-utility rates with partial reweighting: only
    the routing weights are updated across iterations."""
    return _reweight_loop(
        s, cfg or SelectConfig(), assemble_linksel, "linksel", solver_cfg
    )
