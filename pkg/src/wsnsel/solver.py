"""Primal log-barrier interior-point solver for the structured convex programs.

Handles box variables, linear inequalities G x <= h, a linear cost, an
optional diagonal quadratic term, optional negative-log objective terms, and
an optional trace-of-inverse (MSE-rate) constraint with analytic derivatives.

The Newton systems of the assembled selection problems have a special shape:
routing variables couple to each other only through a modest number of
row-sum and flow constraints, while dense curvature is confined to the rate
coordinates. Large instances are solved by a Schur complement on that dense
block plus a Woodbury correction for the wide constraint rows; small
instances use a plain dense factorization.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .model import (
    Scenario,
    SingularInformation,
    info_matrix,
    mse_rate,
    mse_rate_grad,
    mse_rate_hess,
)


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    MAX_ITERATIONS = "MaxIterations"
    NUMERICAL_BREAKDOWN = "NumericalBreakdown"


class NumericalBreakdown(Exception):
    pass


@dataclass(frozen=True)
class MseConstraint:
    """Constraint f(r) <= gamma on the sensor coordinates of x.

    var_idx[i] is the coordinate of sensor i's rate in x, or -1 when that
    rate is structurally fixed at 0 (eliminated sensor).
    """

    scenario: Scenario
    var_idx: np.ndarray
    gamma: float

    def rates(self, x: np.ndarray) -> np.ndarray:
        r = np.zeros(self.scenario.num_sensors)
        mask = self.var_idx >= 0
        r[mask] = x[self.var_idx[mask]]
        return r


class _PsdLift:
    """Self-concordant lifting of the trace-of-inverse bound f(r) <= gamma.

    Auxiliary symmetric U (m x m) enters through the linear row tr(U) <= gamma
    and the barrier -log det [[M(r), I], [I, U]]; positive definiteness of
    that block matrix is equivalent to U >= M(r)^-1, so together they imply
    tr(M(r)^-1) <= gamma.  Unlike a direct -log(gamma - f(r)) term this
    barrier is self-concordant, which keeps Newton centering dependable when
    the bound is active.
    """

    def __init__(self, mc: MseConstraint, base_n: int):
        self.mc = mc
        s = mc.scenario
        m = s.dim
        self.m = m
        self.base_n = base_n
        mask = mc.var_idx >= 0
        self.sensors = np.flatnonzero(mask)
        self.r_cols = mc.var_idx[mask]
        self.c = (s.max_rates / s.noise_std**2)[self.sensors]  # dM/dr_i weight
        self.A = s.regressors[self.sensors]
        self.diag_cols = base_n + np.arange(m)
        self.pairs = [(k, l) for k in range(m) for l in range(k + 1, m)]
        self.off_cols = base_n + m + np.arange(len(self.pairs))
        self.n_extra = m + len(self.pairs)
        self.cols = np.concatenate([self.r_cols, self.diag_cols, self.off_cols])

    def build_Y(self, x: np.ndarray) -> np.ndarray:
        s = self.mc.scenario
        m = self.m
        U = np.zeros((m, m))
        U[np.arange(m), np.arange(m)] = x[self.diag_cols]
        for (k, l), col in zip(self.pairs, self.off_cols):
            U[k, l] = U[l, k] = x[col]
        Y = np.zeros((2 * m, 2 * m))
        Y[:m, :m] = info_matrix(s, self.mc.rates(x))
        Y[m:, m:] = U
        Y[:m, m:] = np.eye(m)
        Y[m:, :m] = np.eye(m)
        return Y

    def _chol(self, x: np.ndarray):
        try:
            return sla.cho_factor(self.build_Y(x), lower=True, check_finite=False)
        except (np.linalg.LinAlgError, ValueError):
            return None

    def neglogdet(self, x: np.ndarray) -> float:
        f = self._chol(x)
        if f is None:
            return np.inf
        return -2.0 * float(np.sum(np.log(np.diag(f[0]))))

    def _inv_blocks(self, x: np.ndarray):
        f = self._chol(x)
        if f is None:
            raise NumericalBreakdown("lifted MSE block left the PSD cone")
        P = sla.cho_solve(f, np.eye(2 * self.m), check_finite=False)
        m = self.m
        return P[:m, :m], P[:m, m:], P[m:, m:]

    def grad(self, x: np.ndarray) -> np.ndarray:
        """Gradient of -log det Y over self.cols."""
        P11, P12, P22 = self._inv_blocks(x)
        g_r = -self.c * np.einsum("ij,jk,ik->i", self.A, P11, self.A)
        g_o = np.array([-2.0 * P22[k, l] for k, l in self.pairs])
        return np.concatenate([g_r, -np.diag(P22), g_o])

    def hess(self, x: np.ndarray) -> np.ndarray:
        """Dense Hessian block of -log det Y over self.cols."""
        P11, P12, P22 = self._inv_blocks(x)
        A, c, m = self.A, self.c, self.m
        nr = len(c)
        no = len(self.pairs)
        Prr = A @ P11 @ A.T
        Pre = A @ P12
        H = np.zeros((nr + m + no, nr + m + no))
        H[:nr, :nr] = np.outer(c, c) * Prr**2
        H[:nr, nr : nr + m] = c[:, None] * Pre**2
        for j, (k, l) in enumerate(self.pairs):
            H[:nr, nr + m + j] = 2.0 * c * Pre[:, k] * Pre[:, l]
        H[nr : nr + m, nr : nr + m] = P22**2
        for j, (k, l) in enumerate(self.pairs):
            H[nr : nr + m, nr + m + j] = 2.0 * P22[:, k] * P22[:, l]
        for j, (k, l) in enumerate(self.pairs):
            for j2, (k2, l2) in enumerate(self.pairs):
                H[nr + m + j, nr + m + j2] = 2.0 * (
                    P22[k, k2] * P22[l, l2] + P22[k, l2] * P22[l, k2]
                )
        H[nr:, :nr] = H[:nr, nr:].T
        H[nr + m :, nr : nr + m] = H[nr : nr + m, nr + m :].T
        return H

    def initial_u(self, x: np.ndarray) -> np.ndarray:
        """U coordinates strictly inside the lifted set for rates with
        f(r) < gamma: M^-1 plus a margin spread over the diagonal."""
        s = self.mc.scenario
        M = info_matrix(s, self.mc.rates(x))
        Minv = np.linalg.inv(M)
        f = float(np.trace(Minv))
        slack = (self.mc.gamma - f) / (2.0 * self.m)
        if slack <= 0:
            raise NumericalBreakdown("lift initialization from an infeasible point")
        U = Minv + slack * np.eye(self.m)
        vals = [U[k, k] for k in range(self.m)]
        vals.extend(U[k, l] for k, l in self.pairs)
        return np.array(vals)


@dataclass(frozen=True)
class StructuredProblem:
    """Minimize c.x + sum q_k x_k^2 - sum u_k log x_k over [0,1]^n, Gx <= h,
    optionally subject to f(x|sensor coords) <= gamma."""

    n_vars: int
    linear_cost: np.ndarray
    quad_diag: np.ndarray | None = None
    neglog_idx: np.ndarray | None = None
    neglog_wts: np.ndarray | None = None
    G: sp.csr_matrix | None = None
    h: np.ndarray | None = None
    mse_constraint: MseConstraint | None = None
    dense_cols: np.ndarray | None = None  # extra coordinates for the dense
    # Newton block; list coordinates that many constraint rows touch

    def __post_init__(self):
        n = self.n_vars
        c = np.asarray(self.linear_cost, dtype=float)
        if c.shape != (n,):
            raise ValueError("linear_cost must have length n_vars")
        object.__setattr__(self, "linear_cost", c)
        q = self.quad_diag
        if q is not None:
            q = np.asarray(q, dtype=float)
            if q.shape != (n,) or np.any(q < 0):
                raise ValueError("quad_diag must be nonnegative of length n_vars")
        object.__setattr__(self, "quad_diag", q)
        if (self.neglog_idx is None) != (self.neglog_wts is None):
            raise ValueError("neglog_idx and neglog_wts go together")
        if self.neglog_idx is not None:
            idx = np.asarray(self.neglog_idx, dtype=int)
            wts = np.asarray(self.neglog_wts, dtype=float)
            if idx.shape != wts.shape or np.any(wts <= 0):
                raise ValueError("neglog weights must be positive")
            object.__setattr__(self, "neglog_idx", idx)
            object.__setattr__(self, "neglog_wts", wts)
        if (self.G is None) != (self.h is None):
            raise ValueError("G and h go together")
        if self.G is not None:
            G = sp.csr_matrix(self.G).astype(float)
            h = np.asarray(self.h, dtype=float)
            if G.shape[1] != n or h.shape != (G.shape[0],):
                raise ValueError("inconsistent G/h dimensions")
            object.__setattr__(self, "G", G)
            object.__setattr__(self, "h", h)

    def objective(self, x: np.ndarray) -> float:
        val = float(self.linear_cost @ x)
        if self.quad_diag is not None:
            val += float(self.quad_diag @ x**2)
        if self.neglog_idx is not None:
            val -= float(self.neglog_wts @ np.log(x[self.neglog_idx]))
        return val

    def max_violation(self, x: np.ndarray) -> float:
        worst = max(float(np.max(-x)), float(np.max(x - 1.0)))
        if self.G is not None and self.G.shape[0] > 0:
            worst = max(worst, float(np.max(self.G @ x - self.h)))
        if self.mse_constraint is not None:
            mc = self.mse_constraint
            try:
                worst = max(worst, mse_rate(mc.scenario, mc.rates(x)) - mc.gamma)
            except SingularInformation:
                worst = np.inf
        return worst


@dataclass(frozen=True)
class SolverConfig:
    t0: float = 1.0
    mu: float = 8.0
    max_outer: int = 60
    gap_tol: float = 1e-6
    newton_tol: float = 1e-10
    max_newton: int = 60
    ls_alpha: float = 0.25
    ls_beta: float = 0.5
    feas_tol: float = 1e-7
    kkt_tol: float = 1e-7
    pd_tol: float = 1e-10
    phase1_eta: float = 1e-6
    phase1_margin: float = 1e-9
    dense_cutoff: int = 700

    def __post_init__(self):
        if self.mu <= 1:
            raise ValueError("barrier growth factor must exceed 1")


@dataclass(frozen=True)
class SolveResult:
    x: np.ndarray
    status: Status
    objective: float
    max_violation: float
    kkt_res: float
    newton_steps: int = 0
    message: str = ""
    objective_trace: tuple[float, ...] = ()


# ---------------------------------------------------------------------------
# internal generalized form: per-variable box [lb, ub] and an optional slack
# coordinate relaxing the MSE constraint (used by phase-1)


@dataclass
class _Barrier:
    n: int
    c: np.ndarray
    q: np.ndarray  # zeros when absent
    u: np.ndarray  # neglog weights, zeros when absent
    lb: np.ndarray
    ub: np.ndarray
    G: sp.csr_matrix | None
    h: np.ndarray | None
    mse: MseConstraint | None
    mse_slack: int | None
    dense_hint: np.ndarray
    mse_obj: MseConstraint | None = None  # MSE-rate as objective term, not bound
    psd: _PsdLift | None = None  # lifted form of the MSE-rate bound

    def objective(self, x: np.ndarray) -> float:
        val = float(self.c @ x + self.q @ x**2)
        if np.any(self.u > 0):
            val -= float(self.u @ np.log(x))
        if self.mse_obj is not None:
            try:
                val += mse_rate(self.mse_obj.scenario, self.mse_obj.rates(x))
            except SingularInformation:
                return np.inf
        return val

    @property
    def n_log_terms(self) -> int:
        m = 2 * self.n
        if self.G is not None:
            m += self.G.shape[0]
        if self.mse is not None:
            m += 1
        if self.psd is not None:
            m += 2 * self.psd.m  # barrier parameter of the log-det cone
        return m

    def mse_gap(self, x: np.ndarray) -> float:
        """gamma (+ slack) - f(x); -inf when f is undefined."""
        mc = self.mse
        try:
            f = mse_rate(mc.scenario, mc.rates(x))
        except SingularInformation:
            return -np.inf
        gap = mc.gamma - f
        if self.mse_slack is not None:
            gap += x[self.mse_slack]
        return gap

    def phi(self, x: np.ndarray, t: float) -> float:
        """Barrier objective t*obj + log terms; +inf outside the domain."""
        lo = x - self.lb
        hi = self.ub - x
        if np.any(lo <= 0) or np.any(hi <= 0):
            return np.inf
        val = t * float(self.c @ x + self.q @ x**2)
        if np.any(self.u > 0):
            val -= t * float(self.u @ np.log(x))
        val -= float(np.sum(np.log(lo)) + np.sum(np.log(hi)))
        if self.G is not None and self.G.shape[0] > 0:
            s = self.h - self.G @ x
            if np.any(s <= 0):
                return np.inf
            val -= float(np.sum(np.log(s)))
        if self.mse is not None:
            gap = self.mse_gap(x)
            if gap <= 0:
                return np.inf
            val -= np.log(gap)
        if self.mse_obj is not None:
            try:
                val += t * mse_rate(self.mse_obj.scenario, self.mse_obj.rates(x))
            except SingularInformation:
                return np.inf
        if self.psd is not None:
            val += self.psd.neglogdet(x)  # +inf outside the cone
        return val

    def grad(self, x: np.ndarray, t: float) -> np.ndarray:
        g = t * (self.c + 2.0 * self.q * x - self.u / x)
        g -= 1.0 / (x - self.lb)
        g += 1.0 / (self.ub - x)
        if self.G is not None and self.G.shape[0] > 0:
            s = np.maximum(self.h - self.G @ x, 1e-300)
            g += self.G.T @ (1.0 / s)
        if self.mse is not None:
            mc = self.mse
            gap = self.mse_gap(x)
            fgrad = mse_rate_grad(mc.scenario, mc.rates(x))
            mask = mc.var_idx >= 0
            g[mc.var_idx[mask]] += fgrad[mask] / gap
            if self.mse_slack is not None:
                g[self.mse_slack] -= 1.0 / gap
        if self.mse_obj is not None:
            mc = self.mse_obj
            fgrad = mse_rate_grad(mc.scenario, mc.rates(x))
            mask = mc.var_idx >= 0
            g[mc.var_idx[mask]] += t * fgrad[mask]
        if self.psd is not None:
            g[self.psd.cols] += self.psd.grad(x)
        return g

    def mse_curvature(
        self, x: np.ndarray, t: float
    ) -> tuple[np.ndarray, np.ndarray] | None:
        """Dense Hessian block of the MSE-rate terms (barrier of the bound,
        or t-scaled objective) and the coordinates it lives on."""
        if self.mse is not None:
            mc = self.mse
            gap = self.mse_gap(x)
            r = mc.rates(x)
            fgrad = mse_rate_grad(mc.scenario, r)
            fhess = mse_rate_hess(mc.scenario, r)
            mask = mc.var_idx >= 0
            cols = mc.var_idx[mask]
            gvec = fgrad[mask] / gap
            if self.mse_slack is not None:
                cols = np.concatenate([cols, [self.mse_slack]])
                gvec = np.concatenate([gvec, [-1.0 / gap]])
            k = int(mask.sum())
            block = np.outer(gvec, gvec)
            block[:k, :k] += fhess[np.ix_(mask, mask)] / gap
            return block, cols
        if self.mse_obj is not None:
            mc = self.mse_obj
            r = mc.rates(x)
            fhess = mse_rate_hess(mc.scenario, r)
            mask = mc.var_idx >= 0
            cols = mc.var_idx[mask]
            return t * fhess[np.ix_(mask, mask)], cols
        if self.psd is not None:
            return self.psd.hess(x), self.psd.cols
        return None

    def hess_diag(self, x: np.ndarray, t: float) -> np.ndarray:
        d = t * (2.0 * self.q + self.u / x**2)
        d += 1.0 / (x - self.lb) ** 2 + 1.0 / (self.ub - x) ** 2
        return d

    def ineq_weights(self, x: np.ndarray) -> np.ndarray | None:
        if self.G is None or self.G.shape[0] == 0:
            return None
        s = np.maximum(self.h - self.G @ x, 1e-150)
        return 1.0 / s**2


def _chol_with_ridge(H: np.ndarray):
    """Cholesky with a scale-aware ridge fallback for degenerate systems."""
    try:
        return sla.cho_factor(H, lower=True, check_finite=False)
    except (np.linalg.LinAlgError, ValueError):
        pass
    scale = 1e-10 * (1.0 + (np.max(np.abs(H)) if H.size else 0.0))
    for _ in range(6):
        try:
            return sla.cho_factor(
                H + scale * np.eye(H.shape[0]), lower=True, check_finite=False
            )
        except (np.linalg.LinAlgError, ValueError):
            scale *= 100.0
    raise NumericalBreakdown("Newton system factorization failed")


class _Structure:
    """Once-per-solve classification of constraint rows.

    Rows touching at most one coordinate outside the dense set S go into the
    arrowhead part of the Hessian; the remaining (wide) rows are handled by a
    Woodbury correction.
    """

    def __init__(self, bar: _Barrier):
        n = bar.n
        S = np.unique(bar.dense_hint) if len(bar.dense_hint) else np.array([], int)
        in_S = np.zeros(n, dtype=bool)
        in_S[S] = True
        rest = np.flatnonzero(~in_S)
        pos_S = np.full(n, -1)
        pos_S[S] = np.arange(len(S))
        pos_rest = np.full(n, -1)
        pos_rest[rest] = np.arange(len(rest))
        self.S, self.rest = S, rest
        self.pos_S = pos_S

        simple_rows, general_rows = [], []
        col1, val1 = [], []
        gs_rows, gs_cols, gs_vals = [], [], []
        if bar.G is not None and bar.G.shape[0] > 0:
            G = bar.G
            indptr, indices, data = G.indptr, G.indices, G.data
            for j in range(G.shape[0]):
                cols = indices[indptr[j] : indptr[j + 1]]
                vals = data[indptr[j] : indptr[j + 1]]
                out = ~in_S[cols]
                n_out = int(out.sum())
                if n_out > 1:
                    general_rows.append(j)
                    continue
                row_id = len(simple_rows)
                simple_rows.append(j)
                if n_out == 1:
                    col1.append(pos_rest[cols[out][0]])
                    val1.append(vals[out][0])
                else:
                    col1.append(0)
                    val1.append(0.0)
                for c, v in zip(cols[~out], vals[~out]):
                    gs_rows.append(row_id)
                    gs_cols.append(pos_S[c])
                    gs_vals.append(v)

        m_s = len(simple_rows)
        self.simple_rows = np.asarray(simple_rows, dtype=int)
        self.general_rows = np.asarray(general_rows, dtype=int)
        self.col1 = np.asarray(col1, dtype=int)
        self.val1 = np.asarray(val1, dtype=float)
        self.Gs = sp.csr_matrix(
            (gs_vals, (gs_rows, gs_cols)), shape=(m_s, len(S))
        )
        # scatter matrix: row j -> its single outside coordinate
        self.P = sp.csr_matrix(
            (self.val1, (np.arange(m_s), self.col1)), shape=(m_s, max(len(rest), 1))
        )
        if len(general_rows):
            self.Gg = sp.csr_matrix(bar.G[self.general_rows])
            self.GgT = self.Gg.T.toarray()
        else:
            self.Gg = None


class _NewtonSystem:
    """Factorized barrier Hessian at a point; exposes solve(rhs)."""

    def __init__(
        self, bar: _Barrier, x: np.ndarray, t: float, struct: _Structure | None
    ):
        diag = bar.hess_diag(x, t)
        w = bar.ineq_weights(x)
        curv = bar.mse_curvature(x, t)
        if struct is None:
            H = np.diag(diag)
            if w is not None:
                H += (bar.G.T @ sp.diags(w) @ bar.G).toarray()
            if curv is not None:
                block, cols = curv
                H[np.ix_(cols, cols)] += block
            self._factor = _chol_with_ridge(H)
            self._dense = True
            return
        self._dense = False

        st = struct
        S, rest = st.S, st.rest
        k = len(S)
        DR = diag[rest].copy()
        HS = np.diag(diag[S]) if k else np.zeros((0, 0))
        C = None
        if w is not None and len(st.simple_rows):
            ws = w[st.simple_rows]
            np.add.at(DR, st.col1, ws * st.val1**2)
            Wd = sp.diags(ws)
            C = (st.Gs.T @ Wd @ st.P).toarray()[:, : len(rest)]
            HS += (st.Gs.T @ Wd @ st.Gs).toarray()
        if curv is not None:
            block, cols = curv
            p = st.pos_S[cols]
            HS[np.ix_(p, p)] += block

        self._st = st
        self._DR = DR
        self._C = C
        if k:
            schur = HS
            if C is not None and len(rest):
                schur = HS - (C / DR) @ C.T
            self._schur_factor = _chol_with_ridge(schur)
        else:
            self._schur_factor = None

        if st.Gg is not None:
            wg = w[st.general_rows]
            Z = self._solve_h0(st.GgT)
            K = np.diag(1.0 / wg) + (st.Gg @ Z)
            self._woodbury = (st.Gg, Z, _chol_with_ridge(K))
        else:
            self._woodbury = None

    def _solve_h0(self, b: np.ndarray) -> np.ndarray:
        st = self._st
        S, rest = st.S, st.rest
        x = np.zeros_like(b, dtype=float)
        bR = b[rest]
        yR = (bR.T / self._DR).T if len(rest) else bR
        if len(S):
            rhs = b[S]
            if self._C is not None and len(rest):
                rhs = rhs - self._C @ yR
            xS = sla.cho_solve(self._schur_factor, rhs, check_finite=False)
            x[S] = xS
            if len(rest):
                corr = self._C.T @ xS if self._C is not None else 0.0
                x[rest] = ((bR - corr).T / self._DR).T
        else:
            x[rest] = yR
        return x

    def _solve_structured(self, b: np.ndarray) -> np.ndarray:
        y = self._solve_h0(b)
        if self._woodbury is not None:
            Gg, Z, Kfac = self._woodbury
            y = y - Z @ sla.cho_solve(Kfac, Gg @ y, check_finite=False)
        return y

    def solve(self, b: np.ndarray) -> np.ndarray:
        if self._dense:
            return sla.cho_solve(self._factor, b, check_finite=False)
        return self._solve_structured(b)


def _max_linear_step(bar: _Barrier, x: np.ndarray, dx: np.ndarray) -> float:
    """Largest step keeping box and linear constraints strictly feasible."""
    step = 1.0
    neg = dx < 0
    if np.any(neg):
        step = min(step, float(np.min((x[neg] - bar.lb[neg]) / -dx[neg])))
    pos = dx > 0
    if np.any(pos):
        step = min(step, float(np.min((bar.ub[pos] - x[pos]) / dx[pos])))
    if bar.G is not None and bar.G.shape[0] > 0:
        s = bar.h - bar.G @ x
        gd = bar.G @ dx
        rising = gd > 0
        if np.any(rising):
            step = min(step, float(np.min(s[rising] / gd[rising])))
    return step


def _center(
    bar: _Barrier,
    x: np.ndarray,
    t: float,
    cfg: SolverConfig,
    struct: _Structure | None,
) -> tuple[np.ndarray, float, int]:
    """Damped Newton to the analytic center.

    Returns (x, residual, steps) where residual is half the squared Newton
    decrement at the final iterate (the suboptimality bound of the centering
    problem).
    """
    steps = 0
    residual = np.inf
    for _ in range(cfg.max_newton):
        g = bar.grad(x, t)
        system = _NewtonSystem(bar, x, t, struct)
        dx = system.solve(-g)
        decrement2 = float(-g @ dx)
        if decrement2 < 0:
            if abs(decrement2) < 1e-8:
                residual = abs(decrement2) / 2.0
                break
            # indefiniteness from roundoff: fall back to a diagonally
            # preconditioned gradient step, which is always a descent direction
            dx = -g / bar.hess_diag(x, t)
            decrement2 = float(-g @ dx)
            if decrement2 <= 1e-14:
                break
        residual = decrement2 / 2.0
        if residual <= cfg.newton_tol:
            break
        step = min(1.0, 0.99 * _max_linear_step(bar, x, dx))
        phi0 = bar.phi(x, t)
        accepted = False
        for _ in range(60):
            cand = x + step * dx
            if bar.phi(cand, t) <= phi0 - cfg.ls_alpha * step * decrement2:
                x = cand
                accepted = True
                break
            step *= cfg.ls_beta
        if not accepted:
            break  # stalled at round-off; accept current center
        steps += 1
    return x, residual, steps


def _barrier_solve(
    bar: _Barrier, x0: np.ndarray, cfg: SolverConfig, stop_early=None
) -> tuple[np.ndarray, Status, float, int, list[float]]:
    """Outer barrier loop. Returns (x, status, kkt_res, newton_steps, trace)."""
    x = x0
    t = cfg.t0
    m = bar.n_log_terms
    struct = None if bar.n <= cfg.dense_cutoff else _Structure(bar)
    total_steps = 0
    kkt = np.inf
    trace: list[float] = []
    for _ in range(cfg.max_outer):
        x, kkt, steps = _center(bar, x, t, cfg, struct)
        total_steps += steps
        trace.append(bar.objective(x))
        if stop_early is not None and stop_early(x):
            return x, Status.OPTIMAL, kkt, total_steps, trace
        if m / t < cfg.gap_tol:
            return x, Status.OPTIMAL, kkt, total_steps, trace
        t *= cfg.mu
    return x, Status.MAX_ITERATIONS, kkt, total_steps, trace


def _to_barrier(p: StructuredProblem) -> _Barrier:
    """Barrier form of `p`; an MSE-rate bound is lifted to its PSD form with
    auxiliary U coordinates appended after the problem variables."""
    n = p.n_vars
    q = np.asarray(
        p.quad_diag if p.quad_diag is not None else np.zeros(n), dtype=float
    )
    u = np.zeros(n)
    if p.neglog_idx is not None:
        u[p.neglog_idx] = p.neglog_wts
    hint = []
    if p.neglog_idx is not None:
        hint.extend(int(i) for i in p.neglog_idx)
    if p.dense_cols is not None:
        hint.extend(int(i) for i in p.dense_cols)
    if p.mse_constraint is None:
        return _Barrier(
            n=n,
            c=p.linear_cost.copy(),
            q=q,
            u=u,
            lb=np.zeros(n),
            ub=np.ones(n),
            G=p.G,
            h=p.h,
            mse=None,
            mse_slack=None,
            dense_hint=np.array(sorted(set(hint)), dtype=int),
        )
    lift = _PsdLift(p.mse_constraint, n)
    gamma = p.mse_constraint.gamma
    m = lift.m
    no = len(lift.pairs)
    n_tot = n + lift.n_extra
    tr_row = sp.csr_matrix(
        (np.ones(m), (np.zeros(m, dtype=int), lift.diag_cols)), shape=(1, n_tot)
    )
    if p.G is not None and p.G.shape[0] > 0:
        G = sp.vstack(
            [
                sp.hstack(
                    [p.G, sp.csr_matrix((p.G.shape[0], lift.n_extra))], format="csr"
                ),
                tr_row,
            ],
            format="csr",
        )
        h = np.concatenate([p.h, [gamma]])
    else:
        G, h = tr_row, np.array([gamma])
    hint.extend(int(i) for i in lift.cols)
    return _Barrier(
        n=n_tot,
        c=np.concatenate([p.linear_cost, np.zeros(lift.n_extra)]),
        q=np.concatenate([q, np.zeros(lift.n_extra)]),
        u=np.concatenate([u, np.zeros(lift.n_extra)]),
        lb=np.concatenate([np.zeros(n), np.zeros(m), np.full(no, -gamma)]),
        ub=np.concatenate([np.ones(n), np.full(m + no, gamma)]),
        G=G,
        h=h,
        mse=None,
        mse_slack=None,
        dense_hint=np.array(sorted(set(hint)), dtype=int),
        psd=lift,
    )


def phase1(
    p: StructuredProblem, cfg: SolverConfig | None = None
) -> tuple[np.ndarray | None, str]:
    """Strictly feasible point for `p`, or (None, reason) when infeasible.

    Single-slack relaxation: minimize s with every linear inequality relaxed
    by s, variables held in [eta, 1-eta], and (when present) the MSE bound
    relaxed to f <= gamma + s. The componentwise monotonicity of f gives a
    fast infeasibility certificate: f(1) > gamma dooms the whole program.
    """
    cfg = cfg or SolverConfig()
    n = p.n_vars
    eta = cfg.phase1_eta

    mc = p.mse_constraint
    if mc is not None:
        try:
            f_best = mse_rate(mc.scenario, mc.rates(np.ones(n)))
        except SingularInformation:
            return None, "MSE-rate undefined even at full rates (rank deficiency)"
        if f_best > mc.gamma:
            return None, (
                f"MSE-rate at full rates is {f_best:.6g} > gamma {mc.gamma:.6g}"
            )

    x0 = np.full(n, 0.5)
    viol = float("-inf")
    if p.G is not None and p.G.shape[0] > 0:
        viol = float(np.max(p.G @ x0 - p.h))
    mse_ok = True
    if mc is not None:
        try:
            mse_ok = mse_rate(mc.scenario, mc.rates(x0)) < mc.gamma - 1e-9
        except SingularInformation:
            mse_ok = False
    if mse_ok and viol < -1e-6:
        return x0, "interior box point accepted"

    # stage 1: single-slack LP over the linear rows and the box
    x_lin = x0
    if viol >= -1e-6:
        s_needed = max(1.0, viol + 1.0)
        lb = np.concatenate([np.full(n, eta), [-3.0]])
        ub = np.concatenate([np.full(n, 1.0 - eta), [s_needed + 1.0]])
        m = p.G.shape[0]
        G_aug = sp.hstack([p.G, sp.csr_matrix(-np.ones((m, 1)))], format="csr")
        hint = {n}
        if mc is not None:
            hint.update(int(i) for i in mc.var_idx if i >= 0)
        if p.neglog_idx is not None:
            hint.update(int(i) for i in p.neglog_idx)
        if p.dense_cols is not None:
            hint.update(int(i) for i in p.dense_cols)
        bar = _Barrier(
            n=n + 1,
            c=np.concatenate([np.zeros(n), [1.0]]),
            q=np.zeros(n + 1),
            u=np.zeros(n + 1),
            lb=lb,
            ub=ub,
            G=G_aug,
            h=p.h,
            mse=None,
            mse_slack=None,
            dense_hint=np.array(sorted(hint), dtype=int),
        )
        x_start = np.concatenate([x0, [s_needed]])
        target = -1e-6
        try:
            x, status, _, _, _ = _barrier_solve(
                bar, x_start, cfg, stop_early=lambda z: z[-1] < target
            )
        except NumericalBreakdown as exc:
            raise NumericalBreakdown(f"phase-1 failed: {exc}") from exc
        if x[-1] >= -cfg.phase1_margin:
            if status == Status.MAX_ITERATIONS:
                return None, "phase-1 did not converge"
            return None, (
                f"phase-1 optimal slack {x[-1]:.3e} certifies infeasibility"
            )
        x_lin = x[:n]
    if mc is None:
        return x_lin, "phase-1 point found"

    # stage 2: from a point satisfying the linear rows, drive the MSE-rate
    # itself down as a smooth barrier objective until it clears gamma.  This
    # avoids the ill-conditioned -log(gap) canyon a relaxed bound produces.
    def mse_at(z):
        try:
            return mse_rate(mc.scenario, mc.rates(z))
        except SingularInformation:
            return np.inf

    if mse_at(x_lin) < mc.gamma - 1e-9:
        return x_lin, "phase-1 point found"
    bar2 = _Barrier(
        n=n,
        c=np.zeros(n),
        q=np.zeros(n),
        u=np.zeros(n),
        lb=np.full(n, eta),
        ub=np.full(n, 1.0 - eta),
        G=p.G,
        h=p.h,
        mse=None,
        mse_slack=None,
        dense_hint=np.array(sorted(int(i) for i in mc.var_idx if i >= 0)),
        mse_obj=mc,
    )
    # stop once comfortably interior; tight instances simply run to the
    # minimum and are accepted whenever it clears gamma at all
    margin = max(1e-6, 0.02 * abs(mc.gamma))
    try:
        x, status, _, _, _ = _barrier_solve(
            bar2, x_lin, cfg, stop_early=lambda z: mse_at(z) < mc.gamma - margin
        )
    except NumericalBreakdown as exc:
        raise NumericalBreakdown(f"phase-1 failed: {exc}") from exc
    f_final = mse_at(x)
    if f_final < mc.gamma - cfg.phase1_margin:
        return x, "phase-1 point found"
    if status == Status.MAX_ITERATIONS:
        return None, "phase-1 did not converge"
    return None, (
        f"minimal MSE-rate {f_final:.6g} over the routing polytope exceeds "
        f"gamma {mc.gamma:.6g}"
    )


def solve(
    p: StructuredProblem,
    cfg: SolverConfig | None = None,
    x0: np.ndarray | None = None,
) -> SolveResult:
    """Barrier method over the structured program.

    A provided x0 must be strictly feasible; otherwise phase-1 runs first.
    """
    cfg = cfg or SolverConfig()
    bar = _to_barrier(p)

    def _prepare(z):
        """Clip into the open box and extend with lift coordinates."""
        z = np.clip(np.asarray(z, dtype=float), 1e-12, 1.0 - 1e-12)
        if bar.psd is not None:
            z = np.concatenate([z, bar.psd.initial_u(z)])
        return z

    x_start = None
    if x0 is not None and _strictly_feasible(p, x0):
        try:
            x_start = _prepare(x0)
        except NumericalBreakdown:
            x_start = None  # hairline feasibility; fall through to phase-1
    if x_start is None:
        try:
            x0, reason = phase1(p, cfg)
            if x0 is not None:
                x_start = _prepare(x0)
        except NumericalBreakdown as exc:
            return SolveResult(
                x=np.zeros(p.n_vars),
                status=Status.NUMERICAL_BREAKDOWN,
                objective=np.inf,
                max_violation=np.inf,
                kkt_res=np.inf,
                message=str(exc),
            )
        if x0 is None:
            return SolveResult(
                x=np.zeros(p.n_vars),
                status=Status.INFEASIBLE,
                objective=np.inf,
                max_violation=np.inf,
                kkt_res=np.inf,
                message=reason,
            )
    x0 = x_start[: p.n_vars]
    try:
        x, status, kkt, steps, trace = _barrier_solve(bar, x_start, cfg)
    except NumericalBreakdown as exc:
        return SolveResult(
            x=x0,
            status=Status.NUMERICAL_BREAKDOWN,
            objective=p.objective(x0),
            max_violation=p.max_violation(x0),
            kkt_res=np.inf,
            message=str(exc),
        )
    x = x[: p.n_vars]
    viol = p.max_violation(x)
    if status == Status.OPTIMAL and (viol > cfg.feas_tol or kkt > cfg.kkt_tol):
        status = Status.MAX_ITERATIONS
    return SolveResult(
        x=x,
        status=status,
        objective=p.objective(x),
        max_violation=viol,
        kkt_res=kkt,
        newton_steps=steps,
        objective_trace=tuple(trace),
    )


def _strictly_feasible(p: StructuredProblem, x: np.ndarray) -> bool:
    x = np.asarray(x, dtype=float)
    if x.shape != (p.n_vars,):
        return False
    if np.any(x <= 0) or np.any(x >= 1):
        return False
    if p.G is not None and p.G.shape[0] > 0:
        if np.min(p.h - p.G @ x) <= 0:
            return False
    if p.mse_constraint is not None:
        mc = p.mse_constraint
        try:
            if mse_rate(mc.scenario, mc.rates(x)) >= mc.gamma:
                return False
        except SingularInformation:
            return False
    return True
