"""Bounded-variable linear programming with exact infeasibility certificates.

Two-phase revised simplex over the system

    minimize    obj . x
    subject to  a_eq x  = b_eq
                a_ub x <= b_ub
                lb <= x <= ub        (lb >= 0, ub may be +inf)

Inequality rows receive slack columns; phase 1 adds one implicit artificial
column per row (sign chosen from the initial residual) and minimizes their
sum. When the phase-1 optimum is positive, its simplex multipliers yield a
Farkas ray proving infeasibility: with sigma = -y on equality rows and
pi = -y >= 0 on inequality rows,

    (a_eq^T sigma + a_ub^T pi)_j >= 0   for every variable free to increase,
    b_eq . sigma + b_ub . pi = -(phase-1 optimum) < 0.

Rays are emitted exactly as produced, without normalization. Pricing is
Dantzig with lowest-index tie-breaking, switching to Bland's rule after a
degenerate-pivot budget, so identical inputs give identical outcomes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass
class SimplexParams:
    feas_tol: float = 1e-9        # primal/dual feasibility
    strict_tol: float = 1e-7      # certificate strictness
    pivot_tol: float = 1e-10      # ratio-test pivot threshold
    degenerate_budget: int = 200  # degenerate pivots before Bland's rule
    max_iter: int = 200_000
    refactor_every: int = 80
    debug_certificates: bool = False  # verify every Farkas ray on emission


@dataclass
class LinearProgram:
    """Dense LP data. Treated as immutable by the solver."""

    obj: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray

    def __post_init__(self):
        n = len(self.obj)
        self.obj = np.asarray(self.obj, dtype=float)
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)
        self.b_eq = np.asarray(self.b_eq, dtype=float)
        self.b_ub = np.asarray(self.b_ub, dtype=float)
        self.a_eq = self._shape_rows(self.a_eq, len(self.b_eq), n)
        self.a_ub = self._shape_rows(self.a_ub, len(self.b_ub), n)
        if np.any(self.lb < 0):
            raise ValueError("variable lower bounds must be >= 0")
        if np.any(self.lb > self.ub):
            raise ValueError("variable bounds must satisfy lb <= ub")
        if not (np.all(np.isfinite(self.b_eq)) and np.all(np.isfinite(self.b_ub))):
            raise ValueError("right-hand sides must be finite")

    @property
    def num_vars(self) -> int:
        return len(self.obj)


@dataclass(frozen=True)
class FarkasRay:
    """Infeasibility certificate: sigma on equality rows, pi >= 0 on <= rows."""

    sigma: np.ndarray
    pi: np.ndarray


@dataclass(frozen=True)
class Basis:
    """Restartable simplex basis (column indices over vars+slacks+artificials)."""

    basic: tuple[int, ...]
    at_upper: frozenset[int]
    art_signs: tuple[int, ...]


@dataclass
class LpOutcome:
    status: str
    x: np.ndarray | None = None
    objective: float | None = None
    eq_duals: np.ndarray | None = None
    ineq_duals: np.ndarray | None = None
    ray: FarkasRay | None = None
    basis: Basis | None = None
    iterations: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status == OPTIMAL

    @property
    def is_infeasible(self) -> bool:
        return self.status == INFEASIBLE


class StandardForm:
    """LP in computational form: structural + slack columns, mutable rhs/bounds.

    Column layout: [0, n) structural, [n, n+m2) slacks of <= rows,
    [n+m2, n+m2+m) implicit artificials (one per row, never materialized).
    Row layout: equality rows first, then inequality rows.
    """

    def __init__(self, problem: LinearProgram):
        n = problem.num_vars
        m1 = len(problem.b_eq)
        m2 = len(problem.b_ub)
        self.n = n
        self.m1 = m1
        self.m2 = m2
        self.m = m1 + m2
        body = np.vstack([problem.a_eq, problem.a_ub]) if self.m else np.zeros((0, n))
        slack = np.zeros((self.m, m2))
        for i in range(m2):
            slack[m1 + i, i] = 1.0
        self.M = np.hstack([body, slack])  # (m, n + m2)
        self.q = np.concatenate([problem.b_eq, problem.b_ub])
        self.lb = np.concatenate([problem.lb, np.zeros(m2)])
        self.ub = np.concatenate([problem.ub, np.full(m2, np.inf)])
        self.obj = np.concatenate([problem.obj, np.zeros(m2)])

    def set_capacity_rhs(self, ineq_row: int, value: float) -> None:
        self.q[self.m1 + ineq_row] = value

    def fix_variable(self, j: int, fixed: bool) -> None:
        self.ub[j] = 0.0 if fixed else np.inf


def solve_lp(problem: LinearProgram, warmstart: Basis | None = None,
             params: SimplexParams | None = None) -> LpOutcome:
    """Solve an LP, returning Optimal duals or a Farkas ray on infeasibility."""
    return solve_standard(StandardForm(problem), warmstart, params)


def solve_standard(sf: StandardForm, warmstart: Basis | None = None,
                   params: SimplexParams | None = None) -> LpOutcome:
    params = params or SimplexParams()
    sim = _Simplex(sf, params)
    outcome = sim.solve(warmstart)
    if outcome.is_infeasible and params.debug_certificates:
        if not verify_farkas_standard(sf, outcome.ray, params):
            raise NumericalError("emitted Farkas ray failed verification")
    return outcome


# ---------------------------------------------------------------------------
# certificate checking
# ---------------------------------------------------------------------------


def verify_farkas(problem: LinearProgram, ray: FarkasRay,
                  params: SimplexParams | None = None) -> bool:
    """True iff the ray certifies infeasibility of the problem.

    Checks pi >= 0, that d = a_eq^T sigma + a_ub^T pi is nonnegative on every
    variable that may grow without bound, and that the certified gap

        b_eq.sigma + b_ub.pi - sum_j min(d_j lb_j, d_j ub_j)

    is below -strict_tol. For the plain system {A f = b, B f <= c, f >= 0}
    the bound sum vanishes and the conditions reduce to d >= 0 over non-fixed
    variables and b.sigma + c.pi < 0.
    """
    params = params or SimplexParams()
    sigma = np.asarray(ray.sigma, dtype=float)
    pi = np.asarray(ray.pi, dtype=float)
    if sigma.shape != (len(problem.b_eq),) or pi.shape != (len(problem.b_ub),):
        return False
    if not (np.all(np.isfinite(sigma)) and np.all(np.isfinite(pi))):
        return False
    if np.any(pi < -params.feas_tol):
        return False
    d = problem.a_eq.T @ sigma + problem.a_ub.T @ pi
    lo = 0.0
    for j in range(problem.num_vars):
        if np.isinf(problem.ub[j]):
            if d[j] < -params.feas_tol:
                return False
            lo += max(d[j], 0.0) * problem.lb[j]
        else:
            lo += min(d[j] * problem.lb[j], d[j] * problem.ub[j])
    gap = float(problem.b_eq @ sigma + problem.b_ub @ pi) - lo
    return gap <= -params.strict_tol


def verify_farkas_standard(sf: StandardForm, ray: FarkasRay,
                           params: SimplexParams | None = None) -> bool:
    return verify_farkas(_problem_view(sf), ray, params)


def _problem_view(sf: StandardForm) -> LinearProgram:
    n = sf.n
    return LinearProgram(
        obj=sf.obj[:n], lb=sf.lb[:n], ub=sf.ub[:n],
        a_eq=sf.M[: sf.m1, :n], b_eq=sf.q[: sf.m1],
        a_ub=sf.M[sf.m1:, :n], b_ub=sf.q[sf.m1:],
    )


# ---------------------------------------------------------------------------
# simplex core
# ---------------------------------------------------------------------------

_AT_LOWER = 0
_AT_UPPER = 1
_BASIC = 2


class _Simplex:
    """Bounded-variable revised simplex with explicit basis inverse."""

    def __init__(self, sf: StandardForm, params: SimplexParams):
        self.sf = sf
        self.p = params
        self.m = sf.m
        self.ncols = sf.n + sf.m2          # materialized columns
        self.total = self.ncols + self.m   # + implicit artificials
        self.art_signs = np.ones(self.m)
        self.lb = np.concatenate([sf.lb, np.zeros(self.m)])
        self.ub = np.concatenate([sf.ub, np.full(self.m, np.inf)])
        self.cost = np.zeros(self.total)
        self.status = np.full(self.total, _AT_LOWER, dtype=np.int8)
        self.basic = np.zeros(self.m, dtype=np.int64)
        self.binv = np.eye(self.m)
        self.xb = np.zeros(self.m)
        self.iterations = 0
        self.degenerate_run = 0
        self.bland = False
        self.pivots_since_refactor = 0

    # -- column access ------------------------------------------------------

    def _column(self, j: int) -> np.ndarray:
        if j < self.ncols:
            return self.sf.M[:, j]
        col = np.zeros(self.m)
        col[j - self.ncols] = self.art_signs[j - self.ncols]
        return col

    def _is_artificial(self, j) -> bool:
        return j >= self.ncols

    # -- setup --------------------------------------------------------------

    def _nonbasic_values(self) -> np.ndarray:
        vals = np.where(self.status[: self.ncols] == _AT_UPPER,
                        self.ub[: self.ncols], self.lb[: self.ncols])
        vals[self.status[: self.ncols] == _BASIC] = 0.0
        return vals

    def _recompute_xb(self) -> None:
        q_eff = self.sf.q - self.sf.M @ self._nonbasic_values()
        # nonbasic artificials sit at 0 and contribute nothing
        self.xb = self.binv @ q_eff

    def _refactor(self) -> None:
        bmat = np.empty((self.m, self.m))
        for r, j in enumerate(self.basic):
            bmat[:, r] = self._column(j)
        try:
            self.binv = np.linalg.inv(bmat)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("singular basis during refactorization") from exc
        self._recompute_xb()
        self.pivots_since_refactor = 0

    def _cold_start(self) -> None:
        n, m1, m2 = self.sf.n, self.sf.m1, self.sf.m2
        self.status[:] = _AT_LOWER
        residual = self.sf.q - self.sf.M[:, :n] @ self.sf.lb[:n]
        basic = []
        for i in range(self.m):
            is_ineq = i >= m1
            r = residual[i]
            if is_ineq and r >= 0:
                basic.append(n + (i - m1))      # slack carries the row
                self.ub[self.ncols + i] = 0.0   # artificial unused, fixed
                self.art_signs[i] = 1.0
            else:
                if is_ineq:
                    self.status[n + (i - m1)] = _AT_LOWER
                self.art_signs[i] = 1.0 if r >= 0 else -1.0
                self.ub[self.ncols + i] = np.inf
                basic.append(self.ncols + i)
        self.basic = np.array(basic, dtype=np.int64)
        self.status[self.basic] = _BASIC
        self.binv = np.eye(self.m)
        for r, j in enumerate(self.basic):
            if self._is_artificial(j) and self.art_signs[j - self.ncols] < 0:
                self.binv[r, r] = -1.0
        self._recompute_xb()

    def _try_warmstart(self, basis: Basis) -> bool:
        if len(basis.basic) != self.m:
            return False
        if any(j >= self.total for j in basis.basic):
            return False
        self.art_signs = np.array(basis.art_signs, dtype=float)
        if len(self.art_signs) != self.m:
            return False
        self.status[:] = _AT_LOWER
        for j in basis.at_upper:
            if j < self.ncols and np.isfinite(self.ub[j]):
                self.status[j] = _AT_UPPER
        self.basic = np.array(basis.basic, dtype=np.int64)
        self.status[self.basic] = _BASIC
        # artificials are frozen at zero outside phase 1
        self.ub[self.ncols:] = 0.0
        try:
            self._refactor()
        except NumericalError:
            return False
        tol = self.p.feas_tol * max(1.0, float(np.max(np.abs(self.sf.q))) if self.m else 1.0)
        lo = self.lb[self.basic] - 10 * tol
        hi = self.ub[self.basic] + 10 * tol
        return bool(np.all(self.xb >= lo) and np.all(self.xb <= hi))

    # -- pricing and pivoting -------------------------------------------------

    def _duals(self) -> np.ndarray:
        return self.cost[self.basic] @ self.binv

    def _reduced_costs(self, y: np.ndarray) -> np.ndarray:
        rc = np.empty(self.total)
        rc[: self.ncols] = self.cost[: self.ncols] - y @ self.sf.M
        rc[self.ncols:] = self.cost[self.ncols:] - y * self.art_signs
        return rc

    def _choose_entering(self, rc: np.ndarray) -> int | None:
        movable = self.ub - self.lb > self.p.pivot_tol
        at_lower = (self.status == _AT_LOWER) & movable & (rc < -self.p.feas_tol)
        at_upper = (self.status == _AT_UPPER) & movable & (rc > self.p.feas_tol)
        eligible = at_lower | at_upper
        if not np.any(eligible):
            return None
        idx = np.flatnonzero(eligible)
        if self.bland:
            return int(idx[0])
        return int(idx[np.argmax(np.abs(rc[idx]))])

    def _ratio_test(self, j: int, direction: float):
        """Max step for entering column j moving in `direction` from its bound.

        Returns (theta, leaving_row, leaving_to_upper, w) with leaving_row = -1
        for a bound flip of the entering variable, or None when unbounded.
        """
        w = direction * (self.binv @ self._column(j))
        tol = self.p.pivot_tol
        lo_gap = np.maximum(self.xb - self.lb[self.basic], 0.0)
        hi_gap = self.ub[self.basic] - self.xb
        thetas = np.full(self.m, np.inf)
        pos = w > tol
        thetas[pos] = lo_gap[pos] / w[pos]
        neg = (w < -tol) & np.isfinite(hi_gap)
        thetas[neg] = np.maximum(hi_gap[neg], 0.0) / (-w[neg])
        theta_own = self.ub[j] - self.lb[j]
        tmin = float(thetas.min()) if self.m else np.inf
        if tmin >= theta_own - tol and np.isfinite(theta_own):
            return theta_own, -1, False, w
        if not np.isfinite(tmin):
            return None
        ties = np.flatnonzero(thetas <= tmin + tol)
        if self.bland:
            row = int(ties[np.argmin(self.basic[ties])])
        else:
            row = int(ties[np.argmax(np.abs(w[ties]))])
        return float(thetas[row]), row, bool(w[row] < 0), w

    def _pivot(self, j: int, entering_from_upper: bool, theta, row, to_upper, w):
        if row < 0:
            # bound flip: entering variable moves to its other bound
            self.status[j] = _AT_LOWER if entering_from_upper else _AT_UPPER
            self.xb -= w * theta
            return
        leaving = self.basic[row]
        if self._is_artificial(leaving):
            self.status[leaving] = _AT_LOWER
        else:
            self.status[leaving] = _AT_UPPER if to_upper else _AT_LOWER
        self.xb -= w * theta
        entering_value = (self.ub[j] - theta) if entering_from_upper else (self.lb[j] + theta)
        direction = -1.0 if entering_from_upper else 1.0
        wcol = direction * w
        pivot_el = wcol[row]
        if abs(pivot_el) < self.p.pivot_tol:
            raise NumericalError("pivot element below tolerance")
        self.binv[row, :] /= pivot_el
        other = np.arange(self.m) != row
        self.binv[other, :] -= np.outer(wcol[other], self.binv[row, :])
        self.basic[row] = j
        self.status[j] = _BASIC
        self.xb[row] = entering_value
        self.pivots_since_refactor += 1
        if self.pivots_since_refactor >= self.p.refactor_every:
            self._refactor()

    def _iterate(self) -> str:
        """Run simplex to optimality on the current costs. Returns a status."""
        while True:
            if self.iterations >= self.p.max_iter:
                raise NumericalError("simplex iteration limit exceeded")
            y = self._duals()
            rc = self._reduced_costs(y)
            j = self._choose_entering(rc)
            if j is None:
                return OPTIMAL
            entering_from_upper = self.status[j] == _AT_UPPER
            direction = -1.0 if entering_from_upper else 1.0
            res = self._ratio_test(j, direction)
            if res is None:
                return UNBOUNDED
            theta, row, to_upper, w = res
            self.iterations += 1
            if theta <= self.p.pivot_tol:
                self.degenerate_run += 1
                if self.degenerate_run > self.p.degenerate_budget:
                    self.bland = True
            else:
                self.degenerate_run = 0
            self._pivot(j, entering_from_upper, theta, row, to_upper, w)

    # -- solution extraction ----------------------------------------------

    def _solution_vector(self) -> np.ndarray:
        x = self._nonbasic_values()
        full = np.concatenate([x, np.zeros(self.m)])
        full[self.basic] = self.xb
        return full[: self.sf.n]

    def _export_basis(self) -> Basis:
        at_upper = frozenset(int(j) for j in np.flatnonzero(self.status == _AT_UPPER))
        return Basis(
            basic=tuple(int(j) for j in self.basic),
            at_upper=at_upper,
            art_signs=tuple(int(s) for s in self.art_signs),
        )

    def _check_primal(self) -> bool:
        self._refactor()
        scale = max(1.0, float(np.max(np.abs(self.sf.q))) if self.m else 1.0)
        tol = 100 * self.p.feas_tol * scale
        return bool(
            np.all(self.xb >= self.lb[self.basic] - tol)
            and np.all(self.xb <= self.ub[self.basic] + tol)
        )

    # -- driver ---------------------------------------------------------------

    def solve(self, warmstart: Basis | None) -> LpOutcome:
        sf = self.sf
        scale = max(1.0, float(np.max(np.abs(sf.q))) if self.m else 1.0)
        warm_ok = warmstart is not None and self._try_warmstart(warmstart)
        if not warm_ok:
            self._cold_start()
            # phase 1: minimize total artificial infeasibility
            self.cost[:] = 0.0
            self.cost[self.ncols:] = 1.0
            status = self._iterate()
            if status == UNBOUNDED:
                raise NumericalError("phase 1 reported unbounded")
            self._refactor()
            phase1_obj = float(self.cost[self.basic] @ self.xb)
            if phase1_obj > self.p.feas_tol * scale * 10:
                y = self._duals()
                sigma = -y[: sf.m1]
                pi = np.maximum(-y[sf.m1:], 0.0)
                return LpOutcome(
                    status=INFEASIBLE,
                    ray=FarkasRay(sigma=sigma.copy(), pi=pi.copy()),
                    basis=self._export_basis(),
                    iterations=self.iterations,
                )
            # freeze artificials for phase 2
            self.ub[self.ncols:] = 0.0

        # phase 2: true objective
        self.cost[: self.ncols] = np.concatenate([sf.obj[: sf.n], np.zeros(sf.m2)])
        self.cost[self.ncols:] = 0.0
        for attempt in range(3):
            status = self._iterate()
            if status == UNBOUNDED:
                return LpOutcome(status=UNBOUNDED, iterations=self.iterations)
            if self._check_primal():
                break
            if attempt == 2:
                raise NumericalError("primal feasibility lost and not recovered")
        y = self._duals()
        x = self._solution_vector()
        return LpOutcome(
            status=OPTIMAL,
            x=x,
            objective=float(sf.obj[: sf.n] @ x),
            eq_duals=y[: sf.m1].copy(),
            ineq_duals=np.maximum(-y[sf.m1:], 0.0),
            basis=self._export_basis(),
            iterations=self.iterations,
        )


# ---------------------------------------------------------------------------
# debug fixture dump
# ---------------------------------------------------------------------------


def dump_lp(problem: LinearProgram) -> str:
    """Render an LP to the text fixture format (repr round-trips floats)."""
    lines = [f"vars {problem.num_vars}"]
    for j in range(problem.num_vars):
        lines.append(
            f"v {float(problem.lb[j])!r} {float(problem.ub[j])!r} {float(problem.obj[j])!r}"
        )
    for label, mat, rhs in (("eq", problem.a_eq, problem.b_eq),
                            ("ub", problem.a_ub, problem.b_ub)):
        for i in range(len(rhs)):
            coeffs = " ".join(repr(float(c)) for c in mat[i])
            lines.append(f"{label} {float(rhs[i])!r} : {coeffs}")
    return "\n".join(lines) + "\n"


def load_lp(text: str) -> LinearProgram:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0].split()
    n = int(header[1])
    lb, ub, obj = [], [], []
    rows_eq, rhs_eq, rows_ub, rhs_ub = [], [], [], []
    for ln in lines[1:]:
        kind, rest = ln.split(None, 1)
        if kind == "v":
            lo, hi, c = rest.split()
            lb.append(float(lo)); ub.append(float(hi)); obj.append(float(c))
        else:
            rhs_part, coeff_part = rest.split(":")
            row = [float(c) for c in coeff_part.split()]
            if kind == "eq":
                rows_eq.append(row); rhs_eq.append(float(rhs_part))
            else:
                rows_ub.append(row); rhs_ub.append(float(rhs_part))
    return LinearProgram(
        obj=np.array(obj), lb=np.array(lb), ub=np.array(ub),
        a_eq=np.array(rows_eq).reshape(-1, n), b_eq=np.array(rhs_eq),
        a_ub=np.array(rows_ub).reshape(-1, n), b_ub=np.array(rhs_ub),
    )
