"""Scenario feasibility subproblems and Benders feasibility cuts.

Each scenario asks whether all demands can be routed on the surviving edges
within the capacity installed by the master candidate. The LP is kept as a
single mutable template whose row/column layout never changes: switching
scenario only rewrites capacity right-hand sides and the fixed-to-zero flags
on the failed edge's arcs. An infeasible solve yields a Farkas ray (sigma on
flow-conservation rows, pi >= 0 on capacity rows) from which the cut

    sum_{e operational} pi_e * sum_m u_{e,m} * y_{e,m}  >=
        - sum_{d,v} sigma_{d,v} * b_{d,v} - sum_{e operational} pi_e * pre_e

is read off. Preinstalled capacity is folded into the right-hand side.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ShapeError, SolverFailure
from .instance import NetworkInstance, Scenario
from .lp import (
    Basis,
    LinearProgram,
    SimplexParams,
    StandardForm,
    solve_standard,
)

COEFF_DROP_TOL = 1e-10      # near-zero ray entries dropped from cuts
DUPLICATE_TOL = 1e-8        # cut equality tolerance after max-coeff scaling


@dataclass(frozen=True)
class BendersCut:
    """Feasibility cut sum(coeffs * y) >= rhs over (edge id, module index)."""

    coeffs: tuple[tuple[tuple[str, int], float], ...]
    rhs: float
    origin: tuple[str, int]  # (scenario id, iteration)

    def coeff_dict(self) -> dict[tuple[str, int], float]:
        return dict(self.coeffs)


def violation(cut: BendersCut, ybar: dict[tuple[str, int], int]) -> float:
    """rhs - sum(coeffs * ybar); positive iff ybar violates the cut."""
    lhs = sum(c * ybar.get(key, 0) for key, c in cut.coeffs)
    return cut.rhs - lhs


@dataclass
class ScenarioOutcome:
    scenario_id: str
    feasible: bool
    cut: BendersCut | None
    violation: float
    solve_time: float


class ScenarioTemplate:
    """Mutable scenario LP sharing one layout across all scenarios.

    Flow variable f[d, a] has index d * num_arcs + a where arcs 2e, 2e+1 are
    the two directions of edge e. Equality rows are flow conservation per
    (demand, node); inequality row e is edge e's capacity. A per-scenario
    basis cache provides warmstarts; stale bases are legal starts and are
    never invalidated.
    """

    def __init__(self, instance: NetworkInstance, params: SimplexParams | None = None):
        self.instance = instance
        self.params = params or SimplexParams()
        self.num_arcs = instance.num_arcs
        n_flow = len(instance.demands) * self.num_arcs
        n_nodes = len(instance.nodes)
        n_edges = len(instance.edges)

        a_eq = np.zeros((len(instance.demands) * n_nodes, n_flow))
        b_eq = np.zeros(len(instance.demands) * n_nodes)
        for di, d in enumerate(instance.demands):
            base = di * self.num_arcs
            for ei in range(n_edges):
                e = instance.edges[ei]
                ui = instance.node_index[e.u]
                vi = instance.node_index[e.v]
                fwd = base + 2 * ei       # u -> v
                rev = base + 2 * ei + 1   # v -> u
                a_eq[di * n_nodes + ui, fwd] += 1.0
                a_eq[di * n_nodes + vi, fwd] -= 1.0
                a_eq[di * n_nodes + vi, rev] += 1.0
                a_eq[di * n_nodes + ui, rev] -= 1.0
            b_eq[di * n_nodes + instance.node_index[d.source]] = d.value
            b_eq[di * n_nodes + instance.node_index[d.target]] = -d.value

        a_ub = np.zeros((n_edges, n_flow))
        for di in range(len(instance.demands)):
            base = di * self.num_arcs
            for ei in range(n_edges):
                a_ub[ei, base + 2 * ei] = 1.0
                a_ub[ei, base + 2 * ei + 1] = 1.0

        problem = LinearProgram(
            obj=np.zeros(n_flow),
            lb=np.zeros(n_flow),
            ub=np.full(n_flow, np.inf),
            a_eq=a_eq, b_eq=b_eq,
            a_ub=a_ub, b_ub=np.zeros(n_edges),
        )
        self.sf = StandardForm(problem)
        self.current_failed: frozenset[str] = frozenset()
        self.basis_cache: dict[str, Basis] = {}

    # -- scenario state -----------------------------------------------------

    def capacity_of(self, edge_id: str, ybar: dict[tuple[str, int], int]) -> float:
        e = self.instance.edge(edge_id)
        return e.preinstalled + sum(
            e.modules[m].capacity * ybar.get((edge_id, m), 0)
            for m in range(len(e.modules))
        )

    def _check_shape(self, ybar) -> None:
        for (eid, m) in ybar:
            if eid not in self.instance.edge_index:
                raise ShapeError(f"unknown edge {eid!r} in candidate")
            if not 0 <= m < len(self.instance.edge(eid).modules):
                raise ShapeError(f"edge {eid!r} has no module index {m}")

    def adjust(self, scenario: Scenario, ybar: dict[tuple[str, int], int]) -> None:
        """Point the template at `scenario` under candidate `ybar`.

        Capacity rhs of operational edges becomes preinstalled + installed;
        failed edges get rhs 0 with both arcs fixed to zero. Fixed flags from
        the previous scenario are cleared first.
        """
        self._check_shape(ybar)
        inst = self.instance
        for eid in self.current_failed:
            ei = inst.edge_index[eid]
            for di in range(len(inst.demands)):
                base = di * self.num_arcs
                self.sf.fix_variable(base + 2 * ei, False)
                self.sf.fix_variable(base + 2 * ei + 1, False)
        for ei, e in enumerate(inst.edges):
            if e.id in scenario.failed_edges:
                self.sf.set_capacity_rhs(ei, 0.0)
            else:
                self.sf.set_capacity_rhs(ei, self.capacity_of(e.id, ybar))
        for eid in scenario.failed_edges:
            ei = inst.edge_index[eid]
            for di in range(len(inst.demands)):
                base = di * self.num_arcs
                self.sf.fix_variable(base + 2 * ei, True)
                self.sf.fix_variable(base + 2 * ei + 1, True)
        self.current_failed = scenario.failed_edges

    # -- solving ------------------------------------------------------------

    def _extract_cut(self, ray, scenario: Scenario, ybar, iteration: int) -> BendersCut:
        inst = self.instance
        coeffs = []
        rhs = float(-(self.sf.q[: self.sf.m1] @ ray.sigma))
        for ei, e in enumerate(inst.edges):
            if e.id in scenario.failed_edges:
                continue
            pi_e = float(ray.pi[ei])
            if abs(pi_e) < COEFF_DROP_TOL:
                continue
            rhs -= pi_e * e.preinstalled
            for m, mod in enumerate(e.modules):
                coeffs.append(((e.id, m), pi_e * mod.capacity))
        return BendersCut(coeffs=tuple(coeffs), rhs=rhs, origin=(scenario.id, iteration))

    def check_scenario(self, scenario: Scenario, ybar: dict[tuple[str, int], int],
                       iteration: int = 0) -> ScenarioOutcome:
        """Solve the scenario subproblem; emit a cut when infeasible.

        Warmstarts from the per-scenario basis cache, falling back to one
        cold solve on numerical failure before raising SolverFailure.
        """
        self.adjust(scenario, ybar)
        start = time.perf_counter()
        warm = self.basis_cache.get(scenario.id)
        try:
            outcome = solve_standard(self.sf, warmstart=warm, params=self.params)
        except NumericalError:
            if warm is None:
                raise SolverFailure(f"subproblem {scenario.id} failed cold") from None
            try:
                outcome = solve_standard(self.sf, warmstart=None, params=self.params)
            except NumericalError as exc:
                raise SolverFailure(
                    f"subproblem {scenario.id} failed warm and cold: {exc}"
                ) from exc
        elapsed = time.perf_counter() - start
        if outcome.basis is not None:
            self.basis_cache[scenario.id] = outcome.basis
        if outcome.is_optimal:
            return ScenarioOutcome(scenario.id, True, None, 0.0, elapsed)
        cut = self._extract_cut(outcome.ray, scenario, ybar, iteration)
        return ScenarioOutcome(scenario.id, False, cut, violation(cut, ybar), elapsed)


def build_scenario_lp(instance: NetworkInstance, scenario: Scenario | None,
                      ybar: dict[tuple[str, int], int]) -> LinearProgram:
    """Fresh scenario LP built from scratch (cross-check path for tests)."""
    failed = scenario.failed_edges if scenario is not None else frozenset()
    num_arcs = instance.num_arcs
    n_flow = len(instance.demands) * num_arcs
    n_nodes = len(instance.nodes)
    a_eq = np.zeros((len(instance.demands) * n_nodes, n_flow))
    b_eq = np.zeros(len(instance.demands) * n_nodes)
    for di, d in enumerate(instance.demands):
        base = di * num_arcs
        for ei, e in enumerate(instance.edges):
            ui = instance.node_index[e.u]
            vi = instance.node_index[e.v]
            a_eq[di * n_nodes + ui, base + 2 * ei] += 1.0
            a_eq[di * n_nodes + vi, base + 2 * ei] -= 1.0
            a_eq[di * n_nodes + vi, base + 2 * ei + 1] += 1.0
            a_eq[di * n_nodes + ui, base + 2 * ei + 1] -= 1.0
        b_eq[di * n_nodes + instance.node_index[d.source]] = d.value
        b_eq[di * n_nodes + instance.node_index[d.target]] = -d.value
    rows = []
    rhs = []
    ub = np.full(n_flow, np.inf)
    for ei, e in enumerate(instance.edges):
        if e.id in failed:
            for di in range(len(instance.demands)):
                base = di * num_arcs
                ub[base + 2 * ei] = 0.0
                ub[base + 2 * ei + 1] = 0.0
            continue
        row = np.zeros(n_flow)
        for di in range(len(instance.demands)):
            base = di * num_arcs
            row[base + 2 * ei] = 1.0
            row[base + 2 * ei + 1] = 1.0
        rows.append(row)
        cap = e.preinstalled + sum(
            mod.capacity * ybar.get((e.id, m), 0) for m, mod in enumerate(e.modules)
        )
        rhs.append(cap)
    return LinearProgram(
        obj=np.zeros(n_flow), lb=np.zeros(n_flow), ub=ub,
        a_eq=a_eq, b_eq=b_eq,
        a_ub=np.array(rows).reshape(-1, n_flow), b_ub=np.array(rhs),
    )


@dataclass
class CutPool:
    """Master cut pool with duplicate suppression.

    A new cut identical to a stored one after scaling both to a maximum
    coefficient of 1 (tolerance DUPLICATE_TOL, rhs included) is discarded.
    """

    cuts: list[BendersCut] = field(default_factory=list)
    _normalized: list[dict] = field(default_factory=list)

    @staticmethod
    def _normal_form(cut: BendersCut):
        if not cut.coeffs:
            return None
        scale = max(abs(c) for _, c in cut.coeffs)
        if scale <= 0:
            return None
        return {key: c / scale for key, c in cut.coeffs}, cut.rhs / scale

    def is_duplicate(self, cut: BendersCut) -> bool:
        norm = self._normal_form(cut)
        if norm is None:
            return False
        coeffs, rhs = norm
        for stored in self._normalized:
            if stored is None:
                continue
            scoeffs, srhs = stored
            if abs(srhs - rhs) > DUPLICATE_TOL:
                continue
            if set(scoeffs) != set(coeffs):
                continue
            if all(abs(scoeffs[k] - coeffs[k]) <= DUPLICATE_TOL for k in coeffs):
                return True
        return False

    def add(self, cut: BendersCut) -> None:
        self.cuts.append(cut)
        self._normalized.append(self._normal_form(cut))

    def __len__(self) -> int:
        return len(self.cuts)
