"""Exhaustive-enumeration oracle.

Solves the fixed-selection beamforming subproblem for every one of the L**N
phase selections and keeps the best.  Exponential by construction; guarded by
an explicit budget so nobody enumerates a large instance by accident.  Used
as ground truth to verify the decomposition solver.
"""

from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import ScenarioConfig
from .conic import NumericalFailure
from .gbd import solve_primal
from .reformulation import DesignPoint, PhaseSelection, ReformulatedData

DEFAULT_BUDGET = 4096


class BudgetExceeded(RuntimeError):
    """The instance has more selections than the enumeration budget allows."""


@dataclass
class SelectionRecord:
    selection: PhaseSelection
    status: str              # "Optimal" | "Infeasible" | "NumericalFailure"
    objective: float         # watts (inf when not optimal)
    detail: str = ""


@dataclass
class OracleResult:
    objective: float                       # inf when no selection is feasible
    selection: PhaseSelection | None
    design: DesignPoint | None
    n_feasible: int
    n_infeasible: int
    n_failed: int
    records: list[SelectionRecord] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.selection is not None

    @property
    def clean(self) -> bool:
        """True when every selection solved without numerical failure."""
        return self.n_failed == 0


def enumerate_selections(data: ReformulatedData, cfg: ScenarioConfig,
                         budget: int = DEFAULT_BUDGET,
                         keep_records: bool = False,
                         workers: int = 0) -> OracleResult:
    """Brute-force global optimum over all phase selections.

    Selections are visited in lexicographic order.  Subproblems that fail
    numerically are recorded and excluded from the optimum (flagged via
    ``n_failed``) rather than aborting the whole sweep.  ``workers > 1``
    parallelizes the per-selection solves with a deterministic reduction.
    """
    N, L = data.N, data.L
    total = L ** N
    if total > budget:
        raise BudgetExceeded(
            f"{L}**{N} = {total} selections exceeds the budget of {budget}; "
            "raise `budget` explicitly if this is intentional")

    selections = [PhaseSelection(levels) for levels in itertools.product(range(L), repeat=N)]

    def solve_one(sel: PhaseSelection) -> tuple[SelectionRecord, DesignPoint | None]:
        try:
            res = solve_primal(data, sel, cfg)
        except NumericalFailure as exc:
            return SelectionRecord(sel, "NumericalFailure", math.inf, str(exc)), None
        if res.feasible:
            return SelectionRecord(sel, "Optimal", res.objective), res.design
        return SelectionRecord(sel, "Infeasible", math.inf), None

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(solve_one, selections))
    else:
        outcomes = [solve_one(sel) for sel in selections]

    best = OracleResult(objective=math.inf, selection=None, design=None,
                        n_feasible=0, n_infeasible=0, n_failed=0)
    for record, design in outcomes:  # lexicographic order: ties keep the first
        if record.status == "Optimal":
            best.n_feasible += 1
            if record.objective < best.objective:
                best.objective = record.objective
                best.selection = record.selection
                best.design = design
        elif record.status == "Infeasible":
            best.n_infeasible += 1
        else:
            best.n_failed += 1
        if keep_records:
            best.records.append(record)
    return best


def export_records_csv(result: OracleResult, path) -> None:
    """Per-selection table (requires enumerate_selections(keep_records=True))."""
    if not result.records:
        raise ValueError("no per-selection records were kept")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["levels", "status", "objective_watts"])
        for rec in result.records:
            writer.writerow([";".join(str(v) for v in rec.selection.levels),
                             rec.status, repr(rec.objective)])
