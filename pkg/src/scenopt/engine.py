"""Scenario programs and batched constraint discarding.

A scenario program is a linear objective over a box, plus one block of
affine rows per sampled scenario.  Scenarios carry distinct integer labels;
the labels induce the linear order used everywhere a deterministic choice
among scenarios is needed.

The central operation is the removal cascade: a chain of ell+1 programs in
which each stage solves on the scenarios that survive, identifies the
support scenarios of its minimizer, and discards a batch of exactly d of
them (the support set, padded with the smallest-label leftovers when the
support is thin).  The union of all per-stage batches, including the final
stage's recorded batch, forms a candidate compression set of cardinality
(ell+1)*d whose reconstruction property can be checked by re-running the
cascade on the candidate alone.

A greedy one-at-a-time removal baseline is provided for comparisons, along
with instrumentation that counts stage-level solves separately from the
support-detection and candidate re-solves.

Cascade execution is sequential by construction; independent cascades on
distinct programs may run concurrently since all inputs are immutable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

import numpy as np

from scenopt.lp import (
    DEFAULT_TOL,
    LinearProgram,
    LpInputError,
    LpSolution,
    LpStatus,
    LpTolerances,
    solve,
)


class CascadeError(RuntimeError):
    """Base class for scheme-level failures."""


class AssumptionViolated(CascadeError):
    """A stage in fully-supported mode had a support set of the wrong size."""

    def __init__(self, stage: int, support_size: int, d: int):
        self.stage = stage
        self.support_size = support_size
        super().__init__(
            f"stage {stage}: support set has {support_size} scenarios, "
            f"expected exactly {d} in fully-supported mode"
        )


class DegeneracyDetected(CascadeError):
    """A stage produced more support scenarios than the dimension allows."""

    def __init__(self, stage: int, support_size: int, d: int):
        self.stage = stage
        super().__init__(
            f"stage {stage}: {support_size} support scenarios exceed d={d}; "
            "the instance is degenerate"
        )


class InsufficientScenarios(CascadeError):
    """Not enough scenarios remain for the requested removals."""


class StageSolveError(CascadeError):
    """A stage LP came back infeasible or unbounded."""

    def __init__(self, stage: Optional[int], status: LpStatus):
        self.stage = stage
        self.status = status
        where = "stage program" if stage is None else f"stage {stage}"
        super().__init__(f"{where} returned status {status.value}")


class RemovalMode(Enum):
    FULLY_SUPPORTED = "fully-supported"
    REGULARIZED = "regularized"


@dataclass(frozen=True)
class Scenario:
    """One sampled uncertainty realization: a label plus its affine rows."""

    label: int
    coeffs: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float, ndmin=2)
        rhs = np.array(self.rhs, dtype=float, ndmin=1)
        if coeffs.shape[0] == 0:
            raise LpInputError(f"scenario {self.label}: block must be non-empty")
        if rhs.shape[0] != coeffs.shape[0]:
            raise LpInputError(f"scenario {self.label}: rhs length mismatch")
        if not (np.all(np.isfinite(coeffs)) and np.all(np.isfinite(rhs))):
            raise LpInputError(f"scenario {self.label}: non-finite entries")
        coeffs.setflags(write=False)
        rhs.setflags(write=False)
        object.__setattr__(self, "label", int(self.label))
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "rhs", rhs)

    @property
    def n_rows(self) -> int:
        return self.rhs.shape[0]


@dataclass(frozen=True)
class ScenarioProgram:
    """Linear cost over a box, with labeled scenario constraint blocks."""

    cost: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    scenarios: tuple[Scenario, ...]

    def __post_init__(self):
        scenarios = tuple(self.scenarios)
        if not scenarios:
            raise LpInputError("a scenario program needs at least one scenario")
        base = LinearProgram(
            cost=self.cost,
            row_coeffs=np.zeros((0, len(np.atleast_1d(self.cost)))),
            row_rhs=np.zeros(0),
            lower=self.lower,
            upper=self.upper,
        )
        d = base.d
        labels = [s.label for s in scenarios]
        if len(set(labels)) != len(labels):
            raise LpInputError("scenario labels must be distinct")
        for s in scenarios:
            if s.coeffs.shape[1] != d:
                raise LpInputError(
                    f"scenario {s.label}: rows have width {s.coeffs.shape[1]}, "
                    f"expected {d}"
                )
        object.__setattr__(self, "cost", base.cost)
        object.__setattr__(self, "lower", base.lower)
        object.__setattr__(self, "upper", base.upper)
        object.__setattr__(self, "scenarios", scenarios)
        object.__setattr__(self, "_by_label", {s.label: s for s in scenarios})

    @property
    def d(self) -> int:
        return self.cost.shape[0]

    @property
    def m(self) -> int:
        return len(self.scenarios)

    @property
    def labels(self) -> frozenset[int]:
        return frozenset(self._by_label)

    @property
    def base(self) -> LinearProgram:
        return LinearProgram(
            cost=self.cost,
            row_coeffs=np.zeros((0, self.d)),
            row_rhs=np.zeros(0),
            lower=self.lower,
            upper=self.upper,
        )

    def scenario(self, label: int) -> Scenario:
        return self._by_label[label]

    def assemble(self, labels: Iterable[int]) -> tuple[LinearProgram, np.ndarray]:
        """Build the LP enforcing the given labels; also map rows to owners."""
        ordered = sorted(labels)
        missing = [lab for lab in ordered if lab not in self._by_label]
        if missing:
            raise LpInputError(f"unknown scenario labels: {missing}")
        if ordered:
            blocks = [self._by_label[lab] for lab in ordered]
            coeffs = np.vstack([b.coeffs for b in blocks])
            rhs = np.concatenate([b.rhs for b in blocks])
            owners = np.concatenate(
                [np.full(b.n_rows, b.label, dtype=int) for b in blocks]
            )
        else:
            coeffs = np.zeros((0, self.d))
            rhs = np.zeros(0)
            owners = np.zeros(0, dtype=int)
        lp = LinearProgram(
            cost=self.cost,
            row_coeffs=coeffs,
            row_rhs=rhs,
            lower=self.lower,
            upper=self.upper,
        )
        return lp, owners

    def restrict(self, labels: Iterable[int]) -> "ScenarioProgram":
        """Program over a subset of scenarios, labels preserved."""
        keep = set(labels)
        return ScenarioProgram(
            cost=self.cost,
            lower=self.lower,
            upper=self.upper,
            scenarios=tuple(s for s in self.scenarios if s.label in keep),
        )

    # JSON wire format:
    # { "d": int, "cost": [..], "bounds": [[lo, hi], ..],
    #   "scenarios": [ {"label": int, "rows": [{"a": [..], "b": r}, ..]}, ..] }
    # A null bound entry means the variable is unbounded on that side.
    def to_dict(self) -> dict:
        def _b(v: float) -> Optional[float]:
            return None if not np.isfinite(v) else float(v)

        return {
            "d": self.d,
            "cost": self.cost.tolist(),
            "bounds": [[_b(lo), _b(hi)] for lo, hi in zip(self.lower, self.upper)],
            "scenarios": [
                {
                    "label": s.label,
                    "rows": [
                        {"a": a.tolist(), "b": float(b)}
                        for a, b in zip(s.coeffs, s.rhs)
                    ],
                }
                for s in self.scenarios
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioProgram":
        try:
            d = int(data["d"])
            cost = np.asarray(data["cost"], dtype=float)
            bounds = data["bounds"]
            lower = np.array(
                [-np.inf if b[0] is None else float(b[0]) for b in bounds]
            )
            upper = np.array(
                [np.inf if b[1] is None else float(b[1]) for b in bounds]
            )
            scenarios = tuple(
                Scenario(
                    label=int(s["label"]),
                    coeffs=np.asarray([row["a"] for row in s["rows"]], dtype=float),
                    rhs=np.asarray([row["b"] for row in s["rows"]], dtype=float),
                )
                for s in data["scenarios"]
            )
        except (KeyError, TypeError, IndexError) as exc:
            raise LpInputError(f"malformed scenario program: {exc}") from exc
        program = cls(cost=cost, lower=lower, upper=upper, scenarios=scenarios)
        if program.d != d:
            raise LpInputError(f"declared d={d} but cost has length {program.d}")
        return program

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioProgram":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise LpInputError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)


@dataclass
class SolveCounts:
    """Tally of LP solves by role; stage solves are the headline number."""

    stage_solves: int = 0
    support_solves: int = 0
    candidate_solves: int = 0
    degeneracy_solves: int = 0

    def total(self) -> int:
        return (
            self.stage_solves
            + self.support_solves
            + self.candidate_solves
            + self.degeneracy_solves
        )


@dataclass(frozen=True)
class StageRecord:
    k: int
    minimizer: np.ndarray
    objective: float
    support: frozenset[int]
    padding: frozenset[int]
    removed: frozenset[int]
    degenerate: Optional[bool]

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "minimizer": np.asarray(self.minimizer).tolist(),
            "objective": self.objective,
            "support": sorted(self.support),
            "padding": sorted(self.padding),
            "removed": sorted(self.removed),
            "degenerate": self.degenerate,
        }


@dataclass(frozen=True)
class CascadeTrace:
    mode: RemovalMode
    stages: tuple[StageRecord, ...]
    final_x: np.ndarray
    final_objective: float
    compression_candidate: frozenset[int]
    counts: SolveCounts

    @property
    def ell(self) -> int:
        return len(self.stages) - 1

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "ell": self.ell,
            "stages": [s.to_dict() for s in self.stages],
            "final_x": np.asarray(self.final_x).tolist(),
            "final_objective": self.final_objective,
            "compression_candidate": sorted(self.compression_candidate),
            "solve_counts": {
                "stage": self.counts.stage_solves,
                "support": self.counts.support_solves,
                "candidate": self.counts.candidate_solves,
                "degeneracy": self.counts.degeneracy_solves,
            },
        }


@dataclass(frozen=True)
class GreedyStep:
    step: int
    removed_label: int
    objective: float


@dataclass(frozen=True)
class GreedyTrace:
    steps: tuple[GreedyStep, ...]
    final_x: np.ndarray
    final_objective: float
    counts: SolveCounts

    def to_dict(self) -> dict:
        return {
            "steps": [
                {"step": s.step, "removed_label": s.removed_label,
                 "objective": s.objective}
                for s in self.steps
            ],
            "final_x": np.asarray(self.final_x).tolist(),
            "final_objective": self.final_objective,
            "solve_counts": {
                "stage": self.counts.stage_solves,
                "support": self.counts.support_solves,
                "candidate": self.counts.candidate_solves,
                "degeneracy": self.counts.degeneracy_solves,
            },
        }


# ---------------------------------------------------------------------------
# Stage-level operations.
# ---------------------------------------------------------------------------


def solve_stage(
    program: ScenarioProgram,
    active_labels: Optional[Iterable[int]] = None,
    tol: LpTolerances = DEFAULT_TOL,
    refine: bool = True,
) -> LpSolution:
    """Solve the program restricted to the given labels (all by default)."""
    labels = program.labels if active_labels is None else set(active_labels)
    lp, _ = program.assemble(labels)
    return solve(lp, tol=tol, refine=refine)


def _solved_stage(program, labels, tol, stage=None):
    lp, owners = program.assemble(labels)
    sol = solve(lp, tol=tol)
    if not sol.is_optimal:
        raise StageSolveError(stage, sol.status)
    return lp, owners, sol


def _support_from_solution(program, labels, sol, owners, tol, counts,
                           shortcut=True):
    """Labels whose removal moves the minimizer by more than tol.x.

    With the shortcut, only scenarios owning at least one active row are
    tested: a scenario whose rows are all slack at the tie-broken minimizer
    cannot change it, because the minimizer stays feasible and lexicographic
    optimality is preserved on any enlargement of the feasible set that
    keeps a neighborhood of the optimum.
    """
    if shortcut:
        candidate_labels = sorted({int(owners[i]) for i in sol.active_rows})
    else:
        candidate_labels = sorted(labels)
    support = []
    for lab in candidate_labels:
        reduced = set(labels) - {lab}
        lp_red, _ = program.assemble(reduced)
        sol_red = solve(lp_red, tol=tol)
        if counts is not None:
            counts.support_solves += 1
        if sol_red.status is LpStatus.UNBOUNDED:
            # the minimizer ceased to exist, which certainly changes it
            support.append(lab)
            continue
        if not sol_red.is_optimal:
            raise StageSolveError(None, sol_red.status)
        if np.max(np.abs(sol_red.x - sol.x)) > tol.x:
            support.append(lab)
    return frozenset(support)


def support_set(
    program: ScenarioProgram,
    active_labels: Optional[Iterable[int]] = None,
    tol: LpTolerances = DEFAULT_TOL,
    shortcut: bool = True,
) -> frozenset[int]:
    """Support scenarios of the restricted program's minimizer."""
    labels = program.labels if active_labels is None else set(active_labels)
    _, owners, sol = _solved_stage(program, labels, tol)
    return _support_from_solution(program, labels, sol, owners, tol, None,
                                  shortcut=shortcut)


def is_nondegenerate(
    program: ScenarioProgram,
    active_labels: Optional[Iterable[int]] = None,
    tol: LpTolerances = DEFAULT_TOL,
) -> bool:
    """True iff enforcing only the support set reproduces the minimizer."""
    labels = program.labels if active_labels is None else set(active_labels)
    _, owners, sol = _solved_stage(program, labels, tol)
    support = _support_from_solution(program, labels, sol, owners, tol, None)
    lp_sup, _ = program.assemble(support)
    sol_sup = solve(lp_sup, tol=tol)
    if not sol_sup.is_optimal:
        return False
    return bool(np.max(np.abs(sol_sup.x - sol.x)) <= tol.x)


def padding_set(
    available_labels: Iterable[int],
    support: Iterable[int],
    nu: int,
) -> frozenset[int]:
    """The nu smallest labels among the available non-support scenarios."""
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    pool = sorted(set(available_labels) - set(support))
    if len(pool) < nu:
        raise InsufficientScenarios(
            f"need {nu} padding scenarios but only {len(pool)} remain"
        )
    return frozenset(pool[:nu])


# ---------------------------------------------------------------------------
# The removal cascade.
# ---------------------------------------------------------------------------


def run_cascade(
    program: ScenarioProgram,
    ell: int,
    mode: RemovalMode = RemovalMode.REGULARIZED,
    tol: LpTolerances = DEFAULT_TOL,
    record_degeneracy: bool = True,
    _allow_exact_cover: bool = False,
) -> CascadeTrace:
    """Run the ell+1 stage removal cascade and record its full trace.

    Each stage k solves on the surviving scenarios and determines a batch
    R_k of exactly d labels: the support set alone in fully-supported mode
    (raising AssumptionViolated when its size differs from d), or the
    support set padded with the smallest-label survivors in regularized
    mode.  Batches are removed for k < ell; the final stage only records
    its batch.  Requires (ell+1)*d < m; the private flag relaxes this to
    equality for compression re-runs.
    """
    d, m = program.d, program.m
    if ell < 0:
        raise ValueError("ell must be nonnegative")
    need = (ell + 1) * d
    if m < need or (m == need and not _allow_exact_cover):
        raise InsufficientScenarios(
            f"cascade with ell={ell} over d={d} requires more than "
            f"{need} scenarios, got {m}"
        )
    counts = SolveCounts()
    available = set(program.labels)
    stages: list[StageRecord] = []
    for k in range(ell + 1):
        lp, owners, sol = _solved_stage(program, available, tol, stage=k)
        counts.stage_solves += 1
        support = _support_from_solution(
            program, available, sol, owners, tol, counts
        )
        if len(support) > d:
            raise DegeneracyDetected(k, len(support), d)
        if mode is RemovalMode.FULLY_SUPPORTED:
            if len(support) != d:
                raise AssumptionViolated(k, len(support), d)
            padding: frozenset[int] = frozenset()
        else:
            padding = padding_set(available, support, d - len(support))
        batch = support | padding
        degenerate: Optional[bool] = None
        if record_degeneracy:
            lp_sup, _ = program.assemble(support)
            sol_sup = solve(lp_sup, tol=tol)
            counts.degeneracy_solves += 1
            degenerate = not (
                sol_sup.is_optimal
                and np.max(np.abs(sol_sup.x - sol.x)) <= tol.x
            )
        stages.append(
            StageRecord(
                k=k,
                minimizer=sol.x,
                objective=sol.objective,
                support=support,
                padding=padding,
                removed=frozenset(batch),
                degenerate=degenerate,
            )
        )
        if k < ell:
            available -= batch
    compression = frozenset().union(*(s.removed for s in stages))
    last = stages[-1]
    return CascadeTrace(
        mode=mode,
        stages=tuple(stages),
        final_x=last.minimizer,
        final_objective=last.objective,
        compression_candidate=compression,
        counts=counts,
    )


def verify_compression(
    program: ScenarioProgram,
    ell: int,
    trace: CascadeTrace,
    tol: LpTolerances = DEFAULT_TOL,
) -> bool:
    """Re-run the cascade on the compression candidate alone and compare.

    Returns True iff every stage minimizer of the re-run matches the
    original within tol.x and, in regularized mode, every padding set
    matches exactly.
    """
    sub = program.restrict(trace.compression_candidate)
    retrace = run_cascade(
        sub,
        ell,
        mode=trace.mode,
        tol=tol,
        record_degeneracy=False,
        _allow_exact_cover=True,
    )
    for orig, redo in zip(trace.stages, retrace.stages):
        if np.max(np.abs(np.asarray(redo.minimizer) - np.asarray(orig.minimizer))) > tol.x:
            return False
        if trace.mode is RemovalMode.REGULARIZED and redo.padding != orig.padding:
            return False
    return True


# ---------------------------------------------------------------------------
# Greedy baseline.
# ---------------------------------------------------------------------------


def greedy_removal(
    program: ScenarioProgram,
    r: int,
    tol: LpTolerances = DEFAULT_TOL,
) -> GreedyTrace:
    """Remove r scenarios one at a time, each time the best cost improver.

    Candidates are the current support scenarios (removing anything else
    provably leaves the minimizer unchanged); ties on the re-solved
    objective break toward the smallest label.  When a stage has an empty
    support set no removal can improve the cost, and the smallest available
    label is dropped instead.
    """
    d, m = program.d, program.m
    if r < 0:
        raise ValueError("r must be nonnegative")
    if r >= m - d:
        raise InsufficientScenarios(
            f"greedy removal of r={r} needs r < m - d = {m - d}"
        )
    counts = SolveCounts()
    available = set(program.labels)
    lp, owners, sol = _solved_stage(program, available, tol)
    counts.stage_solves += 1
    steps: list[GreedyStep] = []
    for step in range(1, r + 1):
        support = _support_from_solution(
            program, available, sol, owners, tol, counts
        )
        candidates = sorted(support) if support else sorted(available)
        best_label = None
        best_obj = np.inf
        for lab in candidates:
            lp_c, _ = program.assemble(available - {lab})
            sol_c = solve(lp_c, tol=tol, refine=False)
            counts.candidate_solves += 1
            if not sol_c.is_optimal:
                raise StageSolveError(None, sol_c.status)
            if sol_c.objective < best_obj:
                best_obj = sol_c.objective
                best_label = lab
        available.remove(best_label)
        lp, owners, sol = _solved_stage(program, available, tol)
        counts.stage_solves += 1
        steps.append(
            GreedyStep(step=step, removed_label=best_label,
                       objective=sol.objective)
        )
    return GreedyTrace(
        steps=tuple(steps),
        final_x=sol.x,
        final_objective=sol.objective,
        counts=counts,
    )


# Documented solve-count conventions for the two schemes.  The cascade
# solves one program per stage.  The greedy convention charges the initial
# solve, then per step one candidate re-solve for each of the d support
# scenarios of a fully-supported stage plus the winner's confirming
# re-solve: 1 + r * (d + 1).
def cascade_solve_count(ell: int) -> int:
    return ell + 1


def greedy_solve_count(r: int, d: int) -> int:
    return 1 + r * (d + 1)
