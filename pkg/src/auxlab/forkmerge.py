"""Fork/merge training: clone parameters into branches trained under
different task weightings, then recombine them by searching for the convex
combination that maximizes target validation performance.

The search never leaves the convex hull of the branch parameter vectors, and
the pure target-only combination is always among the evaluated candidates,
so a merge can never score below the target-only branch on validation.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import ceil
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import nn
from .nn import Batch, ModelSpec, PerfValue, SharedHeadModel
from .optim import OptConfig, OptState, TaskWeighting, sgd_step, weighted_gradient
from .tasks import DataSplit, TaskFamily, branch_data_view
from .vectors import NonFiniteError, RngStream, linear_combination

__all__ = [
    "BranchSpec",
    "MergeSchedule",
    "CandidateEval",
    "MergeRecord",
    "ForkMergeResult",
    "SearchOutcome",
    "BranchDivergedError",
    "make_omega_branches",
    "merge_coeffs_from_task_weights",
    "draw_batch",
    "train_branch",
    "search_lambda_grid",
    "search_lambda_binary",
    "greedy_search_lambda",
    "run_forkmerge",
    "write_merge_history",
]

DEFAULT_LAMBDA_GRID = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)


class BranchDivergedError(RuntimeError):
    def __init__(self, branch_id: int, round_index: int, cause: Exception):
        super().__init__(
            f"branch {branch_id} diverged in round {round_index}: {cause}"
        )
        self.branch_id = branch_id
        self.round_index = round_index


@dataclass(frozen=True)
class BranchSpec:
    weighting: TaskWeighting
    branch_id: int

    def is_target_only(self) -> bool:
        return self.weighting.active_tasks == (self.weighting.target_id,)


@dataclass(frozen=True)
class MergeSchedule:
    """Timing and search policy for the fork/merge loop."""

    total_steps: int
    interval: int
    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    search_strategy: str = "grid"
    prune_after_first_merge: int | None = None
    binary_iters: int = 5
    val_subsample: int | None = None

    def __post_init__(self):
        if self.total_steps < 1 or self.interval < 1:
            raise ValueError("total_steps and interval must be positive")
        grid = tuple(float(g) for g in self.lambda_grid)
        if sorted(grid) != list(grid) or len(set(grid)) != len(grid):
            raise ValueError("lambda_grid must be strictly increasing")
        if not grid or grid[0] != 0.0 or grid[-1] != 1.0:
            raise ValueError("lambda_grid must start at 0 and end at 1")
        object.__setattr__(self, "lambda_grid", grid)
        if self.search_strategy not in ("grid", "binary", "greedy"):
            raise ValueError(f"unknown search strategy {self.search_strategy!r}")
        if self.prune_after_first_merge is not None and self.prune_after_first_merge < 1:
            raise ValueError("prune_after_first_merge must be >= 1")
        if self.binary_iters < 1:
            raise ValueError("binary_iters must be >= 1")

    @property
    def n_rounds(self) -> int:
        return ceil(self.total_steps / self.interval)


@dataclass(frozen=True)
class CandidateEval:
    branch_id: int
    coeff: float
    perf: PerfValue
    chosen: bool


@dataclass(frozen=True)
class MergeRecord:
    round_index: int
    candidates: tuple[CandidateEval, ...]
    merge_coeffs: Mapping[int, float]
    target_only_perf: PerfValue
    chosen_perf: PerfValue
    surviving_branch_ids: tuple[int, ...]
    psearch_evals: int
    wall_s: float

    def __post_init__(self):
        coeffs = dict(self.merge_coeffs)
        if any(c < 0 for c in coeffs.values()):
            raise ValueError(f"negative merge coefficient: {coeffs}")
        if abs(sum(coeffs.values()) - 1.0) > 1e-9:
            raise ValueError(f"merge coefficients must sum to 1: {coeffs}")
        object.__setattr__(self, "merge_coeffs", coeffs)


@dataclass(frozen=True)
class ForkMergeResult:
    final_params: np.ndarray = field(repr=False)
    merge_history: tuple[MergeRecord, ...]
    final_perf: PerfValue

    @property
    def total_psearch_evals(self) -> int:
        return sum(r.psearch_evals for r in self.merge_history)


def make_omega_branches(n_aux: int) -> list[BranchSpec]:
    """Target-only branch plus one pairwise branch per auxiliary task."""
    if n_aux < 1:
        raise ValueError("need at least one auxiliary task")
    branches = [BranchSpec(TaskWeighting({0: 1.0}), 0)]
    for k in range(1, n_aux + 1):
        branches.append(BranchSpec(TaskWeighting({0: 1.0, k: 1.0}), k))
    return branches


def merge_coeffs_from_task_weights(aux_weights: Sequence[float]) -> list[float]:
    """Map per-task weights to branch-combination coefficients.

    The direct weighted update with aux weights (λ_1..λ_K) equals the branch
    combination [1 - Σλ, λ_1, ..., λ_K] over [target-only, pair-1, ...,
    pair-K] branches, provided Σλ ≤ 1.
    """
    total = float(sum(aux_weights))
    if total > 1.0 + 1e-12:
        raise ValueError(f"aux weights sum to {total} > 1; combination leaves the simplex")
    if any(w < 0 for w in aux_weights):
        raise ValueError("aux weights must be nonnegative")
    return [1.0 - total, *[float(w) for w in aux_weights]]


def draw_batch(
    split: DataSplit, root: RngStream, task_id: int, step: int, batch_size: int
) -> Batch:
    """Mini-batch keyed by (stream, task, absolute step), not by branch.

    Every branch therefore sees the same draw for the same task at the same
    step — the property that makes one-step merges exactly equal direct
    weighted updates, and makes results independent of worker count.
    """
    gen = root.child("batch", task_id, step).generator()
    idx = gen.integers(0, len(split), size=batch_size)
    return Batch(split.inputs[idx], split.targets[idx], task_id)


def train_branch(
    start: np.ndarray,
    branch: BranchSpec,
    steps: int,
    family: TaskFamily,
    model_spec: ModelSpec,
    opt: OptState,
    root: RngStream,
    batch_size: int,
) -> np.ndarray:
    """Run `steps` weighted-SGD steps from `start`; pure in all arguments."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    views = branch_data_view(family, branch.weighting)
    params = np.array(start, dtype=np.float64)
    state = opt
    model = SharedHeadModel(model_spec, params)
    for _ in range(steps):
        step = state.step_count
        grads = {}
        for task_id in sorted(views):
            batch = draw_batch(views[task_id], root, task_id, step, batch_size)
            _, grads[task_id] = nn.loss_and_gradient(model.with_params(params), batch)
        params, state = sgd_step(params, weighted_gradient(grads, branch.weighting), state)
    return params


@dataclass(frozen=True)
class SearchOutcome:
    """Winning combination of one merge search, with its audit trail."""

    coeffs: Mapping[int, float]
    perf: PerfValue
    params: np.ndarray = field(repr=False)
    evaluations: tuple[CandidateEval, ...]
    n_evals: int


class _PerfProbe:
    """Counts every validation evaluation made during a search."""

    def __init__(self, template: SharedHeadModel, val: DataSplit, task_id: int):
        self.template = template
        self.val = val
        self.task_id = task_id
        self.count = 0

    def __call__(self, params: np.ndarray) -> PerfValue:
        self.count += 1
        return nn.evaluate(self.template.with_params(params), self.val, self.task_id)


def search_lambda_grid(
    theta0: np.ndarray,
    theta1: np.ndarray,
    grid: Sequence[float],
    val: DataSplit,
    task_id: int,
    model_template: SharedHeadModel,
    branch_ids: tuple[int, int] = (0, 1),
) -> SearchOutcome:
    """Evaluate (1-λ)·θ0 + λ·θ1 at every grid point; ties prefer smaller λ."""
    if not grid:
        raise ValueError("empty lambda grid")
    probe = _PerfProbe(model_template, val, task_id)
    best = None
    evals = []
    for lam in grid:
        params = linear_combination([1.0 - lam, lam], [theta0, theta1])
        perf = probe(params)
        evals.append((float(lam), perf, params))
        if best is None or perf.value > best[1].value:
            best = evals[-1]
    lam_star, perf_star, params_star = best
    id0, id1 = branch_ids
    return SearchOutcome(
        coeffs={id0: 1.0 - lam_star, id1: lam_star},
        perf=perf_star,
        params=params_star,
        evaluations=tuple(
            CandidateEval(id1, lam, perf, lam == lam_star) for lam, perf, _ in evals
        ),
        n_evals=probe.count,
    )


def search_lambda_binary(
    theta0: np.ndarray,
    theta1: np.ndarray,
    iters: int,
    val: DataSplit,
    task_id: int,
    model_template: SharedHeadModel,
    branch_ids: tuple[int, int] = (0, 1),
) -> SearchOutcome:
    """Interval halving on λ ∈ [0,1]: evaluate both half midpoints, keep the
    better half (ties keep the lower half), return the best λ seen.

    Costs exactly 2·iters evaluations; unlike the grid, λ=0 itself is never
    evaluated, so this strategy carries no exact non-regression guarantee.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    probe = _PerfProbe(model_template, val, task_id)
    lo, hi = 0.0, 1.0
    best = None
    evals = []

    def try_lambda(lam: float):
        nonlocal best
        params = linear_combination([1.0 - lam, lam], [theta0, theta1])
        perf = probe(params)
        evals.append((lam, perf, params))
        if best is None or perf.value > best[1].value:
            best = evals[-1]

    for _ in range(iters):
        quarter = (hi - lo) / 4.0
        left_mid, right_mid = lo + quarter, hi - quarter
        try_lambda(left_mid)
        try_lambda(right_mid)
        left_perf, right_perf = evals[-2][1].value, evals[-1][1].value
        if right_perf > left_perf:
            lo = (lo + hi) / 2.0
        else:
            hi = (lo + hi) / 2.0
    lam_star, perf_star, params_star = best
    id0, id1 = branch_ids
    return SearchOutcome(
        coeffs={id0: 1.0 - lam_star, id1: lam_star},
        perf=perf_star,
        params=params_star,
        evaluations=tuple(
            CandidateEval(id1, lam, perf, lam == lam_star) for lam, perf, _ in evals
        ),
        n_evals=probe.count,
    )


def greedy_search_lambda(
    candidates: Sequence[tuple[int, np.ndarray]],
    grid_per_coord: Sequence[float],
    val: DataSplit,
    task_id: int,
    model_template: SharedHeadModel,
) -> SearchOutcome:
    """Coordinate-wise greedy search over the branch simplex.

    Candidates are ranked by standalone validation performance (B
    evaluations), the top one starts with raw coefficient 1, and each further
    candidate b gets a coefficient grid-searched in [0, U] where U is the
    mean of the coefficients fixed so far; the running combination is
    L1-normalized before every evaluation. Total evaluations are at most
    (B-1)·|grid| + B. Setting a trial coefficient to 0 reproduces the
    previous stage's winner exactly, so the best seen never decreases.
    """
    if not candidates:
        raise ValueError("no candidate branches to merge")
    probe = _PerfProbe(model_template, val, task_id)
    evaluations: list[CandidateEval] = []

    standalone = []
    for branch_id, params in candidates:
        perf = probe(params)
        standalone.append((branch_id, params, perf))
    order = sorted(
        range(len(standalone)), key=lambda i: (-standalone[i][2].value, i)
    )
    ranked = [standalone[i] for i in order]
    for rank, (branch_id, _, perf) in enumerate(ranked):
        evaluations.append(CandidateEval(branch_id, 1.0, perf, rank == 0))

    raw = [1.0]
    chosen_params = ranked[0][1]
    chosen_perf = ranked[0][2]
    for b in range(1, len(ranked)):
        upper = sum(raw) / len(raw)
        branch_id = ranked[b][0]
        vectors = [p for _, p, _ in ranked[: b + 1]]
        best_v = 0.0
        best_eval = None
        stage: list[tuple[float, PerfValue, np.ndarray]] = []
        for g in grid_per_coord:
            v = g * upper
            trial = raw + [v]
            total = sum(trial)
            coeffs = [c / total for c in trial]
            params = linear_combination(coeffs, vectors)
            perf = probe(params)
            stage.append((v, perf, params))
            if best_eval is None or perf.value > best_eval[1].value:
                best_eval = stage[-1]
                best_v = v
        for v, perf, _ in stage:
            evaluations.append(CandidateEval(branch_id, v, perf, v == best_v))
        raw.append(best_v)
        _, chosen_perf, chosen_params = best_eval

    total = sum(raw)
    coeffs = {ranked[i][0]: raw[i] / total for i in range(len(ranked))}
    return SearchOutcome(
        coeffs=coeffs,
        perf=chosen_perf,
        params=chosen_params,
        evaluations=tuple(evaluations),
        n_evals=probe.count,
    )


def _subsampled_val(family: TaskFamily, schedule: MergeSchedule, root: RngStream,
                    round_index: int) -> DataSplit:
    val = family.val(family.target_id)
    k = schedule.val_subsample
    if k is None or k >= len(val):
        return val
    gen = root.child("valsub", round_index).generator()
    idx = gen.choice(len(val), size=k, replace=False)
    return DataSplit(val.inputs[idx], val.targets[idx], val.task_id)


def run_forkmerge(
    family: TaskFamily,
    model_spec: ModelSpec,
    schedule: MergeSchedule,
    branch_specs: Sequence[BranchSpec],
    opt_cfg: OptConfig,
    seed: int,
    threads: int = 1,
) -> ForkMergeResult:
    """Alternate Δt-step branch training with validation-guided merging.

    Branches always start each round from the shared merged parameters with
    zeroed momentum; the learning-rate schedule position is global. Two
    branches route to the configured grid/binary search, more than two to the
    greedy coordinate search. When pruning is configured, after the first
    merge only the K' strongest branches (by merge coefficient) survive, and
    the target-only branch always survives.
    """
    branches = list(branch_specs)
    if len({b.branch_id for b in branches}) != len(branches):
        raise ValueError("branch ids must be unique")
    target_only = [b for b in branches if b.is_target_only()]
    if len(target_only) != 1:
        raise ValueError(
            f"need exactly one target-only branch, found {len(target_only)}"
        )
    if schedule.prune_after_first_merge is not None and not (
        schedule.prune_after_first_merge < len(branches)
    ):
        raise ValueError("prune_after_first_merge must be < number of branches")

    root = RngStream(seed)
    model = nn.init_params(model_spec, root.child("init"))
    params = model.params
    n = len(params)

    history: list[MergeRecord] = []
    done = 0
    for round_index in range(schedule.n_rounds):
        t_start = time.perf_counter()
        steps = min(schedule.interval, schedule.total_steps - done)
        opt = opt_cfg.state_at(n, schedule.total_steps, step_count=done)

        def train_one(branch: BranchSpec) -> np.ndarray:
            try:
                return train_branch(
                    params, branch, steps, family, model_spec, opt, root,
                    opt_cfg.batch_size,
                )
            except NonFiniteError as exc:
                raise BranchDivergedError(branch.branch_id, round_index, exc) from exc

        if threads == 1 or len(branches) == 1:
            trained = [train_one(b) for b in branches]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                trained = list(pool.map(train_one, branches))

        val = _subsampled_val(family, schedule, root, round_index)
        template = model.with_params(params)
        tgt_branch = next(b for b in branches if b.is_target_only())
        tgt_pos = branches.index(tgt_branch)

        if len(branches) == 1:
            probe = _PerfProbe(template, val, family.target_id)
            perf = probe(trained[0])
            outcome = SearchOutcome(
                coeffs={tgt_branch.branch_id: 1.0},
                perf=perf,
                params=trained[0],
                evaluations=(CandidateEval(tgt_branch.branch_id, 1.0, perf, True),),
                n_evals=probe.count,
            )
            target_only_perf = perf
        elif len(branches) == 2:
            other_pos = 1 - tgt_pos
            pair_ids = (tgt_branch.branch_id, branches[other_pos].branch_id)
            if schedule.search_strategy == "binary":
                outcome = search_lambda_binary(
                    trained[tgt_pos], trained[other_pos], schedule.binary_iters,
                    val, family.target_id, template, branch_ids=pair_ids,
                )
                # not part of the search set; evaluated for the record only
                target_only_perf = nn.evaluate(
                    template.with_params(trained[tgt_pos]), val, family.target_id
                )
            else:
                outcome = search_lambda_grid(
                    trained[tgt_pos], trained[other_pos], schedule.lambda_grid,
                    val, family.target_id, template, branch_ids=pair_ids,
                )
                target_only_perf = next(
                    e.perf for e in outcome.evaluations if e.coeff == 0.0
                )
        else:
            outcome = greedy_search_lambda(
                [(b.branch_id, p) for b, p in zip(branches, trained)],
                schedule.lambda_grid, val, family.target_id, template,
            )
            target_only_perf = next(
                e.perf for e in outcome.evaluations
                if e.branch_id == tgt_branch.branch_id and e.coeff == 1.0
            )

        params = outcome.params
        done += steps

        surviving = branches
        if round_index == 0 and schedule.prune_after_first_merge is not None:
            keep = schedule.prune_after_first_merge
            by_coeff = sorted(
                branches,
                key=lambda b: (-outcome.coeffs.get(b.branch_id, 0.0),
                               branches.index(b)),
            )
            surviving = [b for b in by_coeff[:keep]
                         if outcome.coeffs.get(b.branch_id, 0.0) > 0.0]
            if tgt_branch not in surviving:
                surviving = surviving[: keep - 1] + [tgt_branch]
            surviving = [b for b in branches if b in surviving]  # stable order

        full_coeffs = {b.branch_id: outcome.coeffs.get(b.branch_id, 0.0)
                       for b in branches}
        history.append(
            MergeRecord(
                round_index=round_index,
                candidates=outcome.evaluations,
                merge_coeffs=full_coeffs,
                target_only_perf=target_only_perf,
                chosen_perf=outcome.perf,
                surviving_branch_ids=tuple(b.branch_id for b in surviving),
                psearch_evals=outcome.n_evals,
                wall_s=time.perf_counter() - t_start,
            )
        )
        branches = surviving

    final_perf = nn.evaluate(
        model.with_params(params), family.test(family.target_id), family.target_id
    )
    return ForkMergeResult(params, tuple(history), final_perf)


def write_merge_history(
    history: Sequence[MergeRecord], csv_path, json_path=None
) -> None:
    """One CSV row per evaluated candidate, plus a JSON coefficient trajectory."""
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["round,branch_id,candidate_lambda_or_coeff,val_perf,chosen"]
    for record in history:
        for cand in record.candidates:
            lines.append(
                f"{record.round_index},{cand.branch_id},{cand.coeff!r},"
                f"{cand.perf.value!r},{int(cand.chosen)}"
            )
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    if json_path is not None:
        payload = {
            "rounds": [
                {
                    "round": r.round_index,
                    "merge_coeffs": {str(k): v for k, v in r.merge_coeffs.items()},
                    "target_only_perf": r.target_only_perf.value,
                    "chosen_perf": r.chosen_perf.value,
                    "surviving_branch_ids": list(r.surviving_branch_ids),
                    "psearch_evals": r.psearch_evals,
                    "wall_s": r.wall_s,
                }
                for r in history
            ]
        }
        Path(json_path).write_text(json.dumps(payload, indent=2), encoding="utf-8")
