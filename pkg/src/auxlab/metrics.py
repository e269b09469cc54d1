"""Transfer diagnostics: gain, transfer-regime classes, gradient cosine
similarity, confidence-based distribution shift, and the signed average
relative improvement used for cross-method summaries."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import nn
from .nn import PerfValue, SharedHeadModel, mean_max_confidence
from .optim import initial_state, sgd_step
from .tasks import DataSplit, TaskFamily
from .vectors import RngStream, dot

__all__ = [
    "PerfValue",
    "TransferReport",
    "SweepRow",
    "POSITIVE",
    "WEAK_NEGATIVE",
    "STRONG_NEGATIVE",
    "transfer_gain",
    "classify_transfer",
    "gcs",
    "csd",
    "delta_m",
    "shared_gradient_block",
    "one_step_tg_gcs_sweep",
]

POSITIVE = "positive"
WEAK_NEGATIVE = "weak_negative"
STRONG_NEGATIVE = "strong_negative"


def transfer_gain(perf_atl: PerfValue, perf_stl: PerfValue) -> float:
    """Auxiliary-assisted performance minus single-task performance.

    Positive means the auxiliary signal helped; reported in raw metric points
    (e.g. accuracy points), matching how the comparison is usually plotted.
    """
    if perf_atl.metric != perf_stl.metric:
        raise ValueError(
            f"cannot compare {perf_atl.metric!r} against {perf_stl.metric!r}"
        )
    return perf_atl.value - perf_stl.value


def classify_transfer(tg_by_lambda: Mapping[float, float]) -> str:
    """Sort gains into positive / weak-negative / strong-negative regimes.

    Strong negative: every positive weighting hurts. Weak negative: some
    weighting hurts but a benign one exists. Positive: nothing hurts.
    """
    if not tg_by_lambda:
        raise ValueError("need at least one (lambda, gain) entry")
    positive_lams = {l: tg for l, tg in tg_by_lambda.items() if l > 0}
    if not positive_lams:
        raise ValueError("need at least one entry with lambda > 0")
    if max(positive_lams.values()) < 0:
        return STRONG_NEGATIVE
    if min(tg_by_lambda.values()) < 0:
        return WEAK_NEGATIVE
    return POSITIVE


@dataclass(frozen=True)
class TransferReport:
    tg_by_lambda: Mapping[float, float]
    classification: str

    def __post_init__(self):
        expected = classify_transfer(self.tg_by_lambda)
        if self.classification != expected:
            raise ValueError(
                f"classification {self.classification!r} inconsistent with gains "
                f"(expected {expected!r})"
            )

    @classmethod
    def from_gains(cls, tg_by_lambda: Mapping[float, float]) -> "TransferReport":
        return cls(dict(tg_by_lambda), classify_transfer(tg_by_lambda))


def gcs(g_i: np.ndarray, g_j: np.ndarray) -> float:
    """Cosine of the angle between two gradients; negative means conflict."""
    ni = np.sqrt(dot(g_i, g_i))
    nj = np.sqrt(dot(g_j, g_j))
    if ni == 0.0 or nj == 0.0:
        raise ValueError("gradient cosine undefined for a zero gradient")
    return float(np.clip(dot(g_i, g_j) / (ni * nj), -1.0, 1.0))


def csd(model_on_d: SharedHeadModel, d_prime: DataSplit, task_id: int) -> float:
    """Confidence drop of a trained classifier on a (possibly shifted) split.

    1 - mean max softmax probability; 0 on the model's own confident regime,
    approaching 1 - 1/C under heavy shift.
    """
    return 1.0 - mean_max_confidence(model_on_d, d_prime, task_id)


def delta_m(
    baseline: Sequence[float], method: Sequence[float], signs: Sequence[int]
) -> float:
    """Signed mean relative change of `method` over `baseline`, as a fraction.

    signs[k] = 0 when larger is better for metric k, 1 when smaller is better.
    Multiply by 100 for the conventional percent form.
    """
    if not (len(baseline) == len(method) == len(signs)):
        raise ValueError("baseline, method, and signs must have equal lengths")
    if len(baseline) == 0:
        raise ValueError("need at least one metric")
    if any(s not in (0, 1) for s in signs):
        raise ValueError("signs must be 0 (higher better) or 1 (lower better)")
    if any(b == 0 for b in baseline):
        raise ValueError("zero baseline value makes relative change undefined")
    total = 0.0
    for b, m, z in zip(baseline, method, signs):
        total += (-1.0) ** z * (m - b) / b
    return total / len(baseline)


@dataclass(frozen=True)
class SweepRow:
    point_id: int
    lam: float
    gcs: float
    tg: float


def _batch_from(split: DataSplit, stream: RngStream, batch_size: int) -> nn.Batch:
    gen = stream.generator()
    idx = gen.integers(0, len(split), size=min(batch_size, len(split)))
    return nn.Batch(split.inputs[idx], split.targets[idx], split.task_id)


def shared_gradient_block(model: SharedHeadModel, g: np.ndarray) -> np.ndarray:
    """Restrict a gradient to the encoder block the tasks actually share.

    Cosine comparisons are most informative there (head blocks never overlap
    across tasks, so they only dilute the angle). A pure-head model shares
    nothing, in which case the full vector is returned.
    """
    first_head = min(model.spec.heads)
    start = nn.head_slice(model.spec, first_head).start
    return g[:start] if start > 0 else g


def one_step_tg_gcs_sweep(
    model: SharedHeadModel,
    family: TaskFamily,
    lambdas: Sequence[float],
    n_points: int,
    rng: RngStream,
    lr: float = 0.01,
    batch_size: int = 64,
    aux_task: int | None = None,
) -> list[SweepRow]:
    """Probe how one mixed-gradient step moves target validation performance.

    For each of ``n_points`` fresh batch draws: take the target gradient and
    one auxiliary task's gradient (averaged over auxiliary tasks when
    ``aux_task`` is None and several exist), record their cosine on the
    shared block, then for every weighting in ``lambdas`` apply the single
    step theta - lr * (g_tgt + lam * g_aux) and report the validation change
    against the lam = 0 step. Rows are ordered by (point, lambda-position);
    the lam = 0 rows are exactly zero by construction.
    """
    aux_ids = (aux_task,) if aux_task is not None else family.aux_ids
    if not aux_ids:
        raise ValueError("family has no auxiliary task to probe")
    val = family.val(family.target_id)
    rows: list[SweepRow] = []
    for point in range(n_points):
        tgt_batch = _batch_from(
            family.train(family.target_id),
            rng.child("point", point, family.target_id),
            batch_size,
        )
        _, g_tgt = nn.loss_and_gradient(model, tgt_batch)
        aux_grads = []
        for aid in aux_ids:
            batch = _batch_from(family.train(aid), rng.child("point", point, aid), batch_size)
            aux_grads.append(nn.loss_and_gradient(model, batch)[1])
        g_aux = aux_grads[0] if len(aux_grads) == 1 else np.mean(aux_grads, axis=0)
        cos = gcs(shared_gradient_block(model, g_tgt), shared_gradient_block(model, g_aux))

        def perf_after(lam: float) -> float:
            state = initial_state(len(model.params), base_lr=lr, momentum_coeff=0.0)
            stepped, _ = sgd_step(model.params, g_tgt + lam * g_aux, state)
            return nn.evaluate(model.with_params(stepped), val, family.target_id).value

        base = perf_after(0.0)
        for lam in lambdas:
            tg = 0.0 if lam == 0.0 else perf_after(float(lam)) - base
            rows.append(SweepRow(point, float(lam), cos, tg))
    return rows
