"""InfoNCE contrastive objective at desk scale: loss, analytic gradient,
and a toy linear-projection training loop over synthetic embeddings.

Per batch instance i there is a query q_i, a positive d_i+ and a negative
d_i-; every negative in the batch serves as a negative for every
instance. With s = cosine similarity and temperature tau:

    L = -(1/B) sum_i log( exp(s(q_i,d_i+)/tau)
                          / (exp(s(q_i,d_i+)/tau) + sum_j exp(s(q_i,d_j-)/tau)) )

The denominator sums over ALL B negatives including j=i. The j=i term is
kept deliberately; common implementations drop it, this one does not.
All math runs in fp64 with log-sum-exp stabilization so tiny temperatures
stay finite.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError


@dataclass
class TrainingTriplet:
    query: np.ndarray
    positive: np.ndarray
    negative: np.ndarray
    query_id: str = ""


@dataclass
class ContrastiveConfig:
    batch_size: int = 6
    temperature: float = 0.07
    learning_rate: float = 3e-5
    epochs: int = 5

    def validate(self) -> None:
        if self.temperature <= 0:
            raise ValidationError(f"temperature must be positive, got {self.temperature}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0 or self.learning_rate < 0:
            raise ValidationError("epochs and learning_rate must be non-negative")


@dataclass
class GradientSet:
    queries: np.ndarray  # (B, d)
    positives: np.ndarray
    negatives: np.ndarray


def _stack(triplets: list[TrainingTriplet]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    q = np.asarray([t.query for t in triplets], dtype=np.float64)
    p = np.asarray([t.positive for t in triplets], dtype=np.float64)
    n = np.asarray([t.negative for t in triplets], dtype=np.float64)
    if q.ndim != 2 or q.shape != p.shape or q.shape != n.shape:
        raise ValidationError("triplets must share one vector dim")
    return q, p, n


def _unit_rows(x: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0.0):
        raise ValidationError(f"zero {what} vector: cosine similarity undefined")
    return x / norms[:, None], norms


def _softmax_terms(q, p, n, tau):
    qh, nq = _unit_rows(q, "query")
    ph, npos = _unit_rows(p, "positive")
    nh, nneg = _unit_rows(n, "negative")
    s_pos = np.einsum("ij,ij->i", qh, ph)  # (B,)
    s_neg = qh @ nh.T  # (B, B)
    logits = np.concatenate([s_pos[:, None], s_neg], axis=1) / tau
    m = logits.max(axis=1, keepdims=True)
    lse = (m + np.log(np.exp(logits - m).sum(axis=1, keepdims=True))).ravel()
    probs = np.exp(logits - lse[:, None])  # rows sum to 1
    return qh, nq, ph, npos, nh, nneg, s_pos, s_neg, lse, probs


def infonce_loss(triplets: list[TrainingTriplet], tau: float) -> float:
    if tau <= 0:
        raise ValidationError(f"temperature must be positive, got {tau}")
    q, p, n = _stack(triplets)
    *_, s_pos, _, lse, _ = _softmax_terms(q, p, n, tau)
    return float(np.mean(lse - s_pos / tau))


def infonce_grad(triplets: list[TrainingTriplet], tau: float) -> tuple[float, GradientSet]:
    """Loss plus analytic gradients w.r.t. every q_i, d_i+ and d_j-."""
    if tau <= 0:
        raise ValidationError(f"temperature must be positive, got {tau}")
    q, p, n = _stack(triplets)
    qh, nq, ph, npos, nh, nneg, s_pos, s_neg, lse, probs = _softmax_terms(q, p, n, tau)
    b = q.shape[0]
    # d(loss)/d(similarity): positives get (p - 1), negatives their softmax mass.
    a = (probs[:, 0] - 1.0) / (b * tau)  # (B,)
    bneg = probs[:, 1:] / (b * tau)  # (B, B)

    # cosine chain rule: dcos(u,v)/du = (v_hat - cos * u_hat) / |u|
    coeff_q = a * s_pos + np.einsum("ij,ij->i", bneg, s_neg)
    grad_q = (a[:, None] * ph + bneg @ nh - coeff_q[:, None] * qh) / nq[:, None]
    grad_p = a[:, None] * (qh - s_pos[:, None] * ph) / npos[:, None]
    coeff_n = np.einsum("ij,ij->j", bneg, s_neg)
    grad_n = (bneg.T @ qh - coeff_n[:, None] * nh) / nneg[:, None]
    loss = float(np.mean(lse - s_pos / tau))
    return loss, GradientSet(grad_q, grad_p, grad_n)


@dataclass
class TrainResult:
    weights: np.ndarray  # (projection_dim, d)
    step_losses: list[tuple[int, float]] = field(default_factory=list)
    epoch_losses: list[float] = field(default_factory=list)  # [initial, after e1, ...]

    @property
    def steps(self) -> int:
        return len(self.step_losses)


def _projected(triplets: list[TrainingTriplet], weights: np.ndarray) -> list[TrainingTriplet]:
    return [
        TrainingTriplet(weights @ t.query, weights @ t.positive, weights @ t.negative, t.query_id)
        for t in triplets
    ]


def toy_finetune(
    triplets: list[TrainingTriplet],
    config: ContrastiveConfig,
    projection_dim: int | None = None,
    seed: int = 0,
) -> TrainResult:
    """Plain gradient descent on a single linear map applied to every vector
    (the trainable encoder stand-in). Batches are taken in input order."""
    config.validate()
    if len(triplets) < config.batch_size:
        raise ValidationError(
            f"need at least batch_size={config.batch_size} triplets, got {len(triplets)}"
        )
    dim = len(np.asarray(triplets[0].query, dtype=np.float64))
    proj = projection_dim or dim
    if proj == dim:
        weights = np.eye(dim, dtype=np.float64)
    else:
        weights = np.random.default_rng(seed).normal(scale=1.0 / np.sqrt(dim), size=(proj, dim))

    result = TrainResult(weights=weights)
    result.epoch_losses.append(infonce_loss(_projected(triplets, weights), config.temperature))
    step = 0
    for _ in range(config.epochs):
        for start in range(0, len(triplets), config.batch_size):
            batch = triplets[start : start + config.batch_size]
            projected = _projected(batch, weights)
            loss, grads = infonce_grad(projected, config.temperature)
            if not np.isfinite(loss):
                raise ValidationError(f"non-finite loss at step {step}")
            result.step_losses.append((step, loss))
            q_in = np.asarray([t.query for t in batch], dtype=np.float64)
            p_in = np.asarray([t.positive for t in batch], dtype=np.float64)
            n_in = np.asarray([t.negative for t in batch], dtype=np.float64)
            grad_w = grads.queries.T @ q_in + grads.positives.T @ p_in + grads.negatives.T @ n_in
            weights = weights - config.learning_rate * grad_w
            step += 1
        result.epoch_losses.append(infonce_loss(_projected(triplets, weights), config.temperature))
    result.weights = weights
    return result


def make_rotation_triplets(count: int, dim: int, angle: float, seed: int) -> list[TrainingTriplet]:
    """Synthetic batchable triplets: each positive is the query rotated by
    `angle` in a fixed coordinate plane, each negative an independent
    random direction (per-query one positive, one designated negative)."""
    if dim < 2:
        raise ValidationError("rotation triplets need dim >= 2")
    rng = np.random.default_rng(seed)
    rotation = np.eye(dim)
    c, s = np.cos(angle), np.sin(angle)
    rotation[0, 0], rotation[0, 1] = c, -s
    rotation[1, 0], rotation[1, 1] = s, c
    triplets = []
    for i in range(count):
        q = rng.normal(size=dim)
        q /= np.linalg.norm(q)
        neg = rng.normal(size=dim)
        neg /= np.linalg.norm(neg)
        triplets.append(TrainingTriplet(q, rotation @ q, neg, query_id=f"t{i}"))
    return triplets


# ---------------------------------------------------------------------------
# Triplet file IO: one JSON record per line; vectors are literals or
# doc_id references into a single-vector embedding store.


def _resolve(value, vectors: dict[str, np.ndarray] | None, path, lineno, fieldname):
    if isinstance(value, list):
        return np.asarray(value, dtype=np.float64)
    if isinstance(value, str):
        if vectors is None or value not in (vectors or {}):
            raise FormatError(f"{path}: line {lineno}: unresolved {fieldname} reference {value!r}")
        return vectors[value]
    raise FormatError(f"{path}: line {lineno}: {fieldname} must be a vector or a doc_id reference")


def load_triplets(path: str | Path, store_path: str | Path | None = None) -> list[TrainingTriplet]:
    vectors = None
    if store_path is not None:
        from .store import read_embeddings

        vectors = {
            e.doc_id: e.values.reshape(-1).astype(np.float64) for e in read_embeddings(store_path)
        }
    triplets = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}: line {lineno}: invalid record ({exc.msg})") from exc
            try:
                triplets.append(
                    TrainingTriplet(
                        query=_resolve(obj["query"], vectors, path, lineno, "query"),
                        positive=_resolve(obj["positive"], vectors, path, lineno, "positive"),
                        negative=_resolve(obj["negative"], vectors, path, lineno, "negative"),
                        query_id=str(obj.get("query_id", "")),
                    )
                )
            except KeyError as exc:
                raise FormatError(f"{path}: line {lineno}: missing field {exc.args[0]!r}") from exc
    return triplets


def save_triplets(triplets: list[TrainingTriplet], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in triplets:
            fh.write(
                json.dumps(
                    {
                        "query_id": t.query_id,
                        "query": list(map(float, t.query)),
                        "positive": list(map(float, t.positive)),
                        "negative": list(map(float, t.negative)),
                    }
                )
                + "\n"
            )


def write_loss_curve(result: TrainResult, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss"])
        writer.writerows(result.step_losses)
