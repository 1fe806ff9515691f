import math

import numpy as np
import pytest

from slideret.contrastive import (
    ContrastiveConfig,
    TrainingTriplet,
    infonce_grad,
    infonce_loss,
    load_triplets,
    make_rotation_triplets,
    save_triplets,
    toy_finetune,
    write_loss_curve,
)
from slideret.errors import FormatError, ValidationError
from slideret.store import EmbeddingMatrix, write_embeddings


def triplet(q, p, n):
    return TrainingTriplet(np.asarray(q, float), np.asarray(p, float), np.asarray(n, float))


def random_batch(seed, b=6, d=8):
    rng = np.random.default_rng(seed)
    return [TrainingTriplet(rng.normal(size=d), rng.normal(size=d), rng.normal(size=d)) for _ in range(b)]


# ---------------------------------------------------------------------------
# Central finite-difference oracle (h=1e-5, fp64), independent of the
# analytic path.


def fd_gradients(triplets, tau, h=1e-5):
    def clone():
        return [TrainingTriplet(t.query.copy(), t.positive.copy(), t.negative.copy()) for t in triplets]

    flat = []
    for i in range(len(triplets)):
        for fname in ("query", "positive", "negative"):
            vec = getattr(triplets[i], fname)
            for k in range(len(vec)):
                up, down = clone(), clone()
                getattr(up[i], fname)[k] += h
                getattr(down[i], fname)[k] -= h
                flat.append((infonce_loss(up, tau) - infonce_loss(down, tau)) / (2 * h))
    return np.asarray(flat)


def analytic_flat(triplets, tau):
    _, g = infonce_grad(triplets, tau)
    rows = []
    for i in range(len(triplets)):
        rows.extend([g.queries[i], g.positives[i], g.negatives[i]])
    return np.concatenate(rows)


def test_loss_ln2():
    t = [triplet([1, 0], [0, 1], [0, 1])]  # sim+ = sim- = 0
    assert infonce_loss(t, 1.0) == pytest.approx(math.log(2), abs=1e-12)


def test_loss_ln_one_plus_e_inv():
    t = [triplet([1, 0], [1, 0], [0, 1])]  # sim+ = 1, sim- = 0
    assert infonce_loss(t, 1.0) == pytest.approx(math.log(1 + math.exp(-1)), abs=1e-12)


def test_small_tau_saturates_to_zero():
    t = [triplet([1, 0], [1, 0], [-1, 0])]
    assert infonce_loss(t, 0.001) == pytest.approx(0.0, abs=1e-12)
    assert infonce_loss(t, 1e-6) >= 0.0  # log-sum-exp keeps tiny tau finite


def test_loss_always_positive():
    for seed in range(20):
        assert infonce_loss(random_batch(seed), 0.07) > 0.0


def test_scale_invariance_and_gradient_orthogonality():
    batch = random_batch(42)
    base = infonce_loss(batch, 0.07)
    scaled = [TrainingTriplet(3.0 * t.query, 0.25 * t.positive, 7.0 * t.negative) for t in batch]
    assert infonce_loss(scaled, 0.07) == pytest.approx(base, rel=1e-12)
    _, g = infonce_grad(batch, 0.07)
    for i, t in enumerate(batch):
        assert abs(np.dot(g.queries[i], t.query)) < 1e-12
        assert abs(np.dot(g.positives[i], t.positive)) < 1e-12
        assert abs(np.dot(g.negatives[i], t.negative)) < 1e-12


def test_batch_permutation_invariance():
    batch = random_batch(5)
    perm = [batch[i] for i in (3, 1, 5, 0, 4, 2)]
    assert infonce_loss(perm, 0.07) == pytest.approx(infonce_loss(batch, 0.07), rel=1e-12)


def test_gradient_matches_finite_differences():
    for seed in range(10):
        batch = random_batch(seed, b=6, d=8)
        ga = analytic_flat(batch, 0.07)
        gf = fd_gradients(batch, 0.07)
        rel = np.linalg.norm(ga - gf) / np.linalg.norm(gf)
        assert rel < 1e-6


def test_saturated_gradient_vanishes():
    q = np.array([1.0, 0.0, 0.0])
    batch = [TrainingTriplet(q.copy(), q.copy(), -q.copy()) for _ in range(6)]
    _, g = infonce_grad(batch, 0.07)
    norm = math.sqrt(
        float((g.queries**2).sum() + (g.positives**2).sum() + (g.negatives**2).sum())
    )
    assert norm < 1e-6


def test_zero_vector_rejected():
    with pytest.raises(ValidationError, match="zero"):
        infonce_loss([triplet([0, 0], [1, 0], [0, 1])], 0.07)
    with pytest.raises(ValidationError, match="temperature"):
        infonce_loss(random_batch(0), 0.0)


def test_toy_finetune_rotation_strictly_decreases():
    trips = make_rotation_triplets(60, 8, angle=math.pi / 3, seed=7)
    result = toy_finetune(trips, ContrastiveConfig())  # B=6, tau=0.07, lr=3e-5, 5 epochs
    assert len(result.epoch_losses) == 6
    for before, after in zip(result.epoch_losses, result.epoch_losses[1:]):
        assert after < before
    assert result.epoch_losses[-1] <= result.epoch_losses[0]


def test_toy_finetune_zero_lr_is_identity():
    trips = make_rotation_triplets(12, 4, angle=0.5, seed=1)
    config = ContrastiveConfig(learning_rate=0.0)
    result = toy_finetune(trips, config)
    assert np.array_equal(result.weights, np.eye(4))
    assert len(set(result.epoch_losses)) == 1


def test_toy_finetune_step_count():
    trips = make_rotation_triplets(6, 4, angle=0.5, seed=2)
    result = toy_finetune(trips, ContrastiveConfig())  # one batch per epoch
    assert result.steps == 5


def test_toy_finetune_needs_full_batch():
    trips = make_rotation_triplets(3, 4, angle=0.5, seed=3)
    with pytest.raises(ValidationError, match="batch_size"):
        toy_finetune(trips, ContrastiveConfig())


def test_projection_dim_change():
    trips = make_rotation_triplets(12, 6, angle=0.4, seed=4)
    result = toy_finetune(trips, ContrastiveConfig(), projection_dim=3, seed=11)
    assert result.weights.shape == (3, 6)


def test_triplet_io_roundtrip(tmp_path):
    trips = make_rotation_triplets(4, 3, angle=0.2, seed=5)
    save_triplets(trips, tmp_path / "t.jsonl")
    back = load_triplets(tmp_path / "t.jsonl")
    assert len(back) == 4
    assert np.allclose(back[0].query, trips[0].query)


def test_triplet_store_references(tmp_path):
    vec = np.array([[0.5, -1.0]], dtype=np.float32)
    write_embeddings(tmp_path / "s", [EmbeddingMatrix("docA", vec)])
    (tmp_path / "t.jsonl").write_text(
        '{"query_id":"q1","query":[1.0,0.0],"positive":"docA","negative":[0.0,1.0]}\n',
        encoding="utf-8",
    )
    trips = load_triplets(tmp_path / "t.jsonl", store_path=tmp_path / "s")
    assert np.allclose(trips[0].positive, [0.5, -1.0])
    with pytest.raises(FormatError, match="unresolved"):
        load_triplets(tmp_path / "t.jsonl")


def test_loss_curve_csv(tmp_path):
    trips = make_rotation_triplets(6, 4, angle=0.5, seed=6)
    result = toy_finetune(trips, ContrastiveConfig(epochs=2))
    write_loss_curve(result, tmp_path / "curve.csv")
    lines = (tmp_path / "curve.csv").read_text().strip().splitlines()
    assert lines[0] == "step,loss"
    assert len(lines) == 1 + result.steps
