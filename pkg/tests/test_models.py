import json
import logging

import numpy as np
import pytest
from pydantic import ValidationError

from frameverify.app.annotate import TitleGazetteer
from frameverify.app.corpus import AnnotatedClaim, Label
from frameverify.app.embed import EmbeddingTable
from frameverify.app.errors import AlignmentError, CheckpointError
from frameverify.app.models import (
    Example,
    Prediction,
    Variant,
    VerifierParams,
    example_loss,
    forward_mt,
    forward_mt_gumbel,
    forward_verifier,
    layer_shapes,
    load_checkpoint,
    load_predictions,
    multitask_loss,
    outer_features,
    predict,
    save_checkpoint,
    save_predictions,
    train,
    utility_accuracy,
)
from frameverify.app.neural import TrainConfig, add_l2, grad_check, gumbel_noise, l2_penalty
from frameverify.app.retrieval import EvidenceCandidate, EvidencePool, retrieve_pool
from frameverify.app.synthetic import build_synthetic

DIM = 6
SMALL = dict(hidden_size=8, K=2, M=1, dropout=0.0, l2=0.0)


def _params(variant, dim=DIM, seed=1, **overrides):
    config = TrainConfig(**{**SMALL, **overrides})
    return VerifierParams.init(variant, dim, config, np.random.default_rng(seed))


def _example(slots=3, seed=0):
    rng = np.random.default_rng(seed)
    return Example(
        claim_id="g",
        claim_vec=rng.normal(size=DIM),
        evidence=rng.normal(size=(slots, DIM)),
        real=np.ones(slots, dtype=bool),
        keys=[("D", i) for i in range(slots)],
        label=1,
        utility_targets=np.arange(slots) % 2,
    )


def _zero(params):
    for layer in params.all_layers():
        layer.W[:] = 0.0
        layer.b[:] = 0.0
    return params


def _pools(data, claims, K=3, M=0):
    gazetteer = TitleGazetteer.from_corpus(data.corpus)
    return {claim.claim_id: retrieve_pool(claim, data.corpus, K, M, gazetteer) for claim in claims}


def _softmax(logits):
    exp = np.exp(np.asarray(logits, dtype=float))
    return exp / exp.sum()


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@pytest.fixture
def two_slot_pool():
    return EvidencePool(
        claim_id="q",
        candidates=(
            EvidenceCandidate(doc_id="D", sentence_index=0, tokens=("yes",), utility_target=1),
            EvidenceCandidate(doc_id="D", sentence_index=1, tokens=("no",), utility_target=0),
        ),
        K=2,
        M=0,
    )


@pytest.fixture
def yes_no_table():
    return EmbeddingTable.from_vectors({"yes": [1.0, 0.0], "no": [0.0, 1.0], "claim": [1.0, 1.0]})


class TestArchitecture:
    def test_variant_parsing(self):
        assert Variant.parse("MT_GUMBEL") is Variant.MT_GUMBEL
        assert Variant.parse("v2") is Variant.V2
        with pytest.raises(ValueError):
            Variant.parse("v3")

    def test_plain_shapes(self):
        assert layer_shapes(Variant.V1, 4, 5) == {"plain.0": (9, 5), "plain.1": (5, 3)}
        assert list(layer_shapes(Variant.V2, 4, 5)) == ["plain.0", "plain.1", "plain.2"]

    def test_gumbel_head_sizes(self):
        shapes = layer_shapes(Variant.MT_GUMBEL, 4, 5)
        assert shapes["gumbel"] == (5, 2)
        assert shapes["claim_head"] == (15, 3)
        assert shapes["utility_head"] == (10, 2)

    def test_evidence_encoder_is_shared_across_slots(self):
        few = _params(Variant.MT, K=2, M=0)
        many = _params(Variant.MT, K=7, M=3)
        assert few.n_params("evidence_encoder") == many.n_params("evidence_encoder")
        assert few.n_params() == many.n_params()


class TestGradients:
    @pytest.mark.parametrize("variant", list(Variant))
    def test_analytic_gradients(self, variant):
        params = _params(variant)
        example = _example()
        noise = gumbel_noise((3, 2), np.random.default_rng(9))

        def closure():
            claim_loss, utility_loss, _ = example_loss(params, example, training=False, noise=noise)
            return claim_loss + utility_loss

        assert grad_check(closure, params.all_layers(), floor=1e-6) < 1e-4

    def test_l2_gradient(self):
        params = _params(Variant.MT, lambda_utility=0.5)
        example = _example()
        layers = params.all_layers()

        def closure():
            claim_loss, utility_loss, _ = example_loss(params, example, training=False)
            add_l2(layers, 0.1)
            return claim_loss + utility_loss + l2_penalty(layers, 0.1)

        assert grad_check(closure, layers, floor=1e-6) < 1e-4

    def test_no_gradient_without_backward(self):
        params = _params(Variant.MT)
        example_loss(params, _example(), training=False, backward=False)
        assert all(not layer.grad_W.any() for layer in params.all_layers())


class TestForward:
    def test_zero_weights_give_uniform_outputs(self):
        c, E = np.ones(DIM), np.ones((3, DIM))
        plain = forward_verifier(_zero(_params(Variant.V2)), c, E)
        np.testing.assert_allclose(plain.label_probs, 1 / 3)
        mt = forward_mt(_zero(_params(Variant.MT)), c, E)
        np.testing.assert_allclose(mt.label_probs, 1 / 3)
        np.testing.assert_allclose(mt.utilities, 0.5)

    def test_hand_computed_plain_verifier(self):
        params = _params(Variant.V1, dim=2, hidden_size=2)
        params.layers["plain.0"].W[:] = [[1, 0, 0, 0, 0], [0, 0, 0, 1, 0]]
        params.layers["plain.0"].b[:] = 0.0
        params.layers["plain.1"].W[:] = [[2, 0], [0, 1], [0, 0]]
        params.layers["plain.1"].b[:] = 0.0
        pred = forward_verifier(params, np.array([1.0, 0.0]), [np.array([0.0, 1.0])], keys=[("D", 4)])
        expected = np.exp([2.0, 1.0, 0.0]) / np.exp([2.0, 1.0, 0.0]).sum()
        np.testing.assert_allclose(pred.label_probs, expected)
        assert pred.label is Label.SUPPORTED
        assert pred.selected_evidence == (("D", 4),)

    def test_hand_computed_multitask(self):
        params = _zero(_params(Variant.MT, dim=2, hidden_size=2, encoder_layers=1, K=2, M=0))
        params.layers["claim_encoder.0"].W[:] = np.eye(2)
        params.layers["evidence_encoder.0"].W[:] = [[0, 1, 0], [0, 0, 1]]
        params.layers["claim_head"].W[:] = [[1, 0, 2, 0], [0, 0, 0, 2], [0, 0, 0, 0]]
        params.layers["utility_head"].W[:] = [[0, 0], [2, -2]]
        # slot inputs (e, cos(c, e)): (0, 1, 0) and (1, 0, 1) encode to (1, 0) and (0, 1)
        evidence = [np.array([0.0, 1.0]), np.array([1.0, 0.0])]
        pred = forward_mt(params, np.array([1.0, 0.0]), evidence, keys=[("D", 0), ("D", 1)])
        np.testing.assert_allclose(pred.label_probs, _softmax([2.0, 1.0, 0.0]))
        np.testing.assert_allclose(pred.utilities, [_sigmoid(2.0), _sigmoid(-2.0)])
        assert pred.label is Label.SUPPORTED
        assert pred.selected_evidence == (("D", 0),)

    def test_hand_computed_gumbel_with_zero_noise(self):
        params = _zero(_params(Variant.MT_GUMBEL, dim=2, hidden_size=2, encoder_layers=1, K=1, M=0))
        params.layers["claim_encoder.0"].W[:] = np.eye(2)
        params.layers["evidence_encoder.0"].W[:] = [[0, 1, 0], [0, 2, 0]]
        params.layers["gumbel"].W[:] = [[0, 0], [1, 0]]
        params.layers["claim_head"].W[:] = [[0, 0, 0, 1, 0, 0], [0, 0, 1, 0, 0, 0], [1, 0, 0, 0, 0, 0]]
        params.layers["utility_head"].W[:] = [[0, 0, 0, 0], [0, 0, 0, 1]]
        pred = forward_mt_gumbel(
            params, np.array([1.0, 0.0]), [np.array([0.0, 1.0])], tau=1.0, noise=np.zeros((1, 2)), keys=[("D", 3)]
        )
        # e2 = (1, 2), z = softmax(0, 1), outer = (z0, z1, 2 z0, 2 z1)
        s = _sigmoid(1.0)
        np.testing.assert_allclose(pred.label_probs, _softmax([s, 1.0 - s, 1.0]))
        np.testing.assert_allclose(pred.utilities, [_sigmoid(2.0 * s)])
        assert pred.label is Label.UNSURE
        assert pred.selected_evidence == (("D", 3),)

    def test_plain_verifier_without_evidence(self):

        pred = forward_verifier(_params(Variant.V1), np.ones(DIM), np.zeros((0, DIM)))
        assert sum(pred.label_probs) == pytest.approx(1.0)

    def test_variant_mismatch(self):
        with pytest.raises(ValueError):
            forward_mt(_params(Variant.V1), np.ones(DIM), np.ones((3, DIM)))
        with pytest.raises(ValueError):
            forward_verifier(_params(Variant.MT), np.ones(DIM), np.ones((3, DIM)))

    def test_all_pad_evidence(self):
        pred = forward_mt(_params(Variant.MT), np.ones(DIM), np.zeros((3, DIM)), keys=[None, None, None])
        assert len(pred.utilities) == 3
        assert pred.selected_evidence == ()

    def test_slot_count_is_checked(self):
        params = _params(Variant.MT)
        with pytest.raises(ValueError):
            forward_mt(params, np.ones(DIM), np.ones((2, DIM)))
        e = np.linspace(-1.0, 1.0, DIM)
        once = forward_mt(params, np.ones(DIM), [e], expected_slots=1)
        twice = forward_mt(params, np.ones(DIM), [e, e], expected_slots=2)
        np.testing.assert_allclose(once.label_probs, twice.label_probs)

    def test_outer_features(self):
        single = outer_features(np.array([[1.0, 2.0, 3.0]]), np.array([[1.0, 0.0]]))
        np.testing.assert_array_equal(single, [[1, 0, 2, 0, 3, 0]])
        features = outer_features(np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]), np.array([[0.3, 0.7], [0.5, 0.5]]))
        np.testing.assert_array_equal(features[0], 0.0)
        np.testing.assert_allclose(features[1], 0.5)

    def test_mt_permutation_invariance(self):
        params = _params(Variant.MT)
        rng = np.random.default_rng(3)
        c, E = rng.normal(size=DIM), rng.normal(size=(3, DIM))
        order = [2, 0, 1]
        base, permuted = forward_mt(params, c, E), forward_mt(params, c, E[order])
        np.testing.assert_allclose(base.label_probs, permuted.label_probs)
        np.testing.assert_allclose(np.array(base.utilities)[order], permuted.utilities)

    def test_gumbel_permutation_invariance_with_frozen_noise(self):
        params = _params(Variant.MT_GUMBEL)
        rng = np.random.default_rng(4)
        c, E = rng.normal(size=DIM), rng.normal(size=(3, DIM))
        noise = gumbel_noise((3, 2), rng)
        order = [1, 2, 0]
        base = forward_mt_gumbel(params, c, E, noise=noise)
        permuted = forward_mt_gumbel(params, c, E[order], noise=noise[order])
        np.testing.assert_allclose(base.label_probs, permuted.label_probs)
        np.testing.assert_allclose(np.array(base.utilities)[order], permuted.utilities)


class TestMultitaskLoss:
    def test_uniform_prediction(self):
        pred = Prediction(label=Label.SUPPORTED, label_probs=(1 / 3, 1 / 3, 1 / 3), utilities=(0.5, 0.5))
        assert multitask_loss(pred, Label.REFUTED, [1, 0], lam=0.7) == pytest.approx(np.log(3) + 0.7 * np.log(2))

    def test_perfect_prediction(self):
        pred = Prediction(label=Label.SUPPORTED, label_probs=(1.0, 0.0, 0.0), utilities=(1.0, 0.0))
        assert multitask_loss(pred, "SUPPORTS", [1, 0], lam=1.0) == pytest.approx(0.0)

    def test_misaligned_targets(self):
        pred = Prediction(label=Label.SUPPORTED, label_probs=(1.0, 0.0, 0.0), utilities=(1.0, 0.0))
        with pytest.raises(ValueError):
            multitask_loss(pred, Label.SUPPORTED, [1], lam=1.0)


class TestPrediction:
    def test_label_must_be_argmax(self):
        with pytest.raises(ValidationError):
            Prediction(label=Label.REFUTED, label_probs=(0.7, 0.2, 0.1))

    def test_record_round_trip(self, tmp_path):
        predictions = [
            Prediction.from_probs(np.array([0.1, 0.7, 0.2]), np.array([0.9, 0.2]), [("D", 0)], claim_id="a"),
            Prediction(claim_id="b", label=Label.UNSURE),
        ]
        path = tmp_path / "predictions.jsonl"
        save_predictions(predictions, path)
        assert load_predictions(path) == predictions
        assert json.loads(path.read_text().splitlines()[0])["predicted_label"] == "REFUTED"

    def test_utility_filter_selects_useful_slot(self, two_slot_pool, yes_no_table):
        params = _zero(_params(Variant.MT, dim=2, hidden_size=3, encoder_layers=1, K=2, M=0))
        params.layers["evidence_encoder.0"].W[:] = np.eye(3)
        params.layers["utility_head"].W[:] = [[0, 0, 0], [10, 0, 0]]
        params.layers["utility_head"].b[:] = [0, -5]
        claim = AnnotatedClaim(claim_id="q", text="claim")

        filtered = predict(params, claim, two_slot_pool, yes_no_table, mode="u_filtered")
        assert filtered.selected_evidence == (("D", 0),)
        assert filtered.utilities[0] > 0.99 and filtered.utilities[1] < 0.01
        raw = predict(params, claim, two_slot_pool, yes_no_table, mode="raw")
        assert raw.selected_evidence == (("D", 0), ("D", 1))
        assert utility_accuracy([filtered], {"q": two_slot_pool}) == 1.0

    def test_plain_variant_falls_back_to_raw(self, two_slot_pool, yes_no_table, caplog):
        params = _params(Variant.V1, dim=2, hidden_size=3)
        claim = AnnotatedClaim(claim_id="q", text="claim")
        with caplog.at_level(logging.WARNING, logger="frameverify.app.models"):
            pred = predict(params, claim, two_slot_pool, yes_no_table, mode="u_filtered")
        assert pred.selected_evidence == (("D", 0), ("D", 1))
        assert "no utility head" in caplog.text

    def test_dimension_mismatch(self, two_slot_pool, yes_no_table):
        with pytest.raises(CheckpointError):
            predict(_params(Variant.V1), AnnotatedClaim(claim_id="q"), two_slot_pool, yes_no_table)

    @pytest.mark.parametrize("variant", [Variant.MT, Variant.MT_GUMBEL])
    def test_pool_size_must_match_trained_slots(self, synthetic, variant):
        claim = synthetic.claims[0]
        table = synthetic.table()
        params = _params(variant, dim=table.dim, K=2, M=0)
        wide = _pools(synthetic, [claim], K=5)[claim.claim_id]
        with pytest.raises(CheckpointError):
            predict(params, claim, wide, table)
        narrow = _pools(synthetic, [claim], K=2)[claim.claim_id]
        assert len(predict(params, claim, narrow, table).utilities) == 2

    def test_gumbel_prediction_is_order_independent(self, synthetic):

        claims = synthetic.claims[:4]
        pools = _pools(synthetic, claims)
        table = synthetic.table()
        params = _params(Variant.MT_GUMBEL, dim=table.dim, K=3, M=0)
        forward = [predict(params, claim, pools[claim.claim_id], table) for claim in claims]
        backward = [predict(params, claim, pools[claim.claim_id], table) for claim in reversed(claims)]
        assert forward == backward[::-1]

    def test_utility_accuracy(self, two_slot_pool):
        pred = Prediction(claim_id="q", label=Label.SUPPORTED, utilities=(0.9, 0.7))
        assert utility_accuracy([pred], {"q": two_slot_pool}) == 0.5


class TestTraining:
    def test_zero_learning_rate_keeps_loss_constant(self, synthetic):
        claims = synthetic.claims[:12]
        config = TrainConfig(learning_rate=0.0, dropout=0.0, epochs=3, hidden_size=8)
        _, history = train(claims, _pools(synthetic, claims), synthetic.table(), config, Variant.V2)
        losses = [record.claim_loss for record in history]
        np.testing.assert_allclose(losses, losses[0])

    def test_same_seed_same_history(self, synthetic):
        claims = synthetic.claims[:12]
        pools = _pools(synthetic, claims)
        config = TrainConfig(epochs=3, hidden_size=8, dropout=0.5)
        first = train(claims, pools, synthetic.table(), config, Variant.V2)[1]
        second = train(claims, pools, synthetic.table(), config, Variant.V2)[1]
        assert first == second

    def test_multitask_history_tracks_utility_loss(self, synthetic):
        claims = synthetic.claims[:6]
        config = TrainConfig(epochs=2, hidden_size=8)
        _, history = train(claims, _pools(synthetic, claims), synthetic.table(), config, Variant.MT)
        assert len(history) == 2
        assert all(record.utility_loss > 0 for record in history)

    def test_overfits_small_set(self):
        data = build_synthetic(n_docs=2)
        config = TrainConfig(learning_rate=0.02, l2=0.0, dropout=0.0, epochs=300, hidden_size=32)
        _, history = train(data.claims, _pools(data, data.claims), data.table(), config, Variant.V1)
        assert len(data.claims) == 10
        assert history[-1].claim_loss < 0.05

    def test_claims_must_align_with_pools(self, synthetic):
        claims = synthetic.claims[:3]
        pools = _pools(synthetic, claims[:2])
        with pytest.raises(AlignmentError) as info:
            train(claims, pools, synthetic.table(), TrainConfig(epochs=1), Variant.V1)
        assert info.value.claim_ids == [claims[2].claim_id]

    def test_pools_must_match_configured_size(self, synthetic):
        claims = synthetic.claims[:3]
        pools = _pools(synthetic, claims, K=5)
        config = TrainConfig(epochs=1, hidden_size=8, K=2, M=0)
        with pytest.raises(AlignmentError) as info:
            train(claims, pools, synthetic.table(), config, Variant.MT)
        assert info.value.claim_ids == [claim.claim_id for claim in claims]

    def test_empty_training_set(self, synthetic):

        with pytest.raises(ValueError):
            train([], {}, synthetic.table(), TrainConfig(), Variant.V1)


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        params = _params(Variant.MT_GUMBEL)
        path = tmp_path / "checkpoint.json"
        save_checkpoint(params, path)
        loaded = load_checkpoint(path, dim=DIM)
        assert loaded.variant is Variant.MT_GUMBEL
        assert loaded.config == params.config
        assert list(loaded.layers) == list(params.layers)
        for name, layer in params.layers.items():
            np.testing.assert_array_equal(loaded.layers[name].W, layer.W)
            np.testing.assert_array_equal(loaded.layers[name].b, layer.b)

    def test_dimension_mismatch(self, tmp_path):
        path = tmp_path / "checkpoint.json"
        save_checkpoint(_params(Variant.V1), path)
        with pytest.raises(CheckpointError):
            load_checkpoint(path, dim=DIM + 1)

    def test_wrong_layer_shape(self, tmp_path):
        path = tmp_path / "checkpoint.json"
        save_checkpoint(_params(Variant.V1), path)
        payload = json.loads(path.read_text())
        payload["layers"]["plain.1"]["W"] = [[0.0]]
        path.write_text(json.dumps(payload))
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    @pytest.mark.parametrize("content", ["not json", '{"format": "other", "version": 1}'])
    def test_unknown_format(self, tmp_path, content):
        path = tmp_path / "checkpoint.json"
        path.write_text(content)
        with pytest.raises(CheckpointError):
            load_checkpoint(path)
