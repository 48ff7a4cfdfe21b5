"""Splitting, training, prediction, DET curves, fusion, model files."""

import io

import numpy as np
import pytest

from detbank import (
    FeatureLayout,
    FeatureVector,
    LabeledFeatureSet,
    LinearOvrModel,
    accuracy,
    det_curve,
    det_points_from_scores,
    fuse_features,
    predict_forced_choice,
    read_model,
    split_corpus,
    train_ovr_linear,
    write_model,
)


def make_set(vectors, labels, dim):
    layout = FeatureLayout(dim=dim)
    feats = [
        FeatureVector(layout, {i: v for i, v in enumerate(vec) if v != 0.0}, f"v{k:03d}", lab)
        for k, (vec, lab) in enumerate(zip(vectors, labels))
    ]
    return LabeledFeatureSet(layout, feats, list(labels))


def two_cluster_set(n_per_class=20, seed=0, spread=0.15):
    """Linearly separable 2-D toy problem: clusters at (1,0) and (0,1)."""
    rng = np.random.default_rng(seed)
    vectors, labels = [], []
    for label, center in ((1, (1.0, 0.0)), (2, (0.0, 1.0))):
        for _ in range(n_per_class):
            vectors.append(tuple(np.array(center) + rng.normal(0, spread, 2)))
            labels.append(label)
    return make_set(vectors, labels, 2)


class TestSplitCorpus:
    def corpus(self, labels):
        return make_set([(1.0,)] * len(labels), labels, 1)

    def test_exact_sizes_10(self):
        train, val, test = split_corpus(self.corpus([1] * 10), (0.4, 0.2, 0.4), seed=0)
        assert (len(train), len(val), len(test)) == (4, 2, 4)

    def test_exact_sizes_2025_balanced(self):
        labels = [1 + i % 15 for i in range(2025)]
        train, val, test = split_corpus(self.corpus(labels), (0.4, 0.2, 0.4), seed=0)
        assert (len(train), len(val), len(test)) == (810, 405, 810)

    def test_same_seed_same_split(self):
        corpus = self.corpus([1 + i % 5 for i in range(50)])
        a = split_corpus(corpus, (0.4, 0.2, 0.4), seed=9)
        b = split_corpus(corpus, (0.4, 0.2, 0.4), seed=9)
        for x, y in zip(a, b):
            assert x.video_ids == y.video_ids

    def test_different_seed_different_split(self):
        corpus = self.corpus([1 + i % 5 for i in range(50)])
        a = split_corpus(corpus, (0.4, 0.2, 0.4), seed=1)
        b = split_corpus(corpus, (0.4, 0.2, 0.4), seed=2)
        assert any(x.video_ids != y.video_ids for x, y in zip(a, b))


class TestSplitPartition:
    def test_partition_no_overlap(self, rng):
        import warnings

        for _ in range(50):
            labels = [int(rng.integers(1, 6)) for _ in range(int(rng.integers(9, 60)))]
            corpus = make_set([(1.0,)] * len(labels), labels, 1)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")  # tiny classes may warn
                train, val, test = split_corpus(corpus, (0.4, 0.2, 0.4), int(rng.integers(1e6)))
            ids = train.video_ids + val.video_ids + test.video_ids
            assert sorted(ids) == sorted(corpus.video_ids)
            assert len(set(ids)) == len(ids)

    def test_stratified_every_class_everywhere(self):
        labels = [1 + i % 4 for i in range(40)]
        corpus = make_set([(1.0,)] * 40, labels, 1)
        train, val, test = split_corpus(corpus, (0.4, 0.2, 0.4), seed=3)
        for part in (train, val, test):
            assert set(part.labels) == {1, 2, 3, 4}

    def test_tiny_class_goes_to_training_with_warning(self):
        labels = [1] * 10 + [2] * 2
        corpus = make_set([(1.0,)] * 12, labels, 1)
        with pytest.warns(UserWarning, match="class 2"):
            train, val, test = split_corpus(corpus, (0.4, 0.2, 0.4), seed=0)
        assert train.labels.count(2) == 2
        assert val.labels.count(2) == 0 and test.labels.count(2) == 0

    def test_bad_ratios_rejected(self):
        corpus = make_set([(1.0,)] * 4, [1, 1, 2, 2], 1)
        with pytest.raises(ValueError, match="sum to 1"):
            split_corpus(corpus, (0.5, 0.2, 0.4), seed=0)
        with pytest.raises(ValueError, match="positive"):
            split_corpus(corpus, (1.0, 0.0, 0.0), seed=0)


class TestTraining:
    def test_separable_training_accuracy_is_1(self):
        lset = two_cluster_set()
        model = train_ovr_linear(lset, reg=0.01, seed=0)
        assert accuracy(model, lset) == 1.0

    def test_deterministic_same_seed(self):
        lset = two_cluster_set()
        a = train_ovr_linear(lset, reg=0.01, seed=5)
        b = train_ovr_linear(lset, reg=0.01, seed=5)
        assert a.weights.tobytes() == b.weights.tobytes()
        assert a.biases.tobytes() == b.biases.tobytes()

    def test_single_class_rejected(self):
        lset = make_set([(1.0,), (2.0,)], [1, 1], 1)
        with pytest.raises(ValueError, match="two classes"):
            train_ovr_linear(lset, reg=0.01, seed=0)

    def test_nonpositive_reg_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            train_ovr_linear(two_cluster_set(), reg=0.0, seed=0)

    def test_held_out_accuracy_on_separable_data(self):
        lset = two_cluster_set(n_per_class=60, seed=1)
        train, val, test = split_corpus(lset, (0.4, 0.2, 0.4), seed=2)
        model = train_ovr_linear(train, reg=0.01, seed=2)
        assert accuracy(model, test) >= 0.95

    def test_maxabs_scaling_folds_into_weights(self):
        lset = two_cluster_set()
        model = train_ovr_linear(lset, reg=0.01, seed=0, scale="maxabs")
        assert accuracy(model, lset) == 1.0


class TestPrediction:
    def model(self, weights, biases, classes=(1, 2, 3)):
        return LinearOvrModel(
            tuple(classes), np.asarray(weights, dtype=float), np.asarray(biases, dtype=float),
            reg=0.01, seed=0, epochs=1,
        )

    def test_zero_vector_zero_biases_ties_to_lowest_class(self):
        model = self.model(np.zeros((3, 4)), np.zeros(3))
        vec = FeatureVector(FeatureLayout(dim=4), {})
        assert predict_forced_choice(model, vec) == 1

    def test_argmax_of_decisions(self):
        model = self.model([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]], [0.0, 0.0, 0.0])
        vec = FeatureVector(FeatureLayout(dim=2), {1: 2.0})
        assert predict_forced_choice(model, vec) == 2

    def test_prediction_always_in_class_list(self, rng):
        model = self.model(rng.normal(size=(3, 6)), rng.normal(size=3))
        for _ in range(50):
            idx = rng.choice(6, size=3, replace=False)
            vec = FeatureVector(
                FeatureLayout(dim=6), {int(i): float(rng.normal()) or 0.5 for i in idx}
            )
            assert predict_forced_choice(model, vec) in model.classes

    def test_dimension_mismatch_rejected(self):
        model = self.model(np.zeros((3, 4)), np.zeros(3))
        vec = FeatureVector(FeatureLayout(dim=5), {})
        with pytest.raises(ValueError, match="dim"):
            predict_forced_choice(model, vec)

    def test_positive_scaling_invariance(self, rng):
        weights = rng.normal(size=(3, 6))
        biases = rng.normal(size=3)
        model = self.model(weights, biases)
        scaled = self.model(weights * 7.5, biases * 7.5)
        for _ in range(100):
            vec = FeatureVector(
                FeatureLayout(dim=6),
                {int(i): float(rng.normal()) or 0.5 for i in rng.choice(6, 3, replace=False)},
            )
            assert predict_forced_choice(model, vec) == predict_forced_choice(scaled, vec)

    def test_accuracy_on_empty_set_rejected(self):
        model = self.model(np.zeros((3, 4)), np.zeros(3))
        empty = LabeledFeatureSet(FeatureLayout(dim=4), [], [])
        with pytest.raises(ValueError, match="empty"):
            accuracy(model, empty)

    def test_random_model_on_balanced_classes_is_chance(self, rng):
        # 15 balanced classes, random gaussian weights: accuracy ~ 1/15
        n, dim, k = 1500, 30, 15
        labels = [1 + i % k for i in range(n)]
        feats = []
        layout = FeatureLayout(dim=dim)
        for i in range(n):
            idx = rng.choice(dim, size=5, replace=False)
            feats.append(
                FeatureVector(layout, {int(j): float(rng.uniform(0.1, 1)) for j in idx}, f"v{i}", labels[i])
            )
        lset = LabeledFeatureSet(layout, feats, labels)
        accs = []
        for seed in range(3):
            gen = np.random.default_rng(seed)
            model = LinearOvrModel(
                tuple(range(1, k + 1)), gen.normal(size=(k, dim)), np.zeros(k),
                reg=0.01, seed=seed, epochs=1,
            )
            accs.append(accuracy(model, lset))
        assert abs(np.mean(accs) - 1 / 15) < 0.04


class TestDetCurve:
    def test_perfect_ranking_passes_through_origin(self):
        points = det_points_from_scores(
            np.array([0.9, 0.8, 0.2, 0.1]), np.array([True, True, False, False])
        )
        assert (0.0, 0.0) in points
        assert points[0] == (0.0, 1.0) and points[-1] == (1.0, 0.0)

    def test_inverted_ranking_hand_trace(self):
        points = det_points_from_scores(
            np.array([0.1, 0.2, 0.3, 0.4]), np.array([True, True, False, False])
        )
        assert points == [(0.0, 1.0), (0.5, 1.0), (1.0, 1.0), (1.0, 0.5), (1.0, 0.0)]

    def test_equal_scores_degenerate_two_point_curve(self):
        points = det_points_from_scores(
            np.array([0.5, 0.5, 0.5, 0.5]), np.array([True, False, True, False])
        )
        assert points == [(0.0, 1.0), (1.0, 0.0)]

    def test_monotone_miss_rate(self, rng):
        for _ in range(200):
            n = int(rng.integers(2, 60))
            positive = rng.random(n) < 0.5
            if positive.all() or not positive.any():
                continue
            scores = rng.normal(size=n)
            points = det_points_from_scores(scores, positive)
            fas = [p[0] for p in points]
            misses = [p[1] for p in points]
            assert fas == sorted(fas)
            assert misses == sorted(misses, reverse=True)

    def test_requires_both_classes(self):
        with pytest.raises(ValueError, match="positives and negatives"):
            det_points_from_scores(np.array([0.1, 0.2]), np.array([True, True]))

    def test_det_curve_through_model(self):
        lset = two_cluster_set()
        model = train_ovr_linear(lset, reg=0.01, seed=0)
        points = det_curve(model, lset, 1)
        assert (0.0, 0.0) in points  # separable data ranks perfectly

    def test_unknown_event_rejected(self):
        lset = two_cluster_set()
        model = train_ovr_linear(lset, reg=0.01, seed=0)
        with pytest.raises(ValueError, match="not in model"):
            det_curve(model, lset, 99)


class TestFusion:
    def test_single_set_is_identity(self):
        lset = two_cluster_set()
        assert fuse_features([lset]) is lset

    def test_dimension_arithmetic(self):
        a = make_set([(1.0, 0.0)], [1], 2)
        b = make_set([(2.0, 3.0, 0.0)], [1], 3)
        fused = fuse_features([a, b])
        assert fused.layout.dim == 5
        assert fused.features[0].values == {0: 1.0, 2: 2.0, 3: 3.0}

    def test_paper_scale_dimension_arithmetic(self):
        a = make_set([()], [1], 4200)
        b = make_set([()], [1], 44604)
        c = make_set([()], [1], 59724)
        assert fuse_features([a, b, c]).layout.dim == 108528

    def test_zero_dimensional_set_is_identity_on_values(self):
        a = make_set([(1.0, 2.0)], [1], 2)
        empty = make_set([()], [1], 0)
        fused = fuse_features([a, empty])
        assert fused.layout.dim == 2
        assert fused.features[0].values == a.features[0].values
        assert fused.labels == a.labels

    def test_associativity(self, rng):
        def rand_set(dim, ids_labels):
            layout = FeatureLayout(dim=dim)
            feats = [
                FeatureVector(
                    layout,
                    {int(i): float(rng.normal()) or 1.0 for i in rng.choice(dim, 2, replace=False)},
                    vid, lab,
                )
                for vid, lab in ids_labels
            ]
            return LabeledFeatureSet(layout, feats, [lab for _, lab in ids_labels])

        ids_labels = [("a", 1), ("b", 2)]
        A, B, C = rand_set(5, ids_labels), rand_set(7, ids_labels), rand_set(3, ids_labels)
        left = fuse_features([fuse_features([A, B]), C])
        flat = fuse_features([A, B, C])
        assert left.layout.dim == flat.layout.dim
        for x, y in zip(left.features, flat.features):
            assert x.values == y.values

    def test_ordering_mismatch_names_video(self):
        a = make_set([(1.0,), (2.0,)], [1, 1], 1)
        b = make_set([(1.0,), (2.0,)], [1, 1], 1)
        b.features[0].video_id = "zzz"
        with pytest.raises(ValueError, match="zzz"):
            fuse_features([a, b])

    def test_label_mismatch_names_video(self):
        a = make_set([(1.0,)], [1], 1)
        b = make_set([(1.0,)], [2], 1)
        with pytest.raises(ValueError, match="v000"):
            fuse_features([a, b])

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError, match="nothing to fuse"):
            fuse_features([])


class TestModelFiles:
    def test_round_trip_exact(self):
        lset = two_cluster_set()
        model = train_ovr_linear(lset, reg=0.01, seed=4)
        buf = io.StringIO()
        write_model(buf, model)
        back = read_model(buf.getvalue())
        assert back.classes == model.classes
        assert back.weights.tobytes() == model.weights.tobytes()
        assert back.biases.tobytes() == model.biases.tobytes()
        assert (back.reg, back.seed, back.epochs) == (model.reg, model.seed, model.epochs)

    def test_missing_header_rejected(self):
        with pytest.raises(ValueError, match="header"):
            read_model("1 0.0 0:1.0\n")

    def test_wrong_class_count_rejected(self):
        lset = two_cluster_set()
        model = train_ovr_linear(lset, reg=0.01, seed=4)
        buf = io.StringIO()
        write_model(buf, model)
        truncated = "\n".join(buf.getvalue().splitlines()[:-1]) + "\n"
        with pytest.raises(ValueError, match="weight lines"):
            read_model(truncated)
