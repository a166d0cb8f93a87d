import math

import numpy as np
import pytest

from limitlab import detect, nn
from limitlab.data import Dataset
from limitlab.errors import InputError, ShapeError


def saturated_identity(k):
    """Network whose softmax is an exact one-hot of the argmax input."""
    return nn.MlpModel([k, k], [np.eye(k) * 1000.0], [np.zeros(k)])


def zero_network(d, k):
    return nn.MlpModel([d, k], [np.zeros((d, k))], [np.zeros(k)])


def test_distance_zero_when_aux_matches_noisy_label():
    k = 4
    labels = np.array([2, 0, 3])
    data = Dataset(nn.onehot(labels, k), labels, k=k)
    report = detect.score_examples(saturated_identity(k), saturated_identity(k), data)
    np.testing.assert_array_equal(report.grad_distance, 0.0)


def test_distance_for_uniform_aux():
    k = 10
    labels = np.array([0, 5])
    data = Dataset(np.ones((2, 3)), labels, k=k)
    classifier = nn.init_model([3, 4, k], seed=0)
    report = detect.score_examples(classifier, zero_network(3, k), data)
    expected = math.sqrt((1 - 1 / k) ** 2 + (k - 1) / k**2)
    assert expected == pytest.approx(math.sqrt(0.90), abs=1e-12)
    np.testing.assert_allclose(report.grad_distance, expected, atol=1e-12)


def test_distance_independent_of_classifier():
    rng = np.random.default_rng(0)
    k, d, n = 5, 6, 40
    data = Dataset(rng.standard_normal((n, d)), rng.integers(0, k, n), k=k)
    aux = nn.init_model([d, 8, k], seed=1)
    report_a = detect.score_examples(nn.init_model([d, 8, k], seed=2), aux, data)
    report_b = detect.score_examples(nn.init_model([d, 8, k], seed=3), aux, data)
    np.testing.assert_array_equal(report_a.grad_distance, report_b.grad_distance)
    assert not np.array_equal(report_a.mu_norm, report_b.mu_norm)


def test_distance_bounded_by_sqrt_two():
    rng = np.random.default_rng(1)
    k, d, n = 7, 5, 500
    data = Dataset(rng.standard_normal((n, d)) * 3, rng.integers(0, k, n), k=k)
    report = detect.score_examples(nn.init_model([d, 9, k], seed=4),
                                   nn.init_model([d, 9, k], seed=5), data)
    assert (report.grad_distance >= 0).all()
    assert (report.grad_distance <= math.sqrt(2.0) + 1e-12).all()


def test_report_ranking_and_auc_fields():
    k = 3
    clean = np.array([0, 1, 2, 0, 1, 2])
    noisy = clean.copy()
    noisy[1] = 2
    noisy[4] = 0
    data = Dataset(nn.onehot(clean, k) * 4.0, noisy, k=k, clean_labels=clean)
    # auxiliary recovers the clean structure exactly
    report = detect.score_examples(saturated_identity(k), saturated_identity(k), data)
    assert report.roc_auc == 1.0
    assert set(report.top_suspects[:2]) == {1, 4}
    ranked_dist = report.grad_distance[report.top_suspects]
    assert (np.diff(ranked_dist) <= 1e-12).all()
    for cls, idxs in report.top_suspects_per_class.items():
        assert all(int(data.labels[i]) == cls for i in idxs)


def test_report_without_clean_labels_has_no_auc():
    k = 3
    labels = np.array([0, 1, 2])
    data = Dataset(np.eye(3), labels, k=k)
    report = detect.score_examples(nn.init_model([3, k], seed=0),
                                   nn.init_model([3, k], seed=1), data)
    assert report.roc_auc is None


def test_score_dim_mismatch():
    data = Dataset(np.zeros((2, 3)), np.array([0, 1]), k=2)
    with pytest.raises(ShapeError):
        detect.score_examples(nn.init_model([3, 2], seed=0), nn.init_model([4, 2], seed=0), data)
    with pytest.raises(ShapeError):
        detect.score_examples(nn.init_model([3, 2], seed=0), nn.init_model([3, 5], seed=0), data)


# ---------------------------------------------------------------------------
# roc auc


def test_roc_auc_perfect_separation():
    scores = np.array([0.9, 0.8, 0.7, 0.2, 0.1])
    flags = np.array([True, True, True, False, False])
    assert detect.roc_auc(scores, flags) == 1.0
    assert detect.roc_auc(-scores, flags) == 0.0


def test_roc_auc_all_ties():
    scores = np.ones(10)
    flags = np.arange(10) < 4
    assert detect.roc_auc(scores, flags) == 0.5


def brute_force_auc(scores, flags):
    pos = scores[flags]
    neg = scores[~flags]
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def test_roc_auc_matches_brute_force_with_ties():
    rng = np.random.default_rng(2)
    for _ in range(200):
        n = int(rng.integers(2, 11))
        scores = rng.integers(0, 4, n).astype(float)  # integer scores force ties
        flags = rng.random(n) < 0.5
        if flags.all() or not flags.any():
            continue
        assert detect.roc_auc(scores, flags) == brute_force_auc(scores, flags)


def test_roc_auc_degenerate_classes():
    with pytest.raises(InputError):
        detect.roc_auc(np.array([1.0, 2.0]), np.array([True, True]))
    with pytest.raises(InputError):
        detect.roc_auc(np.array([1.0, 2.0]), np.array([False, False]))


# ---------------------------------------------------------------------------
# histogram


def test_histogram_single_value():
    edges, counts = detect.histogram(np.array([3.5]), 4)
    assert counts.sum() == 1
    assert (counts > 0).sum() == 1


def test_histogram_exact_partition():
    values = np.arange(100, dtype=float)
    edges, counts = detect.histogram(values, 10)
    assert len(edges) == 11
    np.testing.assert_array_equal(counts, 10)


def test_histogram_counts_sum_to_n():
    rng = np.random.default_rng(3)
    values = rng.standard_normal(777)
    edges, counts = detect.histogram(values, 13)
    assert counts.sum() == 777
    assert edges[0] == values.min() and edges[-1] == values.max()


def test_histogram_validation():
    with pytest.raises(InputError):
        detect.histogram(np.array([]), 3)
    with pytest.raises(InputError):
        detect.histogram(np.array([1.0]), 0)
