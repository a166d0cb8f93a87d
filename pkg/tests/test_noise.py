import math

import numpy as np
import pytest

from limitlab import noise
from limitlab.data import Dataset
from limitlab.errors import InputError

CIFAR_PAIRS = {9: 1, 2: 0, 4: 7, 3: 5}


def make_dataset(n=100, k=10, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset(rng.standard_normal((n, 3)), rng.integers(0, k, n), k=k)


def test_p_zero_leaves_labels_unchanged():
    data = make_dataset()
    out = noise.corrupt(data, noise.NoiseSpec("uniform", 0.0, seed=5))
    np.testing.assert_array_equal(out.labels, data.labels)
    np.testing.assert_array_equal(out.clean_labels, data.labels)
    np.testing.assert_array_equal(out.inputs, data.inputs)


def test_uniform_rate_within_binomial_ci():
    n, p = 10_000, 0.8
    data = make_dataset(n=n)
    out = noise.corrupt(data, noise.NoiseSpec("uniform", p, seed=11))
    rate = float((out.labels != out.clean_labels).mean())
    half_width = 2.576 * math.sqrt(p * (1 - p) / n)  # 99% CI
    assert abs(rate - p) <= half_width


def test_pair_noise_only_flips_mapped_classes_to_targets():
    data = make_dataset(n=5000)
    out = noise.corrupt(data, noise.NoiseSpec("pair", 0.4, pair_map=CIFAR_PAIRS, seed=3))
    changed = out.labels != out.clean_labels
    assert changed.any()
    for idx in np.flatnonzero(changed):
        src = int(out.clean_labels[idx])
        assert src in CIFAR_PAIRS
        assert int(out.labels[idx]) == CIFAR_PAIRS[src]
    untouched = ~np.isin(out.clean_labels, list(CIFAR_PAIRS))
    np.testing.assert_array_equal(out.labels[untouched], out.clean_labels[untouched])


def test_corrupt_is_deterministic_and_order_preserving():
    data = make_dataset(n=1000)
    spec = noise.NoiseSpec("uniform", 0.5, seed=21)
    a = noise.corrupt(data, spec)
    b = noise.corrupt(data, spec)
    np.testing.assert_array_equal(a.labels, b.labels)
    np.testing.assert_array_equal(a.inputs, data.inputs)


def test_corrupt_preserves_existing_clean_shadow():
    data = make_dataset(n=500)
    first = noise.corrupt(data, noise.NoiseSpec("uniform", 0.3, seed=1))
    second = noise.corrupt(first, noise.NoiseSpec("uniform", 0.3, seed=2))
    np.testing.assert_array_equal(second.clean_labels, data.labels)


def test_uniform_never_maps_to_itself():
    rng = np.random.default_rng(0)
    data = Dataset(rng.standard_normal((10_000, 2)), rng.integers(0, 3, 10_000), k=3)
    out = noise.corrupt(data, noise.NoiseSpec("uniform", 0.9, seed=7))
    fired = out.labels != out.clean_labels
    # every fired corruption landed on a different class, and the rate says
    # essentially all draws fired somewhere different
    assert (out.labels[fired] != out.clean_labels[fired]).all()
    assert fired.mean() == pytest.approx(0.9, abs=0.01)


def test_pair_map_class_out_of_range():
    data = make_dataset(k=5)
    with pytest.raises(InputError):
        noise.corrupt(data, noise.NoiseSpec("pair", 0.4, pair_map={7: 1}, seed=0))


def test_noise_spec_validation():
    with pytest.raises(InputError):
        noise.NoiseSpec("uniform", 1.0)
    with pytest.raises(InputError):
        noise.NoiseSpec("pair", 0.4)  # missing map
    with pytest.raises(InputError):
        noise.NoiseSpec("pair", 0.4, pair_map={3: 3})
    with pytest.raises(InputError):
        noise.NoiseSpec("banana", 0.4)


# ---------------------------------------------------------------------------
# conditional entropy


def test_entropy_uniform_point_eight():
    spec = noise.NoiseSpec("uniform", 0.8)
    expected = -0.8 * math.log2(0.8) - 0.2 * math.log2(0.2) + 0.8 * math.log2(9)
    assert noise.conditional_entropy_bits(spec, 10) == pytest.approx(expected, abs=1e-12)
    assert noise.conditional_entropy_bits(spec, 10) == pytest.approx(3.2578, abs=1e-4)


def test_entropy_zero_noise():
    assert noise.conditional_entropy_bits(noise.NoiseSpec("uniform", 0.0), 10) == 0.0
    assert noise.conditional_entropy_bits(noise.NoiseSpec("none"), 10) == 0.0


def test_entropy_at_uninformative_point():
    spec = noise.NoiseSpec("uniform", 0.9)
    assert noise.conditional_entropy_bits(spec, 10) == pytest.approx(math.log2(10), abs=1e-12)


def test_entropy_strictly_increasing_in_p():
    ps = np.linspace(0.0, 0.9, 50)
    values = [noise.conditional_entropy_bits(noise.NoiseSpec("uniform", float(p)), 10) for p in ps]
    assert all(b > a for a, b in zip(values, values[1:]))


def test_entropy_pair_uniform_prior():
    spec = noise.NoiseSpec("pair", 0.4, pair_map=CIFAR_PAIRS)
    expected = (4 / 10) * noise.binary_entropy_bits(0.4)
    assert noise.conditional_entropy_bits(spec, 10) == pytest.approx(expected, abs=1e-12)
    # empirical class masses can override the uniform prior
    mass = {c: 0.05 for c in CIFAR_PAIRS}
    assert noise.conditional_entropy_bits(spec, 10, class_mass=mass) == pytest.approx(
        0.2 * noise.binary_entropy_bits(0.4), abs=1e-12
    )
