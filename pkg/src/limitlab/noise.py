"""Label corruption models and the conditional label entropy they induce.

Two families: ``uniform`` replaces a label with probability p by one of
the k-1 incorrect classes chosen uniformly; ``pair`` flips each mapped
class to its designated target with probability p. Corruption keeps a
clean-label shadow and never reorders rows. Its RNG stream is separate
from training seeds so one corrupted dataset can be reused across methods.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset
from .errors import InputError

FAMILIES = ("none", "uniform", "pair")


@dataclass(frozen=True)
class NoiseSpec:
    family: str = "none"
    p: float = 0.0
    pair_map: dict[int, int] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InputError(f"noise family must be one of {FAMILIES}, got {self.family!r}")
        if not 0.0 <= self.p < 1.0:
            raise InputError(f"noise probability must be in [0, 1), got {self.p}")
        if self.family == "pair":
            if not self.pair_map:
                raise InputError("pair noise requires a non-empty pair_map")
            for src, dst in self.pair_map.items():
                if src == dst:
                    raise InputError(f"pair target must differ from source, got {src}->{dst}")

    def with_seed(self, seed: int) -> "NoiseSpec":
        return replace(self, seed=seed)


def corrupt(data: Dataset, spec: NoiseSpec) -> Dataset:
    """Return a corrupted copy of ``data``; the input is left untouched.

    The clean shadow is preserved: if ``data`` already carries clean
    labels they are kept, otherwise the current labels become the shadow.
    """
    k = data.k
    if k < 2:
        raise InputError("corruption needs at least 2 classes")
    labels = data.labels.copy()
    clean = data.clean_labels.copy() if data.clean_labels is not None else data.labels.copy()

    if spec.family == "none" or spec.p == 0.0:
        if spec.family == "pair":
            _check_pair_map(spec.pair_map, k)
        return Dataset(data.inputs.copy(), labels, k=k, clean_labels=clean)

    rng = np.random.Generator(np.random.PCG64(spec.seed))
    n = labels.shape[0]
    if spec.family == "uniform":
        fires = rng.random(n) < spec.p
        # offset in 1..k-1 guarantees a different class
        offsets = rng.integers(1, k, size=n)
        labels[fires] = (labels[fires] + offsets[fires]) % k
    else:
        _check_pair_map(spec.pair_map, k)
        fires = rng.random(n) < spec.p
        original = labels.copy()
        for src, dst in sorted(spec.pair_map.items()):
            mask = fires & (original == src)
            labels[mask] = dst
    return Dataset(data.inputs.copy(), labels, k=k, clean_labels=clean)


def _check_pair_map(pair_map, k: int):
    for src, dst in pair_map.items():
        if not (0 <= src < k and 0 <= dst < k):
            raise InputError(f"pair map entry {src}->{dst} outside [0, {k})")


def binary_entropy_bits(r: float) -> float:
    """H2(r) in bits, with 0*log(0) := 0."""
    if not 0.0 <= r <= 1.0:
        raise InputError(f"probability must be in [0, 1], got {r}")
    if r == 0.0 or r == 1.0:
        return 0.0
    return -r * math.log2(r) - (1.0 - r) * math.log2(1.0 - r)


def conditional_entropy_bits(spec: NoiseSpec, k: int, class_mass=None) -> float:
    """Per-sample label entropy H(y|x) in bits under the noise model.

    uniform: H2(p) + p*log2(k-1). pair: each mapped class contributes
    H2(p) weighted by its prior mass (uniform 1/k unless ``class_mass``
    gives empirical frequencies); unmapped classes contribute 0.
    """
    if k < 2:
        raise InputError("need at least 2 classes")
    if spec.family == "none" or spec.p == 0.0:
        return 0.0
    if spec.family == "uniform":
        return binary_entropy_bits(spec.p) + spec.p * math.log2(k - 1)
    _check_pair_map(spec.pair_map, k)
    if class_mass is None:
        mass = {src: 1.0 / k for src in spec.pair_map}
    else:
        mass = {src: float(class_mass[src]) for src in spec.pair_map}
    return binary_entropy_bits(spec.p) * sum(mass.values())
