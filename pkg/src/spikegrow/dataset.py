"""Spike-train datasets: synthetic generator, nesting, splitting, serialization.

A dataset holds N labeled samples, each a (d, T) block of binary spike
trains. The synthetic generator draws one per-channel Bernoulli rate profile
per category and realizes independent spike rasters around it, so class
information lives in the per-channel firing statistics. Families of datasets
are nested: every sample of an earlier stage is literally a member of every
later stage.

File format (version 1, line oriented): a JSON header line
{"format_version": 1, "d", "T", "dt_ms", "n_samples", "categories"}
followed by one JSON line per sample {"label_index", "spikes"} where
"spikes" lists, per channel, the ascending spike time indices in [0, T).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from ._util import atomic_write_text
from .errors import ConfigError, DataFormatError, ShapeError

FORMAT_VERSION = 1

# Sample-level Bernoulli probabilities are clamped to this open interval;
# category profiles that would leave it are rejected outright.
_RATE_EPS = 1e-9


@dataclass(frozen=True)
class LabeledSample:
    """One d-channel spike block with its category label."""

    channels: np.ndarray  # (d, T) uint8
    label: int

    def __post_init__(self):
        arr = np.asarray(self.channels, dtype=np.uint8)
        if arr.ndim != 2:
            raise ShapeError("sample channels must form a (d, T) array")
        arr.setflags(write=False)
        object.__setattr__(self, "channels", arr)

    @property
    def d(self) -> int:
        return self.channels.shape[0]

    @property
    def T(self) -> int:
        return self.channels.shape[1]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, LabeledSample)
            and self.label == other.label
            and np.array_equal(self.channels, other.channels)
        )


class LabeledDataset:
    """An immutable collection of samples over an ordered category list."""

    def __init__(self, samples, categories, d, T, dt_ms=1.0):
        self.samples = list(samples)
        self.categories = list(categories)
        self.d = int(d)
        self.T = int(T)
        self.dt_ms = float(dt_ms)
        self._tensor = None
        if len(set(self.categories)) != len(self.categories):
            raise ConfigError("categories must be distinct")
        cat_set = set(self.categories)
        for k, s in enumerate(self.samples):
            if s.channels.shape != (self.d, self.T):
                raise ShapeError(
                    f"sample {k} has shape {s.channels.shape}, "
                    f"expected {(self.d, self.T)}"
                )
            if s.label not in cat_set:
                raise ConfigError(f"sample {k} label {s.label} not in categories")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    def label_indices(self) -> np.ndarray:
        """Per-sample index into the ordered category list."""
        pos = {c: i for i, c in enumerate(self.categories)}
        return np.array([pos[s.label] for s in self.samples], dtype=np.intp)

    def spike_tensor(self) -> np.ndarray:
        """All samples stacked as an (N, d, T) float array; cached."""
        if self._tensor is None:
            if self.samples:
                t = np.stack([s.channels for s in self.samples]).astype(np.float64)
            else:
                t = np.zeros((0, self.d, self.T))
            t.setflags(write=False)
            self._tensor = t
        return self._tensor

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, LabeledDataset)
            and self.categories == other.categories
            and (self.d, self.T, self.dt_ms) == (other.d, other.T, other.dt_ms)
            and self.samples == other.samples
        )


@dataclass(frozen=True)
class NestedFamily:
    """Strictly nested dataset stages with growing category sets."""

    stages: tuple

    def __post_init__(self):
        stages = tuple(self.stages)
        object.__setattr__(self, "stages", stages)
        for a, b in zip(stages, stages[1:]):
            if not a.n_categories < b.n_categories:
                raise ConfigError("stage category counts must strictly increase")
            if b.categories[: a.n_categories] != a.categories:
                raise ConfigError("stage categories must extend the previous stage")


@dataclass(frozen=True)
class GeneratorConfig:
    d: int = 64
    T: int = 25
    categories: int = 20
    samples_per_category: int = 200
    base_rate: float = 0.2
    separation: float = 0.5
    jitter: float = 0.1
    rng_seed: int = 0
    dt_ms: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.base_rate < 1.0):
            raise ConfigError("base_rate must lie strictly in (0, 1)")
        if not (0.0 <= self.separation <= 1.0 and 0.0 <= self.jitter <= 1.0):
            raise ConfigError("separation and jitter must lie in [0, 1]")
        if min(self.d, self.T, self.categories, self.samples_per_category) < 1:
            raise ConfigError("d, T, categories and samples_per_category must be >= 1")


def generate_family(config: GeneratorConfig, stage_sizes) -> NestedFamily:
    """Build nested synthetic datasets, one stage per requested category count.

    Each category gets a fixed per-channel rate profile (base rate shifted
    up or down by separation*base_rate with a random sign per channel);
    each sample perturbs that profile by jitter and draws independent
    Bernoulli spikes. Fully determined by config.rng_seed.
    """
    stage_sizes = list(stage_sizes)
    if not stage_sizes:
        raise ConfigError("at least one stage size is required")
    if any(b <= a for a, b in zip(stage_sizes, stage_sizes[1:])):
        raise ConfigError("stage_sizes must be strictly increasing")
    if stage_sizes[0] < 1 or stage_sizes[-1] > config.categories:
        raise ConfigError(
            f"stage sizes must lie in [1, {config.categories}], got {stage_sizes}"
        )

    rng = np.random.default_rng(config.rng_seed)
    d, T = config.d, config.T
    per_category: list[list[LabeledSample]] = []
    for cat in range(stage_sizes[-1]):
        signs = rng.integers(0, 2, size=d) * 2 - 1
        profile = config.base_rate * (1.0 + signs * config.separation)
        if np.any(profile <= 0.0) or np.any(profile >= 1.0):
            raise ConfigError(
                "category rate profile left (0, 1); reduce separation or base_rate"
            )
        samples = []
        for _ in range(config.samples_per_category):
            perturbation = rng.uniform(-1.0, 1.0, size=d) * config.jitter * config.base_rate
            p = np.clip(profile + perturbation, _RATE_EPS, 1.0 - _RATE_EPS)
            spikes = (rng.random((d, T)) < p[:, None]).astype(np.uint8)
            samples.append(LabeledSample(spikes, cat))
        per_category.append(samples)

    stages = []
    for size in stage_sizes:
        samples = [s for cat in range(size) for s in per_category[cat]]
        stages.append(
            LabeledDataset(samples, list(range(size)), d, T, config.dt_ms)
        )
    return NestedFamily(tuple(stages))


def split_train_test(ds: LabeledDataset, test_fraction: float, seed: int):
    """Deterministic stratified split into disjoint train and test datasets."""
    if not (0.0 < test_fraction < 1.0):
        raise ConfigError("test_fraction must lie strictly in (0, 1)")
    rng = np.random.default_rng(seed)
    by_label: dict = {c: [] for c in ds.categories}
    for idx, s in enumerate(ds.samples):
        by_label[s.label].append(idx)
    train_idx, test_idx = [], []
    for c in ds.categories:
        idxs = by_label[c]
        if len(idxs) < 2:
            raise ConfigError(
                f"category {c} has {len(idxs)} sample(s); need >= 2 to stratify"
            )
        order = rng.permutation(len(idxs))
        n_test = int(round(test_fraction * len(idxs)))
        n_test = min(max(n_test, 1), len(idxs) - 1)
        for k, o in enumerate(order):
            (test_idx if k < n_test else train_idx).append(idxs[o])
    train_idx.sort()
    test_idx.sort()
    mk = lambda idxs: LabeledDataset(
        [ds.samples[i] for i in idxs], ds.categories, ds.d, ds.T, ds.dt_ms
    )
    return mk(train_idx), mk(test_idx)


def encode_targets(ds: LabeledDataset) -> np.ndarray:
    """One-hot target table, shape (N, m), rows indexed by sample order."""
    if len(ds) == 0:
        raise ConfigError("cannot encode targets of an empty dataset")
    F = np.zeros((len(ds), ds.n_categories))
    F[np.arange(len(ds)), ds.label_indices()] = 1.0
    return F


def dataset_to_text(ds: LabeledDataset) -> str:
    """Canonical serialized form; also the basis of dataset fingerprints."""
    header = {
        "format_version": FORMAT_VERSION,
        "d": ds.d,
        "T": ds.T,
        "dt_ms": ds.dt_ms,
        "n_samples": len(ds),
        "categories": list(ds.categories),
    }
    pos = {c: i for i, c in enumerate(ds.categories)}
    lines = [json.dumps(header, sort_keys=True)]
    for s in ds.samples:
        spikes = [np.flatnonzero(ch).tolist() for ch in s.channels]
        lines.append(
            json.dumps({"label_index": pos[s.label], "spikes": spikes}, sort_keys=True)
        )
    return "\n".join(lines) + "\n"


def dataset_fingerprint(ds: LabeledDataset) -> str:
    return hashlib.sha256(dataset_to_text(ds).encode("utf-8")).hexdigest()


def save_dataset(ds: LabeledDataset, path: str) -> None:
    atomic_write_text(path, dataset_to_text(ds))


def _parse_header(line: str, offset: int) -> dict:
    try:
        header = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"malformed header at byte {offset}: {exc}") from None
    if not isinstance(header, dict):
        raise DataFormatError(f"malformed header at byte {offset}: not an object")
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise DataFormatError(
            f"unsupported format version {version!r} at byte {offset}"
        )
    required = {"d", "T", "dt_ms", "n_samples", "categories"}
    missing = required - header.keys()
    if missing:
        raise DataFormatError(
            f"header missing fields {sorted(missing)} at byte {offset}"
        )
    return header


def load_dataset(path: str) -> LabeledDataset:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    lines = text.splitlines()
    if not lines:
        raise DataFormatError("malformed header at byte 0: empty file")
    header = _parse_header(lines[0], 0)
    d, T = header["d"], header["T"]
    n_samples = header["n_samples"]
    categories = header["categories"]
    if not (isinstance(d, int) and isinstance(T, int) and d >= 1 and T >= 1):
        raise DataFormatError("malformed header at byte 0: bad d or T")

    samples = []
    offset = len(lines[0]) + 1
    for k in range(1, n_samples + 1):
        if k >= len(lines) or not lines[k].strip():
            raise DataFormatError(
                f"truncated sample block at byte {offset}: "
                f"expected {n_samples} samples, found {k - 1}"
            )
        try:
            rec = json.loads(lines[k])
            label_index = rec["label_index"]
            spikes = rec["spikes"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataFormatError(
                f"malformed sample record at byte {offset}: {exc}"
            ) from None
        if not (0 <= label_index < len(categories)):
            raise DataFormatError(
                f"label index {label_index} out of range at byte {offset}"
            )
        if len(spikes) != d:
            raise DataFormatError(
                f"sample has {len(spikes)} channels, expected {d}, at byte {offset}"
            )
        block = np.zeros((d, T), dtype=np.uint8)
        for ch, times in enumerate(spikes):
            times = np.asarray(times, dtype=np.int64)
            if times.size and (times.min() < 0 or times.max() >= T):
                raise DataFormatError(
                    f"spike time out of [0, {T}) at byte {offset}"
                )
            block[ch, times] = 1
        samples.append(LabeledSample(block, categories[label_index]))
        offset += len(lines[k]) + 1
    return LabeledDataset(samples, categories, d, T, header["dt_ms"])
