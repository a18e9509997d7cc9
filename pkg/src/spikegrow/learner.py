"""Growth orchestration: fresh training, transfer via frozen units, checkpoints.

A network is a single hidden layer grown one neuron at a time. Fresh
training starts from nothing; experienced training starts from a seed
network whose hidden weights are inherited verbatim and never touched
again (the frozen prefix), first re-fitting only the output weights on the
enlarged category set (one-loop adaptation) and then resuming growth.
"""

from __future__ import annotations

import hashlib
import json
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._util import atomic_write_bytes
from .construct import PruningConfig, grow_one
from .dataset import LabeledDataset, dataset_fingerprint, encode_targets
from .errors import (
    ChecksumError,
    ConfigError,
    DataFormatError,
    DegenerateDataError,
    InvariantError,
    LineageError,
)
from .lif import LifParams, batch_rate_features
from .readout import fit_output_weights, predict_batch, residual

CHECKPOINT_MAGIC = b"SPIKEGROW-NET 1\n"
CHECKPOINT_VERSION = 1

STATUS_TARGET = "TargetReached"
STATUS_PATIENCE = "Patience"
STATUS_MAX_HIDDEN = "MaxHidden"
STATUS_SATURATED = "Saturated"

# Relative slack for the residual-contraction certificate check.
_CERT_RTOL = 1e-9


@dataclass(frozen=True)
class HiddenNeuron:
    """Input weights and self-feedback weight of one recruited unit."""

    w: np.ndarray
    v: float

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, HiddenNeuron)
            and self.v == other.v
            and np.array_equal(self.w, other.w)
        )


@dataclass
class GrowthConfig:
    target_train_accuracy: float = 0.99
    max_hidden: int = 500
    patience: int = 10
    eval_every: int = 5
    pruning: PruningConfig = field(default_factory=PruningConfig)
    lif: LifParams = field(default_factory=LifParams)
    rng_seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.target_train_accuracy <= 1.0):
            raise ConfigError("target_train_accuracy must lie in (0, 1]")
        if self.max_hidden < 1:
            raise ConfigError("max_hidden must be >= 1")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")
        if self.eval_every < 1:
            raise ConfigError("eval_every must be >= 1")


@dataclass(frozen=True)
class TraceRecord:
    neuron_count: int
    sq_norm: float
    train_accuracy: float
    test_accuracy: float
    elapsed_seconds: float
    sigma_used: float
    retries_used: int


@dataclass
class TrainingTrace:
    records: list
    status: str
    initial_neurons: int = 0

    @property
    def final_neurons(self) -> int:
        return self.records[-1].neuron_count if self.records else self.initial_neurons

    @property
    def added_neurons(self) -> int:
        return self.final_neurons - self.initial_neurons

    @property
    def best_test_accuracy(self) -> float:
        if not self.records:
            return 0.0
        return max(r.test_accuracy for r in self.records)

    @property
    def total_elapsed(self) -> float:
        return self.records[-1].elapsed_seconds if self.records else 0.0


class Network:
    """A grown classifier: hidden units, output weights, category order."""

    def __init__(self, d, lif, hidden, beta, categories, frozen_prefix=0,
                 lineage=None):
        self.d = int(d)
        self.lif = lif
        self.hidden = list(hidden)
        self.beta = np.asarray(beta, dtype=np.float64)
        self.categories = list(categories)
        self.frozen_prefix = int(frozen_prefix)
        self.lineage = list(lineage or [])
        if self.frozen_prefix > len(self.hidden):
            raise ConfigError("frozen_prefix exceeds hidden neuron count")
        if self.beta.shape != (len(self.hidden), len(self.categories)):
            raise ConfigError(
                f"beta shape {self.beta.shape} does not match "
                f"({len(self.hidden)}, {len(self.categories)})"
            )

    @property
    def n_hidden(self) -> int:
        return len(self.hidden)

    @property
    def m(self) -> int:
        return len(self.categories)

    def features(self, ds: LabeledDataset, threads: int = 1) -> np.ndarray:
        """Rate-feature table of this network's hidden units on a dataset."""
        if ds.d != self.d:
            raise ConfigError(f"dataset has {ds.d} channels, network expects {self.d}")
        if not self.hidden:
            return np.zeros((len(ds), 0))
        tensor = ds.spike_tensor()
        if threads <= 1 or len(self.hidden) <= 1:
            cols = [batch_rate_features(tensor, h.w, h.v, self.lif)
                    for h in self.hidden]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                cols = list(pool.map(
                    lambda h: batch_rate_features(tensor, h.w, h.v, self.lif),
                    self.hidden))
        return np.column_stack(cols)

    def predict_dataset(self, ds: LabeledDataset, threads: int = 1) -> np.ndarray:
        """Predicted category index per sample."""
        return predict_batch(self.features(ds, threads), self.beta)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Network)
            and self.d == other.d
            and self.lif == other.lif
            and self.hidden == other.hidden
            and np.array_equal(self.beta, other.beta)
            and self.categories == other.categories
            and self.frozen_prefix == other.frozen_prefix
            and self.lineage == other.lineage
        )


def _check_pair(train: LabeledDataset, test: LabeledDataset) -> None:
    if (train.d, train.T) != (test.d, test.T):
        raise ConfigError("train and test datasets disagree in (d, T)")
    if train.categories != test.categories:
        raise ConfigError("train and test datasets disagree in categories")


def _accuracy(H, beta, label_idx) -> float:
    return float(np.mean(predict_batch(H, beta) == label_idx))


def _fit(H, F):
    if H.shape[1] == 0:
        return np.zeros((0, F.shape[1]))
    return fit_output_weights(H, F)


def _grow(hidden, frozen_prefix, train, test, cfg: GrowthConfig, lif: LifParams,
          lineage, kind: str, threads: int = 1):
    """Shared growth loop; `hidden` is the (possibly empty) inherited prefix."""
    _check_pair(train, test)
    hidden = list(hidden)
    n0 = len(hidden)
    F = encode_targets(train)
    train_labels = train.label_indices()
    test_labels = test.label_indices()
    train_tensor = train.spike_tensor()
    test_tensor = test.spike_tensor()

    def feature_column(neuron, tensor):
        return batch_rate_features(tensor, neuron.w, neuron.v, lif)

    H_train = (np.column_stack([feature_column(h, train_tensor) for h in hidden])
               if hidden else np.zeros((len(train), 0)))
    H_test = (np.column_stack([feature_column(h, test_tensor) for h in hidden])
              if hidden else np.zeros((len(test), 0)))

    beta = _fit(H_train, F)
    res = residual(H_train, beta, F)
    train_acc = _accuracy(H_train, beta, train_labels)
    test_acc = _accuracy(H_test, beta, test_labels)

    best_test = test_acc if n0 > 0 else -1.0
    best_n = n0
    evals_since_best = 0

    rng = np.random.default_rng(cfg.rng_seed)
    records = []
    status = None
    t0 = time.perf_counter()

    if train_acc >= cfg.target_train_accuracy:
        status = STATUS_TARGET
        best_test = max(best_test, test_acc)
        best_n = n0

    step = 0
    while status is None:
        if len(hidden) >= cfg.max_hidden:
            status = STATUS_MAX_HIDDEN
            break
        outcome = grow_one(res.E, train, cfg.pruning, lif, rng, threads)
        if outcome.saturated:
            status = STATUS_SATURATED
            break
        sel = outcome.selection
        neuron = HiddenNeuron(sel.winner.w, sel.winner.v)
        hidden.append(neuron)
        step += 1
        prev_sq = res.sq_norm
        H_train = np.column_stack([H_train, sel.feature])
        H_test = np.column_stack([H_test, feature_column(neuron, test_tensor)])
        beta = _fit(H_train, F)
        res = residual(H_train, beta, F)
        bound = outcome.sigma_used * prev_sq
        if res.sq_norm > bound * (1.0 + _CERT_RTOL) + 1e-30:
            raise InvariantError(
                f"residual contraction violated: {res.sq_norm} > "
                f"{outcome.sigma_used} * {prev_sq}"
            )
        if res.sq_norm >= prev_sq:
            raise InvariantError("squared residual failed to decrease")
        train_acc = _accuracy(H_train, beta, train_labels)

        reached = train_acc >= cfg.target_train_accuracy
        do_eval = reached or (step % cfg.eval_every == 0) \
            or len(hidden) >= cfg.max_hidden
        if do_eval:
            test_acc = _accuracy(H_test, beta, test_labels)
            if test_acc > best_test:
                best_test = test_acc
                best_n = len(hidden)
                evals_since_best = 0
            else:
                evals_since_best += 1
        records.append(TraceRecord(
            neuron_count=len(hidden),
            sq_norm=res.sq_norm,
            train_accuracy=train_acc,
            test_accuracy=test_acc,
            elapsed_seconds=time.perf_counter() - t0,
            sigma_used=outcome.sigma_used,
            retries_used=outcome.rounds_used - 1,
        ))
        if reached:
            status = STATUS_TARGET
        elif evals_since_best >= cfg.patience:
            status = STATUS_PATIENCE

    # Return the best-test-accuracy snapshot: hidden weights are never
    # modified after acceptance, so truncation + refit reproduces it.
    best_n = max(best_n, frozen_prefix)
    best_hidden = hidden[:best_n]
    best_beta = _fit(H_train[:, :best_n], F)
    trace = TrainingTrace(records=records, status=status, initial_neurons=n0)
    entry = {
        "kind": kind,
        "fingerprint": dataset_fingerprint(train),
        "n_hidden_before": n0,
        "n_hidden_after": best_n,
        "status": status,
    }
    net = Network(train.d, lif, best_hidden, best_beta, train.categories,
                  frozen_prefix=frozen_prefix, lineage=lineage + [entry])
    return net, trace


def train_fresh(train: LabeledDataset, test: LabeledDataset,
                cfg: GrowthConfig, threads: int = 1):
    """Grow a classifier from scratch on a dataset pair."""
    net, trace = _grow([], 0, train, test, cfg, cfg.lif, [], "fresh",
                       threads=threads)
    if trace.status == STATUS_SATURATED and not trace.records:
        raise DegenerateDataError(
            "no candidate neuron produced any spikes on this dataset"
        )
    return net, trace


def _check_lineage(seed: Network, enlarged: LabeledDataset) -> None:
    if enlarged.d != seed.d:
        raise LineageError(
            f"seed expects {seed.d} channels, dataset has {enlarged.d}"
        )
    if enlarged.categories[: seed.m] != seed.categories:
        raise LineageError(
            "enlarged dataset categories must extend the seed's as a prefix"
        )


def one_loop_adapt(seed: Network, enlarged: LabeledDataset,
                   threads: int = 1) -> Network:
    """Expand the output layer to the enlarged category set, freezing all
    hidden weights, and refit the output weights only."""
    _check_lineage(seed, enlarged)
    F = encode_targets(enlarged)
    H = seed.features(enlarged, threads)
    beta = _fit(H, F)
    entry = {
        "kind": "one_loop",
        "fingerprint": dataset_fingerprint(enlarged),
        "n_hidden_before": seed.n_hidden,
        "n_hidden_after": seed.n_hidden,
        "status": "OneLoop",
    }
    return Network(seed.d, seed.lif, seed.hidden, beta, enlarged.categories,
                   frozen_prefix=seed.n_hidden, lineage=seed.lineage + [entry])


def train_experienced(seed: Network, enlarged_train: LabeledDataset,
                      enlarged_test: LabeledDataset, cfg: GrowthConfig,
                      threads: int = 1):
    """One-loop adapt a seed, then resume growth on the enlarged data.

    The inherited hidden units stay frozen; only new units and the output
    weights change. LIF constants come from the seed so inherited features
    keep their meaning.
    """
    _check_lineage(seed, enlarged_train)
    adapted = one_loop_adapt(seed, enlarged_train, threads)
    net, trace = _grow(adapted.hidden, adapted.frozen_prefix, enlarged_train,
                       enlarged_test, cfg, seed.lif, adapted.lineage,
                       "experienced", threads=threads)
    for before, after in zip(seed.hidden, net.hidden):
        if before != after:
            raise InvariantError("frozen hidden weights were modified")
    return net, trace


def _pack_section(arr: np.ndarray) -> bytes:
    payload = np.ascontiguousarray(arr, dtype="<f8").tobytes()
    return struct.pack("<Q", len(payload)) + payload \
        + hashlib.sha256(payload).digest()


def network_to_bytes(net: Network) -> bytes:
    header = {
        "format_version": CHECKPOINT_VERSION,
        "d": net.d,
        "lif": {"dt": net.lif.dt, "tau_syn": net.lif.tau_syn,
                "tau_mem": net.lif.tau_mem, "theta": net.lif.theta},
        "n_hidden": net.n_hidden,
        "frozen_prefix": net.frozen_prefix,
        "m": net.m,
        "categories": list(net.categories),
        "lineage": net.lineage,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    W = (np.stack([h.w for h in net.hidden])
         if net.hidden else np.zeros((0, net.d)))
    V = np.array([h.v for h in net.hidden])
    out = [CHECKPOINT_MAGIC, struct.pack("<I", len(header_bytes)), header_bytes]
    for arr in (W, V, net.beta):
        out.append(_pack_section(arr))
    return b"".join(out)


def save_network(net: Network, path: str) -> None:
    atomic_write_bytes(path, network_to_bytes(net))


def network_fingerprint(net: Network) -> str:
    return hashlib.sha256(network_to_bytes(net)).hexdigest()


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.blob):
            raise DataFormatError(
                f"truncated checkpoint: {what} at byte {self.pos}"
            )
        chunk = self.blob[self.pos:self.pos + n]
        self.pos += n
        return chunk


def load_network(path: str) -> Network:
    with open(path, "rb") as fh:
        blob = fh.read()
    r = _Reader(blob)
    if r.take(len(CHECKPOINT_MAGIC), "magic") != CHECKPOINT_MAGIC:
        raise DataFormatError("not a network checkpoint or unsupported version")
    (header_len,) = struct.unpack("<I", r.take(4, "header length"))
    try:
        header = json.loads(r.take(header_len, "header").decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DataFormatError(f"malformed checkpoint header: {exc}") from None
    if header.get("format_version") != CHECKPOINT_VERSION:
        raise DataFormatError(
            f"unsupported checkpoint version {header.get('format_version')!r}"
        )
    n, d, m = header["n_hidden"], header["d"], header["m"]
    arrays = []
    for name, shape in (("weights", (n, d)), ("feedback", (n,)),
                        ("beta", (n, m))):
        (length,) = struct.unpack("<Q", r.take(8, f"{name} length"))
        expected = 8 * int(np.prod(shape, dtype=np.int64))
        if length != expected:
            raise DataFormatError(
                f"{name} section length {length} != expected {expected}"
            )
        payload = r.take(length, name)
        digest = r.take(32, f"{name} checksum")
        if hashlib.sha256(payload).digest() != digest:
            raise ChecksumError(f"{name} section failed its checksum")
        arrays.append(np.frombuffer(payload, dtype="<f8").reshape(shape))
    W, V, beta = arrays
    lif = LifParams(**header["lif"])
    hidden = [HiddenNeuron(W[i], float(V[i])) for i in range(n)]
    return Network(d, lif, hidden, beta, header["categories"],
                   frozen_prefix=header["frozen_prefix"],
                   lineage=header["lineage"])
