"""Leaky integrate-and-fire neuron simulation.

The neuron follows a two-line recurrence with exponential synaptic and
membrane leaks and reset-by-subtraction:

    i(t) = exp(-dt/tau_syn) * i(t-1) + w.x(t) + v*s(t-1)
    u(t) = exp(-dt/tau_mem) * u(t-1) + i(t-1) - s(t-1)
    s(t) = 1 if u(t) >= theta else 0

Note that the membrane update reads the *previous* synaptic current and the
*previous* spike flag. The threshold test is inclusive (u == theta fires).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


@dataclass(frozen=True)
class LifParams:
    """Shared neuron constants. Times in milliseconds, threshold dimensionless."""

    dt: float = 1.0
    tau_syn: float = 5.0
    tau_mem: float = 10.0
    theta: float = 1.0

    def __post_init__(self):
        if self.dt <= 0 or self.tau_syn <= 0 or self.tau_mem <= 0:
            raise ValueError("dt, tau_syn and tau_mem must all be positive")
        if self.theta <= 0:
            raise ValueError("theta must be positive")

    @property
    def syn_decay(self) -> float:
        return math.exp(-self.dt / self.tau_syn)

    @property
    def mem_decay(self) -> float:
        return math.exp(-self.dt / self.tau_mem)


@dataclass(frozen=True)
class NeuronState:
    """Instantaneous state: synaptic current, membrane potential, last spike."""

    i: float = 0.0
    u: float = 0.0
    s_prev: int = 0


class SpikeTrain:
    """A fixed-length binary activity sequence."""

    __slots__ = ("bits",)

    def __init__(self, bits):
        arr = np.asarray(bits, dtype=np.uint8)
        if arr.ndim != 1:
            raise ShapeError("spike train must be one-dimensional")
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise ValueError("spike train values must be 0 or 1")
        arr.setflags(write=False)
        self.bits = arr

    @property
    def T(self) -> int:
        return self.bits.size

    def __len__(self) -> int:
        return self.bits.size

    def __eq__(self, other) -> bool:
        return isinstance(other, SpikeTrain) and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash(self.bits.tobytes())

    def __repr__(self) -> str:
        return f"SpikeTrain({self.bits.tolist()})"


def lif_step(state: NeuronState, drive: float, params: LifParams):
    """Advance the neuron one time step under the given synaptic drive.

    Returns (new_state, spike). The caller is responsible for folding the
    self-feedback term v*s(t-1) into `drive`.
    """
    i_new = params.syn_decay * state.i + drive
    u_new = params.mem_decay * state.u + state.i - state.s_prev
    spike = 1 if u_new >= params.theta else 0
    return NeuronState(i_new, u_new, spike), spike


def simulate_neuron(x, w, v: float, params: LifParams) -> SpikeTrain:
    """Run one hidden neuron over a d-channel input block of length T.

    `x` is a (d, T) array of 0/1 input spikes, `w` the d input weights and
    `v` the self-feedback weight. Starts from the all-zero state.
    """
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"input block must be (d, T), got shape {x.shape}")
    if w.shape != (x.shape[0],):
        raise ShapeError(
            f"weight count {w.shape} does not match channel count {x.shape[0]}"
        )
    T = x.shape[1]
    feedforward = w @ x  # (T,)
    syn, mem, theta = params.syn_decay, params.mem_decay, params.theta
    i = u = 0.0
    s = 0
    out = np.zeros(T, dtype=np.uint8)
    for t in range(T):
        i_new = syn * i + feedforward[t] + v * s
        u_new = mem * u + i - s
        s = 1 if u_new >= theta else 0
        i, u = i_new, u_new
        out[t] = s
    return SpikeTrain(out)


def batch_rate_features(x, w, v: float, params: LifParams) -> np.ndarray:
    """Mean firing rate of one candidate neuron over a batch of samples.

    `x` is an (N, d, T) array of input spikes. Equivalent to running
    `simulate_neuron` per sample and taking each train's firing rate, but
    vectorized over the batch.
    """
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError(f"batch must be (N, d, T), got shape {x.shape}")
    if w.shape != (x.shape[1],):
        raise ShapeError(
            f"weight count {w.shape} does not match channel count {x.shape[1]}"
        )
    N, _, T = x.shape
    if T == 0:
        raise ValueError("cannot compute a firing rate over zero time steps")
    feedforward = np.tensordot(x, w, axes=([1], [0]))  # (N, T)
    syn, mem, theta = params.syn_decay, params.mem_decay, params.theta
    i = np.zeros(N)
    u = np.zeros(N)
    s = np.zeros(N)
    counts = np.zeros(N)
    for t in range(T):
        i_new = syn * i + feedforward[:, t] + v * s
        u_new = mem * u + i - s
        s = (u_new >= theta).astype(np.float64)
        counts += s
        i, u = i_new, u_new
    return counts / T


def rate_feature(s: SpikeTrain) -> float:
    """Mean firing rate (spike count / T) of a train."""
    if s.T == 0:
        raise ValueError("cannot compute a firing rate of an empty train")
    return int(s.bits.sum()) / s.T
