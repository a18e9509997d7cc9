"""Hidden-unit recruitment: random candidate pools and certificate-based pruning.

Each growth step samples a pool of random candidate neurons (weights uniform
in [-lambda, lambda]), evaluates each candidate's firing-rate feature over
the training samples, and scores it against the current residual with a
scalar certificate. A non-negative certificate guarantees that appending the
candidate with its optimal per-column output weight shrinks the squared
residual to at most sigma times its previous value; the pool winner is the
certificate maximizer.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dataset import LabeledDataset
from .errors import ConfigError, ShapeError
from .lif import LifParams, batch_rate_features


@dataclass(frozen=True)
class Candidate:
    """One sampled hidden neuron: input weights, self-feedback, draw position."""

    w: np.ndarray
    v: float
    pool_index: int

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        w.setflags(write=False)
        object.__setattr__(self, "w", w)


@dataclass(frozen=True)
class PruningConfig:
    """Knobs of the candidate sampling / pruning loop.

    pool_size: candidates drawn per round.
    weight_scale: half-width of the uniform weight range.
    sigma0: initial contraction target in (0, 1); a round-k retry relaxes it
        to 1 - (1 - sigma0)/2**k.
    sigma_relax_steps: retry rounds after the first (so rounds run
        k = 0..sigma_relax_steps inclusive).
    lambda_growth: multiplicative weight-range escalation per retry round.
    """

    pool_size: int = 50
    weight_scale: float = 1.0
    sigma0: float = 0.999
    sigma_relax_steps: int = 8
    lambda_growth: float = 1.0

    def __post_init__(self):
        if self.pool_size < 1:
            raise ConfigError("pool_size must be >= 1")
        if self.weight_scale <= 0:
            raise ConfigError("weight_scale must be positive")
        if not (0.0 < self.sigma0 < 1.0):
            raise ConfigError("sigma0 must lie strictly in (0, 1)")
        if self.sigma_relax_steps < 0:
            raise ConfigError("sigma_relax_steps must be >= 0")
        if self.lambda_growth < 1.0:
            raise ConfigError("lambda_growth must be >= 1")


@dataclass(frozen=True)
class SelectionResult:
    """A pool winner: its certificate value, feature vector and error gain."""

    winner: Candidate
    xi: float
    feature: np.ndarray  # (N,) rate features on the training samples
    error_gain: float  # guaranteed squared-error reduction


@dataclass(frozen=True)
class GrowOutcome:
    """Result of one growth attempt: a selection, or saturation."""

    selection: Optional[SelectionResult]
    sigma_used: float
    rounds_used: int

    @property
    def saturated(self) -> bool:
        return self.selection is None


def sample_candidates(cfg: PruningConfig, d: int, rng, weight_scale=None):
    """Draw a fresh candidate pool; consumes the rng serially per candidate.

    Draw order (w then v per candidate) makes a larger pool share its
    prefix with a smaller one drawn from the same rng state.
    """
    scale = cfg.weight_scale if weight_scale is None else weight_scale
    pool = []
    for p in range(cfg.pool_size):
        w = rng.uniform(-scale, scale, size=d)
        v = float(rng.uniform(-scale, scale))
        pool.append(Candidate(w, v, p))
    return pool


def candidate_features(
    c: Candidate, ds: LabeledDataset, params: LifParams
) -> np.ndarray:
    """Per-sample firing rate of one candidate over the whole dataset."""
    if c.w.shape != (ds.d,):
        raise ShapeError(
            f"candidate has {c.w.shape[0]} weights, dataset has {ds.d} channels"
        )
    return batch_rate_features(ds.spike_tensor(), c.w, c.v, params)


def pool_features(candidates, ds, params, threads: int = 1):
    """Evaluate a pool's features, optionally fanning out across threads.

    The result order follows the candidate order, so any schedule yields
    the same downstream selection.
    """
    if threads <= 1 or len(candidates) <= 1:
        feats = [candidate_features(c, ds, params) for c in candidates]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            feats = list(pool.map(lambda c: candidate_features(c, ds, params), candidates))
    return list(zip(candidates, feats))


def xi_index(E: np.ndarray, h: np.ndarray, sigma: float) -> float:
    """Convergence certificate of a candidate feature against the residual.

    xi = sum_q [ <E_q, h>^2 / <h, h> - (1 - sigma) <E_q, E_q> ].
    xi >= 0 certifies that appending the candidate with its optimal
    per-column weight leaves ||E_new||^2 <= sigma * ||E||^2.
    """
    E = np.asarray(E, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if E.ndim != 2 or h.shape != (E.shape[0],):
        raise ShapeError(f"residual {E.shape} and feature {h.shape} disagree")
    if not (0.0 < sigma < 1.0):
        raise ConfigError("sigma must lie strictly in (0, 1)")
    hh = float(h @ h)
    if hh == 0.0:
        raise ValueError("silent candidate: feature vector is identically zero")
    proj = E.T @ h  # (m,)
    return float((proj @ proj) / hh - (1.0 - sigma) * np.sum(E * E))


def select_best(pool_with_features, E, sigma) -> Optional[SelectionResult]:
    """Pick the qualifying candidate with the largest certificate.

    Candidates with a zero feature vector or a negative certificate are
    skipped; ties break toward the lowest pool index. Returns None when no
    candidate qualifies.
    """
    if not pool_with_features:
        raise ConfigError("candidate pool must be nonempty")
    best = None
    for c, h in pool_with_features:
        if float(h @ h) == 0.0:
            continue
        xi = xi_index(E, h, sigma)
        if xi < 0.0:
            continue
        if best is None or xi > best[0]:
            best = (xi, c, h)
    if best is None:
        return None
    xi, c, h = best
    gain = xi + (1.0 - sigma) * float(np.sum(np.asarray(E) ** 2))
    return SelectionResult(c, xi, h, gain)


def grow_one(
    E: np.ndarray,
    ds: LabeledDataset,
    cfg: PruningConfig,
    params: LifParams,
    rng,
    threads: int = 1,
) -> GrowOutcome:
    """One full recruitment attempt with sigma relaxation and range growth.

    Round k samples a pool at weight range weight_scale*lambda_growth**k and
    contraction target 1 - (1 - sigma0)/2**k; the first round that yields a
    qualifying candidate wins. After sigma_relax_steps + 1 fruitless rounds
    the attempt saturates.
    """
    sigma = cfg.sigma0
    for k in range(cfg.sigma_relax_steps + 1):
        scale = cfg.weight_scale * cfg.lambda_growth**k
        sigma = 1.0 - (1.0 - cfg.sigma0) / 2.0**k
        pool = sample_candidates(cfg, ds.d, rng, weight_scale=scale)
        selection = select_best(pool_features(pool, ds, params, threads), E, sigma)
        if selection is not None:
            return GrowOutcome(selection, sigma, k + 1)
    return GrowOutcome(None, sigma, cfg.sigma_relax_steps + 1)
