"""Training-time gradient-discrepancy traces.

Trains a network on a sampled point set S while monitoring, after every
epoch, the norm of the mean-gradient difference between S and a fixed
random subset S_J. The report estimates the epoch t0 after which the
sequence is non-increasing, counts residual violations, and bounds the
worst tail contraction ratio.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import Dataset
from .model import (
    FULL,
    SCOPES,
    ArchSpec,
    ModelState,
    _mean_grad,
    init_model,
    mean_grad_embedding,
)
from .numerics import Rng, derive_seed, l2_norm

MONOTONE_TOL = 1e-6


@dataclass(frozen=True)
class ContractionConfig:
    """Trace hyperparameters. minibatch_size 0 means full-batch descent."""

    s_size: int = 1000
    subset_fraction: float = 0.1
    epochs: int = 150
    learning_rate: float = 1e-4
    seed: int = 0
    scope: str = FULL
    hidden_widths: tuple = (64,)
    momentum: float = 0.0
    minibatch_size: int = 0

    def __post_init__(self):
        if self.s_size < 2:
            raise ValueError("s_size must be >= 2")
        if not 0.0 < self.subset_fraction < 1.0:
            raise ValueError("subset_fraction must lie in (0, 1)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate < 0.0:
            # zero is allowed: a frozen-parameter trace is a useful diagnostic
            raise ValueError("learning_rate must be >= 0")
        if self.scope not in SCOPES:
            raise ValueError(f"unknown scope {self.scope!r}")
        if self.minibatch_size < 0:
            raise ValueError("minibatch_size must be >= 0")

    @property
    def subset_size(self) -> int:
        return int(self.subset_fraction * self.s_size)


@dataclass
class ContractionReport:
    """Per-epoch discrepancy norms plus monotonicity diagnostics."""

    df_norms: np.ndarray
    t0_estimate: Optional[int]
    violation_count_after_t0: int
    rho_hat: Optional[float]


def estimate_t0(df_norms, tol: float = MONOTONE_TOL) -> Optional[int]:
    """Smallest t such that df[u+1] <= df[u]*(1+tol) holds for every u >= t.

    Only t <= len-2 qualifies (the condition must cover at least one step),
    so a trace whose final step increases reports no t0.
    """
    df = np.asarray(df_norms, dtype=float)
    n = df.size
    start = n - 1
    u = n - 2
    while u >= 0 and df[u + 1] <= df[u] * (1.0 + tol):
        start = u
        u -= 1
    return start if start <= n - 2 else None


def _count_violations(df: np.ndarray, t0: Optional[int]) -> int:
    lo = 0 if t0 is None else t0
    tail = df[lo:]
    return int(np.sum(tail[1:] > tail[:-1]))


def _rho_hat(df: np.ndarray, t0: Optional[int]) -> Optional[float]:
    if t0 is None:
        return None
    tail = df[t0:]
    if tail.size < 2 or np.any(tail[:-1] <= 0.0):
        return None
    return float(np.max(tail[1:] / tail[:-1]))


def run_contraction_trace(cfg: ContractionConfig, dataset: Dataset,
                          sample_indices=None, subset_indices=None) -> ContractionReport:
    """Train on S for cfg.epochs epochs, recording after each epoch the
    discrepancy ||mean_grad(S) - mean_grad(S_J)|| at the current parameters.

    S and S_J are drawn from cfg.seed; the optional index arguments override
    the draws (S_J need not be a strict subset then, so S_J = S is testable).
    """
    if cfg.s_size > dataset.n_samples:
        raise ValueError("s_size exceeds the dataset")
    if not 1 <= cfg.subset_size < cfg.s_size:
        raise ValueError("subset_fraction yields an empty or full subset")
    rng = Rng(cfg.seed)
    if sample_indices is None:
        sample_indices = rng.derive("sample_s").choice(
            dataset.n_samples, size=cfg.s_size, replace=False)
    s = np.sort(np.asarray(sample_indices, dtype=np.int64))
    if subset_indices is None:
        rows = rng.derive("sample_sj").choice(s.size, size=cfg.subset_size,
                                              replace=False)
        subset_indices = s[rows]
    s_j = np.sort(np.asarray(subset_indices, dtype=np.int64))

    arch = ArchSpec(input_dim=dataset.n_features, n_classes=dataset.n_classes,
                    hidden_widths=tuple(cfg.hidden_widths))
    model = init_model(arch, seed=derive_seed(cfg.seed, "init"))
    params = model.params.copy()
    velocity = np.zeros_like(params)
    x_s, y_s = dataset.features[s], dataset.labels[s]
    shuffle_rng = Rng(cfg.seed, "shuffle")

    df_norms = np.empty(cfg.epochs)
    for epoch in range(cfg.epochs):
        if cfg.minibatch_size == 0:
            grad = _mean_grad(params, arch, x_s, y_s)
            velocity = cfg.momentum * velocity + grad
            params -= cfg.learning_rate * velocity
        else:
            order = shuffle_rng.derive(f"epoch{epoch}").permutation(s.size)
            for lo in range(0, s.size, cfg.minibatch_size):
                rows = order[lo:lo + cfg.minibatch_size]
                grad = _mean_grad(params, arch, x_s[rows], y_s[rows])
                velocity = cfg.momentum * velocity + grad
                params -= cfg.learning_rate * velocity
        if not np.all(np.isfinite(params)):
            raise ArithmeticError(f"training diverged at epoch {epoch}")
        snapshot = ModelState(params=params, arch=arch)
        g_s = mean_grad_embedding(snapshot, dataset, s, scope=cfg.scope).values
        g_sj = mean_grad_embedding(snapshot, dataset, s_j, scope=cfg.scope).values
        df_norms[epoch] = l2_norm(g_s - g_sj)

    t0 = estimate_t0(df_norms)
    return ContractionReport(
        df_norms=df_norms,
        t0_estimate=t0,
        violation_count_after_t0=_count_violations(df_norms, t0),
        rho_hat=_rho_hat(df_norms, t0),
    )


def cumulative_df_bound_check(df_norms, t0: int):
    """Tail-energy comparison: lhs = sum of df[t]^2 for t in [t0, T],
    rhs = (T - t0 + 1) * df[t0]^2. lhs <= rhs on any non-increasing tail."""
    df = np.asarray(df_norms, dtype=float)
    if df.size == 0:
        raise ValueError("df_norms must be nonempty")
    if not 0 <= t0 < df.size:
        raise ValueError("t0 out of range")
    tail = df[int(t0):]
    lhs = float(np.sum(tail ** 2))
    rhs = float(tail.size * tail[0] ** 2)
    return lhs, rhs
