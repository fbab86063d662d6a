"""Mutual-information estimation and numerical bound verification.

``mixed_ksg`` is the k-NN estimator for continuous features with discrete
labels: the joint neighborhood search treats unequal labels as infinitely
far, marginal neighbor counts are taken strictly inside the k-th joint
radius (self included), and exact ties at radius zero fall back to
duplicate counting. The bound evaluators turn held-out batches of a
trained encoder into the variational lower-bound values that the adjusted
losses certify.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import log

import numpy as np
from scipy.spatial import cKDTree

from .errors import DomainError, InsufficientSamples
from .losses import EmbeddingBatch, adjustment_R, selfp, softnce
from .numerics import RngState, digamma
from .projections import KernelConfig, ProjectionSpec

BOUND_METHODS = ("mixed_ksg", "oracle_mc", "bound_prop1", "bound_softnce")


@dataclass
class MIEstimate:
    """A mutual-information value in nats plus estimator metadata."""

    value: float
    method: str
    k: int
    n: int
    stderr: float | None = None

    def __post_init__(self):
        if self.method not in BOUND_METHODS:
            raise DomainError(f"unknown method {self.method!r}")
        if not np.isfinite(self.value):
            raise DomainError("estimate is not finite")
        if self.method == "mixed_ksg" and self.n < self.k + 1:
            raise DomainError("mixed_ksg requires n >= k+1")


def mixed_ksg(samples: np.ndarray, labels: np.ndarray, k: int = 5, clamp: bool = True) -> MIEstimate:
    """k-NN mutual information between continuous rows and discrete labels."""
    X = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    y = np.asarray(labels, dtype=np.int64)
    n = X.shape[0]
    if k < 1:
        raise DomainError("k must be >= 1")
    if n <= k:
        raise InsufficientSamples(f"need more than k={k} samples, got {n}")
    if y.shape != (n,):
        raise DomainError("labels must have one entry per sample row")
    classes, inv, counts = np.unique(y, return_inverse=True, return_counts=True)
    if np.any(counts < 2):
        raise InsufficientSamples("every class needs at least two samples")

    rho = np.empty(n)
    ktilde = np.empty(n)
    for c in range(classes.size):
        idx = np.flatnonzero(inv == c)
        pts = X[idx]
        k_eff = min(k, idx.size - 1)
        tree_c = cKDTree(pts)
        dists, _ = tree_c.query(pts, k_eff + 1, p=np.inf)
        r = dists[:, k_eff]
        rho[idx] = r
        kt = np.full(idx.size, float(k_eff))
        ties = r == 0.0
        if np.any(ties):
            kt[ties] = tree_c.query_ball_point(pts[ties], 0.0, p=np.inf, return_length=True)
        ktilde[idx] = kt

    tree_all = cKDTree(X)
    # strictly-inside count: no float lies between nextafter(rho, 0) and rho
    nx = tree_all.query_ball_point(X, np.nextafter(rho, 0.0), p=np.inf, return_length=True)
    nc = counts[inv].astype(np.float64)
    terms = digamma(ktilde) + log(n) - digamma(nx.astype(np.float64)) - digamma(nc)
    value = float(terms.mean())
    stderr = float(terms.std(ddof=1) / np.sqrt(n))
    if clamp:
        value = max(0.0, value)
    return MIEstimate(value=value, method="mixed_ksg", k=k, n=n, stderr=stderr)


def bound_prop1(
    batches: list[EmbeddingBatch],
    spec: ProjectionSpec,
    positives=None,
    soft=None,
    include_self: bool = False,
    mode: str = "train",
) -> MIEstimate:
    """Adjusted lower bound 1 + log N - loss - R, averaged over eval batches."""
    vals = []
    for batch in batches:
        loss = selfp(batch, spec, positives=positives, soft=soft, include_self=include_self, mode=mode)
        r = adjustment_R(batch, spec, positives=positives, soft=soft, mode=mode)
        vals.append(1.0 + log(len(batch)) - loss.total - r)
    return _bound_estimate(vals, "bound_prop1", batches)


def bound_softnce(batches: list[EmbeddingBatch], kernel: KernelConfig, soft=None, mode: str = "train") -> MIEstimate:
    """Lower bound log N - loss for the smoothed-projection loss (no R term)."""
    vals = [log(len(b)) - softnce(b, kernel, soft=soft, mode=mode).total for b in batches]
    return _bound_estimate(vals, "bound_softnce", batches)


def _bound_estimate(vals, method, batches) -> MIEstimate:
    vals = np.asarray(vals, dtype=np.float64)
    stderr = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else None
    return MIEstimate(
        value=float(vals.mean()),
        method=method,
        k=0,
        n=int(sum(len(b) for b in batches)),
        stderr=stderr,
    )


def softnce_consistency_curve(
    spec,
    Ns,
    rng: RngState,
    trials: int = 20,
    oracle: MIEstimate | None = None,
):
    """Gap between the optimal-critic bound and true I(X;C) per batch size.

    Replaces the learned critic with the exact log-posterior ratio, so the
    measurement isolates the loss functional from optimization error. The
    denominator includes the anchor's own term, matching the loss itself.
    Returns one record per N: bound mean, trial stderr, and the absolute
    gap to the oracle value.
    """
    from . import synthdata

    if oracle is None:
        oracle = synthdata.oracle_mi(spec, 1_000_000, rng.split("oracle"))
    log_priors = np.log(spec.priors)
    records = []
    for N in Ns:
        if N < 2:
            raise DomainError("batch sizes must be >= 2")
        bounds = np.empty(trials)
        for t in range(trials):
            data = synthdata.sample(spec, N, rng.split(f"n{N}", f"trial{t}"))
            logpost = synthdata.log_posterior_matrix(spec, data.features)
            psi = logpost[:, data.labels] - log_priors[data.labels][None, :]
            mx = psi.max(axis=1, keepdims=True)
            lse = mx[:, 0] + np.log(np.exp(psi - mx).sum(axis=1))
            loss = float(np.mean(-np.diag(psi) + lse))
            bounds[t] = log(N) - loss
        records.append(
            {
                "n": int(N),
                "bound": float(bounds.mean()),
                "stderr": float(bounds.std(ddof=1) / np.sqrt(trials)),
                "gap": float(abs(bounds.mean() - oracle.value)),
                "oracle": oracle.value,
            }
        )
    return records
