"""Class-embedding projections: centroids, medians, and the kernel-smoothed
conditional mean, plus the bandwidth machinery they share.

The smoothed projection estimates the conditional mean embedding of a class
in two stages: a kernel-weighted soft-label table (one posterior row per
sample) followed by a soft-label-weighted average of the embeddings. Soft
labels may instead come from an exact posterior when one is available.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DomainError, EmptyClass, EmptySupport
from .numerics import normalize_sphere

EPS_DEN = 1e-12

METRICS = ("l1", "l2", "cos")

# anchor: h(N=256, d_z=2) = 0.6, the sweep's best cell
_SCHEDULE_COEFF = 0.6 * 256.0 ** 0.25


@dataclass(frozen=True)
class KernelConfig:
    """Kernel K(t) = 1 - t^2 on [0, 1], a bandwidth, and a metric name."""

    bandwidth: float = 0.6
    metric: str = "l1"
    kernel: str = "epanechnikov_scaled"

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise DomainError("bandwidth must be positive")
        if self.metric not in METRICS:
            raise DomainError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if self.kernel != "epanechnikov_scaled":
            raise DomainError(f"unknown kernel {self.kernel!r}")


@dataclass(frozen=True)
class ProjectionSpec:
    """Choice of positive/negative class projections for a contrastive loss."""

    positive: str = "centroid"
    negative: str = "identity"
    kernel: KernelConfig | None = None
    renormalize: bool = False

    def __post_init__(self):
        kinds = ("identity", "centroid", "nw_soft", "median")
        for side, kind in (("positive", self.positive), ("negative", self.negative)):
            if kind not in kinds:
                raise DomainError(f"{side} projection must be one of {kinds}, got {kind!r}")
        if ("nw_soft" in (self.positive, self.negative)) and self.kernel is None:
            raise DomainError("nw_soft projections require a kernel config")


@dataclass
class SoftLabelTable:
    """Per-sample class-posterior rows; all-zero rows mark empty support."""

    probs: np.ndarray  # (N, n_classes)
    classes: np.ndarray  # class ids addressed by the columns
    source: str = "nw_estimated"  # nw_estimated | analytic

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        self.classes = np.asarray(self.classes, dtype=np.int64)
        sums = self.probs.sum(axis=1)
        bad = (np.abs(sums - 1.0) > 1e-9) & (sums != 0.0)
        if np.any(bad) or np.any(self.probs < 0) or np.any(self.probs > 1 + 1e-12):
            raise DomainError("soft-label rows must be distributions (or all-zero)")

    @property
    def empty_rows(self) -> np.ndarray:
        return self.probs.sum(axis=1) == 0.0

    def column_of(self, c: int) -> int:
        hits = np.flatnonzero(self.classes == c)
        if hits.size == 0:
            raise EmptyClass(f"class {c} not present in the table")
        return int(hits[0])


def pairwise_distances(A: np.ndarray, B: np.ndarray, metric: str) -> np.ndarray:
    """Distance matrix between row sets under l1, l2 or cosine dissimilarity."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if metric == "l1":
        return cdist(A, B, "cityblock")
    if metric == "l2":
        return cdist(A, B, "euclidean")
    if metric == "cos":
        # 1/2 - 1/2 cos(u, v)
        return 0.5 * cdist(A, B, "cosine")
    raise DomainError(f"unknown metric {metric!r}")


def kernel_matrix(cfg: KernelConfig, D: np.ndarray) -> np.ndarray:
    """K_h(d) = (1/h)(1 - (d/h)^2) inside the support, 0 outside."""
    h = cfg.bandwidth
    t = D / h
    return np.where(D <= h, (1.0 - t * t) / h, 0.0)


def kernel_weight(cfg: KernelConfig, z, zj) -> float:
    """Kernel weight between two embeddings under the configured metric."""
    z = np.asarray(z, dtype=np.float64)[None, :]
    zj = np.asarray(zj, dtype=np.float64)[None, :]
    d = pairwise_distances(z, zj, cfg.metric)[0, 0]
    return float(kernel_matrix(cfg, np.array([[d]]))[0, 0])


def nw_soft_labels(
    queries: np.ndarray,
    ref_embeddings: np.ndarray,
    ref_labels: np.ndarray,
    cfg: KernelConfig,
    exclude_self: bool = False,
    strict: bool = False,
    chunk: int = 512,
) -> SoftLabelTable:
    """Kernel-regression soft labels for each query row.

    Row q, class c is the kernel-weighted fraction of class-c reference
    points near the query. With ``exclude_self`` the q-th reference is
    dropped for the q-th query (valid only when queries are the references).
    Queries with no reference inside the bandwidth get an all-zero row, or
    raise EmptySupport when ``strict``.
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    ref_embeddings = np.atleast_2d(np.asarray(ref_embeddings, dtype=np.float64))
    ref_labels = np.asarray(ref_labels, dtype=np.int64)
    if ref_embeddings.shape[0] == 0:
        raise EmptyClass("reference set is empty")
    if exclude_self and queries.shape[0] != ref_embeddings.shape[0]:
        raise DomainError("exclude_self requires queries to be the reference set")
    classes = np.unique(ref_labels)
    onehot = (ref_labels[:, None] == classes[None, :]).astype(np.float64)
    nq = queries.shape[0]
    sums = np.empty((nq, classes.size))
    totals = np.empty(nq)
    for s0 in range(0, nq, chunk):
        s1 = min(s0 + chunk, nq)
        D = pairwise_distances(queries[s0:s1], ref_embeddings, cfg.metric)
        W = kernel_matrix(cfg, D)
        if exclude_self:
            W[np.arange(s1 - s0), np.arange(s0, s1)] = 0.0
        sums[s0:s1] = W @ onehot
        totals[s0:s1] = W.sum(axis=1)
    empty = totals == 0.0
    if strict and np.any(empty):
        raise EmptySupport(f"{int(empty.sum())} queries have no kernel support")
    probs = np.zeros_like(sums)
    ok = ~empty
    probs[ok] = sums[ok] / totals[ok, None]
    return SoftLabelTable(probs, classes, "nw_estimated")


def fhat(c: int, embeddings: np.ndarray, soft: SoftLabelTable, renormalize: bool = False) -> np.ndarray:
    """Soft-label-weighted mean embedding for class c."""
    Z = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    col = soft.column_of(c)
    w = soft.probs[:, col]
    den = float(w.sum())
    if den <= EPS_DEN:
        raise EmptySupport(f"class {c} soft-label mass {den:.3e} <= {EPS_DEN}")
    out = (w @ Z) / den
    return normalize_sphere(out) if renormalize else out


def centroid(embeddings: np.ndarray, labels: np.ndarray, c: int, renormalize: bool = False) -> np.ndarray:
    """Arithmetic mean of the class-c embeddings in the batch."""
    Z = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    labels = np.asarray(labels)
    members = Z[labels == c]
    if members.shape[0] == 0:
        raise EmptyClass(f"no batch member has class {c}")
    out = members.mean(axis=0)
    return normalize_sphere(out) if renormalize else out


def median_projection(embeddings: np.ndarray, labels: np.ndarray, c: int, renormalize: bool = False) -> np.ndarray:
    """Coordinate-wise median of the class-c embeddings in the batch."""
    Z = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    labels = np.asarray(labels)
    members = Z[labels == c]
    if members.shape[0] == 0:
        raise EmptyClass(f"no batch member has class {c}")
    out = np.median(members, axis=0)
    return normalize_sphere(out) if renormalize else out


def bandwidth_schedule(N: int, d_z: int) -> float:
    """Shrinking bandwidth h = c N^{-1/(d_z+2)} anchored at h(256, 2) = 0.6.

    The exponent keeps ln(N) / (h^{d_z} N) -> 0, the rate the smoothed
    projection needs to converge to the true conditional mean.
    """
    if N < 2:
        raise DomainError("N must be >= 2")
    if d_z < 1:
        raise DomainError("d_z must be >= 1")
    return float(_SCHEDULE_COEFF * N ** (-1.0 / (d_z + 2)))
