"""The contrastive loss family with exact analytic gradients.

Every loss shares one skeleton: an alignment term pulling each anchor toward
a positive projection of its class, a log-sum-exp uniformity term pushing it
from negative projections, and (for the adjusted variants) a leave-one-out
ratio term computed on independent pairs. Projections are per-sample tables
built from the batch, and gradients flow through them: the per-anchor
leave-one-out class mean, the coordinate-wise class median (subgradient to
the selected order statistics), and the kernel-smoothed conditional mean.

Index conventions, fixed once here: positive sets exclude the anchor itself;
denominators exclude the anchor when the negative projection is a per-sample
embedding and range over the whole batch when it is a class-level
projection; both ratio-term sums always exclude the anchor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    ConfigError,
    DimensionError,
    DomainError,
    EmptySupport,
    MissingPositive,
)
from .projections import (
    EPS_DEN,
    KernelConfig,
    ProjectionSpec,
    SoftLabelTable,
    kernel_matrix,
    pairwise_distances,
)

LOSS_SELECTORS = (
    "infonce",
    "supcon",
    "projnce",
    "softnce",
    "softsupcon",
    "mednce",
    "medsupcon",
)


@dataclass
class EmbeddingBatch:
    """Unit-sphere embeddings with labels and a softmax temperature."""

    embeddings: np.ndarray  # (N, d_z)
    labels: np.ndarray  # (N,)
    temperature: float = 0.07

    def __post_init__(self):
        self.embeddings = np.asarray(self.embeddings, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n = self.embeddings.shape[0]
        if n < 2:
            raise DomainError("a batch needs at least two samples")
        if self.labels.shape != (n,):
            raise DimensionError("labels length must match embedding rows")
        if self.temperature <= 0:
            raise DomainError("temperature must be positive")
        norms = np.linalg.norm(self.embeddings, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-10):
            raise DomainError("embeddings must lie on the unit sphere (1e-10)")

    def __len__(self) -> int:
        return self.embeddings.shape[0]


@dataclass
class LossBreakdown:
    """Loss value, its components, and the gradient w.r.t. the embeddings.

    total = alignment + uniformity + beta * adjustment holds exactly;
    losses without a ratio term carry adjustment = 0.
    """

    total: float
    alignment: float
    uniformity: float
    adjustment: float
    beta: float
    dLoss_dZ: np.ndarray
    fallbacks: int = 0


def critic(u, v, temperature: float) -> float:
    """Similarity score: inner product over temperature."""
    if temperature <= 0:
        raise DomainError("temperature must be positive")
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionError("critic operands must have equal shapes")
    return float(np.dot(u, v) / temperature)


# ---------------------------------------------------------------------------
# differentiable projection tables
# ---------------------------------------------------------------------------


@dataclass
class _Table:
    values: np.ndarray  # (N, d) per-sample projection
    vjp: Callable[[np.ndarray, np.ndarray], None]  # (dT, dZ-accumulator)
    active: np.ndarray | None = None  # anchors usable as positives
    fallbacks: int = 0


def _identity_neg_table(Z: np.ndarray) -> _Table:
    def vjp(dT, dZ):
        dZ += dT

    return _Table(Z, vjp)


def _identity_pos_table(Z: np.ndarray, positives: np.ndarray, mode: str) -> _Table:
    n = Z.shape[0]
    positives = np.asarray(positives, dtype=np.int64)
    if positives.shape != (n,):
        raise DimensionError("positives map must have one entry per anchor")
    if np.any(positives == np.arange(n)):
        raise DomainError("an anchor cannot be its own positive")
    active = positives >= 0
    if mode == "strict" and not np.all(active):
        raise MissingPositive(f"{int((~active).sum())} anchors have no positive partner")
    safe = np.where(active, positives, 0)
    values = np.where(active[:, None], Z[safe], 0.0)

    def vjp(dT, dZ):
        np.add.at(dZ, safe[active], dT[active])

    return _Table(values, vjp, active=active)


def _loo_centroid_table(Z: np.ndarray, labels: np.ndarray, mode: str, positive_side: bool) -> _Table:
    """Per-sample mean of the other same-class embeddings.

    Samples whose class has no other member fall back to their own embedding
    (harmless in the ratio term, masked out as anchors in the main term).
    """
    _, inv, counts = np.unique(labels, return_inverse=True, return_counts=True)
    m = counts[inv].astype(np.float64)  # class size per sample
    sums = np.zeros((counts.size, Z.shape[1]))
    np.add.at(sums, inv, Z)
    multi = m > 1
    values = np.where(multi[:, None], (sums[inv] - Z) / np.maximum(m - 1.0, 1.0)[:, None], Z)
    if positive_side and mode == "strict" and not np.all(multi):
        raise MissingPositive(f"{int((~multi).sum())} anchors have an empty positive set")

    def vjp(dT, dZ):
        gsum = np.zeros_like(sums)
        np.add.at(gsum, inv[multi], dT[multi])
        dZ[multi] += (gsum[inv][multi] - dT[multi]) / (m[multi] - 1.0)[:, None]
        dZ[~multi] += dT[~multi]

    return _Table(values, vjp, active=multi if positive_side else None)


def _median_table(Z: np.ndarray, labels: np.ndarray) -> _Table:
    """Coordinate-wise median over all same-class embeddings."""
    classes, inv = np.unique(labels, return_inverse=True)
    n, d = Z.shape
    meds = np.empty((classes.size, d))
    orders = []
    member_lists = []
    for c in range(classes.size):
        idx = np.flatnonzero(inv == c)
        member_lists.append(idx)
        pts = Z[idx]
        orders.append(np.argsort(pts, axis=0, kind="stable"))
        meds[c] = np.median(pts, axis=0)
    values = meds[inv]

    def vjp(dT, dZ):
        douts = np.zeros_like(meds)
        np.add.at(douts, inv, dT)
        for c, idx in enumerate(member_lists):
            m = idx.size
            order = orders[c]
            if m % 2 == 1:
                mid = order[(m - 1) // 2]  # (d,) selected member per coordinate
                for t in range(d):
                    dZ[idx[mid[t]], t] += douts[c, t]
            else:
                lo, hi = order[m // 2 - 1], order[m // 2]
                for t in range(d):
                    dZ[idx[lo[t]], t] += 0.5 * douts[c, t]
                    dZ[idx[hi[t]], t] += 0.5 * douts[c, t]

    return _Table(values, vjp)


def _nw_distance_vjp(Z: np.ndarray, metric: str, D: np.ndarray, dD: np.ndarray, dZ: np.ndarray) -> None:
    """Accumulate the pullback of a distance-matrix gradient onto the rows."""
    if metric == "l1":
        sgn = np.sign(Z[:, None, :] - Z[None, :, :])  # (N, N, d)
        dZ += np.einsum("jl,jlt->jt", dD, sgn)
        dZ -= np.einsum("jl,jlt->lt", dD, sgn)
    elif metric == "l2":
        diff = Z[:, None, :] - Z[None, :, :]
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(D[:, :, None] > 0, diff / np.where(D == 0, 1.0, D)[:, :, None], 0.0)
        dZ += np.einsum("jl,jlt->jt", dD, unit)
        dZ -= np.einsum("jl,jlt->lt", dD, unit)
    elif metric == "cos":
        norms = np.linalg.norm(Z, axis=1)
        cos = (Z @ Z.T) / np.outer(norms, norms)
        m1 = dD / norms[None, :]
        rs = (dD * cos).sum(axis=1)
        dZ += -0.5 * ((m1 @ Z) / norms[:, None] - (rs / norms**2)[:, None] * Z)
        m2 = dD / norms[:, None]
        cs = (dD * cos).sum(axis=0)
        dZ += -0.5 * ((m2.T @ Z) / norms[:, None] - (cs / norms**2)[:, None] * Z)
    else:
        raise DomainError(f"unknown metric {metric!r}")


def _fhat_table(
    Z: np.ndarray,
    labels: np.ndarray,
    kernel: KernelConfig,
    soft: SoftLabelTable | None,
    mode: str,
) -> _Table:
    """Per-sample smoothed conditional-mean projection of the sample's class.

    With ``soft`` given, its rows are treated as constants and only the
    weighted-mean stage is differentiated; otherwise the soft labels come
    from leave-one-out kernel regression on the batch and the gradient
    additionally flows through every pairwise distance. Classes whose
    soft-label mass vanishes fall back to their plain within-batch centroid
    (an error in strict mode).
    """
    classes, inv = np.unique(labels, return_inverse=True)
    n, d = Z.shape
    nc = classes.size
    analytic = soft is not None

    if analytic:
        cols = [soft.column_of(int(c)) for c in classes]
        nw = soft.probs[:, cols].astype(np.float64)
        cache = None
    else:
        D = pairwise_distances(Z, Z, kernel.metric)
        W = kernel_matrix(kernel, D)
        np.fill_diagonal(W, 0.0)  # leave-one-out within the batch
        onehot = np.zeros((n, nc))
        onehot[np.arange(n), inv] = 1.0
        S = W @ onehot
        T = W.sum(axis=1)
        ok_row = T > 0.0
        nw = np.zeros((n, nc))
        nw[ok_row] = S[ok_row] / T[ok_row, None]
        cache = (D, W, S, T, ok_row)

    den = nw.sum(axis=0)
    ok_cls = den > EPS_DEN
    empty_rows = int(np.sum(~cache[4])) if cache is not None else 0
    fallback_classes = int(np.sum(~ok_cls))
    if mode == "strict" and (fallback_classes or empty_rows):
        raise EmptySupport(
            f"{empty_rows} empty soft-label rows, {fallback_classes} classes without mass"
        )
    F = np.zeros((nc, d))
    if np.any(ok_cls):
        F[ok_cls] = (nw[:, ok_cls].T @ Z) / den[ok_cls, None]
    counts = np.bincount(inv, minlength=nc).astype(np.float64)
    csums = np.zeros((nc, d))
    np.add.at(csums, inv, Z)
    F[~ok_cls] = csums[~ok_cls] / counts[~ok_cls, None]  # centroid fallback
    values = F[inv]

    def vjp(dT, dZ):
        dF = np.zeros((nc, d))
        np.add.at(dF, inv, dT)
        # fallback classes: plain centroid pullback
        for c in np.flatnonzero(~ok_cls):
            dZ[inv == c] += dF[c] / counts[c]
        dnum = np.zeros((nc, d))
        dnum[ok_cls] = dF[ok_cls] / den[ok_cls, None]
        dden = np.zeros(nc)
        dden[ok_cls] = -(F[ok_cls] * dF[ok_cls]).sum(axis=1) / den[ok_cls]
        dZ += nw @ dnum  # direct embedding appearance in the numerators
        if analytic:
            return
        dNW = Z @ dnum.T + dden[None, :]  # (n, nc)
        D, W, S, T, ok_row = cache
        dS = np.zeros_like(S)
        dS[ok_row] = dNW[ok_row] / T[ok_row, None]
        dT_row = np.zeros(n)
        dT_row[ok_row] = -(dNW[ok_row] * nw[ok_row]).sum(axis=1) / T[ok_row]
        dW = dS[:, inv] + dT_row[:, None]
        np.fill_diagonal(dW, 0.0)
        h = kernel.bandwidth
        dD = np.where(D <= h, dW * (-2.0 * D / h**3), 0.0)
        _nw_distance_vjp(Z, kernel.metric, D, dD, dZ)

    return _Table(values, vjp, fallbacks=empty_rows + fallback_classes)


def _renormalized(table: _Table) -> _Table:
    """Wrap a table so its rows are projected back onto the unit sphere."""
    norms = np.linalg.norm(table.values, axis=1)
    if np.any(norms <= 1e-12):
        raise EmptySupport("cannot renormalize a near-zero projection")
    unit = table.values / norms[:, None]
    inner_vjp = table.vjp

    def vjp(dT, dZ):
        radial = (dT * unit).sum(axis=1, keepdims=True)
        inner_vjp((dT - radial * unit) / norms[:, None], dZ)

    return _Table(unit, vjp, active=table.active, fallbacks=table.fallbacks)


def _build_table(
    kind: str,
    side: str,
    Z: np.ndarray,
    labels: np.ndarray,
    spec: ProjectionSpec,
    positives,
    soft,
    mode: str,
) -> _Table:
    if kind == "identity":
        if side == "positive":
            if positives is None:
                raise MissingPositive("identity positives need an anchor->positive map")
            return _identity_pos_table(Z, positives, mode)
        return _identity_neg_table(Z)
    if kind == "centroid":
        table = _loo_centroid_table(Z, labels, mode, positive_side=(side == "positive"))
    elif kind == "median":
        table = _median_table(Z, labels)
    elif kind == "nw_soft":
        table = _fhat_table(Z, labels, spec.kernel, soft, mode)
    else:
        raise ConfigError(f"unknown projection kind {kind!r}")
    return _renormalized(table) if spec.renormalize else table


# ---------------------------------------------------------------------------
# loss assembly
# ---------------------------------------------------------------------------


def _nce_terms(Z, tau, P, G, include_self, active):
    """Alignment + log-sum-exp terms averaged over active anchors.

    Returns the component values and the raw gradients w.r.t. Z, the
    positive table and the negative table.
    """
    n = Z.shape[0]
    A = (Z @ G.T) / tau
    if not include_self:
        np.fill_diagonal(A, -np.inf)
    align_i = -(Z * P).sum(axis=1) / tau
    mx = A.max(axis=1)
    lse = mx + np.log(np.exp(A - mx[:, None]).sum(axis=1))
    na = int(active.sum())
    if na == 0:
        raise MissingPositive("no anchor in the batch has a positive")
    alignment = float(align_i[active].mean())
    uniformity = float(lse[active].mean())
    sigma = np.exp(A - lse[:, None])
    sigma[~active] = 0.0
    scale = 1.0 / (na * tau)
    dZ = (sigma @ G) * scale
    dZ[active] -= P[active] * scale
    dZ[~active] = 0.0
    dP = np.zeros_like(P)
    dP[active] = -Z[active] * scale
    dG = (sigma.T @ Z) * scale
    return alignment, uniformity, dZ, dP, dG


def _adjustment_terms(Z, tau, P, G):
    """Leave-one-out similarity-mass ratio averaged over anchors."""
    n = Z.shape[0]
    Ap = (Z @ P.T) / tau
    Am = (Z @ G.T) / tau
    np.fill_diagonal(Ap, -np.inf)
    np.fill_diagonal(Am, -np.inf)
    mp = Ap.max(axis=1)
    lse_p = mp + np.log(np.exp(Ap - mp[:, None]).sum(axis=1))
    mm = Am.max(axis=1)
    lse_m = mm + np.log(np.exp(Am - mm[:, None]).sum(axis=1))
    r = np.exp(lse_p - lse_m)
    value = float(r.mean())
    sig_p = np.exp(Ap - lse_p[:, None])
    sig_m = np.exp(Am - lse_m[:, None])
    w = r / n
    dAp = w[:, None] * sig_p
    dAm = -w[:, None] * sig_m
    dZ = (dAp @ P + dAm @ G) / tau
    dP = (dAp.T @ Z) / tau
    dG = (dAm.T @ Z) / tau
    return value, dZ, dP, dG


def _breakdown(alignment, uniformity, adjustment, beta, dZ, fallbacks=0):
    total = alignment + uniformity + beta * adjustment
    return LossBreakdown(total, alignment, uniformity, adjustment, beta, dZ, fallbacks)


def infonce_self(batch: EmbeddingBatch, positives, mode: str = "strict") -> LossBreakdown:
    """Single-positive contrastive loss; denominators exclude the anchor."""
    Z, tau = batch.embeddings, batch.temperature
    table = _identity_pos_table(Z, positives, mode)
    align, unif, dZ, dP, dG = _nce_terms(Z, tau, table.values, Z, False, table.active)
    out = np.zeros_like(Z)
    out += dZ
    table.vjp(dP, out)
    out += dG  # identity negatives
    return _breakdown(align, unif, 0.0, 0.0, out)


def supcon(batch: EmbeddingBatch, mode: str = "strict") -> LossBreakdown:
    """Supervised contrastive loss, averaged per anchor over its positive set.

    Positive sets exclude the anchor; anchors with no positive raise in
    strict mode and are skipped (with the mean renormalized) in train mode.
    """
    Z, labels, tau = batch.embeddings, batch.labels, batch.temperature
    n = len(batch)
    A = (Z @ Z.T) / tau
    pos = (labels[:, None] == labels[None, :]) & ~np.eye(n, dtype=bool)
    cnt = pos.sum(axis=1)
    active = cnt > 0
    if mode == "strict" and not np.all(active):
        raise MissingPositive(f"{int((~active).sum())} anchors have an empty positive set")
    na = int(active.sum())
    if na == 0:
        raise MissingPositive("no anchor in the batch has a positive")
    Aneg = A.copy()
    np.fill_diagonal(Aneg, -np.inf)
    mx = Aneg.max(axis=1)
    lse = mx + np.log(np.exp(Aneg - mx[:, None]).sum(axis=1))
    wpos = np.zeros((n, n))
    wpos[active] = pos[active] / cnt[active, None]
    align_i = -(wpos * A).sum(axis=1)
    alignment = float(align_i[active].mean())
    uniformity = float(lse[active].mean())
    sigma = np.exp(Aneg - lse[:, None])
    sigma[~active] = 0.0
    S = sigma - wpos
    dZ = (S @ Z + S.T @ Z) / (na * tau)
    return _breakdown(alignment, uniformity, 0.0, 0.0, dZ)


def selfp(
    batch: EmbeddingBatch,
    spec: ProjectionSpec,
    positives=None,
    soft: SoftLabelTable | None = None,
    include_self: bool = False,
    mode: str = "strict",
) -> LossBreakdown:
    """Projection-based contrastive loss for an arbitrary projection pair.

    ``include_self`` keeps the anchor's own term in the denominator, the
    convention used when the negative projection is class-level.
    """
    Z, labels, tau = batch.embeddings, batch.labels, batch.temperature
    ptab = _build_table(spec.positive, "positive", Z, labels, spec, positives, soft, mode)
    ntab = _build_table(spec.negative, "negative", Z, labels, spec, positives, soft, mode)
    active = ptab.active if ptab.active is not None else np.ones(len(batch), dtype=bool)
    align, unif, dZ, dP, dG = _nce_terms(Z, tau, ptab.values, ntab.values, include_self, active)
    out = np.zeros_like(Z)
    out += dZ
    ptab.vjp(dP, out)
    ntab.vjp(dG, out)
    return _breakdown(align, unif, 0.0, 0.0, out, ptab.fallbacks + ntab.fallbacks)


def adjustment_R(
    batch: EmbeddingBatch,
    spec: ProjectionSpec,
    positives=None,
    soft: SoftLabelTable | None = None,
    mode: str = "strict",
) -> float:
    """Leave-one-out estimate of the positive/negative similarity-mass ratio.

    Identity positives contribute the sample's own embedding here, which is
    what makes equal projection pairs give exactly 1.
    """
    Z, labels, tau = batch.embeddings, batch.labels, batch.temperature
    if spec.positive == "identity":
        ptab = _identity_neg_table(Z)
    else:
        ptab = _build_table(spec.positive, "positive", Z, labels, spec, positives, soft, mode)
    ntab = _build_table(spec.negative, "negative", Z, labels, spec, positives, soft, mode)
    value, _, _, _ = _adjustment_terms(Z, tau, ptab.values, ntab.values)
    return value


def projnce(
    batch: EmbeddingBatch,
    spec: ProjectionSpec | None = None,
    beta: float = 1.0,
    positives=None,
    soft: SoftLabelTable | None = None,
    include_self: bool = False,
    mode: str = "strict",
) -> LossBreakdown:
    """Projection loss plus the beta-weighted ratio adjustment.

    The default projection pair (leave-one-out centroid positives, identity
    negatives) is the supervised-contrastive instantiation.
    """
    spec = spec if spec is not None else ProjectionSpec("centroid", "identity")
    Z, labels, tau = batch.embeddings, batch.labels, batch.temperature
    if spec.positive == "identity":
        pa = _build_table("identity", "positive", Z, labels, spec, positives, soft, mode)
        pr = _identity_neg_table(Z)
        shared_pos = False
    else:
        pa = _build_table(spec.positive, "positive", Z, labels, spec, positives, soft, mode)
        pr = pa
        shared_pos = True
    ntab = _build_table(spec.negative, "negative", Z, labels, spec, positives, soft, mode)
    active = pa.active if pa.active is not None else np.ones(len(batch), dtype=bool)
    align, unif, dZ_m, dP_m, dG_m = _nce_terms(Z, tau, pa.values, ntab.values, include_self, active)
    rval, dZ_r, dP_r, dG_r = _adjustment_terms(Z, tau, pr.values, ntab.values)
    out = np.zeros_like(Z)
    out += dZ_m + beta * dZ_r
    if shared_pos:
        pa.vjp(dP_m + beta * dP_r, out)
    else:
        pa.vjp(dP_m, out)
        pr.vjp(beta * dP_r, out)
    ntab.vjp(dG_m + beta * dG_r, out)
    return _breakdown(align, unif, rval, beta, out, pa.fallbacks + ntab.fallbacks)


def softnce(
    batch: EmbeddingBatch,
    kernel: KernelConfig,
    soft: SoftLabelTable | None = None,
    mode: str = "strict",
) -> LossBreakdown:
    """Both projections are the smoothed conditional mean; no ratio term.

    The denominator runs over the whole batch including the anchor's own
    class projection.
    """
    spec = ProjectionSpec("nw_soft", "nw_soft", kernel=kernel)
    Z, labels, tau = batch.embeddings, batch.labels, batch.temperature
    table = _fhat_table(Z, labels, kernel, soft, mode)
    active = np.ones(len(batch), dtype=bool)
    align, unif, dZ, dP, dG = _nce_terms(Z, tau, table.values, table.values, True, active)
    out = np.zeros_like(Z)
    out += dZ
    table.vjp(dP + dG, out)
    return _breakdown(align, unif, 0.0, 0.0, out, table.fallbacks)


def softsupcon(
    batch: EmbeddingBatch,
    kernel: KernelConfig,
    soft: SoftLabelTable | None = None,
    beta: float = 1.0,
    mode: str = "strict",
) -> LossBreakdown:
    """Smoothed-mean positives against per-sample negatives, with adjustment."""
    spec = ProjectionSpec("nw_soft", "identity", kernel=kernel)
    return projnce(batch, spec, beta=beta, soft=soft, mode=mode)


def mednce(batch: EmbeddingBatch, mode: str = "strict") -> LossBreakdown:
    """Median projections on both sides; class-level, so the denominator
    includes the anchor's own class term and there is no ratio adjustment."""
    spec = ProjectionSpec("median", "median")
    return selfp(batch, spec, include_self=True, mode=mode)


def medsupcon(batch: EmbeddingBatch, beta: float = 1.0, mode: str = "strict") -> LossBreakdown:
    """Median positives against per-sample negatives, with adjustment."""
    spec = ProjectionSpec("median", "identity")
    return projnce(batch, spec, beta=beta, mode=mode)


def evaluate_loss(
    selector: str,
    batch: EmbeddingBatch,
    kernel: KernelConfig | None = None,
    beta: float = 1.0,
    positives=None,
    soft: SoftLabelTable | None = None,
    mode: str = "strict",
) -> LossBreakdown:
    """Dispatch a loss by its selector string."""
    if selector == "infonce":
        return infonce_self(batch, positives, mode=mode)
    if selector == "supcon":
        return supcon(batch, mode=mode)
    if selector == "projnce":
        return projnce(batch, beta=beta, mode=mode)
    if selector == "softnce":
        return softnce(batch, _require_kernel(kernel), soft=soft, mode=mode)
    if selector == "softsupcon":
        return softsupcon(batch, _require_kernel(kernel), soft=soft, beta=beta, mode=mode)
    if selector == "mednce":
        return mednce(batch, mode=mode)
    if selector == "medsupcon":
        return medsupcon(batch, beta=beta, mode=mode)
    raise ConfigError(f"unknown loss selector {selector!r}; known: {LOSS_SELECTORS}")


def loss_gradient(selector: str, batch: EmbeddingBatch, **options) -> np.ndarray:
    """Exact gradient of the selected loss w.r.t. the batch embeddings."""
    return evaluate_loss(selector, batch, **options).dLoss_dZ


def _require_kernel(kernel: KernelConfig | None) -> KernelConfig:
    if kernel is None:
        raise ConfigError("this loss needs a kernel config")
    return kernel


def sample_positives(labels: np.ndarray, rng, mode: str = "strict") -> np.ndarray:
    """Draw one same-class positive per anchor; -1 marks anchors without one."""
    labels = np.asarray(labels)
    n = labels.shape[0]
    out = np.full(n, -1, dtype=np.int64)
    gen = rng.gen if hasattr(rng, "gen") else rng
    for i in range(n):
        pool = np.flatnonzero((labels == labels[i]) & (np.arange(n) != i))
        if pool.size:
            out[i] = pool[gen.integers(pool.size)]
        elif mode == "strict":
            raise MissingPositive(f"anchor {i} has no same-class partner")
    return out
