"""Gaussian-mixture synthetic tasks: generation, exact posteriors, label
noise, and a Monte-Carlo mutual-information oracle.

Two stock tasks are provided: a binary mixture with components at +-1 and a
32-component mixture whose 4-d latent is pushed to an 8-d ambient space by a
random linear map. Posteriors are computed exactly from the mixture, which
makes I(X;C) = E[log p(c|x)/p(c)] available as ground truth.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DomainError, NoiseImpossible, SingularCovariance
from .numerics import RngState

COVARIANCE_JITTER = 1e-9

_PJNC_MAGIC = b"PJNC"
_PJNC_VERSION = 1


@dataclass(frozen=True)
class GMMSpec:
    """Mixture parameters defining a synthetic classification task.

    ``projection`` maps the latent space to the ambient feature space;
    it is the identity block when the two dimensions coincide.
    """

    means: np.ndarray  # (M, latent_dim)
    covariances: np.ndarray  # (M, latent_dim, latent_dim)
    priors: np.ndarray  # (M,)
    projection: np.ndarray  # (ambient_dim, latent_dim)

    def __post_init__(self):
        object.__setattr__(self, "means", np.asarray(self.means, dtype=np.float64))
        object.__setattr__(self, "covariances", np.asarray(self.covariances, dtype=np.float64))
        object.__setattr__(self, "priors", np.asarray(self.priors, dtype=np.float64))
        object.__setattr__(self, "projection", np.asarray(self.projection, dtype=np.float64))
        if abs(self.priors.sum() - 1.0) > 1e-12:
            raise DomainError(f"priors sum to {self.priors.sum()!r}, not 1")
        # PSD check: Cholesky must succeed for every component
        for i, cov in enumerate(self.covariances):
            try:
                np.linalg.cholesky(cov)
            except np.linalg.LinAlgError as exc:
                raise SingularCovariance(f"component {i} covariance is not PSD") from exc

    @property
    def num_classes(self) -> int:
        return self.means.shape[0]

    @property
    def latent_dim(self) -> int:
        return self.means.shape[1]

    @property
    def ambient_dim(self) -> int:
        return self.projection.shape[0]


@dataclass
class LabeledDataset:
    """Feature rows with (possibly noisy) labels and the pre-noise labels."""

    features: np.ndarray  # (N, d_x)
    labels: np.ndarray  # (N,)
    true_labels: np.ndarray  # (N,)
    noise_prob: float = 0.0

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.true_labels = np.asarray(self.true_labels, dtype=np.int64)
        n = self.features.shape[0]
        if not (self.labels.shape == (n,) and self.true_labels.shape == (n,)):
            raise DomainError("features, labels and true_labels row counts differ")

    def __len__(self) -> int:
        return self.features.shape[0]


def binary_gmm_spec(d_x: int = 5, sigma: float = 1.0) -> GMMSpec:
    """Two isotropic components at +1 and -1 with a fair prior."""
    if d_x < 1:
        raise DomainError("d_x must be >= 1")
    if sigma <= 0:
        raise DomainError("sigma must be positive")
    means = np.stack([-np.ones(d_x), np.ones(d_x)])
    covs = np.stack([sigma**2 * np.eye(d_x)] * 2)
    return GMMSpec(means, covs, np.array([0.5, 0.5]), np.eye(d_x))


def multiclass_gmm_spec(rng: RngState) -> GMMSpec:
    """32 components on a 4-d latent, randomly projected to 8 ambient dims.

    Means have i.i.d. N(0, 9) entries and covariances are A A^T + 0.1 I with
    standard-normal A, so every component is comfortably PSD.
    """
    gen = rng.gen
    m, latent, ambient = 32, 4, 8
    means = 3.0 * gen.standard_normal((m, latent))
    covs = np.empty((m, latent, latent))
    for i in range(m):
        a = gen.standard_normal((latent, latent))
        covs[i] = a @ a.T + 0.1 * np.eye(latent)
    projection = gen.standard_normal((ambient, latent))
    return GMMSpec(means, covs, np.full(m, 1.0 / m), projection)


def sample(spec: GMMSpec, n: int, rng: RngState) -> LabeledDataset:
    """Draw n labeled feature rows from the mixture."""
    if n < 1:
        raise DomainError("n must be >= 1")
    gen = rng.gen
    cum = np.cumsum(spec.priors)
    labels = np.searchsorted(cum, gen.random(n), side="right")
    labels = np.minimum(labels, spec.num_classes - 1).astype(np.int64)
    eps = gen.standard_normal((n, spec.latent_dim))
    chols = np.linalg.cholesky(spec.covariances)  # (M, l, l)
    latent = spec.means[labels] + np.einsum("nij,nj->ni", chols[labels], eps)
    features = latent @ spec.projection.T
    return LabeledDataset(features, labels, labels.copy(), 0.0)


def apply_label_noise(data: LabeledDataset, p: float, rng: RngState) -> LabeledDataset:
    """Resample each label, with probability p, uniformly over the other classes."""
    if not 0.0 <= p <= 1.0:
        raise DomainError("noise probability must lie in [0, 1]")
    m = int(data.labels.max()) + 1 if len(data) else 0
    m = max(m, int(data.true_labels.max()) + 1)
    if m < 2 and p > 0:
        raise NoiseImpossible("cannot permute labels with a single class")
    gen = rng.gen
    flip = gen.random(len(data)) < p
    offsets = gen.integers(1, m, size=len(data)) if m >= 2 else np.zeros(len(data), dtype=np.int64)
    labels = data.labels.copy()
    labels[flip] = (labels[flip] + offsets[flip]) % m
    return LabeledDataset(data.features.copy(), labels, data.true_labels.copy(), p)


def _pushforward_cholesky(spec: GMMSpec):
    """Cholesky factors of the ambient-space component covariances.

    Jitter is added only if the raw pushforward is singular (it always is
    when latent_dim < ambient_dim), keeping the full-rank case exact.
    """
    proj = spec.projection
    means_x = spec.means @ proj.T
    covs_x = np.einsum("ij,mjk,lk->mil", proj, spec.covariances, proj)
    try:
        chols = np.linalg.cholesky(covs_x)
    except np.linalg.LinAlgError:
        try:
            chols = np.linalg.cholesky(covs_x + COVARIANCE_JITTER * np.eye(spec.ambient_dim))
        except np.linalg.LinAlgError as exc:
            raise SingularCovariance("pushforward covariance singular even after jitter") from exc
    return means_x, chols


def log_posterior_matrix(spec: GMMSpec, X: np.ndarray) -> np.ndarray:
    """Log p(c | x) for every row of X, shape (N, M), rows normalized."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    means_x, chols = _pushforward_cholesky(spec)
    n, m = X.shape[0], spec.num_classes
    logp = np.empty((n, m))
    for c in range(m):
        diff = X - means_x[c]
        y = solve_triangular(chols[c], diff.T, lower=True)
        quad = np.sum(y * y, axis=0)
        logdet = 2.0 * np.sum(np.log(np.diag(chols[c])))
        logp[:, c] = np.log(spec.priors[c]) - 0.5 * (quad + logdet)
    # normalize rows (the common (2 pi)^{-d/2} factor cancels)
    mx = logp.max(axis=1, keepdims=True)
    logp -= mx + np.log(np.exp(logp - mx).sum(axis=1, keepdims=True))
    return logp


def posterior_matrix(spec: GMMSpec, X: np.ndarray) -> np.ndarray:
    """p(c | x) for every row of X, shape (N, M)."""
    return np.exp(log_posterior_matrix(spec, X))


def analytic_posterior(spec: GMMSpec, x) -> np.ndarray:
    """Exact class posterior p(c | x) for a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (spec.ambient_dim,):
        raise DomainError(f"x has shape {x.shape}, expected ({spec.ambient_dim},)")
    return posterior_matrix(spec, x[None, :])[0]


def oracle_mi(spec: GMMSpec, n_mc: int = 1_000_000, rng: RngState | None = None):
    """Monte-Carlo I(X;C) = E[log p(c|x) / p(c)] with its standard error."""
    from .miest import MIEstimate  # deferred: miest sits above this module

    if n_mc < 1000:
        raise DomainError("n_mc must be >= 1000")
    rng = rng if rng is not None else RngState(0, ("oracle-mi",))
    data = sample(spec, n_mc, rng)
    logpost = log_posterior_matrix(spec, data.features)
    terms = logpost[np.arange(n_mc), data.labels] - np.log(spec.priors[data.labels])
    value = float(terms.mean())
    stderr = float(terms.std(ddof=1) / np.sqrt(n_mc))
    return MIEstimate(value=value, method="oracle_mc", k=0, n=n_mc, stderr=stderr)


# ---------------------------------------------------------------------------
# dataset serialization: columnar CSV and a little-endian binary format
# ---------------------------------------------------------------------------


def save_csv(data: LabeledDataset, path) -> None:
    d = data.features.shape[1]
    header = ",".join([f"f{i}" for i in range(d)] + ["label", "true_label"])
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row, lab, tru in zip(data.features, data.labels, data.true_labels):
            fh.write(",".join(repr(v) for v in row) + f",{lab},{tru}\n")


def load_csv(path) -> LabeledDataset:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        d = len(header) - 2
        feats, labs, trus = [], [], []
        for line in fh:
            parts = line.strip().split(",")
            feats.append([float(v) for v in parts[:d]])
            labs.append(int(parts[d]))
            trus.append(int(parts[d + 1]))
    return LabeledDataset(np.array(feats, dtype=np.float64), np.array(labs), np.array(trus))


def save_binary(data: LabeledDataset, path) -> None:
    """Write the PJNC format: magic, version, dims, float64 rows, labels."""
    n, d = data.features.shape
    with open(path, "wb") as fh:
        fh.write(_PJNC_MAGIC)
        fh.write(struct.pack("<III", _PJNC_VERSION, n, d))
        fh.write(struct.pack("<d", float(data.noise_prob)))
        fh.write(data.features.astype("<f8").tobytes())
        fh.write(data.labels.astype("<i8").tobytes())
        fh.write(data.true_labels.astype("<i8").tobytes())


def load_binary(path) -> LabeledDataset:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _PJNC_MAGIC:
            raise DomainError(f"bad magic {magic!r}, expected {_PJNC_MAGIC!r}")
        version, n, d = struct.unpack("<III", fh.read(12))
        if version != _PJNC_VERSION:
            raise DomainError(f"unsupported PJNC version {version}")
        (noise_prob,) = struct.unpack("<d", fh.read(8))
        feats = np.frombuffer(fh.read(8 * n * d), dtype="<f8").reshape(n, d)
        labels = np.frombuffer(fh.read(8 * n), dtype="<i8")
        true_labels = np.frombuffer(fh.read(8 * n), dtype="<i8")
    return LabeledDataset(feats.copy(), labels.copy(), true_labels.copy(), noise_prob)
