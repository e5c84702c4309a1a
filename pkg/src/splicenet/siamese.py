"""Shared-weight embedding network trained with a contrastive loss.

One parameter set is applied to both members of a pair, so the two
"branches" are literally the same function; during backpropagation the
gradients from both sides accumulate into the same arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, DataError, TrainingError

HIDDEN = (128, 96)
EMBED_DIM = 64


@dataclass
class EmbeddingNet:
    """MLP ``d_in -> 128 -> 96 -> 64``; ReLU on hidden layers, identity output.

    ``weights[i]`` has shape (fan_in, fan_out) and the forward pass is
    ``x @ W + b``.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def d_in(self) -> int:
        return self.weights[0].shape[0]

    def params(self) -> list[np.ndarray]:
        return [p for wb in zip(self.weights, self.biases) for p in wb]

    @classmethod
    def from_params(cls, params: list[np.ndarray]) -> "EmbeddingNet":
        return cls(list(params[0::2]), list(params[1::2]))

    def copy(self) -> "EmbeddingNet":
        return EmbeddingNet([w.copy() for w in self.weights], [b.copy() for b in self.biases])


@dataclass(frozen=True)
class ContrastiveParams:
    margin: float = 1.0

    def __post_init__(self):
        if not self.margin > 0:
            raise ArgumentError("contrastive margin must be positive")


@dataclass(frozen=True)
class PairSample:
    a: np.ndarray
    b: np.ndarray
    y: int  # 1 = similar (authentic/authentic), 0 = dissimilar (authentic/tampered)


@dataclass(frozen=True)
class Pairs:
    """Index form of a pair list: rows ``a[i]`` and ``b[i]`` of a feature matrix, target ``y[i]``."""

    a: np.ndarray
    b: np.ndarray
    y: np.ndarray

    def __len__(self):
        return len(self.y)

    def samples(self, features: np.ndarray) -> list[PairSample]:
        return [PairSample(features[i], features[j], int(t)) for i, j, t in zip(self.a, self.b, self.y)]


@dataclass
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 64
    max_epochs: int = 200
    patience: int = 10
    min_delta: float = 1e-5
    pairs_per_epoch: int = 2048
    val_pairs: int = 1024
    margin: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.max_epochs < 1 or self.batch_size < 1 or self.pairs_per_epoch < 2:
            raise ArgumentError("max_epochs, batch_size must be >= 1 and pairs_per_epoch >= 2")
        if self.patience < 0 or (self.max_epochs > 1 and self.patience >= self.max_epochs):
            raise ArgumentError("patience must satisfy 0 <= patience < max_epochs")
        if min(self.lr, self.beta1, self.beta2, self.eps, self.margin) <= 0:
            raise ArgumentError("optimiser constants and margin must be positive")


def init_net(d_in: int, seed: int = 0, hidden=HIDDEN, d_out: int = EMBED_DIM) -> EmbeddingNet:
    """He-normal weights, zero biases."""
    if d_in < 1:
        raise ArgumentError("d_in must be >= 1")
    rng = np.random.default_rng(seed)
    dims = [d_in, *hidden, d_out]
    weights = [rng.normal(0.0, math.sqrt(2.0 / fi), (fi, fo)) for fi, fo in zip(dims[:-1], dims[1:])]
    biases = [np.zeros(fo) for fo in dims[1:]]
    return EmbeddingNet(weights, biases)


def _forward(net: EmbeddingNet, x: np.ndarray):
    acts = [x]
    pre = []
    h = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        pre.append(z)
        h = z if i == last else np.maximum(z, 0.0)
        acts.append(h)
    return acts, pre


def embed(net: EmbeddingNet, x: np.ndarray) -> np.ndarray:
    """Embed one vector (d_in,) or a batch (n, d_in)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.d_in:
        raise ArgumentError(f"input has dimension {x.shape[-1]}, network expects {net.d_in}")
    return _forward(net, x)[0][-1]


def pair_distance(ea: np.ndarray, eb: np.ndarray):
    return np.linalg.norm(np.asarray(ea) - np.asarray(eb), axis=-1)


def contrastive_loss(ea, eb, y, params: ContrastiveParams = ContrastiveParams()):
    """``y * D^2 + (1 - y) * max(0, m - D)^2``, elementwise over a batch."""
    d = pair_distance(ea, eb)
    y = np.asarray(y, dtype=np.float64)
    return y * d ** 2 + (1.0 - y) * np.maximum(0.0, params.margin - d) ** 2


def batch_loss(net: EmbeddingNet, xa, xb, y, params: ContrastiveParams = ContrastiveParams()) -> float:
    return float(np.mean(contrastive_loss(embed(net, xa), embed(net, xb), y, params)))


def loss_gradients(net: EmbeddingNet, xa: np.ndarray, xb: np.ndarray, y: np.ndarray,
                   params: ContrastiveParams = ContrastiveParams()):
    """Mean contrastive loss over a batch and its gradient for every parameter.

    Returns ``(loss, grads)`` with ``grads`` ordered like ``net.params()``.
    Both branches run through the same parameters; their gradient
    contributions are summed. At D = 0 a dissimilar pair contributes the
    subgradient 0.
    """
    n = len(y)
    if n == 0:
        raise ArgumentError("empty batch")
    y = np.asarray(y, dtype=np.float64)
    x = np.concatenate([np.asarray(xa, dtype=np.float64), np.asarray(xb, dtype=np.float64)])
    acts, pre = _forward(net, x)
    e = acts[-1]
    diff = e[:n] - e[n:]
    d = np.linalg.norm(diff, axis=1)
    hinge = np.maximum(0.0, params.margin - d)
    loss = float(np.mean(y * d ** 2 + (1.0 - y) * hinge ** 2))
    safe_d = np.where(d > 0.0, d, 1.0)
    coef = 2.0 * y - (1.0 - y) * np.where(d > 0.0, 2.0 * hinge / safe_d, 0.0)
    g = (coef / n)[:, None] * diff
    delta = np.concatenate([g, -g])
    grads = []
    for i in range(len(net.weights) - 1, -1, -1):
        gw = acts[i].T @ delta
        gb = delta.sum(axis=0)
        grads.append(gb)
        grads.append(gw)
        if i > 0:
            delta = (delta @ net.weights[i].T) * (pre[i - 1] > 0.0)
    return loss, grads[::-1]


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState, config: TrainConfig):
    """Bias-corrected Adam; returns new parameter arrays and advances ``state``."""
    if len(params) != len(grads) or any(p.shape != g.shape for p, g in zip(params, grads)):
        raise ArgumentError("parameter and gradient shapes differ")
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
        mhat = state.m[i] / c1
        vhat = state.v[i] / c2
        out.append(p - config.lr * mhat / (np.sqrt(vhat) + config.eps))
    return out, state


def sample_pairs(labels: np.ndarray, n: int, rng: np.random.Generator) -> Pairs:
    """Balanced pairs over patch indices: ``n // 2 + n % 2`` authentic/authentic and
    ``n // 2`` authentic/tampered, shuffled. Tampered/tampered pairs are never drawn.

    ``labels`` holds 0 (authentic) or 1 (tampered) per patch.
    """
    labels = np.asarray(labels)
    auth = np.flatnonzero(labels == 0)
    tamp = np.flatnonzero(labels == 1)
    if len(auth) < 2 or len(tamp) < 1:
        raise DataError(f"need >= 2 authentic and >= 1 tampered patches, got {len(auth)} and {len(tamp)}")
    n_dis = n // 2
    n_sim = n - n_dis
    i = rng.integers(0, len(auth), n_sim)
    j = rng.integers(0, len(auth) - 1, n_sim)
    j = j + (j >= i)
    da = rng.integers(0, len(auth), n_dis)
    db = rng.integers(0, len(tamp), n_dis)
    a = np.concatenate([auth[i], auth[da]])
    b = np.concatenate([auth[j], tamp[db]])
    y = np.concatenate([np.ones(n_sim), np.zeros(n_dis)])
    perm = rng.permutation(n)
    return Pairs(a[perm], b[perm], y[perm])


@dataclass
class TrainResult:
    net: EmbeddingNet
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0


def train(train_features: np.ndarray, train_labels: np.ndarray, val_features: np.ndarray,
          val_labels: np.ndarray, config: TrainConfig, net: EmbeddingNet | None = None) -> TrainResult:
    """Adam on freshly sampled pairs each epoch with early stopping on validation loss.

    The returned network holds the parameters of the best validation epoch.
    """
    rng = np.random.default_rng(config.seed)
    if net is None:
        net = init_net(train_features.shape[1], int(rng.integers(2 ** 31)))
    cparams = ContrastiveParams(config.margin)
    vp = sample_pairs(val_labels, config.val_pairs, np.random.default_rng([config.seed, 1]))
    va, vb = val_features[vp.a], val_features[vp.b]
    params = net.params()
    state = AdamState.zeros_like(params)
    best = math.inf
    best_params = [p.copy() for p in params]
    best_epoch = 0
    wait = 0
    history = []
    for epoch in range(1, config.max_epochs + 1):
        pairs = sample_pairs(train_labels, config.pairs_per_epoch, rng)
        losses = []
        for s in range(0, len(pairs), config.batch_size):
            sl = slice(s, s + config.batch_size)
            cur = EmbeddingNet.from_params(params)
            loss, grads = loss_gradients(cur, train_features[pairs.a[sl]], train_features[pairs.b[sl]],
                                         pairs.y[sl], cparams)
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite training loss at epoch {epoch}")
            losses.append(loss * len(pairs.y[sl]))
            params, state = adam_step(params, grads, state, config)
        train_loss = float(sum(losses) / len(pairs))
        val_loss = batch_loss(EmbeddingNet.from_params(params), va, vb, vp.y, cparams)
        if not math.isfinite(val_loss):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        history.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})
        if val_loss < best - config.min_delta:
            best = val_loss
            best_params = [p.copy() for p in params]
            best_epoch = epoch
            wait = 0
        else:
            wait += 1
            if wait >= config.patience:
                break
    return TrainResult(EmbeddingNet.from_params(best_params), history, best_epoch)


def _canonical_order(emb: np.ndarray) -> np.ndarray:
    return np.lexsort(emb.T[::-1])


def image_score(net: EmbeddingNet, patch_features: np.ndarray, rng: np.random.Generator | None = None,
                max_pairs: int = 2000, percentile: float = 95.0) -> float:
    """95th percentile of intra-image pairwise embedding distances.

    When more than ``max_pairs`` unordered pairs exist a seeded subset is
    used; embeddings are sorted first so the score ignores patch order.
    """
    feats = np.asarray(patch_features, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[0] < 2:
        raise DataError("image scoring needs at least 2 patches")
    emb = embed(net, feats)
    emb = emb[_canonical_order(emb)]
    n = emb.shape[0]
    iu, ju = np.triu_indices(n, 1)
    if len(iu) > max_pairs:
        rng = rng if rng is not None else np.random.default_rng(0)
        pick = np.sort(rng.choice(len(iu), max_pairs, replace=False))
        iu, ju = iu[pick], ju[pick]
    d = np.linalg.norm(emb[iu] - emb[ju], axis=1)
    return float(np.percentile(d, percentile))


def patch_scores(net: EmbeddingNet, patch_features: np.ndarray) -> np.ndarray:
    """Per-patch mean embedding distance to every other patch of the same image."""
    emb = embed(net, np.asarray(patch_features, dtype=np.float64))
    n = emb.shape[0]
    if n < 2:
        return np.zeros(n)
    sq = (emb ** 2).sum(axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * emb @ emb.T, 0.0)
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(d2).sum(axis=1) / (n - 1)


def f1_at(scores: np.ndarray, labels: np.ndarray, tau: float):
    pred = scores >= tau
    tp = int(np.sum(pred & (labels == 1)))
    fp = int(np.sum(pred & (labels == 0)))
    fn = int(np.sum(~pred & (labels == 1)))
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return f1, rec


def calibrate_threshold(scores, labels) -> float:
    """Threshold maximising F1 with tampered (label 1) positive, predicting
    tampered when ``score >= tau``.

    Candidates are the lowest score (everything flagged) and midpoints of
    consecutive distinct sorted scores. Ties go to higher recall, then to
    the lower threshold.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(int)
    if len(scores) != len(labels) or len(np.unique(labels)) < 2:
        raise DataError("threshold calibration needs scores from both classes")
    u = np.unique(scores)
    candidates = np.concatenate([[u[0]], (u[:-1] + u[1:]) / 2.0])
    best_key, best_tau = None, u[0]
    for tau in candidates:
        f1, rec = f1_at(scores, labels, tau)
        key = (f1, rec)
        if best_key is None or key > best_key:
            best_key, best_tau = key, float(tau)
    return best_tau
