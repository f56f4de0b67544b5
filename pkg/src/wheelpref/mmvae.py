"""Multi-modal VAE: image encoder to a 10-dim latent, mirrored decoder, and
a parallel regressor that predicts the 4 PC labels from the same latent.

Training minimizes alpha1 * (BCE + KL) + alpha2 * MSE, reported per term.
The decoder and regressor consume the sampled z; every downstream consumer
of a trained model reads mu only, so inference is deterministic.
"""

import csv
import hashlib
from dataclasses import dataclass

import numpy as np

from . import nn_core as nn
from .cluster import ParameterError, kmeans

LATENT_DIM = 10
SIGMA_FLOOR = 1e-6
DEFAULT_CHANNELS = (16, 32, 64)
LOG_FIELDS = ["epoch", "train_total", "train_bce", "train_kl", "train_mse", "val_total"]


class TrainingError(RuntimeError):
    """Training diverged; carries the last good parameter snapshot."""

    def __init__(self, message, checkpoint):
        super().__init__(message)
        self.checkpoint = checkpoint


@dataclass(frozen=True)
class LatentCode:
    mu: np.ndarray
    sigma: np.ndarray


@dataclass(frozen=True)
class VaeTrainConfig:
    alpha1: float = 1.0
    alpha2: float = 10.0
    epochs: int = 200
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0
    patience: int = 20
    channels: tuple = DEFAULT_CHANNELS
    latent_dim: int = LATENT_DIM


class MultiModalVae:
    def __init__(self, resolution=64, channels=DEFAULT_CHANNELS, latent_dim=LATENT_DIM, seed=0):
        if resolution % 8 != 0 or resolution < 8:
            raise ParameterError(f"resolution {resolution} not a positive multiple of 8")
        rng = np.random.default_rng(seed)
        c1, c2, c3 = channels
        side = resolution // 8
        self.resolution = resolution
        self.channels = (c1, c2, c3)
        self.latent_dim = latent_dim
        self._side = side
        self._flat = c3 * side * side
        self.enc1 = nn.Conv2d(1, c1, rng)
        self.enc2 = nn.Conv2d(c1, c2, rng)
        self.enc3 = nn.Conv2d(c2, c3, rng)
        self.mu_head = nn.Dense(self._flat, latent_dim, rng)
        self.logvar_head = nn.Dense(self._flat, latent_dim, rng)
        self.dec_fc = nn.Dense(latent_dim, self._flat, rng)
        self.dec1 = nn.ConvTranspose2d(c3, c2, rng)
        self.dec2 = nn.ConvTranspose2d(c2, c1, rng)
        self.dec3 = nn.ConvTranspose2d(c1, 1, rng)
        self.reg1 = nn.Dense(latent_dim, 32, rng)
        self.reg2 = nn.Dense(32, 4, rng)

    def _layers(self):
        return [("enc1", self.enc1), ("enc2", self.enc2), ("enc3", self.enc3),
                ("mu_head", self.mu_head), ("logvar_head", self.logvar_head),
                ("dec_fc", self.dec_fc), ("dec1", self.dec1), ("dec2", self.dec2),
                ("dec3", self.dec3), ("reg1", self.reg1), ("reg2", self.reg2)]

    def params(self):
        out = {}
        for prefix, layer in self._layers():
            out.update(layer.params(prefix))
        return out

    def encoder_params(self):
        out = {}
        for prefix, layer in self._layers()[:4]:  # convs + mu head
            out.update(layer.params(prefix))
        return out

    def encode_graph(self, x):
        """x: Tensor (N, 1, H, W) -> (mu, sigma) Tensors (N, latent_dim)."""
        h = nn.relu(self.enc1(x))
        h = nn.relu(self.enc2(h))
        h = nn.relu(self.enc3(h))
        h = nn.flatten(h)
        mu = self.mu_head(h)
        sigma = nn.maximum(nn.exp(self.logvar_head(h) * 0.5), SIGMA_FLOOR)
        return mu, sigma

    def decode_graph(self, z):
        n = z.data.shape[0]
        h = nn.relu(self.dec_fc(z)).reshape(n, self.channels[2], self._side, self._side)
        h = nn.relu(self.dec1(h))
        h = nn.relu(self.dec2(h))
        return nn.sigmoid(self.dec3(h))

    def regress_graph(self, z):
        return self.reg2(nn.relu(self.reg1(z)))


def _as_batch(model, images):
    imgs = np.asarray(images, dtype=np.float64)
    if imgs.ndim == 2:
        imgs = imgs[None]
    if imgs.shape[1:] != (model.resolution, model.resolution):
        raise nn.ShapeError(
            f"encode: image shape {imgs.shape[1:]} != ({model.resolution}, {model.resolution})")
    return imgs[:, None, :, :]


def encode_batch(model, images, chunk=128):
    """Deterministic (mu, sigma) arrays for a stack of images."""
    x = _as_batch(model, images)
    mus, sigmas = [], []
    with nn.no_grad():
        for i in range(0, len(x), chunk):
            mu, sigma = model.encode_graph(nn.Tensor(x[i:i + chunk]))
            mus.append(mu.data)
            sigmas.append(sigma.data)
    return np.concatenate(mus), np.concatenate(sigmas)


def encode(model, img):
    mu, sigma = encode_batch(model, np.asarray(img)[None])
    return LatentCode(mu=mu[0], sigma=sigma[0])


def reparameterize(code, eps):
    return code.mu + code.sigma * np.asarray(eps, dtype=float)


def loss(model, images, labels, eps, config):
    """Combined loss on one batch: returns (total Tensor, per-term breakdown)."""
    if config.alpha1 < 0 or config.alpha2 < 0:
        raise ParameterError("loss weights alpha1, alpha2 must be >= 0")
    x = nn.Tensor(_as_batch(model, images))
    n = float(x.data.shape[0])
    mu, sigma = model.encode_graph(x)
    z = mu + sigma * nn.Tensor(np.asarray(eps, dtype=float))
    recon = model.decode_graph(z)
    regressed = model.regress_graph(z)
    bce_term = nn.bce(recon, x.data) * (1.0 / n)
    kl_term = nn.kl_diag_gaussian(mu, sigma) * (1.0 / n)
    mse_term = nn.mse(regressed, np.asarray(labels, dtype=float))
    total = (bce_term + kl_term) * config.alpha1 + mse_term * config.alpha2
    breakdown = {"total": float(total.data), "bce": float(bce_term.data),
                 "kl": float(kl_term.data), "mse": float(mse_term.data)}
    return total, breakdown


def split_by_id_hash(ids, val_slot=0, slots=10):
    """Stable 90/10 split: an id goes to validation when its hash lands on val_slot."""
    train_idx, val_idx = [], []
    for i, design_id in enumerate(ids):
        digest = hashlib.sha256(str(design_id).encode()).hexdigest()
        (val_idx if int(digest, 16) % slots == val_slot else train_idx).append(i)
    return np.array(train_idx, dtype=int), np.array(val_idx, dtype=int)


def _snapshot(params):
    return {name: p.data.copy() for name, p in params.items()}


def _restore(params, snapshot):
    for name, p in params.items():
        p.data[...] = snapshot[name]


def _epoch_loss(model, images, labels, idx, config, batch_size):
    """Validation-style pass: eps = 0, no gradients, sample-weighted mean terms."""
    total = 0.0
    with nn.no_grad():
        for i in range(0, len(idx), batch_size):
            sel = idx[i:i + batch_size]
            eps = np.zeros((len(sel), model.latent_dim))
            _, terms = loss(model, images[sel], labels[sel], eps, config)
            total += terms["total"] * len(sel)
    return total / len(idx)


def train(ids, images, labels, config=VaeTrainConfig()):
    """Returns (model, log rows). Keeps the best-validation parameters."""
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if config.alpha1 < 0 or config.alpha2 < 0:
        raise ParameterError("loss weights alpha1, alpha2 must be >= 0")
    train_idx, val_idx = split_by_id_hash(ids)
    if len(train_idx) == 0 or len(val_idx) == 0:
        raise ParameterError("id-hash split produced an empty train or validation set")
    model = MultiModalVae(resolution=images.shape[1], channels=config.channels,
                          latent_dim=config.latent_dim, seed=config.seed)
    params = model.params()
    opt = nn.Adam(params, lr=config.lr)
    rng = np.random.default_rng(config.seed)
    best_val = np.inf
    best_params = _snapshot(params)
    stale = 0
    log = []
    for epoch in range(config.epochs):
        order = rng.permutation(train_idx)
        sums = {"total": 0.0, "bce": 0.0, "kl": 0.0, "mse": 0.0}
        for i in range(0, len(order), config.batch_size):
            sel = order[i:i + config.batch_size]
            eps = rng.standard_normal((len(sel), model.latent_dim))
            opt.zero_grad()
            total, terms = loss(model, images[sel], labels[sel], eps, config)
            if not np.isfinite(terms["total"]):
                raise TrainingError(f"loss diverged to {terms['total']} at epoch {epoch}",
                                    checkpoint=best_params)
            nn.backward(total)
            opt.step()
            for key in sums:
                sums[key] += terms[key] * len(sel)
        val_total = _epoch_loss(model, images, labels, val_idx, config, config.batch_size)
        row = {"epoch": epoch,
               "train_total": sums["total"] / len(order),
               "train_bce": sums["bce"] / len(order),
               "train_kl": sums["kl"] / len(order),
               "train_mse": sums["mse"] / len(order),
               "val_total": val_total}
        log.append(row)
        if val_total < best_val:
            best_val = val_total
            best_params = _snapshot(params)
            stale = 0
        else:
            stale += 1
            if stale > config.patience:
                break
    _restore(params, best_params)
    return model, log


def write_training_log(path, log):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=LOG_FIELDS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(log)


# -- persistence ----------------------------------------------------------------

def save_vae(path, model):
    meta = {"resolution": model.resolution, "channels": list(model.channels),
            "latent_dim": model.latent_dim}
    nn.save_checkpoint(path, model.params(), metadata=meta)


def load_vae(path):
    loaded, meta = nn.load_checkpoint(path)
    model = MultiModalVae(resolution=meta["resolution"], channels=tuple(meta["channels"]),
                          latent_dim=meta["latent_dim"])
    params = model.params()
    if set(params) != set(loaded):
        raise nn.ShapeError("checkpoint parameter names do not match the architecture")
    _restore(params, {name: t.data for name, t in loaded.items()})
    return model


# -- latent clustering ------------------------------------------------------------

def cluster_latents(model, ids, images, k=10, seed=0):
    """K-means over mu vectors; returns (assignments, nearest ids per cluster)."""
    ids = list(ids)
    if k > len(ids):
        raise ParameterError(f"k={k} exceeds design count {len(ids)}")
    mu, _ = encode_batch(model, images)
    return cluster_codes(ids, mu, k, seed=seed)


def cluster_codes(ids, mu, k, seed=0):
    labels, centers, _ = kmeans(mu, k, seed=seed)
    assignments = {design_id: int(c) for design_id, c in zip(ids, labels)}
    nearest = []
    for c in range(k):
        members = np.nonzero(labels == c)[0]
        dists = np.linalg.norm(mu[members] - centers[c], axis=1)
        order = members[np.lexsort((members, dists))]
        nearest.append([ids[i] for i in order[:10]])
    return assignments, nearest
