"""Per-respondent choice models over wheel images.

A respondent ranks 6 designs per question; every ranking expands into
pairwise comparisons with the preferred design first. An IndividualModel
scores a design as beta . mu(image), where mu comes from a fine-tuned copy
of a trained VAE encoder, and the probability of choosing A over B is
sigmoid(utility(A) - utility(B)). There is no bias term, so the model is
antisymmetric by construction.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import nn_core as nn
from .cluster import ParameterError
from .mmvae import DEFAULT_CHANNELS, LATENT_DIM, MultiModalVae, load_vae
from .wheel_gen import rotate_image

N_QUESTIONS = 16
DESIGNS_PER_QUESTION = 6
METRIC_FIELDS = ["respondent", "train_acc", "val_acc", "test_acc", "wall_seconds"]


class DataError(ValueError):
    """Malformed survey data: duplicate designs, bad question index, ..."""


@dataclass(frozen=True)
class RankingResponse:
    respondent: str
    question: int
    ranking: tuple

    def validate(self):
        if not 1 <= self.question <= N_QUESTIONS:
            raise DataError(f"question {self.question} outside 1..{N_QUESTIONS}")
        if len(set(self.ranking)) != len(self.ranking):
            raise DataError(f"duplicate design in ranking for respondent "
                            f"{self.respondent!r} question {self.question}")
        if len(self.ranking) < 2:
            raise DataError("ranking needs at least two designs")


@dataclass(frozen=True)
class ChoicePair:
    respondent: str
    question: int
    design_a: str
    design_b: str
    label: int  # 1 when design_a was chosen over design_b

    def validate(self):
        if self.design_a == self.design_b:
            raise DataError(f"pair compares design {self.design_a!r} with itself")
        if self.label not in (0, 1):
            raise DataError(f"label must be 0 or 1, got {self.label!r}")


def _default_val():
    return (15, 16)


def _default_test():
    return (7, 8)


@dataclass(frozen=True)
class SplitConfig:
    """Question-wise split; the 12 training questions are everything else."""
    val_questions: tuple = field(default_factory=_default_val)
    test_questions: tuple = field(default_factory=_default_test)
    augment_factor: int = 10

    def validate(self):
        held = set(self.val_questions) | set(self.test_questions)
        if len(held) != len(self.val_questions) + len(self.test_questions):
            raise ParameterError("validation and test questions overlap")
        if not held <= set(range(1, N_QUESTIONS + 1)):
            raise ParameterError("held-out questions fall outside 1..16")
        if self.augment_factor < 1:
            raise ParameterError(f"augment_factor must be >= 1, got {self.augment_factor}")

    def train_questions(self):
        held = set(self.val_questions) | set(self.test_questions)
        return tuple(q for q in range(1, N_QUESTIONS + 1) if q not in held)


@dataclass(frozen=True)
class ChoiceTrainConfig:
    epochs: int = 50
    batch_size: int = 256
    lr_encoder: float = 1e-4
    lr_beta: float = 1e-3
    patience: int = 10
    seed: int = 0
    beta_scale: float = 0.01
    warm_start: bool = True


def expand_rankings(responses):
    """Every ordered-above relation becomes one ChoicePair with label 1."""
    pairs = []
    for resp in responses:
        resp.validate()
        r = resp.ranking
        for i in range(len(r)):
            for j in range(i + 1, len(r)):
                pairs.append(ChoicePair(resp.respondent, resp.question, r[i], r[j], 1))
    return pairs


def variant_key(design_id, k):
    return design_id if k == 0 else f"{design_id}@r{k}"


def build_augmented_images(images, factor):
    """Adds rotated variants keyed 'id@rK' for K in 1..factor-1."""
    out = dict(images)
    for design_id, px in images.items():
        for k in range(1, factor):
            out[variant_key(design_id, k)] = rotate_image(
                np.asarray(px), 2.0 * np.pi * k / factor)
    return out


def split_and_augment(pairs, config=None):
    """Question-wise split into (train, val, test) pair lists.

    Train and validation pairs are replicated across the augment_factor
    rotation variants (variant 0 is the original); test pairs are not.
    """
    config = config or SplitConfig()
    config.validate()
    val_q, test_q = set(config.val_questions), set(config.test_questions)
    train, val, test = [], [], []
    for pair in pairs:
        pair.validate()
        if not 1 <= pair.question <= N_QUESTIONS:
            raise DataError(f"question {pair.question} outside 1..{N_QUESTIONS}")
        if pair.question in test_q:
            test.append(pair)
            continue
        bucket = val if pair.question in val_q else train
        for k in range(config.augment_factor):
            bucket.append(ChoicePair(pair.respondent, pair.question,
                                     variant_key(pair.design_a, k),
                                     variant_key(pair.design_b, k), pair.label))
    return train, val, test


class IndividualModel:
    """Fine-tuned VAE encoder (convs + mu head) plus a linear utility beta."""

    def __init__(self, resolution, channels=DEFAULT_CHANNELS, latent_dim=LATENT_DIM,
                 seed=0, beta_scale=0.01):
        rng = np.random.default_rng(seed)
        c1, c2, c3 = channels
        self.resolution = resolution
        self.channels = (c1, c2, c3)
        self.latent_dim = latent_dim
        self._flat = c3 * (resolution // 8) ** 2
        self.enc1 = nn.Conv2d(1, c1, rng)
        self.enc2 = nn.Conv2d(c1, c2, rng)
        self.enc3 = nn.Conv2d(c2, c3, rng)
        self.mu_head = nn.Dense(self._flat, latent_dim, rng)
        self.beta = nn.Tensor(rng.normal(0.0, beta_scale, latent_dim), requires_grad=True)

    @classmethod
    def from_vae(cls, vae, seed=0, beta_scale=0.01):
        model = cls(vae.resolution, vae.channels, vae.latent_dim, seed, beta_scale)
        src, dst = vae.encoder_params(), model.params()
        for name in src:
            dst[name].data[...] = src[name].data
        return model

    def params(self):
        out = {}
        for prefix, layer in [("enc1", self.enc1), ("enc2", self.enc2),
                              ("enc3", self.enc3), ("mu_head", self.mu_head)]:
            out.update(layer.params(prefix))
        out["beta"] = self.beta
        return out

    def mu_graph(self, x):
        h = nn.relu(self.enc1(x))
        h = nn.relu(self.enc2(h))
        h = nn.relu(self.enc3(h))
        return self.mu_head(nn.flatten(h))

    def utility_graph(self, x):
        """x: Tensor (N, 1, H, W) -> Tensor (N, 1) of beta . mu."""
        return self.mu_graph(x) @ self.beta.reshape(self.latent_dim, 1)


def _batch(model, images):
    imgs = np.asarray(images, dtype=np.float64)
    if imgs.ndim == 2:
        imgs = imgs[None]
    if imgs.shape[1:] != (model.resolution, model.resolution):
        raise nn.ShapeError(
            f"utility: image shape {imgs.shape[1:]} != ({model.resolution}, {model.resolution})")
    return imgs[:, None]


def utility(model, image):
    with nn.no_grad():
        return float(model.utility_graph(nn.Tensor(_batch(model, image))).data[0, 0])


def _sigmoid(d):
    if d >= 0:
        t = np.exp(-d)
        return 1.0 / (1.0 + t)
    t = np.exp(d)
    return t / (1.0 + t)


def choice_probability(model, image_a, image_b):
    return _sigmoid(utility(model, image_a) - utility(model, image_b))


def _lookup(images, key):
    try:
        return np.asarray(images[key], dtype=np.float64)
    except KeyError:
        raise DataError(f"no image for design {key!r}") from None


def _pair_forward(model, pairs, images):
    """Encodes each distinct design once, then gathers per-pair utilities."""
    keys = sorted({p.design_a for p in pairs} | {p.design_b for p in pairs})
    index = {k: i for i, k in enumerate(keys)}
    x = np.stack([_lookup(images, k) for k in keys])[:, None]
    if x.shape[2:] != (model.resolution, model.resolution):
        raise nn.ShapeError(
            f"utility: image shape {x.shape[2:]} != ({model.resolution}, {model.resolution})")
    util = model.utility_graph(nn.Tensor(x))
    ua = nn.gather(util, [index[p.design_a] for p in pairs])
    ub = nn.gather(util, [index[p.design_b] for p in pairs])
    return nn.sigmoid(ua - ub)


def evaluate_accuracy(model, pairs, images, batch_size=512):
    """Fraction of pairs called correctly; p == 0.5 counts as incorrect."""
    if not pairs:
        raise ParameterError("evaluate_accuracy: empty pair list")
    correct = 0
    with nn.no_grad():
        for i in range(0, len(pairs), batch_size):
            chunk = pairs[i:i + batch_size]
            p = _pair_forward(model, chunk, images).data[:, 0]
            y = np.array([pair.label for pair in chunk])
            correct += int(np.sum(np.where(y == 1, p > 0.5, p < 0.5)))
    return correct / len(pairs)


def _warm_start_beta(model, pairs, images, ridge=1e-3, iters=25):
    """Newton logistic fit of beta on frozen encoder features."""
    keys = sorted({p.design_a for p in pairs} | {p.design_b for p in pairs})
    index = {k: i for i, k in enumerate(keys)}
    with nn.no_grad():
        mus = []
        for i in range(0, len(keys), 256):
            x = np.stack([_lookup(images, k) for k in keys[i:i + 256]])[:, None]
            mus.append(model.mu_graph(nn.Tensor(x)).data)
        mu = np.concatenate(mus)
    ia = [index[p.design_a] for p in pairs]
    ib = [index[p.design_b] for p in pairs]
    d = mu[ia] - mu[ib]
    y = np.array([p.label for p in pairs], dtype=np.float64)
    beta = model.beta.data.copy()
    n = len(pairs)
    for _ in range(iters):
        p = 1.0 / (1.0 + np.exp(-np.clip(d @ beta, -500, 500)))
        grad = d.T @ (p - y) / n + ridge * beta
        hess = (d * (p * (1.0 - p))[:, None]).T @ d / n + ridge * np.eye(len(beta))
        step = np.linalg.solve(hess, grad)
        beta -= step
        if np.max(np.abs(step)) < 1e-10:
            break
    model.beta.data[...] = beta


def _snapshot(params):
    return {name: p.data.copy() for name, p in params.items()}


def _restore(params, snapshot):
    for name, p in params.items():
        p.data[...] = snapshot[name]


def train_individual(init, splits, images, config=None, respondent=""):
    """Fine-tunes a copy of the VAE encoder jointly with beta on choice BCE.

    init is a MultiModalVae or a checkpoint path; it is never modified.
    splits is (train_pairs, val_pairs, test_pairs). Keeps the parameters
    with the best validation accuracy. Returns (model, metrics).
    """
    t0 = time.perf_counter()
    config = config or ChoiceTrainConfig()
    vae = load_vae(init) if isinstance(init, (str, bytes)) or hasattr(init, "__fspath__") \
        else init
    train_pairs, val_pairs, test_pairs = splits
    if not train_pairs:
        raise DataError("train_individual: empty training pair set")
    model = IndividualModel.from_vae(vae, seed=config.seed, beta_scale=config.beta_scale)
    params = model.params()
    monitor = val_pairs if val_pairs else train_pairs
    if config.epochs > 0:
        if config.warm_start:
            _warm_start_beta(model, train_pairs, images)
        opt = nn.Adam(params, lr=config.lr_encoder, lr_map={"beta": config.lr_beta})
        rng = np.random.default_rng(config.seed)
        best_acc = evaluate_accuracy(model, monitor, images)
        best_params = _snapshot(params)
        stale = 0
        order = np.arange(len(train_pairs))
        for _epoch in range(config.epochs):
            rng.shuffle(order)
            for i in range(0, len(order), config.batch_size):
                chunk = [train_pairs[j] for j in order[i:i + config.batch_size]]
                opt.zero_grad()
                p = _pair_forward(model, chunk, images)
                y = np.array([pair.label for pair in chunk], dtype=np.float64)[:, None]
                loss = nn.bce(p, y) * (1.0 / len(chunk))
                nn.backward(loss)
                opt.step()
            val_acc = evaluate_accuracy(model, monitor, images)
            if val_acc > best_acc:
                best_acc = val_acc
                best_params = _snapshot(params)
                stale = 0
            else:
                stale += 1
                if stale > config.patience:
                    break
        _restore(params, best_params)
    metrics = {
        "respondent": respondent,
        "train_acc": evaluate_accuracy(model, train_pairs, images),
        "val_acc": evaluate_accuracy(model, val_pairs, images) if val_pairs else float("nan"),
        "test_acc": evaluate_accuracy(model, test_pairs, images) if test_pairs else float("nan"),
        "wall_seconds": time.perf_counter() - t0,
    }
    return model, metrics


def train_population(init, splits_by_respondent, images, config=None):
    """One shared model on the pooled pairs of every respondent.

    splits_by_respondent maps respondent id -> (train, val, test) pair
    lists; the pools concatenate in sorted respondent order.
    """
    if not splits_by_respondent:
        raise DataError("train_population: no respondents")
    pooled = ([], [], [])
    for rid in sorted(splits_by_respondent):
        for pool, part in zip(pooled, splits_by_respondent[rid]):
            pool.extend(part)
    return train_individual(init, pooled, images, config, respondent="population")


# -- persistence ----------------------------------------------------------------

def save_individual(path, model, respondent=""):
    meta = {"resolution": model.resolution, "channels": list(model.channels),
            "latent_dim": model.latent_dim, "respondent": respondent}
    nn.save_checkpoint(path, model.params(), metadata=meta)


def load_individual(path):
    loaded, meta = nn.load_checkpoint(path)
    model = IndividualModel(meta["resolution"], tuple(meta["channels"]), meta["latent_dim"])
    params = model.params()
    if set(params) != set(loaded):
        raise nn.ShapeError("checkpoint parameter names do not match the architecture")
    _restore(params, {name: t.data for name, t in loaded.items()})
    return model
