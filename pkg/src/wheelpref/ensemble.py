"""Similarity-weighted ensembles of individual choice models.

Each respondent's ensemble blends their own frozen model with the models of
their nearest neighbors in utility space. Blend weights are softmax(alpha);
alphas start at reciprocal utility-vector distances and are the only trained
parameters, so member models stay byte-identical.
"""

import csv
import hashlib
import json
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import nn_core as nn
from .choice_model import IndividualModel, _batch, _lookup, _sigmoid
from .cluster import ParameterError

K_NEIGHBORS = 100
DISTANCE_FLOOR = 1e-6


class StateError(RuntimeError):
    """A referenced model is untrained or its checkpoint is missing."""


class PopulationError(ValueError):
    """Not enough respondents for the requested operation."""


@dataclass(frozen=True)
class UtilityMatrix:
    respondents: tuple
    designs: tuple
    values: np.ndarray  # (R, D), each row min-max scaled to [0, 1]


@dataclass(frozen=True)
class DistanceMatrix:
    respondents: tuple
    values: np.ndarray  # (R, R) L2 distances between utility rows


@dataclass
class EnsembleModel:
    owner: str
    member_ids: tuple  # owner first, then neighbors by ascending distance
    raw_alpha: nn.Tensor
    members: dict  # member id -> IndividualModel
    pool_hash: str = ""

    def weights(self):
        a = self.raw_alpha.data
        e = np.exp(a - a.max())
        return e / e.sum()


def _model_utilities(model, images, keys, chunk=256):
    out = np.empty(len(keys))
    with nn.no_grad():
        for i in range(0, len(keys), chunk):
            block = keys[i:i + chunk]
            x = np.stack([_lookup(images, k) for k in block])[:, None]
            out[i:i + len(block)] = model.utility_graph(nn.Tensor(x)).data[:, 0]
    return out


def _resolve_model(respondent, entry):
    if isinstance(entry, IndividualModel):
        return entry
    if entry is None:
        raise StateError(f"model for respondent {respondent!r} is not trained")
    try:
        from .choice_model import load_individual
        return load_individual(entry)
    except (OSError, KeyError, ValueError) as exc:
        raise StateError(f"cannot load model for respondent {respondent!r}: {exc}") from exc


def pool_hash(design_ids):
    return hashlib.sha256("\n".join(design_ids).encode()).hexdigest()


def build_utility_matrix(models, images, design_ids=None):
    """Rows: respondents (sorted); columns: the design pool (sorted).

    models maps respondent id to an IndividualModel or a checkpoint path;
    a missing model raises StateError. Each row is min-max scaled, with
    constant rows mapped to all 0.5.
    """
    if not models:
        raise PopulationError("no respondent models")
    respondents = tuple(sorted(models))
    designs = tuple(sorted(images) if design_ids is None else design_ids)
    values = np.empty((len(respondents), len(designs)))
    for r, rid in enumerate(respondents):
        model = _resolve_model(rid, models[rid])
        values[r] = _model_utilities(model, images, designs)
    lo, hi = values.min(axis=1, keepdims=True), values.max(axis=1, keepdims=True)
    span = hi - lo
    flat = (span == 0.0)[:, 0]
    span[flat] = 1.0
    values = np.clip((values - lo) / span, 0.0, 1.0)
    values[flat] = 0.5
    return UtilityMatrix(respondents, designs, values)


def distance_matrix(u_matrix):
    v = u_matrix.values
    d = np.empty((len(v), len(v)))
    for i in range(len(v)):
        # (v[j]-v[i])**2 is elementwise identical to (v[i]-v[j])**2, so the
        # row-at-a-time computation is exactly symmetric
        d[i] = np.sqrt(((v - v[i]) ** 2).sum(axis=1))
    np.fill_diagonal(d, 0.0)
    return DistanceMatrix(u_matrix.respondents, d)


def select_neighbors(dist, respondent, k=K_NEIGHBORS):
    """The min(k, R-1) closest other respondents; ties break by id ascending."""
    if len(dist.respondents) < 2:
        raise PopulationError("neighbor selection needs at least 2 respondents")
    i = dist.respondents.index(respondent)
    ranked = sorted((dist.values[i, j], rid)
                    for j, rid in enumerate(dist.respondents) if rid != respondent)
    return [rid for _, rid in ranked[:min(k, len(ranked))]]


def init_alphas(dist, respondent, neighbors, self_alpha=1.0):
    """raw_alpha aligned to [respondent] + neighbors; downstream always softmaxes."""
    if not 0.1 <= self_alpha <= 10.0:
        raise ParameterError(f"self_alpha {self_alpha} outside [0.1, 10]")
    i = dist.respondents.index(respondent)
    raw = [self_alpha]
    for rid in neighbors:
        d = dist.values[i, dist.respondents.index(rid)]
        raw.append(1.0 / max(d, DISTANCE_FLOOR))
    return np.array(raw)


def build_ensemble(owner, models, u_matrix, dist, k=K_NEIGHBORS, self_alpha=1.0):
    neighbors = select_neighbors(dist, owner, k)
    raw = init_alphas(dist, owner, neighbors, self_alpha)
    member_ids = (owner, *neighbors)
    members = {rid: _resolve_model(rid, models[rid]) for rid in member_ids}
    return EnsembleModel(owner, member_ids, nn.Tensor(raw, requires_grad=True),
                         members, pool_hash(u_matrix.designs))


def _member_models(ensemble):
    out = []
    for rid in ensemble.member_ids:
        if rid not in ensemble.members:
            raise StateError(f"member {rid!r} has no loaded model")
        out.append(ensemble.members[rid])
    return out


def ensemble_utility(ensemble, image):
    """Softmax-weighted average of member utilities."""
    utils = np.array([_model_utilities(m, {"_": image}, ["_"])[0]
                      for m in _member_models(ensemble)])
    return float(np.dot(ensemble.weights(), utils))


def ensemble_choice_probability(ensemble, image_a, image_b):
    return _sigmoid(ensemble_utility(ensemble, image_a)
                    - ensemble_utility(ensemble, image_b))


@dataclass(frozen=True)
class AlphaTrainConfig:
    epochs: int = 100
    lr: float = 1e-2
    patience: int = 10
    seed: int = 0


def _params_digest(model):
    h = hashlib.sha256()
    for name in sorted(model.params()):
        h.update(name.encode())
        h.update(np.ascontiguousarray(model.params()[name].data).tobytes())
    return h.hexdigest()


def _pair_deltas(ensemble, pairs, images):
    """(members, pairs) matrix of frozen per-member utility differences."""
    keys = sorted({p.design_a for p in pairs} | {p.design_b for p in pairs})
    index = {k: i for i, k in enumerate(keys)}
    ia = np.array([index[p.design_a] for p in pairs])
    ib = np.array([index[p.design_b] for p in pairs])
    rows = []
    for model in _member_models(ensemble):
        u = _model_utilities(model, images, keys)
        rows.append(u[ia] - u[ib])
    return np.array(rows)


def _alpha_accuracy(ensemble, deltas, labels):
    p = np.array([_sigmoid(d) for d in ensemble.weights() @ deltas])
    return float(np.mean(np.where(labels == 1, p > 0.5, p < 0.5)))


def train_alphas(ensemble, train_pairs, val_pairs, images, config=None):
    """Full-batch BCE descent on raw_alpha only; members stay frozen.

    Keeps the alphas with the best validation accuracy. Returns
    (ensemble, metrics) with the per-epoch training BCE curve.
    """
    t0 = time.perf_counter()
    config = config or AlphaTrainConfig()
    if not train_pairs:
        raise ParameterError("train_alphas: empty training pair set")
    digests = [_params_digest(m) for m in _member_models(ensemble)]
    deltas = _pair_deltas(ensemble, train_pairs, images)
    if np.allclose(deltas, deltas[:1], atol=1e-12):
        warnings.warn("all member utilities agree on the training designs; "
                      "alphas are unidentifiable", stacklevel=2)
    labels = np.array([p.label for p in train_pairs], dtype=np.float64)
    val_deltas = _pair_deltas(ensemble, val_pairs, images) if val_pairs else deltas
    val_labels = (np.array([p.label for p in val_pairs], dtype=np.float64)
                  if val_pairs else labels)
    best = ensemble.raw_alpha.data.copy()
    best_acc = _alpha_accuracy(ensemble, val_deltas, val_labels)
    curve = []
    stale = 0
    for _epoch in range(config.epochs):
        # plain full-batch gradient descent keeps the BCE curve monotone
        ensemble.raw_alpha.grad = None
        w = nn.softmax(ensemble.raw_alpha)
        assert abs(w.data.sum() - 1.0) <= 1e-9
        logits = w.reshape(1, -1) @ nn.Tensor(deltas)
        loss = nn.bce(nn.sigmoid(logits), labels[None, :]) * (1.0 / len(train_pairs))
        nn.backward(loss)
        ensemble.raw_alpha.data -= config.lr * ensemble.raw_alpha.grad
        curve.append(float(loss.data))
        val_acc = _alpha_accuracy(ensemble, val_deltas, val_labels)
        if val_acc > best_acc:
            best_acc = val_acc
            best = ensemble.raw_alpha.data.copy()
            stale = 0
        else:
            stale += 1
            if stale > config.patience:
                break
    ensemble.raw_alpha.data[...] = best
    after = [_params_digest(m) for m in _member_models(ensemble)]
    if after != digests:
        raise StateError("member parameters changed during alpha training")
    metrics = {
        "owner": ensemble.owner,
        "train_acc": _alpha_accuracy(ensemble, deltas, labels),
        "val_acc": _alpha_accuracy(ensemble, val_deltas, val_labels),
        "train_bce": curve,
        "wall_seconds": time.perf_counter() - t0,
    }
    return ensemble, metrics


# -- persistence ----------------------------------------------------------------

def save_ensemble(path, ensemble):
    doc = {"owner": ensemble.owner, "members": list(ensemble.member_ids),
           "raw_alpha": ensemble.raw_alpha.data.tolist(),
           "utility_pool_hash": ensemble.pool_hash}
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_ensemble(path, models):
    with open(path) as fh:
        doc = json.load(fh)
    members = {rid: _resolve_model(rid, models.get(rid)) for rid in doc["members"]}
    return EnsembleModel(doc["owner"], tuple(doc["members"]),
                         nn.Tensor(np.array(doc["raw_alpha"]), requires_grad=True),
                         members, doc["utility_pool_hash"])


def save_utility_matrix(path, u_matrix):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["respondent", *u_matrix.designs])
        for rid, row in zip(u_matrix.respondents, u_matrix.values):
            writer.writerow([rid, *(repr(float(v)) for v in row)])


def load_utility_matrix(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    designs = tuple(rows[0][1:])
    respondents = tuple(r[0] for r in rows[1:])
    values = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return UtilityMatrix(respondents, designs, values)
