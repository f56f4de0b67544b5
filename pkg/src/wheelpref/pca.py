"""Double min-max scaling and 4-component PCA for regression labels.

Engineered features are scaled to [0, 1] per column, projected onto the top
principal components, and the projections are scaled to [0, 1] again. The
resulting 4-vectors are the labels the latent-space regressor trains on.
"""

import json
from dataclasses import dataclass

import numpy as np

from .nn_core import ShapeError

N_COMPONENTS = 4


class RankError(ValueError):
    """Not enough rows or columns to fit the requested number of components."""


@dataclass(frozen=True)
class ScalerParams:
    mins: np.ndarray
    maxs: np.ndarray
    degenerate: np.ndarray  # bool per column: max == min


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (n_components, P), orthonormal rows
    explained_variance_ratio: np.ndarray


def fit_minmax(X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise RankError(f"fit_minmax: need a 2-D matrix with at least 2 rows, got shape {X.shape}")
    mins = X.min(axis=0)
    maxs = X.max(axis=0)
    return ScalerParams(mins=mins, maxs=maxs, degenerate=maxs == mins)


def apply_minmax(X, params):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != params.mins.shape[0]:
        raise ShapeError(f"apply_minmax: expected {params.mins.shape[0]} columns, got shape {X.shape}")
    span = np.where(params.degenerate, 1.0, params.maxs - params.mins)
    scaled = (X - params.mins) / span
    scaled[:, params.degenerate] = 0.5
    return np.clip(scaled, 0.0, 1.0)


def fit_pca(X_scaled, n_components=N_COMPONENTS):
    X = np.asarray(X_scaled, dtype=float)
    if X.ndim != 2 or X.shape[0] < n_components or X.shape[1] < n_components:
        raise RankError(f"fit_pca: need at least {n_components} rows and columns, got shape {X.shape}")
    mean = X.mean(axis=0)
    _, s, vt = np.linalg.svd(X - mean, full_matrices=False)
    components = vt[:n_components]
    # sign convention: the largest-magnitude loading of each component is positive
    flip = np.sign(components[np.arange(n_components), np.abs(components).argmax(axis=1)])
    components = components * flip[:, None]
    var = s * s
    evr = var[:n_components] / var.sum() if var.sum() > 0 else np.zeros(n_components)
    return PcaModel(mean=mean, components=components, explained_variance_ratio=evr)


def project(X_scaled, model):
    X = np.asarray(X_scaled, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.mean.shape[0]:
        raise ShapeError(f"project: expected {model.mean.shape[0]} columns, got shape {X.shape}")
    return (X - model.mean) @ model.components.T


def transform_to_labels(X, scaler1, pca, scaler2):
    """Features -> scaled -> principal components -> labels in [0, 1]^4."""
    return apply_minmax(project(apply_minmax(X, scaler1), pca), scaler2)


def fit_label_pipeline(X, n_components=N_COMPONENTS):
    """Fit both scalers and the PCA on one feature matrix."""
    scaler1 = fit_minmax(X)
    pca = fit_pca(apply_minmax(X, scaler1), n_components)
    scaler2 = fit_minmax(project(apply_minmax(X, scaler1), pca))
    return scaler1, pca, scaler2


# -- persistence ----------------------------------------------------------------

def _pack(a):
    a = np.asarray(a)
    return {"shape": list(a.shape), "data": a.astype(float).ravel().tolist()}


def _unpack(obj, dtype=float):
    return np.array(obj["data"], dtype=dtype).reshape(obj["shape"])


def save_label_artifacts(path, scaler1, pca, scaler2):
    doc = {
        "scaler1": {"mins": _pack(scaler1.mins), "maxs": _pack(scaler1.maxs),
                    "degenerate": _pack(scaler1.degenerate)},
        "pca": {"mean": _pack(pca.mean), "components": _pack(pca.components),
                "explained_variance_ratio": _pack(pca.explained_variance_ratio)},
        "scaler2": {"mins": _pack(scaler2.mins), "maxs": _pack(scaler2.maxs),
                    "degenerate": _pack(scaler2.degenerate)},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_label_artifacts(path):
    with open(path) as fh:
        doc = json.load(fh)

    def scaler(obj):
        return ScalerParams(mins=_unpack(obj["mins"]), maxs=_unpack(obj["maxs"]),
                            degenerate=_unpack(obj["degenerate"], dtype=bool))

    pca = PcaModel(mean=_unpack(doc["pca"]["mean"]),
                   components=_unpack(doc["pca"]["components"]),
                   explained_variance_ratio=_unpack(doc["pca"]["explained_variance_ratio"]))
    return scaler(doc["scaler1"]), pca, scaler(doc["scaler2"])
