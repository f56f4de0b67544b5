"""Hand-rolled k-means with k-means++ seeding and multi-restart selection.

Deterministic for a given seed: ties in assignment go to the lowest cluster
index, restarts share one generator, and the best inertia wins.
"""

import numpy as np

RESTARTS = 20


class ParameterError(ValueError):
    """A caller-supplied parameter is out of range for the data."""


def _kmeans_pp_init(X, k, rng):
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(len(X))]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total == 0:
            centers[i] = X[rng.integers(len(X))]
        else:
            centers[i] = X[rng.choice(len(X), p=d2 / total)]
        d2 = np.minimum(d2, ((X - centers[i]) ** 2).sum(axis=1))
    return centers


def _lloyd(X, centers, max_iter):
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        new_centers = centers.copy()
        for c in range(len(centers)):
            members = X[labels == c]
            if len(members):
                new_centers[c] = members.mean(axis=0)
            else:
                new_centers[c] = X[d2.min(axis=1).argmax()]  # reseed to the worst-fit point
        if np.allclose(new_centers, centers, atol=1e-12, rtol=0.0):
            centers = new_centers
            break
        centers = new_centers
    d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    return labels, centers, float(d2.min(axis=1).sum())


def kmeans(X, k, seed=0, restarts=RESTARTS, max_iter=300):
    """Returns (labels, centers, inertia) for the best of ``restarts`` runs."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ParameterError(f"kmeans: need a non-empty 2-D matrix, got shape {X.shape}")
    if not 1 <= k <= len(X):
        raise ParameterError(f"kmeans: k={k} out of range for {len(X)} points")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        labels, centers, inertia = _lloyd(X, _kmeans_pp_init(X, k, rng), max_iter)
        if best is None or inertia < best[2]:
            best = (labels, centers, inertia)
    return best
