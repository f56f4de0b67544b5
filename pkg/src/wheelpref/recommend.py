"""Recommendation and analysis over trained ensembles and utility matrices:
per-respondent top-N lists, preference-variance ranking, respondent
clustering with elbow selection, and group/demographic aggregates."""

import csv
import json
import warnings
from dataclasses import dataclass

import numpy as np

from .cluster import ParameterError, kmeans
from .ensemble import PopulationError, _member_models, _model_utilities
from .pca import fit_pca, project

REDUCED_DIM = 10


@dataclass(frozen=True)
class Recommendation:
    respondent: str
    designs: tuple  # ids, best first
    utilities: tuple  # matching ensemble utilities, non-increasing


@dataclass(frozen=True)
class VarianceReport:
    ranked: tuple  # (design id, variance), descending
    top10: tuple
    bottom10: tuple


@dataclass(frozen=True)
class GroupReport:
    assignments: dict  # respondent id -> cluster index
    k: int
    inertia_curve: tuple  # inertia at k = 1..k_max


def pool_utilities(ensemble, images, design_ids=None):
    """Ensemble utility per design: softmax weights dotted with member rows."""
    keys = sorted(images) if design_ids is None else list(design_ids)
    rows = np.array([_model_utilities(m, images, keys)
                     for m in _member_models(ensemble)])
    w = ensemble.weights()
    return keys, np.array([float(np.dot(w, rows[:, j])) for j in range(len(keys))])


def recommend_top_n(ensemble, images, n):
    if not images:
        raise ParameterError("recommend_top_n: empty design pool")
    if not 1 <= n <= len(images):
        raise ParameterError(f"recommend_top_n: n={n} out of range for pool of {len(images)}")
    keys, vals = pool_utilities(ensemble, images)
    order = sorted(zip(keys, vals), key=lambda kv: (-kv[1], kv[0]))[:n]
    return Recommendation(ensemble.owner,
                          tuple(k for k, _ in order),
                          tuple(float(v) for _, v in order))


def preference_variance_ranking(u_matrix):
    """Designs by descending cross-respondent population variance."""
    if len(u_matrix.respondents) < 2:
        raise PopulationError("variance ranking needs at least 2 respondents")
    var = u_matrix.values.var(axis=0, ddof=0)
    ranked = sorted(zip(u_matrix.designs, var), key=lambda kv: (-kv[1], kv[0]))
    ranked = tuple((d, float(v)) for d, v in ranked)
    return VarianceReport(ranked,
                          tuple(d for d, _ in ranked[:10]),
                          tuple(d for d, _ in ranked[::-1][:10]))


def _elbow(inertia):
    """k maximizing the second difference of the inertia curve."""
    k_max = len(inertia)
    if k_max < 3:
        return k_max
    second = [inertia[k - 2] - 2.0 * inertia[k - 1] + inertia[k] for k in range(2, k_max)]
    return 2 + int(np.argmax(second))


def cluster_respondents(u_matrix, k_max=10, seed=0):
    """PCA-reduced k-means over utility rows; k picked by the elbow rule.

    Rows are clustered in sorted-respondent order so the partition does not
    depend on the row order of the input matrix.
    """
    rids = u_matrix.respondents
    if len(rids) < 3:
        raise PopulationError("clustering needs at least 3 respondents")
    order = np.argsort(np.asarray(rids, dtype=object))
    x = u_matrix.values[order]
    dim = min(REDUCED_DIM, x.shape[0], x.shape[1])
    z = project(x, fit_pca(x, dim))
    k_max = min(k_max, len(rids))
    runs = [kmeans(z, k, seed=seed) for k in range(1, k_max + 1)]
    inertia = tuple(float(r[2]) for r in runs)
    k = _elbow(inertia)
    labels = runs[k - 1][0]
    assignments = {rids[r]: int(lab) for r, lab in zip(order, labels)}
    return GroupReport(assignments, k, inertia)


def _mean_rows(u_matrix, member_ids):
    idx = [u_matrix.respondents.index(r) for r in member_ids]
    return u_matrix.values[idx].mean(axis=0)


def group_best_designs(u_matrix, report, m):
    """Per cluster: top-m designs by member-mean utility."""
    out = {}
    for cid in range(report.k):
        members = sorted(r for r, c in report.assignments.items() if c == cid)
        if not members:
            warnings.warn(f"cluster {cid} is empty; skipped", stacklevel=2)
            continue
        mean = _mean_rows(u_matrix, members)
        ranked = sorted(zip(u_matrix.designs, mean), key=lambda kv: (-kv[1], kv[0]))
        out[cid] = [(d, float(v)) for d, v in ranked[:m]]
    return out


def demographic_report(u_matrix, labels):
    """Per category: the full design ordering by mean utility.

    Respondents absent from the label map count as 'unknown'.
    """
    by_cat = {}
    for rid in u_matrix.respondents:
        by_cat.setdefault(labels.get(rid, "unknown"), []).append(rid)
    for cat in set(labels.values()) - set(by_cat):
        warnings.warn(f"category {cat!r} has no respondents; skipped", stacklevel=2)
    out = {}
    for cat in sorted(by_cat):
        mean = _mean_rows(u_matrix, by_cat[cat])
        ranked = sorted(zip(u_matrix.designs, mean), key=lambda kv: (-kv[1], kv[0]))
        out[cat] = [(d, float(v)) for d, v in ranked]
    return out


# -- report artifacts -------------------------------------------------------------

def save_report_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def scatter_points(u_matrix, report):
    """(respondent, x, y, cluster) rows: 2D PCA of utility rows plus labels."""
    x = u_matrix.values
    dim = min(2, x.shape[0], x.shape[1])
    z = project(x, fit_pca(x, dim))
    rows = []
    for i, rid in enumerate(u_matrix.respondents):
        y = float(z[i, 1]) if dim > 1 else 0.0
        rows.append((rid, float(z[i, 0]), y, report.assignments[rid]))
    return rows


def write_scatter_csv(path, u_matrix, report):
    """2D PCA of utility rows plus cluster labels, for the UI scatter plot."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["respondent", "x", "y", "cluster"])
        for rid, x, y, cluster in scatter_points(u_matrix, report):
            writer.writerow([rid, repr(x), repr(y), cluster])


def write_inertia_csv(path, report):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["k", "inertia"])
        for k, inertia in enumerate(report.inertia_curve, start=1):
            writer.writerow([k, repr(float(inertia))])
