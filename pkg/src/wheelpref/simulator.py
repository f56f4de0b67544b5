"""Synthetic respondents with known ground-truth utilities.

A respondent scores a design as w . phi(design) and ranks with Gumbel noise
of scale tau (Plackett-Luce). Survey plans pick 6 designs per question by
Latin hypercube sampling over the 4 PC label dims, with questions 7 and 8
shared by every respondent. Because the ground truth is linear in the
features, the learning pipeline can recover it; failures indicate bugs
rather than model capacity.
"""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .choice_model import N_QUESTIONS, RankingResponse
from .cluster import ParameterError

FIXED_QUESTIONS = (7, 8)
DESIGNS_PER_QUESTION = 6
LABEL_DIM = 4


@dataclass(frozen=True)
class SyntheticRespondent:
    id: str
    w: np.ndarray  # unit-norm ground-truth weights over the feature space
    tau: float
    cluster: int
    demographics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SurveyPlan:
    questions: dict  # question index 1..16 -> tuple of 6 design ids

    def all_designs(self):
        return sorted({d for ids in self.questions.values() for d in ids})


def _unit(v):
    n = np.linalg.norm(v)
    if n == 0:
        raise ParameterError("zero weight vector")
    return v / n


def make_population(r, g, spread=0.1, tau=1.0, seed=0, dim=LABEL_DIM,
                    antagonistic=False):
    """G unit sphere centers, each respondent a normalized perturbation.

    With antagonistic=True (G must be 2) the second center is the exact
    negation of the first, so pooled preferences cancel by construction.
    """
    if not (isinstance(r, int) and isinstance(g, int)) or not r >= g >= 1:
        raise ParameterError(f"need R >= G >= 1, got R={r}, G={g}")
    if spread < 0 or tau < 0:
        raise ParameterError("spread and tau must be >= 0")
    if antagonistic and g != 2:
        raise ParameterError("antagonistic mode needs exactly 2 clusters")
    rng = np.random.default_rng(seed)
    centers = [_unit(rng.normal(size=dim)) for _ in range(g)]
    if antagonistic:
        centers[1] = -centers[0]
    out = []
    for i in range(r):
        cluster = i % g
        w = _unit(centers[cluster] + spread * rng.normal(size=dim))
        out.append(SyntheticRespondent(f"sim{i:03d}", w, float(tau), cluster,
                                       {"group": f"c{cluster}"}))
    return out


def _lhs_pick(ids, labels, cells, available, rng):
    """6 designs on a Latin hypercube sample of the label space.

    Candidates are ranked by how many dims fall outside the assigned
    stratum, then by distance to the sampled target, then by id.
    """
    dim = labels.shape[1]
    strata = np.stack([rng.permutation(DESIGNS_PER_QUESTION) for _ in range(dim)],
                      axis=1)
    targets = (strata + rng.uniform(size=(DESIGNS_PER_QUESTION, dim)))
    targets /= DESIGNS_PER_QUESTION
    picked = []
    used = np.zeros((dim, DESIGNS_PER_QUESTION), dtype=bool)
    for s_row, t in zip(strata, targets):
        cand = np.flatnonzero(available)
        mismatch = (cells[cand] != s_row).sum(axis=1)
        collisions = used[np.arange(dim)[None, :], cells[cand]].sum(axis=1)
        dist = ((labels[cand] - t) ** 2).sum(axis=1)
        best = cand[np.lexsort((cand, dist, mismatch, collisions))[0]]
        available[best] = False
        used[np.arange(dim), cells[best]] = True
        picked.append(ids[best])
    return tuple(picked)


def plan_survey(label_map, seed=0, fixed_seed=0):
    """16 questions x 6 distinct designs, all 96 distinct per respondent.

    label_map: design id -> 4-dim PC label. Questions 7 and 8 come from
    fixed_seed alone, so every respondent's plan shares them exactly.
    """
    ids = sorted(label_map)
    if len(ids) < N_QUESTIONS * DESIGNS_PER_QUESTION:
        raise ParameterError(f"need at least {N_QUESTIONS * DESIGNS_PER_QUESTION} "
                             f"designs, got {len(ids)}")
    labels = np.array([label_map[d] for d in ids], dtype=np.float64)
    cells = np.minimum((labels * DESIGNS_PER_QUESTION).astype(int),
                       DESIGNS_PER_QUESTION - 1)
    available = np.ones(len(ids), dtype=bool)
    questions = {}
    fixed_rng = np.random.default_rng(fixed_seed)
    for q in FIXED_QUESTIONS:
        questions[q] = _lhs_pick(ids, labels, cells, available, fixed_rng)
    rng = np.random.default_rng(seed)
    for q in range(1, N_QUESTIONS + 1):
        if q not in questions:
            questions[q] = _lhs_pick(ids, labels, cells, available, rng)
    return SurveyPlan(questions)


def _rng_for(seed, respondent_id):
    digest = hashlib.sha256(respondent_id.encode()).digest()
    return np.random.default_rng([seed, int.from_bytes(digest[:8], "big")])


def ground_truth_utility(resp, features, design_id):
    return float(np.dot(resp.w, features[design_id]))


def simulate_ranking(resp, question, design_ids, features, rng):
    """Rank by w . phi + tau * Gumbel, best first (Plackett-Luce draw)."""
    noise = rng.gumbel(size=len(design_ids))
    scored = sorted(
        ((-(ground_truth_utility(resp, features, d) + resp.tau * g), d)
         for d, g in zip(design_ids, noise)))
    return RankingResponse(resp.id, question, tuple(d for _, d in scored))


def simulate_survey(resp, plan, features, seed=0):
    rng = _rng_for(seed, resp.id)
    return [simulate_ranking(resp, q, plan.questions[q], features, rng)
            for q in sorted(plan.questions)]


def _sigmoid(x):
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def oracle_accuracy(resp, pairs, features):
    """Bayes ceiling: mean over pairs of sigma(|gap| / tau).

    The marginal of a Plackett-Luce draw puts a above b with probability
    sigma(gap / tau); the optimal predictor takes the sign of the gap.
    """
    gaps = np.array([abs(ground_truth_utility(resp, features, p.design_a)
                         - ground_truth_utility(resp, features, p.design_b))
                     for p in pairs])
    if resp.tau == 0:
        return float(np.mean(np.where(gaps > 0, 1.0, 0.5)))
    return float(np.mean(_sigmoid(gaps / resp.tau)))


def calibrate_tau(gaps, target, iters=200):
    """tau for which the gap set's Bayes ceiling hits target (bisection)."""
    if not 0.5 < target < 1.0:
        raise ParameterError(f"target accuracy {target} outside (0.5, 1)")
    gaps = np.abs(np.asarray(gaps, dtype=np.float64))
    if gaps.max() == 0:
        raise ParameterError("all utility gaps are zero")
    lo, hi = 1e-9, 1e9
    for _ in range(iters):
        mid = np.sqrt(lo * hi)
        if float(np.mean(_sigmoid(gaps / mid))) > target:
            lo = mid
        else:
            hi = mid
    return float(np.sqrt(lo * hi))


def write_responses_jsonl(path, responses):
    """The same JSON-lines format the service appends to its log."""
    with open(path, "w") as fh:
        for resp in responses:
            fh.write(json.dumps({"respondent": resp.respondent,
                                 "question": resp.question,
                                 "ranking": list(resp.ranking)},
                                sort_keys=True) + "\n")
