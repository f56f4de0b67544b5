"""Artifact-producing pipeline steps shared by the CLI and the HTTP service.

Each step reads its prerequisites from a Store, writes its outputs back, and
raises MissingArtifactError (naming the path) when a prerequisite is absent.
All randomness flows from config seeds, so re-running a step with the same
store and config reproduces its outputs byte for byte.
"""

import dataclasses
import json
import os
import statistics
import warnings

import numpy as np

from . import choice_model, config as config_mod, ensemble, mmvae, morphology
from . import performance, pca, recommend, simulator, wheel_gen
from .choice_model import ChoiceTrainConfig, RankingResponse, SplitConfig
from .ensemble import AlphaTrainConfig
from .mmvae import VaeTrainConfig
from .store import FEATURE_COLUMNS
from . import nn_core as nn


class MissingArtifactError(RuntimeError):
    def __init__(self, path):
        super().__init__(f"missing artifact: {path}")
        self.path = path


def require(path):
    if not os.path.exists(path):
        raise MissingArtifactError(path)
    return path


# -- config adapters --------------------------------------------------------

def split_config(cfg, augment=None):
    val_q, test_q = config_mod.split_questions(cfg)
    factor = cfg["augmentation_factor"] if augment is None else augment
    return SplitConfig(val_questions=val_q, test_questions=test_q,
                       augment_factor=factor)


def vae_config(cfg):
    return VaeTrainConfig(alpha1=cfg["alpha1"], alpha2=cfg["alpha2"],
                          epochs=cfg["vae_epochs"], batch_size=cfg["vae_batch_size"],
                          lr=cfg["vae_lr"], seed=cfg["seed"],
                          patience=cfg["vae_patience"],
                          channels=config_mod.channels(cfg),
                          latent_dim=cfg["latent_dim"])


def choice_config(cfg):
    return ChoiceTrainConfig(epochs=cfg["choice_epochs"],
                             batch_size=cfg["choice_batch_size"],
                             lr_encoder=cfg["lr_encoder"], lr_beta=cfg["lr_beta"],
                             patience=cfg["choice_patience"], seed=cfg["seed"],
                             beta_scale=cfg["beta_scale"],
                             warm_start=cfg["warm_start"])


def alpha_config(cfg):
    return AlphaTrainConfig(epochs=cfg["alpha_epochs"], lr=cfg["alpha_lr"],
                            patience=cfg["alpha_patience"], seed=cfg["seed"])


# -- data preparation steps ---------------------------------------------------

def generate(store, cfg, n=None):
    store.ensure_dirs()
    rows = wheel_gen.generate_dataset(n or cfg["n_designs"], cfg["seed"],
                                      store.designs_dir,
                                      resolution=cfg["resolution"])
    return len(rows)


def featurize(store, cfg):
    require(store.manifest_path)
    images = store.load_designs()
    kept, rows = [], []
    for row in store.design_rows():
        design_id = row["id"]
        feats = morphology.extract_features(images[design_id])
        try:
            feats.update(performance.extract_performance_features(images[design_id]))
        except (performance.StructuralError, performance.SolverError) as exc:
            # a raster the FE model cannot carry drops out of the design pool
            warnings.warn(f"design {design_id} failed compliance analysis "
                          f"and was excluded: {exc}")
            continue
        kept.append(design_id)
        rows.append([feats[name] for name in FEATURE_COLUMNS])
    store.write_features(kept, np.array(rows, dtype=np.float64))
    return len(kept)


def pca_fit(store, cfg):
    require(store.features_path)
    ids, X = store.read_features()
    scaler1, model, scaler2 = pca.fit_label_pipeline(X, cfg["n_components"])
    pca.save_label_artifacts(store.pca_path, scaler1, model, scaler2)
    labels = pca.transform_to_labels(X, scaler1, model, scaler2)
    store.write_labels(ids, labels)
    return len(ids)


def vae_train(store, cfg):
    require(store.manifest_path)
    require(store.labels_path)
    images = store.load_designs()
    labels = store.read_labels()
    ids = sorted(labels)  # the curated pool: designs that survived featurize
    model, log = mmvae.train(ids, np.array([images[i] for i in ids]),
                             np.array([labels[i] for i in ids]), vae_config(cfg))
    mmvae.save_vae(store.vae_path, model)
    mmvae.write_training_log(store.vae_log_path, log)
    return len(log)


# -- simulated survey ----------------------------------------------------------

def plan_for(store, cfg, respondent, index):
    """A fresh survey plan; questions 7/8 shared via the fixed seed."""
    require(store.labels_path)
    labels = store.read_labels()
    return simulator.plan_survey(labels, seed=[cfg["seed"], index],
                                 fixed_seed=cfg["fixed_seed"])


def survey_sim(store, cfg, r=None, g=None):
    require(store.labels_path)
    store.ensure_dirs()
    labels = store.read_labels()
    pop = simulator.make_population(r or cfg["n_respondents"], g or cfg["n_groups"],
                                    spread=cfg["spread"], tau=cfg["tau"],
                                    seed=cfg["seed"], dim=cfg["n_components"],
                                    antagonistic=cfg["antagonistic"])
    plans = {resp.id: simulator.plan_survey(labels, seed=[cfg["seed"], i],
                                            fixed_seed=cfg["fixed_seed"])
             for i, resp in enumerate(pop)}
    if cfg["oracle_target"] > 0:
        gaps = []
        for resp in pop:
            for ids in plans[resp.id].questions.values():
                u = [simulator.ground_truth_utility(resp, labels, d) for d in ids]
                gaps.extend(abs(u[i] - u[j]) for i in range(len(u))
                            for j in range(i + 1, len(u)))
        tau = simulator.calibrate_tau(np.array(gaps), cfg["oracle_target"])
        pop = [dataclasses.replace(resp, tau=tau) for resp in pop]
    responses = []
    for resp in pop:
        store.write_respondent(resp.id, resp.demographics, plans[resp.id].questions)
        responses.extend(simulator.simulate_survey(resp, plans[resp.id], labels,
                                                   seed=cfg["seed"]))
    simulator.write_responses_jsonl(store.responses_path, responses)
    truth = {resp.id: {"w": resp.w.tolist(), "tau": resp.tau,
                       "cluster": resp.cluster} for resp in pop}
    with open(store.truth_path, "w") as fh:
        json.dump(truth, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return len(pop)


# -- choice model training -------------------------------------------------------

def _respondent_pairs(store, respondent, split):
    """(train, val, test) pairs from the respondent's journal lines."""
    rankings = store.latest_rankings(respondent)
    missing = [q for q in range(1, choice_model.N_QUESTIONS + 1) if q not in rankings]
    if missing:
        raise choice_model.DataError(
            f"respondent {respondent} is missing questions {missing}")
    responses = [RankingResponse(respondent, q, rankings[q])
                 for q in sorted(rankings)]
    return choice_model.split_and_augment(choice_model.expand_rankings(responses),
                                          split)


def _plan_images(store, respondents, factor):
    """Images for every design in the given respondents' plans, augmented."""
    wanted = set()
    for rid in respondents:
        for ids in store.read_respondent(rid)["plan"].values():
            wanted.update(ids)
    images = store.load_designs()
    base = {design_id: images[design_id] for design_id in wanted}
    return choice_model.build_augmented_images(base, factor)


def train_individual_job(store, cfg, respondent):
    require(store.vae_path)
    require(store.respondent_path(respondent))
    splits = _respondent_pairs(store, respondent, split_config(cfg))
    images = _plan_images(store, [respondent], cfg["augmentation_factor"])
    model, metrics = choice_model.train_individual(store.vae_path, splits, images,
                                                   choice_config(cfg),
                                                   respondent=respondent)
    choice_model.save_individual(store.model_path(respondent), model, respondent)
    with open(store.metrics_path(respondent), "w") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return metrics


def train_individual_cmd(store, cfg, respondent=None):
    rids = [respondent] if respondent else store.list_respondents()
    if not rids:
        raise choice_model.DataError("no respondents to train")
    return {rid: train_individual_job(store, cfg, rid) for rid in rids}


def train_population_cmd(store, cfg):
    require(store.vae_path)
    rids = store.list_respondents()
    if not rids:
        raise choice_model.DataError("no respondents to train")
    split = split_config(cfg)
    splits_by = {rid: _respondent_pairs(store, rid, split) for rid in rids}
    images = _plan_images(store, rids, cfg["augmentation_factor"])
    model, metrics = choice_model.train_population(store.vae_path, splits_by,
                                                   images, choice_config(cfg))
    choice_model.save_individual(store.model_path("population"), model, "population")
    with open(store.metrics_path("population"), "w") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return metrics


# -- ensemble -----------------------------------------------------------------------

def shared_pool_ids(store, cfg, respondents):
    """Union of train+validation designs over respondents, sorted."""
    _, test_q = config_mod.split_questions(cfg)
    held_out = set(test_q)
    pool = set()
    for rid in respondents:
        plan = store.read_respondent(rid)["plan"]
        for q, ids in plan.items():
            if q not in held_out:
                pool.update(ids)
    return sorted(pool)


def load_models(store, respondents):
    models = {}
    for rid in respondents:
        path = store.model_path(rid)
        require(path)
        models[rid] = choice_model.load_individual(path)
    return models


def train_ensemble_cmd(store, cfg, respondent=None):
    rids = store.list_respondents()
    if len(rids) < 2:
        raise ensemble.PopulationError(
            f"ensembles need at least 2 respondents, have {len(rids)}")
    models = load_models(store, rids)
    pool_ids = shared_pool_ids(store, cfg, rids)
    images = store.load_designs()
    u_matrix = ensemble.build_utility_matrix(models, images, pool_ids)
    ensemble.save_utility_matrix(store.utility_path, u_matrix)
    dist = ensemble.distance_matrix(u_matrix)
    owners = [respondent] if respondent else rids
    split = split_config(cfg, augment=1)
    out = {}
    for owner in owners:
        ens = ensemble.build_ensemble(owner, models, u_matrix, dist,
                                      k=cfg["k_neighbors"],
                                      self_alpha=cfg["self_alpha"])
        train_pairs, val_pairs, _ = _respondent_pairs(store, owner, split)
        # Alphas are a handful of scalars over frozen members, so they train
        # on every non-test pair; the validation questions still pick the
        # best alphas along the descent path.
        ens, metrics = ensemble.train_alphas(ens, train_pairs + val_pairs,
                                             val_pairs, images,
                                             alpha_config(cfg))
        ensemble.save_ensemble(store.ensemble_path(owner), ens)
        out[owner] = metrics
    return out


def load_ensemble_for(store, respondent):
    """The trained ensemble, or a one-member fallback around the own model."""
    model_path = require(store.model_path(respondent))
    path = store.ensemble_path(respondent)
    if os.path.exists(path):
        registry = {rid: store.model_path(rid) for rid in store.trained_respondents()}
        registry["population"] = store.model_path("population")
        return ensemble.load_ensemble(path, registry)
    model = choice_model.load_individual(model_path)
    return ensemble.EnsembleModel(respondent, (respondent,),
                                  nn.Tensor(np.zeros(1), requires_grad=True),
                                  {respondent: model})


# -- recommendation / reporting ---------------------------------------------------

def pool_images(store):
    """Images of the curated pool (designs with labels)."""
    require(store.labels_path)
    labels = store.read_labels()
    images = store.load_designs()
    return {design_id: images[design_id] for design_id in labels}


def recommend_cmd(store, cfg, respondent, n):
    ens = load_ensemble_for(store, respondent)
    rec = recommend.recommend_top_n(ens, pool_images(store), n)
    doc = {"respondent": rec.respondent, "designs": list(rec.designs),
           "utilities": list(rec.utilities)}
    store.ensure_dirs()
    out = os.path.join(store.reports_dir, f"recommend_{respondent}.json")
    recommend.save_report_json(out, doc)
    return doc


def report_cmd(store, cfg):
    require(store.utility_path)
    store.ensure_dirs()
    u_matrix = ensemble.load_utility_matrix(store.utility_path)
    report = recommend.cluster_respondents(u_matrix, k_max=cfg["k_max"],
                                           seed=cfg["seed"])
    recommend.save_report_json(os.path.join(store.reports_dir, "groups.json"),
                               {"k": report.k, "assignments": report.assignments,
                                "inertia_curve": list(report.inertia_curve)})
    recommend.write_scatter_csv(os.path.join(store.reports_dir, "scatter.csv"),
                                u_matrix, report)
    recommend.write_inertia_csv(os.path.join(store.reports_dir, "inertia.csv"),
                                report)
    variance = recommend.preference_variance_ranking(u_matrix)
    recommend.save_report_json(os.path.join(store.reports_dir, "variance.json"),
                               {"ranked": [[d, v] for d, v in variance.ranked],
                                "top10": list(variance.top10),
                                "bottom10": list(variance.bottom10)})
    demo_keys = set()
    demos = {rid: store.read_respondent(rid).get("demographics", {})
             for rid in u_matrix.respondents}
    for d in demos.values():
        demo_keys.update(d)
    demographics = {}
    for key in sorted(demo_keys):
        labels = {rid: demos[rid].get(key, "unknown") for rid in u_matrix.respondents}
        demographics[key] = recommend.demographic_report(u_matrix, labels)
    recommend.save_report_json(os.path.join(store.reports_dir, "demographics.json"),
                               demographics)
    return report


def group_report(store, cfg):
    """The /groups payload, computed in memory (no files touched)."""
    rids = store.trained_respondents()
    if len(rids) < 3:
        raise ensemble.PopulationError(
            f"group report needs at least 3 trained respondents, have {len(rids)}")
    models = load_models(store, rids)
    pool_ids = shared_pool_ids(store, cfg, rids)
    images = store.load_designs()
    u_matrix = ensemble.build_utility_matrix(models, images, pool_ids)
    report = recommend.cluster_respondents(u_matrix, k_max=cfg["k_max"],
                                           seed=cfg["seed"])
    scatter = [{"respondent": rid, "x": x, "y": y, "cluster": cluster}
               for rid, x, y, cluster in recommend.scatter_points(u_matrix, report)]
    return {"k": report.k, "assignments": report.assignments,
            "inertia_curve": list(report.inertia_curve), "scatter": scatter}


# -- evaluation ------------------------------------------------------------------

def _pair_accuracy(probs, labels):
    probs, labels = np.asarray(probs), np.asarray(labels)
    hits = np.where(labels == 1, probs > 0.5, probs < 0.5)
    return float(np.mean(hits))


def ensemble_accuracy(ens, pairs, images):
    probs = [ensemble.ensemble_choice_probability(ens, images[p.design_a],
                                                  images[p.design_b])
             for p in pairs]
    return _pair_accuracy(probs, [p.label for p in pairs])


def eval_cmd(store, cfg):
    """Test-question accuracy of the three methods, as a two-column summary."""
    rids = store.list_respondents()
    if not rids:
        raise choice_model.DataError("no respondents to evaluate")
    require(store.model_path("population"))
    models = load_models(store, rids)
    pop_model = choice_model.load_individual(store.model_path("population"))
    images = store.load_designs()
    split = split_config(cfg, augment=1)
    acc = {"population": [], "individual": [], "ensemble": []}
    for rid in rids:
        _, _, test_pairs = _respondent_pairs(store, rid, split)
        acc["population"].append(
            choice_model.evaluate_accuracy(pop_model, test_pairs, images))
        acc["individual"].append(
            choice_model.evaluate_accuracy(models[rid], test_pairs, images))
        ens = load_ensemble_for(store, rid)
        acc["ensemble"].append(ensemble_accuracy(ens, test_pairs, images))
    store.ensure_dirs()
    with open(store.eval_path, "w", newline="") as fh:
        fh.write("method,mean_accuracy,median_accuracy\n")
        for method in ("population", "individual", "ensemble"):
            mean = repr(float(np.mean(acc[method])))
            median = repr(float(statistics.median(acc[method])))
            fh.write(f"{method},{mean},{median}\n")
    return acc
