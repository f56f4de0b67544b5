"""Choice-model tests: ranking expansion, split/augment bookkeeping, the
sigmoid pairwise model, and per-respondent training behavior."""

import hashlib

import numpy as np
import pytest

from wheelpref import choice_model as cm
from wheelpref import mmvae, wheel_gen
from wheelpref.cluster import ParameterError
from wheelpref.nn_core import ShapeError

RES = 16
CHANNELS = (4, 8, 8)
FAST = cm.ChoiceTrainConfig(epochs=8, patience=8, seed=0)


@pytest.fixture(scope="module")
def survey():
    rng = np.random.default_rng(7)
    designs = {}
    while len(designs) < 96:
        img = wheel_gen.generate_wheel(wheel_gen.sample_spec(rng), RES)
        designs.setdefault(img.id, img.pixels)
    ids = sorted(designs)
    vae = mmvae.MultiModalVae(RES, CHANNELS, seed=1)
    mu, _ = mmvae.encode_batch(vae, np.stack([designs[i] for i in ids]))
    w = rng.normal(0.0, 1.0, vae.latent_dim)
    util = dict(zip(ids, mu @ w))
    questions = {q: [str(d) for d in rng.choice(ids, 6, replace=False)]
                 for q in range(1, 17)}
    return {"designs": designs, "vae": vae, "util": util, "questions": questions}


def rankings_for(survey, respondent, worst_first=False):
    out = []
    for q, ids in survey["questions"].items():
        order = sorted(ids, key=lambda d: survey["util"][d], reverse=not worst_first)
        out.append(cm.RankingResponse(respondent, q, tuple(order)))
    return out


@pytest.fixture(scope="module")
def split_a(survey):
    # factor 1: an untrained encoder gives rotated variants unrelated latents,
    # so augmented pairs would be pure label noise against the linear truth
    pairs = cm.expand_rankings(rankings_for(survey, "alice"))
    return cm.split_and_augment(pairs, cm.SplitConfig(augment_factor=1))


@pytest.fixture(scope="module")
def images_aug(survey):
    return cm.build_augmented_images(survey["designs"], 3)


@pytest.fixture(scope="module")
def trained(survey, split_a):
    return cm.train_individual(survey["vae"], split_a, survey["designs"], FAST,
                               respondent="alice")


# -- ranking expansion -----------------------------------------------------


def test_expand_pair_counts(survey):
    pairs = cm.expand_rankings(rankings_for(survey, "alice"))
    assert len(pairs) == 240
    for q in range(1, 17):
        assert sum(p.question == q for p in pairs) == 15
    assert all(p.label == 1 for p in pairs)
    assert all(p.respondent == "alice" for p in pairs)


def test_expand_orientation_is_transitively_consistent(survey):
    resp = rankings_for(survey, "alice")[0]
    pairs = cm.expand_rankings([resp])
    rank = {d: i for i, d in enumerate(resp.ranking)}
    for p in pairs:
        assert rank[p.design_a] < rank[p.design_b]
    # beats-relation from the pairs reconstructs the original total order
    beats = {(p.design_a, p.design_b) for p in pairs}
    recovered = sorted(resp.ranking, key=lambda d: -sum((d, o) in beats
                                                        for o in resp.ranking))
    assert tuple(recovered) == resp.ranking


def test_expand_two_design_ranking():
    pairs = cm.expand_rankings([cm.RankingResponse("r", 1, ("A", "B"))])
    assert pairs == [cm.ChoicePair("r", 1, "A", "B", 1)]


def test_expand_duplicate_design_raises():
    resp = cm.RankingResponse("r", 1, ("A", "B", "A"))
    with pytest.raises(cm.DataError):
        cm.expand_rankings([resp])


# -- split and augmentation --------------------------------------------------


def test_split_counts_default_factor(survey):
    pairs = cm.expand_rankings(rankings_for(survey, "alice"))
    train, val, test = cm.split_and_augment(pairs, cm.SplitConfig())
    assert (len(train), len(val), len(test)) == (1800, 300, 30)
    assert {p.question for p in test} == {7, 8}
    assert all("@" not in p.design_a and "@" not in p.design_b for p in test)
    assert any(p.design_a.endswith("@r3") for p in train)


def test_split_counts_factor_one(survey):
    pairs = cm.expand_rankings(rankings_for(survey, "alice"))
    train, val, test = cm.split_and_augment(pairs, cm.SplitConfig(augment_factor=1))
    assert (len(train), len(val), len(test)) == (180, 30, 30)


def test_split_question_out_of_range_raises():
    for q in (0, 17):
        bad = [cm.ChoicePair("r", q, "A", "B", 1)]
        with pytest.raises(cm.DataError):
            cm.split_and_augment(bad)


def test_augmented_variant_matches_rotation(survey):
    design_id, px = next(iter(survey["designs"].items()))
    store = cm.build_augmented_images({design_id: px}, 10)
    assert len(store) == 10
    want = wheel_gen.rotate_image(px, 2.0 * np.pi * 3 / 10)
    assert np.array_equal(store[f"{design_id}@r3"], want)
    assert np.array_equal(store[design_id], px)


# -- pairwise probability model ----------------------------------------------


def fresh_model(survey, seed=3):
    return cm.IndividualModel.from_vae(survey["vae"], seed=seed)


def some_images(survey, n):
    ids = sorted(survey["designs"])[:n]
    return [survey["designs"][i] for i in ids]


def test_choice_probability_antisymmetry(survey, trained):
    imgs = some_images(survey, 6)
    for model in (fresh_model(survey), trained[0]):
        for a, b in [(0, 1), (2, 3), (4, 5)]:
            p = cm.choice_probability(model, imgs[a], imgs[b])
            q = cm.choice_probability(model, imgs[b], imgs[a])
            assert abs(p + q - 1.0) <= 1e-12
        assert cm.choice_probability(model, imgs[0], imgs[0]) == 0.5


def test_zero_beta_gives_half_and_zero_accuracy(survey):
    model = fresh_model(survey)
    model.beta.data[...] = 0.0
    a, b = some_images(survey, 2)
    assert cm.choice_probability(model, a, b) == 0.5
    pairs = cm.expand_rankings(rankings_for(survey, "alice"))[:20]
    assert cm.evaluate_accuracy(model, pairs, survey["designs"]) == 0.0


def test_utility_choice_consistency(survey, trained):
    imgs = some_images(survey, 4)
    for model in (fresh_model(survey), trained[0]):
        for a in range(4):
            for b in range(4):
                via_utility = cm._sigmoid(cm.utility(model, imgs[a])
                                          - cm.utility(model, imgs[b]))
                assert abs(via_utility - cm.choice_probability(model, imgs[a], imgs[b])) <= 1e-12


def test_beta_scaling_preserves_ranking(survey):
    model = fresh_model(survey)
    imgs = some_images(survey, 8)
    before = np.argsort([cm.utility(model, im) for im in imgs])
    model.beta.data *= 3.7
    after = np.argsort([cm.utility(model, im) for im in imgs])
    assert np.array_equal(before, after)


def test_image_shape_mismatch_raises(survey):
    model = fresh_model(survey)
    with pytest.raises(ShapeError):
        cm.utility(model, np.zeros((8, 8)))
    with pytest.raises(ShapeError):
        cm.choice_probability(model, np.zeros((RES, RES)), np.zeros((8, 8)))


# -- accuracy ----------------------------------------------------------------


def test_evaluate_accuracy_empty_raises(survey):
    with pytest.raises(ParameterError):
        cm.evaluate_accuracy(fresh_model(survey), [], survey["designs"])


def test_evaluate_accuracy_three_of_four(survey):
    model = fresh_model(survey)
    ids = sorted(survey["designs"])[:8]
    duels = [(ids[0], ids[1]), (ids[2], ids[3]), (ids[4], ids[5]), (ids[6], ids[7])]
    probs = [cm.choice_probability(model, survey["designs"][a], survey["designs"][b])
             for a, b in duels]
    assert all(abs(p - 0.5) > 1e-9 for p in probs)
    labels = [1 if p > 0.5 else 0 for p in probs]
    labels[3] = 1 - labels[3]
    pairs = [cm.ChoicePair("r", 1, a, b, lab) for (a, b), lab in zip(duels, labels)]
    assert cm.evaluate_accuracy(model, pairs, survey["designs"]) == 0.75


# -- training ----------------------------------------------------------------


def test_zero_epochs_returns_initialization(survey, split_a, images_aug):
    cfg = cm.ChoiceTrainConfig(epochs=0, seed=5)
    model, metrics = cm.train_individual(survey["vae"], split_a, images_aug, cfg)
    ref = cm.IndividualModel.from_vae(survey["vae"], seed=5, beta_scale=cfg.beta_scale)
    got, want = model.params(), ref.params()
    assert all(np.array_equal(got[k].data, want[k].data) for k in want)
    assert metrics["wall_seconds"] > 0


def test_empty_train_set_raises(survey, images_aug):
    with pytest.raises(cm.DataError):
        cm.train_individual(survey["vae"], ([], [], []), images_aug)


def test_missing_image_raises_data_error(survey):
    pairs = [cm.ChoicePair("r", 1, "nope-a", "nope-b", 1)]
    with pytest.raises(cm.DataError):
        cm.evaluate_accuracy(fresh_model(survey), pairs, survey["designs"])


def test_source_vae_checkpoint_unchanged(tmp_path, survey):
    path = tmp_path / "vae.json"
    mmvae.save_vae(path, survey["vae"])
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    pairs = cm.expand_rankings(rankings_for(survey, "alice"))
    splits = cm.split_and_augment(pairs, cm.SplitConfig(augment_factor=1))
    cfg = cm.ChoiceTrainConfig(epochs=1, seed=0)
    cm.train_individual(path, splits, survey["designs"], cfg)
    assert hashlib.sha256(path.read_bytes()).hexdigest() == digest
    before = {k: v.data.copy() for k, v in survey["vae"].params().items()}
    cm.train_individual(survey["vae"], splits, survey["designs"], cfg)
    after = survey["vae"].params()
    assert all(np.array_equal(before[k], after[k].data) for k in before)


def test_zero_noise_respondent_recovery(trained):
    model, metrics = trained
    print(f"\nzero-noise respondent: train={metrics['train_acc']:.3f} "
          f"val={metrics['val_acc']:.3f} test={metrics['test_acc']:.3f}")
    assert metrics["test_acc"] >= 0.9
    assert metrics["respondent"] == "alice"
    assert metrics["wall_seconds"] > 0


def test_best_validation_accuracy_is_kept(trained, split_a, survey):
    model, metrics = trained
    val_acc = cm.evaluate_accuracy(model, split_a[1], survey["designs"])
    assert val_acc == metrics["val_acc"]


def test_shuffled_labels_give_chance_accuracy(survey, images_aug):
    rng = np.random.default_rng(2)
    pairs = cm.expand_rankings(rankings_for(survey, "alice"))
    noisy = [cm.ChoicePair(p.respondent, p.question, p.design_a, p.design_b,
                           int(rng.integers(0, 2))) for p in pairs]
    splits = cm.split_and_augment(noisy, cm.SplitConfig(augment_factor=3))
    _, metrics = cm.train_individual(survey["vae"], splits, images_aug, FAST)
    assert metrics["train_acc"] <= 0.9
    print(f"\nshuffled-label test accuracy: {metrics['test_acc']:.3f}")
    assert 0.35 <= metrics["test_acc"] <= 0.65


# -- population model ---------------------------------------------------------


def test_population_single_respondent_matches_individual(survey, split_a, trained):
    model, metrics = cm.train_population(survey["vae"], {"alice": split_a},
                                         survey["designs"], FAST)
    ind_model, ind_metrics = trained
    got, want = model.params(), ind_model.params()
    assert all(np.array_equal(got[k].data, want[k].data) for k in want)
    assert metrics["test_acc"] == ind_metrics["test_acc"]
    assert metrics["respondent"] == "population"


def test_population_requires_respondents(survey):
    with pytest.raises(cm.DataError):
        cm.train_population(survey["vae"], {}, survey["designs"])


def noisy_rankings(survey, respondent, sign, tau, seed):
    """Plackett-Luce draws around sign * utility / tau."""
    rng = np.random.default_rng(seed)
    out = []
    for q, ids in survey["questions"].items():
        scores = {d: sign * survey["util"][d] / tau + rng.gumbel() for d in ids}
        order = sorted(ids, key=lambda d: scores[d], reverse=True)
        out.append(cm.RankingResponse(respondent, q, tuple(order)))
    return out


def test_antagonistic_pair_trains_to_chance(survey):
    # exact-mirror rankings would make the pooled optimum beta = 0 to float
    # epsilon; noisy draws give the realized optimum a stable small direction
    tau = 0.5 * float(np.std(list(survey["util"].values())))
    split_ann, split_bob = (
        cm.split_and_augment(cm.expand_rankings(noisy_rankings(survey, who, sign,
                                                               tau, seed)),
                             cm.SplitConfig(augment_factor=1))
        for who, sign, seed in [("ann", 1.0, 10), ("bob", -1.0, 11)])
    cfg = cm.ChoiceTrainConfig(epochs=4, patience=4, seed=0)
    model, _ = cm.train_population(survey["vae"],
                                   {"ann": split_ann, "bob": split_bob},
                                   survey["designs"], cfg)
    acc_a = cm.evaluate_accuracy(model, split_ann[2], survey["designs"])
    acc_b = cm.evaluate_accuracy(model, split_bob[2], survey["designs"])
    print(f"\nantagonistic population test accuracy: a={acc_a:.3f} b={acc_b:.3f}")
    assert abs(acc_a - 0.5) <= 0.15
    assert abs(acc_b - 0.5) <= 0.15


def test_homogeneous_population_close_to_individual(survey, split_a, trained):
    pairs_twin = [cm.ChoicePair("carol", p.question, p.design_a, p.design_b, p.label)
                  for part in split_a for p in part]
    n1, n2 = len(split_a[0]), len(split_a[1])
    split_twin = (pairs_twin[:n1], pairs_twin[n1:n1 + n2], pairs_twin[n1 + n2:])
    model, _ = cm.train_population(survey["vae"],
                                   {"alice": split_a, "carol": split_twin},
                                   survey["designs"], FAST)
    pop_acc = cm.evaluate_accuracy(model, split_a[2], survey["designs"])
    ind_acc = trained[1]["test_acc"]
    print(f"\nhomogeneous population: pop={pop_acc:.3f} individual={ind_acc:.3f}")
    assert abs(pop_acc - ind_acc) <= 0.05


# -- persistence ---------------------------------------------------------------


def test_individual_checkpoint_round_trip(tmp_path, trained, survey):
    model, _ = trained
    path = tmp_path / "alice.json"
    cm.save_individual(path, model, respondent="alice")
    loaded = cm.load_individual(path)
    got, want = loaded.params(), model.params()
    assert all(np.array_equal(got[k].data, want[k].data) for k in want)
    img = some_images(survey, 1)[0]
    assert cm.utility(loaded, img) == cm.utility(model, img)
