"""Ensemble tests: utility matrix scaling, distances, neighbor selection,
alpha initialization, weighted prediction, and alpha-only training."""

import hashlib

import numpy as np
import pytest

from wheelpref import choice_model as cm
from wheelpref import ensemble as ens
from wheelpref import mmvae, wheel_gen
from wheelpref.cluster import ParameterError

RES = 16
CHANNELS = (4, 8, 8)


@pytest.fixture(scope="module")
def pop():
    rng = np.random.default_rng(21)
    designs = {}
    while len(designs) < 40:
        img = wheel_gen.generate_wheel(wheel_gen.sample_spec(rng), RES)
        designs.setdefault(img.id, img.pixels)
    vae = mmvae.MultiModalVae(RES, CHANNELS, seed=1)
    models = {f"r{i:02d}": cm.IndividualModel.from_vae(vae, seed=i, beta_scale=1.0)
              for i in range(7)}
    u = ens.build_utility_matrix(models, designs)
    dist = ens.distance_matrix(u)
    return {"designs": designs, "vae": vae, "models": models, "u": u, "dist": dist}


# -- utility matrix -----------------------------------------------------------


def test_utility_matrix_shape_and_row_scaling(pop):
    u = pop["u"]
    assert u.values.shape == (7, 40)
    assert u.respondents == tuple(sorted(pop["models"]))
    assert u.designs == tuple(sorted(pop["designs"]))
    assert np.allclose(u.values.min(axis=1), 0.0)
    assert np.allclose(u.values.max(axis=1), 1.0)
    assert u.values.min() >= 0.0 and u.values.max() <= 1.0


def test_zero_beta_row_is_all_half(pop):
    flat = cm.IndividualModel.from_vae(pop["vae"], seed=99)
    flat.beta.data[...] = 0.0
    models = dict(pop["models"], r99=flat)
    u = ens.build_utility_matrix(models, pop["designs"])
    row = u.values[u.respondents.index("r99")]
    assert np.all(row == 0.5)


def test_beta_scaling_leaves_row_unchanged(pop):
    scaled = cm.IndividualModel.from_vae(pop["vae"], seed=0, beta_scale=1.0)
    scaled.beta.data *= 10.0
    u2 = ens.build_utility_matrix({"r00": scaled, "r01": pop["models"]["r01"]},
                                  pop["designs"])
    u1 = ens.build_utility_matrix({"r00": pop["models"]["r00"],
                                   "r01": pop["models"]["r01"]}, pop["designs"])
    assert np.allclose(u1.values[0], u2.values[0], atol=1e-12)


def test_untrained_model_raises_state_error(pop):
    with pytest.raises(ens.StateError):
        ens.build_utility_matrix({"r00": pop["models"]["r00"], "r01": None},
                                 pop["designs"])
    with pytest.raises(ens.StateError):
        ens.build_utility_matrix({"r00": "/no/such/checkpoint.json"}, pop["designs"])


# -- distances ----------------------------------------------------------------


def test_distance_matrix_against_naive_oracle():
    rng = np.random.default_rng(3)
    vals = rng.uniform(0.0, 1.0, (5, 8))
    u = ens.UtilityMatrix(tuple(f"r{i}" for i in range(5)), tuple("dddddddd"), vals)
    d = ens.distance_matrix(u).values
    for i in range(5):
        for j in range(5):
            naive = np.sqrt(sum((vals[i, c] - vals[j, c]) ** 2 for c in range(8)))
            assert abs(d[i, j] - naive) <= 1e-12
    assert np.array_equal(d, d.T)
    assert np.all(np.diag(d) == 0.0)
    assert np.all(d >= 0.0)
    for i, j, k in [(0, 1, 2), (1, 3, 4), (2, 4, 0), (3, 0, 1)]:
        assert d[i, k] <= d[i, j] + d[j, k] + 1e-12


def test_distance_closed_forms():
    vals = np.array([np.zeros(9), np.ones(9), np.ones(9)])
    u = ens.UtilityMatrix(("a", "b", "c"), tuple(str(i) for i in range(9)), vals)
    d = ens.distance_matrix(u).values
    assert d[1, 2] == 0.0
    assert abs(d[0, 1] - np.sqrt(9.0)) <= 1e-12


# -- neighbor selection and alpha init -----------------------------------------


def test_select_neighbors_cap_and_exclusion(pop):
    dist = pop["dist"]
    got = ens.select_neighbors(dist, "r03", k=100)
    assert len(got) == 6 and "r03" not in got
    top3 = ens.select_neighbors(dist, "r03", k=3)
    i = dist.respondents.index("r03")
    order = sorted((dist.values[i, j], rid)
                   for j, rid in enumerate(dist.respondents) if rid != "r03")
    assert top3 == [rid for _, rid in order[:3]]


def test_select_neighbors_tie_breaks_by_id():
    vals = np.array([[0.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
    u = ens.UtilityMatrix(("x", "y", "z"), ("d1", "d2"), vals)
    dist = ens.distance_matrix(u)
    assert ens.select_neighbors(dist, "x", k=2) == ["y", "z"]


def test_select_neighbors_single_respondent_raises():
    u = ens.UtilityMatrix(("only",), ("d1",), np.array([[0.5]]))
    with pytest.raises(ens.PopulationError):
        ens.select_neighbors(ens.distance_matrix(u), "only")


def test_init_alphas_reciprocal_and_floor():
    vals = np.zeros((3, 4))
    vals[1] = [1.0, 1.0, 1.0, 1.0]
    u = ens.UtilityMatrix(("i", "far", "twin"), ("a", "b", "c", "d"), vals)
    dist = ens.distance_matrix(u)
    raw = ens.init_alphas(dist, "i", ["far", "twin"], self_alpha=1.0)
    assert raw[0] == 1.0
    assert abs(raw[1] - 0.5) <= 1e-12  # distance 2 -> reciprocal 0.5
    assert raw[2] == 1e6  # distance 0 -> floor rule
    e = np.exp(raw - raw.max())
    assert abs((e / e.sum()).sum() - 1.0) <= 1e-9
    for bad in (0.05, 11.0):
        with pytest.raises(ParameterError):
            ens.init_alphas(dist, "i", ["far"], self_alpha=bad)


def test_scaling_all_betas_preserves_neighbor_sets(pop):
    scaled = {}
    for rid, model in pop["models"].items():
        twin = cm.IndividualModel.from_vae(pop["vae"], seed=int(rid[1:]),
                                           beta_scale=1.0)
        twin.beta.data *= 3.0
        scaled[rid] = twin
    dist2 = ens.distance_matrix(ens.build_utility_matrix(scaled, pop["designs"]))
    for rid in pop["models"]:
        assert (set(ens.select_neighbors(pop["dist"], rid, k=3))
                == set(ens.select_neighbors(dist2, rid, k=3)))


# -- weighted prediction --------------------------------------------------------


def make_ensemble(pop, owner="r00", k=6, self_alpha=1.0):
    return ens.build_ensemble(owner, pop["models"], pop["u"], pop["dist"],
                              k=k, self_alpha=self_alpha)


def two_images(pop):
    ids = sorted(pop["designs"])
    return pop["designs"][ids[0]], pop["designs"][ids[1]]


def test_identical_members_match_single_model(pop):
    model = pop["models"]["r02"]
    e = ens.EnsembleModel("r02", ("r02", "r05", "r06"),
                          ens.nn.Tensor(np.array([1.0, 0.3, 2.0]), requires_grad=True),
                          {"r02": model, "r05": model, "r06": model})
    a, b = two_images(pop)
    assert abs(ens.ensemble_choice_probability(e, a, b)
               - cm.choice_probability(model, a, b)) <= 1e-12


def test_one_hot_alpha_reproduces_member(pop):
    e = make_ensemble(pop)
    m_id = e.member_ids[2]
    e.raw_alpha.data[2] += 40.0
    a, b = two_images(pop)
    member = e.members[m_id]
    assert abs(ens.ensemble_utility(e, a) - cm.utility(member, a)) <= 1e-9
    assert abs(ens.ensemble_choice_probability(e, a, b)
               - cm.choice_probability(member, a, b)) <= 1e-9


def test_ensemble_antisymmetry_and_consistency(pop):
    e = make_ensemble(pop)
    a, b = two_images(pop)
    p, q = ens.ensemble_choice_probability(e, a, b), ens.ensemble_choice_probability(e, b, a)
    assert abs(p + q - 1.0) <= 1e-12
    via_utility = cm._sigmoid(ens.ensemble_utility(e, a) - ens.ensemble_utility(e, b))
    assert abs(via_utility - p) <= 1e-12
    assert abs(e.weights().sum() - 1.0) <= 1e-9


def test_member_permutation_invariance(pop):
    e = make_ensemble(pop)
    perm = [3, 0, 5, 1, 6, 2, 4]
    shuffled = ens.EnsembleModel(e.owner, tuple(e.member_ids[i] for i in perm),
                                 ens.nn.Tensor(e.raw_alpha.data[perm],
                                               requires_grad=True),
                                 e.members, e.pool_hash)
    a, b = two_images(pop)
    assert abs(ens.ensemble_choice_probability(e, a, b)
               - ens.ensemble_choice_probability(shuffled, a, b)) <= 1e-12


def test_missing_member_model_raises_state_error(pop):
    e = make_ensemble(pop)
    del e.members[e.member_ids[-1]]
    a, b = two_images(pop)
    with pytest.raises(ens.StateError):
        ens.ensemble_choice_probability(e, a, b)


# -- alpha training --------------------------------------------------------------


def target_pairs(pop, target_id, n, seed):
    """Owner pairs labeled by the target member's utility ordering."""
    rng = np.random.default_rng(seed)
    ids = sorted(pop["designs"])
    target = pop["models"][target_id]
    pairs = []
    while len(pairs) < n:
        a, b = rng.choice(ids, 2, replace=False)
        ua = cm.utility(target, pop["designs"][a])
        ub = cm.utility(target, pop["designs"][b])
        if abs(ua - ub) < 1e-9:
            continue
        pairs.append(cm.ChoicePair("r00", 1, a, b, int(ua > ub)))
    return pairs


def test_train_alphas_moves_mass_toward_ground_truth_member(pop):
    e = make_ensemble(pop)
    target_id = e.member_ids[3]
    train = target_pairs(pop, target_id, 40, seed=5)
    val = target_pairs(pop, target_id, 15, seed=6)
    w_before = e.weights()[3]
    digests = {rid: hashlib.sha256(
        b"".join(np.ascontiguousarray(p.data).tobytes()
                 for _, p in sorted(m.params().items()))).hexdigest()
        for rid, m in e.members.items()}
    _, metrics = ens.train_alphas(e, train, val, pop["designs"],
                                  ens.AlphaTrainConfig(epochs=600, lr=0.1, patience=600))
    w_after = e.weights()[3]
    print(f"\nalpha mass on ground-truth member: {w_before:.4f} -> {w_after:.4f} "
          f"(train acc {metrics['train_acc']:.3f})")
    assert w_after > w_before
    after = {rid: hashlib.sha256(
        b"".join(np.ascontiguousarray(p.data).tobytes()
                 for _, p in sorted(m.params().items()))).hexdigest()
        for rid, m in e.members.items()}
    assert after == digests
    assert abs(e.weights().sum() - 1.0) <= 1e-9


def test_train_alphas_full_batch_descent(pop):
    e = make_ensemble(pop)
    train = target_pairs(pop, e.member_ids[1], 40, seed=7)
    _, metrics = ens.train_alphas(e, train, [], pop["designs"],
                                  ens.AlphaTrainConfig(epochs=10, lr=1e-2, patience=10))
    curve = metrics["train_bce"]
    assert len(curve) == 10
    assert all(curve[t + 1] <= curve[t] + 1e-12 for t in range(len(curve) - 1))


def test_train_alphas_zero_epochs_keeps_init(pop):
    e = make_ensemble(pop)
    before = e.raw_alpha.data.copy()
    _, metrics = ens.train_alphas(e, target_pairs(pop, "r01", 10, seed=8), [],
                                  pop["designs"], ens.AlphaTrainConfig(epochs=0))
    assert np.array_equal(e.raw_alpha.data, before)
    assert metrics["wall_seconds"] > 0


def test_train_alphas_empty_train_raises(pop):
    with pytest.raises(ParameterError):
        ens.train_alphas(make_ensemble(pop), [], [], pop["designs"])


def test_identical_member_utilities_warn_but_train(pop):
    model = pop["models"]["r00"]
    e = ens.EnsembleModel("r00", ("r00", "r01"),
                          ens.nn.Tensor(np.array([1.0, 1.0]), requires_grad=True),
                          {"r00": model, "r01": model})
    pairs = target_pairs(pop, "r00", 10, seed=9)
    with pytest.warns(UserWarning, match="unidentifiable"):
        ens.train_alphas(e, pairs, [], pop["designs"], ens.AlphaTrainConfig(epochs=2))


# -- persistence ------------------------------------------------------------------


def test_ensemble_artifact_round_trip(tmp_path, pop):
    e = make_ensemble(pop)
    path = tmp_path / "r00.ensemble.json"
    ens.save_ensemble(path, e)
    loaded = ens.load_ensemble(path, pop["models"])
    assert loaded.owner == e.owner
    assert loaded.member_ids == e.member_ids
    assert np.array_equal(loaded.raw_alpha.data, e.raw_alpha.data)
    assert loaded.pool_hash == e.pool_hash
    a, b = two_images(pop)
    assert (ens.ensemble_choice_probability(loaded, a, b)
            == ens.ensemble_choice_probability(e, a, b))
    with pytest.raises(ens.StateError):
        ens.load_ensemble(path, {})


def test_utility_matrix_csv_round_trip(tmp_path, pop):
    path = tmp_path / "utility.csv"
    ens.save_utility_matrix(path, pop["u"])
    loaded = ens.load_utility_matrix(path)
    assert loaded.respondents == pop["u"].respondents
    assert loaded.designs == pop["u"].designs
    assert np.array_equal(loaded.values, pop["u"].values)
