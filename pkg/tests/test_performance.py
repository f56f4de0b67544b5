import numpy as np
import pytest

from wheelpref import performance as perf
from wheelpref.performance import (ComplianceResult, DensityField, LoadCase, StructuralError,
                                   assemble_stiffness, compute_compliance, element_stiffness,
                                   extract_performance_features, image_to_density,
                                   rim_load_vector, solve_system, support_and_rim_nodes,
                                   volume_fraction, weight_proxy)
from wheelpref.wheel_gen import WheelSpec, generate_wheel, sample_spec


def small_wheel(resolution, n_sym=5, curvature=0.3, seed=3):
    spec = WheelSpec(n_sym=n_sym, spokes_per_sector=1, spoke_width=0.22,
                     spoke_curvature=curvature, hub_radius=0.4, rim_thickness=0.2,
                     phase=0.1, seed=seed)
    return generate_wheel(spec, resolution=resolution)


def dense_compliance(field, load):
    """Independent route: direct dense solve of the assembled system."""
    K = assemble_stiffness(field).toarray()
    hub, rim = support_and_rim_nodes(field)
    f = rim_load_vector(field, rim, load)
    fixed = np.concatenate([2 * hub, 2 * hub + 1])
    free = np.setdiff1d(np.arange(K.shape[0]), fixed)
    u = np.linalg.solve(K[np.ix_(free, free)], f[free])
    return float(f[free] @ u)


# -- density plumbing ----------------------------------------------------------

def test_image_to_density_all_foreground():
    field = image_to_density(np.ones((5, 7), dtype=np.uint8))
    assert field.nelx == 7 and field.nely == 5
    assert (field.rho == 1.0).all()


def test_image_to_density_all_background():
    field = image_to_density(np.zeros((4, 4), dtype=np.uint8))
    assert (field.rho == perf.RHO_MIN).all()


def test_image_to_density_checkerboard():
    px = np.indices((6, 6)).sum(axis=0) % 2
    rho = image_to_density(px).rho
    assert (rho == 1.0).sum() == 18 and (rho == perf.RHO_MIN).sum() == 18


# -- element stiffness ---------------------------------------------------------

def test_element_stiffness_symmetric_psd():
    ke = element_stiffness()
    assert np.allclose(ke, ke.T)
    assert np.linalg.eigvalsh(ke).min() > -1e-12


def test_element_stiffness_rigid_modes():
    ke = element_stiffness()
    # node order TL, TR, BR, BL in image coordinates (x right, y down)
    coords = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    tx = np.tile([1.0, 0.0], 4)
    ty = np.tile([0.0, 1.0], 4)
    rot = np.stack([-coords[:, 1], coords[:, 0]], axis=1).ravel()
    for mode in (tx, ty, rot):
        assert np.abs(ke @ mode).max() < 1e-12


# -- solver vs dense oracle ----------------------------------------------------

def test_solid_patch_matches_dense_oracle():
    # 8x8 solid patch, left edge fixed, unit downward load at the far corner
    field = image_to_density(np.ones((8, 8), dtype=np.uint8))
    K = assemble_stiffness(field)
    fixed = np.concatenate([2 * np.arange(9), 2 * np.arange(9) + 1])
    f = np.zeros(K.shape[0])
    f[-1] = 1.0
    free = np.setdiff1d(np.arange(K.shape[0]), fixed)
    u_dense = np.linalg.solve(K.toarray()[np.ix_(free, free)], f[free])
    u, iters, res = solve_system(field, f, fixed)
    c_dense = float(f[free] @ u_dense)
    assert abs(float(f @ u) - c_dense) / abs(c_dense) <= 1e-8
    assert res <= perf.CG_TOL
    assert 0 < iters <= 10 * free.size


@pytest.mark.parametrize("resolution", [8, 10, 12])
def test_wheel_compliance_matches_dense_oracle(resolution):
    img = small_wheel(resolution)
    field = image_to_density(img.pixels)
    for load in (LoadCase("normal"), LoadCase("shear")):
        got = compute_compliance(field, load)
        want = dense_compliance(field, load)
        assert abs(got.compliance - want) / abs(want) <= 1e-8
        assert got.compliance > 0
        assert got.residual <= perf.CG_TOL


def test_load_doubling_quadruples_compliance():
    field = image_to_density(small_wheel(12).pixels)
    c1 = compute_compliance(field, LoadCase("normal", 1.0)).compliance
    c2 = compute_compliance(field, LoadCase("normal", 2.0)).compliance
    assert abs(c2 - 4.0 * c1) / (4.0 * c1) <= 1e-10


def test_removing_material_never_decreases_compliance():
    img = small_wheel(16).pixels.copy()
    field = image_to_density(img)
    hub, rim = support_and_rim_nodes(field)
    f = rim_load_vector(field, rim, LoadCase("normal"))
    fixed = np.concatenate([2 * hub, 2 * hub + 1])
    u, _, _ = solve_system(field, f, fixed)
    base = float(f @ u)
    rng = np.random.default_rng(9)
    ys, xs = np.nonzero(img)
    for i in rng.choice(ys.size, size=20, replace=False):
        removed = img.copy()
        removed[ys[i], xs[i]] = 0
        u2, _, _ = solve_system(image_to_density(removed), f, fixed)
        assert float(f @ u2) >= base * (1 - 1e-9)


def test_straight_spokes_stiffer_under_normal_curved_under_shear():
    base = dict(n_sym=6, spokes_per_sector=1, spoke_width=0.09, hub_radius=0.2,
                rim_thickness=0.1, phase=0.05, seed=11)
    straight = generate_wheel(WheelSpec(spoke_curvature=0.0, **base))
    curved = generate_wheel(WheelSpec(spoke_curvature=0.65, **base))
    # nearly equal mass keeps the comparison fair
    assert abs(int(straight.pixels.sum()) - int(curved.pixels.sum())) < 0.02 * straight.pixels.sum()
    results = {}
    for name, img in (("straight", straight), ("curved", curved)):
        field = image_to_density(img.pixels)
        results[name] = (compute_compliance(field, LoadCase("normal")).compliance,
                         compute_compliance(field, LoadCase("shear")).compliance)
    print("normal/shear compliance straight:", results["straight"], "curved:", results["curved"])
    assert results["straight"][0] < results["curved"][0] * 1.05
    assert results["curved"][1] < results["straight"][1] * 1.05


def test_compliance_invariant_under_90_degree_rotation():
    img = generate_wheel(sample_spec(np.random.default_rng(21)), resolution=32).pixels
    for load in (LoadCase("normal"), LoadCase("shear")):
        c0 = compute_compliance(image_to_density(img), load).compliance
        c90 = compute_compliance(image_to_density(np.rot90(img)), load).compliance
        assert abs(c90 - c0) / abs(c0) <= 1e-6


# -- error handling ------------------------------------------------------------

def test_empty_field_raises_structural_error():
    with pytest.raises(StructuralError):
        compute_compliance(image_to_density(np.zeros((8, 8), dtype=np.uint8)), LoadCase("normal"))


def test_missing_support_raises_structural_error():
    # a thin ring has no solid hub core around the center
    gy, gx = np.mgrid[0:16, 0:16]
    d = np.hypot(gy - 7.5, gx - 7.5)
    ring = ((d >= 6) & (d <= 7.5)).astype(np.uint8)
    with pytest.raises(StructuralError):
        compute_compliance(image_to_density(ring), LoadCase("normal"))


def test_no_fixed_dofs_raises_structural_error():
    field = image_to_density(np.ones((4, 4), dtype=np.uint8))
    with pytest.raises(StructuralError):
        solve_system(field, np.zeros(50), np.array([], dtype=int))


def test_unknown_load_kind_rejected():
    field = image_to_density(np.ones((4, 4), dtype=np.uint8))
    with pytest.raises(ValueError):
        rim_load_vector(field, np.array([0]), LoadCase("twist"))


# -- scalar features -----------------------------------------------------------

def test_volume_fraction_solid_disk_is_one():
    gy, gx = np.mgrid[0:33, 0:33]
    disk = (np.hypot(gy - 16, gx - 16) <= 12).astype(np.uint8)
    assert volume_fraction(disk) == 1.0


def test_volume_fraction_annulus_plus_hub_hand_count():
    gy, gx = np.mgrid[0:33, 0:33]
    d = np.hypot(gy - 16, gx - 16)
    img = ((d <= 4) | ((d >= 10) & (d <= 12))).astype(np.uint8)
    inside = d <= 12
    assert volume_fraction(img) == img.sum() / inside.sum()


def test_volume_fraction_monotone_in_added_pixel():
    gy, gx = np.mgrid[0:33, 0:33]
    d = np.hypot(gy - 16, gx - 16)
    img = ((d <= 4) | ((d >= 10) & (d <= 12))).astype(np.uint8)
    before = volume_fraction(img)
    img[16, 23] = 1  # interior background pixel
    assert volume_fraction(img) > before


def test_volume_fraction_empty_image():
    assert volume_fraction(np.zeros((8, 8), dtype=np.uint8)) == 0.0


def test_weight_proxy_trivials():
    assert weight_proxy(np.zeros((5, 5), dtype=np.uint8)) == 0.0
    assert weight_proxy(np.ones((5, 4), dtype=np.uint8)) == 20.0
    a = np.zeros((6, 6), dtype=np.uint8)
    b = np.zeros((6, 6), dtype=np.uint8)
    a[0, 0] = 1
    b[5, 5] = 1
    assert weight_proxy(a | b) == weight_proxy(a) + weight_proxy(b)


def test_extract_performance_features_keys_and_types():
    img = small_wheel(16).pixels
    feats = extract_performance_features(img)
    assert list(feats) == perf.PERF_FEATURE_NAMES
    assert feats["compliance_normal"] > 0 and feats["compliance_shear"] > 0
    assert 0 < feats["volume_fraction"] <= 1
    assert feats["weight"] == img.sum()
