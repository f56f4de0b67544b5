import numpy as np
import pytest
from scipy import ndimage

from wheelpref.morphology import (
    FEATURE_NAMES,
    count_closed_spaces,
    count_joints_and_branches,
    detect_symmetry,
    extract_features,
    skeleton_length,
    skeletonize,
)
from wheelpref.wheel_gen import WheelSpec, generate_wheel, rotate_image, sample_spec

EIGHT = np.ones((3, 3))


def euler_closed_spaces(pixels):
    """Independent oracle: holes = components - (V - E + F) of the pixel complex."""
    fg = np.asarray(pixels) > 0
    h, w = fg.shape
    faces = int(fg.sum())
    verts = np.zeros((h + 1, w + 1), dtype=bool)
    for dr in (0, 1):
        for dc in (0, 1):
            verts[dr : dr + h, dc : dc + w] |= fg
    hedges = np.zeros((h + 1, w), dtype=bool)
    hedges[:-1] |= fg
    hedges[1:] |= fg
    vedges = np.zeros((h, w + 1), dtype=bool)
    vedges[:, :-1] |= fg
    vedges[:, 1:] |= fg
    edges = int(hedges.sum() + vedges.sum())
    comps = ndimage.label(fg, structure=EIGHT)[1]
    return comps - (int(verts.sum()) - edges + faces)


def grid(rows):
    return np.array([[1 if ch == "#" else 0 for ch in row] for row in rows], dtype=np.uint8)


def annulus(n=64, r0=20, r1=26):
    c = np.arange(n) + 0.5 - n / 2.0
    d = np.hypot(*np.meshgrid(c, c))
    return ((d >= r0) & (d <= r1)).astype(np.uint8)


def wheels(count, seed):
    rng = np.random.default_rng(seed)
    return [(s := sample_spec(rng), generate_wheel(s)) for _ in range(count)]


# -- skeletonize --------------------------------------------------------------


def test_thin_line_unchanged():
    img = np.zeros((7, 9), dtype=np.uint8)
    img[3, 1:8] = 1
    assert np.array_equal(skeletonize(img), img)


def test_solid_square_skeleton():
    img = np.zeros((11, 11), dtype=np.uint8)
    img[1:10, 1:10] = 1
    sk = skeletonize(img)
    assert (img[sk == 1] == 1).all()
    assert ndimage.label(sk, structure=EIGHT)[1] == 1


def test_empty_image_empty_skeleton():
    assert skeletonize(np.zeros((8, 8), dtype=np.uint8)).sum() == 0


def test_skeleton_is_thin_and_contained():
    for _, img in wheels(10, seed=3):
        sk = skeletonize(img.pixels)
        assert (img.pixels[sk == 1] == 1).all()
        blocks = sk[:-1, :-1] & sk[:-1, 1:] & sk[1:, :-1] & sk[1:, 1:]
        assert not blocks.any()


def test_skeletonize_preserves_topology():
    for _, img in wheels(50, seed=4):
        sk = skeletonize(img.pixels)
        assert ndimage.label(sk, structure=EIGHT)[1] == ndimage.label(img.pixels, structure=EIGHT)[1]
        assert count_closed_spaces(sk) == count_closed_spaces(img.pixels)


def test_skeleton_length_matches_double_loop():
    for _, img in wheels(5, seed=5):
        sk = skeletonize(img.pixels)
        naive = sum(1 for r in range(sk.shape[0]) for c in range(sk.shape[1]) if sk[r, c])
        assert skeleton_length(sk) == naive


# -- closed spaces ------------------------------------------------------------


def test_annulus_has_one_closed_space():
    assert count_closed_spaces(annulus()) == 1


def test_solid_disk_has_none():
    n = 32
    c = np.arange(n) + 0.5 - n / 2.0
    d = np.hypot(*np.meshgrid(c, c))
    assert count_closed_spaces((d <= 12).astype(np.uint8)) == 0


def test_wheel_without_curvature_has_one_hole_per_spoke():
    spec = WheelSpec(n_sym=6, spokes_per_sector=1, spoke_width=0.08, spoke_curvature=0.0,
                     hub_radius=0.2, rim_thickness=0.1, phase=0.1, seed=4)
    img = generate_wheel(spec)
    assert count_closed_spaces(img.pixels) == 6


def test_closed_spaces_match_euler_oracle():
    for _, img in wheels(30, seed=6):
        assert count_closed_spaces(img.pixels) == euler_closed_spaces(img.pixels)
    assert count_closed_spaces(annulus()) == euler_closed_spaces(annulus())


def test_diagonal_gap_does_not_open_a_hole():
    # background cells meeting only at a corner stay separated (8/4 duality)
    img = grid([
        "####",
        "#.##",
        "##.#",
        "####",
    ])
    assert count_closed_spaces(img) == euler_closed_spaces(img) == 2


# -- joints -------------------------------------------------------------------


def test_plus_sign_joint():
    img = grid([
        "..#..",
        "..#..",
        "#####",
        "..#..",
        "..#..",
    ])
    assert count_joints_and_branches(img) == (1, 4)


def test_straight_line_no_joint():
    img = np.zeros((5, 7), dtype=np.uint8)
    img[2, 1:6] = 1
    assert count_joints_and_branches(img) == (0, 0)


def test_y_shape_joint():
    img = grid([
        "#...#",
        ".#.#.",
        "..#..",
        "..#..",
        "..#..",
    ])
    assert count_joints_and_branches(img) == (1, 3)


def test_branch_total_at_least_three_per_joint():
    for _, img in wheels(8, seed=7):
        joints, branches = count_joints_and_branches(skeletonize(img.pixels))
        if joints > 0:
            assert branches >= 3 * joints


# -- symmetry -----------------------------------------------------------------


def test_plain_annulus_ties_to_thirteen():
    assert detect_symmetry(annulus()) == 13


def test_generated_wheels_recovered():
    hits = 0
    cases = wheels(120, seed=8)
    for spec, img in cases:
        hits += detect_symmetry(img.pixels) == spec.n_sym
    assert hits >= 115


def test_symmetry_rotation_invariant():
    for spec, img in wheels(6, seed=9):
        want = detect_symmetry(img.pixels)
        for k in (1, 2, 3):
            assert detect_symmetry(rotate_image(img.pixels, k * np.pi / 2.0)) == want


def test_degenerate_inputs_rejected():
    with pytest.raises(ValueError):
        detect_symmetry(np.zeros((64, 64), dtype=np.uint8))
    n = 64
    c = np.arange(n) + 0.5 - n / 2.0
    d = np.hypot(*np.meshgrid(c, c))
    with pytest.raises(ValueError):
        detect_symmetry((d <= 20).astype(np.uint8))  # hub only, nothing beyond


def test_extract_features_names_and_types():
    _, img = wheels(1, seed=10)[0]
    feats = extract_features(img.pixels)
    assert list(feats.keys()) == FEATURE_NAMES
    assert all(v >= 0 for v in feats.values())
