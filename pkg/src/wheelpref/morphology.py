"""Morphology features: skeleton statistics, closed spaces, and a
deterministic rotational-symmetry detector.

detect_symmetry compares the wheel against itself rotated by 360/m for
each candidate order m in 4..13. Both operands are rotated by half the
test angle in opposite directions so raster aliasing hits them equally;
otherwise lattice-exact rotations (90, 180 degrees) would score divisor
orders strictly above the true one. Overlap tolerates sub-pixel coverage
jitter but not whole-pixel displacement, and near-ties resolve to the
largest order, which also settles divisor ties (a 12-fold wheel matches
m = 4 and 6 exactly).
"""

import numpy as np
from scipy import ndimage

SYMMETRY_ORDERS = range(4, 14)
TIE_WINDOW = 0.075
COVER_LEVEL = 0.3
COVER_TOL = 0.5
FEATURE_NAMES = ["symmetry_count", "skeleton_length", "closed_spaces",
                 "joints", "joint_branches"]


# -- skeletonization ----------------------------------------------------------

_NBR_SHIFTS = [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)]


def _neighbors(img):
    """The 8 neighbor planes P2..P9 (N, NE, E, SE, S, SW, W, NW)."""
    p = np.pad(img, 1)
    h, w = img.shape
    return [p[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w] for dr, dc in _NBR_SHIFTS]


def _ring(padded, r, c):
    """Neighbor values clockwise from north for the pixel at padded (r, c)."""
    return [padded[r - 1, c], padded[r - 1, c + 1], padded[r, c + 1],
            padded[r + 1, c + 1], padded[r + 1, c], padded[r + 1, c - 1],
            padded[r, c - 1], padded[r - 1, c - 1]]


# ring cell adjacency: consecutive positions always touch; orthogonal
# positions (even) also touch the next orthogonal across the corner
_RING_ADJ = [[(i + 1) % 8, (i - 1) % 8] + ([(i + 2) % 8, (i - 2) % 8] if i % 2 == 0 else [])
             for i in range(8)]


def _simple(seq):
    """Exact (8, 4)-simplicity: one 8-component of foreground neighbors and
    one 4-component of background among the orthogonal neighbors; endpoints
    (single neighbor) are protected."""
    fg = [i for i in range(8) if seq[i] == 1]
    if len(fg) < 2 or len(fg) == 8:
        return False
    seen = {fg[0]}
    stack = [fg[0]]
    while stack:
        for j in _RING_ADJ[stack.pop()]:
            if seq[j] == 1 and j not in seen:
                seen.add(j)
                stack.append(j)
    if len(seen) != len(fg):
        return False
    # background 4-components: orthogonals connect through a background corner
    bg_orth = [i for i in (0, 2, 4, 6) if seq[i] == 0]
    if not bg_orth:
        return False
    comps = 0
    unvisited = set(bg_orth)
    while unvisited:
        comps += 1
        stack = [unvisited.pop()]
        while stack:
            i = stack.pop()
            for step in (1, -1):
                j = (i + 2 * step) % 8
                corner = (i + step) % 8
                if j in unvisited and seq[corner] == 0:
                    unvisited.remove(j)
                    stack.append(j)
    return comps == 1


def _delete_candidates(img, candidates):
    """Sequentially delete candidate pixels that are still simple points.

    Candidate masks come from a snapshot; re-checking simplicity on the live
    image is what makes the thinning homotopy-preserving.
    """
    padded = np.pad(img, 1)
    removed = 0
    for r, c in zip(*np.nonzero(candidates)):
        if _simple(_ring(padded, r + 1, c + 1)):
            padded[r + 1, c + 1] = 0
            removed += 1
    return padded[1:-1, 1:-1], removed


def _thin_candidates(img, step):
    n = _neighbors(img)
    b = sum(n)
    ring = np.stack(n + [n[0]])
    a = np.sum((ring[:-1] == 0) & (ring[1:] == 1), axis=0)
    p2, p4, p6, p8 = n[0], n[2], n[4], n[6]
    if step == 0:
        c1, c2 = p2 * p4 * p6, p4 * p6 * p8
    else:
        c1, c2 = p2 * p4 * p8, p2 * p6 * p8
    return (img == 1) & (b >= 2) & (b <= 6) & (a == 1) & (c1 == 0) & (c2 == 0)


def skeletonize(pixels):
    """Zhang-Suen style thinning; preserves components and holes of the foreground."""
    img = (np.asarray(pixels) > 0).astype(np.uint8)
    while True:
        removed = 0
        for step in (0, 1):
            img, n = _delete_candidates(img, _thin_candidates(img, step))
            removed += n
        if removed == 0:
            break
    # clear any leftover full 2x2 blocks (still only deleting simple points)
    while True:
        blocks = img[:-1, :-1] & img[:-1, 1:] & img[1:, :-1] & img[1:, 1:]
        if not blocks.any():
            break
        mask = np.zeros_like(img)
        for dr in (0, 1):
            for dc in (0, 1):
                mask[dr : dr + blocks.shape[0], dc : dc + blocks.shape[1]] |= blocks
        img, n = _delete_candidates(img, (img == 1) & (mask == 1))
        if n == 0:
            unlocked = _unlock_blocks(img, (np.asarray(pixels) > 0).astype(np.uint8))
            if np.array_equal(unlocked, img):
                break
            img = unlocked
    return img


def _unlock_blocks(img, orig):
    """Break locked 2x2 blocks where no single pixel is simple.

    Adds one simple pixel from the source foreground next to the block, which
    can make a block pixel simple, then deletes it. Both moves preserve
    topology, so the result stays homotopic to the source."""
    padded = np.pad(img, 1)
    orig_p = np.pad(orig, 1)
    for _ in range(10):
        blocks = padded[:-1, :-1] & padded[:-1, 1:] & padded[1:, :-1] & padded[1:, 1:]
        locs = sorted(zip(*np.nonzero(blocks)))
        progress = False
        for r, c in locs:
            cells = [(r + dr, c + dc) for dr in (0, 1) for dc in (0, 1)]
            if not all(padded[p] for p in cells):
                continue
            around = sorted({(p[0] + dr, p[1] + dc) for p in cells
                             for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1))}
                            - set(cells))
            for q in around:
                if padded[q] or not orig_p[q] or not _simple(_ring(padded, *q)):
                    continue
                padded[q] = 1
                deleted = []
                for p in cells:
                    if padded[p] and _simple(_ring(padded, *p)):
                        padded[p] = 0
                        deleted.append(p)
                if deleted and not all(padded[p] for p in cells):
                    progress = True
                    break
                for p in deleted:
                    padded[p] = 1
                padded[q] = 0
            if progress:
                break
        if not progress:
            break
    return padded[1:-1, 1:-1]


def skeleton_length(skel):
    return int(np.asarray(skel).sum())


# -- topology -----------------------------------------------------------------

_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


def count_closed_spaces(pixels):
    """4-connected background components that do not touch the image border."""
    bg = np.asarray(pixels) == 0
    labels, count = ndimage.label(bg, structure=_CROSS)
    border = np.unique(np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]]))
    return int(count - np.count_nonzero(border))


def count_joints_and_branches(skel):
    """Joint clusters (pixels with >= 3 skeleton neighbors, 8-merged) and the
    branch pixels leaving each cluster. Clusters with fewer than 3 exits are
    bends or local thickenings, not intersections, and are not counted."""
    img = (np.asarray(skel) > 0).astype(np.uint8)
    nbr_count = sum(_neighbors(img))
    hot = (img == 1) & (nbr_count >= 3)
    labels, count = ndimage.label(hot, structure=np.ones((3, 3)))
    joints = 0
    branches = 0
    for lab in range(1, count + 1):
        cluster = labels == lab
        around = ndimage.binary_dilation(cluster, structure=np.ones((3, 3)))
        exits = int(np.count_nonzero((img == 1) & around & ~cluster))
        if exits >= 3:
            joints += 1
            branches += exits
    return joints, branches


# -- symmetry -----------------------------------------------------------------


def _soft_rotate(px, angle, sub=4):
    """Area-sampled rotation: each output pixel averages sub*sub source lookups."""
    h, w = px.shape
    off = (np.arange(sub) + 0.5) / sub
    rows = (np.arange(h)[:, None] + off[None, :]).ravel() - h / 2.0
    cols = (np.arange(w)[:, None] + off[None, :]).ravel() - w / 2.0
    yy, xx = np.meshgrid(rows, cols, indexing="ij")
    ca, sa = np.cos(angle), np.sin(angle)
    sx = ca * xx + sa * yy + w / 2.0
    sy = -sa * xx + ca * yy + h / 2.0
    ci = np.clip(np.floor(sx).astype(int), 0, w - 1)
    ri = np.clip(np.floor(sy).astype(int), 0, h - 1)
    inside = (sx >= 0) & (sx < w) & (sy >= 0) & (sy < h)
    vals = np.where(inside, px[ri, ci], 0).astype(float)
    return vals.reshape(h, sub, w, sub).mean(axis=(1, 3))


def symmetry_scores(pixels):
    """Normalized rotational overlap per candidate order, on the annulus
    between the hub core and the rim (full fg extent when that band is empty)."""
    px = (np.asarray(pixels) > 0).astype(np.uint8)
    n = px.shape[0]
    c = np.arange(n) + 0.5 - n / 2.0
    d = np.hypot(*np.meshgrid(c, c))
    bg, fg = d[px == 0], d[px > 0]
    if fg.size == 0:
        raise ValueError("detect_symmetry: empty image")
    rh = bg.min() if bg.size else 0.0
    r_fg = fg.max()
    if not (fg > rh + 1.0).any():
        raise ValueError("detect_symmetry: no foreground beyond the hub core")
    inner_bg = bg[bg < r_fg]
    r_rim = inner_bg.max() if inner_bg.size else rh
    dom = (d > rh) & (d < r_rim)
    if not (px[dom] > 0).any():
        dom = (d > rh) & (d <= r_fg + 1.0)
    scores = {}
    for m in SYMMETRY_ORDERS:
        a = _soft_rotate(px, np.pi / m)[dom]
        b = _soft_rotate(px, -np.pi / m)[dom]
        rel = (a > COVER_LEVEL) | (b > COVER_LEVEL)
        total = np.count_nonzero(rel)
        if total == 0:
            raise ValueError("detect_symmetry: no foreground in the annulus")
        scores[m] = np.count_nonzero((np.abs(a - b) <= COVER_TOL) & rel) / total
    return scores


def detect_symmetry(pixels):
    scores = symmetry_scores(pixels)
    best = max(scores.values())
    return max(m for m, v in scores.items() if v >= best - TIE_WINDOW)


def extract_features(pixels):
    """The five morphology features as an ordered dict (FEATURE_NAMES order)."""
    skel = skeletonize(pixels)
    joints, branches = count_joints_and_branches(skel)
    return {
        "symmetry_count": detect_symmetry(pixels),
        "skeleton_length": skeleton_length(skel),
        "closed_spaces": count_closed_spaces(pixels),
        "joints": joints,
        "joint_branches": branches,
    }
