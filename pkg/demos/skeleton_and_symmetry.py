#!/usr/bin/env python3
# Morphology internals on a single wheel: skeletonization, joint and closed
# space counts, and the rotational symmetry detector.

import numpy as np

from wheelpref import morphology
from wheelpref.wheel_gen import WheelSpec, generate_wheel


def ascii_art(pixels):
    return "\n".join("".join("#" if v else "." for v in row) for row in pixels)


def main():
    spec = WheelSpec(n_sym=6, spokes_per_sector=1, spoke_width=0.09,
                     spoke_curvature=0.3, hub_radius=0.18, rim_thickness=0.1,
                     phase=0.2, seed=11)
    img = generate_wheel(spec, resolution=36).pixels

    skel = morphology.skeletonize(img)
    joints, branches = morphology.count_joints_and_branches(skel)

    print("wheel raster:")
    print(ascii_art(img))
    print("\nits skeleton:")
    print(ascii_art(skel))

    print("\nskeleton length :", morphology.skeleton_length(skel))
    print("closed spaces   :", morphology.count_closed_spaces(img))
    print("joints          :", joints)
    print("joint branches  :", branches)

    scores = morphology.symmetry_scores(img)
    print("\nsymmetry scores by candidate order:")
    for m in sorted(scores):
        bar = "*" * int(round(40 * scores[m]))
        print(f"  {m:2d}: {scores[m]:.3f} {bar}")
    print("detected order  :", morphology.detect_symmetry(img),
          f"(generated with n_sym={spec.n_sym})")

    plus = np.array([[0, 0, 1, 0, 0],
                     [0, 0, 1, 0, 0],
                     [1, 1, 1, 1, 1],
                     [0, 0, 1, 0, 0],
                     [0, 0, 1, 0, 0]], dtype=np.uint8)
    j, b = morphology.count_joints_and_branches(morphology.skeletonize(plus))
    print(f"\nsanity fixture: a plus sign has {j} joint with {b} branches")


if __name__ == "__main__":
    main()
