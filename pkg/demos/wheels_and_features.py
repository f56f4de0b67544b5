#!/usr/bin/env python3
# Generate a handful of procedural wheel designs and print the feature
# vector the preference pipeline is built on.

import numpy as np

from wheelpref import morphology, performance
from wheelpref.wheel_gen import generate_wheel, sample_spec


def ascii_art(pixels):
    return "\n".join("".join("#" if v else "." for v in row) for row in pixels)


def main():
    rng = np.random.default_rng(7)
    specs = [sample_spec(rng) for _ in range(4)]

    first = generate_wheel(specs[0], resolution=40).pixels
    print("one sampled wheel (40x40):")
    print(ascii_art(first))
    print()

    header = morphology.FEATURE_NAMES + performance.PERF_FEATURE_NAMES
    print("  ".join(f"{h:>17s}" for h in header))
    for spec in specs:
        img = generate_wheel(spec, resolution=40).pixels
        feats = morphology.extract_features(img)
        feats.update(performance.extract_performance_features(img))
        print("  ".join(f"{feats[h]:17.4g}" for h in header))
        print(f"    spec: n_sym={spec.n_sym} hub={spec.hub_radius:.2f} "
              f"rim={spec.rim_thickness:.2f} curvature={spec.spoke_curvature:+.2f}")


if __name__ == "__main__":
    main()
