#!/usr/bin/env python3
"""Regenerates data/human_hand_right.json (schema ehm-1).

The PCA basis is a fixed random Gaussian matrix, orthonormalized by QR and
scaled to 0.5 rad per unit coefficient. Output is deterministic.
"""
import json
import pathlib

import numpy as np

SEED = 20250415
BASIS_SCALE = 0.5

FINGERS = [
    # name, palm offset (m), rest direction, segment lengths (m)
    ("thumb", [0.030, 0.020, -0.010], [0.70710678118654757, 0.70710678118654757, 0.0], [0.040, 0.032, 0.028]),
    ("index", [0.025, 0.090, 0.000], [0.0, 1.0, 0.0], [0.045, 0.025, 0.022]),
    ("middle", [0.005, 0.095, 0.000], [0.0, 1.0, 0.0], [0.048, 0.028, 0.023]),
    ("ring", [-0.015, 0.090, 0.000], [0.0, 1.0, 0.0], [0.045, 0.027, 0.022]),
    ("pinky", [-0.033, 0.080, 0.000], [0.0, 1.0, 0.0], [0.035, 0.020, 0.019]),
]

# Mild rest curl: each finger joint flexes 0.15 rad toward the palm (-x axis).
REST_FLEX = 0.15


def main():
    rng = np.random.default_rng(SEED)
    q, _ = np.linalg.qr(rng.standard_normal((45, 15)))
    basis = BASIS_SCALE * q

    mean = np.zeros(45)
    for f in range(1, 5):
        for s in range(3):
            mean[3 * (3 * f + s)] = -REST_FLEX
    for s in range(3):
        mean[3 * s + 2] = REST_FLEX

    model = {
        "schema": "ehm-1",
        "handedness": "right",
        "fingers": [
            {"name": n, "palm_offset": o, "direction": d, "segment_lengths": l}
            for n, o, d, l in FINGERS
        ],
        "mean_pose": [round(float(v), 15) for v in mean],
        "pca_basis": [[round(float(v), 15) for v in row] for row in basis],
    }
    out = pathlib.Path(__file__).resolve().parent.parent / "data" / "human_hand_right.json"
    out.write_text(json.dumps(model, indent=1) + "\n")
    print(out)


if __name__ == "__main__":
    main()
