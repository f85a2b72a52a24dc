#!/usr/bin/env python3
# Copyright (c) 2026 The dtdenoise Authors
# SPDX-License-Identifier: Apache-2.0
"""Regenerates tests/data/metric_oracle.json.

Image pairs are derived from a 64-bit LCG that the C++ test reimplements,
so only seeds and the reference PSNR/SSIM values need to be stored. The
reference values come from scikit-image with the standard SSIM settings
(11x11 Gaussian window, sigma 1.5, population statistics, range [0, 1]).
"""
import json
import pathlib

import numpy as np
from skimage.metrics import peak_signal_noise_ratio, structural_similarity

LCG_A = 6364136223846793005
LCG_C = 1442695040888963407
MASK = (1 << 64) - 1

SIZES = [(24, 32, 1), (16, 20, 3), (11, 11, 1), (32, 24, 1), (13, 17, 2)]
AMPS = [0.05, 0.1, 0.2, 0.4]


def lcg_stream(seed: int, n: int) -> np.ndarray:
    out = np.empty(n, dtype=np.float64)
    s = seed & MASK
    for i in range(n):
        s = (LCG_A * s + LCG_C) & MASK
        out[i] = (s >> 40) / float(1 << 24)
    return out


def main() -> None:
    cases = []
    for k in range(50):
        h, w, c = SIZES[k % len(SIZES)]
        amp = AMPS[k % len(AMPS)]
        seed_a = 1000 + 7 * k
        seed_b = 5000 + 11 * k
        n = h * w * c
        a = lcg_stream(seed_a, n)
        b = np.clip(a + amp * (lcg_stream(seed_b, n) - 0.5), 0.0, 1.0)
        ai = a.reshape(h, w, c)
        bi = b.reshape(h, w, c)
        p = peak_signal_noise_ratio(ai, bi, data_range=1.0)
        kw = dict(data_range=1.0, gaussian_weights=True, sigma=1.5,
                  use_sample_covariance=False)
        if c == 1:
            s = structural_similarity(ai[:, :, 0], bi[:, :, 0], **kw)
        else:
            s = structural_similarity(ai, bi, channel_axis=-1, **kw)
        cases.append({"h": h, "w": w, "c": c, "amp": amp, "seed_a": seed_a,
                      "seed_b": seed_b, "psnr": float(p), "ssim": float(s)})

    out = pathlib.Path(__file__).resolve().parents[1] / "tests" / "data" / "metric_oracle.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps({"cases": cases}, indent=1) + "\n")
    print(f"wrote {out} ({len(cases)} cases)")


if __name__ == "__main__":
    main()
