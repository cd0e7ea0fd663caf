"""
Approximate nearest neighbors and the DDIS map
==============================================

The kd-tree trades exactness for speed. Here we look at how far the
approximate matches drift and what that does to localization.
"""

import time

import numpy as np

from ddis import (AnnParams, MatcherConfig, PatchSpec, SyntheticParams, compute_nn_grid,
                  Rect, extract_patch_features, iou, match_grids,
                  render_pair)

src, trect, tgt, truth = render_pair(SyntheticParams(size=128, template_size=32, occlusion_fraction=0.2,
                                                     noise_sigma=0.02, local_jitter=1.0, seed=4))
tpl = src[trect.y:trect.y + trect.h, trect.x:trect.x + trect.w]
T = extract_patch_features(tgt, PatchSpec())
t = extract_patch_features(tpl, PatchSpec())

exact = compute_nn_grid(T, t)
for ann in [None, AnnParams(epsilon=0.0), AnnParams(epsilon=2.0), AnnParams(epsilon=2.0, propagation=True)]:
    t0 = time.perf_counter()
    nn = compute_nn_grid(T, t, ann)
    dt = time.perf_counter() - t0
    res, _, _ = match_grids(T, t, MatcherConfig(ann=ann), template_size=(tpl.shape[1], tpl.shape[0]))
    same = np.mean(nn.nn_index == exact.nn_index)
    slack = np.median(nn.distance / np.maximum(exact.distance, 1e-12))
    label = "exact" if ann is None else f"eps={ann.epsilon} prop={ann.propagation}"
    print(f"{label:22s} {dt * 1e3:6.1f} ms  same NN {same:5.1%}  median dist ratio {slack:.3f}  "
          f"IoU {iou(Rect(*res.rect), truth):.3f}")
