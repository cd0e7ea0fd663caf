"""
Diversity measures on small point sets
======================================

Counting how many distinct template points get used as nearest neighbors
says a lot about whether two sets came from the same distribution.
"""

import numpy as np

from ddis import PointSet, bbs, dis, ddis, kappa

rng = np.random.default_rng(0)

# Two samples of the same distribution, and one shifted copy
P = rng.normal(size=(40, 2))
Q_same = rng.normal(size=(40, 2))
Q_far = rng.normal(size=(40, 2)) + 3.0

for name, Q in [("same", Q_same), ("shifted", Q_far)]:
    print(f"{name:8s} BBS {bbs(P, Q):.3f}  DIS {dis(Q, P):.3f}  DDIS {ddis(Q, P):.3f}")

# kappa counts how often each template point was picked.
# A shifted set piles onto the few points on the near edge of P.
k = kappa(Q_far, P)
print("points used by shifted Q:", np.count_nonzero(k), "of", len(P), " max kappa:", k.max())

###############################################################################
# When every used template point is picked exactly k times, DIS is 1/k and
# DDIS (no locations) is exp(1 - k).

P1 = np.arange(60, dtype=float)
for k in (1, 2, 5, 20):
    Q1 = np.repeat(P1[: 60 // k], k) + 0.25
    print(f"k={k:2d}  DIS {dis(Q1, P1):.4f}  DDIS {ddis(Q1, P1):.3e}  exp(1-k) {np.exp(1 - k):.3e}")

###############################################################################
# Locations: the same appearance match scores less when it lands far away.

loc = rng.uniform(0, 10, size=(40, 2))
same_place = ddis(PointSet(P, loc), PointSet(P, loc))
moved = ddis(PointSet(P, loc), PointSet(P, loc + 3.0))
print(f"DDIS same layout {same_place:.3f}, layout moved by 3 {moved:.3f}")
