"""
The modified GLR statistic
==========================

Z[l, m] compares the prior-averaged likelihood of hypothesis l against the
maximised likelihood of hypothesis m.  Under the true hypothesis the row
minimum z_min(l) grows linearly, at rate D* when arms are sampled at lam*.
"""

import numpy as np

from seqbandit import expfam
from seqbandit.glr import PosteriorState, z_matrix, z_mins
from seqbandit.hypotheses import OddArm
from seqbandit.oracle import optimal_weights

np.set_printoptions(precision=2, suppress=True)
rng = np.random.default_rng(0)

model = expfam.GaussianKnownVariance(1.0)
K = 4
s = OddArm(model, K)
etas = np.ones((K, 1))
etas[2] = 0.0                       # arm 2 is the odd one

lam = optimal_weights(s, 2, etas).lam_star
print("lam* =", lam)

# sample arms at lam* and watch the scores
state = PosteriorState.empty(model, K, kappa_ref=[0.75])
for n in range(1, 2001):
    arm = rng.choice(K, p=lam)
    state.update(arm, model.sample(etas[arm], rng))
    if n in (10, 100, 500, 2000):
        z = z_mins(s, state)
        print(f"n = {n:5d}  z_min = {z}  leader = {int(np.argmax(z))}  z_min[2] / n = {z[2] / n:.4f}")

print("D* =", optimal_weights(s, 2, etas).d_star)

# Z[l, m] + Z[m, l] <= 0 always: an averaged likelihood never beats a maximised one
Z = z_matrix(s, state)
print("max Z + Z^T off the diagonal:", np.nanmax(Z + Z.T))
