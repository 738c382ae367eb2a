"""
The 2x2 closed form
===================

Both pairwise solvers reduce their sub-problem to minimizing
``p1^H G1 p1 + p2^H G2 p2 - log|det P|^2`` over 2x2 matrices ``P``.
Its minimizer comes from the eigenvectors of ``G1^{-1} G2`` without any
iteration. Here it is compared against random search, and the pair update
is compared against a long run of single-row updates.
"""

import numpy as np

from mmiva.core import build_covariances, surrogate_value, whiten_init
from mmiva.ip import ip1_pass, ip2_pass
from mmiva.iss import block_objective, solve_2x2

rng = np.random.default_rng(0)


def hpd(rng):
    A = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    return A @ A.conj().T + 0.1 * np.eye(2)


G = np.stack([hpd(rng), hpd(rng)])
sol = solve_2x2(G[0], G[1], full=True)
print("eigenvalues of G1^-1 G2:", np.round(sol.theta, 4))
print("objective at the closed form: %.6f" % block_objective(sol.P, G))

# no random matrix does better
cand = rng.normal(size=(20000, 2, 2)) + 1j * rng.normal(size=(20000, 2, 2))
best = min(block_objective(P, G) for P in cand)
print("best of 20000 random candidates: %.6f" % best)

# with two channels a single pair update solves the whole surrogate
X = rng.normal(size=(1, 2, 50)) + 1j * rng.normal(size=(1, 2, 50))
lam = rng.uniform(0.2, 3.0, size=(2, 50))
V = build_covariances(X, lam)
W2 = whiten_init(X)[0]
ip2_pass(X, W2, lam)
W1 = whiten_init(X)[0]
for sweep in range(1, 1001):
    ip1_pass(X, W1, lam)
print("pair update, once:        %.12f" % surrogate_value(W2, V)[0])
print("row updates, 1000 sweeps: %.12f" % surrogate_value(W1, V)[0])
