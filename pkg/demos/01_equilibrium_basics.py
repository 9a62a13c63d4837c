"""Equilibrium basics: closed forms, a synthetic market, and the uniqueness certificate.

Run with ``python3 demos/01_equilibrium_basics.py``.
"""

# %% Symmetric contest with a single user
# n identical creators with linear cost c split one user evenly at equilibrium,
# and the first-order condition pins x* = (n - 1) / (c n^2).
import numpy as np

from cournot_c4 import SolverConfig, SyntheticParams, dsc_hessian, generate_synthetic_env, load_env, solve_pne, welfare
from cournot_c4.fixtures import fixture_path

for name, n, c in [("tullock_n2", 2, 0.25), ("tullock_n4", 4, 0.3)]:
    env = load_env(fixture_path(name))
    res = solve_pne(env, beta=1.0, config=SolverConfig(tol=1e-10))
    print(f"{name}: solved x* = {res.x_star[0]:.8f}, closed form {(n - 1) / (c * n**2):.8f}, {res.iterations} steps")

# %% A clustered synthetic market
# 200 creators and 1000 users scattered around 50 shared topics.
env = generate_synthetic_env(SyntheticParams(seed=0))
print(f"\nsynthetic market: n={env.n} creators, m={env.m} users")
for beta in (0.0, 10.0, 100.0):
    res = solve_pne(env, beta)
    rep = welfare(env, res.x_star, beta)
    active = int((res.x_star > 1e-3).sum())
    print(f"beta={beta:6.1f}: U={rep.U:8.2f}  V={rep.V:8.2f}  W={rep.W:8.2f}  active creators={active:3d}")

# %% Why the answer does not depend on where the solver starts
# The negated symmetrized game Hessian is positive definite everywhere, which
# makes the equilibrium unique. Spot-check it on a 16-creator slice.
small = generate_synthetic_env(SyntheticParams(n=16, m=100, seed=1))
rng = np.random.default_rng(0)
worst = min(dsc_hessian(small, rng.uniform(0, 50, small.m), rng.uniform(0.01, 5, small.n))[1] for _ in range(50))
print(f"\nsmallest Hessian eigenvalue over 50 random points: {worst:.4f} (> 0)")

a = solve_pne(small, 20.0, SolverConfig(tol=1e-8, x0=0.05))
b = solve_pne(small, 20.0, SolverConfig(tol=1e-8, x0=4.0))
print(f"two starts agree to {np.max(np.abs(a.x_star - b.x_star)):.2e}")
