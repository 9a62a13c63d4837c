"""How the exploration strength trades user satisfaction against creation volume.

Run with ``python3 demos/02_exploration_sweep.py``.
"""

# %% Sweep a shared beta
# Large beta routes users to their most relevant creators, which raises
# satisfaction U but lets weaker creators give up, shrinking volume V.
import numpy as np

from cournot_c4 import SolverConfig, SyntheticParams, generate_synthetic_env, random_env, sweep_beta

env = generate_synthetic_env(SyntheticParams(n=100, m=400, seed=0))
grid = [0, 2, 5, 10, 20, 40, 80, 160]
rows = sweep_beta(env, grid, lam=0.5)
print(f"{'beta':>6} {'U':>9} {'V':>9} {'W':>9}")
for r in rows:
    print(f"{r.beta:6.1f} {r.U:9.2f} {r.V:9.2f} {r.W:9.2f}")
best = max(rows, key=lambda r: r.W)
print(f"best shared beta on this grid: {best.beta} (W={best.W:.2f})")

# %% The single-user case
# With one user, U rises strictly with beta and V falls once past its peak.
grid = [0.5 * k for k in range(21)]
rows = sweep_beta(random_env(20, 1, seed=0), grid, 0.5, SolverConfig(tol=1e-10, max_iter=100_000))
U = np.array([r.U for r in rows])
V = np.array([r.V for r in rows])
peak = int(np.argmax(V))
print(f"\nsingle user: U strictly increasing: {bool(np.all(np.diff(U) > 0))}; "
      f"V peaks at beta={grid[peak]} and decreases afterwards: {bool(np.all(np.diff(V[peak:]) < 0))}")
