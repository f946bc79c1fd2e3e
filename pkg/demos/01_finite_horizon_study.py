#!/usr/bin/env python3
"""Finite-horizon study on the bundled vehicle-tracking model.

Walks through the core workflow: solve the coupled backward recursions for a
100-step horizon, read off the feedback gains, evaluate the closed-form
optimal cost, and confirm it against seeded Monte Carlo.  Then sweeps the
drop probability to show how the optimal energy cost grows as the link gets
worse, and records the commanded velocity of one rollout per drop rate.
"""

import numpy as np

from ncslqg import (SimConfig, backward_recursion, cost_sweep, finite_optimal_cost,
                    monte_carlo, rollout, uav_model, write_curve_csv)

N = 100

model = uav_model()
print(f"plant: x' = x + vL + vR + w, weights Q={model.Q[0,0]}, R={model.RL[0,0]}, "
      f"start {model.x0_mean[0]:+.0f} from the target, drop probability p={model.p}")

sol = backward_recursion(model, N)
print(f"\nstationary-looking gains appear quickly going backward from the horizon:")
for k in (N, N - 1, N - 10, 50, 0):
    K = sol.K[k].ravel()
    corr = np.linalg.solve(sol.Lambda[k], sol.M[k]).ravel()
    print(f"  k={k:3d}: K=[{K[0]:+.5f} {K[1]:+.5f}]  Lambda^-1 M=[{corr[0]:+.5f}]")

cost = finite_optimal_cost(model, sol)
agg = monte_carlo(model, sol, SimConfig(seed=7, rollouts=10_000, horizon=N))
print(f"\nclosed-form optimal cost : {cost:.4f}")
print(f"Monte Carlo (10k rollouts): {agg.mean_total_cost:.4f} "
      f"+/- {agg.cost_std_error:.4f}")

print("\noptimal cost vs drop probability (nondecreasing):")
table = cost_sweep(model, N, [round(0.1 * i, 12) for i in range(11)])
for p, c in table:
    bar = "#" * int((c - table[0][1]) * 8 + 1)
    print(f"  p={p:3.1f}  J*={c:9.4f}  {bar}")

curves = []
for p in (0.0, 0.5, 1.0):
    m_p = uav_model(p)
    tr = rollout(m_p, backward_recursion(m_p, N),
                 SimConfig(seed=7, rollouts=1, horizon=N), 0)
    curves.append((f"p{p:g}", tr.u_local[:, 0] + tr.u_remote[:, 0]))
write_curve_csv("velocity_by_drop_rate.csv", curves)
print("\nwrote velocity_by_drop_rate.csv (series,k,value)")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for name, v in curves:
        ax1.plot(v, label=name)
    ax1.set_xlabel("k"), ax1.set_ylabel("commanded velocity"), ax1.legend()
    ax2.plot([p for p, _ in table], [c for _, c in table], "o-")
    ax2.set_xlabel("drop probability p"), ax2.set_ylabel("optimal cost")
    fig.tight_layout()
    fig.savefig("finite_horizon_study.png", dpi=120)
    print("wrote finite_horizon_study.png")
except ImportError:
    pass
