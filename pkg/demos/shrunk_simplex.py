"""
Keeping probes inside the simplex
=================================

When the oracle is only defined on the simplex, the method runs on a
shrunk copy whose points all have coordinates at least alpha.  A probe
radius up to the clearance then keeps z +- tau e feasible.  The gap on the
original simplexes exceeds the gap on the shrunk ones by at most the
displacement bound times M.
"""

import numpy as np

from zospa import (
    DirectionSampler,
    Simplex,
    default_geometry,
    generate_section4_matrix,
    resolve_shrink_plan,
    resolve_tau_delta,
    run_chains,
)

simplex = Simplex(10)
alpha = 0.02
inner = simplex.shrink(alpha)
rng = np.random.default_rng(0)
Z = inner.sample_points(rng, 10_000)
E = DirectionSampler(simplex, 1).sample_many(10_000)
tau = simplex.clearance(alpha)
print("all probes feasible:", bool(np.all(simplex.contains(Z + tau * E, 1e-12))))

game = generate_section4_matrix(20, 20, seed=3)
s = game.feasible_set
M = game.lipschitz_M
plan = resolve_shrink_plan(s, eps=0.5, M=M)
tau, _ = resolve_tau_delta(0.5, M, s, neighborhood_defined=False)
tau = min(tau, plan.tau_max)
print(f"alpha={plan.alpha:.3g} tau={tau:.3g} displacement r={plan.r_bound:.3g}")

shrunk = s.shrink(plan.alpha)
(res,) = run_chains(game, shrunk, default_geometry(shrunk), method="zospa", iterations=20_000, seeds=[0],
                    step="theory", tau=tau, domain=s, gap_set=shrunk, M=M)
g_shrunk = res.trace[-1].gap
g_full = game.saddle_gap(res.z_bar.x, res.z_bar.y)
print(f"gap on shrunk set {g_shrunk:.4f}, on original set {g_full:.4f}, "
      f"allowed {g_shrunk + plan.r_bound * M:.4f}")
