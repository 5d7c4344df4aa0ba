"""
Solving a random matrix game from function values only
======================================================

A 100 x 100 game with one boosted row is solved twice with the same step
size: once with exact gradients (mirror descent) and once with the
two-point zeroth-order estimator.  The LP value of the game is printed for
reference.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from zospa import default_geometry, generate_section4_matrix, matrix_game_value, run_chains

game = generate_section4_matrix(100, 100, seed=1)
s = game.feasible_set
geometry = default_geometry(s)  # entropy on both simplexes
value, x_star, y_star = matrix_game_value(game.C)
print(f"game value {value:.4f}; boosted row {game.generator_spec['boosted_row']}")

# the zeroth-order run works on a slightly shrunk simplex so that every
# probe z +- tau e stays a probability vector
N, seeds = 10_000, range(4)
zo = run_chains(game, s.shrink(1e-4), geometry, method="zospa", iterations=N, seeds=seeds,
                step="first_order", tau=1e-4, domain=s, gap_set=s, record_every=100)
md = run_chains(game, s, geometry, method="mirror_descent", iterations=N, seeds=seeds,
                step="first_order", record_every=100)

it = [r.iteration for r in zo[0].trace]
zo_gap = np.mean([[r.gap for r in res.trace] for res in zo], axis=0)
md_gap = np.mean([[r.gap for r in res.trace] for res in md], axis=0)
print(f"final gap: zoSPA {zo_gap[-1]:.4f}, mirror descent {md_gap[-1]:.4f}")

plt.semilogy(it, zo_gap, label="zoSPA")
plt.semilogy(it, md_gap, "--", label="mirror descent")
plt.xlabel("iterations")
plt.ylabel("saddle gap")
plt.legend()
plt.savefig("matrix_game.svg")
