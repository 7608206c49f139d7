"""Compare the multi-population GA with the shortest-path baseline.

The baseline connects the sources one by one along shortest paths in a
fixed order; the GA co-optimizes the branch order and the loop branches.
A short run (20 generations) is usually enough to beat the baseline.

    python3 demos/optimize_vs_baseline.py [generations]
"""

import sys
import time

from blackstart import GaConfig, data_path, dijkstra_baseline, load_grid, mpga_optimize, resolve_sources, simulate

ORDER = [31, 32, 37, 35, 39, 30, 33, 34, 36, 38]

model = load_grid(data_path("ieee39.json"))
gens = int(sys.argv[1]) if len(sys.argv) > 1 else 20

base = simulate(model, dijkstra_baseline(model, resolve_sources(model, ORDER)))
print(f"baseline: F = {base.objective:.2f} MW, T = {base.total_time:.0f} min, HVDC start {base.hvdc_start:.0f} min")

t0 = time.perf_counter()
scheme, tl, history = mpga_optimize(model, GaConfig(rng_seed=0, max_generations=gens))
print(f"GA ({gens} generations, {time.perf_counter() - t0:.0f} s): F = {tl.objective:.2f} MW, "
      f"T = {tl.total_time:.0f} min, HVDC start {tl.hvdc_start:.0f} min, loops {list(tl.loop_branches)}")

best = {}
for h in history:
    best.setdefault(h.generation, h.global_best_f)
for g in sorted(best)[:: max(1, gens // 10)]:
    print(f"  generation {g:3d}: best F = {best[g]:.2f}")
