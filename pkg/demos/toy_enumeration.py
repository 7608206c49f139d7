"""Brute-force the 6-branch toy grid and check that the GA finds the optimum.

Every connectivity-respecting branch sequence, with every subset of the
loop-closing branch, is simulated; the best objective is compared with the
GA result for a handful of seeds.

    python3 demos/toy_enumeration.py
"""

from blackstart import GaConfig, RestorationScheme, data_path, load_grid, mpga_optimize, simulate
from blackstart.simulate import InfeasibleScheme

model = load_grid(data_path("toy6.json"))
start = model.black_start.node


def sequences(energized, left, prefix):
    # grow from energized nodes until every source node is reached
    if set(model.source_nodes) <= energized:
        yield tuple(prefix)
    for b in sorted(left):
        i, j = model.branch(b).endpoints
        if i in energized or j in energized:
            yield from sequences(energized | {i, j}, left - {b}, prefix + [b])


best = None
count = 0
for seq in sorted(set(sequences({start}, set(model.branch_ids), []))):
    seen, links = {start}, []
    for b in seq:
        i, j = model.branch(b).endpoints
        if i in seen and j in seen:
            links.append(b)
        seen |= {i, j}
    try:
        tl = simulate(model, RestorationScheme(order=seq, include_link=tuple(links)))
    except InfeasibleScheme:
        continue
    count += 1
    if best is None or tl.objective < best[0] - 1e-9:
        best = (tl.objective, seq, tuple(links))

print(f"{count} feasible schemes; optimum F = {best[0]:.2f} MW for order {best[1]} with links {best[2]}")
for seed in range(5):
    _, tl, _ = mpga_optimize(model, GaConfig(rng_seed=seed))
    print(f"  GA seed {seed}: F = {tl.objective:.2f} MW, order {tl.scheme.order}")
