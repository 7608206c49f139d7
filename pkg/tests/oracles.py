"""Independent reference computations used by the tests.

These deliberately avoid the package's own algorithms: impedance matrices
come from a dense inverse, restoration sequences from plain enumeration,
and the two-bus flow from a closed form.
"""

import cmath
import math

import numpy as np

from blackstart.simulate import InfeasibleScheme, RestorationScheme, simulate


def ybus_dense(model, nodes, branches, ground):
    """Nodal admittance over ``nodes`` with series branches and ground ties.

    ``ground`` maps a node id to the impedance to ground of the sources there.
    """
    pos = {n: k for k, n in enumerate(nodes)}
    y = np.zeros((len(nodes), len(nodes)), dtype=complex)
    for b in branches:
        i, j = (pos[n] for n in model.branch(b).endpoints)
        ys = 1.0 / model.branch(b).impedance
        y[i, i] += ys
        y[j, j] += ys
        y[i, j] -= ys
        y[j, i] -= ys
    for n, z in ground.items():
        y[pos[n], pos[n]] += 1.0 / z
    return y


def restoration_sequences(model):
    """Every connectivity-respecting branch sequence of a small grid.

    A sequence grows from the black-start node, one branch with at least one
    energized end at a time, until all source nodes are energized; loop
    closing branches may be interleaved.  Afterwards any subset of the
    remaining loop-closing branches may be appended in any order.
    """
    start = model.black_start.node
    targets = set(model.source_nodes)
    ends = {b: model.branch(b).endpoints for b in model.branch_ids}
    out = []

    def tail(seq, energized):
        out.append(tuple(seq))
        for b in model.branch_ids:
            i, j = ends[b]
            if b not in seq and i in energized and j in energized:
                tail(seq + [b], energized)

    def grow(seq, energized):
        if targets <= energized:
            tail(seq, energized)
            return
        for b in model.branch_ids:
            if b in seq:
                continue
            i, j = ends[b]
            if i in energized or j in energized:
                grow(seq + [b], energized | {i, j})

    grow([], {start})
    return sorted(set(out))


def enumerate_optimum(model):
    """Minimum objective over all feasible enumerated schemes."""
    best = (math.inf, None)
    for seq in restoration_sequences(model):
        try:
            tl = simulate(model, _with_links(model, seq))
        except InfeasibleScheme:
            continue
        if tl.objective < best[0] - 1e-9:
            best = (tl.objective, seq)
    return best


def _with_links(model, seq):
    seen = {model.black_start.node}
    links = []
    for b in seq:
        i, j = model.branch(b).endpoints
        if i in seen and j in seen:
            links.append(b)
        seen |= {i, j}
    return RestorationScheme(order=tuple(seq), include_link=tuple(links))


def two_bus_receiving_voltage(z, p, q):
    """Receiving-end voltage of a slack bus at 1 p.u. feeding load ``p + jq``.

    Solves the quartic ``|V|^4 + (2(RP + XQ) - 1)|V|^2 + |Z|^2 S^2 = 0`` and
    takes the high-voltage root; the angle follows from the drop equation.
    """
    r, x = z.real, z.imag
    b = 2.0 * (r * p + x * q) - 1.0
    c = abs(z) ** 2 * (p * p + q * q)
    v2 = (-b + math.sqrt(b * b - 4.0 * c)) / 2.0
    vm = math.sqrt(v2)
    # V1 = V2 + Z * conj(S / V2); with V1 on the real axis solve for the angle
    delta = -math.asin((x * p - r * q) / vm)
    return cmath.rect(vm, delta)


def random_grid_doc(rng, n_nodes, n_loops, n_gens):
    """Random connected grid: spanning tree plus ``n_loops`` extra branches.

    Generators sit on distinct random nodes, the first one black-start.
    """
    parents = [int(rng.integers(0, k)) for k in range(1, n_nodes)]
    edges = [(p + 1, k + 1) for k, p in enumerate(parents, start=1)]
    have = {frozenset(e) for e in edges}
    tries = 0
    while len(edges) < n_nodes - 1 + n_loops and tries < 200:
        tries += 1
        i, j = (int(x) + 1 for x in rng.choice(n_nodes, 2, replace=False))
        if frozenset((i, j)) not in have:
            have.add(frozenset((i, j)))
            edges.append((i, j))
    gen_nodes = [int(x) + 1 for x in rng.choice(n_nodes, n_gens, replace=False)]
    nodes = [{"id": k, "rated_voltage": 230.0, "load": [0.0, 0.0]} for k in range(1, n_nodes + 1)]
    branches = [
        {
            "id": k,
            "endpoints": [i, j],
            "impedance": [float(rng.uniform(0.0, 0.02)), float(rng.uniform(0.01, 0.2))],
        }
        for k, (i, j) in enumerate(edges, start=1)
    ]
    gens = [
        {
            "id": 100 + k,
            "node": n,
            "rated_power": 100.0,
            "rated_capacity": 110.0,
            "transient_reactance": float(rng.uniform(0.02, 0.3)),
            "reactance_base": 100.0,
            "freq_coeff": 5.0,
            "ramp_rate": 60.0,
            "is_black_start": k == 0,
        }
        for k, n in enumerate(gen_nodes)
    ]
    return {"params": {}, "nodes": nodes, "branches": branches, "generators": gens, "hvdc": None}


def random_restoration_order(model, rng):
    """Random connectivity-respecting order of every branch."""
    energized = {model.black_start.node}
    left = set(model.branch_ids)
    order = []
    while left:
        ready = sorted(b for b in left if set(model.branch(b).endpoints) & energized)
        b = ready[int(rng.integers(len(ready)))]
        order.append(b)
        left.discard(b)
        energized.update(model.branch(b).endpoints)
    return order


def oracle_z(model, order):
    """Z over the restored nodes by inverting the assembled admittance matrix."""
    nodes = [model.black_start.node]
    for b in order:
        for n in model.branch(b).endpoints:
            if n not in nodes:
                nodes.append(n)
    ground = {}
    for g in model.generators:
        if g.node in nodes:
            z = 1j * g.transient_reactance
            ground[g.node] = 1.0 / (1.0 / ground[g.node] + 1.0 / z) if g.node in ground else z
    return nodes, np.linalg.inv(ybus_dense(model, nodes, order, ground))
