"""Drivers shared by the unit and acceptance tests."""

import numpy as np

from blackstart.impedance import add_link_grounded, add_link_ungrounded, add_tree_branch, init_with_source


def incremental_z(model, order, trace=None):
    """Drive the branch-adding operations along ``order``."""
    bs = model.black_start
    m = init_with_source(bs.node, 1j * bs.transient_reactance)

    def ground_sources(node, m):
        for g in model.generators_at(node):
            if g.id != bs.id:
                m = add_link_grounded(m, node, 1j * g.transient_reactance)
                if trace is not None:
                    trace.append(("grounded", m))
        return m

    m = ground_sources(bs.node, m)
    for b in order:
        br = model.branch(b)
        i, j = br.endpoints
        if i in m and j in m:
            m = add_link_ungrounded(m, i, j, br.impedance)
            if trace is not None:
                trace.append(("link", m))
        else:
            p, q = (i, j) if i in m else (j, i)
            m = add_tree_branch(m, p, q, br.impedance)
            if trace is not None:
                trace.append(("tree", m))
            m = ground_sources(q, m)
    return m


def aligned(m, nodes):
    idx = [m.index(n) for n in nodes]
    return m.z[np.ix_(idx, idx)]


def pf_closure(model, step):
    """Independent nodal mismatch and system balance (p.u.) of a step's solution.

    The admittance matrix and the injections are rebuilt from the model and
    the step's operating point; the solved voltages are the only input taken
    from the solver.
    """
    from blackstart.simulate import operating_point_of
    from oracles import ybus_dense

    sol = step.power_flow
    point = operating_point_of(model, step.state)
    base = model.params.s_base
    buses = list(point.buses)
    pos = {b: k for k, b in enumerate(buses)}
    y = ybus_dense(model, buses, point.branches, {})
    for b in point.branches:
        br = model.branch(b)
        for n in br.endpoints:
            y[pos[n], pos[n]] += 0.5j * br.charging_reactive / base
    v = np.array([sol.voltage[b] * np.exp(1j * sol.angle[b]) for b in buses])

    inj = np.zeros(len(buses), dtype=complex)
    for n, p in point.load_p.items():
        inj[pos[n]] -= p / base
    for n, q in point.load_q.items():
        inj[pos[n]] -= 1j * q / base
    for gid, p in sol.gen_p.items():
        inj[pos[model.generator(gid).node]] += p / base
    for gid, q in sol.gen_q.items():
        inj[pos[model.generator(gid).node]] += 1j * q / base
    if point.hvdc is not None:
        inj[pos[point.hvdc.node]] += (point.hvdc.p_d + 1j * (sol.hvdc_q_filter - sol.hvdc_q_d)) / base

    s_calc = v * np.conj(y @ v)
    mismatch = float(np.max(np.abs(np.concatenate([(s_calc - inj).real, (s_calc - inj).imag]))))
    # the solver's reported losses must close the balance of the rebuilt injections
    supplied = float(np.sum(inj.real))
    return mismatch, abs(supplied - sol.losses / base)
