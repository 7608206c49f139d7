"""Incremental nodal impedance matrix of the energized network.

The matrix is grown with the classic branch-adding rules: a tree branch
appends a new node, an ungrounded link closes a loop between two restored
nodes and a grounded link connects a restored node to the ground reference
through a source (generator transient reactance).  Every operation returns a
new :class:`ImpedanceMatrix`; the stored array is read-only.
"""

from __future__ import annotations

from collections.abc import Iterable

import numpy as np

__all__ = [
    "ImpedanceError",
    "NonpositiveReactance",
    "NotRestored",
    "AlreadyRestored",
    "Ungrounded",
    "DegenerateLoop",
    "ImpedanceMatrix",
    "init_with_source",
    "add_tree_branch",
    "add_link_ungrounded",
    "add_link_grounded",
    "thevenin",
]

DENOMINATOR_GUARD = 1e-12


class ImpedanceError(ValueError):
    pass


class NonpositiveReactance(ImpedanceError):
    pass


class NotRestored(ImpedanceError):
    pass


class AlreadyRestored(ImpedanceError):
    pass


class Ungrounded(ImpedanceError):
    pass


class DegenerateLoop(ImpedanceError):
    pass


class ImpedanceMatrix:
    """Thevenin impedance state over the restored nodes.

    Attributes
    ----------
    nodes : tuple of int
        Restored node ids in restoration order; ``z[k, l]`` refers to
        ``nodes[k]`` and ``nodes[l]``.
    z : ndarray of complex, shape (n, n)
        Per-unit nodal impedance matrix (read-only).
    grounded : bool
        True once at least one source connects the network to ground.
    """

    __slots__ = ("nodes", "z", "grounded", "_index")

    def __init__(self, nodes: Iterable[int] = (), z=None, grounded: bool = False):
        self.nodes = tuple(nodes)
        if z is None:
            z = np.zeros((len(self.nodes), len(self.nodes)), dtype=complex)
        z = np.asarray(z, dtype=complex)
        if z.shape != (len(self.nodes), len(self.nodes)):
            raise ValueError("impedance matrix shape does not match node count")
        z.flags.writeable = False
        self.z = z
        self.grounded = grounded
        self._index = {n: k for k, n in enumerate(self.nodes)}

    def __contains__(self, node: int) -> bool:
        return node in self._index

    def __len__(self) -> int:
        return len(self.nodes)

    def __repr__(self) -> str:
        return f"ImpedanceMatrix(nodes={self.nodes}, grounded={self.grounded})"

    def index(self, node: int) -> int:
        try:
            return self._index[node]
        except KeyError:
            raise NotRestored(f"node {node} is not restored") from None

    def entry(self, p: int, q: int) -> complex:
        return complex(self.z[self.index(p), self.index(q)])

    def as_dict(self) -> dict[tuple[int, int], complex]:
        return {(p, q): complex(self.z[k, l]) for k, p in enumerate(self.nodes) for l, q in enumerate(self.nodes)}


def init_with_source(node: int, source_impedance: complex) -> ImpedanceMatrix:
    """Seed the matrix with the black-start source at ``node``."""
    source_impedance = complex(source_impedance)
    if source_impedance.imag <= 0:
        raise NonpositiveReactance(f"source reactance must be positive, got {source_impedance}")
    return ImpedanceMatrix((node,), np.array([[source_impedance]]), grounded=True)


def add_tree_branch(m: ImpedanceMatrix, p: int, q: int, z_branch: complex) -> ImpedanceMatrix:
    """Energize new node ``q`` from restored node ``p`` through ``z_branch``."""
    k = m.index(p)
    if q in m:
        raise AlreadyRestored(f"node {q} is already restored")
    n = len(m)
    z = np.empty((n + 1, n + 1), dtype=complex)
    z[:n, :n] = m.z
    z[:n, n] = m.z[:, k]
    z[n, :n] = m.z[k, :]
    z[n, n] = z_branch + m.z[k, k]
    return ImpedanceMatrix(m.nodes + (q,), z, m.grounded)


def add_link_ungrounded(m: ImpedanceMatrix, p: int, q: int, z_branch: complex) -> ImpedanceMatrix:
    """Close a loop between restored nodes ``p`` and ``q``."""
    k, l = m.index(p), m.index(q)
    z = m.z
    denom = z_branch + z[k, k] + z[l, l] - z[k, l] - z[l, k]
    if abs(denom) < DENOMINATOR_GUARD:
        raise DegenerateLoop(f"loop {p}-{q} has a vanishing loop impedance")
    col = z[:, k] - z[:, l]
    row = z[k, :] - z[l, :]
    return ImpedanceMatrix(m.nodes, z - np.outer(col, row) / denom, m.grounded)


def add_link_grounded(m: ImpedanceMatrix, p: int, z_branch: complex) -> ImpedanceMatrix:
    """Connect restored node ``p`` to ground through ``z_branch``."""
    k = m.index(p)
    z = m.z
    denom = z_branch + z[k, k]
    if abs(denom) < DENOMINATOR_GUARD:
        raise DegenerateLoop(f"grounded link at {p} has a vanishing loop impedance")
    return ImpedanceMatrix(m.nodes, z - np.outer(z[:, k], z[k, :]) / denom, True)


def thevenin(m: ImpedanceMatrix, d: int) -> complex:
    """Driving-point impedance ``z_dd`` of restored node ``d``."""
    if not m.grounded:
        raise Ungrounded("no source connects the network to ground")
    k = m.index(d)
    return complex(m.z[k, k])
