"""Residual clause-literal graph extraction from live solver state.

Builds the network input at a decision point: satisfied clauses dropped,
falsified literals stripped, unassigned variables densely renumbered, with
original clauses traversed before learned ones under an edge cap.
"""

from __future__ import annotations

import numpy as np

from .cnf import SparseGraph

__all__ = ["extract_graph", "lift_distribution"]


def extract_graph(solver, edge_cap: int = 10_000_000) -> SparseGraph | None:
    """Extract the simplified clause-literal graph, or None to skip.

    Must be called at a propagation fixpoint without conflict: residual
    clauses of size < 2 are an invariant violation and are asserted against.
    Traversal stops once adding a clause would push the edge count past
    ``edge_cap``; if that happens among the original clauses the whole
    extraction is skipped (returns None).  Pure read; never mutates state.
    """
    n = solver.n
    assign = solver.assign
    unassigned = [v for v in range(1, n + 1) if assign[v + n] == 0]
    index = {v: i for i, v in enumerate(unassigned)}
    ng = len(unassigned)
    edges = []
    row = 0

    def residual_of(lits):
        left = []
        for lit in lits:
            val = assign[lit + n]
            if val == 1:
                return None
            if val == 0:
                left.append(lit)
        return left

    for clause in solver.original:
        left = residual_of(clause.lits)
        if left is None:
            continue
        assert len(left) >= 2, "unit or empty residual clause at propagation fixpoint"
        if len(edges) + len(left) > edge_cap:
            return None
        for lit in left:
            v = index[abs(lit)]
            edges.append((row, v if lit > 0 else ng + v))
        row += 1
    for clause in solver.learned:
        left = residual_of(clause.lits)
        if left is None:
            continue
        assert len(left) >= 2, "unit or empty residual clause at propagation fixpoint"
        if len(edges) + len(left) > edge_cap:
            break
        for lit in left:
            v = index[abs(lit)]
            edges.append((row, v if lit > 0 else ng + v))
        row += 1
    return SparseGraph(row, ng, tuple(edges), tuple(unassigned))


def lift_distribution(probs, var_map, num_vars: int) -> np.ndarray:
    """Map a distribution over compacted variables back to original numbering.

    Entry ``v-1`` of the result carries the mass of original variable ``v``;
    variables absent from ``var_map`` get 0.
    """
    probs = np.asarray(probs, dtype=float)
    if len(probs) != len(var_map):
        raise ValueError("probability vector does not match var_map")
    out = np.zeros(num_vars)
    for i, v in enumerate(var_map):
        out[v - 1] = probs[i]
    return out
