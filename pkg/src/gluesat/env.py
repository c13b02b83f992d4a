"""Episodic decision environment wrapped around the CDCL engine.

Actions pick an unassigned variable (by compacted index into the current
observation); the environment assigns a uniformly random polarity and unit
propagates.  A conflict ends the episode with reward 1/glue^2, full
assignment ends it with reward 0, and every other step costs -1/n.
Learned clauses never survive a reset.
"""

from __future__ import annotations

import numpy as np

from .cnf import Formula
from .extract import extract_graph
from .solver import Solver

__all__ = ["GlueEnv", "TrivialFormulaError", "episode_return"]


class TrivialFormulaError(ValueError):
    """Formula is decided by root unit propagation; no episode is possible."""


def episode_return(rewards) -> float:
    """Undiscounted return of a finished episode."""
    return float(sum(rewards))


class GlueEnv:
    """One environment per rollout worker; never share instances."""

    def __init__(self, edge_cap: int = 10_000_000):
        self.edge_cap = edge_cap
        self.solver = None
        self.obs = None
        self.done = True
        self.terminal = None
        self.n = 0
        self.steps = 0
        self._rng = None

    def reset(self, formula: Formula, seed=None):
        """Start an episode: fresh engine (discarding learned clauses), root
        unit propagation, observation of the residual graph."""
        solver = Solver(formula)
        if solver._root_unsat:
            raise TrivialFormulaError("formula contains the empty clause")
        for lit in solver._root_units:
            val = solver.value(lit)
            if val == -1:
                raise TrivialFormulaError("contradictory unit clauses")
            if val == 0:
                solver._enqueue(lit, None)
        if solver._propagate() is not None:
            raise TrivialFormulaError("root unit propagation conflicts")
        if len(solver.trail) == solver.n or solver.n == 0:
            raise TrivialFormulaError("root unit propagation decides the formula")
        self.solver = solver
        self.n = formula.num_vars
        self._rng = np.random.default_rng(seed)
        self.done = False
        self.terminal = None
        self.steps = 0
        self.obs = extract_graph(solver, self.edge_cap)
        return self.obs

    def valid_actions(self) -> range:
        """Compacted indices of the currently unassigned variables."""
        return range(len(self.obs.var_map))

    def step(self, action: int):
        """Apply one decision; returns (observation, reward, done).

        The observation is None on terminal steps.
        """
        if self.done:
            raise RuntimeError("step called on a finished episode")
        var_map = self.obs.var_map
        if not 0 <= action < len(var_map):
            raise ValueError(f"action {action} out of range for {len(var_map)} valid actions")
        v = var_map[action]
        polarity = bool(self._rng.integers(2))
        lit = v if polarity else -v
        s = self.solver
        s.trail_lim.append(len(s.trail))
        s._enqueue(lit, None)
        conflict = s._propagate()
        self.steps += 1
        if conflict is not None:
            if s.decision_level == 0:
                glue = 1
            else:
                _, _, glue = s._analyze(conflict)
            self.done = True
            self.terminal = ("conflict", glue)
            self.obs = None
            return None, 1.0 / glue**2, True
        if len(s.trail) == s.n:
            self.done = True
            self.terminal = ("satisfied", None)
            self.obs = None
            return None, 0.0, True
        self.obs = extract_graph(s, self.edge_cap)
        return self.obs, -1.0 / self.n, False
