"""Estimator-style wrapper: fit builds the start set, predict counts real solutions."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array, check_is_fitted

from pfreal.distribution import trial_rng
from pfreal.network import Network, parse_topology
from pfreal.solver import StartSet, build_start_set, solve_all


def check_susceptances(B, net: Network) -> np.ndarray:
    """Validate a ``(n_samples, |E|)`` array of finite, nonzero susceptance rows."""
    B = check_array(B, dtype=np.float64, ensure_2d=True)
    if B.shape[1] != net.n_edges:
        raise ValueError(f"expected {net.n_edges} susceptances per row, got {B.shape[1]}")
    if np.any(np.linalg.norm(B, axis=1) == 0):
        raise ValueError("susceptance rows must be nonzero")
    return B


class RealSolutionCounter(BaseEstimator):
    """Count nontrivial real power flow solutions for rows of susceptances.

    ``fit`` runs monodromy once for the network; ``predict`` then needs only
    one tracked path per solution orbit per row. Row ``i`` uses randomness
    keyed on ``(seed, i)``.
    """

    def __init__(self, topology="cycle:3", seed=0, bipartite=True, real_tol=1e-8):
        self.topology = topology
        self.seed = seed
        self.bipartite = bipartite
        self.real_tol = real_tol

    def _network(self) -> Network:
        return self.topology if isinstance(self.topology, Network) else parse_topology(self.topology)

    def fit(self, X=None, y=None):
        net = self._network()
        if X is not None:
            check_susceptances(X, net)
        start = build_start_set(net, seed=self.seed, bipartite=self.bipartite)
        if not start.complete:
            raise RuntimeError("monodromy did not reach the expected solution count")
        self.network_ = net
        self.start_set_ = start
        self.n_features_in_ = net.n_edges
        return self

    @classmethod
    def from_start_set(cls, start: StartSet, seed=0, real_tol=1e-8) -> "RealSolutionCounter":
        est = cls(start.network, seed, start.bipartite_action, real_tol)
        est.network_ = start.network
        est.start_set_ = start
        est.n_features_in_ = start.network.n_edges
        return est

    def _solve_rows(self, B):
        check_is_fitted(self, "start_set_")
        B = check_susceptances(B, self.network_)
        base = 0 if self.seed is None else self.seed
        return [solve_all(self.network_, b, self.start_set_, trial_rng(base, i),
                          real_tol=self.real_tol) for i, b in enumerate(B)]

    def transform(self, B) -> np.ndarray:
        """Columns: nontrivial real count, completeness fraction, degenerate flag."""
        sols = self._solve_rows(B)
        return np.array([[s.n_real_nontrivial, s.completeness, float(s.degenerate)] for s in sols])

    def predict(self, B) -> np.ndarray:
        """Nontrivial real counts; ``-1`` where the solve was degenerate or incomplete."""
        out = self.transform(B)
        counts = out[:, 0].astype(int)
        counts[(out[:, 2] > 0) | (out[:, 1] != 1.0)] = -1
        return counts

    def fit_predict(self, B, y=None) -> np.ndarray:
        return self.fit(B).predict(B)


__all__ = ["RealSolutionCounter", "check_susceptances", "NotFittedError"]
