"""Scikit-learn estimator facade over the verify-and-refine structure search.

Mirrors the conventions of sklearn structure/covariance estimators: hyper
parameters in ``__init__`` (so ``get_params``/``set_params``/cloning work),
data in ``fit``, learned state in trailing-underscore attributes, and a
``score`` method where higher is better.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .engine import RunConfig, greedy_warm_start, hybrid_init, refine
from .graph import CausalGraph
from .proposers import GreedyProposer, RandomProposer
from .sampling import Dataset
from .scoring import BicScorer
from .validation import (
    check_cardinalities,
    check_mask,
    check_state_matrix,
    check_variable_names,
)


def _dataset_from_arrays(X, mask, variable_names, cardinalities) -> Dataset:
    X = check_state_matrix(X)
    mask = check_mask(mask, X.shape)
    names = check_variable_names(variable_names, X.shape[1])
    cards = check_cardinalities(cardinalities, X)
    rows, cols = np.nonzero(mask)
    environment = np.zeros(X.shape[0], dtype=np.int64)
    environment[rows] = cols + 1
    return Dataset(names, cards, X, mask, environment)


class StructureSearch(BaseEstimator):
    """Learn a causal DAG over discrete columns by scored local edits.

    Parameters
    ----------
    proposer : {"greedy", "random"} or object with a ``propose`` method
        Edit generator driving the search. The greedy proposer is the
        deterministic exhaustive one; "random" samples uniformly among the
        structurally valid edits.
    max_iter : int or None
        Iteration horizon; None means one round per variable.
    patience : int
        Consecutive score-rejections tolerated before stopping early.
    eps : float
        Minimal BIC decrease counted as an improvement.
    random_state : int
        Seed for the random proposer.
    penalty_mode : {"total", "per_family"}
        Sample-size convention inside the BIC penalty.

    Attributes
    ----------
    graph_ : CausalGraph
        Lowest-BIC graph encountered during the search.
    adjacency_ : ndarray of shape (d, d)
        0/1 matrix of ``graph_`` (entry [i, j] = 1 for an edge i -> j).
    bic_ : float
        BIC of ``graph_`` on the training data.
    result_ : RunResult
        Full trajectory and stop reason.

    Examples
    --------
    >>> import numpy as np
    >>> rng = np.random.default_rng(0)
    >>> a = rng.integers(0, 2, 2000)
    >>> b = (a ^ (rng.random(2000) < 0.05)).astype(int)
    >>> est = StructureSearch().fit(np.column_stack([a, b]))
    >>> est.graph_.edge_names()
    [('X0', 'X1')]
    """

    def __init__(
        self,
        proposer="greedy",
        max_iter=None,
        patience=5,
        eps=1e-9,
        random_state=0,
        penalty_mode="total",
    ):
        self.proposer = proposer
        self.max_iter = max_iter
        self.patience = patience
        self.eps = eps
        self.random_state = random_state
        self.penalty_mode = penalty_mode

    def _build_proposer(self, scorer: BicScorer):
        if self.proposer == "greedy":
            return GreedyProposer(scorer)
        if self.proposer == "random":
            return RandomProposer(self.random_state)
        if hasattr(self.proposer, "propose"):
            return self.proposer
        raise ValueError(
            f"proposer must be 'greedy', 'random', or provide .propose; "
            f"got {self.proposer!r}"
        )

    def fit(
        self,
        X,
        y=None,
        *,
        mask=None,
        variable_names=None,
        cardinalities=None,
        init=None,
    ):
        """Search for the DAG minimizing the intervention-aware BIC of X.

        ``mask`` marks cells whose variable was forced by a hard
        intervention; those cells are excluded from the likelihood of their
        own column. ``init`` may be a :class:`CausalGraph`; by default the
        better-scoring of {greedy warm start, edgeless} is used.
        """
        data = _dataset_from_arrays(X, mask, variable_names, cardinalities)
        scorer = BicScorer(data, penalty_mode=self.penalty_mode)
        config = RunConfig(
            max_iterations=self.max_iter,
            patience=self.patience,
            epsilon=self.eps,
            seed=self.random_state,
            proposer=self.proposer if isinstance(self.proposer, str) else "greedy",
            penalty_mode=self.penalty_mode,
        )
        empty = CausalGraph(data.variables)
        if init is None:
            start, _, _ = hybrid_init(
                [("warmstart", greedy_warm_start(scorer, empty)), ("empty", empty)],
                scorer,
            )
        elif isinstance(init, CausalGraph):
            if init.variables != data.variables:
                raise ValueError("init graph and data disagree on variable names")
            start = init
        else:
            raise ValueError("init must be None or a CausalGraph")

        result = refine(start, scorer, self._build_proposer(scorer), config)
        self.result_ = result
        self.graph_ = result.graph
        self.bic_ = result.bic_result.bic
        self.loglik_ = result.bic_result.loglik
        self.k_eff_ = result.bic_result.k_eff
        self.variable_names_ = data.variables
        self.cardinalities_ = data.cardinalities
        self.n_features_in_ = data.d
        adjacency = np.zeros((data.d, data.d), dtype=np.int8)
        for p, c in result.graph.edges:
            adjacency[p, c] = 1
        self.adjacency_ = adjacency
        return self

    def score(self, X, y=None, *, mask=None):
        """Negative BIC of the learned graph on the given data (higher is better)."""
        check_is_fitted(self, "graph_")
        data = _dataset_from_arrays(
            X, mask, self.variable_names_, self.cardinalities_
        )
        scorer = BicScorer(data, penalty_mode=self.penalty_mode)
        return -scorer.bic(self.graph_).bic
