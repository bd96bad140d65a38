"""Input validation helpers shared by the estimator and data entry points."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array


def check_state_matrix(X) -> np.ndarray:
    """Validate an (n, d) matrix of nonnegative integer state indices."""
    X = check_array(X, dtype="numeric", ensure_2d=True)
    if not np.all(np.equal(np.mod(X, 1), 0)):
        raise ValueError("state values must be integers")
    X = X.astype(np.int64)
    if X.size and X.min() < 0:
        raise ValueError("state values must be nonnegative")
    return X


def check_mask(mask, shape: tuple[int, int]) -> np.ndarray:
    """Validate an intervention mask; None means fully observational."""
    if mask is None:
        return np.zeros(shape, dtype=bool)
    mask = np.asarray(mask)
    if mask.shape != shape:
        raise ValueError(f"mask shape {mask.shape} does not match data shape {shape}")
    if mask.dtype != bool:
        uniques = np.unique(mask)
        if not np.all(np.isin(uniques, (0, 1))):
            raise ValueError("mask entries must be boolean or 0/1")
        mask = mask.astype(bool)
    if np.any(mask.sum(axis=1) > 1):
        raise ValueError("at most one intervened cell per row is supported")
    return mask


def infer_cardinalities(X: np.ndarray) -> tuple[int, ...]:
    """Per-column state count inferred as max + 1 (floored at 2).

    States never observed in the sample are invisible to this inference;
    pass explicit cardinalities when the state space is known.
    """
    if X.shape[0] == 0:
        return tuple([2] * X.shape[1])
    return tuple(max(2, int(m) + 1) for m in X.max(axis=0))


def check_cardinalities(cardinalities, X: np.ndarray) -> tuple[int, ...]:
    if cardinalities is None:
        return infer_cardinalities(X)
    cards = tuple(int(c) for c in cardinalities)
    if len(cards) != X.shape[1]:
        raise ValueError("one cardinality per column is required")
    if any(c < 2 for c in cards):
        raise ValueError("cardinalities must be >= 2")
    if X.shape[0]:
        maxes = X.max(axis=0)
        for i, (c, m) in enumerate(zip(cards, maxes)):
            if m >= c:
                raise ValueError(
                    f"column {i} holds state {int(m)} but declares cardinality {c}"
                )
    return cards


def check_variable_names(names, d: int) -> tuple[str, ...]:
    if names is None:
        return tuple(f"X{i}" for i in range(d))
    names = tuple(str(n) for n in names)
    if len(names) != d:
        raise ValueError("one name per column is required")
    if len(set(names)) != d:
        raise ValueError("variable names must be unique")
    return names
