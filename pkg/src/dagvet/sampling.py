"""Mixed observational/interventional data generation from a discrete network.

A dataset is an N x d matrix of state indices plus an N x d boolean mask
marking cells whose variable was forced by a hard intervention (masked cells
are excluded from likelihoods). Environments are labeled 0 for observational
rows and ``i + 1`` for rows where column ``i`` was intervened; the +1 keeps
the observational label distinct from variable index 0.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .graph import topological_order
from .networks import DiscreteNetwork, network_skeleton

INTERVENTION_MODES = ("per_sample", "per_environment")


class SamplingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    """Value matrix, intervention mask, and environment labels."""

    variables: tuple[str, ...]
    cardinalities: tuple[int, ...]
    values: np.ndarray
    mask: np.ndarray
    environment: np.ndarray

    def __post_init__(self) -> None:
        values = np.ascontiguousarray(self.values, dtype=np.int64)
        mask = np.ascontiguousarray(self.mask, dtype=bool)
        environment = np.ascontiguousarray(self.environment, dtype=np.int64)
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "cardinalities", tuple(int(c) for c in self.cardinalities))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "environment", environment)
        d = len(self.variables)
        if len(self.cardinalities) != d:
            raise SamplingError("cardinalities and variables disagree on length")
        if values.ndim != 2 or values.shape[1] != d:
            raise SamplingError(f"values must be (n, {d}), got {values.shape}")
        if mask.shape != values.shape:
            raise SamplingError("mask shape must match values")
        if environment.shape != (values.shape[0],):
            raise SamplingError("environment must be one label per row")
        per_row = mask.sum(axis=1)
        if np.any(per_row > 1):
            raise SamplingError("a row has more than one intervened cell")
        rows, cols = np.nonzero(mask)
        if not np.array_equal(environment[rows], cols + 1):
            raise SamplingError("mask and environment labels disagree")
        if np.any(environment[per_row == 0] != 0):
            raise SamplingError("unmasked rows must carry environment label 0")
        for i, r in enumerate(self.cardinalities):
            if r < 2:
                raise SamplingError(f"cardinality of {self.variables[i]!r} must be >= 2")
            if values.shape[0] and int(values[:, i].max(initial=0)) >= r:
                raise SamplingError(
                    f"column {self.variables[i]!r} holds a value >= its cardinality"
                )
        for arr in (values, mask, environment):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return len(self.variables)

    def unmasked_rows(self, column: int) -> np.ndarray:
        """Row indices whose ``column`` cell was not intervened."""
        return np.nonzero(~self.mask[:, column])[0]

    @classmethod
    def concat(cls, parts: list["Dataset"]) -> "Dataset":
        if not parts:
            raise SamplingError("cannot concatenate zero datasets")
        head = parts[0]
        for p in parts[1:]:
            if p.variables != head.variables or p.cardinalities != head.cardinalities:
                raise SamplingError("datasets disagree on variables")
        return cls(
            head.variables,
            head.cardinalities,
            np.concatenate([p.values for p in parts], axis=0),
            np.concatenate([p.mask for p in parts], axis=0),
            np.concatenate([p.environment for p in parts], axis=0),
        )


def _categorical_rows(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    """One draw per row from row-wise categorical distributions."""
    n, r = probs.shape
    cum = np.cumsum(probs, axis=1)
    u = rng.random(n)
    # <= so that u == 0.0 can never select a zero-probability leading state
    return np.minimum((cum <= u[:, None]).sum(axis=1), r - 1).astype(np.int64)


def _sample_environment(
    net: DiscreteNetwork,
    n: int,
    rng: np.random.Generator,
    target: int | None,
    mode: str,
) -> np.ndarray:
    order = topological_order(network_skeleton(net))
    names = net.names
    d = net.d
    values = np.zeros((n, d), dtype=np.int64)
    for var_idx in order:
        table = net.tables[var_idx]
        r = net.variables[var_idx].cardinality
        if var_idx == target:
            if mode == "per_sample":
                values[:, var_idx] = rng.integers(0, r, size=n)
            else:
                values[:, var_idx] = int(rng.integers(0, r))
            continue
        if table.parents:
            parent_idx = [names.index(p) for p in table.parents]
            cards = [net.variables[j].cardinality for j in parent_idx]
            config = np.ravel_multi_index(
                [values[:, j] for j in parent_idx], cards
            )
            probs = table.probs[config]
        else:
            probs = np.broadcast_to(table.probs[0], (n, r))
        values[:, var_idx] = _categorical_rows(rng, probs)
    return values


def sample_observational(net: DiscreteNetwork, n: int, seed: int) -> Dataset:
    """Ancestral sampling in topological order; no cell is intervened."""
    if n < 0:
        raise SamplingError("sample count must be nonnegative")
    rng = np.random.default_rng(seed)
    values = _sample_environment(net, n, rng, target=None, mode="per_sample")
    d = net.d
    return Dataset(
        net.names,
        net.cardinalities,
        values,
        np.zeros((n, d), dtype=bool),
        np.zeros(n, dtype=np.int64),
    )


def sample_interventional(
    net: DiscreteNetwork,
    target: int | str,
    n: int,
    seed: int,
    mode: str = "per_sample",
) -> Dataset:
    """Hard intervention on ``target``: its value is forced uniformly at
    random over its states, independent of its parents; all other variables
    follow their CPTs given the realized values.

    ``mode="per_environment"`` draws a single forced state for the whole
    environment instead of one per sample.
    """
    if mode not in INTERVENTION_MODES:
        raise SamplingError(f"mode must be one of {INTERVENTION_MODES}")
    if n < 0:
        raise SamplingError("sample count must be nonnegative")
    t = net.names.index(target) if isinstance(target, str) else int(target)
    if not 0 <= t < net.d:
        raise SamplingError(f"target {target!r} not in network")
    rng = np.random.default_rng(seed + t + 1)
    values = _sample_environment(net, n, rng, target=t, mode=mode)
    mask = np.zeros((n, net.d), dtype=bool)
    mask[:, t] = True
    return Dataset(
        net.names,
        net.cardinalities,
        values,
        mask,
        np.full(n, t + 1, dtype=np.int64),
    )


def build_mixed_dataset(
    net: DiscreteNetwork,
    total: int = 5000,
    seed: int = 0,
    mode: str = "per_sample",
) -> Dataset:
    """The benchmark layout: d+1 environments, one observational plus one
    hard intervention per variable, with the sample budget split uniformly.

    Each environment receives ``total // (d + 1)`` rows; the remainder goes
    to the observational environment. Rows are concatenated observational
    first, then interventions in variable-index order. Each environment
    draws from its own stream (seed + environment index), so the data for
    one environment does not depend on the others.
    """
    d = net.d
    if total < d + 1:
        raise SamplingError(
            f"need at least {d + 1} rows (one per environment), got {total}"
        )
    base = total // (d + 1)
    obs = base + (total - base * (d + 1))
    parts = [sample_observational(net, obs, seed)]
    for i in range(d):
        parts.append(sample_interventional(net, i, base, seed, mode=mode))
    return Dataset.concat(parts)


# ---------------------------------------------------------------------------
# CSV round-trip
# ---------------------------------------------------------------------------


def _companion(path: str, kind: str) -> str:
    base, ext = os.path.splitext(path)
    return f"{base}.{kind}{ext or '.csv'}"


def save_dataset_csv(dataset: Dataset, path: str) -> list[str]:
    """Write ``path`` plus ``.mask`` / ``.env`` companions; returns the paths."""
    paths = [path, _companion(path, "mask"), _companion(path, "env")]
    header = ",".join(dataset.variables)
    with open(paths[0], "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in dataset.values:
            fh.write(",".join(str(int(v)) for v in row) + "\n")
    with open(paths[1], "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in dataset.mask:
            fh.write(",".join("1" if v else "0" for v in row) + "\n")
    with open(paths[2], "w", encoding="utf-8") as fh:
        fh.write("environment\n")
        for e in dataset.environment:
            fh.write(f"{int(e)}\n")
    return paths


def load_dataset_csv(path: str, cardinalities: tuple[int, ...] | None = None) -> Dataset:
    """Read a dataset written by :func:`save_dataset_csv`.

    When ``cardinalities`` is omitted they are inferred as one more than each
    column's maximum (floored at 2), which undercounts states that never
    occur in the sample.
    """
    def read_table(p: str) -> tuple[list[str], np.ndarray]:
        with open(p, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
        header = lines[0].split(",")
        rows = [[int(x) for x in ln.split(",")] for ln in lines[1:]]
        return header, np.asarray(rows, dtype=np.int64).reshape(len(rows), len(header))

    names, values = read_table(path)
    _, mask = read_table(_companion(path, "mask"))
    _, env = read_table(_companion(path, "env"))
    if cardinalities is None:
        maxes = values.max(axis=0, initial=1)
        cardinalities = tuple(max(2, int(m) + 1) for m in maxes)
    return Dataset(
        tuple(names),
        cardinalities,
        values,
        mask.astype(bool),
        env.reshape(-1),
    )
