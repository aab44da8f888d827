"""Random test instances."""
from __future__ import annotations

import numpy as np

from .measure import GENERAL, PROBABILITY, GridMeasure


def random_probability(delta: int, dims: int, support: int, g: np.random.Generator,
                       kind: str = PROBABILITY) -> GridMeasure:
    """Uniformly placed atoms (duplicates merged) with Dirichlet(1) weights."""
    pts = g.integers(0, delta, size=(support, dims))
    w = g.dirichlet(np.ones(support))
    x = GridMeasure.from_atoms(delta, dims, zip(map(tuple, pts), w), GENERAL)
    return GridMeasure(delta, dims, x.points, x.weights / x.total_mass, kind)


def random_sparse_granular(delta: int, dims: int, k: int, N: int, g: np.random.Generator) -> GridMeasure:
    """At most k atoms with weights in (1/N)Z."""
    s = int(g.integers(1, k + 1))
    cuts = np.sort(g.choice(np.arange(1, N), size=min(s - 1, N - 1), replace=False))
    units = np.diff(np.concatenate([[0], cuts, [N]]))
    pts = g.integers(0, delta, size=(len(units), dims))
    return GridMeasure.from_atoms(delta, dims, zip(map(tuple, pts), units / N))


def clusters_with_noise(delta: int, dims: int, k: int, N: int, g: np.random.Generator,
                        noise: float = 0.1, spread: int | None = None) -> GridMeasure:
    """k point-mass clusters holding (1 - noise) of the mass plus noise atoms.

    Weights are multiples of 1/N.  Noise atoms land uniformly on the grid, or
    within ``spread`` (ℓ∞) of a random cluster centre when ``spread`` is given.
    """
    n_noise = int(round(noise * N))
    n_main = N - n_noise
    centers = g.integers(0, delta, size=(k, dims))
    cuts = np.sort(g.choice(np.arange(1, n_main), size=k - 1, replace=False)) if k > 1 else np.array([], int)
    units = np.diff(np.concatenate([[0], cuts, [n_main]]))
    atoms = [(tuple(c), u / N) for c, u in zip(centers, units)]
    for _ in range(n_noise):
        if spread is None:
            p = g.integers(0, delta, size=dims)
        else:
            c = centers[g.integers(0, k)]
            p = np.clip(c + g.integers(-spread, spread + 1, size=dims), 0, delta - 1)
        atoms.append((tuple(p), 1.0 / N))
    x = GridMeasure.from_atoms(delta, dims, atoms, GENERAL)
    return GridMeasure(delta, dims, x.points, x.weights, PROBABILITY)
