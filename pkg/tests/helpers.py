"""Shared test configurations."""

import os

import numpy as np

from cglab.sphere import hemisphere_margin

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")


def cube_points():
    """Unit cube vertices (+-1, +-1, +-1)/sqrt(3)."""
    s = 1 / np.sqrt(3)
    return [np.array([a, b, c]) * s for a in (-1, 1) for b in (-1, 1) for c in (-1, 1)]


def cube_roots():
    """Roots of z^8 + 14 z^4 + 1."""
    return np.roots([1, 0, 0, 0, 14, 0, 0, 0, 1])


def random_unit(rng, n):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def random_feasible_config(rng, spread=np.radians(60), min_sep=0.35):
    """Eight points in a random cap of angular radius ``spread`` with pairwise
    separation at least ``min_sep``; guaranteed hemisphere-feasible."""
    centre = random_unit(rng, 1)[0]
    e1 = np.cross(centre, [0.3, 0.5, 0.8])
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(centre, e1)
    pts = []
    while len(pts) < 8:
        th = spread * np.sqrt(rng.random())
        ph = 2 * np.pi * rng.random()
        p = np.cos(th) * centre + np.sin(th) * (np.cos(ph) * e1 + np.sin(ph) * e2)
        if all(np.arccos(np.clip(p @ q, -1, 1)) >= min_sep for q in pts):
            pts.append(p)
    assert hemisphere_margin(np.array(pts)).feasible
    return pts


def random_spread_config(rng, min_sep=0.35):
    """Eight well-separated uniformly random points (feasibility not forced)."""
    pts = []
    while len(pts) < 8:
        p = random_unit(rng, 1)[0]
        if all(np.arccos(np.clip(p @ q, -1, 1)) >= min_sep for q in pts):
            pts.append(p)
    return pts
