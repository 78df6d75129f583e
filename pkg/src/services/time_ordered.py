"""Time-ordered integrals over the simplex t > t_1 > ... > t_n > 0."""

import functools
import logging
from typing import Sequence, Tuple

import numpy as np

from .lattice_model import LatticeModel

logger = logging.getLogger(__name__)


@functools.lru_cache()
def gauss_legendre(nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    x, w = 0.5 * (x + 1.0), 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def interval_rule(upper: float, nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = gauss_legendre(nodes)
    return upper * x, upper * w


@functools.lru_cache(maxsize=64)
def simplex_rule(t: float, depth: int, nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Iterated Gauss-Legendre rule on the depth-dimensional simplex.

    Each level maps the 1D rule onto [0, t_{k-1}], so the point count is
    nodes**depth. Returns points of shape (M, depth) ordered (t_1, ..., t_depth)
    and weights of shape (M,).
    """
    points = np.zeros((1, 0))
    weights = np.ones(1)
    uppers = np.array([t])
    x, w = gauss_legendre(nodes)
    for _ in range(depth):
        new_points = uppers[:, None] * x[None, :]
        new_weights = weights[:, None] * uppers[:, None] * w[None, :]
        points = np.concatenate(
            [np.repeat(points, nodes, axis=0), new_points.reshape(-1, 1)], axis=1
        )
        weights = new_weights.reshape(-1)
        uppers = new_points.reshape(-1)
    points.setflags(write=False)
    weights.setflags(write=False)
    return points, weights


def insertion_chain(model: LatticeModel, data: np.ndarray, s: int, n: int, t: float, times: Sequence[float]) -> np.ndarray:
    """
    Free flows interleaved with interaction insertions, innermost time first:

        ∏_{j≤s}𝒢_1(-t+t_1) Σ_{i≤s}(-𝒩_int(i,s+1)) ∏_{j≤s+1}𝒢_1(-t_1+t_2) ...
            Σ_{i≤s+n-1}(-𝒩_int(i,s+n)) ∏_{j≤s+n}𝒢_1(-t_n) data

    Particles beyond s+m stop evolving after they are inserted; the result is
    meant to be traced over them.
    """
    n_sites = s + n
    innermost = times[n - 1] if n else t
    out = model.free_evolve_sites(data, n_sites, range(n_sites), innermost)
    for m in range(n, 0, -1):
        joined = s + m - 1
        inserted = np.zeros_like(out)
        for i in range(joined):
            inserted = inserted + model.interaction_commutator(out, n_sites, i, joined)
        later = times[m - 2] if m >= 2 else t
        out = model.free_evolve_sites(inserted, n_sites, range(joined), later - times[m - 1])
    return out


def chain_integral(model: LatticeModel, data: np.ndarray, s: int, n: int, t: float, nodes: int) -> np.ndarray:
    """∫ over the n-simplex of insertion_chain, by the iterated rule."""
    if n == 0:
        return insertion_chain(model, data, s, 0, t, ())
    points, weights = simplex_rule(float(t), n, nodes)
    acc = np.zeros_like(data, dtype=complex)
    for times, weight in zip(points, weights):
        acc = acc + weight * insertion_chain(model, data, s, n, t, times)
    return acc
