"""Geometry of Z^d and its periodic quotients.

Vertices are plain tuples of ints carrying their own dimension, so one
process can run simulations at several d simultaneously.  A `Torus`
wraps coordinates modulo its side; `geometry=None` everywhere means the
infinite lattice.

Hyperoctahedrally-symmetric functions (hitting probabilities,
pair-correlation fields) are stored per canonical class: the
nonincreasing sequence of absolute coordinate values, one representative
per symmetry orbit.  `canonical_classes` / `class_neighbor_table`
build the reduced state space and its adjacency.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

from .errors import UsageError

Vertex = tuple[int, ...]


@dataclass(frozen=True)
class Torus:
    """Periodic box (Z/LZ)^d. Side must be even and >= 4 so that the origin
    and the first unit vector are never identified under wrap."""

    dimension: int
    side: int

    def __post_init__(self):
        if self.dimension < 1:
            raise UsageError(f"torus dimension must be >= 1, got {self.dimension}")
        if self.side < 4 or self.side % 2 != 0:
            raise UsageError(f"torus side must be even and >= 4, got {self.side}")

    @property
    def volume(self) -> int:
        return self.side**self.dimension

    def wrap(self, v: Vertex) -> Vertex:
        return tuple(c % self.side for c in v)

    def index(self, v: Vertex) -> int:
        """Flat row-major index of a (wrapped) vertex."""
        idx = 0
        for c in v:
            idx = idx * self.side + (c % self.side)
        return idx

    def vertex(self, idx: int) -> Vertex:
        coords = []
        for _ in range(self.dimension):
            coords.append(idx % self.side)
            idx //= self.side
        return tuple(reversed(coords))

    def neighbor_index_table(self) -> np.ndarray:
        """(volume, 2d) array: row i lists the flat indices of vertex i's
        neighbors (+axis then -axis per dimension). Used by flat-array
        simulations (bcpp) to avoid tuple arithmetic in hot loops."""
        n, L, d = self.volume, self.side, self.dimension
        table = np.empty((n, 2 * d), dtype=np.int64)
        strides = [L ** (d - 1 - ax) for ax in range(d)]
        for i in range(n):
            v = self.vertex(i)
            for ax in range(d):
                up = i + strides[ax] * ((v[ax] + 1) % L - v[ax])
                dn = i + strides[ax] * ((v[ax] - 1) % L - v[ax])
                table[i, 2 * ax] = up
                table[i, 2 * ax + 1] = dn
        return table


def origin(d: int) -> Vertex:
    return (0,) * d


def unit_vector(d: int, axis: int = 0) -> Vertex:
    if not 0 <= axis < d:
        raise UsageError(f"axis {axis} out of range for dimension {d}")
    return tuple(1 if i == axis else 0 for i in range(d))


def check_dimension(v: Vertex, d: int) -> None:
    if len(v) != d:
        raise UsageError(f"vertex {v} has dimension {len(v)}, expected {d}")


def neighbors(v: Vertex, geometry: Torus | None = None) -> list[Vertex]:
    """The 2d lattice neighbors of v (wrapped on a torus)."""
    if geometry is not None:
        check_dimension(v, geometry.dimension)
        L = geometry.side
        out = []
        for i, c in enumerate(v):
            out.append(v[:i] + ((c + 1) % L,) + v[i + 1 :])
            out.append(v[:i] + ((c - 1) % L,) + v[i + 1 :])
        return out
    out = []
    for i, c in enumerate(v):
        out.append(v[:i] + (c + 1,) + v[i + 1 :])
        out.append(v[:i] + (c - 1,) + v[i + 1 :])
    return out


def random_neighbor(v: Vertex, rng, geometry: Torus | None = None) -> Vertex:
    """One uniformly chosen neighbor; O(d) and allocation-light."""
    k = rng.randrange(2 * len(v))
    axis, sign = k >> 1, 1 - 2 * (k & 1)
    c = v[axis] + sign
    if geometry is not None:
        c %= geometry.side
    return v[:axis] + (c,) + v[axis + 1 :]


def canonicalize(v: Vertex) -> Vertex:
    """Orbit representative under coordinate permutations and sign flips:
    absolute values sorted nonincreasing."""
    return tuple(sorted((abs(c) for c in v), reverse=True))


def canonical_classes(d: int, max_coord: int) -> list[Vertex]:
    """All canonical classes with sup-norm <= max_coord, in sorted order."""
    classes = [
        tuple(reversed(combo))
        for combo in combinations_with_replacement(range(max_coord + 1), d)
    ]
    classes.sort()
    return classes


def class_neighbor_table(
    d: int, max_coord: int
) -> tuple[list[Vertex], dict[Vertex, int], np.ndarray]:
    """Adjacency of canonical classes with multiplicity.

    Returns (classes, index, nbr) where nbr[i] lists the class indices of
    the 2d lattice neighbors of class i's representative; a class reached
    twice appears twice (that IS its multiplicity for symmetric functions);
    neighbors with sup-norm > max_coord are marked -1.
    """
    classes = canonical_classes(d, max_coord)
    index = {c: i for i, c in enumerate(classes)}
    nbr = np.empty((len(classes), 2 * d), dtype=np.int64)
    for i, rep in enumerate(classes):
        col = 0
        for ax in range(d):
            for sign in (1, -1):
                moved = canonicalize(rep[:ax] + (rep[ax] + sign,) + rep[ax + 1 :])
                nbr[i, col] = index.get(moved, -1)
                col += 1
    return classes, index, nbr
