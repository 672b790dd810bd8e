"""Finite-difference weights on arbitrary grids and per-point gradients.

Weights come from Fornberg's recursive algorithm (Math. Comp. 51, 1988),
which handles any set of distinct nodes. Gradients of a series are built
from small per-point stencils that are applied by the kernel backend, so the
same stencil can be reused for thousands of permuted series.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _backend
from .errors import (
    DegenerateGrid,
    InsufficientStencil,
    InvalidConfig,
    InvalidSeries,
    ShapeMismatch,
)

STENCIL_WIDTH = 3


@dataclass(frozen=True)
class DiffScheme:
    """How per-point derivatives are estimated.

    ``standard`` uses the 3-point centered stencil at interior points and a
    one-sided stencil of ``boundary_order`` at both ends. ``forward_only``
    uses the forward quotient at every point but the last, which gets the
    backward quotient; ``boundary_order`` is ignored there.
    """

    boundary_order: int = 1
    mode: str = "standard"
    interior: str = "central"

    def __post_init__(self):
        if self.boundary_order not in (1, 2):
            raise InvalidConfig(f"boundary_order must be 1 or 2, got {self.boundary_order!r}")
        if self.mode not in ("standard", "forward_only"):
            raise InvalidConfig(f"unknown difference mode {self.mode!r}")
        if self.interior != "central":
            raise InvalidConfig(f"unsupported interior stencil {self.interior!r}")

    @property
    def forward_only(self) -> bool:
        return self.mode == "forward_only"


FORWARD = DiffScheme(mode="forward_only")


def check_grid(points) -> np.ndarray:
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise DegenerateGrid("grid needs at least 2 points")
    if not np.all(np.isfinite(x)):
        raise DegenerateGrid("grid contains non-finite values")
    if not np.all(np.diff(x) > 0):
        raise DegenerateGrid("grid must be strictly increasing")
    return x


def fornberg_weights(grid_offsets, derivative_order: int, eval_point: float) -> np.ndarray:
    """Weights ``w`` with ``sum(w * f(grid))`` approximating ``f^(d)(eval_point)``.

    The approximation is exact for polynomials of degree below the number of
    nodes. Nodes may be in any order; weights are returned in node order.

    Parameters
    ----------
    grid_offsets : sequence of float
        Pairwise distinct node positions.
    derivative_order : int
        Derivative to approximate, ``0 <= d < len(grid_offsets)``.
    eval_point : float
        Where the derivative is evaluated.
    """
    x = np.asarray(grid_offsets, dtype=np.float64)
    n = x.size
    m = int(derivative_order)
    if m < 0:
        raise InvalidConfig("derivative_order must be nonnegative")
    if n == 0 or m >= n:
        raise InsufficientStencil(f"order {m} derivative needs more than {n} points")
    if np.unique(x).size != n:
        raise DegenerateGrid("duplicate grid points")
    if not (np.all(np.isfinite(x)) and np.isfinite(eval_point)):
        raise DegenerateGrid("non-finite grid point or evaluation point")

    z = float(eval_point)
    xs = x.tolist()
    c = [[0.0] * (m + 1) for _ in range(n)]
    c[0][0] = 1.0
    c1 = 1.0
    c4 = xs[0] - z
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = xs[i] - z
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2
            for k in range(mn, 0, -1):
                c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3
            c[j][0] = c4 * c[j][0] / c3
        c1 = c2
    return np.array([row[m] for row in c])


def _fornberg_batch(nodes: np.ndarray, m: int, z: np.ndarray) -> np.ndarray:
    """Fornberg recursion run on many same-size stencils at once.

    ``nodes`` is ``(P, s)`` and ``z`` is ``(P,)``; returns ``(P, s)`` weights
    for derivative ``m``. Every row performs the scalar recursion's operations
    in the same order, so each row equals the one-stencil result bit for bit.
    """
    P, n = nodes.shape
    c = np.zeros((P, n, m + 1))
    c[:, 0, 0] = 1.0
    c1 = np.ones(P)
    c4 = nodes[:, 0] - z
    for i in range(1, n):
        mn = min(i, m)
        c2 = np.ones(P)
        c5 = c4
        c4 = nodes[:, i] - z
        for j in range(i):
            c3 = nodes[:, i] - nodes[:, j]
            c2 = c2 * c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[:, i, k] = c1 * (k * c[:, i - 1, k - 1] - c5 * c[:, i - 1, k]) / c2
                c[:, i, 0] = -c1 * c5 * c[:, i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[:, j, k] = (c4 * c[:, j, k] - k * c[:, j, k - 1]) / c3
            c[:, j, 0] = c4 * c[:, j, 0] / c3
        c1 = c2
    return c[:, :, m]


def gradient_stencil(grid, scheme: DiffScheme = DiffScheme()):
    """Per-point first-derivative stencils as ``(indices, weights)``, both ``(n, 3)``.

    Unused stencil slots carry weight 0 and point at index 0. The returned
    arrays are read-only and may be shared between calls.
    """
    x = check_grid(grid)
    return _cached_stencil(x.tobytes(), scheme)


@lru_cache(maxsize=128)
def _cached_stencil(grid_bytes: bytes, scheme: DiffScheme):
    x = np.frombuffer(grid_bytes, dtype=np.float64)
    n = x.size
    idx = np.zeros((n, STENCIL_WIDTH), dtype=np.int64)
    w = np.zeros((n, STENCIL_WIDTH), dtype=np.float64)

    rows = []  # (point, node indices)
    if scheme.forward_only:
        rows += [(i, (i, i + 1)) for i in range(n - 1)]
        rows.append((n - 1, (n - 2, n - 1)))
    else:
        if n == 2 or scheme.boundary_order == 1:
            rows += [(0, (0, 1)), (n - 1, (n - 2, n - 1))]
        else:
            rows += [(0, (0, 1, 2)), (n - 1, (n - 3, n - 2, n - 1))]
        rows += [(i, (i - 1, i, i + 1)) for i in range(1, n - 1)]

    for size in (2, 3):
        group = [(i, nodes) for i, nodes in rows if len(nodes) == size]
        if not group:
            continue
        points = np.array([i for i, _ in group])
        nodes = np.array([nodes for _, nodes in group], dtype=np.int64)
        idx[points, :size] = nodes
        w[points, :size] = _fornberg_batch(x[nodes], 1, x[points])
    idx.flags.writeable = False
    w.flags.writeable = False
    return idx, w


def gradient_series(grid, outputs, scheme: DiffScheme = DiffScheme()) -> np.ndarray:
    """Estimate d(output)/d(property) at every grid point."""
    x = check_grid(grid)
    y = np.asarray(outputs, dtype=np.float64)
    if y.shape != x.shape:
        raise ShapeMismatch(f"{y.size} outputs for {x.size} grid points")
    if not np.all(np.isfinite(y)):
        raise InvalidSeries("outputs must be finite")
    idx, w = gradient_stencil(x, scheme)
    return _backend.kernels.apply_stencil(y, idx, w)
