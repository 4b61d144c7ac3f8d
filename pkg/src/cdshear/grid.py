"""Rectangular cross-sections on uniform grids.

Nodal arrays have shape ``(ny, nx)``: row ``j`` is ``x2 = j*h2``, column
``i`` is ``x1 = i*h1``. Each of the four edges is either fixed (``u = 0``) or
carries a traction ``t = n . tau`` sampled at its nodes in increasing
coordinate order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ForceImbalance, InvalidParameter
from .kernels import GAUSS_ST

__all__ = ["EDGES", "EdgeBC", "GridDomain", "nodal_to_gauss", "trapezoid_weights"]

EDGES = ("left", "right", "bottom", "top")
NORMALS = {"left": (-1.0, 0.0), "right": (1.0, 0.0), "bottom": (0.0, -1.0), "top": (0.0, 1.0)}


@dataclass
class EdgeBC:
    kind: str = "traction"
    t: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("fixed", "traction"):
            raise InvalidParameter(f"edge kind must be 'fixed' or 'traction', got {self.kind!r}")
        if self.t is not None:
            self.t = np.asarray(self.t, dtype=float)


def trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


@dataclass
class GridDomain:
    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0
    edges: dict = field(default_factory=dict)
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny or self.nx < 3 or self.ny < 3:
            raise InvalidParameter(f"need integer nx, ny >= 3, got {self.nx}x{self.ny}")
        self.nx, self.ny = int(self.nx), int(self.ny)
        if not (self.lx > 0 and self.ly > 0 and math.isfinite(self.lx) and math.isfinite(self.ly)):
            raise InvalidParameter("lx and ly must be positive and finite")
        unknown = set(self.edges) - set(EDGES)
        if unknown:
            raise InvalidParameter(f"unknown edge names {sorted(unknown)}")
        edges = {}
        for name in EDGES:
            bc = self.edges.get(name, EdgeBC())
            if isinstance(bc, str):
                bc = EdgeBC(bc)
            if bc.kind == "traction":
                n = self.edge_length_nodes(name)
                if bc.t is None:
                    bc = EdgeBC("traction", np.zeros(n))
                else:
                    tt = np.broadcast_to(np.asarray(bc.t, float), (n,)).copy()
                    if not np.all(np.isfinite(tt)):
                        raise InvalidParameter(f"non-finite traction on {name} edge")
                    bc = EdgeBC("traction", tt)
            edges[name] = bc
        self.edges = edges

    # -- geometry ----------------------------------------------------------
    @property
    def h1(self) -> float:
        return self.lx / (self.nx - 1)

    @property
    def h2(self) -> float:
        return self.ly / (self.ny - 1)

    @property
    def x1(self) -> np.ndarray:
        return self.origin[0] + self.h1 * np.arange(self.nx)

    @property
    def x2(self) -> np.ndarray:
        return self.origin[1] + self.h2 * np.arange(self.ny)

    def mesh(self):
        """``(X1, X2)`` nodal coordinates, each ``(ny, nx)``."""
        return np.meshgrid(self.x1, self.x2)

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def perimeter(self) -> float:
        return 2.0 * (self.lx + self.ly)

    @property
    def shape(self):
        return (self.ny, self.nx)

    def edge_length_nodes(self, name: str) -> int:
        return self.ny if name in ("left", "right") else self.nx

    def edge_index(self, name: str):
        """Index expression selecting the nodes of an edge from a nodal array."""
        return {
            "left": (slice(None), 0),
            "right": (slice(None), -1),
            "bottom": (0, slice(None)),
            "top": (-1, slice(None)),
        }[name]

    def edge_coords(self, name: str) -> np.ndarray:
        X1, X2 = self.mesh()
        idx = self.edge_index(name)
        return np.stack([X1[idx], X2[idx]], axis=-1)

    # -- boundary partition ------------------------------------------------
    @property
    def fixed_edges(self):
        return [n for n in EDGES if self.edges[n].kind == "fixed"]

    @property
    def pure_neumann(self) -> bool:
        return not self.fixed_edges

    def fixed_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for name in self.fixed_edges:
            mask[self.edge_index(name)] = True
        return mask

    def anchor(self):
        """``(j, i)`` of the reconstruction anchor.

        The lexicographically first fixed node ordered by ``(i, j)``, i.e. by
        ``x1`` then ``x2``; the corner ``(0, 0)`` for pure traction problems.
        """
        mask = self.fixed_mask()
        if not mask.any():
            return (0, 0)
        jj, ii = np.nonzero(mask)
        k = np.lexsort((jj, ii))[0]
        return int(jj[k]), int(ii[k])

    def traction(self, name: str) -> Optional[np.ndarray]:
        bc = self.edges[name]
        return None if bc.kind == "fixed" else bc.t

    def set_traction(self, name: str, t) -> None:
        if self.edges[name].kind != "traction":
            raise InvalidParameter(f"{name} edge is fixed")
        n = self.edge_length_nodes(name)
        self.edges[name] = EdgeBC("traction", np.broadcast_to(np.asarray(t, float), (n,)).copy())

    def net_force(self) -> float:
        """Trapezoid-rule integral of ``t`` over the traction edges."""
        total = 0.0
        for name in EDGES:
            t = self.traction(name)
            if t is None:
                continue
            h = self.h2 if name in ("left", "right") else self.h1
            total += float(trapezoid_weights(t.size, h) @ t)
        return total

    def check_balance(self, rtol: float = 1e-10) -> float:
        """Raise :class:`ForceImbalance` for unbalanced pure traction data."""
        f = self.net_force()
        if self.pure_neumann:
            tmax = max(float(np.max(np.abs(self.edges[n].t))) for n in EDGES)
            if abs(f) > rtol * self.perimeter * max(1.0, tmax):
                raise ForceImbalance(f"net boundary force {f:.3e} does not vanish on a pure traction problem")
        return f

    def with_shape(self, nx: int, ny: int) -> "GridDomain":
        """Same geometry and edge kinds on another grid; tractions are reset to zero."""
        return GridDomain(nx, ny, self.lx, self.ly, {n: EdgeBC(self.edges[n].kind) for n in EDGES}, self.origin)

    def to_dict(self) -> dict:
        return {
            "nx": self.nx,
            "ny": self.ny,
            "lx": self.lx,
            "ly": self.ly,
            "edges": {n: self.edges[n].kind for n in EDGES},
        }


def nodal_to_gauss(f: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of nodal values ``(ny, nx, ...)`` to cell Gauss points.

    Returns ``(ny-1, nx-1, 4, ...)`` in the kernel's Gauss-point order.
    """
    f = np.asarray(f, dtype=float)
    f00, f10 = f[:-1, :-1], f[:-1, 1:]
    f01, f11 = f[1:, :-1], f[1:, 1:]
    out = []
    for s, t in GAUSS_ST:
        out.append((1 - s) * (1 - t) * f00 + s * (1 - t) * f10 + (1 - s) * t * f01 + s * t * f11)
    return np.stack(out, axis=2)
