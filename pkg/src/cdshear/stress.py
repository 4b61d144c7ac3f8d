"""Statically admissible stress fields ``tau = grad psi`` with ``psi`` harmonic.

Two constructions:

* analytic families (:class:`Constant`, :class:`HarmonicPoly`,
  :class:`LogRadial`) sampled on the grid, with the induced traction written
  back into the domain;
* :func:`build_stress_numeric`, which solves the mixed Laplace problem for
  prescribed boundary tractions with a 5-point stencil and conjugate
  gradients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .errors import InvalidParameter, SolverDivergence
from .grid import EDGES, NORMALS, GridDomain, trapezoid_weights

__all__ = [
    "StressField",
    "Constant",
    "HarmonicPoly",
    "LogRadial",
    "build_stress_analytic",
    "build_stress_numeric",
    "divergence_residual",
    "boundary_residual",
    "laplace_matrix",
]


@dataclass
class StressField:
    tau: np.ndarray  # (ny, nx, 2)
    div_residual: float
    bc_residual: float
    psi: np.ndarray = None
    source: str = ""
    info: dict = field(default_factory=dict)

    @property
    def tau_sq(self) -> np.ndarray:
        return np.einsum("...k,...k->...", self.tau, self.tau)


# ---------------------------------------------------------------------------
# analytic families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    c1: float
    c2: float = 0.0

    def psi(self, x1, x2):
        return self.c1 * x1 + self.c2 * x2

    def grad(self, x1, x2):
        return np.full_like(x1, self.c1, dtype=float), np.full_like(x2, self.c2, dtype=float)

    def to_dict(self):
        return {"constant": [self.c1, self.c2]}


class HarmonicPoly:
    """``psi = sum c_pq x1^p x2^q``; the Laplacian is checked coefficientwise."""

    def __init__(self, coeffs, tol: float = 1e-12):
        if not isinstance(coeffs, dict):
            coeffs = {(int(p), int(q)): float(c) for p, q, c in coeffs}
        self.coeffs = {(int(p), int(q)): float(c) for (p, q), c in coeffs.items() if c != 0.0}
        if any(p < 0 or q < 0 for p, q in self.coeffs):
            raise InvalidParameter("polynomial exponents must be non-negative")
        lap = {}
        for (p, q), c in self.coeffs.items():
            if p >= 2:
                lap[(p - 2, q)] = lap.get((p - 2, q), 0.0) + c * p * (p - 1)
            if q >= 2:
                lap[(p, q - 2)] = lap.get((p, q - 2), 0.0) + c * q * (q - 1)
        scale = max([abs(c) for c in self.coeffs.values()] + [1.0])
        bad = {k: v for k, v in lap.items() if abs(v) > tol * scale}
        if bad:
            raise InvalidParameter(f"polynomial potential is not harmonic; Laplacian terms {bad}")

    def psi(self, x1, x2):
        x1 = np.asarray(x1, float)
        out = np.zeros_like(x1)
        for (p, q), c in self.coeffs.items():
            out = out + c * x1**p * np.asarray(x2, float) ** q
        return out

    def grad(self, x1, x2):
        x1 = np.asarray(x1, float)
        x2 = np.asarray(x2, float)
        g1 = np.zeros_like(x1)
        g2 = np.zeros_like(x1)
        for (p, q), c in self.coeffs.items():
            if p:
                g1 = g1 + c * p * x1 ** (p - 1) * x2**q
            if q:
                g2 = g2 + c * q * x1**p * x2 ** (q - 1)
        return g1, g2

    def to_dict(self):
        return {"harmonic_poly": [[p, q, c] for (p, q), c in sorted(self.coeffs.items())]}

    def __repr__(self):
        return f"HarmonicPoly({self.coeffs})"


@dataclass(frozen=True)
class LogRadial:
    """``psi = k log|x - x0|``; the centre must lie outside the closed domain."""

    k: float
    x0: float
    y0: float

    def psi(self, x1, x2):
        return 0.5 * self.k * np.log((x1 - self.x0) ** 2 + (x2 - self.y0) ** 2)

    def grad(self, x1, x2):
        d1, d2 = x1 - self.x0, x2 - self.y0
        r2 = d1 * d1 + d2 * d2
        return self.k * d1 / r2, self.k * d2 / r2

    def to_dict(self):
        return {"log_radial": [self.k, self.x0, self.y0]}


def _check_family(dom: GridDomain, family):
    if isinstance(family, LogRadial):
        ox, oy = dom.origin
        if ox <= family.x0 <= ox + dom.lx and oy <= family.y0 <= oy + dom.ly:
            raise InvalidParameter("log-radial centre lies inside the domain")
    elif not isinstance(family, (Constant, HarmonicPoly)):
        raise InvalidParameter(f"unsupported stress family {family!r}")


def build_stress_analytic(dom: GridDomain, family) -> StressField:
    """Sample ``tau = grad psi`` for a built-in harmonic potential.

    The traction ``n . tau`` is written into every traction edge of ``dom``.
    """
    _check_family(dom, family)
    X1, X2 = dom.mesh()
    g1, g2 = family.grad(X1, X2)
    tau = np.stack([np.broadcast_to(g1, X1.shape), np.broadcast_to(g2, X1.shape)], axis=-1).astype(float)
    for name in EDGES:
        if dom.edges[name].kind == "traction":
            n1, n2 = NORMALS[name]
            tt = tau[dom.edge_index(name)]
            dom.set_traction(name, n1 * tt[:, 0] + n2 * tt[:, 1])
    psi = np.asarray(family.psi(X1, X2), float) * np.ones_like(X1)
    return StressField(
        tau=tau,
        div_residual=divergence_residual(dom, tau),
        bc_residual=boundary_residual(dom, tau),
        psi=psi,
        source=type(family).__name__,
    )


# ---------------------------------------------------------------------------
# residuals
# ---------------------------------------------------------------------------


def divergence_residual(dom: GridDomain, tau: np.ndarray) -> float:
    """Max central-difference divergence at interior nodes."""
    d1 = (tau[1:-1, 2:, 0] - tau[1:-1, :-2, 0]) / (2.0 * dom.h1)
    d2 = (tau[2:, 1:-1, 1] - tau[:-2, 1:-1, 1]) / (2.0 * dom.h2)
    return float(np.max(np.abs(d1 + d2))) if d1.size else 0.0


def boundary_residual(dom: GridDomain, tau: np.ndarray) -> float:
    """Max ``|n . tau - t|`` over traction-edge nodes that are not fixed."""
    fixed = dom.fixed_mask()
    worst = 0.0
    for name in EDGES:
        t = dom.traction(name)
        if t is None:
            continue
        idx = dom.edge_index(name)
        n1, n2 = NORMALS[name]
        tt = tau[idx]
        r = np.abs(n1 * tt[:, 0] + n2 * tt[:, 1] - t)[~fixed[idx]]
        if r.size:
            worst = max(worst, float(r.max()))
    return worst


# ---------------------------------------------------------------------------
# numeric construction
# ---------------------------------------------------------------------------


def _lap1d(n, h):
    main = np.full(n, 2.0)
    main[0] = main[-1] = 1.0
    return sp.diags([-np.ones(n - 1), main, -np.ones(n - 1)], [-1, 0, 1]) / h


def laplace_matrix(dom: GridDomain) -> sp.csr_matrix:
    """Symmetric 5-point Neumann Laplacian with half/quarter weights on edges/corners.

    Rows are the ghost-node stencils scaled by the dual-cell area, which makes
    the matrix symmetric positive semi-definite; flattening is row-major.
    """
    Kx, Ky = _lap1d(dom.nx, dom.h1), _lap1d(dom.ny, dom.h2)
    Mx = sp.diags(trapezoid_weights(dom.nx, dom.h1))
    My = sp.diags(trapezoid_weights(dom.ny, dom.h2))
    return (sp.kron(My, Kx) + sp.kron(Ky, Mx)).tocsr()


def _traction_rhs(dom: GridDomain) -> np.ndarray:
    b = np.zeros(dom.shape)
    wx = trapezoid_weights(dom.nx, dom.h1)
    wy = trapezoid_weights(dom.ny, dom.h2)
    for name in EDGES:
        t = dom.traction(name)
        if t is None:
            continue
        w = wy if name in ("left", "right") else wx
        b[dom.edge_index(name)] += w * t
    return b


def build_stress_numeric(dom: GridDomain, t=None, rtol: float = 1e-12, maxiter: int = None) -> StressField:
    """Solve ``lap psi = 0``, ``n . grad psi = t`` on traction edges, ``psi = 0`` on fixed edges.

    ``t`` optionally maps edge names to samples and overrides the tractions in
    ``dom``. ``tau`` is the second-order finite-difference gradient of ``psi``.
    """
    if t:
        for name, vals in t.items():
            dom.set_traction(name, vals)
    dom.check_balance()
    A = laplace_matrix(dom)
    b = _traction_rhs(dom).ravel()
    free = ~dom.fixed_mask().ravel()
    Af = A[free][:, free]
    bf = b[free]
    if dom.pure_neumann:
        bf = bf - bf.mean()
    n = int(free.sum())
    if maxiter is None:
        maxiter = 50 * (dom.nx + dom.ny) + 1000
    diag = Af.diagonal()
    M = sp.diags(1.0 / diag)
    bnorm = float(np.linalg.norm(bf))
    psi = np.zeros(dom.nx * dom.ny)
    iters = 0
    if bnorm > 0.0:
        counter = {"k": 0}

        def cb(_):
            counter["k"] += 1

        x, info = cg(Af, bf, rtol=rtol, atol=0.0, maxiter=maxiter, M=M, callback=cb)
        iters = counter["k"]
        if info != 0:
            raise SolverDivergence(f"CG did not reach rtol={rtol:g} within {maxiter} iterations")
        psi[free] = x
    psi = psi.reshape(dom.shape)
    if dom.pure_neumann:
        psi -= psi[0, 0]
    g2, g1 = np.gradient(psi, dom.h2, dom.h1, edge_order=2)
    tau = np.stack([g1, g2], axis=-1)
    res = float(np.linalg.norm(Af @ psi.ravel()[free] - bf)) / max(bnorm, 1e-300) if bnorm else 0.0
    return StressField(
        tau=tau,
        div_residual=divergence_residual(dom, tau),
        bc_residual=boundary_residual(dom, tau),
        psi=psi,
        source="numeric",
        info={"cg_iterations": iters, "relative_residual": res, "unknowns": n},
    )
