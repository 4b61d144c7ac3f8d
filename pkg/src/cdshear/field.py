"""Field-level dual solve and displacement reconstruction.

Given an admissible stress field ``tau`` the dual equation is solved at every
node, a branch is assembled with a fixed branch index (``0`` is the positive,
globally minimizing branch), and the displacement is recovered from
``grad u = gamma = tau / (2 alpha zeta)`` by trapezoidal integration along the
two axis-aligned staircase paths from an anchor node, averaged.

Nothing guarantees that ``gamma`` is a gradient when ``zeta`` varies in
space, so every field carries the measured cell circulation of ``gamma``
(``curl_residual``) and is marked ``approximate`` when it is large.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dual import Label, branch_table, evaluate_branches
from .errors import InvalidParameter
from .grid import EDGES, EdgeBC, GridDomain, nodal_to_gauss
from .kernels import _cell_gauss_gradients
from .materials import CanonicalMaterial, QuadraticMeasure
from .stress import (
    Constant,
    HarmonicPoly,
    LogRadial,
    StressField,
    build_stress_analytic,
    build_stress_numeric,
)

__all__ = [
    "GridDomain",
    "EdgeBC",
    "StressField",
    "Constant",
    "HarmonicPoly",
    "LogRadial",
    "build_stress_analytic",
    "build_stress_numeric",
    "SolutionField",
    "solve_field",
    "reconstruct_displacement",
    "curl_residual",
    "gap_functional",
    "dual_total",
    "GLOBAL",
    "ALL_BRANCHES",
]

GLOBAL = "global"
ALL_BRANCHES = "all"
CURL_RTOL = 1e-3


@dataclass
class SolutionField:
    branch_id: int
    zeta: np.ndarray
    gamma: np.ndarray
    u: np.ndarray
    labels: np.ndarray  # Label codes per node
    curl_residual: float
    Pi_primal: float
    Pi_dual: float
    gap_value: float
    approximate: bool
    complete: bool = True
    flagged: Optional[np.ndarray] = None
    residual_max: float = 0.0
    grad_mismatch: float = 0.0
    bc_violation: float = 0.0
    mixed: bool = False
    P_nodal: Optional[np.ndarray] = field(default=None, repr=False)
    Pd_nodal: Optional[np.ndarray] = field(default=None, repr=False)

    def label_counts(self) -> dict:
        out = {}
        valid = ~self.flagged if self.flagged is not None else np.ones(self.labels.shape, bool)
        for code in np.unique(self.labels[valid]):
            out[Label.from_code(code).value] = int(np.sum(self.labels[valid] == code))
        return out

    def summary(self) -> dict:
        def num(x):
            return None if not np.isfinite(x) else float(x)

        return {
            "branch_id": self.branch_id,
            "complete": self.complete,
            "approximate": self.approximate,
            "mixed": self.mixed,
            "n_flagged": int(self.flagged.sum()) if self.flagged is not None else 0,
            "labels": self.label_counts(),
            "zeta_min": num(np.nanmin(self.zeta)) if np.isfinite(self.zeta).any() else None,
            "zeta_max": num(np.nanmax(self.zeta)) if np.isfinite(self.zeta).any() else None,
            "Pi_primal": num(self.Pi_primal),
            "Pi_dual": num(self.Pi_dual),
            "duality_gap": num(self.Pi_primal - self.Pi_dual),
            "gap_value": num(self.gap_value),
            "curl_residual": num(self.curl_residual),
            "residual_max": num(self.residual_max),
            "grad_mismatch": num(self.grad_mismatch),
            "bc_violation": num(self.bc_violation),
        }


# ---------------------------------------------------------------------------
# reconstruction and diagnostics
# ---------------------------------------------------------------------------


def _cumtrapz(f, h, axis):
    f = np.moveaxis(f, axis, -1)
    c = np.zeros_like(f)
    c[..., 1:] = np.cumsum(0.5 * h * (f[..., 1:] + f[..., :-1]), axis=-1)
    return np.moveaxis(c, -1, axis)


def reconstruct_displacement(gamma: np.ndarray, dom: GridDomain, anchor=None) -> np.ndarray:
    """Integrate ``gamma`` (ny, nx, 2) from ``anchor`` along both staircase paths, averaged."""
    ja, ia = dom.anchor() if anchor is None else anchor
    C1 = _cumtrapz(gamma[..., 0], dom.h1, axis=1)  # along rows
    C2 = _cumtrapz(gamma[..., 1], dom.h2, axis=0)  # along columns
    # x1 first along row ja, then x2 along each column
    u_xy = (C1[ja, :] - C1[ja, ia])[None, :] + (C2 - C2[ja, :][None, :])
    # x2 first along column ia, then x1 along each row
    u_yx = (C2[:, ia] - C2[ja, ia])[:, None] + (C1 - C1[:, ia][:, None])
    return 0.5 * (u_xy + u_yx)


def curl_residual(gamma: np.ndarray, dom: GridDomain) -> float:
    """Largest trapezoid-rule circulation of ``gamma`` around a grid cell."""
    g1, g2 = gamma[..., 0], gamma[..., 1]
    h1, h2 = dom.h1, dom.h2
    circ = (
        0.5 * h1 * (g1[:-1, :-1] + g1[:-1, 1:])
        + 0.5 * h2 * (g2[:-1, 1:] + g2[1:, 1:])
        - 0.5 * h1 * (g1[1:, :-1] + g1[1:, 1:])
        - 0.5 * h2 * (g2[:-1, :-1] + g2[1:, :-1])
    )
    if not np.isfinite(circ).any():
        return float("nan")
    return float(np.nanmax(np.abs(circ)))


def gap_functional(zeta: np.ndarray, probe: np.ndarray, dom: GridDomain) -> float:
    """``sum over cells of zeta |grad probe|^2 h1 h2`` with 2x2 Gauss quadrature."""
    g = _cell_gauss_gradients(np.asarray(probe, float), dom.h1, dom.h2)
    zg = nodal_to_gauss(np.asarray(zeta, float))
    return float(0.25 * dom.h1 * dom.h2 * np.sum(zg * np.einsum("...k,...k->...", g, g)))


def dual_total(Pd_nodal: np.ndarray, dom: GridDomain) -> float:
    """Cell-averaged nodal dual energy density times cell area."""
    cells = 0.25 * (Pd_nodal[:-1, :-1] + Pd_nodal[:-1, 1:] + Pd_nodal[1:, :-1] + Pd_nodal[1:, 1:])
    return float(dom.h1 * dom.h2 * cells.sum())


def _grad_mismatch(u, gamma, dom):
    if dom.nx < 3 or dom.ny < 3:
        return 0.0
    d1 = (u[1:-1, 2:] - u[1:-1, :-2]) / (2 * dom.h1)
    d2 = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2 * dom.h2)
    r = np.maximum(np.abs(d1 - gamma[1:-1, 1:-1, 0]), np.abs(d2 - gamma[1:-1, 1:-1, 1]))
    return float(np.nanmax(r)) if np.isfinite(r).any() else float("nan")


# ---------------------------------------------------------------------------
# field solve
# ---------------------------------------------------------------------------


def _assemble(dom, m, meas, stress, zeta, branch_id, curl_rtol, mixed=False):
    from .oracle import discrete_potential

    shape = dom.shape
    tau = stress.tau.reshape(-1, 2)
    flagged = ~np.isfinite(zeta)
    zf = np.where(flagged, 1.0, zeta)
    ev = evaluate_branches(m, meas, zf, tau)
    gamma = ev["gamma"].reshape(shape + (2,))
    labels = ev["codes"].reshape(shape)
    P = ev["P_primal"].reshape(shape)
    Pd = ev["P_dual"].reshape(shape)
    flagged = flagged.reshape(shape)
    zeta = zeta.reshape(shape)
    # degenerate zero-load nodes have no well-defined strain direction
    flagged |= zeta == 0.0
    if flagged.any():
        gamma[flagged] = np.nan
        P[flagged] = np.nan
        Pd[flagged] = np.nan
    complete = not flagged.any()
    resid = float(np.max(ev["residual"][~flagged.ravel()])) if (~flagged).any() else float("nan")
    u = reconstruct_displacement(gamma, dom)
    curl = curl_residual(gamma, dom)
    gmax = float(np.nanmax(np.linalg.norm(gamma, axis=-1))) if np.isfinite(gamma).any() else 0.0
    approximate = (not complete) or not (curl <= curl_rtol * max(gmax, 1e-300))
    if complete:
        Pi = discrete_potential(dom, m, meas, stress.tau, u)
        Pi_d = dual_total(Pd, dom)
        gap = gap_functional(zeta, u, dom)
        fixed = dom.fixed_mask()
        bcv = float(np.max(np.abs(u[fixed]))) if fixed.any() else 0.0
    else:
        Pi = Pi_d = gap = bcv = float("nan")
    return SolutionField(
        branch_id=branch_id,
        zeta=zeta,
        gamma=gamma,
        u=u,
        labels=labels,
        curl_residual=curl,
        Pi_primal=Pi,
        Pi_dual=Pi_d,
        gap_value=gap,
        approximate=approximate,
        complete=complete,
        flagged=flagged,
        residual_max=resid,
        grad_mismatch=_grad_mismatch(u, gamma, dom),
        bc_violation=bcv,
        mixed=mixed,
        P_nodal=P,
        Pd_nodal=Pd,
    )


def solve_field(
    dom: GridDomain,
    m: CanonicalMaterial,
    meas: QuadraticMeasure,
    stress: StressField,
    branch_select: str = GLOBAL,
    curl_rtol: float = CURL_RTOL,
    mixed_pattern: Optional[np.ndarray] = None,
) -> list:
    """Solve the dual equation at every node and assemble branch fields.

    ``branch_select="global"`` returns the single positive branch;
    ``"all"`` returns one field per branch index ``k`` (roots sorted
    descending at each node). Nodes lacking root ``k`` are flagged and the
    field is reported incomplete with NaN energies.

    ``mixed_pattern`` (experimental) is an integer ``(ny, nx)`` array of
    per-node branch indices; when given, a single mixed field is returned.
    """
    if stress.tau.shape != dom.shape + (2,):
        raise InvalidParameter(f"stress field shape {stress.tau.shape} does not match grid {dom.shape}")
    tau_sq = stress.tau_sq.ravel()
    zeta_tab, _ = branch_table(m, meas, tau_sq)
    n = tau_sq.size
    if mixed_pattern is not None:
        pat = np.asarray(mixed_pattern, dtype=int).ravel()
        if pat.size != n or pat.min() < 0:
            raise InvalidParameter("mixed_pattern must be a non-negative integer array of grid shape")
        z = np.full(n, np.nan)
        ok = pat < zeta_tab.shape[1]
        z[ok] = zeta_tab[np.arange(n)[ok], pat[ok]]
        return [_assemble(dom, m, meas, stress, z, -1, curl_rtol, mixed=True)]
    if branch_select == GLOBAL:
        ids = [0]
    elif branch_select == ALL_BRANCHES:
        ids = list(range(zeta_tab.shape[1]))
    else:
        raise InvalidParameter(f"branch_select must be 'global' or 'all', got {branch_select!r}")
    return [_assemble(dom, m, meas, stress, zeta_tab[:, k].copy(), k, curl_rtol) for k in ids]
