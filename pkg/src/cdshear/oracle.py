"""Direct minimization of the discrete primal potential.

This path never touches the dual equation: it evaluates

    Pi_h(u) = sum over cells of [V(alpha |grad u|^2 + beta) - grad u . tau] h1 h2

with bilinear elements and 2x2 Gauss quadrature, and runs Armijo-backtracked
descent from many random starts. Its minima are compared against the dual
field energies.

The search direction is the negative gradient in the discrete H^1 inner
product (the gradient preconditioned by the grid stiffness matrix). Without
it the Euclidean gradient on a 65x65 grid has a condition number in the
thousands and plain descent cannot meet the tolerance within the iteration
cap.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import splu

from . import kernels
from .errors import DomainError, InvalidParameter
from .grid import GridDomain, nodal_to_gauss
from .materials import CanonicalMaterial, QuadraticMeasure
from .stress import StressField, laplace_matrix

__all__ = [
    "discrete_potential",
    "discrete_gradient",
    "potential_and_gradient",
    "multistart_minimize",
    "OracleResult",
    "StartRecord",
    "Cluster",
    "worker_count",
]

ARMIJO_C = 1e-4
SHRINK = 0.5
MAXITER = 50_000
AMPLITUDES = (0.0, 0.1, 1.0, 10.0)
ENERGY_GAP = 1e-6
FINGERPRINT_DIGITS = 5


def worker_count(requested=None) -> int:
    """Worker cap: explicit request, else ``CDSHEAR_THREADS``, else CPU count."""
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("CDSHEAR_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InvalidParameter(f"CDSHEAR_THREADS must be an integer, got {env!r}") from None
    return max(1, os.cpu_count() or 1)


def _tau_gauss(tau):
    tau = tau.tau if isinstance(tau, StressField) else np.asarray(tau, float)
    if tau.ndim == 3:
        return np.ascontiguousarray(nodal_to_gauss(tau))
    return np.ascontiguousarray(tau)


def _energy_fn(m):
    def fn(xi, want):
        return np.asarray(m.V(xi), float), (np.asarray(m.dV(xi), float) if want else None)

    return fn


def potential_and_gradient(dom: GridDomain, m: CanonicalMaterial, meas: QuadraticMeasure, tau_g, u, want_grad=True):
    """``(Pi_h, dPi_h/du)`` with ``tau_g`` given at Gauss points."""
    u = np.asarray(u, float)
    if u.shape != dom.shape:
        raise InvalidParameter(f"u has shape {u.shape}, grid is {dom.shape}")
    p = m.poly()
    if p is not None:
        coeffs, center = p
        E, g, xi_min = kernels.potential_and_gradient(u, tau_g, dom.h1, dom.h2, meas.alpha, meas.beta, coeffs, center, want_grad)
        if xi_min < m.domain_lo:
            raise DomainError(f"xi={xi_min:.6g} below domain_lo={m.domain_lo:.6g}")
    else:
        E, g, _ = kernels.potential_and_gradient_callable(u, tau_g, dom.h1, dom.h2, meas.alpha, meas.beta, _energy_fn(m), want_grad)
    return float(E), g


def discrete_potential(dom, m, meas, tau, u) -> float:
    """Discrete total potential; ``tau`` is nodal ``(ny, nx, 2)``, Gauss-point, or a StressField."""
    return potential_and_gradient(dom, m, meas, _tau_gauss(tau), u, want_grad=False)[0]


def discrete_gradient(dom, m, meas, tau, u) -> np.ndarray:
    """Exact gradient of :func:`discrete_potential` with respect to nodal values."""
    return potential_and_gradient(dom, m, meas, _tau_gauss(tau), u, want_grad=True)[1]


# ---------------------------------------------------------------------------
# multistart
# ---------------------------------------------------------------------------


@dataclass
class StartRecord:
    index: int
    amplitude: float
    Pi: float
    gnorm: float
    iterations: int
    converged: bool


@dataclass
class Cluster:
    Pi: float
    fingerprint: tuple
    starts: list
    gnorm: float
    u: np.ndarray = field(repr=False)

    def to_dict(self):
        return {"Pi": self.Pi, "fingerprint": list(self.fingerprint), "starts": list(self.starts), "gnorm": self.gnorm}


@dataclass
class OracleResult:
    u_best: np.ndarray
    Pi_best: float
    local_minima: list
    n_starts: int
    converged_fraction: float
    starts: list
    gtol: float

    def to_dict(self):
        return {
            "Pi_best": self.Pi_best,
            "n_starts": self.n_starts,
            "converged_fraction": self.converged_fraction,
            "gtol": self.gtol,
            "clusters": [c.to_dict() for c in self.local_minima],
            "starts": [vars(s).copy() for s in self.starts],
        }


def probe_nodes(dom: GridDomain):
    ny, nx = dom.shape
    return [(ny // 2, nx // 2), (ny // 4, nx // 4), (ny // 4, (3 * nx) // 4), ((3 * ny) // 4, nx // 4), ((3 * ny) // 4, (3 * nx) // 4)]


def _smooth_start(dom, rng, amplitude, free, modes=4):
    if amplitude == 0.0:
        return np.zeros(dom.shape)
    X1, X2 = dom.mesh()
    s1 = (X1 - dom.origin[0]) / dom.lx
    s2 = (X2 - dom.origin[1]) / dom.ly
    u = np.zeros(dom.shape)
    for kx in range(modes + 1):
        for ky in range(modes + 1):
            if kx == ky == 0:
                continue
            a, b = rng.standard_normal(2) / (kx * kx + ky * ky)
            u += a * np.cos(math.pi * kx * s1) * np.cos(math.pi * ky * s2)
            u += b * np.sin(math.pi * (kx + 0.5) * s1) * np.sin(math.pi * (ky + 0.5) * s2)
    u *= amplitude / max(float(np.max(np.abs(u))), 1e-300)
    u[~free] = 0.0
    return u


def _free_mask(dom):
    free = ~dom.fixed_mask()
    if dom.pure_neumann:
        free[0, 0] = False
    return free


def _descend(dom, m, meas, tau_g, u0, free, gtol, maxiter):
    fi = free.ravel()
    lu = splu(laplace_matrix(dom)[fi][:, fi].tocsc())
    u = u0.copy()

    def ev(v):
        try:
            E, g = potential_and_gradient(dom, m, meas, tau_g, v)
        except DomainError:
            return math.inf, None
        return E, g

    E, g = ev(u)
    if g is None:
        raise DomainError("starting field leaves the energy domain")
    step = 1.0
    it = 0
    gf = g.ravel()[fi]
    gnorm = float(np.linalg.norm(gf))
    while gnorm > gtol and it < maxiter:
        d = -lu.solve(gf)
        slope = float(gf @ d)
        if slope >= 0.0:  # preconditioner lost definiteness numerically
            d, slope = -gf, -gnorm * gnorm
        step = min(1e6, 2.0 * step)
        while True:
            v = u.copy()
            v.ravel()[fi] += step * d
            Ev, gv = ev(v)
            if Ev <= E + ARMIJO_C * step * slope:
                break
            step *= SHRINK
            if step < 1e-30:
                break
        if step < 1e-30:
            break
        u, E, g = v, Ev, gv
        gf = g.ravel()[fi]
        gnorm = float(np.linalg.norm(gf))
        it += 1
    return u, E, gnorm, it


def multistart_minimize(
    dom: GridDomain,
    m: CanonicalMaterial,
    meas: QuadraticMeasure,
    tau,
    n_starts: int = 20,
    seed: int = 0,
    gtol: float = None,
    maxiter: int = MAXITER,
    amplitudes=AMPLITUDES,
    ref_scale: float = None,
    workers: int = None,
    field_tol: float = 1e-3,
) -> OracleResult:
    """Armijo descent from ``n_starts`` seeded random fields, minima clustered.

    Start ``k`` uses amplitude ``amplitudes[k % len(amplitudes)] * ref_scale``
    and its own child stream of ``SeedSequence(seed)``, so results do not
    depend on the worker count. Two converged minima share a cluster when
    their energies differ by at most ``1e-6`` (relative to ``max(1, |Pi|)``)
    and their fields agree to ``field_tol * (1 + max|u|)`` in the max norm.
    """
    if n_starts < 1:
        raise InvalidParameter("n_starts must be >= 1")
    tau_g = _tau_gauss(tau)
    tau_n = tau.tau if isinstance(tau, StressField) else None
    free = _free_mask(dom)
    if gtol is None:
        gtol = 1e-8 * math.sqrt(dom.nx * dom.ny)
    if ref_scale is None:
        tmax = float(np.max(np.abs(tau_n))) if tau_n is not None else float(np.max(np.abs(tau_g)))
        ref_scale = max(dom.lx, dom.ly) * max(1.0, tmax)
    children = np.random.SeedSequence(seed).spawn(n_starts)

    def run(k):
        rng = np.random.Generator(np.random.PCG64(children[k]))
        amp = amplitudes[k % len(amplitudes)] * ref_scale
        u0 = _smooth_start(dom, rng, amp, free)
        u, E, gn, it = _descend(dom, m, meas, tau_g, u0, free, gtol, maxiter)
        return StartRecord(k, amp, E, gn, it, gn <= gtol), u

    nw = min(worker_count(workers), n_starts)
    if nw > 1:
        with ThreadPoolExecutor(max_workers=nw) as ex:
            results = list(ex.map(run, range(n_starts)))
    else:
        results = [run(k) for k in range(n_starts)]

    probes = probe_nodes(dom)
    clusters = []
    for rec, u in results:
        if not rec.converged:
            continue
        for c in clusters:
            same_e = abs(c.Pi - rec.Pi) <= ENERGY_GAP * max(1.0, abs(c.Pi))
            same_u = float(np.max(np.abs(c.u - u))) <= field_tol * (1.0 + float(np.max(np.abs(c.u))))
            if same_e and same_u:
                c.starts.append(rec.index)
                if rec.Pi < c.Pi:
                    c.Pi, c.u, c.gnorm = rec.Pi, u, rec.gnorm
                break
        else:
            clusters.append(Cluster(rec.Pi, (), [rec.index], rec.gnorm, u))
    for c in clusters:
        c.fingerprint = (round(c.Pi, FINGERPRINT_DIGITS),) + tuple(round(float(c.u[p]), FINGERPRINT_DIGITS) for p in probes)
    clusters.sort(key=lambda c: (c.Pi, c.starts[0]))
    starts = [r for r, _ in results]
    if clusters:
        best_u, best = clusters[0].u, clusters[0].Pi
    else:
        r, u = min(results, key=lambda t: (t[0].Pi, t[0].index))
        best_u, best = u, r.Pi
    return OracleResult(
        u_best=best_u,
        Pi_best=float(best),
        local_minima=clusters,
        n_starts=n_starts,
        converged_fraction=sum(r.converged for r in starts) / n_starts,
        starts=starts,
        gtol=gtol,
    )
