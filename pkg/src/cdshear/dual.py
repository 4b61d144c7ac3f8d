"""Pointwise canonical dual solve and triality classification.

For a load ``tau`` the total energy density ``P(gamma) = V(alpha|gamma|^2 +
beta) - gamma . tau`` has critical points ``gamma = tau / (2 alpha zeta)``
where ``zeta`` solves the dual algebraic equation

    4 alpha zeta^2 (dV*(zeta) - beta) = tau^2 .

The dual energy is ``P^d(zeta) = beta zeta - V*(zeta) - tau^2/(4 alpha zeta)``
and equals ``P`` at each critical point. The Hessian of ``V(Lambda(gamma))``
has eigenvalues ``2 alpha zeta`` (multiplicity ``dim - 1``) and
``2 alpha zeta + 4 alpha^2 V''(xi) |gamma|^2``; its signature together with
the sign of ``zeta`` labels each branch.

Note that for ``dim >= 2`` a branch with ``zeta < 0`` always has the
negative eigenvalue ``2 alpha zeta``; local minima on the negative side only
occur for scalar gradients (``dim == 1``).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.optimize import brentq

from . import kernels
from .errors import DegenerateBranch, DomainError, NoBranch, RangeError
from .materials import Affine, CanonicalMaterial, NumericConvex, PolynomialConvex, Quadratic, QuadraticMeasure

__all__ = [
    "Label",
    "DualBranch",
    "solve_dual_equation",
    "classify_branch",
    "hessian_eigenvalues",
    "dual_energy",
    "primal_energy_density",
    "solve_homogeneous_3d",
    "dual_roots",
    "companion_roots",
    "branch_table",
    "evaluate_branches",
    "negative_bracket",
]

N_SCAN = 512
SCAN_EPS = 1e-12


class Label(str, enum.Enum):
    GLOBAL_MIN = "global_min"
    LOCAL_MIN = "local_min"
    LOCAL_MAX = "local_max"
    DEGENERATE = "degenerate"
    UNDETERMINED = "undetermined"

    @property
    def code(self) -> int:
        return _LABEL_CODES[self]

    @classmethod
    def from_code(cls, code: int) -> "Label":
        return _LABELS[int(code)]


_LABELS = [Label.GLOBAL_MIN, Label.LOCAL_MIN, Label.LOCAL_MAX, Label.DEGENERATE, Label.UNDETERMINED]
_LABEL_CODES = {lab: i for i, lab in enumerate(_LABELS)}


@dataclass(frozen=True)
class DualBranch:
    zeta: float
    gamma: np.ndarray
    label: Label
    P_primal: float
    P_dual: float
    residual: float
    xi: float
    multiplicity: int = 1
    eigenvalues: tuple = ()
    admissible: Optional[bool] = None

    def to_dict(self) -> dict:
        return {
            "zeta": self.zeta,
            "gamma": np.asarray(self.gamma).tolist(),
            "label": self.label.value,
            "P_primal": self.P_primal,
            "P_dual": self.P_dual,
            "residual": self.residual,
            "xi": self.xi,
            "multiplicity": self.multiplicity,
            "eigenvalues": list(self.eigenvalues),
            "admissible": self.admissible,
        }


# ---------------------------------------------------------------------------
# roots
# ---------------------------------------------------------------------------


def negative_bracket(m: CanonicalMaterial, meas: QuadraticMeasure) -> float:
    """Half-width of the negative-branch scan ``[-B, -eps]``."""
    ref = m._reference_xi()
    slope = abs(float(m.dV(ref)))
    return 10.0 * (abs(meas.beta) + 1.0) * max(1.0, slope)


def dual_roots(m: CanonicalMaterial, meas: QuadraticMeasure, tau_sq: float, n_scan: int = N_SCAN):
    """Distinct admissible real roots ``[(zeta, multiplicity), ...]``, descending."""
    tau_sq = float(tau_sq)
    if tau_sq < 0:
        raise ValueError("tau_sq must be non-negative")
    if isinstance(m, Affine):
        return [(m.A, 1)]
    if isinstance(m, Quadratic):
        roots = _quadratic_roots(m, meas, np.array([tau_sq]))
        return [(z, k) for z, k in roots[0]]
    if tau_sq == 0.0:
        return _zero_load_roots(m, meas)
    if isinstance(m, PolynomialConvex):
        out = _polynomial_roots(m, meas, tau_sq)
    else:
        out = _numeric_roots(m, meas, tau_sq, n_scan)
    if tau_sq > 0 and not out:
        raise NoBranch(f"no real dual root found for tau^2={tau_sq:.6g} with {m.kind} energy")
    return out


def _zero_load_roots(m: CanonicalMaterial, meas: QuadraticMeasure):
    """At ``tau = 0`` the roots are ``zeta = 0`` (if ``dV*(0) >= beta``) and ``zeta = V'(beta)``."""
    out = []
    if meas.beta >= m.domain_lo:
        z = float(m.dV(meas.beta))
        if z != 0.0:
            out.append((z, 1))
    xi0 = _try_dvstar(m, 0.0)
    if np.isfinite(xi0) and xi0 >= meas.beta:
        out.append((0.0, 2))
    return sorted(out, key=lambda t: -t[0])


def _cubic_coeffs(m: Quadratic, meas: QuadraticMeasure, tau_sq):
    a = 4.0 * meas.alpha / m.h0
    b = 4.0 * meas.alpha * (m.xi0 - meas.beta)
    return a, b, 0.0, -np.asarray(tau_sq, dtype=float)


def _quadratic_roots(m: Quadratic, meas: QuadraticMeasure, tau_sq):
    a, b, c, d = _cubic_coeffs(m, meas, tau_sq)
    roots, mult, count = kernels.cubic_real_roots(a, b, c, d)
    out = []
    for r, k, n in zip(roots, mult, count):
        row = []
        for z, mk in zip(r[:n], k[:n]):
            xi = m.xi0 + z / m.h0
            if xi < m.domain_lo:
                continue
            if z == 0.0 and xi < meas.beta:
                continue
            row.append((float(z), int(mk)))
        out.append(row)
    return out


def companion_roots(m: Quadratic, meas: QuadraticMeasure, tau_sq: float):
    """Real roots of the quadratic-energy cubic from companion-matrix eigenvalues."""
    a, b, c, d = _cubic_coeffs(m, meas, tau_sq)
    comp = np.zeros((3, 3))
    comp[1, 0] = comp[2, 1] = 1.0
    comp[:, 2] = -np.array([float(d), c, b]) / a
    ev = np.linalg.eigvals(comp)
    scale = 1.0 + np.abs(ev)
    return np.sort(ev[np.abs(ev.imag) <= 1e-7 * scale].real)[::-1]


def _merge(roots, rtol=1e-7):
    """Merge nearly-equal roots, keeping multiplicities; input is [(z, k)]."""
    roots = sorted(roots, key=lambda t: -t[0])
    out = []
    for z, k in roots:
        if out and abs(out[-1][0] - z) <= rtol * (1.0 + abs(z)):
            z0, k0 = out[-1]
            out[-1] = ((z0 * k0 + z * k) / (k0 + k), k0 + k)
        else:
            out.append((z, k))
    return out


def _polynomial_roots(m: PolynomialConvex, meas: QuadraticMeasure, tau_sq: float):
    c = np.asarray(m.coeffs)
    d1 = npoly.polyder(c)
    d2 = npoly.polyder(d1)
    # f(s) = 4 alpha D(s)^2 (s + center - beta) - tau^2 with s = xi - center
    f = 4.0 * meas.alpha * npoly.polymul(npoly.polymul(d1, d1), [m.center - meas.beta, 1.0])
    f[0] -= tau_sq
    fp = npoly.polyder(f)
    lo = max(meas.beta, m.domain_lo)
    found = []
    for r in npoly.polyroots(f):
        if abs(r.imag) > 1e-6 * (1.0 + abs(r.real)):
            continue
        s = r.real
        for _ in range(4):
            fv, fpv = npoly.polyval(s, f), npoly.polyval(s, fp)
            if fpv == 0.0:
                break
            sn = s - fv / fpv
            if abs(npoly.polyval(sn, f)) >= abs(fv):
                break
            s = sn
        xi = s + m.center
        if xi < lo - 1e-10 * (1.0 + abs(lo)):
            continue
        if npoly.polyval(s, d2) < -1e-12:
            continue
        found.append((float(npoly.polyval(s, d1)), 1))
    # The two roots near zeta = 0 sit at a near-double root in s, which polyroots
    # resolves only to ~sqrt(eps). Below that scale take them from zeta-space.
    z_small = 1e-6 * max(1.0, max((abs(z) for z, _ in found), default=0.0))
    gap0 = _gap_at_zero(m, meas)
    if tau_sq > 0 and gap0 > 0 and math.sqrt(tau_sq / (4.0 * meas.alpha * gap0)) < z_small:
        found = [(z, k) for z, k in found if abs(z) > z_small]
        found.extend(_split_small_pair(m, meas, tau_sq, 0.0))
    out = []
    for z, k in _merge(found):
        out.extend(_split_small_pair(m, meas, tau_sq, z) if k >= 2 else [(z, k)])
    if tau_sq > 0:
        out = [(z, k) for z, k in out if z != 0.0]
    out = [(_polish_zeta(m, meas, tau_sq, z) if k == 1 else z, k) for z, k in out]
    return sorted(out, key=lambda t: -t[0])


def _polish_zeta(m, meas, tau_sq, z):
    # Newton on 4 alpha z^2 (dV*(z) - beta) - tau^2 directly in zeta; roots found
    # through xi carry an absolute error that is large relative to small zeta
    a = meas.alpha

    def g(x):
        xi = float(m.dV_star(x))
        return 4.0 * a * x * x * (xi - meas.beta) - tau_sq, xi

    try:
        gv, xi = g(z)
        for _ in range(6):
            h = float(m.ddV(xi))
            gp = 8.0 * a * z * (xi - meas.beta) + (4.0 * a * z * z / h if h > 0 else 0.0)
            if gp == 0.0 or not math.isfinite(gp):
                break
            zn = z - gv / gp
            if zn * z <= 0.0:
                break
            gn, xn = g(zn)
            if not abs(gn) < abs(gv):
                break
            z, gv, xi = zn, gn, xn
    except (RangeError, DomainError):
        pass
    return z


def _gap_at_zero(m, meas):
    try:
        return float(m.dV_star(0.0)) - meas.beta
    except RangeError:
        return -math.inf


def _split_small_pair(m, meas, tau_sq, z0):
    # Near zeta = 0 the dual equation reads 4 alpha zeta^2 (xi - beta) ~ tau^2: two
    # roots of opposite sign that polynomial root finders return as one cluster.
    # Resolve them by the contraction zeta = +-sqrt(tau^2 / (4 alpha (dV*(zeta) - beta))).
    try:
        xc = float(m.dV_star(z0))
    except RangeError:
        return [(z0, 2)]
    if not xc > meas.beta:
        return [(z0, 2)]
    pair = []
    for sgn in (1.0, -1.0):
        z = sgn * math.sqrt(tau_sq / (4.0 * meas.alpha * (xc - meas.beta)))
        for _ in range(100):
            try:
                gap = float(m.dV_star(z)) - meas.beta
            except RangeError:
                return [(z0, 2)]
            if gap <= 0.0:
                return [(z0, 2)]
            zn = sgn * math.sqrt(tau_sq / (4.0 * meas.alpha * gap))
            if abs(zn - z) <= 4 * np.finfo(float).eps * abs(zn):
                z = zn
                break
            z = zn
        else:
            return [(z0, 2)]
        pair.append((z, 1))
    if pair[0][0] == pair[1][0]:
        return [(z0, 2)]
    return pair


def _numeric_roots(m: CanonicalMaterial, meas: QuadraticMeasure, tau_sq: float, n_scan: int):
    alpha, beta = meas.alpha, meas.beta
    out = []
    pos = _numeric_positive_root(m, meas, tau_sq)
    if pos is not None:
        out.append((pos, 1))

    bneg = negative_bracket(m, meas)
    key = ("neg_scan", bneg, n_scan)
    if isinstance(m, NumericConvex) and key in m.cache:
        zs, xis = m.cache[key]
    else:
        zs = -np.geomspace(SCAN_EPS, bneg, n_scan)
        xis = np.array([_try_dvstar(m, z) for z in zs])
        if isinstance(m, NumericConvex):
            m.cache[key] = (zs, xis)
    vals = 4.0 * alpha * zs * zs * (xis - beta) - tau_sq

    def f(z):
        return 4.0 * alpha * z * z * (m.dV_star(z) - beta) - tau_sq

    for k in range(len(zs) - 1):
        a, b = vals[k], vals[k + 1]
        if not (np.isfinite(a) and np.isfinite(b)):
            continue
        if a == 0.0:
            out.append((float(zs[k]), 1))
        elif a * b < 0.0:
            lo, hi = sorted((zs[k], zs[k + 1]))
            z = float(brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))
            out.append((_polish_zeta(m, meas, tau_sq, z), 1))
    return _merge(out, rtol=1e-10)


def _try_dvstar(m, z):
    try:
        return float(m.dV_star(z))
    except RangeError:
        return np.nan


def _numeric_positive_root(m: CanonicalMaterial, meas: QuadraticMeasure, tau_sq: float):
    """Unique positive root by bracketed Newton on the decreasing ``dP^d/dzeta``."""
    alpha, beta = meas.alpha, meas.beta

    def h(z):
        xi = m.dV_star(z)
        return beta - xi + tau_sq / (4.0 * alpha * z * z), xi

    scale = max(1.0, abs(float(m.dV(m._reference_xi()))))
    zlo = None
    if math.isfinite(m.domain_lo):
        s0 = float(m.dV(m.domain_lo))
        if s0 > 0.0:
            zlo = s0
    if zlo is None:
        zlo = SCAN_EPS * scale
    try:
        hlo, _ = h(zlo)
    except RangeError:
        return None
    if hlo <= 0.0:
        return zlo if hlo == 0.0 else None
    zhi = max(2.0 * zlo, scale)
    for _ in range(200):
        try:
            hhi, _ = h(zhi)
        except RangeError:
            return None
        if hhi < 0.0:
            break
        zlo, zhi = zhi, 2.0 * zhi
    else:
        return None
    z = 0.5 * (zlo + zhi)
    for _ in range(200):
        hz, xi = h(z)
        if hz == 0.0:
            return z
        if hz > 0.0:
            zlo = z
        else:
            zhi = z
        curv = float(m.ddV(xi))
        dh = -(1.0 / curv if curv > 0 else 1e300) - tau_sq / (2.0 * alpha * z**3)
        zn = z - hz / dh
        if not (zlo < zn < zhi):
            zn = 0.5 * (zlo + zhi)
        if abs(zn - z) <= 4 * np.finfo(float).eps * abs(z) or zhi - zlo <= 4 * np.finfo(float).eps * zhi:
            return zn
        z = zn
    return z


# ---------------------------------------------------------------------------
# energies, Hessians, labels
# ---------------------------------------------------------------------------


def _v_star(m: CanonicalMaterial, zeta, xi):
    if isinstance(m, Affine):
        return np.full_like(np.asarray(zeta, float), m.conjugate_at_slope())
    if isinstance(m, Quadratic):
        return np.asarray(m.V_star(zeta))
    return zeta * xi - np.asarray(m.V(xi))


def _dv_star(m: CanonicalMaterial, zeta):
    zeta = np.asarray(zeta, float)
    if isinstance(m, Affine):
        return None
    return np.asarray(m.dV_star(zeta), float)


def dual_energy(m: CanonicalMaterial, meas: QuadraticMeasure, zeta, tau_sq):
    """``P^d(zeta) = beta zeta - V*(zeta) - tau^2 / (4 alpha zeta)``."""
    zeta = np.asarray(zeta, float)
    if np.any(zeta == 0.0):
        raise DegenerateBranch("dual energy is undefined at zeta = 0")
    if isinstance(m, Affine) and np.any(zeta != m.A):
        raise RangeError("affine conjugate is finite only at zeta = A")
    xi = _dv_star(m, zeta)
    vs = _v_star(m, zeta, xi)
    out = meas.beta * zeta - vs - np.asarray(tau_sq, float) / (4.0 * meas.alpha * zeta)
    return float(out) if out.ndim == 0 else out


def primal_energy_density(m: CanonicalMaterial, meas: QuadraticMeasure, gamma, tau):
    """``P(gamma) = V(Lambda(gamma)) - gamma . tau`` over the last axis."""
    gamma = np.asarray(gamma, float)
    tau = np.asarray(tau, float)
    out = np.asarray(m.V(meas(gamma))) - np.sum(gamma * tau, axis=-1)
    return float(out) if out.ndim == 0 else out


def hessian_eigenvalues(m: CanonicalMaterial, meas: QuadraticMeasure, zeta, gamma):
    """Eigenvalues of the Hessian of ``gamma -> V(Lambda(gamma))``, ascending."""
    gamma = np.asarray(gamma, float).ravel()
    dim = gamma.size
    xi = float(meas(gamma))
    hh = float(m.ddV(xi))
    a = meas.alpha
    lead = 2.0 * a * zeta
    radial = lead + 4.0 * a * a * hh * float(gamma @ gamma)
    return tuple(sorted([lead] * (dim - 1) + [radial]))


def _classify_codes(zeta, lead, radial, dim):
    zeta = np.asarray(zeta, float)
    tol = 1e-9 * (1.0 + np.abs(lead))
    if dim >= 2:
        small = (np.abs(lead) < tol) | (np.abs(radial) < tol)
        allpos = (lead > 0) & (radial > 0)
        allneg = (lead < 0) & (radial < 0)
    else:
        small = np.abs(radial) < tol
        allpos = radial > 0
        allneg = radial < 0
    code = np.full(zeta.shape, Label.UNDETERMINED.code)
    neg = zeta < 0
    code[neg & allpos & ~small] = Label.LOCAL_MIN.code
    code[neg & allneg & ~small] = Label.LOCAL_MAX.code
    code[zeta > 0] = Label.GLOBAL_MIN.code
    code[zeta == 0] = Label.DEGENERATE.code
    return code


def classify_branch(m: CanonicalMaterial, meas: QuadraticMeasure, branch: DualBranch) -> Label:
    """Triality label from the sign of ``zeta`` and the Hessian signature."""
    if branch.zeta == 0.0:
        return Label.DEGENERATE
    gamma = np.asarray(branch.gamma, float).ravel()
    lead = 2.0 * meas.alpha * branch.zeta
    radial = lead + 4.0 * meas.alpha**2 * float(m.ddV(meas(gamma))) * float(gamma @ gamma)
    code = _classify_codes(np.array([branch.zeta]), np.array([lead]), np.array([radial]), gamma.size)
    return Label.from_code(code[0])


def evaluate_branches(m: CanonicalMaterial, meas: QuadraticMeasure, zeta, tau):
    """Vectorized branch quantities for roots ``zeta`` (n,) under loads ``tau`` (n, dim).

    Returns a dict of arrays: gamma, xi, P_primal, P_dual, residual, lead,
    radial (Hessian eigenvalues) and label codes.
    """
    zeta = np.asarray(zeta, float)
    tau = np.asarray(tau, float)
    dim = tau.shape[-1]
    alpha, beta = meas.alpha, meas.beta
    tau_sq = np.sum(tau * tau, axis=-1)
    nz = zeta != 0.0
    gamma = np.zeros_like(tau)
    gamma[nz] = tau[nz] / (2.0 * alpha * zeta[nz, None])
    xi_dual = np.empty_like(zeta)
    if isinstance(m, Affine):
        xi_dual[:] = meas(gamma)
    else:
        xi_dual[:] = np.asarray(m.dV_star(zeta), float)
    if (~nz).any():
        # zero branch at zero load: minimizers lie on the sphere Lambda(gamma) = dV*(0)
        radius = np.sqrt(np.maximum(xi_dual[~nz] - beta, 0.0) / alpha)
        g0 = np.zeros((int((~nz).sum()), dim))
        g0[:, 0] = radius
        gamma[~nz] = g0
    xi = meas(gamma)
    P = np.asarray(m.V(xi), float) - np.sum(gamma * tau, axis=-1)
    Pd = np.empty_like(zeta)
    vs = _v_star(m, zeta, xi_dual)
    with np.errstate(divide="ignore", invalid="ignore"):
        Pd[nz] = beta * zeta[nz] - vs[nz] - tau_sq[nz] / (4.0 * alpha * zeta[nz])
    Pd[~nz] = -vs[~nz]
    residual = np.abs(4.0 * alpha * zeta**2 * (xi_dual - beta) - tau_sq)
    hh = np.asarray(m.ddV(xi), float)
    lead = 2.0 * alpha * zeta
    radial = lead + 4.0 * alpha * alpha * hh * np.sum(gamma * gamma, axis=-1)
    codes = _classify_codes(zeta, lead, radial, dim)
    return {
        "gamma": gamma,
        "xi": xi_dual,
        "P_primal": P,
        "P_dual": Pd,
        "residual": residual,
        "lead": lead,
        "radial": radial,
        "codes": codes,
    }


def solve_dual_equation(
    m: CanonicalMaterial,
    meas: QuadraticMeasure,
    tau_sq: float,
    tau=None,
    dim: int = 2,
    n_scan: int = N_SCAN,
) -> list:
    """All real branches of the dual equation at one point, ``zeta`` descending.

    ``tau`` fixes the load direction; by default it is ``sqrt(tau_sq) e_1`` in
    ``R^dim``. Double roots are returned once with ``multiplicity`` 2.
    """
    tau_sq = float(tau_sq)
    if tau is None:
        tau = np.zeros(dim)
        tau[0] = math.sqrt(tau_sq)
    else:
        tau = np.asarray(tau, float).ravel()
        dim = tau.size
        if not math.isclose(float(tau @ tau), tau_sq, rel_tol=1e-12, abs_tol=1e-300):
            raise ValueError("tau_sq does not match |tau|^2")
    roots = dual_roots(m, meas, tau_sq, n_scan=n_scan)
    if not roots:
        return []
    zeta = np.array([z for z, _ in roots])
    ev = evaluate_branches(m, meas, zeta, np.tile(tau, (len(roots), 1)))
    out = []
    for k, (z, mult) in enumerate(roots):
        lead, radial = float(ev["lead"][k]), float(ev["radial"][k])
        eig = tuple(sorted([lead] * (dim - 1) + [radial]))
        out.append(
            DualBranch(
                zeta=float(z),
                gamma=ev["gamma"][k].copy(),
                label=Label.from_code(ev["codes"][k]),
                P_primal=float(ev["P_primal"][k]),
                P_dual=float(ev["P_dual"][k]),
                residual=float(ev["residual"][k]),
                xi=float(ev["xi"][k]),
                multiplicity=int(mult),
                eigenvalues=eig,
            )
        )
    return out


def branch_table(m: CanonicalMaterial, meas: QuadraticMeasure, tau_sq, n_scan: int = N_SCAN):
    """Roots for many loads at once: ``(zeta (n, K), mult (n, K))``, NaN padded."""
    tau_sq = np.asarray(tau_sq, float).ravel()
    n = tau_sq.size
    if isinstance(m, Affine):
        return np.full((n, 1), m.A), np.ones((n, 1), dtype=int)
    if isinstance(m, Quadratic):
        rows = _quadratic_roots(m, meas, tau_sq)
    else:
        uniq, inv = np.unique(tau_sq, return_inverse=True)
        cache = [dual_roots(m, meas, t, n_scan=n_scan) for t in uniq]
        rows = [cache[i] for i in inv]
    width = max(1, max(len(r) for r in rows))
    zeta = np.full((n, width), np.nan)
    mult = np.zeros((n, width), dtype=int)
    for i, r in enumerate(rows):
        if not r and tau_sq[i] > 0:
            raise NoBranch(f"no real dual root at tau^2={tau_sq[i]:.6g}")
        for k, (z, mk) in enumerate(r):
            zeta[i, k] = z
            mult[i, k] = mk
    return zeta, mult


def solve_homogeneous_3d(m: CanonicalMaterial, T) -> list:
    """Branches for a constant 3x3 stress ``T`` with measure ``tr(F^T F)``.

    Each branch carries ``F_k = T / (2 zeta_k)`` (as ``gamma``, shape 3x3) and
    the post-hoc admissibility flag ``det F_k > 0``; the deformation is the
    affine map ``x -> F_k x``.
    """
    T = np.asarray(T, float)
    if T.shape != (3, 3):
        raise ValueError("T must be 3x3")
    meas = QuadraticMeasure(1.0, 0.0)
    tau = T.ravel()
    branches = solve_dual_equation(m, meas, float(tau @ tau), tau=tau)
    out = []
    for b in branches:
        F = np.asarray(b.gamma).reshape(3, 3)
        det = float(np.linalg.det(F))
        out.append(
            DualBranch(
                zeta=b.zeta,
                gamma=F,
                label=b.label,
                P_primal=b.P_primal,
                P_dual=b.P_dual,
                residual=b.residual,
                xi=b.xi,
                multiplicity=b.multiplicity,
                eigenvalues=b.eigenvalues,
                admissible=det > 0.0,
            )
        )
    return out
