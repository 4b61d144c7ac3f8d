"""Canonical stored-energy functions and their Legendre conjugates.

A canonical energy is a scalar function ``V(xi)`` of a geometric measure
``xi = Lambda(gamma) = alpha |gamma|^2 + beta``. For anti-plane shear with
pre-stretch ``lam`` the measure is the first invariant ``I1`` with
``alpha = 1`` and ``beta = lam^2 + 2/lam``; the classical double-well uses
``alpha = 1/2, beta = -1``.

Physically ``I1 >= 3``; only ``xi >= domain_lo`` is enforced so that shifted
measures (negative ``beta``) share the same code path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.optimize import brentq

from .errors import DegenerateConjugate, DomainError, InvalidParameter, RangeError

__all__ = [
    "CanonicalMaterial",
    "Affine",
    "Quadratic",
    "PolynomialConvex",
    "NumericConvex",
    "ConjugatePair",
    "QuadraticMeasure",
    "eval_V",
    "eval_dV",
    "eval_ddV",
    "legendre_conjugate",
    "mooney_rivlin_reduce",
    "double_well",
    "principal_stretch_invariants",
]


def principal_stretch_invariants(lam):
    """``(lambda_1, lambda_2) = (lam^2 + 2/lam, lam^-2 + 2 lam)``."""
    if not lam > 0:
        raise InvalidParameter(f"pre-stretch must be positive, got {lam}")
    return lam * lam + 2.0 / lam, 1.0 / (lam * lam) + 2.0 * lam


@dataclass(frozen=True)
class QuadraticMeasure:
    """``Lambda(gamma) = alpha |gamma|^2 + beta``."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise InvalidParameter(f"measure alpha must be positive, got {self.alpha}")

    def __call__(self, gamma):
        gamma = np.asarray(gamma, dtype=float)
        return self.alpha * np.sum(gamma * gamma, axis=-1) + self.beta

    @classmethod
    def antiplane(cls, lam: float) -> "QuadraticMeasure":
        lam1, _ = principal_stretch_invariants(lam)
        return cls(1.0, lam1)

    @classmethod
    def double_well(cls) -> "QuadraticMeasure":
        return cls(0.5, -1.0)


@dataclass(frozen=True)
class ConjugatePair:
    zeta: float
    xi: float
    V_star: float
    fenchel_gap: float


class CanonicalMaterial:
    """Base class; subclasses define ``_V``, ``_dV``, ``_ddV`` on arrays."""

    kind = "abstract"
    domain_lo = -math.inf

    # -- primal ------------------------------------------------------------
    def _check(self, xi):
        xi = np.asarray(xi, dtype=float)
        if np.any(xi < self.domain_lo):
            bad = float(np.min(xi))
            raise DomainError(f"xi={bad:.6g} below domain_lo={self.domain_lo:.6g} for {self.kind} energy")
        return xi

    def V(self, xi):
        return _scalarize(self._V(self._check(xi)))

    def dV(self, xi):
        return _scalarize(self._dV(self._check(xi)))

    def ddV(self, xi):
        return _scalarize(self._ddV(self._check(xi)))

    # -- dual --------------------------------------------------------------
    def conjugate(self, zeta: float) -> ConjugatePair:
        xi = self.dV_star(zeta)
        vs = zeta * xi - float(self.V(xi))
        gap = abs(float(self.V(xi)) + vs - xi * zeta)
        return ConjugatePair(float(zeta), float(xi), float(vs), gap)

    def dV_star(self, zeta):
        raise NotImplementedError

    def V_star(self, zeta):
        xi = self.dV_star(zeta)
        return zeta * xi - self.V(xi)

    # -- misc --------------------------------------------------------------
    def poly(self):
        """``(coeffs, center)`` if ``V`` is a polynomial in ``xi - center``."""
        return None

    def scaled(self, c: float) -> "CanonicalMaterial":
        raise NotImplementedError

    def min_curvature(self, lo=None, hi=None, n=513) -> float:
        """Smallest sampled ``V''`` on a window of the domain."""
        lo, hi = self._window(lo, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            h = np.asarray(self._ddV(np.linspace(lo, hi, n)), float)
        return float(np.nanmin(h))

    def _window(self, lo=None, hi=None):
        ref = self._reference_xi()
        if lo is None:
            lo = max(self.domain_lo, ref - 10.0 * (1.0 + abs(ref)))
        if hi is None:
            hi = ref + 10.0 * (1.0 + abs(ref))
        return lo, hi

    def _reference_xi(self) -> float:
        return self.domain_lo + 1.0 if math.isfinite(self.domain_lo) else 0.0

    def to_dict(self) -> dict:
        raise NotImplementedError


def _scalarize(v):
    v = np.asarray(v, dtype=float)
    return float(v) if v.ndim == 0 else v


@dataclass(frozen=True, eq=True)
class Affine(CanonicalMaterial):
    """``V(xi) = A (xi - 3) + B``; the neo-Hookean law.

    Its gradient is the constant ``A``, so the conjugate is an indicator
    function and :meth:`conjugate` raises :class:`DegenerateConjugate`.
    """

    A: float
    B: float = 0.0
    domain_lo: float = 0.0
    kind = "affine"

    def __post_init__(self):
        if not self.A > 0:
            raise InvalidParameter(f"affine slope A must be positive, got {self.A}")

    def _V(self, xi):
        return self.A * (xi - 3.0) + self.B

    def _dV(self, xi):
        return np.full_like(xi, self.A)

    def _ddV(self, xi):
        return np.zeros_like(xi)

    def conjugate(self, zeta):
        raise DegenerateConjugate("affine energy has constant gradient; its conjugate is an indicator")

    def dV_star(self, zeta):
        raise DegenerateConjugate("affine energy has constant gradient; its conjugate is an indicator")

    def V_star(self, zeta):
        raise DegenerateConjugate("affine energy has constant gradient; its conjugate is an indicator")

    def conjugate_at_slope(self) -> float:
        """Finite value of the conjugate on its effective domain ``{A}``."""
        return 3.0 * self.A - self.B

    def poly(self):
        return np.array([self.B, self.A]), 3.0

    def scaled(self, c):
        return Affine(c * self.A, c * self.B, self.domain_lo)

    def to_dict(self):
        return {"kind": self.kind, "A": self.A, "B": self.B}


@dataclass(frozen=True, eq=True)
class Quadratic(CanonicalMaterial):
    """``V(xi) = h0/2 (xi - xi0)^2 + c0``."""

    h0: float
    xi0: float = 0.0
    c0: float = 0.0
    domain_lo: float = -math.inf
    kind = "quadratic"

    def __post_init__(self):
        if not self.h0 > 0:
            raise InvalidParameter(f"quadratic curvature h0 must be positive, got {self.h0}")

    def _V(self, xi):
        return 0.5 * self.h0 * (xi - self.xi0) ** 2 + self.c0

    def _dV(self, xi):
        return self.h0 * (xi - self.xi0)

    def _ddV(self, xi):
        return np.full_like(xi, self.h0)

    def dV_star(self, zeta):
        zeta = np.asarray(zeta, dtype=float)
        xi = self.xi0 + zeta / self.h0
        if np.any(xi < self.domain_lo):
            raise RangeError(f"zeta={np.min(zeta):.6g} outside the range of dV on [{self.domain_lo}, inf)")
        return _scalarize(xi)

    def V_star(self, zeta):
        zeta = np.asarray(zeta, dtype=float)
        self.dV_star(zeta)
        return _scalarize(self.xi0 * zeta + zeta * zeta / (2.0 * self.h0) - self.c0)

    def poly(self):
        return np.array([self.c0, 0.0, 0.5 * self.h0]), self.xi0

    def scaled(self, c):
        return Quadratic(c * self.h0, self.xi0, c * self.c0, self.domain_lo)

    def to_dict(self):
        return {"kind": self.kind, "h0": self.h0, "xi0": self.xi0, "c0": self.c0}


@dataclass(frozen=True, eq=False)
class PolynomialConvex(CanonicalMaterial):
    """``V(xi) = sum_k coeffs[k] (xi - center)^k``, convex on the domain.

    Convexity is checked by sampling ``V''`` at construction.
    """

    coeffs: tuple
    center: float = 0.0
    domain_lo: float = -math.inf
    kind = "polynomial"

    def __post_init__(self):
        c = np.trim_zeros(np.asarray(self.coeffs, dtype=float), "b")
        if c.size < 3:
            raise InvalidParameter("polynomial energy needs degree >= 2 (use Affine for linear laws)")
        object.__setattr__(self, "coeffs", tuple(float(x) for x in c))
        if self.min_curvature() < -1e-12 * max(1.0, float(np.max(np.abs(c)))):
            raise InvalidParameter("polynomial energy is not convex on its domain (sampled V'' < 0)")

    @property
    def _c(self):
        return np.asarray(self.coeffs)

    def _V(self, xi):
        return npoly.polyval(xi - self.center, self._c)

    def _dV(self, xi):
        return npoly.polyval(xi - self.center, npoly.polyder(self._c))

    def _ddV(self, xi):
        return npoly.polyval(xi - self.center, npoly.polyder(self._c, 2))

    def _reference_xi(self):
        return self.center if self.center >= self.domain_lo else self.domain_lo + 1.0

    def dV_star(self, zeta):
        if np.ndim(zeta):
            return np.array([self.dV_star(float(z)) for z in np.ravel(zeta)]).reshape(np.shape(zeta))
        zeta = float(zeta)
        d1 = npoly.polyder(self._c)
        d2 = npoly.polyder(d1)
        shifted = d1.copy()
        shifted[0] -= zeta
        cand = []
        for r in npoly.polyroots(shifted):
            if abs(r.imag) > 1e-7 * (1.0 + abs(r.real)):
                continue
            s = _newton_poly(r.real, shifted, d2)
            if s + self.center < self.domain_lo - 1e-12:
                continue
            if npoly.polyval(s, d2) < -1e-12:
                continue
            cand.append((abs(npoly.polyval(s, shifted)), s))
        if not cand:
            raise RangeError(f"zeta={zeta:.6g} outside the range of dV for polynomial energy")
        return float(min(cand)[1] + self.center)

    def poly(self):
        return self._c.copy(), self.center

    def scaled(self, c):
        return PolynomialConvex(tuple(c * x for x in self.coeffs), self.center, self.domain_lo)

    def __eq__(self, other):
        return (
            isinstance(other, PolynomialConvex)
            and self.coeffs == other.coeffs
            and self.center == other.center
            and self.domain_lo == other.domain_lo
        )

    __hash__ = object.__hash__

    def to_dict(self):
        return {"kind": self.kind, "coeffs": list(self.coeffs), "center": self.center}


def _newton_poly(s, p, dp, iters=4):
    for _ in range(iters):
        f = npoly.polyval(s, p)
        fp = npoly.polyval(s, dp)
        if fp == 0.0:
            break
        sn = s - f / fp
        if abs(npoly.polyval(sn, p)) >= abs(f):
            break
        s = sn
    return s


@dataclass(frozen=True, eq=False)
class NumericConvex(CanonicalMaterial):
    """User-supplied convex energy given by callables.

    ``dV`` is required; ``ddV`` defaults to a central difference of ``dV``.
    The conjugate is found by bracketed root-finding on ``dV(xi) = zeta``,
    which is robust because ``dV`` is monotone.
    """

    fV: Callable
    fdV: Callable
    fddV: Optional[Callable] = None
    domain_lo: float = 0.0
    name: str = "numeric"
    cache: dict = field(default_factory=dict, repr=False, compare=False)
    kind = "numeric"

    def __post_init__(self):
        if self.min_curvature() < -1e-10:
            raise InvalidParameter(f"numeric energy {self.name!r} is not convex (sampled V'' < 0)")

    def _V(self, xi):
        return _apply(self.fV, xi)

    def _dV(self, xi):
        return _apply(self.fdV, xi)

    def _ddV(self, xi):
        if self.fddV is not None:
            return _apply(self.fddV, xi)
        step = 1e-6 * (1.0 + np.abs(xi))
        lo = np.maximum(xi - step, self.domain_lo)
        hi = xi + step
        return (_apply(self.fdV, hi) - _apply(self.fdV, lo)) / (hi - lo)

    def dV_star(self, zeta):
        if np.ndim(zeta):
            return np.array([self.dV_star(float(z)) for z in np.ravel(zeta)]).reshape(np.shape(zeta))
        zeta = float(zeta)

        def f(x):
            return float(self._dV(np.asarray(x, float))) - zeta

        x0 = self._reference_xi()
        lo, hi = x0 - 1.0, x0 + 1.0
        finite_lo = math.isfinite(self.domain_lo)
        if finite_lo:
            lo = max(lo, self.domain_lo)
        for _ in range(200):
            if f(hi) >= 0.0:
                break
            hi = x0 + 2.0 * (hi - x0)
            if hi > 1e15:
                raise RangeError(f"zeta={zeta:.6g} above the range of dV for {self.name!r}")
        for _ in range(200):
            if f(lo) <= 0.0:
                break
            if finite_lo and lo <= self.domain_lo:
                raise RangeError(f"zeta={zeta:.6g} below the range of dV for {self.name!r}")
            lo = x0 - 2.0 * (x0 - lo)
            if finite_lo:
                lo = max(lo, self.domain_lo)
            if lo < -1e15:
                raise RangeError(f"zeta={zeta:.6g} below the range of dV for {self.name!r}")
        if f(lo) == 0.0:
            return lo
        xi = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
        for _ in range(3):
            r = f(xi)
            if abs(r) <= 1e-12:
                break
            h = float(self._ddV(np.asarray(xi)))
            if h <= 0.0:
                break
            xn = xi - r / h
            if finite_lo and xn < self.domain_lo:
                break
            if abs(f(xn)) >= abs(r):
                break
            xi = xn
        return float(xi)

    def scaled(self, c):
        fddV = None if self.fddV is None else (lambda x, g=self.fddV: c * _apply(g, x))
        return NumericConvex(
            lambda x, g=self.fV: c * _apply(g, x),
            lambda x, g=self.fdV: c * _apply(g, x),
            fddV,
            self.domain_lo,
            f"{c}*{self.name}",
        )

    def to_dict(self):
        return {"kind": self.kind, "name": self.name}


def _apply(f, xi):
    xi = np.asarray(xi, dtype=float)
    # user callables may legitimately return +-inf at a closed domain end
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.asarray(f(xi), dtype=float)
        if out.shape != xi.shape:
            out = np.vectorize(lambda x: float(f(x)), otypes=[float])(xi)
    return out


# -- module-level operations ---------------------------------------------------


def eval_V(m: CanonicalMaterial, xi):
    return m.V(xi)


def eval_dV(m: CanonicalMaterial, xi):
    return m.dV(xi)


def eval_ddV(m: CanonicalMaterial, xi):
    return m.ddV(xi)


def legendre_conjugate(m: CanonicalMaterial, zeta: float) -> ConjugatePair:
    return m.conjugate(zeta)


def mooney_rivlin_reduce(c1: float, c2: float, lam: float) -> Affine:
    """Mooney-Rivlin energy restricted to anti-plane shear.

    On the anti-plane manifold ``I2 = I1/lam + lambda_2 - lambda_1/lam``, so
    ``c1 (I1 - 3) + c2 (I2 - 3) = A (I1 - 3) + B``.
    """
    lam1, lam2 = principal_stretch_invariants(lam)
    A = c1 + c2 / lam
    if not A > 0:
        raise InvalidParameter(f"Mooney-Rivlin reduction gives A = c1 + c2/lam = {A} <= 0")
    B = c2 * (3.0 / lam - 3.0 + lam2 - lam1 / lam)
    return Affine(A, B)


def double_well():
    """The classical double-well ``1/2 (|gamma|^2/2 - 1)^2`` in canonical form."""
    return Quadratic(1.0, 0.0, 0.0), QuadraticMeasure.double_well()
