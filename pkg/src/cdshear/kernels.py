"""Hot numeric kernels with a numba path and a pure-numpy path.

Two kernels dominate runtime:

* ``cubic_real_roots`` - batched real roots of ``a x^3 + b x^2 + c x + d``,
  used for the pointwise dual solve of quadratic canonical energies.
* ``potential_and_gradient`` - discrete total potential on a bilinear grid
  (2x2 Gauss quadrature per cell) for energies that are polynomials in the
  measure, and its exact gradient with respect to nodal displacements.

The backend is chosen once from ``CDSHEAR_DISABLE_NUMBA`` and may be switched
at runtime with :func:`set_backend` (used by the benchmark and the
backend-agreement tests).
"""
import math

import numpy as np

from ._jit import default_backend, njit, HAVE_NUMBA

_BACKEND = default_backend()

GAUSS_LO = 0.5 - 0.5 / math.sqrt(3.0)
GAUSS_HI = 0.5 + 0.5 / math.sqrt(3.0)
# (s, t) local coordinates of the four Gauss points, s along x1, t along x2
GAUSS_ST = np.array(
    [[GAUSS_LO, GAUSS_LO], [GAUSS_HI, GAUSS_LO], [GAUSS_LO, GAUSS_HI], [GAUSS_HI, GAUSS_HI]]
)

# |disc| below this fraction of its natural scale is treated as a double root
DOUBLE_ROOT_RTOL = 16.0 * np.finfo(float).eps


def get_backend():
    return _BACKEND


def set_backend(name):
    """Select ``"numba"`` or ``"numpy"``; returns the previous backend."""
    global _BACKEND
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is unavailable or disabled")
    prev, _BACKEND = _BACKEND, name
    return prev


# ---------------------------------------------------------------------------
# cubic roots
# ---------------------------------------------------------------------------


@njit(cache=True)
def _cbrt(x):
    if x < 0.0:
        return -((-x) ** (1.0 / 3.0))
    return x ** (1.0 / 3.0)


@njit(cache=True)
def _polish(x, a, b, c, d):
    for _ in range(3):
        f = ((a * x + b) * x + c) * x + d
        fp = (3.0 * a * x + 2.0 * b) * x + c
        if fp == 0.0:
            break
        xn = x - f / fp
        fn = ((a * xn + b) * xn + c) * xn + d
        if abs(fn) < abs(f):
            x = xn
        else:
            break
    return x


@njit(cache=True)
def _cubic_one(a, b, c, d, out, mult):
    """Distinct real roots of one cubic, descending; returns the count."""
    for k in range(3):
        out[k] = np.nan
        mult[k] = 0
    B = b / a
    C = c / a
    D = d / a
    if D == 0.0:
        # x (x^2 + B x + C)
        disc = B * B - 4.0 * C
        roots = [0.0]
        ms = [1]
        if disc > 0.0:
            s = math.sqrt(disc)
            q = -0.5 * (B + math.copysign(s, B)) if B != 0.0 else 0.5 * s
            r1 = q
            r2 = C / q if q != 0.0 else -q
            for r in (r1, r2):
                if r == 0.0:
                    ms[0] += 1
                else:
                    roots.append(r)
                    ms.append(1)
        elif disc == 0.0:
            r = -0.5 * B
            if r == 0.0:
                ms[0] += 2
            else:
                roots.append(r)
                ms.append(2)
        n = len(roots)
        # insertion sort, descending
        for i in range(n):
            for j in range(i + 1, n):
                if roots[j] > roots[i]:
                    roots[i], roots[j] = roots[j], roots[i]
                    ms[i], ms[j] = ms[j], ms[i]
        for i in range(n):
            out[i] = roots[i]
            mult[i] = ms[i]
        return n

    shift = B / 3.0
    p = C - B * B / 3.0
    q = 2.0 * B * B * B / 27.0 - B * C / 3.0 + D
    hq = 0.5 * q
    tp = p / 3.0
    disc = hq * hq + tp * tp * tp
    scale = max(hq * hq, abs(tp * tp * tp))
    if abs(disc) <= DOUBLE_ROOT_RTOL * scale:
        if p == 0.0:
            out[0] = -shift
            mult[0] = 3
            return 1
        # the simple root is well conditioned; deflate and solve the rest stably,
        # since two small roots can sit close together on the cubic's scale
        # while still being far apart relative to their own size
        simple = _polish(3.0 * q / p - shift, a, b, c, d)
        # quadratic factor a x^2 + e x + f; b = e - a s and c = f - e s give two
        # routes to e, take the one with the smaller rounding bound
        f = -d / simple if simple != 0.0 else 0.0
        e = b + a * simple
        if simple != 0.0 and max(abs(f), abs(c)) / abs(simple) < max(abs(b), abs(a * simple)):
            e = (f - c) / simple
        if simple == 0.0:
            f = c
        qd = e * e - 4.0 * a * f
        n = 1
        out[0] = simple
        mult[0] = 1
        if abs(qd) <= DOUBLE_ROOT_RTOL * max(e * e, abs(4.0 * a * f)):
            out[1] = -0.5 * e / a
            mult[1] = 2
            n = 2
        elif qd > 0.0:
            qq = -0.5 * (e + math.copysign(math.sqrt(qd), e))
            out[1] = _polish(qq / a, a, b, c, d)
            out[2] = _polish(f / qq, a, b, c, d) if qq != 0.0 else out[1]
            mult[1] = 1
            mult[2] = 1
            n = 3
        for i in range(n):
            for j in range(i + 1, n):
                if out[j] > out[i]:
                    out[i], out[j] = out[j], out[i]
                    mult[i], mult[j] = mult[j], mult[i]
        return n
    if disc > 0.0:
        sd = math.sqrt(disc)
        uu = -_cbrt(abs(hq) + sd) if hq >= 0.0 else _cbrt(abs(hq) + sd)
        vv = -tp / uu if uu != 0.0 else 0.0
        out[0] = _polish(uu + vv - shift, a, b, c, d)
        mult[0] = 1
        return 1
    r = 2.0 * math.sqrt(-tp)
    arg = (3.0 * q / (2.0 * p)) * math.sqrt(-3.0 / p)
    if arg > 1.0:
        arg = 1.0
    elif arg < -1.0:
        arg = -1.0
    theta = math.acos(arg) / 3.0
    # cos(theta - 2 pi k / 3) is descending in k for theta in [0, pi/3]
    for k in range(3):
        out[k] = _polish(r * math.cos(theta - 2.0 * math.pi * k / 3.0) - shift, a, b, c, d)
        mult[k] = 1
    # polishing cannot reorder well-separated roots, but keep the contract
    for i in range(3):
        for j in range(i + 1, 3):
            if out[j] > out[i]:
                out[i], out[j] = out[j], out[i]
    return 3


@njit(cache=True)
def _cubic_batch_nb(a, b, c, d):
    n = a.shape[0]
    roots = np.empty((n, 3))
    mult = np.zeros((n, 3), dtype=np.int64)
    count = np.zeros(n, dtype=np.int64)
    for i in range(n):
        count[i] = _cubic_one(a[i], b[i], c[i], d[i], roots[i], mult[i])
    return roots, mult, count


def _polish_np(x, a, b, c, d):
    for _ in range(3):
        f = ((a * x + b) * x + c) * x + d
        fp = (3.0 * a * x + 2.0 * b) * x + c
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = np.where(fp != 0.0, x - f / fp, x)
        fn = ((a * xn + b) * xn + c) * xn + d
        better = np.abs(fn) < np.abs(f)
        if not better.any():
            break
        x = np.where(better, xn, x)
    return x


def _cubic_batch_np(a, b, c, d):
    n = a.shape[0]
    roots = np.full((n, 3), np.nan)
    mult = np.zeros((n, 3), dtype=np.int64)
    count = np.zeros(n, dtype=np.int64)

    B, C, D = b / a, c / a, d / a
    zero_const = D == 0.0
    if zero_const.any():
        # rare (zero load); reuse the scalar routine for exact bookkeeping
        for i in np.flatnonzero(zero_const):
            r, m, k = _cubic_batch_nb_py(a[i : i + 1], b[i : i + 1], c[i : i + 1], d[i : i + 1])
            roots[i], mult[i], count[i] = r[0], m[0], k[0]

    live = ~zero_const
    shift = B / 3.0
    p = C - B * B / 3.0
    q = 2.0 * B**3 / 27.0 - B * C / 3.0 + D
    hq, tp = 0.5 * q, p / 3.0
    disc = hq * hq + tp**3
    scale = np.maximum(hq * hq, np.abs(tp**3))
    dbl = live & (np.abs(disc) <= DOUBLE_ROOT_RTOL * scale)
    one = live & ~dbl & (disc > 0.0)
    three = live & ~dbl & (disc < 0.0)

    triple = dbl & (p == 0.0)
    roots[triple, 0] = -shift[triple]
    mult[triple, 0] = 3
    count[triple] = 1

    two = dbl & ~triple
    # near-double rows are rare; the scalar routine handles their deflation
    for i in np.flatnonzero(two):
        r, m, k = _cubic_batch_nb_py(a[i : i + 1], b[i : i + 1], c[i : i + 1], d[i : i + 1])
        roots[i], mult[i], count[i] = r[0], m[0], k[0]

    if one.any():
        sd = np.sqrt(np.where(one, disc, 0.0))
        mag = np.cbrt(np.abs(hq) + sd)
        uu = np.where(hq >= 0.0, -mag, mag)
        with np.errstate(divide="ignore", invalid="ignore"):
            vv = np.where(uu != 0.0, -tp / uu, 0.0)
        x = _polish_np(uu + vv - shift, a, b, c, d)
        roots[one, 0] = x[one]
        mult[one, 0] = 1
        count[one] = 1

    if three.any():
        with np.errstate(invalid="ignore", divide="ignore"):
            r = 2.0 * np.sqrt(-tp)
            arg = np.clip((3.0 * q / (2.0 * p)) * np.sqrt(-3.0 / p), -1.0, 1.0)
        theta = np.arccos(arg) / 3.0
        cols = [
            _polish_np(r * np.cos(theta - 2.0 * np.pi * k / 3.0) - shift, a, b, c, d) for k in range(3)
        ]
        stacked = -np.sort(-np.stack(cols, axis=1), axis=1)
        roots[three] = stacked[three]
        mult[three] = 1
        count[three] = 3
    return roots, mult, count


# plain-python reference of the scalar routine (numba-free) for the numpy path
_cubic_batch_nb_py = getattr(_cubic_batch_nb, "py_func", _cubic_batch_nb)


def cubic_real_roots(a, b, c, d):
    """Real roots of ``a x^3 + b x^2 + c x + d`` for arrays of coefficients.

    Returns ``(roots, mult, count)``: ``roots`` is ``(n, 3)`` with distinct
    real roots in descending order padded with NaN, ``mult`` their
    multiplicities, ``count`` the number of distinct real roots. Near-double
    roots are merged and returned from the well-conditioned closed forms
    ``3q/p`` and ``-3q/(2p)`` of the depressed cubic.
    """
    a, b, c, d = (np.array(v, dtype=float).ravel() for v in np.broadcast_arrays(*(np.asarray(v, float) for v in (a, b, c, d))))
    if np.any(a == 0.0):
        raise ValueError("leading coefficient must be nonzero")
    # rescale x = 2^k y so the roots are O(1); powers of two keep this exact
    # and stop the discriminant from under/overflowing for tiny or huge inputs
    B, C, D = b / a, c / a, d / a
    with np.errstate(divide="ignore"):
        mag = np.maximum(np.abs(B), np.maximum(np.sqrt(np.abs(C)), np.cbrt(np.abs(D))))
    k = np.where(mag > 0.0, np.frexp(np.where(mag > 0.0, mag, 1.0))[1], 0)
    one = np.ones_like(a)
    args = (one, np.ldexp(B, -k), np.ldexp(C, -2 * k), np.ldexp(D, -3 * k))
    if _BACKEND == "numba":
        roots, mult, count = _cubic_batch_nb(*args)
    else:
        roots, mult, count = _cubic_batch_np(*args)
    return np.ldexp(roots, k[:, None]), mult, count


# ---------------------------------------------------------------------------
# discrete potential
# ---------------------------------------------------------------------------


@njit(cache=True)
def _poly_v_dv(s, coeffs):
    v = 0.0
    dv = 0.0
    for k in range(coeffs.shape[0] - 1, -1, -1):
        dv = dv * s + v
        v = v * s + coeffs[k]
    return v, dv


@njit(cache=True, nogil=True)
def _potential_nb(u, tau_g, h1, h2, alpha, beta, coeffs, center, want_grad):
    ny, nx = u.shape
    grad = np.zeros((ny, nx))
    w = 0.25 * h1 * h2
    energy = 0.0
    xi_min = np.inf
    for j in range(ny - 1):
        for i in range(nx - 1):
            u00 = u[j, i]
            u10 = u[j, i + 1]
            u01 = u[j + 1, i]
            u11 = u[j + 1, i + 1]
            dx0 = u10 - u00
            dx1 = u11 - u01
            dy0 = u01 - u00
            dy1 = u11 - u10
            for g in range(4):
                s = GAUSS_LO if (g == 0 or g == 2) else GAUSS_HI
                t = GAUSS_LO if g < 2 else GAUSS_HI
                g1 = ((1.0 - t) * dx0 + t * dx1) / h1
                g2 = ((1.0 - s) * dy0 + s * dy1) / h2
                t1 = tau_g[j, i, g, 0]
                t2 = tau_g[j, i, g, 1]
                xi = alpha * (g1 * g1 + g2 * g2) + beta
                if xi < xi_min:
                    xi_min = xi
                v, dv = _poly_v_dv(xi - center, coeffs)
                energy += w * (v - g1 * t1 - g2 * t2)
                if want_grad:
                    p1 = w * (2.0 * alpha * dv * g1 - t1)
                    p2 = w * (2.0 * alpha * dv * g2 - t2)
                    a1 = p1 / h1
                    a2 = p2 / h2
                    grad[j, i] += -(1.0 - t) * a1 - (1.0 - s) * a2
                    grad[j, i + 1] += (1.0 - t) * a1 - s * a2
                    grad[j + 1, i] += -t * a1 + (1.0 - s) * a2
                    grad[j + 1, i + 1] += t * a1 + s * a2
    return energy, grad, xi_min


def _cell_gauss_gradients(u, h1, h2):
    """Bilinear gradients at the four Gauss points, shape (ny-1, nx-1, 4, 2)."""
    dx0 = u[:-1, 1:] - u[:-1, :-1]
    dx1 = u[1:, 1:] - u[1:, :-1]
    dy0 = u[1:, :-1] - u[:-1, :-1]
    dy1 = u[1:, 1:] - u[:-1, 1:]
    out = np.empty(dx0.shape + (4, 2))
    for g, (s, t) in enumerate(GAUSS_ST):
        out[..., g, 0] = ((1.0 - t) * dx0 + t * dx1) / h1
        out[..., g, 1] = ((1.0 - s) * dy0 + s * dy1) / h2
    return out


def _potential_np(u, tau_g, h1, h2, alpha, beta, coeffs, center, want_grad, energy_fn=None):
    gam = _cell_gauss_gradients(u, h1, h2)
    xi = alpha * np.einsum("...k,...k->...", gam, gam) + beta
    w = 0.25 * h1 * h2
    if energy_fn is None:
        s = xi - center
        v = np.polynomial.polynomial.polyval(s, coeffs)
        dv = np.polynomial.polynomial.polyval(s, np.polynomial.polynomial.polyder(coeffs)) if want_grad else None
    else:
        v, dv = energy_fn(xi, want_grad)
    dens = v - np.einsum("...k,...k->...", gam, tau_g)
    energy = float(w * dens.sum())
    grad = np.zeros_like(u)
    if want_grad:
        pg = w * (2.0 * alpha * dv[..., None] * gam - tau_g)
        for g, (s, t) in enumerate(GAUSS_ST):
            a1 = pg[..., g, 0] / h1
            a2 = pg[..., g, 1] / h2
            grad[:-1, :-1] += -(1.0 - t) * a1 - (1.0 - s) * a2
            grad[:-1, 1:] += (1.0 - t) * a1 - s * a2
            grad[1:, :-1] += -t * a1 + (1.0 - s) * a2
            grad[1:, 1:] += t * a1 + s * a2
    return energy, grad, float(xi.min())


def potential_and_gradient(u, tau_g, h1, h2, alpha, beta, coeffs, center, want_grad=True):
    """Discrete potential of a polynomial-in-measure energy.

    ``u`` is ``(ny, nx)``, ``tau_g`` the load at Gauss points
    ``(ny-1, nx-1, 4, 2)``, ``coeffs`` ascending powers of ``xi - center``.
    Returns ``(energy, grad, xi_min)``; ``grad`` is zeros when not requested.
    """
    u = np.ascontiguousarray(u, dtype=float)
    coeffs = np.ascontiguousarray(coeffs, dtype=float)
    if _BACKEND == "numba":
        return _potential_nb(u, tau_g, float(h1), float(h2), float(alpha), float(beta), coeffs, float(center), want_grad)
    return _potential_np(u, tau_g, h1, h2, alpha, beta, coeffs, center, want_grad)


def potential_and_gradient_callable(u, tau_g, h1, h2, alpha, beta, energy_fn, want_grad=True):
    """Same functional for energies given as ``energy_fn(xi, want_dv) -> (V, dV)``.

    Always runs on the numpy path.
    """
    return _potential_np(np.asarray(u, float), tau_g, h1, h2, alpha, beta, None, 0.0, want_grad, energy_fn)
