"""Sampling falsifiers for generalized convexity and ellipticity conditions.

None of these checks proves anything. A passing check only reports that no
counterexample was found (``NoViolationFound``), never that a function is
convex.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import ndimage

from .errors import BoxTooSmall, InvalidParameter
from .materials import CanonicalMaterial, QuadraticMeasure, double_well, principal_stretch_invariants

__all__ = [
    "NO_VIOLATION",
    "VIOLATION",
    "GQCResult",
    "check_g_quasiconvex",
    "check_g_ellipse",
    "check_knowles_ellipticity",
    "check_knowles_constitutive",
    "check_convex_sampled",
    "legendre_condition",
    "total_energy_density",
    "InvariantEnergy",
    "mooney_rivlin_energy",
    "neo_hookean_energy",
    "canonical_energy",
    "composed_energy",
    "double_well_energy",
]

NO_VIOLATION = "NoViolationFound"
VIOLATION = "Violation"
THETAS = np.round(np.arange(1, 10) / 10.0, 12)
DEFAULT_BOX = ((-3.0, 3.0), (-3.0, 3.0))
CHUNK = 2048


def _box(box):
    b = np.asarray(DEFAULT_BOX if box is None else box, dtype=float)
    if b.ndim != 2 or b.shape[1] != 2 or not np.all(np.isfinite(b)) or np.any(b[:, 1] <= b[:, 0]):
        raise InvalidParameter("box must be a finite (n, 2) array of [lo, hi] with lo < hi")
    return b


def _vectorized(P):
    """Wrap ``P`` to act on ``(..., n)`` arrays, looping if it is scalar-only."""

    def f(x):
        x = np.asarray(x, float)
        try:
            y = np.asarray(P(x), float)
            if y.shape == x.shape[:-1]:
                return y
        except Exception:
            pass
        flat = x.reshape(-1, x.shape[-1])
        return np.array([float(P(v)) for v in flat]).reshape(x.shape[:-1])

    return f


def total_energy_density(m: CanonicalMaterial, meas: QuadraticMeasure, tau=(0.0, 0.0)) -> Callable:
    """``gamma -> V(Lambda(gamma)) - gamma . tau`` over the last axis."""
    tau = np.asarray(tau, float)

    def P(g):
        g = np.asarray(g, float)
        return np.asarray(m.V(meas(g)), float) - g @ tau

    return P


@dataclass
class GQCResult:
    verdict: str
    witness: Optional[dict] = None
    stats: dict = field(default_factory=dict)

    @property
    def violated(self) -> bool:
        return self.verdict == VIOLATION

    def to_dict(self):
        w = None
        if self.witness is not None:
            w = {k: (np.asarray(v).tolist() if isinstance(v, np.ndarray) else v) for k, v in self.witness.items()}
        return {"verdict": self.verdict, "witness": w, "stats": dict(self.stats)}


def _chunk_pairs(seed, c, box, size):
    # chunk c of a counter-based stream: independent of worker count and of n_samples
    rng = np.random.Generator(np.random.Philox(key=int(seed)).jumped(int(c)))
    lo, hi = box[:, 0], box[:, 1]
    a = lo + (hi - lo) * rng.random((size, box.shape[0]))
    b = lo + (hi - lo) * rng.random((size, box.shape[0]))
    return a, b


def _scan_chunk(Pv, seed, c, box, n_in_chunk, slack):
    a, b = _chunk_pairs(seed, c, box, CHUNK)
    a, b = a[:n_in_chunk], b[:n_in_chunk]
    pa, pb = Pv(a), Pv(b)
    top = np.maximum(pa, pb)
    mid = THETAS[:, None, None] * a[None] + (1.0 - THETAS[:, None, None]) * b[None]
    pm = Pv(mid)  # (n_theta, n)
    excess = pm - top[None] - slack * (1.0 + np.abs(top[None]))
    bad = excess > 0.0
    if not bad.any():
        return None, float(np.max(pm - top[None])) if pm.size else -math.inf
    cols = np.nonzero(bad.any(axis=0))[0]
    k = int(cols[0])
    t = int(np.nonzero(bad[:, k])[0][0])
    witness = {
        "gamma_a": a[k],
        "gamma_b": b[k],
        "theta": float(THETAS[t]),
        "P_a": float(pa[k]),
        "P_b": float(pb[k]),
        "P_mid": float(pm[t, k]),
        "sample_index": c * CHUNK + k,
    }
    return witness, float(np.max(pm - top[None]))


def check_g_quasiconvex(P, box=None, n_samples: int = 10_000, seed: int = 0, slack: float = 1e-10, workers: int = None) -> GQCResult:
    """Search for ``P(theta a + (1-theta) b) > max(P(a), P(b))``.

    Pairs are uniform in ``box`` (rows ``[lo, hi]`` per coordinate), ``theta``
    runs over ``0.1, ..., 0.9``. Samples come in fixed-size chunks of a
    counter-based stream, so for a fixed seed a larger ``n_samples`` only
    appends evidence: the first violation found is the same.
    """
    if n_samples < 1:
        raise InvalidParameter("n_samples must be >= 1")
    box = _box(box)
    Pv = _vectorized(P)
    n_chunks = -(-n_samples // CHUNK)
    sizes = [min(CHUNK, n_samples - c * CHUNK) for c in range(n_chunks)]

    def job(c):
        return _scan_chunk(Pv, seed, c, box, sizes[c], slack)

    results = []
    if workers and workers > 1:
        # evaluate in waves so an early violation stops the scan deterministically
        with ThreadPoolExecutor(max_workers=workers) as ex:
            for start in range(0, n_chunks, workers):
                wave = list(ex.map(job, range(start, min(n_chunks, start + workers))))
                results.extend(wave)
                if any(w is not None for w, _ in wave):
                    break
    else:
        for c in range(n_chunks):
            results.append(job(c))
            if results[-1][0] is not None:
                break
    max_excess = max(r[1] for r in results)
    for c, (w, _) in enumerate(results):
        if w is not None:
            stats = {"samples_checked": int(sum(sizes[: c + 1])), "n_samples": n_samples, "seed": seed, "max_excess": max_excess}
            return GQCResult(VIOLATION, w, stats)
    stats = {"samples_checked": n_samples, "n_samples": n_samples, "seed": seed, "max_excess": max_excess}
    return GQCResult(NO_VIOLATION, None, stats)


def check_convex_sampled(P, box=None, n_samples: int = 10_000, seed: int = 0, slack: float = 1e-10) -> str:
    """Midpoint-convexity falsifier: ``P(theta a + (1-theta) b) <= theta P(a) + (1-theta) P(b)``."""
    box = _box(box)
    Pv = _vectorized(P)
    done = 0
    c = 0
    while done < n_samples:
        n = min(CHUNK, n_samples - done)
        a, b = _chunk_pairs(seed, c, box, CHUNK)
        a, b = a[:n], b[:n]
        pa, pb = Pv(a), Pv(b)
        th = THETAS[:, None]
        chord = th * pa[None] + (1 - th) * pb[None]
        pm = Pv(THETAS[:, None, None] * a[None] + (1 - THETAS[:, None, None]) * b[None])
        if np.any(pm - chord > slack * (1.0 + np.abs(chord))):
            return VIOLATION
        done += n
        c += 1
    return NO_VIOLATION


def check_g_ellipse(P, alpha_level: float, box=None, grid_n: int = 256, n_midpoint: int = 4000, seed: int = 0, slack: float = 1e-10) -> dict:
    """Rasterize ``{P <= alpha_level}`` on a 2-D box and test it for being a convex blob.

    ``is_g_ellipse`` requires one 4-connected component, no holes (background
    components under 8-connectivity that avoid the border), and no midpoint
    violation among sampled pairs of interior pixels.
    """
    if grid_n < 32:
        raise InvalidParameter("grid_n must be >= 32")
    box = _box(box)
    if box.shape[0] != 2:
        raise InvalidParameter("level-set rasterization needs a 2-D box")
    Pv = _vectorized(P)
    g1 = np.linspace(box[0, 0], box[0, 1], grid_n)
    g2 = np.linspace(box[1, 0], box[1, 1], grid_n)
    G1, G2 = np.meshgrid(g1, g2)
    pts = np.stack([G1, G2], axis=-1)
    mask = Pv(pts) <= alpha_level
    if mask[0].any() or mask[-1].any() or mask[:, 0].any() or mask[:, -1].any():
        raise BoxTooSmall(f"sub-level set {{P <= {alpha_level:g}}} touches the sampling box")
    four = ndimage.generate_binary_structure(2, 1)
    eight = ndimage.generate_binary_structure(2, 2)
    _, components = ndimage.label(mask, structure=four)
    bg, nbg = ndimage.label(~mask, structure=eight)
    border = set(np.unique(np.concatenate([bg[0], bg[-1], bg[:, 0], bg[:, -1]]))) - {0}
    holes = nbg - len(border)
    convex = True
    if components:
        inside = pts[mask]
        rng = np.random.Generator(np.random.Philox(key=int(seed)))
        ia = rng.integers(0, len(inside), n_midpoint)
        ib = rng.integers(0, len(inside), n_midpoint)
        a, b = inside[ia], inside[ib]
        pa, pb = Pv(a), Pv(b)
        top = np.maximum(np.maximum(pa, pb), alpha_level)
        mids = THETAS[:, None, None] * a[None] + (1 - THETAS[:, None, None]) * b[None]
        convex = not np.any(Pv(mids) > top[None] + slack * (1.0 + abs(alpha_level)))
    return {
        "is_g_ellipse": bool(components == 1 and holes == 0 and convex),
        "components": int(components),
        "holes": int(holes),
        "midpoint_convex": bool(convex),
        "pixels": int(mask.sum()),
    }


def legendre_condition(m: CanonicalMaterial, meas: QuadraticMeasure, gamma) -> dict:
    """Eigenvalues of the Hessian of ``gamma -> V(Lambda(gamma))`` and their sign."""
    gamma = np.asarray(gamma, float).ravel()
    xi = float(meas(gamma))
    zeta = float(m.dV(xi))
    lead = 2.0 * meas.alpha * zeta
    radial = lead + 4.0 * meas.alpha**2 * float(m.ddV(xi)) * float(gamma @ gamma)
    eig = sorted([lead] * (gamma.size - 1) + [radial])
    return {"eigenvalues": eig, "holds": bool(eig[0] >= 0.0)}


# ---------------------------------------------------------------------------
# invariant-based energies and Knowles' conditions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InvariantEnergy:
    """Stored energy ``W(I1, I2)`` with optional analytic partials."""

    W: Callable
    W1: Optional[Callable] = None
    W2: Optional[Callable] = None
    name: str = "custom"

    def __call__(self, I1, I2):
        return self.W(I1, I2)

    def partials(self, I1, I2, rel_step: float = 1e-6):
        if self.W1 is not None and self.W2 is not None:
            return self.W1(I1, I2), self.W2(I1, I2)
        h1 = rel_step * (1.0 + abs(I1))
        h2 = rel_step * (1.0 + abs(I2))
        d1 = (self.W(I1 + h1, I2) - self.W(I1 - h1, I2)) / (2 * h1)
        d2 = (self.W(I1, I2 + h2) - self.W(I1, I2 - h2)) / (2 * h2)
        return d1, d2


def mooney_rivlin_energy(c1: float, c2: float) -> InvariantEnergy:
    return InvariantEnergy(
        lambda I1, I2: c1 * (I1 - 3.0) + c2 * (I2 - 3.0),
        lambda I1, I2: c1,
        lambda I1, I2: c2,
        f"mooney_rivlin({c1:g},{c2:g})",
    )


def neo_hookean_energy(A: float, B: float = 0.0) -> InvariantEnergy:
    return InvariantEnergy(lambda I1, I2: A * (I1 - 3.0) + B, lambda I1, I2: A, lambda I1, I2: 0.0, f"neo_hookean({A:g})")


def canonical_energy(m: CanonicalMaterial) -> InvariantEnergy:
    """``W(I1, I2) = V(I1)`` for a canonical energy of the first invariant."""
    return InvariantEnergy(lambda I1, I2: float(m.V(I1)), lambda I1, I2: float(m.dV(I1)), lambda I1, I2: 0.0, f"canonical({m.kind})")


def composed_energy(m: CanonicalMaterial, meas: QuadraticMeasure, lam: float) -> InvariantEnergy:
    """``W(I1, I2) = V(alpha (I1 - lambda_1) + beta)``: the anti-plane energy as a function of invariants.

    On the anti-plane manifold ``I1 - lambda_1 = R^2`` so this is ``V(Lambda(grad u))``.
    """
    l1, _ = principal_stretch_invariants(lam)
    a, b = meas.alpha, meas.beta

    def W(I1, I2):
        return float(m.V(a * (I1 - l1) + b))

    def W1(I1, I2):
        return a * float(m.dV(a * (I1 - l1) + b))

    return InvariantEnergy(W, W1, lambda I1, I2: 0.0, f"composed({m.kind})")


def double_well_energy(lam: float = 1.0) -> InvariantEnergy:
    """The double-well model in the amount of shear, as a function of invariants."""
    m, meas = double_well()
    e = composed_energy(m, meas, lam)
    return InvariantEnergy(e.W, e.W1, e.W2, "double_well")


def _manifold(lam, R):
    l1, l2 = principal_stretch_invariants(lam)
    return l1 + R * R, l2 + R * R / lam


def _check_lam(lam):
    if not (lam > 0 and math.isfinite(lam)):
        raise InvalidParameter(f"prestretch must be positive, got {lam}")


def check_knowles_ellipticity(Wbar: InvariantEnergy, lam: float, R_max: float = 5.0, n: int = 200, dR: float = None) -> dict:
    """Scan ``d/dR [2 R (W1 + W2 / lambda)]`` on the anti-plane manifold for ``R in (0, R_max]``."""
    _check_lam(lam)
    if not isinstance(Wbar, InvariantEnergy):
        Wbar = InvariantEnergy(Wbar)
    if dR is None:
        dR = 1e-4 * R_max

    def T(R):
        I1, I2 = _manifold(lam, R)
        w1, w2 = Wbar.partials(I1, I2)
        return 2.0 * R * (w1 + w2 / lam)

    Rs = R_max * np.arange(1, n + 1) / n
    vals = np.array([(T(R + dR) - T(R - dR)) / (2 * dR) for R in Rs])
    bad = np.nonzero(vals <= 0.0)[0]
    return {
        "holds": bool(bad.size == 0),
        "first_failure_R": float(Rs[bad[0]]) if bad.size else None,
        "min_value": float(vals.min()),
    }


def check_knowles_constitutive(Wbar: InvariantEnergy, lam: float, n: int = 50, R_max: float = 5.0) -> dict:
    """Residual of ``b W1 + (b / lambda - 1) W2`` with ``b = lambda / 2``.

    ``residual_max`` uses the manifold partials: ``W1`` from the derivative
    of ``w(R) = W(I1(R), I2(R))`` with respect to ``R^2`` (which equals
    ``W1 + W2 / lambda``) under ``W2 = lambda W1``. ``raw_residual_max`` uses
    the independent partials of ``W`` instead and is reported for contrast.
    """
    _check_lam(lam)
    if not isinstance(Wbar, InvariantEnergy):
        Wbar = InvariantEnergy(Wbar)
    b = lam / 2.0
    Rs = R_max * np.arange(0, n) / max(n - 1, 1)
    res = []
    raw = []
    for R in Rs:
        I1, I2 = _manifold(lam, R)
        w1, w2 = Wbar.partials(I1, I2)
        slope = w1 + w2 / lam  # d w / d(R^2)
        W1m = 0.5 * slope
        W2m = lam * W1m
        res.append(abs(b * W1m + (b / lam - 1.0) * W2m))
        raw.append(abs(b * w1 + (b / lam - 1.0) * w2))
    return {"residual_max": float(max(res)), "b_used": b, "raw_residual_max": float(max(raw))}
