"""Acceptance suite: one test per criterion, each at its stated tolerance.

The summary block printed at the end of a pytest run lists one PASS/FAIL line
per criterion.
"""
import math
import time

import numpy as np
import pytest

from cdshear.convexity import check_g_quasiconvex, check_knowles_constitutive, mooney_rivlin_energy, total_energy_density
from cdshear.dual import Label, solve_dual_equation
from cdshear.field import reconstruct_displacement, solve_field
from cdshear.grid import GridDomain
from cdshear.materials import (
    Affine,
    PolynomialConvex,
    Quadratic,
    QuadraticMeasure,
    double_well,
    mooney_rivlin_reduce,
)
from cdshear.oracle import multistart_minimize
from cdshear.stress import Constant, HarmonicPoly, build_stress_analytic

DW, DWM = double_well()


# ---------------------------------------------------------------------------
# 1. cubic branch structure
# ---------------------------------------------------------------------------


def test_c1_cubic_branch_structure():
    solve_dual_equation(DW, DWM, 0.5)  # warm caches and jit
    t0 = time.perf_counter()
    for tsq in (0.1, 0.2, 0.29):
        assert len(solve_dual_equation(DW, DWM, tsq)) == 3, tsq
    for tsq in (0.3, 1.0, 10.0):
        assert len(solve_dual_equation(DW, DWM, tsq)) == 1, tsq
    br = solve_dual_equation(DW, DWM, 8 / 27)
    elapsed = time.perf_counter() - t0
    assert len(br) == 2
    assert abs(br[0].zeta - 1 / 3) <= 1e-9 and br[0].multiplicity == 1
    assert abs(br[1].zeta + 2 / 3) <= 1e-9 and br[1].multiplicity == 2
    assert elapsed < 0.1


# ---------------------------------------------------------------------------
# 2. strong duality per branch
# ---------------------------------------------------------------------------


def _random_material(rng):
    kind = rng.integers(5)
    if kind == 0:
        return DW, DWM
    if kind == 1:
        return Affine(rng.uniform(0.1, 5.0), rng.uniform(-1, 1)), QuadraticMeasure.antiplane(rng.uniform(0.3, 3.0))
    if kind == 2:
        return (
            Quadratic(rng.uniform(0.1, 5.0), rng.uniform(-3, 8), rng.uniform(-1, 1)),
            QuadraticMeasure(rng.uniform(0.2, 2.0), rng.uniform(-3, 3)),
        )
    if kind == 3:
        c = (rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.1, 2.0), 0.0, rng.uniform(0.01, 0.5))
        return PolynomialConvex(c, rng.uniform(-1, 1)), QuadraticMeasure(rng.uniform(0.2, 2.0), rng.uniform(-3, 3))
    lam = rng.uniform(0.3, 3.0)
    return mooney_rivlin_reduce(rng.uniform(0.1, 3.0), rng.uniform(0.0, 3.0), lam), QuadraticMeasure.antiplane(lam)


def test_c2_strong_duality_per_branch():
    rng = np.random.default_rng(2024)
    worst = 0.0
    n_branches = 0
    for _ in range(1000):
        m, meas = _random_material(rng)
        tsq = float(rng.choice([rng.uniform(0, 0.5), rng.uniform(0, 10), 10 ** rng.uniform(-6, 2)]))
        for b in solve_dual_equation(m, meas, tsq):
            if b.zeta == 0.0:
                continue
            n_branches += 1
            worst = max(worst, abs(b.P_primal - b.P_dual) / max(1.0, abs(b.P_primal)))
    assert n_branches >= 1000
    assert worst <= 1e-8, worst
    g = solve_dual_equation(DW, DWM, 8 / 27)[0]
    assert g.zeta == pytest.approx(1 / 3, abs=1e-15)
    assert abs(g.P_primal + 5 / 6) <= 1e-12 and abs(g.P_dual + 5 / 6) <= 1e-12


# ---------------------------------------------------------------------------
# 3. triality ordering and Hessian labels
# ---------------------------------------------------------------------------


def _fd_hessian(m, meas, gamma, h):
    n = gamma.size
    E = np.eye(n) * h
    H = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            pts = np.array([gamma + E[i] + E[j], gamma + E[i] - E[j], gamma - E[i] + E[j], gamma - E[i] - E[j]])
            w = np.asarray(m.V(meas.alpha * np.sum(pts * pts, axis=1) + meas.beta), float)
            H[i, j] = (w[0] - w[1] - w[2] + w[3]) / (4 * h * h)
    return H


def _fd_eigs(m, meas, gamma, h=2e-3):
    # Richardson-extrapolated central differences, fourth order in h
    H = (4.0 * _fd_hessian(m, meas, gamma, 0.5 * h) - _fd_hessian(m, meas, gamma, h)) / 3.0
    return np.linalg.eigvalsh(0.5 * (H + H.T))


def _label_consistent(label, eig):
    if label in (Label.GLOBAL_MIN, Label.LOCAL_MIN):
        return bool(np.all(eig > 0))
    if label is Label.LOCAL_MAX:
        return bool(np.all(eig < 0))
    return True


def test_c3_triality_ordering_and_hessian_labels():
    rng = np.random.default_rng(7)
    ordered = 0
    worst_eig = 0.0
    for _ in range(10_000):
        m, meas = _random_material(rng)
        dim = int(rng.integers(1, 3))
        tsq = float(rng.uniform(0, 0.6) if rng.random() < 0.7 else rng.uniform(0, 5))
        br = solve_dual_equation(m, meas, tsq, dim=dim)
        byl = {b.label: b.P_primal for b in br}
        if len(br) == 3 and {Label.GLOBAL_MIN, Label.LOCAL_MIN, Label.LOCAL_MAX} <= set(byl):
            ordered += 1
            assert byl[Label.GLOBAL_MIN] <= byl[Label.LOCAL_MIN] <= byl[Label.LOCAL_MAX]
        if len(br) == 3:
            # energies follow the roots regardless of labels
            assert br[0].P_primal <= br[1].P_primal + 1e-12 * max(1.0, abs(br[1].P_primal))
        for b in br:
            if b.zeta == 0.0 or b.multiplicity > 1:
                continue
            eig = np.array(b.eigenvalues)
            fd = _fd_eigs(m, meas, np.asarray(b.gamma))
            worst_eig = max(worst_eig, float(np.max(np.abs(fd - eig))))
            assert _label_consistent(b.label, fd), (b, fd)
            assert np.array_equal(np.sign(fd[np.abs(eig) > 1e-4]), np.sign(eig[np.abs(eig) > 1e-4]))
    assert ordered >= 500
    assert worst_eig <= 1e-5, worst_eig


# ---------------------------------------------------------------------------
# 4. field duality and oracle agreement
# ---------------------------------------------------------------------------


def _unit_square_problem(t):
    dom = GridDomain(65, 65, edges={"left": "fixed"})
    return dom, build_stress_analytic(dom, Constant(t, 0.0))


def test_c4a_field_duality_and_oracle_agreement():
    t0 = time.perf_counter()
    dom, s = _unit_square_problem(1.0)
    f = solve_field(dom, DW, DWM, s)[0]
    assert f.complete and np.all(f.labels == Label.GLOBAL_MIN.code)
    assert abs(f.Pi_primal - f.Pi_dual) <= 1e-6 * dom.area
    res = multistart_minimize(dom, DW, DWM, s, n_starts=20, seed=0)
    assert abs(res.Pi_best - f.Pi_dual) <= 1e-4 * dom.area
    assert time.perf_counter() - t0 <= 60.0


def test_c4b_oracle_finds_multiple_clusters_below_threshold():
    t0 = time.perf_counter()
    dom, s = _unit_square_problem(math.sqrt(0.1))
    branches = solve_dual_equation(DW, DWM, 0.1)
    targets = [b.P_primal * dom.area for b in branches]
    res = multistart_minimize(dom, DW, DWM, s, n_starts=20, seed=0)
    matched = set()
    for c in res.local_minima:
        for k, e in enumerate(targets):
            if abs(c.Pi - e) <= 1e-3 * dom.area:
                matched.add(k)
    assert time.perf_counter() - t0 <= 60.0
    assert len(res.local_minima) >= 2 and len(matched) >= 2, (
        f"clusters={[c.Pi for c in res.local_minima]} branch energies={targets}"
    )


# ---------------------------------------------------------------------------
# 5. linear degeneration
# ---------------------------------------------------------------------------


def _affine_errors(terms, ns, A=1.7):
    fam = HarmonicPoly(terms)
    m, meas = Affine(A), QuadraticMeasure.antiplane(1.0)
    errs, hs = [], []
    for n in ns:
        dom = GridDomain(n, n)
        s = build_stress_analytic(dom, fam)
        f = solve_field(dom, m, meas, s)[0]
        X1, X2 = dom.mesh()
        exact = fam.psi(X1, X2) / (2 * A)
        exact -= exact[dom.anchor()]
        errs.append(float(np.max(np.abs(f.u - exact))))
        hs.append(dom.h1)
    return np.array(errs), np.array(hs)


def test_c5_linear_degeneration_second_order():
    ns = (17, 33, 65)
    # psi = x1^2 - x2^2: the trapezoid rule integrates a linear gradient exactly
    errs, hs = _affine_errors({(2, 0): 1.0, (0, 2): -1.0}, ns)
    assert np.all(errs <= 1.0 * hs**2), errs
    assert np.all(errs <= 1e-13)
    # a cubic harmonic leaves a genuine h^2 error, so its observed order is measurable
    errs, _ = _affine_errors({(3, 0): 1.0, (1, 2): -3.0}, ns)
    orders = np.log2(errs[:-1] / errs[1:])
    assert np.all(orders >= 1.9), orders


# ---------------------------------------------------------------------------
# 6. Knowles identity
# ---------------------------------------------------------------------------


def test_c6_knowles_identity_mooney_rivlin():
    worst = 0.0
    for c1 in (0.5, 1.0, 2.0):
        for c2 in (0.5, 1.0, 2.0):
            for lam in (0.5, 1.0, 2.0):
                r = check_knowles_constitutive(mooney_rivlin_energy(c1, c2), lam)
                assert r["b_used"] == lam / 2
                worst = max(worst, r["residual_max"])
    assert worst <= 1e-12, worst


# ---------------------------------------------------------------------------
# 7. G-quasiconvexity falsifier
# ---------------------------------------------------------------------------


def test_c7a_mexican_hat_violation():
    r = check_g_quasiconvex(total_energy_density(DW, DWM, (0.0, 0.0)), n_samples=10_000, seed=0)
    assert r.violated and r.stats["samples_checked"] <= 10_000


def test_c7b_no_violation_under_strong_load():
    # load vector in R^2 with |tau|^2 = 1
    r = check_g_quasiconvex(total_energy_density(DW, DWM, (1.0, 0.0)), n_samples=100_000, seed=0)
    assert not r.violated, r.witness


def test_c7b_one_dimensional_profile_no_violation():
    r = check_g_quasiconvex(total_energy_density(DW, DWM, (1.0,)), box=[[-3.0, 3.0]], n_samples=100_000, seed=0)
    assert not r.violated, r.witness


# ---------------------------------------------------------------------------
# 8. scaling invariance
# ---------------------------------------------------------------------------


def test_c8_scaling_invariance():
    rng = np.random.default_rng(8)
    cases = [(DW, DWM, t) for t in (0.0, 0.05, 0.1, 8 / 27, 0.29, 1.0, 10.0)]
    for _ in range(60):
        m, meas = _random_material(rng)
        cases.append((m, meas, float(rng.uniform(0, 2))))
    for m, meas, tsq in cases:
        for dim in (1, 2):
            base = solve_dual_equation(m, meas, tsq, dim=dim)
            for c in (0.5, 2.0, 10.0):
                sc = solve_dual_equation(m.scaled(c), meas, c * c * tsq, dim=dim)
                assert len(sc) == len(base)
                for b0, b1 in zip(base, sc):
                    assert b1.label == b0.label
                    assert abs(b1.zeta - c * b0.zeta) <= 1e-10 * max(1.0, abs(c * b0.zeta))
                    assert np.max(np.abs(b1.gamma - b0.gamma)) <= 1e-10 * max(1.0, np.max(np.abs(b0.gamma)))
