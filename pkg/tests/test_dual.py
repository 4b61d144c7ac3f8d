import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cdshear.dual import (
    Label,
    branch_table,
    classify_branch,
    companion_roots,
    dual_energy,
    hessian_eigenvalues,
    primal_energy_density,
    solve_dual_equation,
    solve_homogeneous_3d,
)
from cdshear.errors import DegenerateBranch
from cdshear.materials import Affine, NumericConvex, PolynomialConvex, Quadratic, QuadraticMeasure, double_well

DW, DWM = double_well()


def zetas(branches):
    return [b.zeta for b in branches]


def test_double_root_threshold():
    br = solve_dual_equation(DW, DWM, 8 / 27)
    assert zetas(br) == pytest.approx([1 / 3, -2 / 3], abs=1e-12)
    assert [b.multiplicity for b in br] == [1, 2]
    assert br[0].label is Label.GLOBAL_MIN
    # the Hessian is singular at the double root
    assert br[1].label is Label.UNDETERMINED


def test_zero_load():
    br = solve_dual_equation(DW, DWM, 0.0)
    assert zetas(br) == [0.0, -1.0]
    assert br[0].label is Label.DEGENERATE and br[0].multiplicity == 2
    assert br[1].label is Label.LOCAL_MAX
    assert br[1].eigenvalues == (-1.0, -1.0)


def test_unique_root_above_threshold():
    br = solve_dual_equation(DW, DWM, 1.0)
    assert len(br) == 1 and br[0].zeta > 0 and br[0].label is Label.GLOBAL_MIN


def test_affine_single_branch():
    for t in (0.0, 0.3, 7.0):
        br = solve_dual_equation(Affine(1.7, 0.2), QuadraticMeasure.antiplane(1.5), t)
        assert zetas(br) == [1.7] and br[0].label is Label.GLOBAL_MIN


def test_affine_energy_example():
    br = solve_dual_equation(Affine(1.0, 0.0), QuadraticMeasure(1.0, 3.0), 1.0, tau=np.array([1.0, 0.0]))[0]
    assert np.allclose(br.gamma, [0.5, 0.0])
    assert br.P_primal == pytest.approx(-0.25, abs=1e-15)
    assert br.P_dual == pytest.approx(-0.25, abs=1e-15)
    assert br.eigenvalues == (2.0, 2.0)


def test_energy_golden_values():
    assert dual_energy(DW, DWM, 1 / 3, 8 / 27) == pytest.approx(-5 / 6, abs=1e-14)
    g = np.array([math.sqrt(8 / 3), 0.0])
    assert primal_energy_density(DW, DWM, g, np.array([math.sqrt(8 / 27), 0.0])) == pytest.approx(-5 / 6, abs=1e-14)


def test_dual_energy_rejects_zero():
    with pytest.raises(DegenerateBranch):
        dual_energy(DW, DWM, 0.0, 0.0)


def test_hessian_example():
    g = np.array([math.sqrt(8 / 3), 0.0])
    assert hessian_eigenvalues(DW, DWM, 1 / 3, g) == pytest.approx((1 / 3, 3.0), abs=1e-12)


def test_local_min_needs_scalar_strain():
    # in the plane the lead eigenvalue 2 alpha zeta is negative on every zeta < 0 branch
    two = solve_dual_equation(DW, DWM, 0.1, dim=2)
    one = solve_dual_equation(DW, DWM, 0.1, dim=1)
    assert [b.label for b in two] == [Label.GLOBAL_MIN, Label.UNDETERMINED, Label.LOCAL_MAX]
    assert [b.label for b in one] == [Label.GLOBAL_MIN, Label.LOCAL_MIN, Label.LOCAL_MAX]


def test_classify_branch_agrees_with_solver():
    for dim in (1, 2, 3):
        for t in (0.0, 0.05, 0.2, 8 / 27, 2.0):
            for b in solve_dual_equation(DW, DWM, t, dim=dim):
                assert classify_branch(DW, DWM, b) is b.label


@pytest.mark.parametrize("t", [0.0, 1e-8, 0.05, 0.1, 0.2, 0.29, 8 / 27, 0.3, 1.0, 10.0])
def test_companion_matrix_agrees(t):
    br = solve_dual_equation(DW, DWM, t)
    comp = companion_roots(DW, DWM, t)
    distinct = []
    for z in comp:
        if not distinct or abs(distinct[-1] - z) > 1e-6:
            distinct.append(z)
    assert len(distinct) == len(br)
    # companion eigenvalues of a double root are only accurate to sqrt(eps)
    tol = 1e-6 if any(b.multiplicity > 1 for b in br) else 1e-9
    assert np.allclose(distinct, zetas(br), atol=tol)


def test_discriminant_root_count():
    # 2 zeta^2 (zeta + 1) = tau^2 has three real roots exactly below 8/27
    for t in np.linspace(1e-4, 0.6, 301):
        n = len(solve_dual_equation(DW, DWM, float(t)))
        assert n == (3 if t < 8 / 27 else 1)


@given(st.floats(1e-6, 8 / 27 - 1e-6))
def test_branch_ordering(t):
    z = zetas(solve_dual_equation(DW, DWM, t))
    assert len(z) == 3 and z[0] >= 0 >= z[1] >= z[2]


def test_polynomial_and_numeric_match_quadratic():
    poly = PolynomialConvex((0.0, 0.0, 0.5))
    num = NumericConvex(lambda x: 0.5 * x * x, lambda x: x, lambda x: np.ones_like(np.asarray(x, float)), domain_lo=-math.inf)
    for t in (0.0, 0.1, 0.25, 1.0, 5.0):
        ref = zetas(solve_dual_equation(DW, DWM, t))
        for m in (poly, num):
            got = solve_dual_equation(m, DWM, t)
            assert zetas(got) == pytest.approx(ref, abs=1e-9)


def test_numeric_material_with_exotic_energy():
    m = NumericConvex(np.exp, np.exp, np.exp, domain_lo=-math.inf)
    meas = QuadraticMeasure(1.0, 0.5)
    br = solve_dual_equation(m, meas, 2.0)
    assert br and br[0].zeta > 0
    for b in br:
        assert b.residual <= 1e-9 * 2.0
        assert abs(b.P_primal - b.P_dual) <= 1e-8 * max(1.0, abs(b.P_primal))


def test_branch_table_matches_scalar():
    t = np.array([0.0, 0.1, 8 / 27, 1.0])
    z, mult = branch_table(DW, DWM, t)
    for k, tk in enumerate(t):
        ref = solve_dual_equation(DW, DWM, float(tk))
        got = z[k][np.isfinite(z[k])]
        assert got.tolist() == zetas(ref)
        assert mult[k, : len(ref)].tolist() == [b.multiplicity for b in ref]


def test_homogeneous_3d():
    m = Quadratic(1.0, 1.0, 0.0)
    br = solve_homogeneous_3d(m, np.zeros((3, 3)))
    assert all(b.label in (Label.DEGENERATE, Label.LOCAL_MAX) or b.zeta == 0 for b in br)
    s = 0.4
    br = solve_homogeneous_3d(m, s * np.eye(3))
    for b in br:
        assert np.allclose(b.gamma, s / (2 * b.zeta) * np.eye(3))
        assert b.admissible == (s / (2 * b.zeta) > 0)
        assert len(b.eigenvalues) == 9
    # isotropic stress sees tau^2 = 3 s^2
    scalar = solve_dual_equation(m, QuadraticMeasure(1.0, 0.0), 3 * s * s, dim=9)
    assert zetas(br) == pytest.approx(zetas(scalar), abs=1e-14)


def test_homogeneous_3d_rank_one_reduces_to_scalar():
    m = Quadratic(2.0, 1.0, 0.0)
    T = np.diag([0.7, 0.0, 0.0])
    br = solve_homogeneous_3d(m, T)
    ref = solve_dual_equation(m, QuadraticMeasure(1.0, 0.0), 0.49, dim=9)
    assert zetas(br) == pytest.approx(zetas(ref), abs=1e-14)


def test_negative_branch_has_negative_admissibility():
    m = Quadratic(1.0, 2.0, 0.0)
    br = solve_homogeneous_3d(m, 0.1 * np.eye(3))
    assert any(b.zeta < 0 and b.admissible is False for b in br)


MATERIALS = [
    (DW, DWM),
    (Quadratic(2.0, 1.0, 0.3), QuadraticMeasure.antiplane(1.0)),
    (Quadratic(0.5, 6.0, 0.0), QuadraticMeasure.antiplane(1.5)),
    (PolynomialConvex((0.0, 1.0, 0.5, 0.0, 0.05)), QuadraticMeasure(0.5, -1.0)),
    (Affine(1.2, 0.1), QuadraticMeasure.antiplane(2.0)),
]


def _fd_hessian(m, meas, g, h=1e-4):
    n = g.size
    H = np.zeros((n, n))

    def W(x):
        return float(m.V(meas(x)))

    for i in range(n):
        for j in range(n):
            ei, ej = np.eye(n)[i] * h, np.eye(n)[j] * h
            H[i, j] = (W(g + ei + ej) - W(g + ei - ej) - W(g - ei + ej) + W(g - ei - ej)) / (4 * h * h)
    return np.linalg.eigvalsh(H)


@given(k=st.integers(0, len(MATERIALS) - 1), t=st.floats(0.0, 4.0, allow_subnormal=False), dim=st.integers(1, 3))
def test_hessian_matches_finite_differences(k, t, dim):
    m, meas = MATERIALS[k]
    for b in solve_dual_equation(m, meas, t, dim=dim):
        if b.zeta == 0.0:
            continue
        fd = _fd_hessian(m, meas, np.asarray(b.gamma))
        assert np.allclose(fd, b.eigenvalues, atol=1e-5 * max(1.0, max(abs(e) for e in b.eigenvalues)))


@given(
    k=st.integers(0, len(MATERIALS) - 1),
    t=st.floats(0.0, 3.0, allow_subnormal=False),
    c=st.floats(0.1, 20.0),
    dim=st.integers(1, 2),
)
def test_scaling_invariance(k, t, c, dim):
    m, meas = MATERIALS[k]
    base = solve_dual_equation(m, meas, t, dim=dim)
    sc = solve_dual_equation(m.scaled(c), meas, c * c * t, dim=dim)
    assert [b.label for b in sc] == [b.label for b in base]
    for b0, b1 in zip(base, sc):
        assert b1.zeta == pytest.approx(c * b0.zeta, rel=1e-9, abs=1e-12)
        assert np.allclose(b1.gamma, b0.gamma, rtol=1e-9, atol=1e-12)
