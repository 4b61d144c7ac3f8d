import numpy as np
import pytest

from cdshear.errors import ForceImbalance, InvalidParameter
from cdshear.grid import EDGES, EdgeBC, GridDomain
from cdshear.stress import (
    Constant,
    HarmonicPoly,
    LogRadial,
    build_stress_analytic,
    build_stress_numeric,
    laplace_matrix,
)


def test_grid_validation():
    with pytest.raises(InvalidParameter):
        GridDomain(2, 5)
    with pytest.raises(InvalidParameter):
        GridDomain(5, 5, lx=0.0)
    with pytest.raises(InvalidParameter):
        GridDomain(5, 5, edges={"north": "fixed"})
    with pytest.raises(InvalidParameter):
        EdgeBC("clamped")


def test_anchor_and_masks():
    dom = GridDomain(5, 4, edges={"top": "fixed", "right": "fixed"})
    mask = dom.fixed_mask()
    assert mask[-1].all() and mask[:, -1].all() and mask.sum() == 5 + 4 - 1
    # smallest x1 index first, then x2
    assert dom.anchor() == (3, 0)
    assert GridDomain(5, 4).anchor() == (0, 0)
    assert GridDomain(5, 4).pure_neumann


def test_constant_family():
    dom = GridDomain(9, 9, edges={"left": "fixed"})
    s = build_stress_analytic(dom, Constant(1.0, 0.0))
    assert np.all(s.tau[..., 0] == 1.0) and np.all(s.tau[..., 1] == 0.0)
    assert s.div_residual == 0.0 and s.bc_residual == 0.0
    assert np.all(dom.traction("right") == 1.0) and np.all(dom.traction("top") == 0.0)
    assert dom.traction("left") is None


def test_harmonic_families():
    dom = GridDomain(11, 11)
    s = build_stress_analytic(dom, HarmonicPoly({(2, 0): 1.0, (0, 2): -1.0}))
    X1, X2 = dom.mesh()
    assert np.allclose(s.tau[..., 0], 2 * X1) and np.allclose(s.tau[..., 1], -2 * X2)
    assert s.div_residual <= 1e-12
    s = build_stress_analytic(GridDomain(11, 11), HarmonicPoly([(1, 1, 1.0)]))
    assert np.allclose(s.tau[..., 0], X2) and np.allclose(s.tau[..., 1], X1)


def test_non_harmonic_rejected():
    with pytest.raises(InvalidParameter):
        HarmonicPoly({(2, 0): 1.0})


def test_log_radial():
    dom = GridDomain(33, 33)
    s = build_stress_analytic(dom, LogRadial(1.0, -0.5, -0.5))
    assert s.div_residual < 0.05 and s.bc_residual == 0.0
    with pytest.raises(InvalidParameter):
        build_stress_analytic(GridDomain(5, 5), LogRadial(1.0, 0.5, 0.5))


def test_laplace_matrix_symmetric_and_singular():
    dom = GridDomain(6, 5, lx=1.5)
    A = laplace_matrix(dom)
    assert abs(A - A.T).max() < 1e-14
    assert np.abs(A @ np.ones(30)).max() < 1e-12


def test_numeric_linear_potential_is_exact():
    dom = GridDomain(17, 17, edges={"left": "fixed"})
    dom.set_traction("right", 1.0)
    s = build_stress_numeric(dom)
    assert np.abs(s.tau[..., 0] - 1.0).max() < 1e-9 and np.abs(s.tau[..., 1]).max() < 1e-9


def _matching_tractions(n, family):
    ref = GridDomain(n, n)
    build_stress_analytic(ref, family)
    return {e: ref.traction(e) for e in EDGES}


def test_numeric_quadratic_potential():
    fam = HarmonicPoly({(2, 0): 1.0, (0, 2): -1.0})
    s = build_stress_numeric(GridDomain(17, 17), _matching_tractions(17, fam))
    X1, X2 = GridDomain(17, 17).mesh()
    assert np.abs(s.tau[..., 0] - 2 * X1).max() < 1e-8
    assert np.abs(s.tau[..., 1] + 2 * X2).max() < 1e-8


def test_numeric_second_order_convergence():
    fam = HarmonicPoly({(3, 0): 1.0, (1, 2): -3.0})
    errs = []
    for n in (17, 33, 65):
        dom = GridDomain(n, n)
        s = build_stress_numeric(dom, _matching_tractions(n, fam))
        X1, X2 = dom.mesh()
        g1, g2 = fam.grad(X1, X2)
        errs.append(max(np.abs(s.tau[..., 0] - g1).max(), np.abs(s.tau[..., 1] - g2).max()))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.9)


def test_mixed_problem_respects_traction():
    dom = GridDomain(33, 17, lx=2.0, edges={"left": "fixed", "bottom": "fixed"})
    dom.set_traction("right", 0.5)
    s = build_stress_numeric(dom)
    assert s.info["cg_iterations"] > 0
    assert s.psi[dom.fixed_mask()].max() == 0.0
    # the fixed/traction corners are singular; check the edge away from them
    j = slice(dom.ny // 4, 3 * dom.ny // 4)
    assert np.abs(s.tau[j, -1, 0] - 0.5).max() < 0.02


def test_force_imbalance():
    dom = GridDomain(9, 9)
    dom.set_traction("right", 1.0)
    with pytest.raises(ForceImbalance):
        build_stress_numeric(dom)
