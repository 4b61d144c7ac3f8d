import numpy as np
import pytest
from hypothesis import given, strategies as st

from cdshear import kernels
from cdshear.grid import GridDomain, nodal_to_gauss
from cdshear.materials import double_well


def _switch(name):
    if name == "numba" and not kernels.HAVE_NUMBA:
        pytest.skip("numba unavailable")
    return kernels.set_backend(name)


@pytest.mark.parametrize("tsq,count", [(8 / 27, 2), (0.0, 2), (1.0, 1), (0.1, 3), (0.29, 3), (0.3, 1), (10.0, 1)])
def test_cubic_counts(backend, tsq, count):
    _, _, n = kernels.cubic_real_roots(2.0, 2.0, 0.0, -tsq)
    assert n[0] == count


def test_triple_root(backend):
    r, m, n = kernels.cubic_real_roots(1.0, -3.0, 3.0, -1.0)
    assert n[0] == 1 and m[0, 0] == 3 and r[0, 0] == pytest.approx(1.0)


def test_rejects_zero_leading():
    with pytest.raises(ValueError):
        kernels.cubic_real_roots(0.0, 1.0, 1.0, 1.0)


@given(
    st.floats(0.1, 10.0),
    st.floats(-10.0, 10.0),
    st.floats(-10.0, 10.0),
    st.floats(-10.0, 10.0),
)
def test_roots_are_roots(a, b, c, d):
    r, m, n = kernels.cubic_real_roots(a, b, c, d)
    scale = max(abs(a), abs(b), abs(c), abs(d))
    for z in r[0, : n[0]]:
        mag = max(1.0, abs(z)) ** 3
        assert abs(((a * z + b) * z + c) * z + d) <= 1e-7 * scale * mag
    assert m[0].sum() <= 3
    assert np.all(np.diff(r[0, : n[0]]) < 0)


def test_backends_agree_on_roots():
    if not kernels.HAVE_NUMBA:
        pytest.skip("numba unavailable")
    rng = np.random.default_rng(1)
    tsq = np.concatenate([rng.uniform(0, 1, 2000), [0.0, 8 / 27, 1e-30]])
    prev = kernels.set_backend("numba")
    try:
        a = kernels.cubic_real_roots(2.0, 2.0, 0.0, -tsq)
        kernels.set_backend("numpy")
        b = kernels.cubic_real_roots(2.0, 2.0, 0.0, -tsq)
    finally:
        kernels.set_backend(prev)
    assert np.array_equal(a[1], b[1]) and np.array_equal(a[2], b[2])
    assert np.allclose(a[0], b[0], atol=1e-14, equal_nan=True)


def test_backends_agree_on_potential():
    if not kernels.HAVE_NUMBA:
        pytest.skip("numba unavailable")
    rng = np.random.default_rng(2)
    dom = GridDomain(21, 17, lx=1.3)
    u = rng.standard_normal(dom.shape)
    tau = np.ascontiguousarray(nodal_to_gauss(rng.standard_normal(dom.shape + (2,))))
    m, meas = double_well()
    coeffs, center = m.poly()
    prev = kernels.set_backend("numba")
    try:
        e1, g1, x1 = kernels.potential_and_gradient(u, tau, dom.h1, dom.h2, meas.alpha, meas.beta, coeffs, center)
        kernels.set_backend("numpy")
        e2, g2, x2 = kernels.potential_and_gradient(u, tau, dom.h1, dom.h2, meas.alpha, meas.beta, coeffs, center)
    finally:
        kernels.set_backend(prev)
    assert e1 == pytest.approx(e2, rel=1e-13)
    assert np.allclose(g1, g2, rtol=1e-12, atol=1e-12 * np.abs(g1).max())
    assert x1 == pytest.approx(x2)


def test_callable_path_matches_polynomial(backend):
    rng = np.random.default_rng(3)
    dom = GridDomain(9, 11)
    u = rng.standard_normal(dom.shape)
    tau = np.ascontiguousarray(nodal_to_gauss(rng.standard_normal(dom.shape + (2,))))
    m, meas = double_well()
    coeffs, center = m.poly()
    e1, g1, _ = kernels.potential_and_gradient(u, tau, dom.h1, dom.h2, meas.alpha, meas.beta, coeffs, center)
    e2, g2, _ = kernels.potential_and_gradient_callable(
        u, tau, dom.h1, dom.h2, meas.alpha, meas.beta, lambda xi, w: (m.V(xi), m.dV(xi) if w else None)
    )
    assert e1 == pytest.approx(e2, rel=1e-13)
    assert np.allclose(g1, g2, atol=1e-13)


def test_set_backend_rejects_unknown():
    with pytest.raises(ValueError):
        kernels.set_backend("fortran")
