import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from curvkit.domain import Point, make_domain
from curvkit.errors import NotClosedError, ShapeError
from curvkit.field import Field
from curvkit.forms import (
    BasisWedge,
    Form,
    concat_basis,
    d,
    d_continuous,
    d_discrete,
    discrete_primitive,
    load_form,
    normalize_commute,
    save_form,
    wedge,
)
from curvkit.suites import random_domain, random_field, random_form

DN1, DN2 = BasisWedge((0,), ()), BasisWedge((1,), ())
DX1, DX2 = BasisWedge((), (0,)), BasisWedge((), (1,))


@pytest.fixture
def lat2():
    return make_domain(2, 0, [(0, 5), (0, 5)])


@pytest.fixture
def mixed():
    return make_domain(1, 1, [(0, 5)], [(0.0, 1.0)], [0.25])


def test_basis_sorting_sign():
    assert concat_basis(DN2, DN1) == (-1, BasisWedge((0, 1), ()))
    assert concat_basis(DX1, DN1) == (-1, BasisWedge((0,), (0,)))
    assert concat_basis(DN1, DN1) is None


def test_normalize_commute(lat2):
    n1, n2 = lat2.lattice_symbols
    f = Field.analytic(lat2, n1)
    assert normalize_commute(0, f).at(Point((2, 0), ())) == 3
    assert np.all(normalize_commute(0, Field.constant(lat2, 5.0)).values() == 5)
    g = Field.analytic(lat2, n2)
    assert np.array_equal(normalize_commute(0, g).values(), g.restrict(((0, 4), (0, 5))).values())


def test_wedge_shift_rule(lat2):
    n1 = lat2.lattice_symbols[0]
    f = Form.basis(lat2, DN1, Field.analytic(lat2, n1))
    g = Form.basis(lat2, DN2, Field.analytic(lat2, n1))
    w = wedge(f, g)
    assert list(w.terms) == [BasisWedge((0, 1), ())]
    assert w.coefficient(BasisWedge((0, 1), ())).at(Point((2, 0), ())) == 6


def test_wedge_repeated_factor_vanishes(lat2):
    f = Form.basis(lat2, DN1, Field.constant(lat2, 2.0))
    assert not wedge(f, f).terms


def test_continuous_wedge_antisymmetry():
    dom = make_domain(0, 2, [], [(0.0, 1.0), (0.0, 1.0)], [0.5, 0.5])
    x, y = dom.continuous_symbols
    a = Form.basis(dom, DX1, Field.analytic(dom, x * y))
    b = Form.basis(dom, DX2, Field.analytic(dom, sp.cos(x)))
    assert (wedge(a, b) + wedge(b, a)).max_norm() == 0


def test_wedge_with_zero_form_shifts(mixed):
    rng = np.random.default_rng(2)
    f, g = random_field(rng, mixed), random_field(rng, mixed)
    lhs = wedge(Form.basis(mixed, DN1, f), Form.scalar(g))
    expected = f * g.shift(0)
    assert (lhs.coefficient(DN1) - expected).max_abs() <= 1e-15


def test_d_discrete_square():
    dom = make_domain(1, 0, [(0, 9)])
    n = dom.lattice_symbols[0]
    w = d_discrete(Form.scalar(Field.analytic(dom, n**2)))
    np.testing.assert_array_equal(w.coefficient(DN1).values(), 2 * np.arange(9) + 1)
    assert not d_discrete(Form.scalar(Field.constant(dom, 1.0))).terms


def test_d_continuous_examples():
    dom = make_domain(1, 1, [(0, 3)], [(0.0, 1.0)], [0.25])
    n, x = dom.symbols
    w = d_continuous(Form.scalar(Field.analytic(dom, x**2)))
    np.testing.assert_allclose(w.coefficient(DX1).values()[0], 2 * dom.grids[0])
    w = d_continuous(Form.scalar(Field.analytic(dom, n * x)))
    np.testing.assert_allclose(w.coefficient(DX1).values(), np.arange(4)[:, None] * np.ones(5))


def test_d_of_nx(mixed):
    n, x = mixed.symbols
    w = d(Form.scalar(Field.analytic(mixed, n * x)))
    np.testing.assert_allclose(w.coefficient(DN1).values(), np.broadcast_to(mixed.grids[0], (5, 5)))
    np.testing.assert_allclose(w.coefficient(DX1).values(), np.broadcast_to(np.arange(6)[:, None], (6, 5)))
    assert d(w).max_norm() <= 1e-12


def test_d_of_basis_forms(mixed):
    assert not d(Form.basis(mixed, DN1)).terms
    assert not d(Form.basis(mixed, DX1)).terms


def test_coordinate_pairings():
    dom = make_domain(2, 2, [(0, 3), (0, 3)], [(0.0, 1.0), (0.0, 1.0)], [0.5, 0.5])
    for k, s in enumerate(dom.symbols):
        w = d(Form.scalar(Field.analytic(dom, s)))
        assert len(w.terms) == 1
        (basis, coeff), = w.terms.items()
        expected = BasisWedge((k,), ()) if k < 2 else BasisWedge((), (k - 2,))
        assert basis == expected
        assert np.all(coeff.values() == 1)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), degree=st.integers(0, 3))
def test_d_squared_random(seed, degree):
    rng = np.random.default_rng(seed)
    dom = random_domain(rng, 3)
    w = random_form(rng, dom, min(degree, dom.p + dom.q))
    assert d(d(w)).max_norm() <= 1e-12


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_graded_leibniz_random(seed):
    rng = np.random.default_rng(seed)
    dom = random_domain(rng, 3)
    top = dom.p + dom.q
    a = random_form(rng, dom, int(rng.integers(0, min(2, top) + 1)))
    b = random_form(rng, dom, int(rng.integers(0, min(2, top) + 1)))
    rhs = wedge(d(a), b) + wedge(a, d(b)).scale((-1) ** a.degree)
    assert (d(wedge(a, b)) - rhs).max_norm() <= 1e-12


def test_matrix_wedge_associativity(mixed):
    rng = np.random.default_rng(4)
    a, b, c = (random_form(rng, mixed, 1, (2, 2)) for _ in range(3))
    assert (wedge(wedge(a, b), c) - wedge(a, wedge(b, c))).max_norm() <= 1e-12


def test_form_rejects_mixed_shapes(mixed):
    with pytest.raises(ShapeError):
        Form(mixed, 1, {DN1: Field.constant(mixed, 1.0), DX1: Field.constant(mixed, [[1, 0], [0, 1]])})


def test_form_rejects_wrong_degree(mixed):
    with pytest.raises(ShapeError):
        Form(mixed, 2, {DN1: Field.constant(mixed, 1.0)})


def test_primitive_of_dn():
    dom = make_domain(1, 0, [(0, 7)])
    P = discrete_primitive(Form.basis(dom, DN1, Field.constant(dom, 1.0)))
    np.testing.assert_array_equal(P.coefficient(BasisWedge((), ())).values(), np.arange(8))


def test_primitive_of_odd_numbers():
    dom = make_domain(1, 0, [(0, 7)])
    n = dom.lattice_symbols[0]
    P = discrete_primitive(Form.basis(dom, DN1, Field.analytic(dom, 2 * n + 1)))
    np.testing.assert_array_equal(P.coefficient(BasisWedge((), ())).values(), np.arange(8) ** 2)


@pytest.mark.parametrize("p,degree", [(2, 1), (2, 2), (3, 1), (3, 2), (3, 3)])
def test_primitive_reproduces_exact_forms(p, degree):
    rng = np.random.default_rng(p * 10 + degree)
    dom = make_domain(p, 0, [(0, 7)] * p)
    omega = d_discrete(random_form(rng, dom, degree - 1, backend="grid"))
    P = discrete_primitive(omega)
    assert P.degree == degree - 1
    assert (d_discrete(P) - omega).max_norm() <= 1e-12


def test_primitive_rejects_open_forms(lat2):
    n1 = lat2.lattice_symbols[0]
    w = Form.basis(lat2, DN2, Field.analytic(lat2, n1))
    with pytest.raises(NotClosedError) as info:
        discrete_primitive(w)
    assert info.value.defect == pytest.approx(1.0)


def test_primitive_rejects_mixed_sector(mixed):
    with pytest.raises(ShapeError):
        discrete_primitive(Form.basis(mixed, DX1, Field.constant(mixed, 1.0)))


def test_form_roundtrip(tmp_path, mixed):
    rng = np.random.default_rng(8)
    w = random_form(rng, mixed, 1, (2, 2))
    save_form(w, tmp_path / "w")
    back = load_form(tmp_path / "w")
    assert back.degree == 1
    assert (back - w).max_norm() == 0
