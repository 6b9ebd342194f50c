import numpy as np
import pytest

from curvkit import lax, sim
from curvkit.connection import (
    Connection,
    CurvatureComponents,
    Section,
    covariant_derivative,
    curvature_components,
    curvature_via_D2,
    exterior_covariant,
    residual_norms,
    sigma_check,
)
from curvkit.domain import make_domain
from curvkit.errors import ShapeError
from curvkit.field import Field
from curvkit.forms import BasisWedge, Form, d
from curvkit.suites import curvature_path_difference, random_connection, random_domain, random_field

DN1 = BasisWedge((0,), ())
DX1 = BasisWedge((), (0,))


@pytest.fixture
def box():
    return make_domain(2, 2, [(0, 3), (0, 3)], [(0.0, 1.0), (0.0, 1.0)], [0.25, 0.25])


def _max(F: CurvatureComponents) -> float:
    return max((v["max"] for v in residual_norms(F).values()), default=0.0)


def test_zero_connection_gives_plain_differential(box):
    rng = np.random.default_rng(0)
    f = random_field(rng, box, (1, 2))
    Ds = covariant_derivative(Section(f), Connection.zero(box, 2))
    assert (Ds - d(Form.scalar(f))).max_norm() == 0


def test_constant_section_discrete_part():
    dom = make_domain(1, 0, [(0, 4)])
    B = Connection.build(dom, [np.array([[1.0, 2.0], [3.0, 4.0]])])
    f = Field.constant(dom, [[1.0, -1.0]])
    Ds = covariant_derivative(f, B)
    np.testing.assert_allclose(Ds.coefficient(DN1).values()[0], [[2.0, 2.0]])


def _rk4_row(B, x):
    # integrate dPsi/dx = Psi B(x) with the step of the sampling grid
    psi = np.array([[1.0, 0.0]], dtype=complex)
    out = [psi]
    for a, b in zip(x[:-1], x[1:]):
        h = b - a
        k1 = psi @ B(a)
        k2 = (psi + h / 2 * k1) @ B(a + h / 2)
        k3 = (psi + h / 2 * k2) @ B(a + h / 2)
        k4 = (psi + h * k3) @ B(b)
        psi = psi + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(psi)
    return np.array(out)


def test_linear_problem_solution_is_covariantly_constant():
    def Bx(x):
        return (1 + x) * np.array([[0.0, 1.0], [-1.0, 0.5j]])

    errors = []
    for h in (0.02, 0.01):
        dom = make_domain(0, 1, [], [(0.0, 1.0)], [h])
        x = dom.grids[0]
        psi = Field.from_samples(dom, _rk4_row(Bx, x))
        B = Connection.build(dom, [], [Field.from_samples(dom, np.array([Bx(v) for v in x]))])
        errors.append(covariant_derivative(psi, B).coefficient(DX1).max_abs())
    # the remaining error is the stencil's O(h^2)
    assert errors[0] < 1e-3
    assert 3.5 <= errors[0] / errors[1] <= 4.5


def test_section_shape_checks(box):
    with pytest.raises(ShapeError):
        Section(Field.constant(box, [[1.0], [0.0]]))
    with pytest.raises(ShapeError):
        covariant_derivative(Field.constant(box, [[1.0, 0.0, 0.0]]), Connection.zero(box, 2))


def test_sigma_trivial_cases(box):
    rng = np.random.default_rng(1)
    B = random_connection(rng, box, 2)
    assert sigma_check(0, Field.constant(box, 3.0), B) <= 1e-15
    assert sigma_check(1, random_field(rng, box), Connection.zero(box, 2)) == 0


def test_sigma_random_chain():
    rng = np.random.default_rng(2)
    dom = make_domain(1, 1, [(0, 15)], [(0.0, 1.0)], [0.25])
    for _ in range(10):
        m = int(rng.integers(1, 4))
        B = random_connection(rng, dom, m)
        assert sigma_check(int(rng.integers(0, m)), random_field(rng, dom), B) <= 1e-12


def test_sigma_on_grid_chain():
    rng = np.random.default_rng(3)
    dom = make_domain(1, 0, [(0, 15)])
    B = Connection.build(dom, [random_field(rng, dom, (2, 2), "grid")])
    assert sigma_check(1, random_field(rng, dom, (), "grid"), B) <= 1e-12


def test_zero_connection_is_flat(box):
    B = Connection.zero(box, 3)
    assert _max(curvature_components(B)) == 0
    assert _max(curvature_via_D2(B)) == 0


def test_scalar_multiples_of_identity_are_flat():
    dom = make_domain(2, 0, [(0, 4), (0, 4)])
    B = Connection.build(dom, [2.0 * np.eye(2), -0.5 * np.eye(2)])
    assert _max(curvature_components(B)) == 0


def test_constant_connection_both_paths():
    rng = np.random.default_rng(4)
    dom = make_domain(2, 0, [(0, 4), (0, 4)])
    mats = [rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(2)]
    assert curvature_path_difference(Connection.build(dom, mats)) <= 1e-12


def test_random_connections_both_paths():
    rng = np.random.default_rng(5)
    for _ in range(10):
        dom = random_domain(rng, 3)
        assert curvature_path_difference(random_connection(rng, dom, int(rng.integers(1, 4)))) <= 1e-12


def test_probe_sets_agree(box):
    rng = np.random.default_rng(6)
    B = random_connection(rng, box, 3)
    base = curvature_path_difference(B)
    rows = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    probes = [Field.constant(box, r[None, :]) for r in rows]
    assert curvature_path_difference(B, probes) <= 1e-12
    # an overcomplete, field-dependent spanning set goes through the pointwise pseudo-inverse
    extra = random_field(rng, box, (1, 3))
    assert curvature_path_difference(B, probes + [extra]) <= 1e-11
    assert base <= 1e-12


def test_too_few_probes(box):
    B = Connection.zero(box, 2)
    with pytest.raises(ShapeError):
        curvature_via_D2(B, [Section.basis(box, 2, 0)])


def test_second_covariant_derivative_is_minus_fF(box):
    rng = np.random.default_rng(7)
    B = random_connection(rng, box, 2)
    f = random_field(rng, box, (1, 2))
    D2 = exterior_covariant(covariant_derivative(f, B), B)
    F = curvature_components(B)
    for (mu, nu), comp in F.DD.items():
        c = D2.coefficient(BasisWedge((mu, nu), ()))
        assert (c + f @ comp).max_abs() <= 1e-12
    for (i, j), comp in F.CC.items():
        c = D2.coefficient(BasisWedge((), (i, j)))
        assert (c + f @ comp).max_abs() <= 1e-12
    for (mu, i), comp in F.DC.items():
        c = D2.coefficient(BasisWedge((mu,), (i,)))
        assert (c + f @ comp).max_abs() <= 1e-12


def test_exterior_covariant_on_degree_zero_matches_D(box):
    rng = np.random.default_rng(8)
    B = random_connection(rng, box, 2)
    f = random_field(rng, box, (1, 2))
    assert (exterior_covariant(Form.scalar(f), B) - covariant_derivative(f, B)).max_norm() == 0


def test_permuted_axes_keep_curvature_norms():
    rng = np.random.default_rng(9)
    dom = make_domain(2, 1, [(0, 3), (0, 4)], [(0.0, 1.0)], [0.25])
    swapped = make_domain(2, 1, [(0, 4), (0, 3)], [(0.0, 1.0)], [0.25], names=["n2", "n1", "x"])
    B = random_connection(rng, dom, 2)
    F = curvature_components(B)
    G = curvature_components(B.permute_lattice([1, 0], swapped))
    assert G.DD[(0, 1)].max_abs() == pytest.approx(F.DD[(0, 1)].max_abs(), rel=1e-12)
    assert G.DC[(0, 0)].max_abs() == pytest.approx(F.DC[(1, 0)].max_abs(), rel=1e-12)


def test_residual_norms_examples():
    dom = make_domain(1, 1, [(0, 2)], [(0.0, 1.0)], [0.5])
    zero = Field.from_samples(dom, np.zeros((3, 3, 2, 2)))
    assert residual_norms(CurvatureComponents(dom, DC={(0, 0): zero}))["DC[1,1]"]["max"] == 0
    data = np.zeros((3, 3, 2, 2))
    data[1, 2, 0, 1] = 3.0
    norms = residual_norms(CurvatureComponents(dom, DC={(0, 0): Field.from_samples(dom, data)}))
    assert norms["DC[1,1]"]["max"] == 3.0
    assert norms["DC[1,1]"]["points"] == 9


def test_toda_connection_both_paths():
    q = sim.toda_evolve(*np.random.default_rng(10).normal(scale=0.3, size=(2, 16)), steps=14)
    B = lax.build_connection(lax.LaxExample.toda(q.exp(), 1.0))
    F1, F2 = curvature_components(B), curvature_via_D2(B)
    assert _max(F1) <= 1e-10
    assert _max(F2) <= 1e-10
    assert curvature_path_difference(B) <= 1e-12


@pytest.mark.parametrize("kind", ["nls", "sg", "toda"])
def test_display_ordering_sign(kind):
    # the examples' displayed compatibility expression is -F for NLS and Toda, +F for SG
    rng = np.random.default_rng(12)
    if kind == "nls":
        dom = make_domain(0, 2, [], [(0.0, 1.0), (0.0, 1.0)], [0.25, 0.25])
        ex = lax.LaxExample.nls(random_field(rng, dom))
        sign, key = -1, ("CC", (0, 1))
    elif kind == "sg":
        dom = make_domain(1, 1, [(0, 5)], [(0.0, 1.0)], [0.25])
        ex = lax.LaxExample.sine_gordon(random_field(rng, dom), 1.0, 0.7)
        sign, key = 1, ("DC", (0, 0))
    else:
        dom = make_domain(2, 0, [(0, 5), (0, 5)])
        ex = lax.LaxExample.toda(Field.from_samples(dom, rng.uniform(0.5, 2.0, (6, 6))), 1.3)
        sign, key = -1, ("DD", (0, 1))
    display = lax.residual_field(ex)
    closed = getattr(curvature_components(lax.build_connection(ex)), key[0])[key[1]]
    region = display.region
    assert (display - sign * closed.restrict(region)).max_abs() <= 1e-12
