import numpy as np
import pytest

from curvkit import lax, sim
from curvkit.domain import make_domain
from curvkit.errors import ConfigError, ShapeError
from curvkit.field import Field
from curvkit.pipelines import nls_soliton_grid, sg_initial, toda_seed_rows
from curvkit.suites import random_field


@pytest.fixture
def plane():
    return make_domain(2, 0, [(0, 7), (0, 7)])


@pytest.fixture
def xt():
    return make_domain(0, 2, [], [(0.0, 1.0), (0.0, 1.0)], [0.25, 0.25])


@pytest.fixture
def chain_t():
    return make_domain(1, 1, [(0, 7)], [(0.0, 1.0)], [0.25])


def _positive(rng, dom):
    return Field.from_samples(dom, rng.uniform(0.5, 2.0, dom.sample_shape(dom.full_region)))


def _sg_solution(sites=16, steps=200, gamma=1.0):
    cfg = sim.SolverConfig(dt=1e-3, steps=steps, boundary="prescribed-edge")
    return sim.sg_integrate(sg_initial(sites, 0), gamma, cfg)


def test_toda_matrices_at_unit_field(plane):
    B = lax.build_connection(lax.LaxExample.toda(Field.constant(plane, 1.0), 1.0))
    B1, B2 = (b.values()[0, 0] for b in B.B_D)
    np.testing.assert_allclose(B1, [[0, 1], [1, -2]])
    np.testing.assert_allclose(B2, [[1, 1], [1, -1]])


def test_sg_matrices_at_zero_field(chain_t):
    B = lax.build_connection(lax.LaxExample.sine_gordon(Field.constant(chain_t, 0.0), 1.0, 1.0))
    np.testing.assert_allclose(B.B_C[0].values()[0, 0], [[-1, 1 / 1j], [1 / 1j, -1]])
    np.testing.assert_allclose(B.B_D[0].values()[0, 0], [[0, 1j], [1j, 0]])


def test_nls_zero_field_connection_vanishes(xt):
    B = lax.build_connection(lax.LaxExample.nls(Field.constant(xt, 0.0)))
    assert all(b.max_abs() == 0 for b in B.B_C)
    assert lax.residual_field(lax.LaxExample.nls(Field.constant(xt, 0.0))).max_abs() == 0


def test_toda_structural_zeros(plane):
    rng = np.random.default_rng(0)
    F = lax.residual_field(lax.LaxExample.toda(_positive(rng, plane), 1.7)).values()
    for i, j in [(0, 1), (1, 0), (1, 1)]:
        assert np.max(np.abs(F[..., i, j])) <= 1e-12
    assert np.max(np.abs(F[..., 0, 0])) > 1e-2


def test_sg_off_diagonals_vanish(chain_t):
    rng = np.random.default_rng(1)
    f = random_field(rng, chain_t)
    theta = (f + f.conj()) * 0.5
    F = lax.residual_field(lax.LaxExample.sine_gordon(theta, 0.8, 1.3)).values()
    assert np.max(np.abs(F[..., 0, 1])) <= 1e-12
    assert np.max(np.abs(F[..., 1, 0])) <= 1e-12
    assert np.max(np.abs(F[..., 0, 0])) > 1e-2


def test_nls_conjugate_pairing(xt):
    rng = np.random.default_rng(2)
    ex = lax.LaxExample.nls(random_field(rng, xt))
    F = lax.residual_field(ex).values()
    R = lax.reduced_equation_residual(ex).values()
    assert np.max(np.abs(F[..., 0, 0])) <= 1e-12
    assert np.max(np.abs(F[..., 1, 1])) <= 1e-12
    assert np.max(np.abs(F[..., 1, 0] + R)) <= 1e-12
    assert np.max(np.abs(F[..., 0, 1] - np.conj(R))) <= 1e-12


def test_nls_as_printed_keeps_diagonal():
    dom = make_domain(0, 2, [], [(-4.0, 4.0), (0.0, 1.0)], [0.25, 0.25])
    ex = lax.LaxExample.nls(sim.nls_soliton_field(dom))
    assert lax.residual_field(ex).max_abs() <= 1e-9
    F = lax.residual_field(ex, as_printed=True).values()
    assert np.max(np.abs(F[..., 0, 0])) > 0.1


@pytest.mark.parametrize("eps", [1e-3, 1e-2])
def test_residual_scales_with_perturbation(eps):
    dom = make_domain(0, 2, [], [(-4.0, 4.0), (0.0, 1.0)], [0.25, 0.25])
    rng = np.random.default_rng(3)
    u = sim.nls_soliton_field(dom)
    g = random_field(rng, dom)
    r = lax.residual_field(lax.LaxExample.nls(u + eps * g)).max_abs()
    r_small = lax.residual_field(lax.LaxExample.nls(u + 0.1 * eps * g)).max_abs()
    assert 8.0 <= r / r_small <= 12.0


def test_witness_separates_solution_from_perturbation():
    q = sim.toda_evolve(*toda_seed_rows(16, 0), steps=14)
    u = q.exp()
    bumped = Field.from_samples(u.domain, u.values() * (1 + 0.1 * np.random.default_rng(4).uniform(size=u.values().shape)))
    report = lax.equivalence_witness(lax.LaxExample.toda(u), [("solution", u), ("perturbed", bumped)])
    solved, perturbed = report.rows
    assert solved.curvature <= 1e-10 and solved.reduced <= 1e-10
    assert perturbed.curvature > 1e-3 and perturbed.reduced > 1e-3
    assert report.consistent


def test_sg_solution_flat_for_other_k():
    theta = _sg_solution()
    ex = lax.LaxExample.sine_gordon(theta, 1.0, 1.0)
    assert lax.residual_field(ex.with_params(k=2.0)).max_abs() <= 1e-10
    report = lax.equivalence_witness(ex, [("rk4", theta)], params=[0.5, 2.0, 3.0])
    assert report.rows[0].curvature <= 1e-10
    assert report.rows[0].reduced <= 1e-10


def test_sg_wrong_coefficient_is_not_a_solution():
    theta = _sg_solution()
    ex = lax.LaxExample.sine_gordon(theta, 1.0, 1.0)
    assert lax.reduced_equation_residual(ex).max_abs() <= 1e-10
    assert lax.reduced_equation_residual(ex, coefficient=1.0).max_abs() > 0.1


def test_trivial_reduced_residuals(plane, chain_t, xt):
    assert lax.reduced_equation_residual(lax.LaxExample.toda(Field.constant(plane, 1.0))).max_abs() <= 1e-15
    assert lax.reduced_equation_residual(lax.LaxExample.sine_gordon(Field.constant(chain_t, 0.0))).max_abs() == 0
    assert lax.reduced_equation_residual(lax.LaxExample.nls(Field.constant(xt, 0.0))).max_abs() == 0


def test_toda_curvature_is_affine_in_lambda(plane):
    u = _positive(np.random.default_rng(5), plane)
    F = {lam: lax.residual_field(lax.LaxExample.toda(u, lam)) for lam in (0.5, 1.0, 2.0)}
    assert ((F[2.0] - F[1.0]) - 2 * (F[1.0] - F[0.5])).max_abs() <= 1e-12


def test_toda_q_residual_matches_u_form(plane):
    q = sim.toda_evolve(*toda_seed_rows(8, 1), steps=6)
    assert lax.toda_q_residual(q).max_abs() <= 1e-12


def test_nls_grid_soliton_small_residual():
    u = nls_soliton_grid(0.05)
    assert lax.residual_field(lax.LaxExample.nls(u)).max_abs() < 1e-2


@pytest.mark.parametrize(
    "build",
    [
        lambda d: lax.LaxExample.sine_gordon(Field.constant(d["sg"], 0.0), 1.0, 0.0),
        lambda d: lax.LaxExample.sine_gordon(Field.constant(d["sg"], 0.0), 1j, 1.0),
        lambda d: lax.LaxExample.toda(Field.constant(d["toda"], -1.0)),
        lambda d: lax.LaxExample.toda(Field.constant(d["toda"], 1.0), 0.0),
        lambda d: lax.LaxExample("kdv", Field.constant(d["toda"], 1.0), {}),
    ],
)
def test_parameter_errors(build, plane, chain_t):
    with pytest.raises(ConfigError):
        build({"sg": chain_t, "toda": plane})


def test_domain_mismatch(chain_t):
    with pytest.raises(ShapeError):
        lax.LaxExample.nls(Field.constant(chain_t, 0.0))
    with pytest.raises(ShapeError):
        lax.LaxExample.sine_gordon(Field.constant(chain_t, [[0.0, 0.0], [0.0, 0.0]]))


def test_witness_needs_fields(plane):
    with pytest.raises(ConfigError):
        lax.equivalence_witness(lax.LaxExample.toda(Field.constant(plane, 1.0)), [])
