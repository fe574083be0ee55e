import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import circulant_stencil, position_h, riemann_omega
from qmagnus.diagnostics import scan_alpha, scan_beta
from qmagnus.discretization import PotentialSpec, SpatialGrid
from qmagnus.errors import DenseModeRequired, NonPositiveDenominator, RegimeViolation
from qmagnus.linalg import opnorm
from qmagnus.magnus import (
    MagnusStepConfig,
    assemble_omega2,
    evolve,
    magnus_step,
    recommended_quadrature_points,
)
from qmagnus.propagators import InteractionHamiltonianEvaluator, exact_propagator

COS = PotentialSpec.cos_mode(1, 1.0)


def ev_for(n, pot=COS):
    return InteractionHamiltonianEvaluator.build(SpatialGrid(n), pot)


def test_config_validation():
    with pytest.raises(ValueError):
        MagnusStepConfig(0.0)
    with pytest.raises(ValueError):
        MagnusStepConfig(0.1, 0)
    with pytest.raises(ValueError):
        MagnusStepConfig(0.1, 4, "simpson")
    with pytest.raises(ValueError):
        MagnusStepConfig(0.1, 4, exponentiation="pade")
    with pytest.warns(RegimeViolation):
        MagnusStepConfig(1.5)
    np.testing.assert_allclose(MagnusStepConfig(0.4, 4, "left_riemann").nodes(1.0), [1.0, 1.1, 1.2, 1.3])
    np.testing.assert_allclose(MagnusStepConfig(0.4, 4).nodes(0.0), [0.05, 0.15, 0.25, 0.35])


def test_constant_potential_exponent():
    ev = ev_for(8, PotentialSpec.const(1.5))
    ex = assemble_omega2(ev, 0.2, MagnusStepConfig(0.1, 64, "left_riemann"))
    np.testing.assert_allclose(ex.omega, -1j * 1.5 * 0.1 * np.eye(8), atol=1e-14)
    assert np.max(np.abs(ex.second_term)) <= 1e-14


def test_single_node():
    ev = ev_for(8)
    ex = assemble_omega2(ev, 0.3, MagnusStepConfig(0.1, 1, "left_riemann"))
    np.testing.assert_allclose(ex.omega, -1j * 0.1 * ev.position_h(0.3), atol=1e-15)
    assert np.max(np.abs(ex.second_term)) == 0


def test_exponent_structure():
    ev = ev_for(16)
    ex = assemble_omega2(ev, 0.0, MagnusStepConfig(0.2, 32))
    np.testing.assert_allclose(ex.omega, ex.first_term + ex.second_term, atol=1e-15)
    assert np.max(np.abs(ex.omega + ex.omega.conj().T)) <= 1e-10
    assert np.max(np.abs(ex.second_term + ex.second_term.conj().T)) <= 1e-14
    assert np.max(np.abs(ex.first_term + ex.first_term.conj().T)) <= 1e-14


@pytest.mark.parametrize("rule,offset", [("left_riemann", 0.0), ("midpoint_reference", 0.5)])
def test_exponent_matches_oracle_double_sum(rule, offset):
    ev = ev_for(8)
    a = circulant_stencil(8, 1.0)
    t0, dt, m = 0.1, 0.2, 12
    h = dt / m
    hs = [position_h(a, ev.hamiltonian.b_diag, t0 + (j + offset) * h) for j in range(m)]
    first, second = riemann_omega(hs, h)
    ex = assemble_omega2(ev, t0, MagnusStepConfig(dt, m, rule))
    np.testing.assert_allclose(ex.first_term, first, atol=1e-12)
    np.testing.assert_allclose(ex.second_term, second, atol=1e-12)


def test_riemann_first_order_self_consistency():
    ev = ev_for(8)

    def om(m):
        return assemble_omega2(ev, 0.0, MagnusStepConfig(0.1, m, "left_riemann")).omega

    o1, o2, o4 = om(256), om(512), om(1024)
    ratio = opnorm(o1 - o2) / opnorm(o2 - o4)
    assert 1.7 <= ratio <= 2.3


def test_midpoint_second_order_self_consistency():
    ev = ev_for(8)

    def om(m):
        return assemble_omega2(ev, 0.0, MagnusStepConfig(0.1, m)).omega

    ratio = opnorm(om(64) - om(128)) / opnorm(om(128) - om(256))
    assert 3.6 <= ratio <= 4.4


def test_dense_required():
    ev = InteractionHamiltonianEvaluator.build(SpatialGrid(8), COS, "matrix_free")
    with pytest.raises(DenseModeRequired):
        assemble_omega2(ev, 0.0, MagnusStepConfig(0.1, 4))


def test_step_trivial():
    ev0 = ev_for(8, PotentialSpec.zero())
    np.testing.assert_allclose(magnus_step(ev0, 0.0, MagnusStepConfig(0.1, 16)).matrix, np.eye(8), atol=1e-14)
    evc = ev_for(8, PotentialSpec.const(2.0))
    u = magnus_step(evc, 0.4, MagnusStepConfig(0.1, 16))
    np.testing.assert_allclose(u.matrix, np.exp(-0.2j) * np.eye(8), atol=1e-14)
    assert u.unitarity_defect <= 1e-9


def test_step_obeys_local_bound():
    ev = ev_for(8)
    dt = 0.05
    u = magnus_step(ev, 0.0, MagnusStepConfig(dt, 4096))
    err = opnorm(u.matrix - exact_propagator(ev, dt, 0.0).matrix)
    alpha = scan_alpha(ev, 0.0, dt).alpha_sup
    beta = scan_beta(ev, 0.0, dt).beta_sup
    assert err <= 13 / 24 * dt**3 * alpha + 5 / 48 * dt**4 * beta


def test_evolve_single_step_and_constant():
    ev = ev_for(8)
    cfg = MagnusStepConfig(0.25, 32)
    np.testing.assert_allclose(evolve(ev, 0.25, 1, cfg).matrix, magnus_step(ev, 0.0, cfg).matrix, atol=1e-13)
    evc = ev_for(8, PotentialSpec.const(0.7))
    u = evolve(evc, 1.0, 4, cfg)
    np.testing.assert_allclose(u.matrix, np.exp(-0.7j) * np.eye(8), atol=1e-13)
    with pytest.raises(ValueError):
        evolve(ev, 1.0, 3, cfg)


def test_evolve_product_order():
    ev = ev_for(8)
    cfg = MagnusStepConfig(0.1, 16)
    u = evolve(ev, 0.3, 3, cfg).matrix
    steps = [magnus_step(ev, j * 0.1, cfg).matrix for j in range(3)]
    np.testing.assert_allclose(u, steps[2] @ steps[1] @ steps[0], atol=1e-13)
    assert np.max(np.abs(u - steps[0] @ steps[1] @ steps[2])) > 1e-6


def test_evolve_triangle_inequality():
    ev = ev_for(8)
    T, L = 1.0, 10
    cfg = MagnusStepConfig(T / L, 4096)
    total = opnorm(evolve(ev, T, L, cfg).matrix - exact_propagator(ev, T, 0.0).matrix)
    local = sum(
        opnorm(magnus_step(ev, j * T / L, cfg).matrix - exact_propagator(ev, (j + 1) * T / L, j * T / L).matrix)
        for j in range(L)
    )
    assert total <= local + 1e-13


@pytest.mark.parametrize("L", [1, 2, 5, 16])
def test_free_evolution_identity(L):
    ev = ev_for(16, PotentialSpec.zero())
    u = evolve(ev, 1.0, L, MagnusStepConfig(1.0 / L, 8))
    np.testing.assert_allclose(u.matrix, np.eye(16), atol=1e-10)


def test_bit_identical_exponents():
    ev = ev_for(16)
    cfg = MagnusStepConfig(0.1, 300, "left_riemann")
    a = assemble_omega2(ev, 0.05, cfg).omega
    b = assemble_omega2(InteractionHamiltonianEvaluator.build(SpatialGrid(16), COS), 0.05, cfg).omega
    assert a.tobytes() == b.tobytes()


def test_recommended_points_trivial():
    assert recommended_quadrature_points(1.0, 0.1, 1.0, 0.5, 0.0).points == 1
    e1 = recommended_quadrature_points(1.0, 0.1, 1.0, 0.5, 3.0)
    e2 = recommended_quadrature_points(1.0, 0.1, 1.0, 0.5, 6.0)
    assert e2.raw == pytest.approx(2 * e1.raw)
    assert e1.log2_points == pytest.approx(np.log2(e1.points))
    with pytest.raises(NonPositiveDenominator):
        recommended_quadrature_points(1.0, 0.1, 1.0, 0.0, 3.0)
    with pytest.raises(ValueError):
        recommended_quadrature_points(-1.0, 0.1, 1.0, 1.0, 3.0)


@given(
    T=st.floats(0.1, 10), dt=st.floats(0.01, 1), alpha=st.floats(0, 5),
    comm=st.floats(1e-3, 10), dh=st.floats(1e-3, 1e3),
)
@settings(max_examples=50, deadline=None)
def test_recommended_points_formula(T, dt, alpha, comm, dh):
    e = recommended_quadrature_points(T, dt, alpha, comm, dh, balance=1.0)
    raw = dh * T * (1 + 3 * dt * alpha) / (dt**2 * comm * (13 + 10 * dt * alpha))
    assert e.raw == pytest.approx(raw, rel=1e-12)
    assert e.points == max(1, int(np.ceil(raw)))


def test_recommended_points_balance_terms():
    ev = ev_for(64)
    T, dt = 1.0, 0.1
    L = 10
    alpha_c = scan_alpha(ev, 0.0, dt).alpha_sup
    beta_c = scan_beta(ev, 0.0, dt).beta_sup
    b, dh = ev.b_norm(), ev.commutator_ab_norm()
    est = recommended_quadrature_points(T, dt, b, L * alpha_c, dh)
    quad = T * dt / est.points * (1 + 3 * dt * b) * dh
    comm = L * (13 / 24 * dt**3 * alpha_c + 5 / 48 * dt**4 * beta_c)
    assert 0.5 <= quad / comm <= 2.0
