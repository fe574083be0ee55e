import warnings

import numpy as np
import pytest

from oracles import brute_alpha, brute_beta, circulant_stencil
from qmagnus.diagnostics import (
    CommutatorScan,
    scan_alpha,
    scan_beta,
    scan_commutators,
    superconvergence_constant,
)
from qmagnus.discretization import PotentialSpec, SpatialGrid, build_hamiltonian
from qmagnus.errors import DenseModeRequired, RegimeViolation
from qmagnus.propagators import InteractionHamiltonianEvaluator

COS = PotentialSpec.cos_mode(1, 1.0)


def ev_for(n, pot=COS, b=1.0):
    return InteractionHamiltonianEvaluator.build(SpatialGrid(n, b=b), pot)


def test_constant_potential_zero():
    ev = ev_for(16, PotentialSpec.const(2.0))
    s = scan_commutators(ev, 0.0, 0.1, 9)
    assert s.alpha_sup <= 1e-12 and s.beta_sup <= 1e-12


def test_origin_cell_zero():
    ev = ev_for(16)
    # k = 3 puts (0, 0) on the grid; the value there is ||[[B, B], B]|| = 0
    s = scan_alpha(ev, 0.0, 0.1, 3, refine=False)
    assert s.alpha_sup > 0
    b = np.diag(ev.hamiltonian.b_diag)
    assert np.max(np.abs((b @ b - b @ b) @ b)) == 0


def test_alpha_reduction_matches_three_axis_scan():
    ev = ev_for(16)
    a = circulant_stencil(16, 1.0)
    dt, k = 0.1, 9
    ref = brute_alpha(a, ev.hamiltonian.b_diag, 0.0, dt, k)
    # differences of a k-point grid on [0, dt] are a (2k-1)-point grid on [-dt, dt]
    red = scan_alpha(ev, 0.0, dt, 2 * k - 1, domain="interval", refine=False, norm="exact_svd")
    assert abs(red.alpha_sup - ref) <= 1e-10


def test_beta_reduction_matches_four_axis_scan():
    ev = ev_for(8)
    a = circulant_stencil(8, 1.0)
    dt, k = 0.2, 4
    ref = brute_beta(a, ev.hamiltonian.b_diag, 0.0, dt, k)
    red = scan_beta(ev, 0.0, dt, 2 * k - 1, refine=False, norm="exact_svd")
    assert abs(red.beta_sup - ref) <= 1e-10


def test_square_dominates_interval():
    ev = ev_for(16)
    sq = scan_alpha(ev, 0.0, 0.1, 9, refine=False)
    iv = scan_alpha(ev, 0.0, 0.1, 9, domain="interval", refine=False)
    assert sq.alpha_sup >= iv.alpha_sup
    assert sq.n_evals == 81 and iv.n_evals < 81


@pytest.mark.parametrize("n", [16, 32])
def test_beta_bounded_by_alpha(n):
    ev = ev_for(n)
    for dt in (0.05, 0.1, 0.3):
        s = scan_commutators(ev, 0.0, dt, 9)
        assert s.beta_sup <= 4 * ev.b_norm() * s.alpha_sup + 1e-9


def test_beta_equal_times_zero():
    ev = ev_for(8)
    h = ev.position_h(0.1)
    c = h @ h - h @ h
    assert np.max(np.abs(c @ c - c @ c)) == 0


def test_monotone_under_nested_grids():
    ev = ev_for(16)
    vals = [scan_alpha(ev, 0.0, 0.2, k, refine=False).alpha_sup for k in (3, 5, 9, 17)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    ref = scan_alpha(ev, 0.0, 0.2, 9).alpha_sup
    assert ref >= vals[2]


def test_scan_metadata_and_merge():
    ev = ev_for(16)
    a = scan_alpha(ev, 0.0, 0.1, 5)
    b = scan_beta(ev, 0.0, 0.1, 5)
    m = a.merge(b)
    assert isinstance(m, CommutatorScan)
    assert m.alpha_sup == a.alpha_sup and m.beta_sup == b.beta_sup
    assert set(m.argmax_times) == {"alpha", "beta"}
    assert m.n_evals == a.n_evals + b.n_evals
    tau, s = a.argmax_times["alpha"]
    assert abs(tau) <= 0.1 and abs(s) <= 0.1
    with pytest.raises(ValueError):
        a.merge(scan_beta(ev, 0.0, 0.2, 5))


def test_scan_argument_checks():
    ev = ev_for(8)
    with pytest.raises(ValueError):
        scan_alpha(ev, 0.1, 0.1)
    with pytest.raises(ValueError):
        scan_alpha(ev, 0.0, 0.1, 1)
    with pytest.raises(ValueError):
        scan_alpha(ev, 0.0, 0.1, 5, domain="disk")
    free = InteractionHamiltonianEvaluator.build(SpatialGrid(8), COS, "matrix_free")
    with pytest.raises(DenseModeRequired):
        scan_alpha(free, 0.0, 0.1)


def test_deterministic_ties():
    ev = ev_for(16)
    a = scan_alpha(ev, 0.0, 0.1, 9)
    b = scan_alpha(ev, 0.0, 0.1, 9)
    assert a == b
    # f(tau, s) = f(-tau, -s): of each symmetric pair the smaller tuple wins
    tau, s = scan_alpha(ev, 0.0, 0.1, 9, refine=False).argmax_times["alpha"]
    assert (tau, s) <= (-tau, -s)


def test_norm_methods_agree():
    ev = ev_for(32)
    a = scan_alpha(ev, 0.0, 0.1, 5, norm="exact_svd").alpha_sup
    b = scan_alpha(ev, 0.0, 0.1, 5, norm="auto").alpha_sup
    assert b == pytest.approx(a, rel=1e-12)


def test_auto_falls_back_on_paired_spectrum(monkeypatch):
    # integrands of a reflection-symmetric potential have doubly degenerate
    # eigenvalue pairs split by ~1e-4 relative: power iteration stalls there
    import qmagnus.linalg as la

    monkeypatch.setattr(la, "AUTO_DENSE_MAX", 0)
    ev = ev_for(32)
    a = scan_alpha(ev, 0.0, 0.1, 3, refine=False, norm="exact_svd").alpha_sup
    b = scan_alpha(ev, 0.0, 0.1, 3, refine=False, norm="auto").alpha_sup
    assert b == pytest.approx(a, rel=1e-8)


def test_superconvergence_zero_potential():
    h = build_hamiltonian(SpatialGrid(16), PotentialSpec.zero())
    rows = superconvergence_constant(h, [0.5, 0.25], 5)
    assert all(r.sup_norm == 0 and r.ratio == 0 for r in rows)


def test_superconvergence_regime_tagging():
    h = build_hamiltonian(SpatialGrid(16), COS)
    with pytest.warns(RegimeViolation):
        rows = superconvergence_constant(h, [0.5, 1 / 32], 5)
    assert [r.in_regime for r in rows] == [True, False]
    assert rows[1].ratio == pytest.approx(rows[1].sup_norm * 32**2)


def test_halving_quarters_in_smooth_regime():
    # on a box of length 2 pi the Schrodinger time scale is O(1) and the
    # quadratic law is visible for 1/N << dt << 1
    ev = ev_for(128, b=2 * np.pi)
    with warnings.catch_warnings():
        warnings.simplefilter("error", RegimeViolation)
        rows = superconvergence_constant(ev, [1 / 8, 1 / 16, 1 / 32])
    for r1, r2 in zip(rows, rows[1:]):
        assert 3.4 <= r1.sup_norm / r2.sup_norm <= 4.6


def test_constant_uniform_in_n_at_fixed_dt():
    c = []
    for n in (32, 64, 128, 256):
        (row,) = superconvergence_constant(ev_for(n), [0.1])
        c.append(row.ratio)
    assert max(c) / min(c) <= 1.5
