import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tdprop_lab.errors import InvalidArg, NonPositiveSpectrum, NotSymmetric
from tdprop_lab.linalg import eigenvalues_general, spectral_radius_general
from tdprop_lab.mdp import Mdp, exact_value, random_mdp, symmetric_mdp
from tdprop_lab.precond import (
    Splitting,
    Variant,
    analyze,
    build_system,
    iteration_rate,
    jacobi_split,
    optimal_alpha,
    plain_split,
    theorem1_check,
    theorem2_check,
    verify_regular_splitting,
)

VARIANTS = [Variant(), Variant("nstep", n=1), Variant("nstep", n=2), Variant("nstep", n=5),
            Variant("lambda", lam=0.0), Variant("lambda", lam=0.5), Variant("lambda", lam=0.9),
            Variant("lambda", lam=1.0)]


def test_variant_parsing():
    assert Variant.parse("td0") == Variant()
    assert Variant.parse("nstep:3") == Variant("nstep", n=3)
    assert Variant.parse("lambda:0.5") == Variant("lambda", lam=0.5)
    assert str(Variant.parse("lambda:0.5")) == "lambda:0.5"
    for bad in ("lambda:1.5", "nstep:0", "nstep:x", "td1", "td0:3"):
        with pytest.raises(InvalidArg):
            Variant.parse(bad)


def test_td0_system(two_state):
    sys = build_system(two_state)
    assert sys.h == pytest.approx(np.array([[0.19, -0.09], [-0.18, 0.28]]), abs=1e-15)


def test_degenerate_variants_collapse(two_state):
    td0 = build_system(two_state).h
    assert np.array_equal(build_system(two_state, Variant("lambda", lam=0.0)).h, td0)
    assert np.array_equal(build_system(two_state, Variant("nstep", n=1)).h, td0)


@given(st.integers(2, 12), st.integers(0, 2**31), st.sampled_from(VARIANTS),
       st.sampled_from([0.5, 0.9, 0.99]))
def test_system_solved_by_v_star(n, seed, variant, gamma):
    m = random_mdp(seed, n, max(1, n // 2), gamma)
    sys = build_system(m, variant)
    v = exact_value(m).v_star
    assert np.max(np.abs(sys.h @ v - sys.r_eff)) <= 1e-8
    plain, jac = plain_split(sys), jacobi_split(sys)
    for s in (plain, jac):
        assert np.max(np.abs(s.b - s.c - sys.h)) <= 1e-12
        assert verify_regular_splitting(s).is_regular
    # Jacobi C has zero diagonal and the same off-diagonal entries as the plain C
    assert np.all(np.diag(jac.c) == 0)
    assert np.all(jac.c <= plain.c + 1e-12)
    off = ~np.eye(n, dtype=bool)
    assert jac.c[off] == pytest.approx(plain.c[off], abs=1e-15)
    assert iteration_rate(jac, 1.0) <= iteration_rate(plain, 1.0) + 1e-10


def test_jacobi_split_example(two_state):
    s = jacobi_split(build_system(two_state))
    assert np.diag(s.b) == pytest.approx([0.19, 0.28])
    assert s.c == pytest.approx(np.array([[0.0, 0.09], [0.18, 0.0]]), abs=1e-15)


def test_diagonal_h_gives_zero_c():
    m = Mdp(np.eye(3), [1.0, 2.0, 3.0], 0.9)
    s = jacobi_split(build_system(m))
    assert np.all(s.c == 0)
    rep = theorem1_check(m)
    assert rep.rho_jacobi == 0.0 and rep.holds


def test_plain_split_forms(two_state):
    m = random_mdp(4, 6, 3, 0.9)
    assert plain_split(build_system(m)).c == pytest.approx(0.9 * m.p, abs=1e-15)
    p2 = m.p @ m.p
    assert plain_split(build_system(m, Variant("nstep", n=2))).c == pytest.approx(0.81 * p2, abs=1e-14)
    assert plain_split(build_system(m, Variant("lambda", lam=0.7))).c.min() >= -1e-12


def test_irregular_splitting_detected():
    h = np.eye(2)
    b = np.array([[1.0, 2.0], [0.0, 1.0]])
    rep = verify_regular_splitting(Splitting(b, b - h, "custom", h))
    assert not rep.is_regular and rep.min_binv_entry == pytest.approx(-2.0)


def test_rates_two_state(two_state):
    sys = build_system(two_state)
    assert iteration_rate(plain_split(sys), 1.0) == pytest.approx(0.9, abs=1e-12)
    rj = iteration_rate(jacobi_split(sys), 1.0)
    assert rj == pytest.approx(np.sqrt(0.09 / 0.19 * 0.18 / 0.28), rel=1e-10)
    assert rj == pytest.approx(0.5519, abs=1e-4)
    assert iteration_rate(jacobi_split(sys), 0.0) == 1.0
    rep = theorem1_check(two_state)
    assert (round(rep.rho_jacobi, 4), round(rep.rho_plain, 4), rep.holds) == (0.5518, 0.9, True)


@given(st.integers(2, 10), st.integers(0, 2**31), st.sampled_from(VARIANTS))
def test_fast_path_matches_general(n, seed, variant):
    sys = build_system(random_mdp(seed, n, n, 0.9), variant)
    for s in (plain_split(sys), jacobi_split(sys)):
        assert iteration_rate(s, 1.0) == pytest.approx(iteration_rate(s, 1.0, fast_path=False), abs=1e-8)


def test_optimal_alpha_examples():
    o = optimal_alpha(np.array([0.1, 1.9]))
    assert (o.alpha_star, o.rho_star) == pytest.approx((1.0, 0.9))
    o = optimal_alpha(np.full(4, 2.5))
    assert (o.alpha_star, o.rho_star) == pytest.approx((0.4, 0.0))
    with pytest.raises(NonPositiveSpectrum):
        optimal_alpha(np.array([1.0, -0.5]))
    with pytest.raises(NonPositiveSpectrum):
        optimal_alpha(np.array([1.0 + 1j, 1.0 - 1j]))


def test_optimal_alpha_against_grid(two_state_sym):
    h = build_system(symmetric_mdp(3, 6)).h
    vals = np.linalg.eigvalsh(h)
    step = 1e-4
    grid = np.arange(0.0, 2.0 / vals.max() + step, step)
    rhos = np.max(np.abs(1.0 - grid[:, None] * vals[None, :]), axis=1)
    a = optimal_alpha(vals).alpha_star
    assert abs(grid[np.argmin(rhos)] - a) <= step
    assert spectral_radius_general(np.eye(6) - a * h) <= rhos.min() + 1e-8


def test_theorem2_examples(two_state_sym, two_state):
    rep = theorem2_check(two_state_sym)
    assert rep.kappa_plain == pytest.approx(8.2) and rep.kappa_jacobi == pytest.approx(8.2) and rep.holds
    diag = theorem2_check(Mdp(np.eye(3), [0, 0, 0], 0.5))
    assert diag.kappa_jacobi == pytest.approx(1.0)
    with pytest.raises(NotSymmetric):
        theorem2_check(two_state)


def test_jacobi_scaled_spectrum_matches_direct():
    m = symmetric_mdp(8, 7, 0.99)
    sys = build_system(m)
    direct = np.sort(eigenvalues_general(jacobi_split(sys).apply_b_inverse(sys.h)).real)
    rep = theorem2_check(m)
    assert direct[-1] / direct[0] == pytest.approx(rep.kappa_jacobi, rel=1e-9)


def test_analyze_symmetric_and_not(two_state, two_state_sym):
    a = analyze(two_state_sym)
    assert a.is_symmetric and a.kappa_plain == pytest.approx(8.2)
    assert a.alpha_star_plain == pytest.approx(2 / (0.1 + 0.82))
    b = analyze(two_state)
    assert not b.is_symmetric and b.kappa_plain is None
    assert b.rho_jacobi < b.rho_plain < 1
