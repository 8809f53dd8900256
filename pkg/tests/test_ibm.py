from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellfront.errors import OrderViolation, StepTooLarge
from cellfront.ibm import (
    DUPLICATE_OFFSET,
    CellChain,
    chain_densities,
    chain_density_arrays,
    chain_energy,
    chain_rhs,
    division_rates,
    ibm_run,
    ibm_step,
    initial_chain,
    max_stable_dtau,
    proliferation_reindex,
    reindex_shifts,
    stiffness_bound,
)
from cellfront.mechanics import ForceLaw, GrowthLaw, JkrForce, JkrParams
from cellfront.odeint import IntegratorSettings

F_09 = 9.89674260187773e-10  # exact JKR force at 0.9 d_eq, N
INTEG = IntegratorSettings(rtol=1e-8, atol=1e-11)


def chain(gaps, m, law, growth=None, lawB=None, phase=None):
    r = np.concatenate([[0.0], np.cumsum(gaps)])
    return CellChain(
        positions=r, m=m, s0=0.0, law_A=law, law_B=lawB or law, growth=growth or GrowthLaw.none(), phase=phase
    )


# -- velocities ----------------------------------------------------------------------


def test_uniform_chain_is_at_rest(law, deq):
    c = chain(np.full(9, deq), 5, law)
    # cumulative sums put some gaps an ulp below d_eq
    np.testing.assert_allclose(chain_rhs(c), 0.0, atol=1e-20)


def test_three_cell_golden_vector(law, deq):
    # last gap compressed to 0.9 d_eq; it is the B-type interface gap
    c = chain([deq, 0.9 * deq], 2, law)
    v = chain_rhs(c)
    f = F_09 / law.eta
    np.testing.assert_allclose(v, [0.0, -f, f], rtol=1e-12)


def test_interface_cell_uses_both_laws(jkr, deq):
    la, lb = ForceLaw(jkr, 5e-3), ForceLaw(jkr, 1e-2)
    c = chain([0.9 * deq, 0.9 * deq, 0.9 * deq], 2, la, lawB=lb)
    v = chain_rhs(c)
    F = jkr.force(0.9 * deq)
    np.testing.assert_allclose(v, [0.0, F / la.eta - F / lb.eta, 0.0, F / lb.eta], rtol=1e-13, atol=1e-20)


def test_pinned_cell_never_moves(law, deq):
    c = chain(np.full(6, 0.8 * deq), 3, law)
    assert chain_rhs(c)[0] == 0.0
    c2 = ibm_step(c, 50.0, INTEG)
    assert c2.positions[0] == 0.0


def test_chain_validation(law, deq):
    with pytest.raises(ValueError):
        chain([deq], 2, law)
    with pytest.raises(ValueError):
        CellChain(positions=np.array([1.0, 2.0]), m=1, s0=0.0, law_A=law, law_B=law, growth=GrowthLaw.none())


# -- densities -------------------------------------------------------------------------


def test_density_samples(law, deq):
    c = chain([0.8 * deq], 1, law)
    (s,) = chain_densities(c)
    assert s.rho == pytest.approx(1 / (0.8 * deq), rel=1e-15) and s.x == 0.0 and s.pop == "A"
    c = chain(np.full(5, deq), 3, law)
    x, rho, pop = chain_density_arrays(c)
    np.testing.assert_allclose(rho, law.rho_eq, rtol=1e-14)
    assert list(pop) == ["A", "A", "A", "B", "B"]


def test_density_three_cell_pair(law, deq):
    c = chain([0.75 * deq, 0.9 * deq], 2, law)
    s = chain_densities(c)
    assert [p.pop for p in s] == ["A", "A"]
    assert s[0].rho == pytest.approx(4 / 3 / deq, rel=1e-14)
    assert s[1].rho == pytest.approx(1 / 0.9 / deq, rel=1e-14)
    assert s[1].x == pytest.approx(0.75 * deq, rel=1e-15)


# -- reindexing ----------------------------------------------------------------------


def test_reindex_without_growth_is_identity(law, growth, deq):
    # every gap at or below 1/rho_M: no growth anywhere
    c = chain(np.full(8, 0.75 * deq), 5, law, growth)
    np.testing.assert_array_equal(division_rates(c), 0.0)
    np.testing.assert_array_equal(reindex_shifts(c, 10.0), 0)
    c2 = proliferation_reindex(c, 10.0)
    np.testing.assert_array_equal(c2.positions, c.positions)
    assert c2.m == c.m


def test_reindex_ceiling_arithmetic(law, growth, deq):
    # constant g dtau = 0.3 per gap: (Delta i)_5 = ceil(4 * 0.3) = 2
    c = chain(np.full(9, deq), 8, law, growth)
    dtau = 0.3 / growth.alpha
    shifts = reindex_shifts(c, dtau)
    assert shifts[4] == 2
    np.testing.assert_array_equal(shifts[1:7], [1, 1, 1, 2, 2, 2])
    with pytest.raises(StepTooLarge):
        proliferation_reindex(c, dtau)


def test_reindex_single_division_trace(law, growth, deq):
    # five cells, m = 4: only cell 3 grows, with g dtau = 1
    gaps = [0.75 * deq, deq, 0.8 * deq, 0.9 * deq]
    c = chain(gaps, 4, law, growth)
    r = c.positions
    dtau = 1.0 / growth.alpha
    np.testing.assert_array_equal(reindex_shifts(c, dtau), [0, 0, 1, 0, 0])
    c2 = proliferation_reindex(c, dtau)
    expected = [r[0], r[1], r[1] + DUPLICATE_OFFSET * deq, r[2], r[3], r[4]]
    np.testing.assert_array_equal(c2.positions, expected)
    assert c2.m == 5 and c2.n_B == 1


def test_clock_division_inserts_daughter(law, growth, deq):
    # the rate of cell j follows the gap on its left: only cell 3 grows
    gaps = [0.75 * deq, deq, 0.75 * deq, 0.9 * deq]
    ph = np.array([0.0, 0.0, 0.95, 0.0, 0.0])
    c = chain(gaps, 4, law, growth, phase=ph)
    c2 = proliferation_reindex(c, 0.2)  # its phase advances by 0.1
    r = c.positions
    np.testing.assert_array_equal(c2.positions, [r[0], r[1], r[2], r[2] + DUPLICATE_OFFSET * deq, r[3], r[4]])
    np.testing.assert_allclose(c2.phase, [0.0, 0.0, 0.05, 0.05, 0.0, 0.0], atol=1e-15)
    assert c2.m == 5
    # no division: only the clocks move
    c3 = proliferation_reindex(c, 0.01)
    np.testing.assert_array_equal(c3.positions, r)
    assert c3.phase[2] == pytest.approx(0.955)


def test_clock_double_division_rejected(law, growth, deq):
    c = chain([deq, deq, 0.75 * deq], 3, law, growth, phase=np.array([0.0, 0.9, 0.0, 0.0]))
    with pytest.raises(StepTooLarge):
        proliferation_reindex(c, 2.5)


def test_duplicate_overrunning_neighbour_is_rejected(law, growth, deq):
    gaps = [deq, 1e-8 * deq, 0.75 * deq]
    c = chain(gaps, 3, law, growth, phase=np.array([0.0, 0.99, 0.0, 0.0]))
    with pytest.raises(OrderViolation):
        proliferation_reindex(c, 1.0)


def test_max_stable_dtau(law, growth, deq):
    c = chain(np.full(5, deq), 5, law, growth, phase=np.zeros(6))
    assert max_stable_dtau(c) == pytest.approx(0.9 / growth.alpha)
    c = chain(np.full(5, deq), 5, law, growth)
    assert max_stable_dtau(c) == pytest.approx(0.9 / (3 * growth.alpha))
    c = chain(np.full(5, 0.75 * deq), 5, law, growth)
    assert max_stable_dtau(c) == np.inf


def test_reindex_rejects_nonpositive_step(law, deq):
    with pytest.raises(ValueError):
        proliferation_reindex(chain([deq, deq], 2, law), 0.0)
    with pytest.raises(ValueError):
        ibm_step(chain([deq, deq], 2, law), -1.0)


# -- dynamics ----------------------------------------------------------------------------


def test_equilibrium_step_is_identity(law, deq):
    c = chain(np.full(7, deq), 4, law)
    c2 = ibm_step(c, 100.0, INTEG)
    # explicit steps far beyond the stability limit leave noise below atol
    np.testing.assert_allclose(c2.positions, c.positions, rtol=0, atol=INTEG.atol * deq)


def test_two_cells_relax_monotonically(law, deq):
    c = chain([0.8 * deq], 1, law)
    prev = c.positions[1]
    for _ in range(10):
        c = ibm_step(c, 200.0, INTEG)
        assert c.positions[1] >= prev
        # an overshoot is only allowed at the integrator tolerance
        assert c.positions[1] < deq * (1 + INTEG.rtol)
        prev = c.positions[1]
    assert deq - prev < 0.05 * deq


def test_energy_nonincreasing_without_growth(law, deq, rng):
    c = chain(deq * rng.uniform(0.8, 1.1, 30), 15, law)
    E = [chain_energy(c)]
    for _ in range(20):
        c = ibm_step(c, 20.0, INTEG)
        E.append(chain_energy(c))
    assert np.all(np.diff(E) <= 1e-12 * E[0])
    assert E[-1] < E[0]


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(min_value=0.8, max_value=1.2), min_size=3, max_size=20), st.integers(min_value=1, max_value=19))
def test_step_preserves_order_and_anchor(gaps, m):
    j = JkrForce(JkrParams.reference())
    lw = ForceLaw(j, 5e-3)
    m = min(m, len(gaps))
    c = chain(np.array(gaps) * j.d_eq, m, lw)
    c2 = ibm_step(c, 30.0, INTEG)
    assert c2.positions[0] == 0.0
    assert np.all(np.diff(c2.positions) > 0)
    assert chain_energy(c2) <= chain_energy(c) + 1e-30
    assert c2.n == c.n and c2.m == c.m


def test_split_step_size_irrelevant_without_growth(law, deq, rng):
    c = chain(deq * rng.uniform(0.8, 1.0, 12), 6, law)
    a = ibm_run(c, 400.0, [400.0], INTEG, dtau_max=400.0).snapshots[-1]
    b = ibm_run(c, 400.0, [400.0], INTEG, dtau_max=13.0).snapshots[-1]
    np.testing.assert_allclose(a.positions, b.positions, rtol=0, atol=1e-7 * deq)


def test_run_with_growth_keeps_B_and_order(law, growth, deq):
    rq = law.rho_eq
    c = initial_chain(12, 8, law, law, growth, 1.25 * rq, 1.25 * rq)
    counts = []
    tr = ibm_run(
        c, 600.0, [0.0, 200.0, 400.0, 600.0], INTEG, dtau_max=20.0, callback=lambda t, cc: counts.append(cc.n_B)
    )
    assert tr.times == [0.0, 200.0, 400.0, 600.0]
    assert set(counts) == {8}
    last = tr.snapshots[-1]
    assert last.m > 12 and last.positions[0] == 0.0
    assert np.all(np.diff(last.positions) > 0)
    bt, s1, s2 = tr.boundaries()
    assert bt[0] == 0.0 and bt[-1] == 600.0 and np.all(np.diff(bt) > 0)
    assert np.all(np.diff(s2) >= -1e-12 * deq)


def test_initial_chain_layout(law, growth, deq):
    rq = law.rho_eq
    c = initial_chain(4, 3, law, law, growth, 4 / 3 * rq, 1.2 * rq, s0=1e-3)
    np.testing.assert_allclose(np.diff(c.positions), [0.75 * deq] * 3 + [deq / 1.2] * 3, rtol=1e-13)
    assert c.positions[0] == 1e-3 and c.m == 4 and c.n_B == 3
    assert c.phase is not None and np.all(c.phase[3:] == 0.0)
    with pytest.raises(ValueError):
        initial_chain(1, 3, law, law, growth, rq, rq)


def test_stiffness_bound_covers_the_spectrum(jkr, deq, rng):
    # oracle: eigenvalues of a finite-difference Jacobian of the velocities
    la, lb = ForceLaw(jkr, 5e-3), ForceLaw(jkr, 1e-2)
    c = chain(deq * rng.uniform(0.75, 0.99, 15), 8, la, lawB=lb)
    r0 = c.positions
    J = np.empty((c.n, c.n))
    h = 1e-7 * deq
    for k in range(c.n):
        e = np.zeros(c.n)
        e[k] = h
        J[:, k] = (chain_rhs(chain(np.diff(r0 + e), 8, la, lawB=lb)) - chain_rhs(chain(np.diff(r0 - e), 8, la, lawB=lb))) / (2 * h)
    # the pinned first centre is not an unknown
    rho = np.max(np.abs(np.linalg.eigvals(J[1:, 1:])))
    lam = stiffness_bound(c)
    assert rho <= lam <= 2.5 * rho


def test_long_splitting_steps_keep_a_resting_chain_exact(law, deq):
    c = initial_chain(100, 100, law, law, GrowthLaw.none(4 / 3 * law.rho_eq), law.rho_eq, law.rho_eq)
    tr = ibm_run(c, 2000.0, [2000.0], IntegratorSettings(rtol=1e-8, atol=1e-12), dtau_max=100.0)
    np.testing.assert_array_equal(tr.snapshots[-1].positions, c.positions)
