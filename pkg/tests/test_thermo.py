import math

import numpy as np
import pytest

from hypflow.automaton import Automaton
from hypflow.errors import MissingBlockWeight, NoBracketing, SupremumOnBoundary
from hypflow.replin import Representation, freeproduct_rep, octagon_rep, rotation
from hypflow.spectral import growth_rate, maximal_components, parry_chain, scc_decompose
from hypflow.thermo import (
    EDGES,
    LABELS,
    EdgePotential,
    PressureCurve,
    convergence_table,
    entropy,
    equilibrium_markov,
    extended_length_potential,
    gibbs_ratios,
    label_words,
    legendre_rate,
    manhattan_rep,
    manhattan_root,
    manhattan_theta,
    mean_potential,
    pressure,
    pressure_curve,
    rep_potential,
    variational_gap,
)


@pytest.fixture(scope="module")
def zc(z4z6_aut):
    return maximal_components(z4z6_aut)[0]


@pytest.fixture(scope="module")
def oc(octagon_aut):
    return maximal_components(octagon_aut)[0]


def random_edge_potential(c, seed, k=1):
    rng = np.random.default_rng(seed)
    if k == 1:
        return EdgePotential(1, EDGES, np.arange(c.size)[:, None], rng.normal(size=c.size))
    words = label_words(c, k)
    return EdgePotential(k, LABELS, words, rng.normal(size=len(words)))


def test_zero_and_constant_potentials(zc, oc, z4z6_aut, octagon_aut):
    for c, a in ((zc, z4z6_aut), (oc, octagon_aut)):
        v = growth_rate(a)
        assert pressure(c, EdgePotential.constant(0.0)) == pytest.approx(v, abs=1e-10)
        assert pressure(c, EdgePotential.constant(0.37)) == pytest.approx(v + 0.37, abs=1e-10)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_pressure_shift_property(zc, k):
    psi = random_edge_potential(zc, 5, k)
    assert pressure(zc, psi.shifted(0.8)) == pytest.approx(pressure(zc, psi) + 0.8, abs=1e-9)


def test_pressure_against_dense_eigenvalue(zc):
    # k = 1 edge potential: transfer matrix A(e, f) e^{psi(f)} on the component's edges
    psi = random_edge_potential(zc, 1)
    A = zc.adjacency.astype(float) * np.exp(psi.values)[None, :]
    ref = math.log(np.max(np.abs(np.linalg.eigvals(A))))
    assert pressure(zc, psi) == pytest.approx(ref, abs=1e-9)


@pytest.mark.parametrize("k", [1, 2, 4])
def test_variational_principle(zc, k):
    psi = random_edge_potential(zc, 11 + k, k)
    assert variational_gap(zc, psi)["gap"] <= 1e-8


def test_variational_principle_rep_potential(zc):
    assert variational_gap(zc, rep_potential(freeproduct_rep(3.0), zc, 3))["gap"] <= 1e-8


def test_equilibrium_of_zero_is_parry(oc):
    eq = equilibrium_markov(oc, EdgePotential.constant(0.0))
    parry = parry_chain(oc)
    assert np.allclose(eq.dense(), parry.dense(), atol=1e-10)
    assert np.allclose(eq.stationary, parry.stationary, atol=1e-10)


def test_entropy_trivial_chains():
    cycle = Automaton(4, 0, ((0, 1, 0), (1, 2, 0), (2, 3, 0), (3, 1, 0)), ("a",))
    (c,) = scc_decompose(cycle)
    assert entropy(parry_chain(c)) == pytest.approx(0.0, abs=1e-14)
    k = 3
    full = Automaton(2, 0, tuple((0, 1, i) for i in range(k)) + tuple((1, 1, i) for i in range(k)),
                     ("a", "b"))
    (c,) = scc_decompose(full)
    assert entropy(parry_chain(c)) == pytest.approx(math.log(k), abs=1e-12)


def test_parry_entropy_octagon(oc):
    assert abs(entropy(parry_chain(oc)) - 1.94303) <= 1e-4


def rep_edge_potential(c, u=1.0):
    rho = freeproduct_rep(u)
    vals = [-math.log(np.linalg.norm(rho.matrices[a], 2)) for a in c.labels]
    return EdgePotential(1, EDGES, np.arange(c.size)[:, None], np.array(vals))


def test_gibbs_bounds(zc):
    g = gibbs_ratios(zc, rep_edge_potential(zc), 6)
    assert g["c1"] > 0 and g["spread"] <= 1e3
    assert g["cylinders"] > 1000
    # the constants do not drift with the cylinder length
    assert gibbs_ratios(zc, rep_edge_potential(zc), 9)["spread"] == pytest.approx(g["spread"], rel=1e-9)
    assert gibbs_ratios(zc, EdgePotential.constant(0.0), 6)["spread"] <= 1e3


def test_cylinder_shift_invariance(zc):
    psi = random_edge_potential(zc, 9)
    chain = equilibrium_markov(zc, psi)
    P, pi = chain.dense(), chain.stationary
    rng = np.random.default_rng(0)
    for _ in range(50):
        path = [int(rng.choice(np.flatnonzero(pi > 0)))]
        for _ in range(3):
            path.append(int(rng.choice(np.flatnonzero(P[path[-1]] > 0))))

        def mass(p):
            m = pi[p[0]]
            for x, y in zip(p, p[1:]):
                m *= P[x, y]
            return m

        extended = sum(mass([e] + path) for e in range(len(pi)) if P[e, path[0]] > 0)
        assert extended == pytest.approx(mass(path), abs=1e-12)


def test_mean_potential_constant(zc):
    chain = equilibrium_markov(zc, EdgePotential.constant(0.25, LABELS))
    assert mean_potential(chain) == pytest.approx(0.25, abs=1e-12)


def test_missing_block_weight(zc):
    psi = EdgePotential(1, EDGES, np.array([[0]]), np.array([1.0]))
    with pytest.raises(MissingBlockWeight):
        pressure(zc, psi)


def test_manhattan_theta_word_metric_line(oc, octagon_aut):
    v = growth_rate(octagon_aut)
    one = EdgePotential.constant(1.0, LABELS)
    for s in np.linspace(-2, 2, 9):
        assert manhattan_theta(oc, one, s) == pytest.approx(v - s, abs=1e-10)


def test_manhattan_enlarged_generators_tangent_bound(zc, z4z6_aut, z4z6):
    psi_star = extended_length_potential(zc, z4z6, [(0, 2)], 4)
    curve = pressure_curve(lambda s: manhattan_theta(zc, psi_star, s), np.linspace(-2, 2, 21), 4)
    assert curve.is_convex() and curve.is_decreasing()
    tau = -curve.derivative_at_zero
    assert 0 < tau < 1
    assert curve.theta[np.argmin(np.abs(curve.s))] == pytest.approx(growth_rate(z4z6_aut), abs=1e-9)
    assert manhattan_theta(zc, psi_star, 1.0) >= growth_rate(z4z6_aut) - tau - 1e-9


def test_extended_length_on_octagon_keys_by_element(oc, octagon):
    psi = extended_length_potential(oc, octagon, [(0, 2)], 3)
    assert set(np.unique(psi.values)) <= {0.0, 1.0}


def test_rep_potential_single_letter(zc):
    rho = freeproduct_rep(1.2)
    psi = rep_potential(rho, zc, 1)
    for (a,), v in zip(psi.blocks, psi.values):
        assert v == pytest.approx(math.log(np.linalg.norm(rho.matrices[a], 2)), abs=1e-12)


def test_rep_potential_orthogonal_is_zero(zc):
    rho = Representation.from_generators([rotation(math.pi / 2), rotation(math.pi / 3)])
    assert np.allclose(rep_potential(rho, zc, 4).values, 0.0, atol=1e-12)


def test_rep_potential_is_the_norm_increment(oc):
    rho = octagon_rep()
    psi = rep_potential(rho, oc, 3)
    rng = np.random.default_rng(2)
    for i in rng.choice(len(psi.blocks), 50, replace=False):
        w = [int(x) for x in psi.blocks[i]]
        full = np.linalg.norm(np.linalg.multi_dot([rho.matrices[a] for a in w]), 2)
        tail = np.linalg.norm(rho.matrices[w[1]] @ rho.matrices[w[2]], 2)
        assert psi.values[i] == pytest.approx(math.log(full / tail), abs=1e-12)


def test_rep_potential_birkhoff_sums_approach_the_norm(oc):
    # the increments do not telescope exactly; the per-letter defect shrinks with k
    rho = octagon_rep()
    chain = parry_chain(oc)
    rng = np.random.default_rng(4)
    walk = [int(rng.choice(oc.size, p=chain.stationary))]
    for _ in range(400):
        row = chain.transition.getrow(walk[-1])
        walk.append(int(rng.choice(row.indices, p=row.data)))
    w = [int(x) for x in oc.labels[walk]]
    from hypflow.replin import evaluate

    target = evaluate(rho, w).log_norm()
    defects = []
    for k in (1, 2, 3, 4):
        psi = rep_potential(rho, oc, k)
        lut = {tuple(b): v for b, v in zip(psi.blocks.tolist(), psi.values)}
        birk = sum(lut[tuple(w[i:i + k])] for i in range(len(w) - k + 1))
        birk += evaluate(rho, w[len(w) - k + 1:]).log_norm()
        defects.append(abs(birk - target) / len(w))
    assert all(b < a for a, b in zip(defects, defects[1:]))


def test_manhattan_rep_same_representation(oc):
    rho = octagon_rep()
    theta0 = manhattan_rep(rho, rho, oc, 0.0, 2)
    for s in (-0.5, 0.5, 1.0):
        assert manhattan_rep(rho, rho, oc, s, 2) == pytest.approx(theta0 - s, abs=1e-8)


def test_manhattan_rep_kernel_pair_has_no_bracket(zc):
    # both potentials vanish along the cycle s1^2 s2^3, so the pressure never turns negative
    with pytest.raises(NoBracketing):
        manhattan_root(zc, rep_potential(freeproduct_rep(2.0), zc, 3),
                       rep_potential(freeproduct_rep(1.0), zc, 3), 0.0)


def test_octagon_rep_growth_converges(oc):
    rho = octagon_rep()
    vals = {k: manhattan_rep(rho, rho, oc, 0.0, k) for k in (2, 3, 4, 5)}
    rows = convergence_table(vals)
    diffs = [r["diff"] for r in rows[1:]]
    assert all(b < a for a, b in zip(diffs, diffs[1:]))
    assert abs(vals[5] - 2.0) <= 0.01


def test_legendre_affine():
    s = np.linspace(-3, 3, 61)
    curve = PressureCurve([(x, 1.5 - 1.1 * x) for x in s], None, -1.1)
    rate = legendre_rate(curve, np.linspace(0.5, 1.7, 13), on_boundary="clip")
    vals = dict(rate.grid)
    assert min(abs(v) for v in vals.values()) <= 1e-8
    assert rate.zero_location == pytest.approx(1.1)
    assert vals[min(vals, key=lambda t: abs(t - 1.7))] >= 0.6 * 3 - 1e-9
    with pytest.raises(SupremumOnBoundary):
        legendre_rate(curve, [1.7])


def test_legendre_smooth_curve(zc, z4z6):
    psi_star = extended_length_potential(zc, z4z6, [(0, 2)], 4)
    curve = pressure_curve(lambda s: manhattan_theta(zc, psi_star, s), np.linspace(-3, 3, 61), 4)
    tau = -curve.derivative_at_zero
    t_grid = np.linspace(tau - 0.1, tau + 0.1, 21)
    rate = legendre_rate(curve, t_grid)
    vals = np.array([v for _, v in rate.grid])
    assert np.all(vals >= -1e-9)
    assert abs(rate.zero_location - tau) <= t_grid[1] - t_grid[0]
    assert np.all(np.diff(vals, 2) >= -1e-9)


def test_legendre_grid_errors():
    curve = PressureCurve([(0.0, 1.0), (1.0, 0.0)], None, -1.0)
    with pytest.raises(ValueError):
        legendre_rate(curve, [0.5])


def test_curve_csv():
    curve = PressureCurve([(0.0, 1.0), (0.5, 0.25)], 2, -1.0)
    assert curve.to_csv() == "s,theta\n0,1\n0.5,0.25\n"
