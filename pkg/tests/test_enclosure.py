import json
import math

import numpy as np
import pytest

from specenc import birman, enclosure, quadrature
from specenc.core import PotentialSpec


def test_exponents():
    assert enclosure.exponents(2.0, 3) == (1.0, 0.0)
    assert enclosure.exponents(1.5, 2) == (1.0, 0.25)
    beta, e = enclosure.exponents(2.5, 3)
    assert beta == 1.5 and e == pytest.approx(1 / 6)
    assert enclosure.exponents(3 - 1e-9, 3)[1] == pytest.approx(0.25, abs=1e-8)


@pytest.mark.parametrize("alpha,d,ok", [(1.5, 2, True), (1.99, 2, True), (2.0, 2, False),
                                         (1.4, 2, False), (2.0, 3, True), (3.0, 3, False),
                                         (1.9, 3, False), (0.5, 1, False)])
def test_admissible(alpha, d, ok):
    assert enclosure.admissible_alpha(alpha, d) is ok


def test_1d_report_uses_sharp_constant():
    V = PotentialSpec.square_well(1, -2.0, 0.5)
    eigs = birman.square_well_oracle_1d(-2.0, 0.5)
    rep = enclosure.enclosure_report(V, eigenvalues=eigs)
    assert rep.C == 0.5 and rep.mode == "dim1"
    assert rep.ks_value == pytest.approx(2.0)
    assert rep.passed
    assert rep.checks[0]["lhs"] == pytest.approx(abs(eigs[0]) ** 0.5)


def test_1d_bound_over_random_wells():
    rng = np.random.default_rng(11)
    for _ in range(25):
        depth = -rng.uniform(0.5, 6.0) * complex(1.0, rng.uniform(-0.6, 0.6))
        a = rng.uniform(0.2, 1.5)
        V = PotentialSpec.square_well(1, depth, a)
        rep = enclosure.enclosure_report(V, eigenvalues=birman.square_well_oracle_1d(depth, a))
        assert rep.passed


def test_delta_limit_ratio_tends_to_one():
    ratios = []
    for eps in (0.2, 0.1, 0.05):
        (z,) = birman.square_well_oracle_1d(-2 / eps, eps / 2)
        V = PotentialSpec.square_well(1, -2 / eps, eps / 2)
        rep = enclosure.enclosure_report(V, eigenvalues=[z])
        ratios.append(rep.checks[0]["lhs"] / rep.checks[0]["rhs"])
    assert ratios[0] < ratios[1] < ratios[2] <= 1
    assert ratios[2] >= 0.9


def test_alpha_range_enforced():
    with pytest.raises(ValueError):
        enclosure.enclosure_report(PotentialSpec.gaussian(3, 1.0, 0.5), alpha=1.5)


def test_e_zero_criterion_and_typo_flag():
    V = PotentialSpec.gaussian(3, 0.2, 0.5)
    rep = enclosure.enclosure_report(V, level=4)
    assert rep.alpha == 2.0 and rep.exponent == 0 and rep.radius is None
    assert rep.criterion == pytest.approx(rep.ks_value)
    assert any("KS_2" in f for f in rep.flags)
    # a weak potential cannot carry an eigenvalue: supplying one is contradictory
    bad = enclosure.enclosure_report(V, eigenvalues=[-1.0], level=4)
    assert rep.criterion < 1 and "contradiction" in bad.flags and not bad.passed


def test_e_positive_radius():
    V = PotentialSpec.gaussian(3, -1.0, 0.5)
    rep = enclosure.enclosure_report(V, alpha=2.5, C=2.0, level=4)
    assert rep.radius == pytest.approx((2.0 * rep.ks_value) ** (1 / rep.exponent))
    js = rep.to_json()
    assert js["C"] == 2.0 and json.dumps(js)


def test_criterion_scale_invariance():
    g = PotentialSpec.gaussian(3, 1.0, 0.5)
    base = enclosure.enclosure_report(g, level=4).criterion
    for t in (2.0, 0.5):
        moved = enclosure.enclosure_report(g.dilate(t).scale(t * t), level=4).criterion
        assert moved == pytest.approx(base, rel=0.02)


def test_empirical_constant_ledger_monotone(tmp_path):
    ledger = tmp_path / "empirical_C.json"
    strong = PotentialSpec.square_well(1, -8.0, 0.5)
    weak = PotentialSpec.square_well(1, -1.0, 0.2)
    first = enclosure.empirical_constant(
        [(strong, birman.square_well_oracle_1d(-8.0, 0.5))], ledger=ledger)
    second = enclosure.empirical_constant(
        [(weak, birman.square_well_oracle_1d(-1.0, 0.2))], ledger=ledger)
    assert second >= first
    entries = json.loads(ledger.read_text())
    assert len(entries) == 1
    assert set(entries[0]) == {"alpha", "d", "value", "corpus_hash", "timestamp"}
    assert entries[0]["value"] == second


def test_empirical_constant_respects_sharp_bound():
    corpus = []
    for depth, a in [(-2.0, 0.5), (-5.0 + 1j, 0.3), (-20.0, 0.05)]:
        corpus.append((PotentialSpec.square_well(1, depth, a),
                       birman.square_well_oracle_1d(depth, a)))
    assert enclosure.empirical_constant(corpus) <= 0.5


def test_empirical_constant_sampled_corpus(tmp_path):
    W = enclosure.random_corpus(1, 3, seed=1, cells=8)[0]
    val = enclosure.empirical_constant([(W, [])], ledger=tmp_path / "l.json")
    assert val == 0.0


def test_frank_parameters():
    delta, alpha, beta = enclosure.frank_parameters(0.25, 1.6, 3)
    assert delta == pytest.approx(12 / 7)
    assert beta == pytest.approx(1.4)
    assert alpha == pytest.approx(2.4)
    assert beta == pytest.approx((2 * alpha - 3 + 1) / 2)
    with pytest.raises(ValueError):
        enclosure.frank_parameters(0.25, 1.2, 3)
    with pytest.raises(ValueError):
        enclosure.frank_parameters(0.6, 1.6, 3)


def test_frank_chain_counterexample_constant():
    # a uniform cube filling one dyadic cube: lhs / rhs = S^{1/beta}
    delta, alpha, beta = enclosure.frank_parameters(0.25, 1.75, 3)
    S = quadrature.power_pair_integral(alpha, (1.0, 1.0, 1.0))
    V = PotentialSpec.square_well(3, 1.0, 0.5, center=(0.5, 0.5, 0.5))
    chain = enclosure.frank_chain_check(V, 0.25, 1.75, level=4)
    assert chain.ratio == pytest.approx(S ** (1 / beta), rel=1e-3)
    assert chain.ratio > 1.2


def test_inverse_square_linear_in_strength():
    c1 = enclosure.inverse_square_criterion(1.0, 0.25, 4.0, m=4)
    c3 = enclosure.inverse_square_criterion(3.0, 0.25, 4.0, m=4)
    assert abs(c3 / (3 * c1) - 1) < 1e-12
    assert enclosure.inverse_square_criterion(0.0, 0.25, 4.0) == 0.0


def test_inverse_square_graded_matches_grid():
    graded = enclosure.inverse_square_criterion(1.0, 0.25, 2.0, m=6)
    grid = enclosure.inverse_square_criterion(1.0, 0.25, 2.0, method="grid", h=1 / 32)
    assert graded == pytest.approx(grid, rel=0.02)


def test_inverse_square_cutoff_plateau():
    c = [enclosure.inverse_square_criterion(1.0, 2.0**-k, 2.0**k, m=4) for k in (3, 4, 5)]
    assert c[0] < c[1] < c[2]
    assert abs(c[2] / c[1] - 1) < 0.03
    # geometric convergence: each doubling of the cutoff range shrinks the change
    assert abs(c[2] - c[1]) < 0.5 * abs(c[1] - c[0])


def test_inverse_square_validation():
    with pytest.raises(ValueError):
        enclosure.inverse_square_criterion(1.0, 2.0, 1.0)
    with pytest.raises(ValueError):
        enclosure.inverse_square_criterion(-1.0, 0.1, 1.0)
    with pytest.raises(ValueError):
        enclosure.inverse_square_criterion(1.0, 0.1, 1.0, alpha=2.5)


def test_random_corpus_nonnegative_and_reproducible():
    a = enclosure.random_corpus(3, 3, seed=2, cells=8)
    b = enclosure.random_corpus(3, 3, seed=2, cells=8)
    for x, y in zip(a, b):
        assert np.array_equal(x.samples, y.samples)
        assert np.all(x.samples.real >= 0) and not x.samples.imag.any()


def test_ledger_rejects_foreign_json(tmp_path):
    path = tmp_path / "ledger.json"
    path.write_text('{"potential": "w.json"}')
    V = PotentialSpec.square_well(1, -4.0, 1.0)
    with pytest.raises(ValueError, match="not an empirical-constant ledger"):
        enclosure.empirical_constant([(V, [-1.0])], None, path)
