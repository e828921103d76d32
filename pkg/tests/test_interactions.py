import math

import numpy as np
import pytest

from wave4d.fields import FormulaField
from wave4d.fitting import fit_loglog
from wave4d.interactions import (GAssembly, MultiSolitonConfig, assemble_G,
                                 cutoff_bump, decompose_G, g_part_norms,
                                 interaction_integral, interaction_rate_table,
                                 pairwise_q_norm, sigma_rate,
                                 slow_pairing_lawcheck, slow_pairing_series,
                                 two_soliton_config)
from wave4d.quadrature import QuadratureSpec
from wave4d.states import symmetry_generator

SPEC = QuadratureSpec(scheme="fixed", nodes=8, r_max=40.0)


@pytest.fixture(scope="module")
def surrogate_cfg(Qs):
    slow = symmetry_generator(Qs, "conformal_4")
    kernels = [symmetry_generator(Qs, g)
               for g in ("scaling", "translation_1")]
    return two_soliton_config(Qs, slow, kernels,
                              a=(0.01, -0.02), b=((0.01, 0.0), (0.0, 0.02)))


@pytest.fixture(scope="module")
def ground_cfg(W):
    return two_soliton_config(W, symmetry_generator(W, "scaling"),
                              [symmetry_generator(W, "translation_1")])


def test_config_validation(W):
    slow = symmetry_generator(W, "scaling")
    with pytest.raises(ValueError):
        two_soliton_config(W, slow, [], speeds=(0.5, -0.5))
    with pytest.raises(ValueError):
        two_soliton_config(W, slow, [], speeds=(-0.5, 1.5))
    with pytest.raises(ValueError):
        two_soliton_config(W, slow, [], a=(0.5, 0.5))


def test_cutoff_bump_shape():
    s = np.linspace(0.0, 3.0, 301)
    v = cutoff_bump(s)
    assert np.all(v[s <= 1.0] == 1.0)
    assert np.all(v[s >= 2.0] == 0.0)
    assert np.all(np.diff(v) <= 1e-12)
    assert np.all((0.0 <= v) & (v <= 1.0))


def test_single_soliton_no_corrections_gives_zero(W, rng):
    cfg = MultiSolitonConfig(profiles=[W], speeds=[0.2], signs=[1],
                             a=np.zeros(1), b=np.zeros((1, 0)),
                             slow=[symmetry_generator(W, "scaling")],
                             kernels=[[]])
    G = assemble_G(cfg, 10.0)
    pts = rng.normal(scale=3.0, size=(50, 4))
    assert np.max(np.abs(G.evaluate(pts))) < 1e-14


def test_zero_corrections_reduce_to_pure_interaction(ground_cfg, rng):
    terms = decompose_G(ground_cfg, 10.0)
    pts = rng.normal(scale=4.0, size=(60, 4))
    pts[:, 0] += rng.choice([-5.0, 5.0], size=60)
    total = terms.total.evaluate(pts)
    g1 = terms.g1.evaluate(pts)
    assert np.allclose(total, g1, rtol=1e-12, atol=1e-16)


def test_reconstruction_identity(surrogate_cfg, rng):
    terms = decompose_G(surrogate_cfg, 12.0)
    pts = rng.normal(scale=4.0, size=(80, 4))
    pts[:, 0] += 6.0
    assert terms.reconstruction_gap(pts) < 1e-12


def test_decomposition_displays(Qs, rng):
    slow = symmetry_generator(Qs, "conformal_4")
    kern = [symmetry_generator(Qs, "scaling")]
    pts = rng.normal(scale=3.0, size=(40, 4))
    # b = 0: the cubic correction term is U^3
    cfg_b0 = two_soliton_config(Qs, slow, kern, a=(0.02, -0.01),
                                b=((0.0,), (0.0,)))
    asm = GAssembly(cfg_b0, 11.0)
    parts = asm.parts(pts)
    U = sum(cfg_b0.a[n] * asm.Psi[n].evaluate(pts) for n in range(2))
    assert np.allclose(parts["G3"][1], U**3, rtol=1e-12, atol=1e-18)
    # a = 0: the same-soliton quadratic term uses only the kernel fields
    cfg_a0 = two_soliton_config(Qs, slow, kern, b=((0.02,), (-0.01,)))
    asm0 = GAssembly(cfg_a0, 11.0)
    parts0 = asm0.parts(pts)
    for n in range(2):
        w = cfg_a0.b[n, 0] * asm0.Phi[n][0].evaluate(pts)
        qn = asm0.Q[n].evaluate(pts)
        assert np.allclose(parts0["G2"][n], 3.0 * qn * w * w, rtol=1e-12,
                           atol=1e-18)


def test_interaction_rate_laws():
    times = [10.0, 20.0, 40.0, 80.0, 160.0]
    rows = interaction_rate_table(
        [(1.0, 3.0), (0.5, 2.5), (1.5, 3.0),
         (1.5, 1.5), (1.2, 1.8), (1.8, 1.9),
         (1.0, 2.0), (0.5, 2.0), (1.5, 2.0)],
        times, spec=QuadratureSpec(scheme="fixed", nodes=10))
    for r in rows:
        if r["law"] == "power":
            assert abs(r["fit"].slope - r["expected"]) <= 0.3, r
        else:
            assert r["fit"].slope > 1.0, r  # markedly positive log growth


def test_interaction_integral_validation_and_symmetry():
    kernel = FormulaField(lambda X: (1.0 + np.sum(X * X, axis=1)) ** -1.0,
                          symmetry="radial", decay=2.0)
    with pytest.raises(ValueError):
        interaction_integral(kernel, kernel, 1.0, 0.5, (-0.5, 0.5), 10.0)
    with pytest.raises(ValueError):
        interaction_integral(kernel, kernel, 2.0, 2.0, (0.5, 0.5), 10.0)
    a = interaction_integral(kernel, kernel, 1.5, 1.5, (-0.4, 0.4), 12.0,
                             SPEC)
    b = interaction_integral(kernel, kernel, 1.5, 1.5, (0.4, -0.4), 12.0,
                             SPEC)
    assert a == pytest.approx(b, rel=1e-9)


def test_g1_law_surrogate_and_ground(surrogate_cfg, ground_cfg):
    times = [10.0, 20.0, 40.0, 80.0]
    surr = [g_part_norms(surrogate_cfg, t, SPEC) for t in times]
    fit_s = fit_loglog(times, [r["g1"] for r in surr])
    assert -4.5 <= fit_s.slope <= -3.5
    # every fitted interaction norm is nonincreasing on the grid
    assert all(surr[i]["g1"] >= surr[i + 1]["g1"] for i in range(3))

    grd = [g_part_norms(ground_cfg, t, SPEC) for t in times]
    fit_g = fit_loglog(times, [r["g1"] for r in grd])
    assert -2.5 <= fit_g.slope <= -1.5


def test_g2_and_g3_bounds(surrogate_cfg):
    times = [10.0, 20.0, 40.0]
    rows = [g_part_norms(surrogate_cfg, t, SPEC) for t in times]
    a2b2 = (np.linalg.norm(surrogate_cfg.a) ** 2
            + np.linalg.norm(surrogate_cfg.b) ** 2)
    ratios = [r["g2"] / a2b2 for r in rows]
    # the same-soliton quadratic norm is time-invariant
    assert max(ratios) == pytest.approx(min(ratios), rel=1e-6)
    a2b3 = (np.linalg.norm(surrogate_cfg.a) ** 2
            + np.linalg.norm(surrogate_cfg.b) ** 3)
    consts = [r["g3"] / (a2b3 + t**-4) for r, t in zip(rows, times)]
    assert max(consts) < 10.0 * min(consts) + 1.0


def test_g2_vanishes_without_corrections(ground_cfg):
    r = g_part_norms(ground_cfg, 10.0, SPEC)
    assert r["g2"] == pytest.approx(0.0, abs=1e-14)


def test_pairwise_q_norm(surrogate_cfg, W):
    cfg1 = MultiSolitonConfig(profiles=[W], speeds=[0.1], signs=[1],
                              a=np.zeros(1), b=np.zeros((1, 0)),
                              slow=[symmetry_generator(W, "scaling")],
                              kernels=[[]])
    assert pairwise_q_norm(cfg1, 10.0) == 0.0

    times = [10.0, 20.0, 40.0, 80.0]
    totals = [pairwise_q_norm(surrogate_cfg, t, SPEC) for t in times]
    assert abs(fit_loglog(times, totals).slope + 4.0) < 0.5

    # inner/outer split: outer (near the partner) carries the t^-8 law of
    # the squared integral and dominates the inner part for t >= 20
    inner, outer = [], []
    for t in times:
        tot, details = pairwise_q_norm(surrogate_cfg, t, SPEC, split=True)
        inner.append(sum(d["inner"] for d in details))
        outer.append(sum(d["outer"] for d in details))
        unsplit = pairwise_q_norm(surrogate_cfg, t, SPEC)
        assert tot == pytest.approx(unsplit, rel=1e-9)
    assert abs(fit_loglog(times, inner).slope + 8.0) < 0.8
    for t, i, o in zip(times, inner, outer):
        if t >= 20.0:
            assert o <= i


def test_slow_pairing_log_law(Qs):
    psi = symmetry_generator(Qs, "conformal_4")
    times = [20.0, 40.0, 80.0, 160.0, 320.0]
    for ell in (0.0, 0.6):
        fit = slow_pairing_lawcheck(psi, ell, times, sigma=0.1,
                                    spec=QuadratureSpec(scheme="fixed",
                                                        nodes=10))
        expected = sigma_rate(ell)
        assert abs(fit.slope - expected) / expected < 0.05
        assert fit.r_squared > 0.999


def test_slow_pairing_cross_term_bounded(Qs):
    psi = symmetry_generator(Qs, "conformal_4")
    times = [10.0, 20.0, 40.0, 80.0, 160.0]
    vals = slow_pairing_series(psi, -0.5, 0.1, times, other=psi,
                               other_ell=0.5,
                               spec=QuadratureSpec(scheme="fixed", nodes=10))
    assert max(abs(v) for v in vals) < 1.0
    # growth across a decade stays within an O(1) band
    assert abs(vals[-1] - vals[0]) < 0.2


def test_sigma_rate_values():
    assert sigma_rate(0.0) == pytest.approx(2 * math.pi**2)
    assert sigma_rate(0.6) == pytest.approx(2 * math.pi**2 * 0.8)
