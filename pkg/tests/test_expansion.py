import math

import numpy as np
import pytest

from besovnet.errors import ContractError, ParameterError, StructureError
from besovnet.expansion import (BesovParams, CoeffMap, LambdaIndex, SampledField, analyze, besov_seminorm,
                                coarse_projection, coeffs_from_csv, coeffs_to_csv, coeffs_to_frame,
                                evaluate_expansion, inv, level_energy, load_field, lp_error,
                                lp_error_monte_carlo, modulus_of_smoothness, modulus_seminorm, n_term_select,
                                renormalize, save_field, synthesize)


def bump(X, center=0.5, radius=0.3):
    r = np.linalg.norm(X - center, axis=1) / radius
    return np.maximum(0.0, 1.0 - r ** 2) ** 3


def single(d, j, e, k, J=7, j0=2, wavelet=(2, 2), value=1.0):
    return CoeffMap(d, 2.0, {LambdaIndex(j, e, k): value}, j0, J, {}, (0.0, 1.0), wavelet)


# --- types ---

def test_inv():
    assert inv(2.0) == 0.5
    assert inv(math.inf) == 0.0


def test_lambda_index_validation():
    with pytest.raises(StructureError):
        LambdaIndex(3, (0, 0), (1, 1))
    with pytest.raises(StructureError):
        LambdaIndex(3, (1,), (1, 1))
    assert LambdaIndex(2, (1,), (5,)) < LambdaIndex(3, (1,), (0,))


def test_coeff_map_validation():
    with pytest.raises(ContractError):
        CoeffMap(1, 2.0, {LambdaIndex(9, (1,), (0,)): 1.0}, 2, 7)
    with pytest.raises(ContractError):
        CoeffMap(1, 2.0, {LambdaIndex(3, (1,), (0,)): math.nan}, 2, 7)


def test_sampled_field_validation():
    with pytest.raises(StructureError):
        SampledField(1, (0.0, 1.0), 12, np.zeros(12))
    with pytest.raises(StructureError):
        SampledField(2, (0.0, 1.0), 8, np.zeros(8))
    f = SampledField.sample(lambda X: X[:, 0], 1, (0.0, 2.0), 3)
    assert f.J == 3 and f.spacing == 0.25
    np.testing.assert_array_equal(f.values, f.axis())


def test_besov_params():
    params = BesovParams.critical(1.5, 2.0, 1)
    assert params.tau == pytest.approx(0.5)
    assert params.q == params.tau
    assert params.inv_tau_bar == 0.0
    assert BesovParams(1.0, 2.0, 2.0, 4.0, 1).inv_tau_bar == pytest.approx(0.5)
    assert BesovParams.critical(2.0, math.inf, 2).alpha_star == pytest.approx(2.0)


@pytest.mark.parametrize('args', [
    (0.1, 0.5, 0.5, 2.0, 1),      # alpha/d below 1/tau − 1/p
    (1.0, 2.0, 2.0, 1.0, 1),      # tau > p
    (1.0, 1.0, 2.0, 2.0, 1),      # q > tau
    (-1.0, 1.0, 1.0, 2.0, 1),
])
def test_besov_params_inadmissible(args):
    with pytest.raises(ContractError):
        BesovParams(*args)


# --- analysis / synthesis ---

@pytest.mark.parametrize('wavelet', [(2, 2), (3, 3)])
def test_round_trip_1d(wavelet):
    from besovnet.wavelets1d import cdf_system
    sys = cdf_system(*wavelet)
    f = SampledField.sample(bump, 1, (0.0, 1.0), 9)
    c = analyze(f, sys, 2)
    back = synthesize(c, sys)
    np.testing.assert_allclose(back.values, f.values, atol=1e-12)


def test_round_trip_2d(cdf33):
    f = SampledField.sample(bump, 2, (0.0, 1.0), 6)
    c = analyze(f, cdf33, 2)
    assert {lam.e for lam in c.entries} == {(0, 1), (1, 0), (1, 1)}
    np.testing.assert_allclose(synthesize(c, cdf33).values, f.values, atol=1e-12)


def test_scaling_function_recovered(cdf22):
    c = CoeffMap(1, 2.0, {}, 2, 7, {(1,): 1.0}, (0.0, 1.0), (2, 2))
    f = evaluate_expansion(c, cdf22)
    back = analyze(f, cdf22, 2)
    assert back.coarse_entries[(1,)] == pytest.approx(1.0, abs=1e-12)
    assert all(abs(v) <= 1e-10 for k, v in back.coarse_entries.items() if k != (1,))
    assert all(abs(v) <= 1e-10 for v in back.entries.values())


def test_wavelet_recovered(cdf22):
    lam = LambdaIndex(3, (1,), (3,))
    f = evaluate_expansion(single(1, 3, (1,), (3,)), cdf22)
    back = analyze(f, cdf22, 2)
    assert back.entries[lam] == pytest.approx(1.0, abs=1e-12)
    assert all(abs(v) <= 1e-10 for other, v in back.entries.items() if other != lam)
    assert all(abs(v) <= 1e-10 for v in back.coarse_entries.values())


def test_evaluate_expansion_point_values(cdf33):
    x = np.arange(2 ** 8) / 2 ** 8
    coarse = CoeffMap(1, 2.0, {}, 2, 7, {(1,): 1.0}, (0.0, 1.0), (3, 3))
    np.testing.assert_allclose(evaluate_expansion(coarse, cdf33, 2 ** 8).values,
                               2.0 * cdf33.phi_pp(4 * x - 1), atol=1e-12)
    detail = single(1, 4, (1,), (7,), wavelet=(3, 3))
    np.testing.assert_allclose(evaluate_expansion(detail, cdf33, 2 ** 8).values,
                               4.0 * cdf33.psi_pp(16 * x - 7), atol=1e-12)


def test_evaluate_expansion_tensor_product(cdf33):
    c = single(2, 3, (1, 0), (3, 2), J=6, wavelet=(3, 3))
    f = evaluate_expansion(c, cdf33)
    axis = np.arange(2 ** 6) / 2 ** 6
    expected = np.outer(2 ** 1.5 * cdf33.psi_pp(8 * axis - 3), 2 ** 1.5 * cdf33.phi_pp(8 * axis - 2))
    np.testing.assert_allclose(f.values, expected, atol=1e-12)


def test_synthesize_empty_and_bad_resolution(cdf22):
    empty = CoeffMap(1, 2.0, {}, 2, 6, {}, (0.0, 1.0), (2, 2))
    assert np.all(synthesize(empty, cdf22).values == 0.0)
    with pytest.raises(ContractError):
        synthesize(empty, cdf22, resolution=32)


def test_analyze_rejects_boundary_mass(cdf22):
    f = SampledField.sample(lambda X: np.ones(len(X)), 1, (0.0, 1.0), 6)
    with pytest.raises(ContractError):
        analyze(f, cdf22, 2)
    g = SampledField.sample(bump, 1, (0.0, 1.0), 6)
    with pytest.raises(ParameterError):
        analyze(g, cdf22, 7)


def test_analyze_tolerance_drops_small(cdf33):
    f = SampledField.sample(bump, 1, (0.0, 1.0), 9)
    full = analyze(f, cdf33, 2)
    pruned = analyze(f, cdf33, 2, tol=1e-6)
    assert len(pruned) < len(full)
    assert all(abs(v) > 1e-6 for v in pruned.entries.values())


# --- normalization and seminorms ---

def test_renormalize():
    c = single(1, 3, (1,), (2,), value=1.0)
    same = renormalize(c, 2.0)
    assert same.entries == c.entries
    to_one = renormalize(c, 1.0)
    assert to_one.entries[LambdaIndex(3, (1,), (2,))] == pytest.approx(2.0 ** -1.5)
    back = renormalize(renormalize(c, 0.7), 2.0)
    assert back.entries[LambdaIndex(3, (1,), (2,))] == pytest.approx(1.0, rel=1e-14)
    to_inf = renormalize(c, math.inf)
    assert to_inf.entries[LambdaIndex(3, (1,), (2,))] == pytest.approx(2.0 ** 1.5)


def test_besov_seminorm_closed_form():
    entries = {LambdaIndex(2, (1,), (0,)): 0.25, LambdaIndex(2, (1,), (1,)): -0.25,
               LambdaIndex(3, (1,), (0,)): 0.125}
    c = CoeffMap(1, 1.0, entries, 2, 6)
    params = BesovParams(1.0, 1.0, 1.0, 2.0, 1)
    assert level_energy(c) == {2: 0.5, 3: 0.125}
    assert besov_seminorm(c, params) == pytest.approx(3.0)
    assert besov_seminorm(c.copy_with(entries={}), params) == 0.0
    assert besov_seminorm(c, BesovParams(1.0, 1.0, 0.5, 2.0, 1)) == pytest.approx((2 ** 0.5 + 1) ** 2)


def test_coarse_projection(cdf22):
    f = SampledField.sample(bump, 1, (0.0, 1.0), 7)
    c = analyze(f, cdf22, 2)
    proj = coarse_projection(c)
    assert len(proj) == 0 and proj.coarse_entries == c.coarse_entries


def test_modulus_of_linear_function():
    f = SampledField.sample(lambda X: X[:, 0], 1, (0.0, 1.0), 6)
    assert modulus_of_smoothness(f, 2, 0.5, 2.0) == pytest.approx(0.0, abs=1e-12)
    assert modulus_of_smoothness(f, 1, 0.25, math.inf) == pytest.approx(0.25)
    with pytest.raises(ContractError):
        modulus_of_smoothness(f, 64, 0.5, 2.0)


def test_modulus_seminorm():
    const = SampledField.sample(lambda X: np.full(len(X), 3.0), 2, (0.0, 1.0), 4)
    assert modulus_seminorm(const, 1.5, 2.0, 2.0) == pytest.approx(0.0, abs=1e-12)
    f = SampledField.sample(bump, 1, (0.0, 1.0), 8)
    value = modulus_seminorm(f, 1.5, 0.5, 0.5)
    assert math.isfinite(value) and value > 0


# --- selection and errors ---

def test_n_term_select():
    values = [3.0, -1.0, 0.5, 0.1]
    entries = {LambdaIndex(3, (1,), (k,)): v for k, v in enumerate(values)}
    c = CoeffMap(1, 2.0, entries, 2, 6, {(0,): 9.0})
    kept = n_term_select(c, 2)
    assert sorted(kept.entries.values()) == [-1.0, 3.0]
    assert kept.coarse_entries == {(0,): 9.0}
    assert n_term_select(c, 10).entries == c.entries
    with pytest.raises(ParameterError):
        n_term_select(c, 0)


def test_n_term_select_ranks_in_target_norm():
    # equal L² coefficients on different levels: the finer one is larger in L^∞ normalization
    fine, coarse = LambdaIndex(5, (1,), (0,)), LambdaIndex(2, (1,), (0,))
    c = CoeffMap(1, 2.0, {fine: 1.0, coarse: 1.0}, 2, 6)
    assert set(n_term_select(c, 1, p=math.inf).entries) == {fine}
    assert set(n_term_select(c, 1, p=1.0).entries) == {coarse}


def test_lp_error():
    f = SampledField.sample(lambda X: np.zeros(len(X)), 1, (0.0, 1.0), 8)
    g = SampledField(1, (0.0, 1.0), 256, np.full(256, -0.5))
    assert lp_error(f, f, 2.0) == 0.0
    for p in (1.0, 2.0, 3.5, math.inf):
        assert lp_error(f, g, p) == pytest.approx(0.5)
    with pytest.raises(StructureError):
        lp_error(f, SampledField.zeros_like(SampledField.sample(lambda X: X[:, 0], 1, (0.0, 1.0), 7)), 2.0)


def test_lp_error_hat_closed_form():
    hat = SampledField.sample(lambda X: np.maximum(0.0, 1.0 - np.abs(X[:, 0] - 0.5) / 0.25), 1, (0.0, 1.0), 12)
    zero = SampledField.zeros_like(hat)
    assert lp_error(hat, zero, 2.0) == pytest.approx((2.0 / 3.0) ** 0.5 * 0.25 ** 0.5, rel=1e-5)


def test_lp_error_monte_carlo():
    err = lp_error_monte_carlo(lambda X: X[:, 0] + 2.0, lambda X: X[:, 0], (0.0, 1.0), 3, 2.0, samples=1000)
    assert err == pytest.approx(2.0)


# --- files ---

def test_field_file_round_trip(tmp_path):
    f = SampledField.sample(bump, 2, (-1.0, 2.0), 4)
    path = save_field(f, tmp_path / 'field.bin')
    assert (tmp_path / 'field.bin.json').exists()
    assert path.stat().st_size == 16 * 16 * 8
    back = load_field(path)
    assert (back.d, back.box, back.resolution) == (2, (-1.0, 2.0), 16)
    np.testing.assert_array_equal(back.values, f.values)


def test_field_file_size_mismatch(tmp_path):
    f = SampledField.sample(bump, 1, (0.0, 1.0), 4)
    path = save_field(f, tmp_path / 'field.bin')
    path.write_bytes(path.read_bytes() + b'\0' * 8)
    with pytest.raises(StructureError):
        load_field(path)


def test_coefficient_csv_round_trip(tmp_path, cdf33):
    f = SampledField.sample(bump, 2, (0.0, 1.0), 6)
    c = analyze(f, cdf33, 2, tol=1e-14)
    path = coeffs_to_csv(c, tmp_path / 'coeffs.csv')
    back = coeffs_from_csv(path)
    assert (back.d, back.p, back.j0, back.J, back.wavelet) == (2, 2.0, 2, 6, (3, 3))
    assert back.entries == c.entries
    assert back.coarse_entries == c.coarse_entries
    frame = coeffs_to_frame(c)
    assert list(frame.columns) == ['e', 'j', 'k0', 'k1', 'value']
    assert len(frame) == len(c) + len(c.coarse_entries)
