import math
from fractions import Fraction

import numpy as np
import pytest

from bbs.tba import (
    TwoTemperatureGGE,
    carrier_vertex_matrices,
    densities_from_y,
    evaluate_series,
    free_energy_from_y,
    fugacity_weights,
    gge_transfer_matrix,
    largest_eigenvalue,
    log_q1_series,
    q_power_series,
    rho_series,
    solve_y_system,
    y_system_residual,
)


# ---------------------------------------------------------------------------
# Y-system solver


def test_solver_satisfies_relations():
    rng = np.random.default_rng(0)
    for _ in range(10):
        s = int(rng.integers(1, 12))
        betas = rng.uniform(0, 2, s)
        ly = solve_y_system(betas)
        assert y_system_residual(betas, ly) < 1e-10


def test_solver_single_amplitude():
    # s=1: Y^2 = e^b (1 + Y)
    b = 0.7
    ly = solve_y_system([b])
    Y = math.exp(ly[0])
    assert Y**2 == pytest.approx(math.exp(b) * (1 + Y), rel=1e-10)


def test_solver_matches_two_temperature_closed_form():
    gge = TwoTemperatureGGE(0.25, 0.6)
    s = 40
    ly = solve_y_system(gge.truncated_betas(s), tol=1e-14)
    for i in range(1, s + 1):
        assert ly[i - 1] == pytest.approx(gge.log_y(i), abs=1e-10)


def test_densities_from_y_match_closed_form():
    gge = TwoTemperatureGGE(0.3, 0.5)
    s = 60
    ly = np.array([gge.log_y(i) for i in range(1, s + 1)])
    rho = densities_from_y(ly)
    for i in (1, 2, 5, 10):
        assert rho[i - 1] == pytest.approx(gge.soliton_density(i), rel=1e-10)


def test_free_energy_from_y_matches_closed_form():
    gge = TwoTemperatureGGE(0.2, 0.45)
    s = 80
    ly = np.array([gge.log_y(i) for i in range(1, s + 1)])
    assert free_energy_from_y(ly) == pytest.approx(gge.free_energy, rel=1e-10)


# ---------------------------------------------------------------------------
# two-temperature state


def test_beta_round_trip():
    gge = TwoTemperatureGGE(0.3, 0.7)
    back = TwoTemperatureGGE.from_betas(gge.beta1, gge.beta_inf)
    assert back.a == pytest.approx(0.3, rel=1e-12)
    assert back.z == pytest.approx(0.7, rel=1e-12)


def test_from_density_is_iid_point():
    gge = TwoTemperatureGGE.from_density(0.3)
    assert gge.a == gge.z
    assert gge.beta1 == pytest.approx(0.0, abs=1e-12)
    assert gge.ball_density == pytest.approx(0.3, rel=1e-12)


def test_parameter_validation():
    with pytest.raises(ValueError):
        TwoTemperatureGGE(0.8, 0.3)  # a > z means beta1 < 0
    with pytest.raises(ValueError):
        TwoTemperatureGGE.from_density(0.5)


def test_q_function_satisfies_q_system():
    gge = TwoTemperatureGGE(0.2, 0.5)
    for i in range(0, 8):
        assert gge.q_function(i) ** 2 == pytest.approx(
            gge.q_function(i - 1) * gge.q_function(i + 1) + 1, rel=1e-12
        )
    assert math.exp(gge.beta1 / 2) == pytest.approx(gge.q_function(0), rel=1e-12)


def test_density_identities():
    gge = TwoTemperatureGGE(0.35, 0.55)
    # epsilon_i = sum_k min(i,k) rho_k, sigma_i = 1 - 2 epsilon_i
    for i in (1, 2, 4):
        eps = sum(min(i, k) * gge.soliton_density(k) for k in range(1, 400))
        assert gge.energy_density(i) == pytest.approx(eps, rel=1e-12)
        assert gge.hole_density(i) == pytest.approx(
            1 - 2 * gge.energy_density(i), rel=1e-12
        )
        # Y_i = sigma_i / rho_i
        assert gge.log_y(i) == pytest.approx(
            math.log(gge.hole_density(i) / gge.soliton_density(i)), rel=1e-12
        )
    assert gge.energy_density(math.inf) == pytest.approx(
        sum(k * gge.soliton_density(k) for k in range(1, 400)), rel=1e-12
    )


def test_residual_of_closed_form_at_large_amplitude():
    gge = TwoTemperatureGGE(0.25, 0.6)
    s = 100
    betas = gge.truncated_betas(s)
    ly = np.array([gge.log_y(i) for i in range(1, s + 1)])
    assert y_system_residual(betas, ly) < 1e-12


def test_carrier_load_distribution():
    gge = TwoTemperatureGGE(0.3, 0.5)
    for l in (1, 2, 5, 12):
        P = gge.carrier_load_distribution(l)
        assert P.shape == (l + 1,)
        assert np.all(P >= 0)
        assert P.sum() == pytest.approx(1.0, rel=1e-12)


def test_mean_carrier_load_equals_current():
    from bbs.spectral import current_two_temperature

    gge = TwoTemperatureGGE(0.3, 0.5)
    for l in (1, 3, 8):
        P = gge.carrier_load_distribution(l)
        mean = float(np.arange(l + 1) @ P)
        assert mean == pytest.approx(current_two_temperature(0.3, 0.5, l), rel=1e-12)


# ---------------------------------------------------------------------------
# power series


def c(series, *m):
    return series.get(tuple(m), Fraction(0))


def test_q1_series_low_order():
    s1 = q_power_series((1,), 2, 6)
    for m, val in [((1, 0), 1), ((2, 0), -1), ((0, 1), 1), ((1, 1), -3),
                   ((2, 1), 10), ((0, 2), -3), ((1, 2), 20), ((2, 2), -105)]:
        assert c(s1, *m) == val
    assert c(s1, 0, 0) == 1


def test_q2_series_low_order():
    s2 = q_power_series((0, 1), 2, 6)
    for m, val in [((1, 0), 1), ((2, 0), -1), ((0, 1), 2), ((1, 1), -4),
                   ((2, 1), 12), ((0, 2), -5), ((1, 2), 28), ((2, 2), -135)]:
        assert c(s2, *m) == val


def test_rho_series_low_order():
    r1 = rho_series(1, 2, 6)
    for m, val in [((1, 0), 1), ((2, 0), -3), ((1, 1), -4), ((2, 1), 30),
                   ((1, 2), 27), ((2, 2), -308)]:
        assert c(r1, *m) == val
    r2 = rho_series(2, 2, 6)
    for m, val in [((0, 1), 1), ((1, 1), -4), ((2, 1), 15), ((0, 2), -7),
                   ((1, 2), 54), ((2, 2), -308)]:
        assert c(r2, *m) == val


def test_log_q1_is_minus_free_energy():
    gge = TwoTemperatureGGE(0.05, 0.3)
    s, degree = 8, 14
    w = fugacity_weights(gge.truncated_betas(s))
    val = evaluate_series(log_q1_series(s, degree), w)
    ly = np.array([gge.log_y(i) for i in range(1, s + 1)])
    assert val == pytest.approx(-free_energy_from_y(ly), abs=1e-8)
    assert val == pytest.approx(-gge.free_energy, abs=1e-5)


def test_rho_series_matches_closed_form():
    gge = TwoTemperatureGGE(0.05, 0.25)
    s, degree = 8, 10
    w = fugacity_weights(gge.truncated_betas(s))
    for i in (1, 2):
        val = evaluate_series(rho_series(i, s, degree), w)
        assert val == pytest.approx(gge.soliton_density(i), abs=1e-6)


def test_evaluate_series_rejects_divergent_points():
    s1 = q_power_series((1,), 2, 8)
    with pytest.raises(ValueError):
        evaluate_series(s1, [0.9, 0.9])


def test_three_fugacity_series_value():
    # GGE(beta_1, beta_2, beta_inf) at (z1, z2, zinf) = (0.4, 0.3, 0.2):
    # Q_1 evaluates to 1.02511...
    z1, z2, zinf = 0.4, 0.3, 0.2
    s, degree = 6, 8
    betas = [-math.log(z1), -math.log(z2)] + [0.0] * (s - 3) + [-math.log(zinf)]
    w = fugacity_weights(betas)
    val = evaluate_series(q_power_series((1,), s, degree), w)
    assert val == pytest.approx(1.02511, abs=1e-4)


# ---------------------------------------------------------------------------
# transfer matrix


def test_carrier_vertex_matrices_capacity_one():
    V0, V1 = carrier_vertex_matrices(1, 0.9)
    assert np.allclose(V0, [[1, 0], [1, 0]])
    assert np.allclose(V1, [[0, math.exp(-0.9)], [0, 1]])


def test_transfer_matrix_eigenvalue_two_temperature():
    gge = TwoTemperatureGGE(0.3, 0.6)
    V = gge_transfer_matrix([gge.beta1], gge.beta_inf)
    lam = largest_eigenvalue(V)
    assert lam == pytest.approx((1 - 0.3 * 0.6) / (1 - 0.3), rel=1e-12)
    assert math.log(lam) == pytest.approx(-gge.free_energy, rel=1e-12)


def test_transfer_matrix_matches_series_three_fugacities():
    z1, z2, zinf = 0.4, 0.3, 0.2
    V = gge_transfer_matrix([-math.log(z1), -math.log(z2)], -math.log(zinf))
    assert V.shape == (6, 6)
    lam = largest_eigenvalue(V)
    assert lam == pytest.approx(1.02511, abs=1e-4)


def test_transfer_matrix_free_temperatures_count_states():
    # all betas zero: V^L sums over all configurations, eigenvalue 2
    V = gge_transfer_matrix([0.0], 0.0)
    assert largest_eigenvalue(V) == pytest.approx(2.0, rel=1e-12)
