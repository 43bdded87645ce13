import json
import math

import numpy as np
import numpy.testing as npt
import pytest

from relightkit.lights import (DeltaL, LightParams, apply_delta, delta_from_edit,
                               delta_illumination, project_token, sh_project,
                               temperature_to_rgb, yaw_pitch_to_direction)


def sh_reference(d):
    """Independent real-SH evaluation (no Condon-Shortley), written from the
    closed-form polynomials; the implementation under test uses shared
    constants, this one spells each factor out."""
    x, y, z = d
    pi = math.pi
    return np.array([
        0.5 * math.sqrt(1.0 / pi),
        math.sqrt(3.0 / (4.0 * pi)) * y,
        math.sqrt(3.0 / (4.0 * pi)) * z,
        math.sqrt(3.0 / (4.0 * pi)) * x,
        0.5 * math.sqrt(15.0 / pi) * x * y,
        0.5 * math.sqrt(15.0 / pi) * y * z,
        0.25 * math.sqrt(5.0 / pi) * (3.0 * z * z - 1.0),
        0.5 * math.sqrt(15.0 / pi) * x * z,
        0.25 * math.sqrt(15.0 / pi) * (x * x - y * y),
    ])


AXES = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]


class TestDirections:
    def test_axis_cases(self):
        npt.assert_allclose(yaw_pitch_to_direction(0.0, math.pi / 2), [1, 0, 0],
                            atol=1e-12)
        npt.assert_allclose(yaw_pitch_to_direction(math.pi / 2, math.pi / 2),
                            [0, 1, 0], atol=1e-12)

    def test_forty_five_degrees(self):
        d = yaw_pitch_to_direction(0.0, math.pi / 4)
        npt.assert_allclose(d, [math.sqrt(2) / 2, 0.0, math.sqrt(2) / 2], atol=1e-12)

    def test_unit_norm(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            d = yaw_pitch_to_direction(rng.uniform(-10, 10),
                                       rng.uniform(1e-6, math.pi - 1e-6))
            assert abs(d @ d - 1.0) < 1e-9

    @pytest.mark.parametrize("phi", [0.0, math.pi, -0.2, 3.5])
    def test_pitch_boundary_rejected(self, phi):
        with pytest.raises(ValueError, match=str(phi)):
            yaw_pitch_to_direction(1.0, phi)


class TestShProjection:
    def test_axis_goldens(self):
        # frozen from sh_reference at the +z and +x axes
        npt.assert_allclose(
            sh_project(np.array([0.0, 0.0, 1.0])),
            [0.28209479177387814, 0, 0.4886025119029199, 0, 0, 0,
             0.6307831305050401, 0, 0], atol=1e-9)
        npt.assert_allclose(
            sh_project(np.array([1.0, 0.0, 0.0])),
            [0.28209479177387814, 0, 0, 0.4886025119029199, 0, 0,
             -0.31539156525252005, 0, 0.5462742152960396], atol=1e-9)

    @pytest.mark.parametrize("axis", AXES)
    def test_matches_reference_on_axes(self, axis):
        d = np.array(axis, dtype=float)
        npt.assert_allclose(sh_project(d), sh_reference(d), atol=1e-12)

    def test_matches_reference_random(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            d = rng.normal(size=3)
            d /= np.linalg.norm(d)
            npt.assert_allclose(sh_project(d), sh_reference(d), atol=1e-12)

    def test_dc_term_constant(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            d = rng.normal(size=3)
            d /= np.linalg.norm(d)
            assert abs(sh_project(d)[0] - 0.28209479177387814) < 1e-15

    def test_l1_band_norm(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            d = rng.normal(size=3)
            d /= np.linalg.norm(d)
            c = sh_project(d)
            assert abs(c[1] ** 2 + c[2] ** 2 + c[3] ** 2 - 0.4886025119029199 ** 2) < 1e-9

    def test_non_unit_rejected(self):
        with pytest.raises(ValueError, match="unit"):
            sh_project(np.array([1.0, 1.0, 0.0]))


class TestDeltaIllumination:
    def test_identity_is_exact_zero(self):
        for light in [LightParams.directional(0.3, 1.1, 900, 4400),
                      LightParams.point_at((1.0, 2.0, 3.0), 50, 9000)]:
            d = delta_illumination(light, light)
            assert d.is_zero()
            assert np.all(d.vector() == 0.0)

    def test_antisymmetry(self):
        rng = np.random.default_rng(13)
        for _ in range(25):
            a = LightParams.directional(rng.uniform(-3, 3), rng.uniform(0.2, 2.9),
                                        rng.uniform(10, 5000), rng.uniform(1500, 11000))
            b = LightParams.directional(rng.uniform(-3, 3), rng.uniform(0.2, 2.9),
                                        rng.uniform(10, 5000), rng.uniform(1500, 11000))
            npt.assert_allclose(delta_illumination(a, b).vector(),
                                -delta_illumination(b, a).vector(), atol=1e-12)

    def test_yaw_ninety_only_direction_changes(self):
        ls = LightParams.directional(0.4, 1.0, 1000, 5000)
        lt = LightParams.directional(0.4 + math.pi / 2, 1.0, 1000, 5000)
        d = delta_illumination(ls, lt)
        assert d.delta_log_e == 0.0 and d.delta_tau == 0.0
        assert np.linalg.norm(d.delta_sh) > 0.1

    def test_energy_doubling(self):
        ls = LightParams.directional(0.4, 1.0, 700, 5000)
        lt = LightParams.directional(0.4, 1.0, 1400, 5000)
        d = delta_illumination(ls, lt)
        assert abs(d.delta_log_e - math.log(2)) < 1e-12
        assert np.all(d.delta_sh == 0.0)

    def test_sh_norm_monotone_in_yaw_offset(self):
        pitch = math.radians(60.0)
        base = sh_project(yaw_pitch_to_direction(0.0, pitch))

        def nrm(deg):
            return np.linalg.norm(
                sh_project(yaw_pitch_to_direction(math.radians(deg), pitch)) - base)

        for d in (1.0, 2.0, 4.0):
            assert nrm(d) <= nrm(2 * d)


class TestApplyDelta:
    def test_zero_delta_identity(self):
        ls = LightParams.directional(0.2, 0.8, 1234, 6000)
        lt = apply_delta(ls, DeltaL.zero())
        assert lt == ls

    def test_energy_and_temperature_edits(self):
        ls = LightParams.directional(0.2, 0.8, 500, 4500)
        lt = apply_delta(ls, DeltaL(np.zeros(9), math.log(2), 0.2))
        assert abs(lt.energy_lux - 1000) < 1e-9
        assert abs(lt.temperature_k - 6500) < 1e-9

    def test_round_trip(self):
        rng = np.random.default_rng(17)
        for _ in range(25):
            ls = LightParams.directional(rng.uniform(-3, 3), rng.uniform(0.3, 2.8),
                                         rng.uniform(10, 5000), rng.uniform(2000, 10000))
            lt = LightParams.directional(rng.uniform(-3, 3), rng.uniform(0.3, 2.8),
                                         rng.uniform(10, 5000), rng.uniform(2000, 10000))
            d = delta_illumination(ls, lt)
            back = delta_illumination(ls, apply_delta(ls, d))
            npt.assert_allclose(back.vector(), d.vector(), atol=1e-9)
            npt.assert_allclose([back.dyaw, back.dpitch], [d.dyaw, d.dpitch], atol=1e-9)

    def test_point_light_keeps_radius(self):
        ls = LightParams.point_at((0.0, 3.0, 4.0), 800, 5000)
        lt = apply_delta(ls, delta_from_edit(ls, dyaw=0.5, dpitch=-0.1))
        assert abs(lt.radius() - 5.0) < 1e-9

    def test_out_of_range_edit_rejected(self):
        ls = LightParams.directional(0.0, 0.3, 1000, 5000)
        with pytest.raises(ValueError, match="pitch"):
            apply_delta(ls, DeltaL(np.zeros(9), 0.0, 0.0, 0.0, -0.5))
        with pytest.raises(ValueError, match="temperature"):
            apply_delta(ls, DeltaL(np.zeros(9), 0.0, 0.9))


class TestTemperatureToRgb:
    def test_white_point(self):
        npt.assert_allclose(temperature_to_rgb(6600.0), [1.0, 1.0, 1.0], atol=0.05)

    def test_warm_shift(self):
        rgb = temperature_to_rgb(1800.0)
        assert rgb[0] == 1.0
        assert rgb[2] < 0.3

    def test_blue_monotone(self):
        b = [temperature_to_rgb(t)[2] for t in (2000.0, 5000.0, 9000.0)]
        assert b[0] < b[1] < b[2]

    def test_near_continuity(self):
        # the piecewise fit has small clamped seams; jumps stay tiny
        taus = np.arange(1000.0, 12001.0, 10.0)
        vals = np.array([temperature_to_rgb(t) for t in taus])
        assert np.max(np.abs(np.diff(vals, axis=0))) < 0.02

    @pytest.mark.parametrize("tau", [900.0, 12500.0])
    def test_domain_error(self, tau):
        with pytest.raises(ValueError):
            temperature_to_rgb(tau)


class TestProjectToken:
    def test_identity_projection(self):
        d = DeltaL(np.arange(9, dtype=float), 0.5, -0.2)
        npt.assert_array_equal(project_token(d, np.eye(11)), d.vector())

    def test_zero_delta_zero_token(self):
        npt.assert_array_equal(project_token(DeltaL.zero(), np.zeros((16, 11))),
                               np.zeros(16))

    def test_random_map_matches_manual_product(self):
        rng = np.random.default_rng(23)
        proj = rng.normal(size=(16, 11))
        bias = rng.normal(size=16)
        d = DeltaL(rng.normal(size=9), 0.3, -0.1)
        vec = d.vector()
        manual = np.array([sum(proj[i, j] * vec[j] for j in range(11)) + bias[i]
                           for i in range(16)])
        npt.assert_allclose(project_token(d, proj, bias), manual, rtol=1e-12)

    def test_shape_errors(self):
        d = DeltaL.zero()
        with pytest.raises(ValueError, match="shape"):
            project_token(d, np.eye(10))
        with pytest.raises(ValueError, match="bias"):
            project_token(d, np.zeros((4, 11)), np.zeros(5))


class TestSerialization:
    def test_light_json_round_trip(self):
        for light in [LightParams.directional(0.1, 1.2, 333.3, 4321),
                      LightParams.point_at((0.3, -0.4, 1.2), 55.5, 7777)]:
            assert LightParams.from_json(json.loads(
                json.dumps(light.to_json()))) == light

    def test_delta_json_round_trip(self):
        ls = LightParams.directional(0.1, 1.2, 333.3, 4321)
        lt = LightParams.directional(0.9, 0.7, 500.0, 9000)
        d = delta_illumination(ls, lt)
        d2 = DeltaL.from_json(json.loads(json.dumps(d.to_json())))
        npt.assert_array_equal(d.vector(), d2.vector())
        assert (d.dyaw, d.dpitch) == (d2.dyaw, d2.dpitch)

    def test_seventeen_digit_floats(self):
        from relightkit.imgio import json_compact
        text = json_compact({"x": 0.1})
        assert json.loads(text)["x"] == 0.1
        assert "0.10000000000000001" in text

    def test_invariant_violations(self):
        with pytest.raises(ValueError, match="energy"):
            LightParams.directional(0, 1, -5, 5000)
        with pytest.raises(ValueError, match="temperature"):
            LightParams.directional(0, 1, 100, 500)
        with pytest.raises(ValueError, match="position"):
            LightParams("point", 0.0, 1.0, 100, 5000, None)
