import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beammix.channel import (
    ArrayGeometry,
    PathComponent,
    SceneFamily,
    array_response,
    channel_from_paths,
    default_scene_families,
    estimate_channel,
    generate_channel,
)

GEOM64 = ArrayGeometry(n_antennas=64)


class TestArrayResponse:
    def test_zero_azimuth_boresight_elevation_is_all_ones(self):
        a = array_response(ArrayGeometry(4), azimuth_rad=0.0, elevation_rad=math.pi / 2)
        np.testing.assert_allclose(a, np.ones(4), atol=1e-15)

    def test_endfire_two_elements(self):
        a = array_response(ArrayGeometry(2), azimuth_rad=math.pi / 2, elevation_rad=0.0)
        np.testing.assert_allclose(a, [1.0, -1.0], atol=1e-12)

    def test_thirty_degree_phase_progression(self):
        # phase per element is pi*sin(pi/6) = pi/2
        a = array_response(ArrayGeometry(3), azimuth_rad=math.pi / 6, elevation_rad=0.0)
        np.testing.assert_allclose(a, [1.0, 1j, -1.0], atol=1e-12)

    @given(
        n=st.integers(1, 128),
        d=st.floats(0.01, 4.0),
        az=st.floats(-math.pi, math.pi),
        el=st.floats(0.0, math.pi),
    )
    @settings(max_examples=60, deadline=None)
    def test_entries_unit_modulus(self, n, d, az, el):
        a = array_response(ArrayGeometry(n, d), az, el)
        np.testing.assert_allclose(np.abs(a), 1.0, atol=1e-12)


class TestChannelFromPaths:
    def test_single_boresight_path_gives_all_ones(self):
        # alpha=1, tau=0, rho=N_t and elevation pi/2 -> h = ones
        geom = ArrayGeometry(8)
        path = PathComponent(gain=1.0, azimuth_rad=0.0, elevation_rad=math.pi / 2)
        h = channel_from_paths([path], geom, pathloss_db=10 * math.log10(8))
        np.testing.assert_allclose(h, np.ones(8), atol=1e-12)

    def test_linear_in_path_gains(self):
        geom = ArrayGeometry(16)
        rng = np.random.default_rng(0)
        paths = [
            PathComponent(
                gain=complex(rng.normal(), rng.normal()),
                azimuth_rad=float(rng.uniform(-1, 1)),
                delay_s=float(rng.uniform(0, 1e-7)),
            )
            for _ in range(4)
        ]
        c = 3.7
        scaled = [
            PathComponent(p.gain * c, p.azimuth_rad, p.elevation_rad, p.delay_s)
            for p in paths
        ]
        h1 = channel_from_paths(paths, geom)
        h2 = channel_from_paths(scaled, geom)
        np.testing.assert_allclose(h2, c * h1, rtol=1e-12)

    def test_rejects_empty_path_list(self):
        with pytest.raises(ValueError):
            channel_from_paths([], ArrayGeometry(4))


class TestGenerateChannel:
    def test_same_seed_bit_identical(self):
        scene = default_scene_families()["family_A"]
        s1 = generate_channel(scene, GEOM64, rng_seed=42)
        s2 = generate_channel(scene, GEOM64, rng_seed=42)
        assert np.array_equal(s1.h, s2.h)
        assert s1.scene_id == "family_A"

    def test_different_seeds_differ(self):
        scene = default_scene_families()["family_A"]
        s1 = generate_channel(scene, GEOM64, rng_seed=1)
        s2 = generate_channel(scene, GEOM64, rng_seed=2)
        assert not np.array_equal(s1.h, s2.h)

    def test_mean_power_matches_closed_form(self):
        # Monte-Carlo oracle: E[||h||^2] = (N_t^2/rho) * sum of path powers
        scene = default_scene_families()["family_A"]
        expected = scene.mean_channel_power(GEOM64)
        powers = [
            np.sum(np.abs(generate_channel(scene, GEOM64, seed).h) ** 2)
            for seed in range(10_000)
        ]
        assert abs(np.mean(powers) - expected) < 0.10 * expected

    def test_rejects_zero_path_scene(self):
        with pytest.raises(ValueError):
            SceneFamily(id="bad", n_paths=0)


class TestEstimateChannel:
    def setup_method(self):
        self.h = generate_channel(default_scene_families()["family_A"], GEOM64, 7).h

    def test_infinite_pnr_is_noiseless(self):
        np.testing.assert_array_equal(estimate_channel(self.h, math.inf, 0), self.h)

    def test_noise_power_contract_at_20db(self):
        # E[||e||^2] / ||h||^2 = 10^(-2); Monte Carlo over 1000 draws
        h_energy = np.sum(np.abs(self.h) ** 2)
        ratios = [
            np.sum(np.abs(estimate_channel(self.h, 20.0, seed) - self.h) ** 2) / h_energy
            for seed in range(1000)
        ]
        assert abs(np.mean(ratios) - 0.01) < 0.2 * 0.01

    def test_noise_variance_within_three_standard_errors(self):
        n_t = self.h.size
        sigma_e2 = np.sum(np.abs(self.h) ** 2) / n_t * 1e-2
        draws = np.stack(
            [estimate_channel(self.h, 20.0, seed) - self.h for seed in range(1000)]
        )
        per_element_power = np.abs(draws) ** 2
        mean = per_element_power.mean()
        # |e|^2 is exponential(sigma_e2): std = sigma_e2
        stderr = sigma_e2 / math.sqrt(per_element_power.size)
        assert abs(mean - sigma_e2) < 3 * stderr

    def test_distinct_seeds_distinct_estimates(self):
        e1 = estimate_channel(self.h, 20.0, 1)
        e2 = estimate_channel(self.h, 20.0, 2)
        assert not np.array_equal(e1, e2)

    def test_rejects_zero_channel(self):
        with pytest.raises(ValueError):
            estimate_channel(np.zeros(4, dtype=complex), 20.0, 0)


class TestValidation:
    def test_geometry_rejects_bad_values(self):
        with pytest.raises(ValueError):
            ArrayGeometry(0)
        with pytest.raises(ValueError):
            ArrayGeometry(4, spacing_wavelengths=0.0)

    def test_path_component_angle_ranges(self):
        with pytest.raises(ValueError):
            PathComponent(gain=1.0, azimuth_rad=4.0)
        with pytest.raises(ValueError):
            PathComponent(gain=1.0, azimuth_rad=0.0, elevation_rad=-0.1)
        with pytest.raises(ValueError):
            PathComponent(gain=1.0, azimuth_rad=0.0, delay_s=-1e-9)

    def test_default_families_have_disjoint_angle_support(self):
        fams = default_scene_families()
        a, b = fams["family_A"], fams["family_B"]
        assert a.azimuth_center_rad + a.azimuth_spread_rad < b.azimuth_center_rad - b.azimuth_spread_rad
        assert a.pathloss_db == b.pathloss_db and a.gain_decay_db_per_path == b.gain_decay_db_per_path
