import math

import numpy as np
import pytest

from beammix.baselines import (
    Codebook,
    codebook_search,
    dft_codebook,
    mrt_beamformer,
    mrt_rate,
)
from beammix.channel import ArrayGeometry, array_response
from beammix.net import user_rate


class TestMrt:
    def test_basis_channel(self):
        h = np.zeros(4, dtype=complex)
        h[0] = 1.0
        beam = mrt_beamformer(h, power_p=4.0)
        expected = np.zeros(4, dtype=complex)
        expected[0] = 2.0
        np.testing.assert_allclose(beam.v[0], expected)

    def test_achieves_closed_form_rate(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            h = rng.normal(size=8) + 1j * rng.normal(size=8)
            beam = mrt_beamformer(h, power_p=2.0)
            achieved = user_rate(h, beam, noise_var=0.3, k=0)
            assert achieved == pytest.approx(mrt_rate(h, 2.0, 0.3), rel=1e-12)

    def test_dominates_random_unit_beams(self):
        rng = np.random.default_rng(1)
        h = rng.normal(size=16) + 1j * rng.normal(size=16)
        p = 1.7
        best = user_rate(h, mrt_beamformer(h, p), noise_var=0.2, k=0)
        for _ in range(100):
            v = rng.normal(size=16) + 1j * rng.normal(size=16)
            v = math.sqrt(p) * v / np.linalg.norm(v)
            assert user_rate(h, v[None, :], noise_var=0.2, k=0) <= best + 1e-12

    def test_zero_channel_rejected(self):
        with pytest.raises(ValueError):
            mrt_beamformer(np.zeros(4, dtype=complex), 1.0)


class TestDftCodebook:
    def test_two_point_codebook(self):
        cb = dft_codebook(2, oversampling=1)
        expected = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2)
        np.testing.assert_allclose(cb.vectors, expected, atol=1e-12)

    def test_all_unit_norm(self):
        cb = dft_codebook(16, oversampling=4)
        assert len(cb) == 64
        np.testing.assert_allclose(np.linalg.norm(cb.vectors, axis=1), 1.0, atol=1e-12)

    def test_critically_sampled_codebook_is_orthonormal(self):
        cb = dft_codebook(8, oversampling=1)
        gram = cb.vectors @ cb.vectors.conj().T
        np.testing.assert_allclose(gram, np.eye(8), atol=1e-12)

    def test_codebook_validates_norms(self):
        with pytest.raises(ValueError):
            Codebook(vectors=np.array([[1.0, 1.0]], dtype=complex))


class TestCodebookSearch:
    def test_aligned_channel_selects_that_beam(self):
        cb = dft_codebook(8, oversampling=1)
        h = 3.0 * cb.vectors[5]
        beam, rate = codebook_search(h, cb, power_p=1.0, noise_var=0.1)
        np.testing.assert_allclose(beam.v[0], cb.vectors[5], atol=1e-12)
        assert rate == pytest.approx(mrt_rate(h, 1.0, 0.1), rel=1e-12)

    def test_never_beats_mrt(self):
        rng = np.random.default_rng(2)
        cb = dft_codebook(16, oversampling=2)
        for _ in range(25):
            h = rng.normal(size=16) + 1j * rng.normal(size=16)
            _, rate = codebook_search(h, cb, power_p=1.0, noise_var=0.1)
            assert rate <= mrt_rate(h, 1.0, 0.1) + 1e-12

    def test_tie_breaks_to_lowest_index(self):
        v = np.eye(2, dtype=complex)
        cb = Codebook(vectors=v)
        h = np.array([1.0, 1.0], dtype=complex)  # equal gain on both beams
        beam, _ = codebook_search(h, cb, power_p=1.0, noise_var=0.1)
        np.testing.assert_allclose(beam.v[0], v[0])
        # permuting the codebook moves the returned index
        beam2, _ = codebook_search(h, Codebook(vectors=v[::-1]), 1.0, 0.1)
        np.testing.assert_allclose(beam2.v[0], v[1])

    def test_oversampled_search_near_oracle_on_los_channels(self):
        # 128-beam grid over N_t = 64: mean rate within 5% of MRT
        geom = ArrayGeometry(64)
        cb = dft_codebook(64, oversampling=2)
        rng = np.random.default_rng(3)
        ratios = []
        for _ in range(1000):
            az = rng.uniform(-math.pi / 2, math.pi / 2)
            gain = rng.normal() + 1j * rng.normal()
            h = gain * array_response(geom, az)
            _, rate = codebook_search(h, cb, power_p=1.0, noise_var=0.1)
            ratios.append(rate / mrt_rate(h, 1.0, 0.1))
        assert np.mean(ratios) >= 0.95
