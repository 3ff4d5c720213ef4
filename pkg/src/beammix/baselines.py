"""Analytic and search-based reference beamformers.

MRT (maximum ratio transmission) is the single-user optimum of the rate
maximization under the sum-power constraint and serves as the theoretical
upper bound all learned beamformers are measured against; the oversampled
DFT codebook with an exhaustive scan is the classic grid-search baseline.
"""

import math
from dataclasses import dataclass

import numpy as np

from .net import Beamformer, user_rate


@dataclass(frozen=True)
class Codebook:
    """List of unit-norm candidate beamforming directions."""

    vectors: np.ndarray  # (n_beams, N_t) complex

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vectors, dtype=np.complex128))
        object.__setattr__(self, "vectors", v)
        if v.shape[0] == 0:
            raise ValueError("codebook must be nonempty")
        norms = np.linalg.norm(v, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("codebook vectors must be unit norm")

    def __len__(self) -> int:
        return self.vectors.shape[0]


def mrt_beamformer(h: np.ndarray, power_p: float) -> Beamformer:
    """v = sqrt(P) * h / ||h||; the single-user rate optimum."""
    h = np.asarray(h, dtype=np.complex128)
    norm = np.linalg.norm(h)
    if norm == 0.0:
        raise ValueError("MRT is undefined for a zero channel")
    return Beamformer(v=math.sqrt(power_p) * h / norm, power=power_p)


def mrt_rate(h: np.ndarray, power_p: float, noise_var: float) -> float:
    """Closed-form single-user optimum log2(1 + P*||h||^2 / sigma^2)."""
    h = np.asarray(h, dtype=np.complex128)
    return float(np.log2(1.0 + power_p * np.sum(np.abs(h) ** 2) / noise_var))


def dft_codebook(n_antennas: int, oversampling: int = 1) -> Codebook:
    """Oversampled DFT beams: entry m of beam i is
    exp(j*2*pi*m*i / (oversampling*N_t)) / sqrt(N_t)."""
    if n_antennas < 1:
        raise ValueError("n_antennas must be >= 1")
    if oversampling < 1:
        raise ValueError("oversampling must be >= 1")
    n_beams = oversampling * n_antennas
    m = np.arange(n_antennas)
    i = np.arange(n_beams)
    phases = 2.0 * np.pi * np.outer(i, m) / n_beams
    return Codebook(vectors=np.exp(1j * phases) / math.sqrt(n_antennas))


def codebook_search(
    h: np.ndarray, codebook: Codebook, power_p: float, noise_var: float
) -> tuple[Beamformer, float]:
    """Exhaustive scan: the codebook entry maximizing the single-user rate.

    Ties break toward the lowest index. Returns (beamformer, rate).
    """
    h = np.asarray(h, dtype=np.complex128)
    gains = np.abs(codebook.vectors @ np.conj(h)) ** 2
    best = int(np.argmax(gains))  # argmax returns the first maximizer
    v = math.sqrt(power_p) * codebook.vectors[best]
    beam = Beamformer(v=v, power=power_p)
    rate = user_rate(h, beam, noise_var, k=0)
    return beam, rate
