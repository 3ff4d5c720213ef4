"""Channel dataset materialization, mixing, splitting and persistence.

Datasets are immutable-by-convention ordered lists of ChannelSample. The
mixing operation draws a largest-remainder-rounded number of samples from
each source without replacement, matching the way distinct users would be
taken from each measurement campaign.

On-disk channel dump format (little-endian, no padding):

    magic  "CHNL" (4 bytes)
    u32    format version (1)
    u64    n_samples
    u32    n_antennas
    u32    n_users (always 1 in this implementation)
    per sample:
        u16-length-prefixed UTF-8 scene id
        u64  seed_index
        n_antennas * (f64 re, f64 im)
"""

from dataclasses import dataclass

import numpy as np

from . import _binio
from ._binio import (
    BadMagicError,
    ContainerError,
    TruncatedFileError,
    VersionMismatchError,
)
from .channel import ArrayGeometry, ChannelSample, SceneFamily, generate_channel

MAGIC = b"CHNL"
FORMAT_VERSION = 1

MIXED_ID = "mixed"


class InsufficientSamplesError(ValueError):
    """A mix draw asked for more samples than a source holds."""


def _derive_scene_id(samples: list[ChannelSample]) -> str:
    ids = {s.scene_id for s in samples}
    if len(ids) == 1:
        return next(iter(ids))
    return MIXED_ID


@dataclass(frozen=True)
class ChannelDataset:
    """Ordered collection of channel samples with a homogeneity label."""

    samples: list[ChannelSample]
    scene_id: str = ""

    def __post_init__(self):
        if not self.scene_id:
            object.__setattr__(self, "scene_id", _derive_scene_id(self.samples))
        widths = {s.n_antennas for s in self.samples}
        if len(widths) > 1:
            raise ValueError(f"samples disagree on antenna count: {sorted(widths)}")

    @property
    def n(self) -> int:
        return len(self.samples)

    @property
    def n_antennas(self) -> int:
        """Antenna count, or 0 for an empty dataset."""
        return self.samples[0].n_antennas if self.samples else 0

    def h_matrix(self) -> np.ndarray:
        """(n, N_t) complex matrix of all channel vectors."""
        if not self.samples:
            return np.zeros((0, 0), dtype=np.complex128)
        return np.stack([s.h for s in self.samples])


@dataclass(frozen=True)
class MixSpec:
    """Proportions q over K sources and the total sample budget."""

    proportions: np.ndarray
    total_n: int

    def __post_init__(self):
        q = np.asarray(self.proportions, dtype=np.float64)
        object.__setattr__(self, "proportions", q)
        if q.ndim != 1 or q.size == 0:
            raise ValueError("proportions must be a nonempty vector")
        if np.any(q < 0):
            raise ValueError("proportions must be >= 0")
        if abs(float(q.sum()) - 1.0) > 1e-12:
            raise ValueError(f"proportions must sum to 1, got {q.sum()!r}")
        if self.total_n < 1:
            raise ValueError("total_n must be positive")

    @property
    def k(self) -> int:
        return int(self.proportions.size)


def largest_remainder_counts(total_n: int, proportions: np.ndarray) -> np.ndarray:
    """Integer per-source counts summing to total_n.

    Floors of total_n*q_k, with the leftover units going to the largest
    fractional remainders; ties break toward the lower source index.
    """
    q = np.asarray(proportions, dtype=np.float64)
    exact = total_n * q
    base = np.floor(exact).astype(np.int64)
    leftover = int(total_n - base.sum())
    if leftover:
        frac = exact - base
        order = sorted(range(q.size), key=lambda k: (-frac[k], k))
        for k in order[:leftover]:
            base[k] += 1
    return base


def generate_dataset(
    scene: SceneFamily, geometry: ArrayGeometry, n: int, base_seed: int
) -> ChannelDataset:
    """Materialize n samples from a scene; sample i uses seed base_seed + i."""
    if n < 0:
        raise ValueError("n must be >= 0")
    samples = [generate_channel(scene, geometry, base_seed + i) for i in range(n)]
    return ChannelDataset(samples=samples, scene_id=scene.id)


def mix_datasets(
    sources: list[ChannelDataset], spec: MixSpec, rng_seed: int
) -> ChannelDataset:
    """Combine K sources at proportions q into a shuffled dataset of total_n.

    Per-source counts follow the largest-remainder rule; samples are drawn
    without replacement and the combined order is shuffled, all
    deterministically from rng_seed.
    """
    if len(sources) != spec.k:
        raise ValueError(f"expected {spec.k} sources, got {len(sources)}")
    widths = {d.n_antennas for d in sources if d.n}
    if len(widths) > 1:
        raise ValueError(f"sources disagree on antenna count: {sorted(widths)}")
    counts = largest_remainder_counts(spec.total_n, spec.proportions)
    for k, (src, want) in enumerate(zip(sources, counts)):
        if want > src.n:
            raise InsufficientSamplesError(
                f"source {k} has {src.n} samples, mix needs {want}"
            )
    rng = np.random.default_rng(rng_seed)
    chosen: list[ChannelSample] = []
    for src, want in zip(sources, counts):
        picks = rng.choice(src.n, size=int(want), replace=False)
        chosen.extend(src.samples[int(i)] for i in picks)
    order = rng.permutation(len(chosen))
    samples = [chosen[int(i)] for i in order]
    return ChannelDataset(samples=samples)


def split_dataset(
    dataset: ChannelDataset, train_fraction: float, rng_seed: int
) -> tuple[ChannelDataset, ChannelDataset]:
    """Disjoint (train, test) partition; train gets floor(n * fraction)."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    if dataset.n < 2:
        raise ValueError("need at least 2 samples to split")
    n_train = int(np.floor(dataset.n * train_fraction))
    perm = np.random.default_rng(rng_seed).permutation(dataset.n)
    train = [dataset.samples[int(i)] for i in perm[:n_train]]
    test = [dataset.samples[int(i)] for i in perm[n_train:]]
    return (
        ChannelDataset(samples=train, scene_id=dataset.scene_id),
        ChannelDataset(samples=test, scene_id=dataset.scene_id),
    )


def save_dataset(dataset: ChannelDataset, path) -> None:
    """Write the channel dump; bit-exact round trip with load_dataset."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        _binio.write_u32(fh, FORMAT_VERSION)
        _binio.write_u64(fh, dataset.n)
        _binio.write_u32(fh, dataset.n_antennas)
        _binio.write_u32(fh, 1)
        for s in dataset.samples:
            _binio.write_str16(fh, s.scene_id)
            _binio.write_u64(fh, s.seed_index)
            interleaved = np.empty(2 * s.n_antennas, dtype="<f8")
            interleaved[0::2] = s.h.real
            interleaved[1::2] = s.h.imag
            fh.write(interleaved.tobytes())


def load_dataset(path) -> ChannelDataset:
    """Read a channel dump written by save_dataset.

    Raises BadMagicError / VersionMismatchError / TruncatedFileError for
    the corresponding malformed-file conditions.
    """
    with open(path, "rb") as fh:
        _binio.expect_magic(fh, MAGIC)
        _binio.expect_version(fh, FORMAT_VERSION)
        n_samples = _binio.read_u64(fh)
        n_antennas = _binio.read_u32(fh)
        n_users = _binio.read_u32(fh)
        if n_users != 1:
            raise ContainerError(
                f"unsupported user count {n_users}; this loader handles single-user dumps"
            )
        samples = []
        for _ in range(n_samples):
            scene_id = _binio.read_str16(fh)
            seed_index = _binio.read_u64(fh)
            raw = _binio.read_exact(fh, 16 * n_antennas)
            flat = np.frombuffer(raw, dtype="<f8")
            h = flat[0::2] + 1j * flat[1::2]
            samples.append(ChannelSample(h=h, scene_id=scene_id, seed_index=seed_index))
        trailing = fh.read(1)
        if trailing:
            raise ContainerError("trailing bytes after declared payload")
    return ChannelDataset(samples=samples)
