"""Data-mixing theory: input Hessians, the mixture curve C(q), scaling fits.

For a trained network, the expected Hessian of the per-sample loss with
respect to the real-valued CSI input is estimated per dataset by central
finite differences of the analytic input gradient. With Sigma_k the
per-dataset expected Hessians and Sigma* the one of the test mixture, the
proportion-dependent part of the extra loss is

    C(q) = Tr( Sigma* * (sum_k q_k Sigma_k)^(-1) )

and, when all Sigma_k are approximately diagonal in Sigma*'s eigenbasis
with diagonals D_k (D* for Sigma*),

    C(q) ~= sum_i 1 / (sum_k lambda_ik q_k),   lambda_ik = D_k[i] / D*[i].

The empirical counterpart is the extra averaged loss above its minimum,
which for fixed proportions follows a log-linear law in the sample count:
log L(n) ~= alpha * log n + intercept (natural logs throughout).
"""

from dataclasses import dataclass

import numpy as np

from . import _binio
from .data import ChannelDataset
from .net import NetConfig, NetParams, _loss_and_grads, encode_csi


class SingularMixtureError(np.linalg.LinAlgError):
    """The q-weighted Hessian mixture is numerically singular."""


@dataclass(frozen=True)
class HessianEstimate:
    """d x d symmetric expected input Hessian with its sample count."""

    matrix: np.ndarray
    n_samples: int
    dataset_id: str = ""

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"Hessian must be square, got shape {m.shape}")
        asym = np.linalg.norm(m - m.T)
        if asym > 1e-8 * max(1.0, np.linalg.norm(m)):
            raise ValueError(f"Hessian not symmetric (asymmetry norm {asym:.3e})")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass
class MixtureCurve:
    """C(q) over a grid of proportion vectors, optionally with empirics."""

    q_grid: list[np.ndarray]
    c_values: np.ndarray
    empirical_rates: np.ndarray | None = None
    empirical_extra_losses: np.ndarray | None = None

    @property
    def argmin_index(self) -> int:
        """Index of the smallest finite C value (first on ties)."""
        c = np.where(np.isfinite(self.c_values), self.c_values, np.inf)
        return int(np.argmin(c))

    @property
    def argmin_q(self) -> np.ndarray:
        return self.q_grid[self.argmin_index]


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares fit of log(extra loss) against log(n)."""

    alpha: float
    intercept: float
    r_squared: float


@dataclass(frozen=True)
class DiagonalizedPair:
    """Sigma* eigen-decomposition and the co-transformed training Hessians."""

    basis: np.ndarray  # orthogonal P, columns are Sigma* eigenvectors
    d_star: np.ndarray  # Sigma* eigenvalues (ascending)
    d_k: list[np.ndarray]  # diagonals of P^T Sigma_k P
    offdiag_norms: np.ndarray  # Frobenius norms of the O_k remainders


@dataclass(frozen=True)
class LambdaMatrix:
    """Per-dimension ratios lambda_ik = D_k[i]/D*[i] with exclusions.

    Dimensions whose D*[i] is negligible are excluded from the rational
    form; their rows are NaN and their indices listed in `excluded`.
    """

    values: np.ndarray  # (d, K)
    excluded: np.ndarray  # sorted indices of dropped dimensions

    @property
    def retained(self) -> np.ndarray:
        mask = np.ones(self.values.shape[0], dtype=bool)
        mask[self.excluded] = False
        return mask


def _as_matrix(sigma) -> np.ndarray:
    if isinstance(sigma, HessianEstimate):
        return sigma.matrix
    return np.asarray(sigma, dtype=np.float64)


def _check_proportions(q, k: int) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (k,):
        raise ValueError(f"proportions must have length {k}, got shape {q.shape}")
    if np.any(q < 0) or abs(float(q.sum()) - 1.0) > 1e-12:
        raise ValueError("proportions must be >= 0 and sum to 1")
    return q


# ---------------------------------------------------------------------------
# Hessian estimation


def _network_input_gradients(
    params: NetParams, x_rows: np.ndarray, h: np.ndarray, config: NetConfig
) -> np.ndarray:
    """Per-row gradient of the per-sample loss w.r.t. the network input
    (eval mode), with the rate channel pinned to the sample's own h.

    Pinning the rate channel keeps the estimated Hessian the curvature of
    the network's response surface, which is positive-semidefinite-
    dominated near a trained optimum; letting the perturbation move the
    rate target as well injects strongly indefinite cross terms that make
    the mixture matrix of the C(q) trace formula non-invertible in
    practice.
    """
    m = x_rows.shape[0]
    h_batch = np.broadcast_to(h, (m,) + h.shape)
    _, _, _, grad_input = _loss_and_grads(
        params,
        x_rows,
        h_batch,
        config,
        mode="eval",
        dropout_seed=0,
        want_grads=False,
        want_input_grad=True,
    )
    # batch_loss averages over rows; undo the 1/M to get per-sample gradients
    return m * grad_input


def expected_input_hessian(
    params: NetParams,
    dataset: ChannelDataset,
    config: NetConfig,
    n_samples: int,
    fd_step: float = 1e-4,
    *,
    grad_fn=None,
    dataset_id: str | None = None,
) -> HessianEstimate:
    """Mean input Hessian over the first n_samples of a dataset.

    Per sample, the noiseless CSI enters as both the network input and
    the rate channel; row i of the Hessian is the central difference
    (g(x + eps*e_i) - g(x - eps*e_i)) / (2*eps) of the analytic input
    gradient g over the network-input argument, and the result is
    symmetrized. Passing grad_fn replaces the network's gradient with an
    arbitrary callable (test hook); the samples then only fix evaluation
    points.
    """
    if fd_step <= 0:
        raise ValueError("fd_step must be > 0")
    if not 1 <= n_samples <= dataset.n:
        raise ValueError(
            f"n_samples must be in [1, {dataset.n}], got {n_samples}"
        )
    total = None
    eye = None
    for idx in range(n_samples):
        sample = dataset.samples[idx]
        x = encode_csi(sample.h)
        d = x.size
        if eye is None or eye.shape[0] != d:
            eye = np.eye(d)
        if grad_fn is not None:
            g_plus = np.stack([np.asarray(grad_fn(x + fd_step * eye[i])) for i in range(d)])
            g_minus = np.stack([np.asarray(grad_fn(x - fd_step * eye[i])) for i in range(d)])
        else:
            rows = np.vstack([x + fd_step * eye, x - fd_step * eye])
            grads = _network_input_gradients(
                params, rows, np.atleast_2d(sample.h), config
            )
            g_plus, g_minus = grads[:d], grads[d:]
        hess = (g_plus - g_minus) / (2.0 * fd_step)
        hess = 0.5 * (hess + hess.T)
        if not np.all(np.isfinite(hess)):
            raise ValueError(f"non-finite Hessian entries at sample index {idx}")
        total = hess if total is None else total + hess
    return HessianEstimate(
        matrix=total / n_samples,
        n_samples=n_samples,
        dataset_id=dataset.scene_id if dataset_id is None else dataset_id,
    )


# ---------------------------------------------------------------------------
# The mixture curve C(q)


def c_of_q_direct(sigma_star, sigmas, q, ridge: float = 0.0) -> float:
    """Tr(Sigma* (sum_k q_k Sigma_k + ridge*I)^(-1))."""
    star = _as_matrix(sigma_star)
    mats = [_as_matrix(s) for s in sigmas]
    q = _check_proportions(q, len(mats))
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    d = star.shape[0]
    mix = sum(qk * m for qk, m in zip(q, mats)) + ridge * np.eye(d)
    eigvals = np.linalg.eigvalsh(0.5 * (mix + mix.T))
    smallest = eigvals[np.argmin(np.abs(eigvals))]
    if abs(smallest) <= 1e-12 * max(np.abs(eigvals).max(), 1e-300):
        raise SingularMixtureError(
            f"singular mixture Hessian: smallest eigenvalue {smallest:.6e}"
        )
    return float(np.trace(np.linalg.solve(mix, star)))


def diagonalize_pair(sigma_star, sigmas) -> DiagonalizedPair:
    """Eigenbasis of Sigma* and each Sigma_k expressed in it.

    Returns the basis P, the Sigma* eigenvalues D*, the diagonals D_k of
    P^T Sigma_k P and the Frobenius norms of the off-diagonal remainders.
    """
    star = _as_matrix(sigma_star)
    star = 0.5 * (star + star.T)
    if not np.all(np.isfinite(star)):
        raise ValueError("non-finite entries in the test-mixture Hessian")
    d_star, basis = np.linalg.eigh(star)
    d_k, offdiag = [], []
    for s in sigmas:
        m = _as_matrix(s)
        if not np.all(np.isfinite(m)):
            raise ValueError("non-finite entries in a training Hessian")
        t = basis.T @ m @ basis
        diag = np.diag(t).copy()
        d_k.append(diag)
        offdiag.append(np.linalg.norm(t - np.diag(diag)))
    return DiagonalizedPair(
        basis=basis, d_star=d_star, d_k=d_k, offdiag_norms=np.asarray(offdiag)
    )


def lambda_matrix(d_star: np.ndarray, d_k_list) -> LambdaMatrix:
    """Ratios lambda_ik = D_k[i]/D*[i]; near-zero D*[i] rows are excluded."""
    d_star = np.asarray(d_star, dtype=np.float64)
    cols = [np.asarray(dk, dtype=np.float64) for dk in d_k_list]
    threshold = 1e-10 * np.abs(d_star).max() if d_star.size else 0.0
    excluded = np.flatnonzero(np.abs(d_star) <= threshold)
    values = np.full((d_star.size, len(cols)), np.nan)
    mask = np.ones(d_star.size, dtype=bool)
    mask[excluded] = False
    for k, dk in enumerate(cols):
        values[mask, k] = dk[mask] / d_star[mask]
    return LambdaMatrix(values=values, excluded=excluded)


def c_of_q_rational(lam, q) -> float:
    """Rational form sum_i 1/(sum_k lambda_ik q_k) over retained dims."""
    if isinstance(lam, LambdaMatrix):
        values = lam.values[lam.retained]
        index_map = np.flatnonzero(lam.retained)
    else:
        values = np.asarray(lam, dtype=np.float64)
        if values.ndim == 1:
            values = values[None, :]
        index_map = np.arange(values.shape[0])
    q = _check_proportions(q, values.shape[1])
    denom = values @ q
    bad = np.flatnonzero(denom <= 0)
    if bad.size:
        i = int(index_map[bad[0]])
        raise ValueError(
            f"non-positive denominator at dimension {i}: {denom[bad[0]]!r}"
        )
    return float(np.sum(1.0 / denom))


def default_ridge(sigmas) -> float:
    """Fallback regularizer 1e-8 * trace(mean Sigma) / d."""
    mats = [_as_matrix(s) for s in sigmas]
    d = mats[0].shape[0]
    return 1e-8 * float(np.mean([abs(np.trace(m)) for m in mats])) / d


def two_way_grid(grid_step: float) -> list[np.ndarray]:
    """Proportion vectors (1-t, t) for t = 0, step, ..., 1."""
    if not 0 < grid_step <= 1:
        raise ValueError("grid_step must be in (0, 1]")
    n_steps = round(1.0 / grid_step)
    ts = np.linspace(0.0, 1.0, n_steps + 1)
    return [np.array([1.0 - t, t]) for t in ts]


def sweep_q(
    sigma_star, sigmas, grid_step: float = 0.1, q_grid=None, ridge: float = 0.0
) -> MixtureCurve:
    """Evaluate C(q) on a proportion grid.

    For K = 2 the grid runs the second component from 0 to 1 in steps of
    grid_step; other K require an explicit q_grid. Points where the
    mixture is singular are retried with the default ridge and marked NaN
    if still unusable; the sweep continues.
    """
    mats = [_as_matrix(s) for s in sigmas]
    if q_grid is None:
        if len(mats) != 2:
            raise ValueError("grid sweeps default to K = 2; pass q_grid for other K")
        q_grid = two_way_grid(grid_step)
    q_grid = [np.asarray(qv, dtype=np.float64) for qv in q_grid]
    c_values = np.empty(len(q_grid))
    for i, qv in enumerate(q_grid):
        try:
            c_values[i] = c_of_q_direct(sigma_star, mats, qv, ridge=ridge)
        except SingularMixtureError:
            try:
                c_values[i] = c_of_q_direct(
                    sigma_star, mats, qv, ridge=default_ridge(mats)
                )
            except SingularMixtureError:
                c_values[i] = np.nan
    return MixtureCurve(q_grid=q_grid, c_values=c_values)


def u_shape_violations(values) -> tuple[int, int]:
    """Argmin of a curve and how far it is from an ideal U shape.

    Returns (argmin_index, violations) where violations counts strict
    increases before the minimum plus strict decreases after it. NaN
    points (failed evaluations) are ignored.
    """
    v = np.asarray(values, dtype=np.float64)
    v = np.where(np.isfinite(v), v, np.inf)
    m = int(np.argmin(v))
    diffs = np.diff(np.compress(np.isfinite(v), v))
    finite_m = int(np.argmin(np.compress(np.isfinite(v), v)))
    return m, int(np.sum(diffs[:finite_m] > 0) + np.sum(diffs[finite_m:] < 0))


# ---------------------------------------------------------------------------
# Empirical extra loss and the scaling law


def extra_loss_empirical(final_losses) -> np.ndarray:
    """Losses above the observed minimum (the attainable minimum is
    unknown in self-supervised training; the sweep minimum stands in)."""
    losses = np.asarray(final_losses, dtype=np.float64)
    if losses.size == 0:
        raise ValueError("need at least one loss value")
    if not np.all(np.isfinite(losses)):
        raise ValueError("non-finite loss values")
    return losses - losses.min()


def fit_scaling_law(n_values, extra_losses) -> ScalingFit:
    """OLS of log(extra loss) on log(n); natural logarithms.

    Requires at least 3 distinct n values and strictly positive losses.
    """
    n_values = np.asarray(n_values, dtype=np.float64)
    losses = np.asarray(extra_losses, dtype=np.float64)
    if n_values.shape != losses.shape:
        raise ValueError("n_values and extra_losses must have equal length")
    if np.unique(n_values).size < 3:
        raise ValueError("need at least 3 distinct n values")
    nonpos = np.flatnonzero(losses <= 0)
    if nonpos.size:
        i = int(nonpos[0])
        raise ValueError(f"extra loss at index {i} is not positive: {losses[i]!r}")
    log_n = np.log(n_values)
    log_l = np.log(losses)
    alpha, intercept = np.polyfit(log_n, log_l, 1)
    residuals = log_l - (alpha * log_n + intercept)
    ss_res = float(np.sum(residuals**2))
    ss_tot = float(np.sum((log_l - log_l.mean()) ** 2))
    if ss_tot == 0.0:
        r_squared = 1.0 if ss_res <= 1e-24 else 0.0
    else:
        r_squared = 1.0 - ss_res / ss_tot
    return ScalingFit(alpha=float(alpha), intercept=float(intercept), r_squared=r_squared)


# ---------------------------------------------------------------------------
# Persistence

HESSIAN_MAGIC = b"HESS"
HESSIAN_VERSION = 1


def save_hessian(path, estimate: HessianEstimate) -> None:
    """magic, version, d, n_samples, then row-major f64 entries."""
    with open(path, "wb") as fh:
        fh.write(HESSIAN_MAGIC)
        _binio.write_u32(fh, HESSIAN_VERSION)
        _binio.write_u32(fh, estimate.dim)
        _binio.write_u64(fh, estimate.n_samples)
        _binio.write_f64_array(fh, estimate.matrix)


def load_hessian(path, dataset_id: str = "") -> HessianEstimate:
    with open(path, "rb") as fh:
        _binio.expect_magic(fh, HESSIAN_MAGIC)
        _binio.expect_version(fh, HESSIAN_VERSION)
        d = _binio.read_u32(fh)
        n_samples = _binio.read_u64(fh)
        matrix = _binio.read_f64_array(fh, (d, d))
    return HessianEstimate(matrix=matrix, n_samples=n_samples, dataset_id=dataset_id)
