"""Self-supervised beamforming network: forward, exact gradients, SGD.

The architecture is three blocks of Dense -> ReLU -> BatchNorm -> Dropout
followed by a power-normalizing output stage. The final block emits
2*N_t*N_r*N_RF real numbers which are reinterpreted as N_r complex vectors
u_k (per user contiguous, real half first). The output stage rescales

    v_k = sqrt(P / sum_j ||u_j||^2) * u_k

so the sum-power constraint holds exactly, and the training loss is the
negative mean per-user spectral efficiency

    loss = -(1 / (N_r * M)) * sum_i sum_k log2(1 + SINR_{k,i}).

Everything is float64 numpy. Gradients are exact reverse-mode derivatives
of the batch loss with respect to all trainable parameters and the real
input entries; they are validated against central finite differences in
the test suite.

Batch normalization uses biased batch statistics in train mode and updates
the running statistics with exponential momentum. A train-mode batch of
one sample has no usable batch statistics; it normalizes with the running
statistics and leaves them unchanged.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _binio

LN2 = math.log(2.0)


class DegenerateBeamformerError(ValueError):
    """Power normalization saw an all-zero pre-normalization vector."""


class TrainingDivergedError(RuntimeError):
    """Training loss became non-finite."""


@dataclass(frozen=True)
class NetConfig:
    """Architecture and loss constants.

    hidden_widths lists the dense output widths per block; the last one
    must equal 2 * n_antennas * n_users * n_rf_chains so the network emits
    one complex beamforming vector per user.
    """

    n_antennas: int
    n_users: int = 1
    n_rf_chains: int = 1
    hidden_widths: tuple[int, ...] = (320, 320, 128)
    dropout_rate: float = 0.3
    bn_epsilon: float = 1e-5
    bn_momentum: float = 0.9
    power_p: float = 1.0
    noise_var: float = 0.1
    unit_modulus: bool = False

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(self.hidden_widths))
        if min(self.n_antennas, self.n_users, self.n_rf_chains) < 1:
            raise ValueError("antenna/user/RF-chain counts must be >= 1")
        if not self.hidden_widths:
            raise ValueError("hidden_widths must be nonempty")
        if self.hidden_widths[-1] != self.output_dim:
            raise ValueError(
                f"last hidden width {self.hidden_widths[-1]} must equal "
                f"2*N_t*N_r*N_RF = {self.output_dim}"
            )
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if not self.bn_epsilon > 0:
            raise ValueError("bn_epsilon must be > 0")
        if not 0.0 < self.bn_momentum < 1.0:
            raise ValueError("bn_momentum must be in (0, 1)")
        if not self.power_p > 0:
            raise ValueError("power_p must be > 0")
        if not self.noise_var > 0:
            raise ValueError("noise_var must be > 0")

    @property
    def input_dim(self) -> int:
        return 2 * self.n_antennas * self.n_users

    @property
    def output_dim(self) -> int:
        return 2 * self.n_antennas * self.n_users * self.n_rf_chains

    @property
    def beam_len(self) -> int:
        """Length of one user's beamforming vector (N_t * N_RF)."""
        return self.n_antennas * self.n_rf_chains

    @property
    def n_blocks(self) -> int:
        return len(self.hidden_widths)


@dataclass
class DenseLayer:
    w: np.ndarray  # (fan_in, fan_out)
    b: np.ndarray  # (fan_out,)


@dataclass
class BatchNormLayer:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray


@dataclass
class NetParams:
    """All weights: dense and batch-norm layers, one of each per block."""

    dense: list[DenseLayer]
    bn: list[BatchNormLayer]

    def copy(self) -> "NetParams":
        return NetParams(
            dense=[DenseLayer(d.w.copy(), d.b.copy()) for d in self.dense],
            bn=[
                BatchNormLayer(
                    l.gamma.copy(),
                    l.beta.copy(),
                    l.running_mean.copy(),
                    l.running_var.copy(),
                )
                for l in self.bn
            ],
        )

    def layer_param_counts(self) -> list[tuple[str, int]]:
        """Trainable parameter count per layer, in network order."""
        counts = []
        for i, (d, l) in enumerate(zip(self.dense, self.bn)):
            counts.append((f"dense_{i + 1}", d.w.size + d.b.size))
            counts.append((f"bn_{i + 1}", l.gamma.size + l.beta.size))
        return counts

    @property
    def n_trainable(self) -> int:
        return sum(c for _, c in self.layer_param_counts())


@dataclass
class BlockGrads:
    dw: np.ndarray
    db: np.ndarray
    dgamma: np.ndarray
    dbeta: np.ndarray


def init_params(config: NetConfig, rng_seed: int) -> NetParams:
    """Glorot-uniform dense weights, zero biases, identity batch-norm."""
    rng = np.random.default_rng(rng_seed)
    widths = (config.input_dim,) + config.hidden_widths
    dense, bn = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        dense.append(
            DenseLayer(
                w=rng.uniform(-bound, bound, size=(fan_in, fan_out)),
                b=np.zeros(fan_out),
            )
        )
        bn.append(
            BatchNormLayer(
                gamma=np.ones(fan_out),
                beta=np.zeros(fan_out),
                running_mean=np.zeros(fan_out),
                running_var=np.ones(fan_out),
            )
        )
    return NetParams(dense=dense, bn=bn)


def params_to_vector(params: NetParams) -> np.ndarray:
    """Flatten trainables (w, b, gamma, beta per block, declaration order)."""
    chunks = []
    for d, l in zip(params.dense, params.bn):
        chunks.extend([d.w.ravel(), d.b, l.gamma, l.beta])
    return np.concatenate(chunks)


def vector_to_params(vec: np.ndarray, template: NetParams) -> NetParams:
    """Inverse of params_to_vector; running stats copied from the template."""
    out = template.copy()
    pos = 0
    for d, l in zip(out.dense, out.bn):
        for arr in (d.w, d.b, l.gamma, l.beta):
            arr[...] = vec[pos : pos + arr.size].reshape(arr.shape)
            pos += arr.size
    if pos != vec.size:
        raise ValueError(f"vector length {vec.size} does not match template ({pos})")
    return out


def grads_to_vector(grads: list[BlockGrads]) -> np.ndarray:
    chunks = []
    for g in grads:
        chunks.extend([g.dw.ravel(), g.db, g.dgamma, g.dbeta])
    return np.concatenate(chunks)


# ---------------------------------------------------------------------------
# CSI encoding and the complex output interpretation


def encode_csi(h_list) -> np.ndarray:
    """Real input vector: per user, real parts then imaginary parts."""
    h = np.atleast_2d(np.asarray(h_list, dtype=np.complex128))
    return np.concatenate([np.concatenate([hk.real, hk.imag]) for hk in h])


def decode_csi(x: np.ndarray, n_users: int = 1) -> np.ndarray:
    """Inverse of encode_csi: (2*K*N_t,) reals -> (K, N_t) complex."""
    x = np.asarray(x, dtype=np.float64)
    blocks = x.reshape(n_users, -1)
    n_t = blocks.shape[1] // 2
    return blocks[:, :n_t] + 1j * blocks[:, n_t:]


def _decode_output(o: np.ndarray, n_users: int, beam_len: int) -> np.ndarray:
    """(M, 2*K*B) reals -> (M, K, B) complex, real half first per user."""
    m = o.shape[0]
    blocks = o.reshape(m, n_users, 2 * beam_len)
    return blocks[:, :, :beam_len] + 1j * blocks[:, :, beam_len:]


def _encode_output_grad(du: np.ndarray) -> np.ndarray:
    """(M, K, B) complex gradient -> (M, 2*K*B) real gradient."""
    m, k, b = du.shape
    out = np.empty((m, k, 2 * b))
    out[:, :, :b] = du.real
    out[:, :, b:] = du.imag
    return out.reshape(m, 2 * k * b)


# ---------------------------------------------------------------------------
# Forward pass


def forward(
    params: NetParams,
    csi: np.ndarray,
    config: NetConfig,
    mode: str = "eval",
    dropout_seed: int = 0,
):
    """Run the network on one CSI vector or a batch.

    Returns (u, cache): u is the complex pre-normalization output, shape
    (N_r, beam_len) for a 1-D input or (M, N_r, beam_len) for a batch.
    Train mode uses batch statistics (updating the running ones) and
    seeded inverted dropout; eval mode is a pure deterministic function.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    x = np.asarray(csi, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != config.input_dim:
        raise ValueError(
            f"input width {x.shape[-1]} does not match 2*N_t*N_r = {config.input_dim}"
        )
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input")

    m = x.shape[0]
    train = mode == "train"
    use_batch_stats = train and m >= 2
    rng = np.random.default_rng(dropout_seed) if train and config.dropout_rate > 0 else None

    a = x
    blocks = []
    for d, l in zip(params.dense, params.bn):
        z = a @ d.w + d.b
        r = np.maximum(z, 0.0)
        if use_batch_stats:
            mu = r.mean(axis=0)
            var = r.var(axis=0)
            inv = 1.0 / np.sqrt(var + config.bn_epsilon)
            xhat = (r - mu) * inv
            mom = config.bn_momentum
            l.running_mean[...] = mom * l.running_mean + (1.0 - mom) * mu
            l.running_var[...] = mom * l.running_var + (1.0 - mom) * var
        else:
            inv = 1.0 / np.sqrt(l.running_var + config.bn_epsilon)
            xhat = (r - l.running_mean) * inv
        y = l.gamma * xhat + l.beta
        if rng is not None:
            keep = 1.0 - config.dropout_rate
            mask = (rng.random(y.shape) < keep) / keep
            a_next = y * mask
        else:
            mask = None
            a_next = y
        blocks.append(
            dict(a_prev=a, z=z, xhat=xhat, inv=inv, mask=mask, batch_stats=use_batch_stats)
        )
        a = a_next

    u = _decode_output(a, config.n_users, config.beam_len)
    cache = dict(blocks=blocks, single=single)
    return (u[0] if single else u), cache


# ---------------------------------------------------------------------------
# Output stage: power normalization and spectral efficiency


@dataclass(frozen=True)
class Beamformer:
    """Per-user beamforming vectors v (N_r, N_t*N_RF) with sum power P."""

    v: np.ndarray
    power: float

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.v, dtype=np.complex128))
        object.__setattr__(self, "v", v)
        total = float(np.sum(np.abs(v) ** 2))
        if abs(total - self.power) > 1e-10 * self.power:
            raise ValueError(
                f"beamformer power {total} violates the constraint P = {self.power}"
            )


def normalize_power(u, power_p: float, unit_modulus: bool = False) -> Beamformer:
    """Output stage: scale u to meet the sum-power constraint exactly.

    With unit_modulus=True the entries are first projected to a common
    modulus (analog phase shifters) and then scaled to total power P.
    """
    u = np.atleast_2d(np.asarray(u, dtype=np.complex128))
    total = float(np.sum(np.abs(u) ** 2))
    if total == 0.0:
        raise DegenerateBeamformerError(
            "degenerate beamformer: all-zero pre-normalization output"
        )
    if unit_modulus:
        phases = np.exp(1j * np.angle(u))
        v = math.sqrt(power_p / u.size) * phases
    else:
        v = math.sqrt(power_p / total) * u
    return Beamformer(v=v, power=power_p)


def _pair_gains(h: np.ndarray, v: np.ndarray, n_antennas: int) -> np.ndarray:
    """g[m,k,j] = ||h_k^H V_j||^2 for batched users; V_j has one length-N_t
    block per RF chain."""
    m, k, b = v.shape
    n_rf = b // n_antennas
    v4 = v.reshape(m, k, n_rf, n_antennas)
    c4 = np.einsum("mkt,mjct->mkjc", np.conj(h), v4)
    return np.sum(np.abs(c4) ** 2, axis=-1), c4


def user_rate(h_list, v, noise_var: float, k: int) -> float:
    """Spectral efficiency of user k in bit/s/Hz (base-2 log).

    h_list: (N_r, N_t) channels; v: Beamformer or (N_r, N_t*N_RF) array.
    For a single user the interference sum is empty.
    """
    h = np.atleast_2d(np.asarray(h_list, dtype=np.complex128))
    varr = v.v if isinstance(v, Beamformer) else np.atleast_2d(np.asarray(v))
    g, _ = _pair_gains(h[None], varr[None].astype(np.complex128), h.shape[1])
    g = g[0]
    signal = g[k, k]
    interference = g[k].sum() - signal
    return float(np.log2(1.0 + signal / (noise_var + interference)))


def _output_stage(u: np.ndarray, h: np.ndarray, config: NetConfig):
    """Normalize a batch of u and evaluate all user rates.

    u: (M, K, B) complex, h: (M, K, N_t) complex. Returns (rates, ctx)
    where rates is (M, K) and ctx holds intermediates for the backward
    pass.
    """
    s = np.sum(np.abs(u) ** 2, axis=(1, 2))
    if np.any(s == 0.0):
        raise DegenerateBeamformerError(
            "degenerate beamformer: all-zero pre-normalization output"
        )
    t = np.sqrt(config.power_p / s)
    v = u * t[:, None, None]
    g, c4 = _pair_gains(h, v, config.n_antennas)
    sig = np.einsum("mkk->mk", g)
    denom = config.noise_var + g.sum(axis=2) - sig
    rates = (np.log(denom + sig) - np.log(denom)) / LN2
    ctx = dict(u=u, h=h, s=s, t=t, c4=c4, sig=sig, denom=denom)
    return rates, ctx


def _output_stage_backward(ctx: dict, weight: float, config: NetConfig) -> np.ndarray:
    """Gradient of weight * sum(rates) w.r.t. u, in the complex convention
    grad = d/dRe + j*d/dIm. Returns (M, K, B) complex."""
    u, h = ctx["u"], ctx["h"]
    s, t, c4 = ctx["s"], ctx["t"], ctx["c4"]
    sig, denom = ctx["sig"], ctx["denom"]
    m, k, _ = u.shape

    d_sig = weight / (LN2 * (denom + sig))  # dRate_k / d g_kk
    d_int = weight * (1.0 / (denom + sig) - 1.0 / denom) / LN2  # j != k
    dg = np.repeat(d_int[:, :, None], k, axis=2)
    idx = np.arange(k)
    dg[:, idx, idx] = d_sig

    a4 = 2.0 * dg[..., None] * c4
    dv4 = np.einsum("mkjc,mkt->mjct", a4, h)
    dv = dv4.reshape(u.shape)

    proj = np.sum(dv.real * u.real + dv.imag * u.imag, axis=(1, 2))
    du = t[:, None, None] * dv - (t / s * proj)[:, None, None] * u
    return du


# ---------------------------------------------------------------------------
# Loss and gradients


def _stack_batch(batch):
    """Batch of (csi, h_list) pairs -> (X (M, d_in), H (M, K, N_t))."""
    if len(batch) == 0:
        raise ValueError("batch must be nonempty")
    xs, hs = zip(*batch)
    x = np.stack([np.asarray(v, dtype=np.float64) for v in xs])
    h = np.stack([np.atleast_2d(np.asarray(v, dtype=np.complex128)) for v in hs])
    return x, h


def _loss_and_grads(
    params: NetParams,
    x: np.ndarray,
    h: np.ndarray,
    config: NetConfig,
    mode: str,
    dropout_seed: int,
    want_grads: bool,
    want_input_grad: bool = True,
):
    if config.unit_modulus:
        raise NotImplementedError(
            "the training loss is defined for the sum-power output stage only; "
            "the unit-modulus projection is an evaluation-time option"
        )
    u, cache = forward(params, x, config, mode=mode, dropout_seed=dropout_seed)
    if u.ndim == 2:
        u = u[None]
    rates, ctx = _output_stage(u, h, config)
    m = x.shape[0] if x.ndim == 2 else 1
    loss = -float(rates.sum()) / (config.n_users * m)
    if not want_grads and not want_input_grad:
        return loss, rates, None, None

    du = _output_stage_backward(ctx, -1.0 / (config.n_users * m), config)
    da = _encode_output_grad(du)

    grads: list[BlockGrads] = []
    for blk, d, l in zip(
        reversed(cache["blocks"]), reversed(params.dense), reversed(params.bn)
    ):
        dy = da * blk["mask"] if blk["mask"] is not None else da
        dxhat = dy * l.gamma
        if blk["batch_stats"]:
            mb = dy.shape[0]
            dr = (
                blk["inv"]
                / mb
                * (
                    mb * dxhat
                    - dxhat.sum(axis=0)
                    - blk["xhat"] * np.sum(dxhat * blk["xhat"], axis=0)
                )
            )
        else:
            dr = dxhat * blk["inv"]
        dz = dr * (blk["z"] > 0)
        if want_grads:
            grads.append(
                BlockGrads(
                    dw=blk["a_prev"].T @ dz,
                    db=dz.sum(axis=0),
                    dgamma=np.sum(dy * blk["xhat"], axis=0),
                    dbeta=dy.sum(axis=0),
                )
            )
        da = dz @ d.w.T
    grads.reverse()
    grad_input = da if want_input_grad else None
    return loss, rates, (grads if want_grads else None), grad_input


def batch_loss(
    params: NetParams, batch, config: NetConfig, mode: str = "train", seed: int = 0
) -> float:
    """Negative mean per-user rate over a batch of (csi, true channels)."""
    x, h = _stack_batch(batch)
    loss, _, _, _ = _loss_and_grads(
        params, x, h, config, mode, seed, want_grads=False, want_input_grad=False
    )
    return loss


def backward(
    params: NetParams, batch, config: NetConfig, seed: int = 0, mode: str = "train"
):
    """Exact reverse-mode gradients of batch_loss.

    Returns (grads, grad_input): grads is a list of per-block BlockGrads;
    grad_input is the (M, 2*N_t*N_r) derivative w.r.t. the input entries.
    """
    x, h = _stack_batch(batch)
    _, _, grads, grad_input = _loss_and_grads(
        params, x, h, config, mode, seed, want_grads=True, want_input_grad=True
    )
    return grads, grad_input


def batch_rates(params: NetParams, x: np.ndarray, h: np.ndarray, config: NetConfig):
    """Eval-mode per-sample, per-user rates (M, K) for stacked inputs."""
    u, _ = forward(params, x, config, mode="eval")
    if u.ndim == 2:
        u = u[None]
    if config.unit_modulus:
        # phase-only projection; _output_stage rescales to total power P
        u = np.exp(1j * np.angle(u))
    rates, _ = _output_stage(u, h, config)
    return rates


# ---------------------------------------------------------------------------
# Training


@dataclass(frozen=True)
class TrainSchedule:
    epochs: int
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")


def train(
    params: NetParams, data, config: NetConfig, schedule: TrainSchedule
) -> tuple[NetParams, list[float]]:
    """Plain SGD over (csi, channels) pairs with per-epoch reshuffling.

    Returns updated parameters and the per-epoch mean training loss. The
    input params are not mutated. Raises TrainingDivergedError when a
    batch loss goes non-finite.
    """
    x_all, h_all = _stack_batch(list(data))
    n = x_all.shape[0]
    params = params.copy()
    ss = np.random.SeedSequence(schedule.seed)
    perm_seq, drop_seq = ss.spawn(2)
    perm_rng = np.random.default_rng(perm_seq)
    drop_rng = np.random.default_rng(drop_seq)
    lr = schedule.learning_rate

    full_batch = schedule.batch_size >= n
    history: list[float] = []
    for epoch in range(schedule.epochs):
        # reshuffling only matters when the data spans several batches
        order = np.arange(n) if full_batch else perm_rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, schedule.batch_size):
            idx = order[start : start + schedule.batch_size]
            dropout_seed = int(drop_rng.integers(0, 2**63))
            loss, _, grads, _ = _loss_and_grads(
                params,
                x_all[idx],
                h_all[idx],
                config,
                mode="train",
                dropout_seed=dropout_seed,
                want_grads=True,
                want_input_grad=False,
            )
            if not math.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss {loss} at epoch {epoch}, batch start {start}"
                )
            epoch_loss += loss * idx.size
            if lr:
                for d, l, g in zip(params.dense, params.bn, grads):
                    d.w -= lr * g.dw
                    d.b -= lr * g.db
                    l.gamma -= lr * g.dgamma
                    l.beta -= lr * g.dbeta
        history.append(epoch_loss / n)
    return params, history


# ---------------------------------------------------------------------------
# Checkpoint I/O

CHECKPOINT_MAGIC = b"BNET"
CHECKPOINT_VERSION = 1


def save_checkpoint(path, config: NetConfig, params: NetParams) -> None:
    """Write config echo + all arrays (w, b, gamma, beta, running stats)."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        _binio.write_u32(fh, CHECKPOINT_VERSION)
        _binio.write_u32(fh, config.n_antennas)
        _binio.write_u32(fh, config.n_users)
        _binio.write_u32(fh, config.n_rf_chains)
        _binio.write_u32(fh, len(config.hidden_widths))
        for w in config.hidden_widths:
            _binio.write_u32(fh, w)
        for value in (
            config.dropout_rate,
            config.bn_epsilon,
            config.bn_momentum,
            config.power_p,
            config.noise_var,
        ):
            _binio.write_f64(fh, value)
        fh.write(bytes([1 if config.unit_modulus else 0]))
        for d, l in zip(params.dense, params.bn):
            for arr in (d.w, d.b, l.gamma, l.beta, l.running_mean, l.running_var):
                _binio.write_f64_array(fh, arr)


def load_checkpoint(path) -> tuple[NetConfig, NetParams]:
    with open(path, "rb") as fh:
        _binio.expect_magic(fh, CHECKPOINT_MAGIC)
        _binio.expect_version(fh, CHECKPOINT_VERSION)
        n_antennas = _binio.read_u32(fh)
        n_users = _binio.read_u32(fh)
        n_rf = _binio.read_u32(fh)
        n_blocks = _binio.read_u32(fh)
        widths = tuple(_binio.read_u32(fh) for _ in range(n_blocks))
        dropout_rate = _binio.read_f64(fh)
        bn_epsilon = _binio.read_f64(fh)
        bn_momentum = _binio.read_f64(fh)
        power_p = _binio.read_f64(fh)
        noise_var = _binio.read_f64(fh)
        unit_modulus = bool(_binio.read_exact(fh, 1)[0])
        config = NetConfig(
            n_antennas=n_antennas,
            n_users=n_users,
            n_rf_chains=n_rf,
            hidden_widths=widths,
            dropout_rate=dropout_rate,
            bn_epsilon=bn_epsilon,
            bn_momentum=bn_momentum,
            power_p=power_p,
            noise_var=noise_var,
            unit_modulus=unit_modulus,
        )
        dims = (config.input_dim,) + widths
        dense, bn = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            w = _binio.read_f64_array(fh, (fan_in, fan_out))
            b = _binio.read_f64_array(fh, (fan_out,))
            gamma = _binio.read_f64_array(fh, (fan_out,))
            beta = _binio.read_f64_array(fh, (fan_out,))
            rm = _binio.read_f64_array(fh, (fan_out,))
            rv = _binio.read_f64_array(fh, (fan_out,))
            dense.append(DenseLayer(w=w, b=b))
            bn.append(BatchNormLayer(gamma=gamma, beta=beta, running_mean=rm, running_var=rv))
    return config, NetParams(dense=dense, bn=bn)
