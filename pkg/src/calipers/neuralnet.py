"""Fully connected ReLU networks with manual backpropagation.

The estimator behind the network-based CDF profiles: one small network
per grid point is trained by mini-batch gradient descent on indicator
targets, plus optional networks for the conditional mean and second
moment.  All networks of one fit are trained together by a fused numba
kernel that keeps each model's working set cache-resident; models are
mathematically independent, so the kernel parallelises over them without
affecting results.

Reproducibility contract: every model owns an RNG stream fixed by its
seed alone (weight initialisation, then per-epoch shuffling), so trained
parameters are identical whether models are trained separately, stacked,
or on a different thread count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from .core import CdfProfile, Dataset, Grid, Standardizer

__all__ = [
    "MlpConfig",
    "MlpModel",
    "CdfEnsemble",
    "OptimizerState",
    "TrainingDivergedError",
    "init_network",
    "forward",
    "predict",
    "make_indicators",
    "optimizer_step",
    "loss_gradients",
    "train_mse",
    "train_models",
    "fit_cdf_ensemble",
    "ensemble_profile",
    "ensemble_profiles",
    "ensemble_means",
    "save_model",
    "load_model",
]

OPTIMIZERS = ("sgd", "adam", "rmsprop")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
RMSPROP_DECAY = 0.9
RMSPROP_EPS = 1e-8

_OPT_ID = {"sgd": 0, "adam": 1, "rmsprop": 2}


class TrainingDivergedError(RuntimeError):
    """Mini-batch loss became non-finite during training."""

    def __init__(self, epoch: int, model_index: int):
        super().__init__(
            f"training diverged at epoch {epoch} (model index {model_index})"
        )
        self.epoch = epoch
        self.model_index = model_index


@dataclass(frozen=True)
class MlpConfig:
    """Hyperparameters shared by every network of a fit."""

    layer_widths: tuple[int, ...] = (10, 10)
    lr: float = 1e-3
    batch_size: int = 200
    epochs: int = 2000
    clip: float = 20.0
    optimizer: str = "adam"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "layer_widths", tuple(int(w) for w in self.layer_widths))
        if len(self.layer_widths) < 1 or any(w < 1 for w in self.layer_widths):
            raise ValueError("layer_widths needs at least one hidden layer, all >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.clip <= 0:
            raise ValueError("clip must be positive")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")


@dataclass(frozen=True)
class MlpModel:
    """Trained network: per-layer weight matrices (out, in) and bias vectors."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    config: MlpConfig
    input_dim: int

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.config.layer_widths, 1)


@dataclass(frozen=True)
class CdfEnsemble:
    """One trained network per grid point, plus the optional mean network.

    ``scaler`` is the predictor standardizer fit on the training sample;
    queries pass through it before every forward pass.
    """

    models: tuple[MlpModel, ...]
    grid: Grid
    mean_model: MlpModel | None = None
    scaler: Standardizer | None = None
    # stacked padded parameters of the grid models, kept for fast evaluation
    _stack: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if len(self.models) != len(self.grid):
            raise ValueError("need exactly one model per grid point")


def _init_params(rng: np.random.Generator, dims: tuple[int, ...]):
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases.

    Larger scales (e.g. sqrt(6/fan_in)) measurably slow convergence of the
    indicator regressions at the fixed epoch budget and inflate the
    resulting intervals.
    """
    weights, biases = [], []
    for nin, nout in zip(dims[:-1], dims[1:]):
        lim = 1.0 / np.sqrt(nin)
        weights.append(rng.uniform(-lim, lim, size=(nout, nin)))
        biases.append(np.zeros(nout))
    return weights, biases


def init_network(input_dim: int, config: MlpConfig) -> MlpModel:
    """Fresh network with seeded initial parameters."""
    if input_dim < 1:
        raise ValueError("input_dim must be >= 1")
    rng = np.random.default_rng(config.seed)
    dims = (input_dim, *config.layer_widths, 1)
    weights, biases = _init_params(rng, dims)
    return MlpModel(tuple(weights), tuple(biases), config, input_dim)


def forward(model: MlpModel, x) -> float:
    """Affine-ReLU chain with a linear scalar output, for one input vector."""
    a = np.asarray(x, dtype=np.float64)
    if a.shape != (model.input_dim,):
        raise ValueError(
            f"input has shape {a.shape}, model expects ({model.input_dim},)"
        )
    last = len(model.weights) - 1
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        a = w @ a + b
        if l < last:
            np.maximum(a, 0.0, out=a)
    return float(a[0])


def predict(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Vectorized forward over the rows of ``x``."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != model.input_dim:
        raise ValueError(
            f"input has shape {a.shape}, model expects (*, {model.input_dim})"
        )
    last = len(model.weights) - 1
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        a = a @ w.T + b
        if l < last:
            np.maximum(a, 0.0, out=a)
    return a[:, 0]


def make_indicators(y, q: float) -> np.ndarray:
    """Indicator targets 1(y_i <= q) as floats."""
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise ValueError("response contains non-finite values")
    return (y <= q).astype(np.float64)


# ---------------------------------------------------------------------------
# Public optimizer step (reference semantics for the fused kernel).


@dataclass
class OptimizerState:
    """First/second-moment accumulators and the step counter."""

    step: int
    m: list
    v: list

    @classmethod
    def zeros_like(cls, params) -> "OptimizerState":
        return cls(
            step=0,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )


def optimizer_step(params, grads, state: OptimizerState | None, config: MlpConfig):
    """One update of every parameter array, then clip to [-clip, clip].

    Pure: returns (new_params, new_state).  The training kernel fuses the
    same arithmetic; this entry point exists for direct use and testing.
    """
    if state is None:
        state = OptimizerState.zeros_like(params)
    if len(grads) != len(params):
        raise ValueError("grads do not match params")
    t = state.step + 1
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        p = np.asarray(p, dtype=np.float64)
        g = np.asarray(g, dtype=np.float64)
        if p.shape != g.shape:
            raise ValueError("gradient shape mismatch")
        if config.optimizer == "sgd":
            q = p - config.lr * g
            m2, v2 = m, v
        elif config.optimizer == "adam":
            m2 = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * g
            v2 = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * g * g
            mhat = m2 / (1.0 - ADAM_BETA1**t)
            vhat = v2 / (1.0 - ADAM_BETA2**t)
            q = p - config.lr * mhat / (np.sqrt(vhat) + ADAM_EPS)
        else:  # rmsprop
            v2 = RMSPROP_DECAY * v + (1.0 - RMSPROP_DECAY) * g * g
            q = p - config.lr * g / (np.sqrt(v2) + RMSPROP_EPS)
            m2 = m
        new_params.append(np.clip(q, -config.clip, config.clip))
        new_m.append(m2)
        new_v.append(v2)
    return new_params, OptimizerState(step=t, m=new_m, v=new_v)


# ---------------------------------------------------------------------------
# Fused training kernel.
#
# Parameter layout: padded stacks Wp[l, j, s_in, a_out] and bp[l, j, a_out]
# with mw = max layer width.  Activations are stored features-major
# (unit, sample) so the innermost loops run over the batch and vectorize.

_U_GOLD = np.uint64(0x9E3779B97F4A7C15)
_U_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_U_MIX2 = np.uint64(0x94D049BB133111EB)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)


@njit(parallel=True, fastmath=True, cache=True)
def _epoch_kernel(X, Zt, dims, Wp, bp, mW, vW, mb, vb, Aws, Dws, GW, GB,
                  perm, rstate, losses, lr, clip, opt_id, t0, bsz,
                  do_shuffle, do_update):
    k = Wp.shape[1]
    n = X.shape[0]
    L = dims.shape[0] - 1
    nb = (n + bsz - 1) // bsz
    beta1 = 0.9
    beta2 = 0.999
    aeps = 1e-8
    rho = 0.9
    reps = 1e-8
    for j in prange(k):
        if do_shuffle == 1:
            for i in range(n):
                perm[j, i] = i
            s = rstate[j]
            for i in range(n - 1, 0, -1):
                s = s + _U_GOLD
                z = s
                z = (z ^ (z >> _U30)) * _U_MIX1
                z = (z ^ (z >> _U27)) * _U_MIX2
                z = z ^ (z >> _U31)
                r = np.int64(z % np.uint64(i + 1))
                tmp = perm[j, i]
                perm[j, i] = perm[j, r]
                perm[j, r] = tmp
            rstate[j] = s
        A = Aws[j]
        D = Dws[j]
        d0 = dims[0]
        losses[j] = 0.0
        for bidx in range(nb):
            s0 = bidx * bsz
            s1 = min(s0 + bsz, n)
            bs = s1 - s0
            t = t0 + bidx + 1
            bc1 = 1.0 - beta1**t
            bc2 = 1.0 - beta2**t
            # gather
            for i in range(bs):
                row = perm[j, s0 + i]
                for s_ in range(d0):
                    A[0, s_, i] = X[row, s_]
            # forward
            for l in range(L):
                nin = dims[l]
                nout = dims[l + 1]
                for a in range(nout):
                    bv = bp[l, j, a]
                    for i in range(bs):
                        A[l + 1, a, i] = bv
                for s_ in range(nin):
                    for a in range(nout):
                        w = Wp[l, j, s_, a]
                        for i in range(bs):
                            A[l + 1, a, i] += w * A[l, s_, i]
                if l < L - 1:
                    for a in range(nout):
                        for i in range(bs):
                            if A[l + 1, a, i] < 0.0:
                                A[l + 1, a, i] = 0.0
            # output residuals
            cur = L % 2
            lsum = 0.0
            for i in range(bs):
                r_ = A[L, 0, i] - Zt[j, perm[j, s0 + i]]
                lsum += r_ * r_
                D[cur, 0, i] = 2.0 * r_ / bs
            losses[j] += lsum / n
            # backward
            for l in range(L - 1, -1, -1):
                nin = dims[l]
                nout = dims[l + 1]
                cur = (l + 1) % 2
                nxt = l % 2
                for a in range(nout):
                    acc = 0.0
                    for i in range(bs):
                        acc += D[cur, a, i]
                    GB[j, l, a] = acc
                for s_ in range(nin):
                    for a in range(nout):
                        acc = 0.0
                        for i in range(bs):
                            acc += A[l, s_, i] * D[cur, a, i]
                        GW[j, l, s_, a] = acc
                if l > 0:
                    for s_ in range(nin):
                        for i in range(bs):
                            D[nxt, s_, i] = 0.0
                        for a in range(nout):
                            w = Wp[l, j, s_, a]
                            for i in range(bs):
                                D[nxt, s_, i] += w * D[cur, a, i]
                        for i in range(bs):
                            if A[l, s_, i] <= 0.0:
                                D[nxt, s_, i] = 0.0
            if do_update == 1:
                for l in range(L):
                    nin = dims[l]
                    nout = dims[l + 1]
                    for s_ in range(nin):
                        for a in range(nout):
                            g = GW[j, l, s_, a]
                            if opt_id == 0:
                                w = Wp[l, j, s_, a] - lr * g
                            elif opt_id == 1:
                                m_ = beta1 * mW[l, j, s_, a] + (1.0 - beta1) * g
                                v_ = beta2 * vW[l, j, s_, a] + (1.0 - beta2) * g * g
                                mW[l, j, s_, a] = m_
                                vW[l, j, s_, a] = v_
                                w = Wp[l, j, s_, a] - lr * (m_ / bc1) / (np.sqrt(v_ / bc2) + aeps)
                            else:
                                v_ = rho * vW[l, j, s_, a] + (1.0 - rho) * g * g
                                vW[l, j, s_, a] = v_
                                w = Wp[l, j, s_, a] - lr * g / (np.sqrt(v_) + reps)
                            if w > clip:
                                w = clip
                            elif w < -clip:
                                w = -clip
                            Wp[l, j, s_, a] = w
                    for a in range(nout):
                        g = GB[j, l, a]
                        if opt_id == 0:
                            w = bp[l, j, a] - lr * g
                        elif opt_id == 1:
                            m_ = beta1 * mb[l, j, a] + (1.0 - beta1) * g
                            v_ = beta2 * vb[l, j, a] + (1.0 - beta2) * g * g
                            mb[l, j, a] = m_
                            vb[l, j, a] = v_
                            w = bp[l, j, a] - lr * (m_ / bc1) / (np.sqrt(v_ / bc2) + aeps)
                        else:
                            v_ = rho * vb[l, j, a] + (1.0 - rho) * g * g
                            vb[l, j, a] = v_
                            w = bp[l, j, a] - lr * g / (np.sqrt(v_) + reps)
                        if w > clip:
                            w = clip
                        elif w < -clip:
                            w = -clip
                        bp[l, j, a] = w


class _Stack:
    """Padded parameter stacks for k models of identical architecture."""

    def __init__(self, dims: tuple[int, ...], k: int):
        self.dims = np.asarray(dims, dtype=np.int64)
        self.k = k
        self.mw = int(max(dims))
        L = len(dims) - 1
        self.Wp = np.zeros((L, k, self.mw, self.mw))
        self.bp = np.zeros((L, k, self.mw))

    def load_model(self, j: int, weights, biases) -> None:
        for l, (w, b) in enumerate(zip(weights, biases)):
            nout, nin = w.shape
            self.Wp[l, j, :nin, :nout] = w.T
            self.bp[l, j, :nout] = b

    def extract(self, j: int, config: MlpConfig) -> MlpModel:
        dims = self.dims
        weights, biases = [], []
        for l in range(len(dims) - 1):
            nin, nout = int(dims[l]), int(dims[l + 1])
            weights.append(np.ascontiguousarray(self.Wp[l, j, :nin, :nout].T))
            biases.append(self.bp[l, j, :nout].copy())
        return MlpModel(tuple(weights), tuple(biases), config, int(dims[0]))

    def forward_shared(self, X: np.ndarray) -> np.ndarray:
        """Outputs (k, T) of all models at the shared query rows X (T, d)."""
        dims = self.dims
        L = len(dims) - 1
        a = np.asarray(X, dtype=np.float64)[None, :, :]
        for l in range(L):
            nin, nout = int(dims[l]), int(dims[l + 1])
            a = a @ self.Wp[l][:, :nin, :nout] + self.bp[l][:, None, :nout]
            if l < L - 1:
                np.maximum(a, 0.0, out=a)
        return a[:, :, 0]


def _run_training(x, targets, config: MlpConfig, seeds) -> _Stack:
    """Train len(seeds) models on shared predictors with per-model targets."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    n, d = x.shape
    k = targets.shape[0]
    if targets.shape != (k, n):
        raise ValueError("targets must have one row per model, one column per sample")
    if len(seeds) != k:
        raise ValueError("need one seed per model")
    dims = (d, *config.layer_widths, 1)
    stack = _Stack(dims, k)
    rstate = np.empty(k, dtype=np.uint64)
    for j, seed in enumerate(seeds):
        rng = np.random.default_rng(seed)
        weights, biases = _init_params(rng, dims)
        stack.load_model(j, weights, biases)
        rstate[j] = rng.integers(0, 2**63, dtype=np.uint64)
    L = len(dims) - 1
    mw = stack.mw
    bsz = min(config.batch_size, n)
    nb = (n + bsz - 1) // bsz
    mW = np.zeros_like(stack.Wp)
    vW = np.zeros_like(stack.Wp)
    mb = np.zeros_like(stack.bp)
    vb = np.zeros_like(stack.bp)
    Aws = np.zeros((k, L + 1, mw, bsz))
    Dws = np.zeros((k, 2, mw, bsz))
    GW = np.zeros((k, L, mw, mw))
    GB = np.zeros((k, L, mw))
    perm = np.zeros((k, n), dtype=np.int64)
    losses = np.zeros(k)
    opt_id = _OPT_ID[config.optimizer]
    for epoch in range(config.epochs):
        _epoch_kernel(
            x, targets, stack.dims, stack.Wp, stack.bp, mW, vW, mb, vb,
            Aws, Dws, GW, GB, perm, rstate, losses,
            config.lr, config.clip, opt_id, epoch * nb, bsz, 1, 1,
        )
        if not np.all(np.isfinite(losses)):
            bad = int(np.flatnonzero(~np.isfinite(losses))[0])
            raise TrainingDivergedError(epoch + 1, bad)
    return stack


def train_models(x, targets, config: MlpConfig, seeds) -> list[MlpModel]:
    """Train one model per row of ``targets`` on the shared predictors ``x``.

    ``seeds`` gives each model its full RNG stream (initial weights, then
    epoch shuffles), so any subset trains to identical parameters.
    """
    stack = _run_training(x, targets, config, seeds)
    return [stack.extract(j, config) for j in range(stack.k)]


def train_mse(data: Dataset, z, config: MlpConfig) -> MlpModel:
    """Mini-batch MSE training of a single network on targets ``z``."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (data.n,):
        raise ValueError("targets must match the number of rows")
    return train_models(data.x, z[None, :], config, [config.seed])[0]


def loss_gradients(model: MlpModel, x, z):
    """Full-batch MSE gradients of a model by the training kernel's backprop.

    Returns (grads, loss) with grads ordered [W0, b0, W1, b1, ...] in the
    public (out, in) orientation.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    z = np.ascontiguousarray(z, dtype=np.float64)[None, :]
    n, d = x.shape
    if d != model.input_dim:
        raise ValueError("input dimension mismatch")
    dims = model.dims
    stack = _Stack(dims, 1)
    stack.load_model(0, model.weights, model.biases)
    L = len(dims) - 1
    mw = stack.mw
    mW = np.zeros_like(stack.Wp)
    vW = np.zeros_like(stack.Wp)
    mb = np.zeros_like(stack.bp)
    vb = np.zeros_like(stack.bp)
    Aws = np.zeros((1, L + 1, mw, n))
    Dws = np.zeros((1, 2, mw, n))
    GW = np.zeros((1, L, mw, mw))
    GB = np.zeros((1, L, mw))
    perm = np.arange(n, dtype=np.int64)[None, :].copy()
    rstate = np.zeros(1, dtype=np.uint64)
    losses = np.zeros(1)
    _epoch_kernel(
        x, z, stack.dims, stack.Wp, stack.bp, mW, vW, mb, vb,
        Aws, Dws, GW, GB, perm, rstate, losses,
        model.config.lr, model.config.clip,
        _OPT_ID[model.config.optimizer], 0, n, 0, 0,
    )
    grads = []
    for l in range(L):
        nin, nout = int(dims[l]), int(dims[l + 1])
        grads.append(np.ascontiguousarray(GW[0, l, :nin, :nout].T))
        grads.append(GB[0, l, :nout].copy())
    return grads, float(losses[0])


def fit_cdf_ensemble(
    data: Dataset,
    grid: Grid,
    config: MlpConfig,
    with_mean: bool = True,
    standardize: bool = True,
) -> CdfEnsemble:
    """Indicator-regression ensemble: one network per grid point.

    Every network of the fit runs on the same RNG stream (config.seed):
    common initialization and batch order make the estimation noise of
    adjacent grid points strongly correlated, which the monotonicity
    corrections tolerate far better than independent noise (independent
    streams measurably widen the calibrated intervals).  Each model is
    still reproducible in isolation by train_mse with the same seed.
    Predictors are z-scored by default; the fitted transform rides along
    in the ensemble.
    """
    scaler = Standardizer.fit(data.x) if standardize else Standardizer.identity(data.d)
    xs = scaler.transform(data.x)
    g = len(grid)
    rows = []
    seeds = []
    if with_mean:
        rows.append(np.asarray(data.y, dtype=np.float64))
        seeds.append(config.seed)
    for j in range(g):
        rows.append(make_indicators(data.y, float(grid.points[j])))
        seeds.append(config.seed)
    try:
        stack = _run_training(xs, np.stack(rows), config, seeds)
    except TrainingDivergedError as err:
        offset = 1 if with_mean else 0
        raise TrainingDivergedError(err.epoch, err.model_index - offset) from err
    offset = 1 if with_mean else 0
    mean_model = stack.extract(0, config) if with_mean else None
    models = tuple(stack.extract(offset + j, config) for j in range(g))
    grid_stack = _Stack(stack.dims, g)
    grid_stack.Wp = np.ascontiguousarray(stack.Wp[:, offset:, :, :])
    grid_stack.bp = np.ascontiguousarray(stack.bp[:, offset:, :])
    return CdfEnsemble(
        models=models, grid=grid, mean_model=mean_model, scaler=scaler,
        _stack=(grid_stack,),
    )


def _grid_stack(ens: CdfEnsemble) -> _Stack:
    if ens._stack is not None:
        return ens._stack[0]
    stack = _Stack(ens.models[0].dims, len(ens.models))
    for j, m in enumerate(ens.models):
        stack.load_model(j, m.weights, m.biases)
    object.__setattr__(ens, "_stack", (stack,))
    return stack


def _apply_scaler(ens: CdfEnsemble, x: np.ndarray) -> np.ndarray:
    if ens.scaler is None:
        return np.asarray(x, dtype=np.float64)
    return ens.scaler.transform(x)


def ensemble_profiles(ens: CdfEnsemble, x: np.ndarray) -> np.ndarray:
    """Raw profile values, one row per query: shape (T, g)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != ens.models[0].input_dim:
        raise ValueError("query rows do not match the ensemble input dimension")
    return _grid_stack(ens).forward_shared(_apply_scaler(ens, x)).T


def ensemble_profile(ens: CdfEnsemble, x_f) -> CdfProfile:
    """Uncorrected profile at one query predictor."""
    x_f = np.asarray(x_f, dtype=np.float64)
    values = ensemble_profiles(ens, x_f[None, :])[0]
    return CdfProfile(grid=ens.grid, values=values, corrected=False)


def ensemble_means(ens: CdfEnsemble, x: np.ndarray) -> np.ndarray:
    """Conditional-mean predictions from the mean network."""
    if ens.mean_model is None:
        raise ValueError("ensemble was fit without a mean model")
    return predict(ens.mean_model, _apply_scaler(ens, np.asarray(x, dtype=np.float64)))


# ---------------------------------------------------------------------------
# Text serialization, 17 significant digits (lossless for float64).


def save_model(model: MlpModel, path) -> None:
    cfg = model.config
    lines = [
        "calipers-mlp 1",
        f"input_dim {model.input_dim}",
        "widths " + " ".join(str(w) for w in cfg.layer_widths),
        f"lr {cfg.lr!r}",
        f"batch_size {cfg.batch_size}",
        f"epochs {cfg.epochs}",
        f"clip {cfg.clip!r}",
        f"optimizer {cfg.optimizer}",
        f"seed {cfg.seed}",
    ]
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        lines.append(f"layer {l} {w.shape[0]} {w.shape[1]}")
        for row in w:
            lines.append(" ".join(f"{v:.17g}" for v in row))
        lines.append(" ".join(f"{v:.17g}" for v in b))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> MlpModel:
    with open(path, encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].split() != ["calipers-mlp", "1"]:
        raise ValueError("not a calipers model file")
    header = {}
    idx = 1
    while idx < len(lines) and not lines[idx].startswith("layer "):
        key, _, value = lines[idx].partition(" ")
        header[key] = value
        idx += 1
    config = MlpConfig(
        layer_widths=tuple(int(w) for w in header["widths"].split()),
        lr=float(header["lr"]),
        batch_size=int(header["batch_size"]),
        epochs=int(header["epochs"]),
        clip=float(header["clip"]),
        optimizer=header["optimizer"],
        seed=int(header["seed"]),
    )
    input_dim = int(header["input_dim"])
    weights, biases = [], []
    while idx < len(lines):
        tag, l, nout, nin = lines[idx].split()
        if tag != "layer":
            raise ValueError(f"unexpected line in model file: {lines[idx]!r}")
        nout, nin = int(nout), int(nin)
        rows = [
            [float(v) for v in lines[idx + 1 + r].split()] for r in range(nout)
        ]
        weights.append(np.array(rows, dtype=np.float64))
        biases.append(np.array([float(v) for v in lines[idx + 1 + nout].split()]))
        idx += nout + 2
    return MlpModel(tuple(weights), tuple(biases), config, input_dim)
