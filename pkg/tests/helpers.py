"""Shared test utilities: finite-difference gradient oracle for the networks."""

import numpy as np

from calipers.neuralnet import MlpConfig, MlpModel, loss_gradients, predict

FD_EPS = 1e-5
# Preactivations this close to the ReLU kink would make the central
# difference straddle the nondifferentiable point; such draws are skipped.
KINK_MARGIN = 10 * FD_EPS


def random_model(rng, dims, config=None):
    """Network with all parameters drawn uniform(-1, 1)."""
    config = config or MlpConfig(layer_widths=tuple(dims[1:-1]), seed=0)
    weights = tuple(
        rng.uniform(-1.0, 1.0, size=(o, i)) for i, o in zip(dims[:-1], dims[1:])
    )
    biases = tuple(rng.uniform(-1.0, 1.0, size=o) for o in dims[1:])
    return MlpModel(weights, biases, config, dims[0])


def kink_margin_ok(model, x):
    """True when every hidden preactivation is safely away from zero."""
    a = np.asarray(x, dtype=float)
    last = len(model.weights) - 1
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        pre = a @ w.T + b
        if l < last and np.any(np.abs(pre) < KINK_MARGIN):
            return False
        a = np.maximum(pre, 0.0) if l < last else pre
    return True


def finite_difference_check(model, x, z):
    """Max relative error of backprop against central finite differences."""
    parts = [p for pair in zip(model.weights, model.biases) for p in pair]
    shapes = [p.shape for p in parts]
    flat = np.concatenate([p.ravel() for p in parts])
    grads, _ = loss_gradients(model, x, z)
    gflat = np.concatenate([g.ravel() for g in grads])

    def loss_at(values):
        arrs, idx = [], 0
        for s in shapes:
            size = int(np.prod(s))
            arrs.append(values[idx:idx + size].reshape(s))
            idx += size
        m = MlpModel(tuple(arrs[0::2]), tuple(arrs[1::2]), model.config, model.input_dim)
        return float(np.mean((predict(m, x) - z) ** 2))

    fd = np.empty_like(flat)
    for i in range(flat.size):
        bumped = flat.copy()
        bumped[i] += FD_EPS
        hi = loss_at(bumped)
        bumped[i] -= 2 * FD_EPS
        lo = loss_at(bumped)
        fd[i] = (hi - lo) / (2 * FD_EPS)
    return float(np.max(np.abs(gflat - fd) / np.maximum(np.abs(fd), 1e-6)))
