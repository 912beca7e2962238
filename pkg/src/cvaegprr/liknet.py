"""Heteroscedastic MLP likelihood model with hand-rolled backprop and Adam.

The network maps a concatenated input (latent sample, physical point,
parameters) through ReLU hidden layers to a pair (mean, raw variance); the
raw variance passes through an overflow-safe softplus so predicted
variances are always positive.  Training minimizes the Monte-Carlo Gaussian
negative log likelihood

    mean over records of 1/2 [ (u - mu)^2 / sigma^2 + log(2 pi sigma^2) ],

with one fresh latent draw per record per pass over the data.

A "field" head variant takes (latent sample, parameters) only and emits all
M grid values at once (M means plus M raw variances); its loss sums the
Gaussian terms across the grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .dataset import SnapshotSet
from .recognition import LatentRecognition, posterior_at

__all__ = [
    "MlpArchitecture",
    "LikelihoodNet",
    "Scaler",
    "TrainConfig",
    "TrainResult",
    "TrainingDivergedError",
    "softplus",
    "fit_scaler",
    "init_net",
    "forward",
    "forward_field",
    "raw_outputs",
    "nll_loss",
    "train",
    "train_discrete",
]

LOG_2PI = float(np.log(2.0 * np.pi))


class TrainingDivergedError(RuntimeError):
    """The training loss became non-finite."""


def softplus(x):
    """log(1 + exp(x)), computed without overflow for large |x|.

    Floored at the smallest positive normal float so deeply negative raw
    outputs cannot underflow the variance to exactly zero.
    """
    return np.maximum(np.logaddexp(0.0, x), np.finfo(np.float64).tiny)


@dataclass(frozen=True)
class MlpArchitecture:
    input_dim: int
    hidden: tuple[int, ...]
    output_dim: int

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(w) for w in self.hidden))
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("input and output dimensions must be positive")
        if len(self.hidden) < 1 or any(w < 1 for w in self.hidden):
            raise ValueError("need at least one hidden layer of positive width")

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.input_dim,) + self.hidden + (self.output_dim,)


@dataclass(frozen=True)
class Scaler:
    """Per-feature affine normalization; constant features pass unchanged."""

    shift: np.ndarray
    scale: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.shift) / self.scale

    def invert(self, x: np.ndarray) -> np.ndarray:
        return x * self.scale + self.shift


def fit_scaler(x: np.ndarray) -> Scaler:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    constant = x.max(axis=0) == x.min(axis=0)
    shift = np.where(constant, 0.0, x.mean(axis=0))
    scale = np.where(constant, 1.0, x.std(axis=0))
    return Scaler(shift, scale)


class LikelihoodNet:
    """ReLU MLP parameters plus the head convention.

    ``head`` is "scalar" (outputs: mean, raw variance) or "field" (outputs:
    M means then M raw variances).  ``scaler`` holds the input normalization
    fitted during training; the forward functions below operate on raw
    inputs and leave applying the scaler to the caller.

    Training internally standardizes the response targets (it conditions
    the heteroscedastic loss badly not to); ``target_shift``/``target_scale``
    record that affine map so prediction can restore original units: the
    mean maps as mu * scale + shift and the variance as sigma^2 * scale^2.
    """

    target_shift: float = 0.0
    target_scale: float = 1.0

    def __init__(self, arch: MlpArchitecture, weights, biases,
                 head: str = "scalar", scaler: Scaler | None = None):
        if head not in ("scalar", "field"):
            raise ValueError("head must be 'scalar' or 'field'")
        if head == "scalar" and arch.output_dim != 2:
            raise ValueError("scalar head requires output_dim == 2")
        if head == "field" and arch.output_dim % 2 != 0:
            raise ValueError("field head requires an even output_dim (means + raw variances)")
        dims = arch.layer_dims
        self.arch = arch
        self.head = head
        self.scaler = scaler
        self.weights = [np.array(w, dtype=np.float64) for w in weights]
        self.biases = [np.array(b, dtype=np.float64) for b in biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[i], dims[i + 1]) or b.shape != (dims[i + 1],):
                raise ValueError(f"layer {i} parameter shapes do not match the architecture")

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self):
        return self.weights + self.biases


def init_net(arch: MlpArchitecture, seed: int, head: str = "scalar") -> LikelihoodNet:
    """He-style initialization: W ~ N(0, 2/fan_in), zero biases."""
    rng = np.random.default_rng(seed)
    dims = arch.layer_dims
    weights = [rng.normal(0.0, np.sqrt(2.0 / dims[i]), size=(dims[i], dims[i + 1]))
               for i in range(len(dims) - 1)]
    biases = [np.zeros(dims[i + 1]) for i in range(len(dims) - 1)]
    return LikelihoodNet(arch, weights, biases, head=head)


def _forward_cached(net: LikelihoodNet, x: np.ndarray):
    acts = [x]
    masks = []
    a = x
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        s = a @ w + b
        mask = s > 0
        a = s * mask
        acts.append(a)
        masks.append(mask)
    out = a @ net.weights[-1] + net.biases[-1]
    return out, acts, masks


def raw_outputs(net: LikelihoodNet, x: np.ndarray) -> np.ndarray:
    """Network outputs before the softplus transform, for a batch of rows."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != net.arch.input_dim:
        raise ValueError(f"inputs have {x.shape[1]} features, net expects {net.arch.input_dim}")
    out, _, _ = _forward_cached(net, x)
    return out


def forward(net: LikelihoodNet, z, x, xi) -> tuple[float, float]:
    """Scalar-head forward pass on one raw record: (mean, variance)."""
    row = np.concatenate([np.ravel(z), np.ravel(x), np.ravel(xi)]).astype(np.float64)
    out = raw_outputs(net, row[None, :])[0]
    return float(out[0]), float(softplus(out[1]))


def forward_field(net: LikelihoodNet, z, xi) -> tuple[np.ndarray, np.ndarray]:
    """Field-head forward pass: per-node means and variances."""
    row = np.concatenate([np.ravel(z), np.ravel(xi)]).astype(np.float64)
    out = raw_outputs(net, row[None, :])[0]
    m = out.shape[0] // 2
    return out[:m], softplus(out[m:])


def _scalar_head_loss(out: np.ndarray, u: np.ndarray):
    mu, raw = out[:, 0], out[:, 1]
    s2 = softplus(raw)
    diff = mu - u
    loss = 0.5 * float(np.mean(diff**2 / s2 + np.log(s2) + LOG_2PI))
    n = out.shape[0]
    d_mu = diff / s2 / n
    d_s2 = 0.5 * (1.0 / s2 - diff**2 / s2**2) / n
    return loss, np.column_stack([d_mu, d_s2 * expit(raw)])


def _field_head_loss(out: np.ndarray, u: np.ndarray):
    m = out.shape[1] // 2
    mu, raw = out[:, :m], out[:, m:]
    s2 = softplus(raw)
    diff = mu - u
    per_record = 0.5 * (diff**2 / s2 + np.log(s2) + LOG_2PI).sum(axis=1)
    loss = float(per_record.mean())
    n = out.shape[0]
    d_mu = diff / s2 / n
    d_s2 = 0.5 * (1.0 / s2 - diff**2 / s2**2) / n
    return loss, np.concatenate([d_mu, d_s2 * expit(raw)], axis=1)


def _loss_and_grads(net: LikelihoodNet, x: np.ndarray, u: np.ndarray):
    out, acts, masks = _forward_cached(net, x)
    if net.head == "scalar":
        loss, g = _scalar_head_loss(out, u)
    else:
        loss, g = _field_head_loss(out, u)
    n_layers = net.n_layers
    grads_w = [None] * n_layers
    grads_b = [None] * n_layers
    grads_w[-1] = acts[-1].T @ g
    grads_b[-1] = g.sum(axis=0)
    g = g @ net.weights[-1].T
    for layer in range(n_layers - 2, -1, -1):
        g = g * masks[layer]
        grads_w[layer] = acts[layer].T @ g
        grads_b[layer] = g.sum(axis=0)
        if layer > 0:
            g = g @ net.weights[layer].T
    return loss, grads_w, grads_b


def nll_loss(net: LikelihoodNet, z, x, xi, u) -> float:
    """Mean Gaussian negative log likelihood of a raw scalar-head batch."""
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    xi = np.atleast_2d(np.asarray(xi, dtype=np.float64))
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    if not (z.shape[0] == x.shape[0] == xi.shape[0] == u.shape[0] >= 1):
        raise ValueError("batch parts must share a nonempty leading dimension")
    feats = np.hstack([z, x, xi])
    out = raw_outputs(net, feats)
    loss, _ = _scalar_head_loss(out, u)
    return loss


@dataclass(frozen=True)
class TrainConfig:
    """Adam settings and the staged learning-rate schedule.

    ``lr_stages`` pairs a learning rate with a duration; ``schedule_unit``
    says whether durations count epochs (full passes) or iterations
    (minibatch updates).  ``n_mc`` is the number of fresh latent draws per
    record per pass.
    """

    lr_stages: tuple[tuple[float, int], ...] = ((1e-3, 100), (1e-4, 50), (1e-5, 50))
    schedule_unit: str = "epoch"
    batch_size: int = 1000
    n_mc: int = 1
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    log_every: int = 100

    def __post_init__(self):
        stages = tuple((float(lr), int(n)) for lr, n in self.lr_stages)
        object.__setattr__(self, "lr_stages", stages)
        if not stages or any(lr <= 0 or n < 1 for lr, n in stages):
            raise ValueError("lr_stages must be nonempty with positive rates and counts")
        if self.schedule_unit not in ("epoch", "iteration"):
            raise ValueError("schedule_unit must be 'epoch' or 'iteration'")
        if self.batch_size < 1 or self.n_mc < 1 or self.log_every < 1:
            raise ValueError("batch_size, n_mc and log_every must be positive")


@dataclass
class TrainResult:
    net: LikelihoodNet
    history: np.ndarray  # (n_records, 2): iteration, minibatch loss


class _Adam:
    def __init__(self, params, beta1, beta2, eps):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads, lr):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _run_training(net, static_raw, draw_z, targets, cfg: TrainConfig) -> TrainResult:
    """Shared loop: fresh z per record per pass, minibatch Adam, staged lr."""
    rng = np.random.default_rng(cfg.seed)
    n_records = static_raw.shape[0]
    targets = np.asarray(targets, dtype=np.float64)

    # standardize targets for training; predictions undo this affine map
    t_shift = float(targets.mean())
    t_scale = float(targets.std())
    if t_scale == 0.0:
        t_shift, t_scale = 0.0, 1.0
    net.target_shift, net.target_scale = t_shift, t_scale
    targets = (targets - t_shift) / t_scale

    if cfg.n_mc > 1:
        static_rep = np.tile(static_raw, (cfg.n_mc, 1))
        targets_rep = np.tile(targets, (cfg.n_mc,) + (1,) * (targets.ndim - 1))
    else:
        static_rep, targets_rep = static_raw, targets

    # normalize the physical/parameter features; latent coordinates keep
    # their natural scale so trailing (near-noise) coordinates stay small
    z0 = draw_z(rng)
    k = z0.shape[1]
    fitted = fit_scaler(np.hstack([z0, static_raw]))
    shift = fitted.shift.copy()
    scale = fitted.scale.copy()
    shift[:k] = 0.0
    scale[:k] = 1.0
    net.scaler = Scaler(shift, scale)

    if cfg.schedule_unit == "epoch":
        pass_rates = [lr for lr, n in cfg.lr_stages for _ in range(n)]
        total_iters = None
    else:
        pass_rates = None
        bounds = np.cumsum([n for _, n in cfg.lr_stages])
        rates = np.array([lr for lr, _ in cfg.lr_stages])
        total_iters = int(bounds[-1])

    params = net.parameters()
    adam = _Adam(params, cfg.beta1, cfg.beta2, cfg.eps)
    history = []
    t = 0
    epoch = 0
    n_eff = n_records * cfg.n_mc
    while True:
        if pass_rates is not None and epoch >= len(pass_rates):
            break
        if total_iters is not None and t >= total_iters:
            break
        z = np.concatenate([draw_z(rng) for _ in range(cfg.n_mc)], axis=0)
        feats = net.scaler.apply(np.hstack([z, static_rep]))
        order = rng.permutation(n_eff)
        for start in range(0, n_eff, cfg.batch_size):
            if total_iters is not None and t >= total_iters:
                break
            idx = order[start : start + cfg.batch_size]
            loss, grads_w, grads_b = _loss_and_grads(net, feats[idx], targets_rep[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at iteration {t + 1} (epoch {epoch + 1})")
            if pass_rates is not None:
                lr = pass_rates[epoch]
            else:
                lr = float(rates[np.searchsorted(bounds, t, side="right")])
            adam.step(params, grads_w + grads_b, lr)
            t += 1
            if t % cfg.log_every == 0:
                history.append((t, loss))
        epoch += 1
    if not history or history[-1][0] != t:
        # always record the final state
        loss, _, _ = _loss_and_grads(net, feats[order[: cfg.batch_size]], targets_rep[order[: cfg.batch_size]])
        history.append((t, loss))
    return TrainResult(net, np.array(history, dtype=np.float64))


def train(net: LikelihoodNet, data: SnapshotSet, recog: LatentRecognition,
          cfg: TrainConfig) -> TrainResult:
    """Train the scalar head on the flattened (parameter, point, value) records.

    Each snapshot contributes one record per grid node; every pass draws a
    fresh latent sample per record from the recognition posterior at that
    record's parameters.
    """
    if net.head != "scalar":
        raise ValueError("train() expects a scalar-head net")
    if not np.array_equal(recog.models[0].train_inputs, data.params.samples):
        raise ValueError("recognition model was not fitted on these training parameters")
    d_snap, m_pts = data.values.shape
    k = recog.k
    dim_expected = k + data.grid.dim + data.params.dim
    if net.arch.input_dim != dim_expected:
        raise ValueError(f"net expects {net.arch.input_dim} inputs, records have {dim_expected}")

    post = posterior_at(recog, data.params)
    mean_rep = np.repeat(post.mean, m_pts, axis=0)
    sd_rep = np.repeat(np.sqrt(post.variance), m_pts, axis=0)
    static = np.hstack([
        np.tile(data.grid.points, (d_snap, 1)),
        np.repeat(data.params.samples, m_pts, axis=0),
    ])
    targets = data.values.ravel()

    def draw_z(rng):
        return mean_rep + sd_rep * rng.standard_normal(mean_rep.shape)

    return _run_training(net, static, draw_z, targets, cfg)


def train_discrete(net: LikelihoodNet, data: SnapshotSet, recog: LatentRecognition,
                   cfg: TrainConfig) -> TrainResult:
    """Train the field head: one record per snapshot, all grid values at once."""
    if net.head != "field":
        raise ValueError("train_discrete() expects a field-head net")
    if not np.array_equal(recog.models[0].train_inputs, data.params.samples):
        raise ValueError("recognition model was not fitted on these training parameters")
    k = recog.k
    if net.arch.input_dim != k + data.params.dim:
        raise ValueError("net input dimension must equal k + parameter dimension")
    if net.arch.output_dim != 2 * data.n_points:
        raise ValueError("net output dimension must equal twice the grid size")

    post = posterior_at(recog, data.params)
    sd = np.sqrt(post.variance)

    def draw_z(rng):
        return post.mean + sd * rng.standard_normal(post.mean.shape)

    return _run_training(net, data.params.samples, draw_z, data.values, cfg)
