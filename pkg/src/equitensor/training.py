"""Training engine: scaling schemes, loss, Adam, the training loop, and
the symmetry-error audit metric.

Three affine scaling schemes are supported, all expressible in Mandel
coordinates as x_hat = (x - shift) / scale with per-component vectors:

    component_wise             per-component mean and standard deviation
    tensor_symmetry_preserving shift = m*I, uniform scale s, where m and
                               s are the mean and population standard
                               deviation of the *diagonal* entries across
                               the dataset.  Shifting by a multiple of
                               the identity and scaling uniformly commute
                               with conjugation S -> Q^T S Q, so this
                               scheme preserves a network's equivariance.
    global                     per-component mean shift plus one pooled
                               standard deviation over all components

Models train against outputs scaled by their own scheme; reported
validation losses always map predictions (inverted to physical units)
and targets through a reference *global* scaler fitted on the training
outputs, which makes numbers comparable across model families.

The symmetry error of a model f under a group G is

    eps_sym = (2/N) sum_i ||f(C_i) - R_i f(R_i^T C_i R_i) R_i^T||_F
                          / (||f(C_i)||_F + ||f(R_i^T C_i R_i)||_F)

with C_i = F^T F from random deformations and R_i sampled from G.  It is
zero (to rounding) for equivariant models regardless of training state,
and O(1) for unconstrained baselines.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .networks import (
    ModelSpec,
    RotationWrapper,
    build_model,
    init_params,
    load_model,
    save_model,
)
from .symmetry import SymmetryClass, sample_group_element
from .tensors import (
    dim_of_mandel,
    mandel_identity,
    mandel_rotation,
    mandel_size,
    random_deformation,
    to_mandel,
)

SCALER_KINDS = ("component_wise", "tensor_symmetry_preserving", "global")


class TrainingDivergedError(RuntimeError):
    """Raised when a loss or gradient stops being finite."""


# ---------------------------------------------------------------------------
# scalers
# ---------------------------------------------------------------------------


@dataclass
class Scaler:
    kind: str
    shift: np.ndarray  # (m,)
    scale: np.ndarray  # (m,)

    def apply(self, X):
        return (X - self.shift) / self.scale

    def invert(self, X):
        return X * self.scale + self.shift

    def to_dict(self):
        return {
            "kind": self.kind,
            "shift": [float(v) for v in self.shift],
            "scale": [float(v) for v in self.scale],
        }

    @staticmethod
    def from_dict(d):
        return Scaler(d["kind"], np.asarray(d["shift"]), np.asarray(d["scale"]))


def fit_scaler(kind: str, X: np.ndarray) -> Scaler:
    """Fit a scaler on a dataset array of Mandel vectors (..., m); leading
    axes (samples, steps) are pooled.  Degenerate statistics (zero
    standard deviation) are an error."""
    if kind not in SCALER_KINDS:
        raise ValueError(f"unknown scaler kind {kind!r}")
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        raise ValueError("cannot fit a scaler on an empty dataset")
    m = X.shape[-1]
    flat = X.reshape(-1, m)
    if kind == "component_wise":
        shift = flat.mean(axis=0)
        scale = flat.std(axis=0)
        if np.any(scale == 0.0):
            raise ValueError("zero standard deviation in a component (degenerate dataset)")
    elif kind == "tensor_symmetry_preserving":
        dim = dim_of_mandel(m)
        diag = flat[:, :dim]
        mu = diag.mean()
        s = diag.std()
        if s == 0.0:
            raise ValueError("zero standard deviation of diagonal entries (degenerate dataset)")
        shift = mu * mandel_identity(dim)
        scale = np.full(m, s)
    else:  # global
        shift = flat.mean(axis=0)
        s = np.sqrt(np.mean((flat - shift) ** 2))
        if s == 0.0:
            raise ValueError("zero pooled standard deviation (degenerate dataset)")
        scale = np.full(m, s)
    return Scaler(kind, shift, scale)


def default_scaler_kind(spec: ModelSpec) -> str:
    """Tensor models use the equivariance-preserving scheme; scalar
    baselines use plain per-component standardization."""
    return (
        "tensor_symmetry_preserving"
        if spec.kind.startswith("tensor")
        else "component_wise"
    )


# ---------------------------------------------------------------------------
# loss and optimizer
# ---------------------------------------------------------------------------


def mse_loss(predictions: np.ndarray, targets: np.ndarray) -> float:
    """Mean over samples of the squared Frobenius error; for sequences the
    sum runs over all steps and components of each sample."""
    predictions = np.asarray(predictions, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if predictions.shape != targets.shape:
        raise ValueError(
            f"prediction/target shape mismatch: {predictions.shape} vs {targets.shape}"
        )
    n = predictions.shape[0]
    diff = predictions - targets
    # an overflowing square legitimately signals divergence; callers check
    # the resulting inf rather than relying on the warning
    with np.errstate(over="ignore"):
        return float(np.sum(diff * diff) / n)


def mse_loss_grad(predictions, targets):
    """(loss, d loss / d predictions)."""
    n = predictions.shape[0]
    diff = predictions - targets
    with np.errstate(over="ignore"):
        return float(np.sum(diff * diff) / n), (2.0 / n) * diff


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0


def adam_init(n_params: int) -> AdamState:
    return AdamState(np.zeros(n_params), np.zeros(n_params), 0)


def adam_step(params, grad, state, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """One Adam update with bias correction; returns (params, state)."""
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    return params - lr * m_hat / (np.sqrt(v_hat) + eps), AdamState(m, v, t)


# ---------------------------------------------------------------------------
# trained-model bundle
# ---------------------------------------------------------------------------


@dataclass
class TrainedModel:
    """A model spec plus parameters plus the scalers fitted at training
    time.  `predict` maps physical inputs to physical outputs through the
    full pipeline; ref_scaler is the global scheme fitted on the training
    outputs and defines the comparable validation-loss space."""

    spec: ModelSpec
    params: np.ndarray
    in_scaler: Scaler
    out_scaler: Scaler
    ref_scaler: Scaler

    def __post_init__(self):
        self._model = build_model(self.spec)

    @property
    def model(self):
        return self._model

    def predict(self, X: np.ndarray) -> np.ndarray:
        Y = self._model.forward(self.params, self.in_scaler.apply(X))
        return self.out_scaler.invert(Y)

    def save(self, path):
        extra = {
            "in_scaler": self.in_scaler.to_dict(),
            "out_scaler": self.out_scaler.to_dict(),
            "ref_scaler": self.ref_scaler.to_dict(),
        }
        save_model(path, self.spec, self.params, extra)

    @staticmethod
    def load(path) -> "TrainedModel":
        spec, params, extra = load_model(path)
        try:
            scalers = [
                Scaler.from_dict(extra[k])
                for k in ("in_scaler", "out_scaler", "ref_scaler")
            ]
        except KeyError as e:
            raise ValueError(f"{path}: model file lacks fitted scalers ({e})") from e
        return TrainedModel(spec, params, *scalers)


def validation_loss(tm: TrainedModel, Xval, Yval) -> float:
    """Global-scheme validation loss: predictions in physical units and
    targets are both mapped by the reference global scaler, then MSE."""
    pred = tm.predict(Xval)
    g = tm.ref_scaler
    return mse_loss(g.apply(pred), g.apply(Yval))


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


@dataclass
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 128
    epochs: int | None = None  # None -> 2000 for pairs, 500 for sequences
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    val_fraction: float = 0.2
    in_scaler: str | None = None  # None -> by model family
    out_scaler: str | None = None

    def __post_init__(self):
        for name in ("lr", "batch_size", "beta1", "beta2", "eps", "val_fraction"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.epochs is not None and self.epochs <= 0:
            raise ValueError("epochs must be positive")
        if self.val_fraction >= 1:
            raise ValueError("val_fraction must be < 1")
        for kind in (self.in_scaler, self.out_scaler):
            if kind is not None and kind not in SCALER_KINDS:
                raise ValueError(f"unknown scaler kind {kind!r}")

    def resolved_epochs(self, spec: ModelSpec) -> int:
        if self.epochs is not None:
            return self.epochs
        return 500 if spec.is_sequence else 2000


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    min_val_loss: float


def write_history_csv(path, history: list[EpochRecord]):
    with open(path, "w") as f:
        f.write("epoch,train_loss,val_loss,min_val_loss\n")
        for r in history:
            f.write(
                f"{r.epoch},{r.train_loss:.17g},{r.val_loss:.17g},{r.min_val_loss:.17g}\n"
            )


def train(
    spec: ModelSpec,
    X: np.ndarray,
    Y: np.ndarray,
    config: TrainConfig | None = None,
    Xval: np.ndarray | None = None,
    Yval: np.ndarray | None = None,
):
    """Minibatch Adam training; returns (TrainedModel, history).

    If no validation arrays are given, the tail `val_fraction` of the
    dataset is held out (generators emit i.i.d. samples, so a tail split
    is unbiased).  Scalers are fitted on the training split only.  The
    returned parameters are the snapshot achieving the minimum validation
    loss; history records per-epoch train loss (in the model's own scaled
    space), global-scheme validation loss, and its running minimum.
    """
    config = config or TrainConfig()
    if (Xval is None) != (Yval is None):
        raise ValueError("provide both Xval and Yval or neither")
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape[0] != Y.shape[0]:
        raise ValueError("input/output sample counts differ")
    if Xval is None:
        n_val = int(round(config.val_fraction * X.shape[0]))
        if n_val < 1 or n_val >= X.shape[0]:
            raise ValueError("validation split is empty or swallows the dataset")
        Xval, Yval = X[-n_val:], Y[-n_val:]
        X, Y = X[:-n_val], Y[:-n_val]

    model = build_model(spec)
    in_scaler = fit_scaler(config.in_scaler or default_scaler_kind(spec), X)
    out_scaler = fit_scaler(config.out_scaler or default_scaler_kind(spec), Y)
    ref_scaler = fit_scaler("global", Y)
    Xs, Ys = in_scaler.apply(X), out_scaler.apply(Y)

    params = init_params(model, np.random.default_rng(config.seed))
    state = adam_init(params.size)
    shuffle_rng = np.random.default_rng([config.seed, 1])
    has_penalty = isinstance(model, RotationWrapper) and spec.dim == 3

    n = Xs.shape[0]
    epochs = config.resolved_epochs(spec)
    history: list[EpochRecord] = []
    best_val = np.inf
    best_params = params.copy()

    for epoch in range(epochs):
        perm = shuffle_rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            pred, cache = model.forward_cached(params, Xs[idx])
            loss, gpred = mse_loss_grad(pred, Ys[idx])
            grad, _ = model.backward(params, cache, gpred)
            if has_penalty:
                pval, pgrad = model.penalty(params)
                loss += pval
                grad += pgrad
            if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                raise TrainingDivergedError(
                    f"non-finite loss or gradient at epoch {epoch + 1}"
                )
            total += loss * idx.size
            params, state = adam_step(
                params, grad, state, config.lr, config.beta1, config.beta2, config.eps
            )
        train_loss = total / n
        tm = TrainedModel(spec, params, in_scaler, out_scaler, ref_scaler)
        val_loss = validation_loss(tm, Xval, Yval)
        if not np.isfinite(val_loss):
            raise TrainingDivergedError(
                f"non-finite validation loss at epoch {epoch + 1}"
            )
        if val_loss < best_val:
            best_val = val_loss
            best_params = params.copy()
        history.append(EpochRecord(epoch + 1, train_loss, val_loss, best_val))

    return (
        TrainedModel(spec, best_params, in_scaler, out_scaler, ref_scaler),
        history,
    )


# ---------------------------------------------------------------------------
# symmetry audit
# ---------------------------------------------------------------------------


def symmetry_error(
    tm: TrainedModel,
    sym_class: SymmetryClass,
    n_samples: int = 200,
    rng: np.random.Generator | None = None,
    seq_len: int = 10,
) -> float:
    """eps_sym over n_samples random inputs and group elements; the model
    runs through its full scaling pipeline.  Sequence models are audited
    on sequences of seq_len independent random inputs, rotated by one
    group element per sample, with Frobenius norms over the whole
    sequence."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = rng if rng is not None else np.random.default_rng()
    dim = tm.spec.dim
    m = mandel_size(dim)
    seq = tm.spec.is_sequence
    n_draws = n_samples * (seq_len if seq else 1)

    C = np.empty((n_draws, m))
    for i in range(n_draws):
        F = random_deformation(dim, rng=rng)
        C[i] = to_mandel(F.T @ F)
    X = C.reshape(n_samples, seq_len, m) if seq else C
    A = np.stack(
        [mandel_rotation(sample_group_element(sym_class, rng)) for _ in range(n_samples)]
    )  # A(R): v -> mandel(R^T S R)
    X_rot = np.einsum("nab,n...b->n...a", A, X)

    f1 = tm.predict(X)
    f2 = tm.predict(X_rot)
    back = np.einsum("nba,n...b->n...a", A, f2)  # mandel(R S R^T) = A(R)^T f2
    axes = tuple(range(1, f1.ndim))
    num = np.sqrt(np.sum((f1 - back) ** 2, axis=axes))
    den = np.sqrt(np.sum(f1**2, axis=axes)) + np.sqrt(np.sum(f2**2, axis=axes))
    keep = den >= 1e-30
    return float(2.0 * np.sum(num[keep] / den[keep]) / n_samples)
