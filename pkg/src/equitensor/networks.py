"""Network architectures and hand-written reverse-mode gradients.

Four model kinds share a common interface:

    tensor-ff    feedforward network over symmetric-tensor features whose
                 weight/bias subspaces enforce exact group equivariance
    tensor-gru   recurrent (GRU) variant for sequence data; gates are
                 scalars computed from traces, so they are group-invariant
    scalar-mlp   plain MLP over the flattened Mandel components (baseline)
    scalar-gru   plain GRU over Mandel components (baseline)

Every model exposes `init`, `forward`, `forward_cached` and `backward`.
Parameters live in one flat float64 vector; `ParamLayout` maps named
blocks to views into it, and gradients come back as a flat vector in the
same order.  The backward passes are hand-written adjoints of the few
primitives involved (Mandel contractions, traces, the eigenvalue
activation, gate arithmetic); there is no tape.

A `RotationWrapper` composes any inner model with a learnable change of
symmetry frame: y = R f(R^T x R) R^T, parameterized by an angle (d=2) or
a quaternion (d=3).  It is used to discover the symmetry basis of data
expressed in an unknown rotated frame.

Tensor-feature layers compute (with : the double contraction)

    h_i = Phi(sigma)( sum_j W_ij : x_j + b_i )

where each W_ij is a linear combination of the symmetry class's weight
basis and each b_i of its bias basis, so equivariance holds for any
parameter values, before and after training.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .activations import (
    apply_tensorial_cached,
    get_activation,
    vjp_from_cache,
)
from .symmetry import SymmetryClass, bias_basis, weight_basis
from .tensors import (
    mandel_rotation,
    mandel_rotation_tangent,
    mandel_size,
    quat_rotation_jacobian,
    rotation_2d,
)

MODEL_KINDS = ("tensor-ff", "tensor-gru", "scalar-mlp", "scalar-gru")

MODEL_FILE_MAGIC = b"EQTN"
MODEL_FILE_VERSION = 1


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description.

    hidden are the feature counts of the hidden layers, e.g. (23, 23) for
    a two-hidden-layer network of width 23; an empty tuple gives a single
    linear layer (feedforward kinds only).  Tensor models map one input
    tensor feature to one output tensor feature; scalar baselines consume
    and emit the d(d+1)/2 Mandel components.  The output layer never
    applies an activation (stress-like outputs are unbounded).
    """

    kind: str
    dim: int
    hidden: tuple[int, ...]
    sym_class: str = "isotropic"
    activation: str = "tanh"
    rotation: bool = False
    penalty_weight: float = 1e-2

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if any(int(h) <= 0 for h in self.hidden):
            raise ValueError(f"invalid hidden widths {self.hidden!r}")
        if not self.hidden and self.kind.endswith("gru"):
            raise ValueError("recurrent models need at least one hidden layer")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        # fail early on bad names
        get_activation(self.activation)
        if self.kind.startswith("tensor"):
            SymmetryClass(self.sym_class, self.dim)

    @property
    def is_sequence(self) -> bool:
        return self.kind.endswith("gru")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @staticmethod
    def from_dict(d: dict) -> "ModelSpec":
        d = dict(d)
        d["hidden"] = tuple(d["hidden"])
        return ModelSpec(**d)


class ParamLayout:
    """Named blocks inside one flat parameter vector."""

    def __init__(self, entries: list[tuple[str, tuple[int, ...]]]):
        self.entries = list(entries)
        self.offsets = {}
        n = 0
        for name, shape in self.entries:
            size = int(np.prod(shape))
            self.offsets[name] = (n, shape)
            n += size
        self.n_params = n

    def view(self, flat: np.ndarray, name: str) -> np.ndarray:
        off, shape = self.offsets[name]
        return flat[off : off + int(np.prod(shape))].reshape(shape)

    def views(self, flat: np.ndarray) -> dict[str, np.ndarray]:
        return {name: self.view(flat, name) for name, _ in self.entries}


def _uniform_nonzero(rng, scale, shape, floor_frac=1e-3):
    """Uniform(-scale, scale) draws, resampled while any magnitude falls
    below floor_frac*scale (or is exactly zero): eigendecomposition
    gradients misbehave when parameters start at zero."""
    out = rng.uniform(-scale, scale, size=shape)
    floor = floor_frac * scale
    while True:
        mask = (np.abs(out) < floor) | (out == 0.0)
        k = int(mask.sum())
        if k == 0:
            return out
        out[mask] = rng.uniform(-scale, scale, size=k)


# ---------------------------------------------------------------------------
# feedforward over tensor features
# ---------------------------------------------------------------------------


class TensorFFN:
    def __init__(self, spec: ModelSpec):
        self.spec = spec
        cls = SymmetryClass(spec.sym_class, spec.dim)
        self.wb = weight_basis(cls)
        self.bb = bias_basis(cls)
        self.wb2 = self.wb.reshape(len(self.wb), -1)
        self.m = mandel_size(spec.dim)
        self.act = get_activation(spec.activation)
        self.widths = (1,) + spec.hidden + (1,)
        kw, kb = len(self.wb), len(self.bb)
        entries = []
        for l in range(len(self.widths) - 1):
            ni, no = self.widths[l], self.widths[l + 1]
            entries.append((f"layer{l}.W", (no, ni, kw)))
            entries.append((f"layer{l}.b", (no, kb)))
        self.layout = ParamLayout(entries)

    def init(self, rng: np.random.Generator) -> np.ndarray:
        flat = np.empty(self.layout.n_params)
        kw = len(self.wb)
        for l in range(len(self.widths) - 1):
            ni, no = self.widths[l], self.widths[l + 1]
            scale = np.sqrt(6.0 / (kw * (ni + no)))
            self.layout.view(flat, f"layer{l}.W")[:] = _uniform_nonzero(
                rng, scale, (no, ni, kw)
            )
            self.layout.view(flat, f"layer{l}.b")[:] = _uniform_nonzero(
                rng, 0.1, self.layout.offsets[f"layer{l}.b"][1], floor_frac=0.0
            )
        return flat

    def forward(self, params, X):
        return self.forward_cached(params, X)[0]

    def forward_cached(self, params, X):
        # Features are kept flattened as (batch, n*m); each layer's block
        # matrix W2 has the (o*m, i*m) layout so the contraction over input
        # features and Mandel components is a single BLAS matmul.
        m = self.m
        p = X.shape[0]
        x2 = X
        n_layers = len(self.widths) - 1
        caches = []
        for l in range(n_layers):
            Wc = self.layout.view(params, f"layer{l}.W")
            bc = self.layout.view(params, f"layer{l}.b")
            o, i, _ = Wc.shape
            Wm = (Wc.reshape(o * i, -1) @ self.wb2).reshape(o, i, m, m)
            W2 = Wm.transpose(0, 2, 1, 3).reshape(o * m, i * m)
            z = (x2 @ W2.T).reshape(p, o, m) + bc @ self.bb
            if l < n_layers - 1:
                h, ec = apply_tensorial_cached(self.act, z)
            else:
                h, ec = z, None
            caches.append((x2, W2, ec))
            x2 = h.reshape(p, o * m)
        return x2, caches

    def backward(self, params, caches, gY, need_input_grad=False):
        m = self.m
        p = gY.shape[0]
        grad = np.zeros(self.layout.n_params)
        g = gY.reshape(p, 1, m)
        for l in reversed(range(len(caches))):
            x2, W2, ec = caches[l]
            gz = g if ec is None else vjp_from_cache(self.act, ec, g)
            o = gz.shape[1]
            i = x2.shape[1] // m
            gz2 = gz.reshape(p, o * m)
            gW2 = gz2.T @ x2
            gWm = gW2.reshape(o, m, i, m).transpose(0, 2, 1, 3).reshape(o * i, -1)
            self.layout.view(grad, f"layer{l}.W")[:] = (
                gWm @ self.wb2.T
            ).reshape(o, i, -1)
            self.layout.view(grad, f"layer{l}.b")[:] = gz.sum(axis=0) @ self.bb.T
            if l > 0 or need_input_grad:
                g = (gz2 @ W2).reshape(p, i, m)
        return grad, (g.reshape(p, m) if need_input_grad else None)


# ---------------------------------------------------------------------------
# scalar-feature MLP baseline
# ---------------------------------------------------------------------------


class ScalarMLP:
    def __init__(self, spec: ModelSpec):
        self.spec = spec
        m = mandel_size(spec.dim)
        self.widths = (m,) + spec.hidden + (m,)
        entries = []
        for l in range(len(self.widths) - 1):
            ni, no = self.widths[l], self.widths[l + 1]
            entries.append((f"layer{l}.W", (no, ni)))
            entries.append((f"layer{l}.b", (no,)))
        self.layout = ParamLayout(entries)

    def init(self, rng):
        flat = np.empty(self.layout.n_params)
        for l in range(len(self.widths) - 1):
            ni, no = self.widths[l], self.widths[l + 1]
            scale = np.sqrt(6.0 / (ni + no))
            self.layout.view(flat, f"layer{l}.W")[:] = _uniform_nonzero(
                rng, scale, (no, ni)
            )
            self.layout.view(flat, f"layer{l}.b")[:] = _uniform_nonzero(
                rng, 0.1, (no,), floor_frac=0.0
            )
        return flat

    def forward(self, params, X):
        return self.forward_cached(params, X)[0]

    def forward_cached(self, params, X):
        x = X
        n_layers = len(self.widths) - 1
        caches = []
        for l in range(n_layers):
            W = self.layout.view(params, f"layer{l}.W")
            b = self.layout.view(params, f"layer{l}.b")
            z = x @ W.T + b
            t = np.tanh(z) if l < n_layers - 1 else z
            caches.append((x, t if l < n_layers - 1 else None))
            x = t
        return x, caches

    def backward(self, params, caches, gY, need_input_grad=False):
        grad = np.zeros(self.layout.n_params)
        g = gY
        for l in reversed(range(len(caches))):
            x, t = caches[l]
            gz = g if t is None else g * (1.0 - t * t)
            self.layout.view(grad, f"layer{l}.W")[:] = gz.T @ x
            self.layout.view(grad, f"layer{l}.b")[:] = gz.sum(axis=0)
            if l > 0 or need_input_grad:
                g = gz @ self.layout.view(params, f"layer{l}.W")
        return grad, (g if need_input_grad else None)


# ---------------------------------------------------------------------------
# recurrent cells
# ---------------------------------------------------------------------------


def _logistic(t):
    return 0.5 * (1.0 + np.tanh(0.5 * t))


class TensorGRU:
    """Stacked GRU layers over tensor features plus a dense output layer.

    Per layer and step, with x the inputs and h' the previous hidden
    features (r, z are vectors of scalars; Phi applies tanh to
    eigenvalues; tr(w x) is the Mandel dot product):

        r_i = logistic( sum_j tr(w^ir_ij x_j) + sum_j tr(w^hr_ij h'_j) + b^r_i )
        z_i = logistic( sum_j tr(w^iz_ij x_j) + sum_j tr(w^hz_ij h'_j) + b^z_i )
        hhat_i = Phi(tanh)( sum_j W^ih_ij : x_j + b^ih_i
                            + r_i (sum_j W^hh_ij : h'_j + b^hh_i) )
        h_i = (1 - z_i) hhat_i + z_i h'_i

    Tensor weights W live in the equivariant weight subspace; the gate
    matrix weights w and the tensor biases b live in the invariant bias
    subspace, which makes r and z invariant and h equivariant under a
    simultaneous rotation of x and h'.
    """

    GATE_BLOCKS = ("wir", "whr", "wiz", "whz")

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        cls = SymmetryClass(spec.sym_class, spec.dim)
        self.wb = weight_basis(cls)
        self.bb = bias_basis(cls)
        self.wb2 = self.wb.reshape(len(self.wb), -1)
        self.m = mandel_size(spec.dim)
        self.psi = get_activation("tanh")
        self.sizes = (1,) + spec.hidden  # GRU layer feature counts
        kw, kb = len(self.wb), len(self.bb)
        entries = []
        for l in range(len(self.sizes) - 1):
            ni, no = self.sizes[l], self.sizes[l + 1]
            entries += [
                (f"gru{l}.Wih", (no, ni, kw)),
                (f"gru{l}.Whh", (no, no, kw)),
                (f"gru{l}.bih", (no, kb)),
                (f"gru{l}.bhh", (no, kb)),
                (f"gru{l}.wir", (no, ni, kb)),
                (f"gru{l}.whr", (no, no, kb)),
                (f"gru{l}.br", (no,)),
                (f"gru{l}.wiz", (no, ni, kb)),
                (f"gru{l}.whz", (no, no, kb)),
                (f"gru{l}.bz", (no,)),
            ]
        entries += [
            ("out.W", (1, self.sizes[-1], kw)),
            ("out.b", (1, kb)),
        ]
        self.layout = ParamLayout(entries)

    def init(self, rng):
        kw, kb = len(self.wb), len(self.bb)
        flat = np.empty(self.layout.n_params)
        for l in range(len(self.sizes) - 1):
            ni, no = self.sizes[l], self.sizes[l + 1]
            for name, fan, k in (
                ("Wih", ni + no, kw),
                ("Whh", 2 * no, kw),
                ("wir", ni + no, kb),
                ("whr", 2 * no, kb),
                ("wiz", ni + no, kb),
                ("whz", 2 * no, kb),
            ):
                shape = self.layout.offsets[f"gru{l}.{name}"][1]
                scale = np.sqrt(6.0 / (k * fan))
                self.layout.view(flat, f"gru{l}.{name}")[:] = _uniform_nonzero(
                    rng, scale, shape
                )
            for name in ("bih", "bhh"):
                self.layout.view(flat, f"gru{l}.{name}")[:] = _uniform_nonzero(
                    rng, 0.1, (no, kb), floor_frac=0.0
                )
            # r-gate bias 0; z-gate bias +1 favors carrying state early on
            self.layout.view(flat, f"gru{l}.br")[:] = 0.0
            self.layout.view(flat, f"gru{l}.bz")[:] = 1.0
        no = self.sizes[-1]
        self.layout.view(flat, "out.W")[:] = _uniform_nonzero(
            rng, np.sqrt(6.0 / (kw * (no + 1))), (1, no, kw)
        )
        self.layout.view(flat, "out.b")[:] = _uniform_nonzero(
            rng, 0.1, (1, kb), floor_frac=0.0
        )
        return flat

    def _materialize(self, params):
        # All tensor weights go to (o*m, i*m) block-matrix layout and the
        # gate matrices to (o, i*m) rows, so every per-step contraction in
        # the cell is a plain matmul on flattened (batch, n*m) features.
        m = self.m
        mats = []
        for l in range(len(self.sizes) - 1):
            ni, no = self.sizes[l], self.sizes[l + 1]
            Wih = (
                self.layout.view(params, f"gru{l}.Wih").reshape(no * ni, -1)
                @ self.wb2
            ).reshape(no, ni, m, m)
            Whh = (
                self.layout.view(params, f"gru{l}.Whh").reshape(no * no, -1)
                @ self.wb2
            ).reshape(no, no, m, m)
            v = {
                "Wih2": Wih.transpose(0, 2, 1, 3).reshape(no * m, ni * m),
                "Whh2": Whh.transpose(0, 2, 1, 3).reshape(no * m, no * m),
                "bih": self.layout.view(params, f"gru{l}.bih") @ self.bb,
                "bhh": self.layout.view(params, f"gru{l}.bhh") @ self.bb,
                "br": self.layout.view(params, f"gru{l}.br"),
                "bz": self.layout.view(params, f"gru{l}.bz"),
            }
            for g, nin in (("wir", ni), ("whr", no), ("wiz", ni), ("whz", no)):
                v[g] = (
                    self.layout.view(params, f"gru{l}.{g}") @ self.bb
                ).reshape(no, nin * m)
            mats.append(v)
        no = self.sizes[-1]
        outW = (
            self.layout.view(params, "out.W").reshape(no, -1) @ self.wb2
        ).reshape(1, no, m, m)
        out = {
            "W2": outW.transpose(0, 2, 1, 3).reshape(m, no * m),
            "b": self.layout.view(params, "out.b") @ self.bb,
        }
        return mats, out

    def _cell_forward(self, v, x2, h2):
        p, m = x2.shape[0], self.m
        r = _logistic(x2 @ v["wir"].T + h2 @ v["whr"].T + v["br"])
        z = _logistic(x2 @ v["wiz"].T + h2 @ v["whz"].T + v["bz"])
        a = (h2 @ v["Whh2"].T).reshape(p, -1, m) + v["bhh"]
        s = (x2 @ v["Wih2"].T).reshape(p, -1, m) + v["bih"] + r[..., None] * a
        hhat, ec = apply_tensorial_cached(self.psi, s)
        h = (1.0 - z)[..., None] * hhat + z[..., None] * h2.reshape(p, -1, m)
        return h.reshape(p, -1), (x2, h2, r, z, a, ec, hhat)

    def forward(self, params, X):
        return self.forward_cached(params, X)[0]

    def forward_cached(self, params, X):
        B, T, m = X.shape
        mats, out = self._materialize(params)
        h = [np.zeros((B, n * m)) for n in self.sizes[1:]]
        tops = np.empty((B, T, self.sizes[-1] * m))
        step_caches = []
        for t in range(T):
            x = X[:, t]
            lc = []
            for l, v in enumerate(mats):
                x, c = self._cell_forward(v, x, h[l])
                h[l] = x
                lc.append(c)
            tops[:, t] = x
            step_caches.append(lc)
        Y = (tops.reshape(B * T, -1) @ out["W2"].T).reshape(B, T, m) + out["b"][0]
        return Y, (mats, out, tops, step_caches)

    def _cell_backward(self, v, cache, gh, acc):
        # gh: (p, o, m) cotangent of this step's hidden state
        x2, h2, r, z, a, ec, hhat = cache
        p, m = x2.shape[0], self.m
        hp = h2.reshape(p, -1, m)
        gz_gate = np.sum(gh * (hp - hhat), axis=-1)
        ghhat = gh * (1.0 - z)[..., None]
        gh_prev = gh * z[..., None]
        gs = vjp_from_cache(self.psi, ec, ghhat)
        gr_gate = np.sum(gs * a, axis=-1)
        ga = gs * r[..., None]
        gr_pre = gr_gate * r * (1.0 - r)
        gz_pre = gz_gate * z * (1.0 - z)

        gs2 = gs.reshape(p, -1)
        ga2 = ga.reshape(p, -1)
        acc["Wih2"] += gs2.T @ x2
        acc["bih"] += gs.sum(axis=0)
        acc["Whh2"] += ga2.T @ h2
        acc["bhh"] += ga.sum(axis=0)
        acc["wir"] += gr_pre.T @ x2
        acc["whr"] += gr_pre.T @ h2
        acc["br"] += gr_pre.sum(axis=0)
        acc["wiz"] += gz_pre.T @ x2
        acc["whz"] += gz_pre.T @ h2
        acc["bz"] += gz_pre.sum(axis=0)

        gx2 = gs2 @ v["Wih2"] + gr_pre @ v["wir"] + gz_pre @ v["wiz"]
        gh_prev2 = (
            gh_prev.reshape(p, -1)
            + ga2 @ v["Whh2"]
            + gr_pre @ v["whr"]
            + gz_pre @ v["whz"]
        )
        return gx2, gh_prev2

    def _coeff_grad(self, acc2, no, ni):
        """(no*m, ni*m) accumulated block gradient -> (no, ni, k) coeffs."""
        m = self.m
        blk = acc2.reshape(no, m, ni, m).transpose(0, 2, 1, 3).reshape(no * ni, -1)
        return (blk @ self.wb2.T).reshape(no, ni, -1)

    def backward(self, params, cache, gY, need_input_grad=False):
        mats, out, tops, step_caches = cache
        B, T, m = gY.shape
        n_layers = len(mats)
        gY2 = gY.reshape(B * T, m)
        tops2 = tops.reshape(B * T, -1)
        gout_W2 = gY2.T @ tops2
        gout_b = gY2.sum(axis=0)[None]
        gtops = (gY2 @ out["W2"]).reshape(B, T, -1)

        accs = [{k: np.zeros_like(v[k]) for k in v} for v in mats]
        carry = [np.zeros((B, n * m)) for n in self.sizes[1:]]
        gX = np.zeros((B, T, m)) if need_input_grad else None
        for t in reversed(range(T)):
            g_above = gtops[:, t]
            for l in reversed(range(n_layers)):
                gh = (carry[l] + g_above).reshape(B, -1, m)
                gx2, gh_prev2 = self._cell_backward(
                    mats[l], step_caches[t][l], gh, accs[l]
                )
                carry[l] = gh_prev2
                g_above = gx2
            if need_input_grad:
                gX[:, t] = g_above

        grad = np.zeros(self.layout.n_params)
        for l, acc in enumerate(accs):
            ni, no = self.sizes[l], self.sizes[l + 1]
            self.layout.view(grad, f"gru{l}.Wih")[:] = self._coeff_grad(
                acc["Wih2"], no, ni
            )
            self.layout.view(grad, f"gru{l}.Whh")[:] = self._coeff_grad(
                acc["Whh2"], no, no
            )
            for name in ("bih", "bhh"):
                self.layout.view(grad, f"gru{l}.{name}")[:] = acc[name] @ self.bb.T
            for name, nin in (("wir", ni), ("whr", no), ("wiz", ni), ("whz", no)):
                self.layout.view(grad, f"gru{l}.{name}")[:] = (
                    acc[name].reshape(no, nin, m) @ self.bb.T
                )
            for name in ("br", "bz"):
                self.layout.view(grad, f"gru{l}.{name}")[:] = acc[name]
        self.layout.view(grad, "out.W")[:] = self._coeff_grad(
            gout_W2, 1, self.sizes[-1]
        )
        self.layout.view(grad, "out.b")[:] = gout_b @ self.bb.T
        return grad, gX


class ScalarGRU:
    """Plain GRU over Mandel components, mirroring TensorGRU's structure
    (two candidate biases, gate applied after the hidden matmul)."""

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        m = mandel_size(spec.dim)
        self.sizes = (m,) + spec.hidden
        entries = []
        for l in range(len(self.sizes) - 1):
            ni, no = self.sizes[l], self.sizes[l + 1]
            entries += [
                (f"gru{l}.Wih", (no, ni)),
                (f"gru{l}.Whh", (no, no)),
                (f"gru{l}.bih", (no,)),
                (f"gru{l}.bhh", (no,)),
                (f"gru{l}.Wir", (no, ni)),
                (f"gru{l}.Whr", (no, no)),
                (f"gru{l}.br", (no,)),
                (f"gru{l}.Wiz", (no, ni)),
                (f"gru{l}.Whz", (no, no)),
                (f"gru{l}.bz", (no,)),
            ]
        entries += [("out.W", (m, self.sizes[-1])), ("out.b", (m,))]
        self.layout = ParamLayout(entries)

    def init(self, rng):
        flat = np.empty(self.layout.n_params)
        for l in range(len(self.sizes) - 1):
            ni, no = self.sizes[l], self.sizes[l + 1]
            for name, fan in (
                ("Wih", ni + no),
                ("Whh", 2 * no),
                ("Wir", ni + no),
                ("Whr", 2 * no),
                ("Wiz", ni + no),
                ("Whz", 2 * no),
            ):
                shape = self.layout.offsets[f"gru{l}.{name}"][1]
                self.layout.view(flat, f"gru{l}.{name}")[:] = _uniform_nonzero(
                    rng, np.sqrt(6.0 / fan), shape
                )
            for name in ("bih", "bhh"):
                self.layout.view(flat, f"gru{l}.{name}")[:] = _uniform_nonzero(
                    rng, 0.1, (no,), floor_frac=0.0
                )
            self.layout.view(flat, f"gru{l}.br")[:] = 0.0
            self.layout.view(flat, f"gru{l}.bz")[:] = 1.0
        m, no = self.sizes[0], self.sizes[-1]
        self.layout.view(flat, "out.W")[:] = _uniform_nonzero(
            rng, np.sqrt(6.0 / (no + m)), (m, no)
        )
        self.layout.view(flat, "out.b")[:] = _uniform_nonzero(
            rng, 0.1, (m,), floor_frac=0.0
        )
        return flat

    def forward(self, params, X):
        return self.forward_cached(params, X)[0]

    def forward_cached(self, params, X):
        B, T, m = X.shape
        p = self.layout.views(params)
        h = [np.zeros((B, n)) for n in self.sizes[1:]]
        tops = np.empty((B, T, self.sizes[-1]))
        step_caches = []
        for t in range(T):
            x = X[:, t]
            lc = []
            for l in range(len(self.sizes) - 1):
                k = f"gru{l}."
                hp = h[l]
                r = _logistic(x @ p[k + "Wir"].T + hp @ p[k + "Whr"].T + p[k + "br"])
                z = _logistic(x @ p[k + "Wiz"].T + hp @ p[k + "Whz"].T + p[k + "bz"])
                a = hp @ p[k + "Whh"].T + p[k + "bhh"]
                s = x @ p[k + "Wih"].T + p[k + "bih"] + r * a
                hhat = np.tanh(s)
                hnew = (1.0 - z) * hhat + z * hp
                lc.append((x, hp, r, z, a, hhat))
                h[l] = hnew
                x = hnew
            tops[:, t] = x
            step_caches.append(lc)
        Y = tops @ p["out.W"].T + p["out.b"]
        return Y, (p, tops, step_caches)

    def backward(self, params, cache, gY, need_input_grad=False):
        p, tops, step_caches = cache
        B, T, m = gY.shape
        n_layers = len(self.sizes) - 1
        grad = np.zeros(self.layout.n_params)
        g = self.layout.views(grad)
        gY2 = gY.reshape(B * T, m)
        g["out.W"] += gY2.T @ tops.reshape(B * T, -1)
        g["out.b"] += gY2.sum(axis=0)
        gtops = (gY2 @ p["out.W"]).reshape(B, T, -1)

        carry = [np.zeros((B, n)) for n in self.sizes[1:]]
        gX = np.zeros((B, T, m)) if need_input_grad else None
        for t in reversed(range(T)):
            g_above = gtops[:, t]
            for l in reversed(range(n_layers)):
                k = f"gru{l}."
                x, hp, r, z, a, hhat = step_caches[t][l]
                gh = carry[l] + g_above
                gz_gate = gh * (hp - hhat)
                ghhat = gh * (1.0 - z)
                gh_prev = gh * z
                gs = ghhat * (1.0 - hhat * hhat)
                gr_gate = gs * a
                ga = gs * r
                gr_pre = gr_gate * r * (1.0 - r)
                gz_pre = gz_gate * z * (1.0 - z)

                g[k + "Wih"] += gs.T @ x
                g[k + "bih"] += gs.sum(axis=0)
                g[k + "Whh"] += ga.T @ hp
                g[k + "bhh"] += ga.sum(axis=0)
                g[k + "Wir"] += gr_pre.T @ x
                g[k + "Whr"] += gr_pre.T @ hp
                g[k + "br"] += gr_pre.sum(axis=0)
                g[k + "Wiz"] += gz_pre.T @ x
                g[k + "Whz"] += gz_pre.T @ hp
                g[k + "bz"] += gz_pre.sum(axis=0)

                gx = gs @ p[k + "Wih"] + gr_pre @ p[k + "Wir"] + gz_pre @ p[k + "Wiz"]
                gh_prev = gh_prev + ga @ p[k + "Whh"] + gr_pre @ p[k + "Whr"] + gz_pre @ p[k + "Whz"]
                carry[l] = gh_prev
                g_above = gx
            if need_input_grad:
                gX[:, t] = g_above
        return grad, gX


# ---------------------------------------------------------------------------
# learnable change of symmetry frame
# ---------------------------------------------------------------------------


class RotationWrapper:
    """y = R f(R^T x R) R^T with a learnable rotation R.

    d=2 stores a single angle theta; d=3 a quaternion q, normalized when
    materialized.  The quaternion drift penalty (|q|^2 - 1)^2 is exposed
    via `penalty` and added to the loss by the trainer.  For sequences the
    same R is applied at every step.
    """

    def __init__(self, inner):
        self.inner = inner
        self.spec = inner.spec
        self.n_rot = 1 if self.spec.dim == 2 else 4
        self.layout = ParamLayout(
            inner.layout.entries + [("rotation", (self.n_rot,))]
        )

    def init(self, rng):
        flat = np.empty(self.layout.n_params)
        flat[: self.inner.layout.n_params] = self.inner.init(rng)
        rot = self.layout.view(flat, "rotation")
        if self.spec.dim == 2:
            rot[:] = rng.uniform(-np.pi, np.pi)
        else:
            q = rng.standard_normal(4)
            rot[:] = q / np.linalg.norm(q)
        return flat

    def _rotation(self, rot):
        if self.spec.dim == 2:
            theta = rot[0]
            Q = rotation_2d(theta)
            dQ = np.array(
                [[-np.sin(theta), -np.cos(theta)], [np.cos(theta), -np.sin(theta)]]
            )[None]
            return mandel_rotation(Q), mandel_rotation_tangent(Q, dQ)
        R, J = quat_rotation_jacobian(rot)
        return mandel_rotation(R), mandel_rotation_tangent(R, J)

    def angle(self, params) -> float:
        """Learned angle in radians (d=2 only)."""
        if self.spec.dim != 2:
            raise ValueError("angle is only defined for d=2")
        return float(self.layout.view(params, "rotation")[0])

    def forward(self, params, X):
        return self.forward_cached(params, X)[0]

    def forward_cached(self, params, X):
        n_in = self.inner.layout.n_params
        A, dA = self._rotation(params[n_in:])
        Xr = X @ A.T
        Yin, cache_in = self.inner.forward_cached(params[:n_in], Xr)
        Y = Yin @ A
        return Y, (A, dA, X, Xr, Yin, cache_in)

    def backward(self, params, cache, gY, need_input_grad=False):
        A, dA, X, Xr, Yin, cache_in = cache
        n_in = self.inner.layout.n_params
        gYin = gY @ A.T
        grad_in, gXr = self.inner.backward(
            params[:n_in], cache_in, gYin, need_input_grad=True
        )
        flat_axes = tuple(range(gY.ndim - 1))
        gA = np.tensordot(Yin, gY, axes=(flat_axes, flat_axes)) + np.tensordot(
            gXr, X, axes=(flat_axes, flat_axes)
        )
        grad = np.empty(self.layout.n_params)
        grad[:n_in] = grad_in
        grad[n_in:] = np.einsum("kab,ab->k", dA, gA)
        gX = gXr @ A if need_input_grad else None
        return grad, gX

    def penalty(self, params):
        """Quaternion unit-norm penalty value and its flat gradient."""
        grad = np.zeros(self.layout.n_params)
        if self.spec.dim != 3:
            return 0.0, grad
        q = self.layout.view(params, "rotation")
        dev = float(q @ q) - 1.0
        w = self.spec.penalty_weight
        self.layout.view(grad, "rotation")[:] = w * 4.0 * dev * q
        return w * dev * dev, grad


_INNER = {
    "tensor-ff": TensorFFN,
    "tensor-gru": TensorGRU,
    "scalar-mlp": ScalarMLP,
    "scalar-gru": ScalarGRU,
}


def build_model(spec: ModelSpec):
    model = _INNER[spec.kind](spec)
    if spec.rotation:
        model = RotationWrapper(model)
    return model


def init_params(model, rng: np.random.Generator) -> np.ndarray:
    return model.init(rng)


def param_count(spec: ModelSpec) -> int:
    return build_model(spec).layout.n_params


# ---------------------------------------------------------------------------
# model files
# ---------------------------------------------------------------------------


def save_model(path, spec: ModelSpec, params: np.ndarray, extra: dict | None = None):
    """Binary model file: magic, version, JSON header (spec, parameter
    count, any extra metadata such as fitted scalers), then the flat
    float64 parameter vector, little-endian, in layout order."""
    header = {
        "spec": spec.to_dict(),
        "n_params": int(params.size),
        "extra": extra or {},
    }
    blob = json.dumps(header).encode()
    with open(path, "wb") as f:
        f.write(MODEL_FILE_MAGIC)
        f.write(MODEL_FILE_VERSION.to_bytes(2, "little"))
        f.write(len(blob).to_bytes(8, "little"))
        f.write(blob)
        f.write(np.ascontiguousarray(params, dtype="<f8").tobytes())


def load_model(path):
    """Returns (spec, params, extra)."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != MODEL_FILE_MAGIC:
        raise ValueError(f"{path}: not a model file (bad magic)")
    version = int.from_bytes(raw[4:6], "little")
    if version != MODEL_FILE_VERSION:
        raise ValueError(f"{path}: unsupported model file version {version}")
    hlen = int.from_bytes(raw[6:14], "little")
    header = json.loads(raw[14 : 14 + hlen].decode())
    spec = ModelSpec.from_dict(header["spec"])
    params = np.frombuffer(raw[14 + hlen :], dtype="<f8").astype(float)
    if params.size != header["n_params"]:
        raise ValueError(
            f"{path}: parameter vector truncated "
            f"({params.size} of {header['n_params']})"
        )
    return spec, params, header.get("extra", {})
