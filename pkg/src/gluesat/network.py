"""Message-passing network over clause-literal graphs (CPU, numpy/scipy).

Each iteration aggregates the paired (literal, negated-literal) embeddings
into clause embeddings, standardizes them per clause, scatters them back to
literals through a residual update, and layer-normalizes.  The policy head
scores each variable from its concatenated positive/negative literal
embeddings; the optional value head maps the mean literal score through a
sigmoid.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ForwardOutput",
    "HyperParams",
    "NetParams",
    "WeightFormatError",
    "forward",
    "forward_with_cache",
    "init_params",
    "load_weights",
    "mlp_dims",
    "policy_distribution",
    "preset",
    "save_weights",
]

_MAGIC = "NGW1"


class WeightFormatError(ValueError):
    """Corrupt or inconsistent weight file."""


@dataclass(frozen=True)
class HyperParams:
    delta_l: int = 16       # literal embedding width
    delta_c: int = 64       # clause embedding width
    tau_iters: int = 2      # message-passing iterations
    n_l: int = 2            # literal-update MLP depth
    n_c: int = 2            # clause-update MLP depth
    n_p: int = 3            # head MLP depth
    dropout: float = 0.15
    leaky_slope: float = 0.01
    ln_eps: float = 1e-5

    def __post_init__(self):
        if min(self.delta_l, self.delta_c, self.n_l, self.n_c, self.n_p) < 1:
            raise ValueError("all dimensions and depths must be >= 1")
        if self.tau_iters < 1:
            raise ValueError("tau_iters must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")


_PRESETS = {
    "supervised": HyperParams(delta_l=16, delta_c=64, tau_iters=2, n_l=2, n_c=2, n_p=3),
    "rl": HyperParams(delta_l=32, delta_c=64, tau_iters=4, n_l=3, n_c=3, n_p=4),
}


def preset(name: str) -> HyperParams:
    """Named hyperparameter presets: 'supervised' (small) or 'rl' (wider/deeper)."""
    try:
        return _PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(_PRESETS)}") from None


def mlp_dims(depth: int, d_in: int, d_out: int) -> list[int]:
    """Layer widths for a depth-layer MLP; hidden layers keep the input width."""
    return [d_in] * depth + [d_out]


@dataclass
class NetParams:
    """All learnable tensors; MLPs are lists of (weight, bias) pairs with
    weights shaped (fan_in, fan_out)."""

    l_init: np.ndarray
    c_update: list
    l_update: list
    v_policy: list
    v_value: list | None
    ln_scale: np.ndarray
    ln_shift: np.ndarray

    def tensors(self):
        """Yield (name, array) pairs in the canonical serialization order."""
        yield "l_init", self.l_init
        for group, layers in (
            ("c_update", self.c_update),
            ("l_update", self.l_update),
            ("v_policy", self.v_policy),
            ("v_value", self.v_value or []),
        ):
            for i, (w, b) in enumerate(layers):
                yield f"{group}.{i}.w", w
                yield f"{group}.{i}.b", b
        yield "ln_scale", self.ln_scale
        yield "ln_shift", self.ln_shift

    def tensor_dict(self) -> dict[str, np.ndarray]:
        return dict(self.tensors())

    def copy(self) -> "NetParams":
        return NetParams(
            l_init=self.l_init.copy(),
            c_update=[(w.copy(), b.copy()) for w, b in self.c_update],
            l_update=[(w.copy(), b.copy()) for w, b in self.l_update],
            v_policy=[(w.copy(), b.copy()) for w, b in self.v_policy],
            v_value=None if self.v_value is None else [(w.copy(), b.copy()) for w, b in self.v_value],
            ln_scale=self.ln_scale.copy(),
            ln_shift=self.ln_shift.copy(),
        )


@dataclass
class ForwardOutput:
    policy_logits: np.ndarray     # one logit per compacted variable
    value: float | None           # in (0, 1) when the value head is present


def _f32(a):
    # keep parameters exactly representable in the float32 weight format
    return np.asarray(a, dtype=np.float32).astype(np.float64)


def _init_mlp(rng, depth, d_in, d_out):
    dims = mlp_dims(depth, d_in, d_out)
    layers = []
    for a, b in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (a + b))
        w = rng.uniform(-bound, bound, size=(a, b))
        layers.append((_f32(w), np.zeros(b)))
    return layers


def init_params(hp: HyperParams, seed=None, value_head: bool = False) -> NetParams:
    """Fan-in/fan-out scaled uniform weights, zero biases, unit layer norm."""
    rng = np.random.default_rng(seed)
    dl, dc = hp.delta_l, hp.delta_c
    l_init = _f32(rng.standard_normal(dl) / np.sqrt(dl))
    c_update = _init_mlp(rng, hp.n_c, 2 * dl, dc)
    l_update = _init_mlp(rng, hp.n_l, dc, dl)
    v_policy = _init_mlp(rng, hp.n_p, 2 * dl, 1)
    v_value = _init_mlp(rng, hp.n_p, 2 * dl, 1) if value_head else None
    return NetParams(
        l_init=l_init,
        c_update=c_update,
        l_update=l_update,
        v_policy=v_policy,
        v_value=v_value,
        ln_scale=np.ones(dl),
        ln_shift=np.zeros(dl),
    )


def _concat_neg(L, n):
    # pair each literal's embedding with its negation's: rows v-1 and n+v-1 swap
    return np.concatenate([L, np.concatenate([L[n:], L[:n]], axis=0)], axis=1)


def _mlp_forward(layers, x, slope, dropout, drng, cache):
    h = x
    last = len(layers) - 1
    for i, (w, b) in enumerate(layers):
        z = h @ w + b
        if i == last:
            if cache is not None:
                cache.append((h, z, None))
            return z
        a = np.where(z > 0, z, slope * z)
        mask = None
        if drng is not None and dropout > 0.0:
            mask = (drng.random(a.shape) >= dropout) / (1.0 - dropout)
            a = a * mask
        if cache is not None:
            cache.append((h, z, mask))
        h = a
    return h


def _standardize_rows(x, eps):
    mu = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    y = (x - mu) * inv
    return y, inv


def forward_with_cache(params: NetParams, hp: HyperParams, graph, train_mode=False, dropout_seed=0):
    """Forward pass keeping every intermediate needed for backpropagation."""
    g, gt = graph.matrices()
    n = graph.num_vars
    drng = np.random.default_rng(dropout_seed) if (train_mode and hp.dropout > 0.0) else None
    L = np.tile(params.l_init, (2 * n, 1))
    iters = []
    for it in range(hp.tau_iters):
        L_prev = L
        X = _concat_neg(L_prev, n)
        A = g @ X
        c_cache = []
        C = _mlp_forward(params.c_update, A, hp.leaky_slope, hp.dropout, drng, c_cache)
        C_std, c_inv = _standardize_rows(C, hp.ln_eps)
        B = gt @ C_std
        l_cache = []
        U = _mlp_forward(params.l_update, B, hp.leaky_slope, hp.dropout, drng, l_cache)
        L_res = U + 0.1 * L_prev
        mu = L_res.mean(axis=1, keepdims=True)
        inv = 1.0 / np.sqrt(L_res.var(axis=1, keepdims=True) + hp.ln_eps)
        xhat = (L_res - mu) * inv
        L = xhat * params.ln_scale + params.ln_shift
        if not np.isfinite(L).all():
            raise FloatingPointError(f"non-finite literal embeddings at iteration {it}")
        iters.append(
            {"c_cache": c_cache, "c_std": C_std, "c_inv": c_inv,
             "l_cache": l_cache, "xhat": xhat, "ln_inv": inv}
        )
    X_final = _concat_neg(L, n)
    p_cache = []
    logits = _mlp_forward(params.v_policy, X_final[:n], hp.leaky_slope, hp.dropout, drng, p_cache).ravel()
    if not np.isfinite(logits).all():
        raise FloatingPointError("non-finite policy logits")
    value = None
    v_cache = []
    v_scores = None
    if params.v_value is not None:
        v_scores = _mlp_forward(params.v_value, X_final, hp.leaky_slope, hp.dropout, drng, v_cache)
        value = float(1.0 / (1.0 + np.exp(-v_scores.mean())))
    cache = {
        "graph": graph, "iters": iters, "p_cache": p_cache,
        "v_cache": v_cache, "value": value, "n": n,
    }
    return ForwardOutput(policy_logits=logits, value=value), cache


def forward(params: NetParams, hp: HyperParams, graph, train_mode=False, dropout_seed=0) -> ForwardOutput:
    """Run the network over a graph: per-variable policy logits plus the
    optional scalar value estimate."""
    out, _ = forward_with_cache(params, hp, graph, train_mode=train_mode, dropout_seed=dropout_seed)
    return out


def policy_distribution(logits, temperature: float) -> np.ndarray:
    """softmax(temperature * logits), stabilized by max subtraction."""
    logits = np.asarray(logits, dtype=float)
    if logits.size == 0:
        raise ValueError("empty logits")
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    z = temperature * logits
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


# ------------------------------------------------------------------ weights


def _expected_shapes(hp: HyperParams, value_head: bool):
    shapes = [("l_init", (hp.delta_l,))]
    groups = [
        ("c_update", hp.n_c, 2 * hp.delta_l, hp.delta_c),
        ("l_update", hp.n_l, hp.delta_c, hp.delta_l),
        ("v_policy", hp.n_p, 2 * hp.delta_l, 1),
    ]
    if value_head:
        groups.append(("v_value", hp.n_p, 2 * hp.delta_l, 1))
    for name, depth, d_in, d_out in groups:
        dims = mlp_dims(depth, d_in, d_out)
        for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            shapes.append((f"{name}.{i}.w", (a, b)))
            shapes.append((f"{name}.{i}.b", (b,)))
    shapes.append(("ln_scale", (hp.delta_l,)))
    shapes.append(("ln_shift", (hp.delta_l,)))
    return shapes


def save_weights(params: NetParams, hp: HyperParams, path) -> None:
    """Write the NGW1 weight file: ASCII header, float32 payloads."""
    value_head = params.v_value is not None
    buf = io.BytesIO()
    buf.write(f"{_MAGIC}\n".encode())
    buf.write(
        (
            f"hyper {hp.delta_l} {hp.delta_c} {hp.tau_iters} {hp.n_l} {hp.n_c} {hp.n_p} "
            f"{hp.dropout!r} {hp.leaky_slope!r} {hp.ln_eps!r} {int(value_head)}\n"
        ).encode()
    )
    tensors = list(params.tensors())
    for name, arr in tensors:
        dims = " ".join(str(d) for d in arr.shape)
        buf.write(f"tensor {name} {arr.ndim} {dims}\n".encode())
    buf.write(b"data\n")
    for _, arr in tensors:
        buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_weights(path) -> tuple[NetParams, HyperParams]:
    """Read an NGW1 file back into (NetParams, HyperParams)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    head, sep, payload = blob.partition(b"data\n")
    if not sep:
        raise WeightFormatError("missing data section")
    lines = head.decode("ascii", errors="replace").splitlines()
    if not lines or lines[0] != _MAGIC:
        raise WeightFormatError("bad magic")
    if len(lines) < 2 or not lines[1].startswith("hyper "):
        raise WeightFormatError("missing hyper line")
    fields = lines[1].split()[1:]
    if len(fields) != 10:
        raise WeightFormatError("malformed hyper line")
    hp = HyperParams(
        delta_l=int(fields[0]),
        delta_c=int(fields[1]),
        tau_iters=int(fields[2]),
        n_l=int(fields[3]),
        n_c=int(fields[4]),
        n_p=int(fields[5]),
        dropout=float(fields[6]),
        leaky_slope=float(fields[7]),
        ln_eps=float(fields[8]),
    )
    value_head = fields[9] == "1"
    declared = []
    for line in lines[2:]:
        parts = line.split()
        if not parts:
            continue
        if parts[0] != "tensor" or len(parts) < 3:
            raise WeightFormatError(f"unexpected header line {line!r}")
        name, ndim = parts[1], int(parts[2])
        dims = tuple(int(d) for d in parts[3:])
        if len(dims) != ndim:
            raise WeightFormatError(f"dimension count mismatch for {name}")
        declared.append((name, dims))
    expected = _expected_shapes(hp, value_head)
    if declared != expected:
        raise WeightFormatError("tensor list does not match hyperparameters")
    arrays = {}
    offset = 0
    for name, dims in declared:
        count = int(np.prod(dims)) if dims else 1
        nbytes = 4 * count
        chunk = payload[offset : offset + nbytes]
        if len(chunk) != nbytes:
            raise WeightFormatError(f"truncated payload at tensor {name}")
        arrays[name] = np.frombuffer(chunk, dtype="<f4").astype(np.float64).reshape(dims)
        offset += nbytes
    if offset != len(payload):
        raise WeightFormatError("trailing bytes after tensor payloads")

    def mlp(group, depth):
        return [(arrays[f"{group}.{i}.w"], arrays[f"{group}.{i}.b"]) for i in range(depth)]

    params = NetParams(
        l_init=arrays["l_init"],
        c_update=mlp("c_update", hp.n_c),
        l_update=mlp("l_update", hp.n_l),
        v_policy=mlp("v_policy", hp.n_p),
        v_value=mlp("v_value", hp.n_p) if value_head else None,
        ln_scale=arrays["ln_scale"],
        ln_shift=arrays["ln_shift"],
    )
    return params, hp
