"""Hybrid graph-convolution + gated-recurrent model with per-horizon heads.

Per timestep, node features pass through a stack of graph-convolution layers
(rectifier activation over the normalized adjacency); a shared-weight GRU then
runs along the window independently per node, and the final hidden state feeds
one linear head per forecast horizon. The backward pass is derived by hand for
this fixed architecture; its contract is passing the central-difference check in
:mod:`gridcast.numerics`.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError, NumericError, ValidationError
from .graph import NormalizedAdjacency
from .numerics import sigmoid

CHECKPOINT_MAGIC = b"GCKPT1"


@dataclass(frozen=True)
class ModelConfig:
    n_features: int
    hidden_dim: int
    n_layers: int
    window_steps: int
    horizons_steps: tuple[int, ...]
    activation: str = "relu"

    def __post_init__(self) -> None:
        if min(self.n_features, self.hidden_dim, self.n_layers, self.window_steps) < 1:
            raise ValidationError("model dimensions must be positive")
        hs = self.horizons_steps
        if not hs or any(h < 1 for h in hs) or list(hs) != sorted(set(hs)):
            raise ValidationError("horizons must be positive, unique, and ascending")
        if self.activation != "relu":
            raise ValidationError(f"unsupported activation {self.activation!r}")

    @property
    def n_horizons(self) -> int:
        return len(self.horizons_steps)

    def param_count(self) -> int:
        f, hd, k = self.n_features, self.hidden_dim, self.n_horizons
        count = (f * hd + hd) + (self.n_layers - 1) * (hd * hd + hd)  # conv stack
        count += 3 * (hd * hd + hd * hd + hd)  # gate weights
        count += hd * k + k  # heads
        return count


@dataclass
class ModelParams:
    """All trainable tensors. ``tensors()`` fixes the declaration (and checkpoint) order."""

    conv_w: list[np.ndarray]  # first (F, HD), rest (HD, HD)
    conv_b: list[np.ndarray]  # (HD,)
    w_update: np.ndarray      # (HD, HD) input weights, update gate
    u_update: np.ndarray      # (HD, HD) recurrent weights
    b_update: np.ndarray      # (HD,)
    w_reset: np.ndarray
    u_reset: np.ndarray
    b_reset: np.ndarray
    w_cand: np.ndarray
    u_cand: np.ndarray
    b_cand: np.ndarray
    head_w: np.ndarray        # (HD, K)
    head_b: np.ndarray        # (K,)

    def tensors(self) -> list[tuple[str, np.ndarray]]:
        out: list[tuple[str, np.ndarray]] = []
        for i, (w, b) in enumerate(zip(self.conv_w, self.conv_b)):
            out.append((f"conv{i}.w", w))
            out.append((f"conv{i}.b", b))
        out += [
            ("gru.w_update", self.w_update), ("gru.u_update", self.u_update),
            ("gru.b_update", self.b_update),
            ("gru.w_reset", self.w_reset), ("gru.u_reset", self.u_reset),
            ("gru.b_reset", self.b_reset),
            ("gru.w_cand", self.w_cand), ("gru.u_cand", self.u_cand),
            ("gru.b_cand", self.b_cand),
            ("head.w", self.head_w), ("head.b", self.head_b),
        ]
        return out

    def arrays(self) -> list[np.ndarray]:
        return [a for _, a in self.tensors()]

    def copy(self) -> "ModelParams":
        return ModelParams(
            conv_w=[w.copy() for w in self.conv_w],
            conv_b=[b.copy() for b in self.conv_b],
            w_update=self.w_update.copy(), u_update=self.u_update.copy(),
            b_update=self.b_update.copy(),
            w_reset=self.w_reset.copy(), u_reset=self.u_reset.copy(),
            b_reset=self.b_reset.copy(),
            w_cand=self.w_cand.copy(), u_cand=self.u_cand.copy(),
            b_cand=self.b_cand.copy(),
            head_w=self.head_w.copy(), head_b=self.head_b.copy(),
        )


def _layer_dims(config: ModelConfig) -> list[tuple[int, int]]:
    dims = [(config.n_features, config.hidden_dim)]
    dims += [(config.hidden_dim, config.hidden_dim)] * (config.n_layers - 1)
    return dims


def zeros_like_params(config: ModelConfig) -> ModelParams:
    hd, k = config.hidden_dim, config.n_horizons
    return ModelParams(
        conv_w=[np.zeros(d) for d in _layer_dims(config)],
        conv_b=[np.zeros(hd) for _ in range(config.n_layers)],
        w_update=np.zeros((hd, hd)), u_update=np.zeros((hd, hd)), b_update=np.zeros(hd),
        w_reset=np.zeros((hd, hd)), u_reset=np.zeros((hd, hd)), b_reset=np.zeros(hd),
        w_cand=np.zeros((hd, hd)), u_cand=np.zeros((hd, hd)), b_cand=np.zeros(hd),
        head_w=np.zeros((hd, k)), head_b=np.zeros(k),
    )


def init_params(config: ModelConfig, seed: int) -> ModelParams:
    """Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per tensor, seeded.

    Also used as-is (untrained) for the random-weight control model.
    """
    rng = np.random.default_rng(seed)
    params = zeros_like_params(config)

    def fill(arr: np.ndarray, fan_in: int) -> None:
        bound = 1.0 / np.sqrt(fan_in)
        arr[...] = rng.uniform(-bound, bound, size=arr.shape)

    hd = config.hidden_dim
    for w, b, (d_in, _) in zip(params.conv_w, params.conv_b, _layer_dims(config)):
        fill(w, d_in)
        fill(b, d_in)
    for w, u, b in ((params.w_update, params.u_update, params.b_update),
                    (params.w_reset, params.u_reset, params.b_reset),
                    (params.w_cand, params.u_cand, params.b_cand)):
        fill(w, hd)
        fill(u, hd)
        fill(b, hd)
    fill(params.head_w, hd)
    fill(params.head_b, hd)
    return params


def gcn_layer(h: np.ndarray, adj: NormalizedAdjacency, w: np.ndarray,
              b: np.ndarray) -> np.ndarray:
    """One graph-convolution layer on (N, d_in) features: relu(adj @ h @ w + b)."""
    if h.ndim != 2 or h.shape[0] != adj.n or h.shape[1] != w.shape[0]:
        raise ValidationError(
            f"shape mismatch: features {h.shape}, adjacency {adj.n}, weights {w.shape}"
        )
    return np.maximum(adj.matrix @ h @ w + b, 0.0)


def gru_cell(x: np.ndarray, h: np.ndarray, params: ModelParams) -> np.ndarray:
    """One gated-recurrent step on (..., HD) vectors.

    z = sigmoid(x Wz + h Uz + bz), r = sigmoid(x Wr + h Ur + br),
    cand = tanh(x Wc + (r * h) Uc + bc), h' = (1 - z) * h + z * cand.
    """
    if x.shape != h.shape or x.shape[-1] != params.w_update.shape[0]:
        raise ValidationError(f"shape mismatch: input {x.shape} vs state {h.shape}")
    z = sigmoid(x @ params.w_update + h @ params.u_update + params.b_update)
    r = sigmoid(x @ params.w_reset + h @ params.u_reset + params.b_reset)
    cand = np.tanh(x @ params.w_cand + (r * h) @ params.u_cand + params.b_cand)
    return (1.0 - z) * h + z * cand


class Workspace:
    """Reusable buffer pool for the batched forward/backward passes.

    Fresh megabyte-scale allocations inside the hot loop cost more in kernel
    page-zeroing than the arithmetic; training loops pass one workspace so the
    buffers survive across batches. Buffers are keyed by (name, shape).
    """

    def __init__(self) -> None:
        self._buffers: dict = {}

    def get(self, name: str, shape: tuple[int, ...], dtype=np.float64) -> np.ndarray:
        key = (name, shape, np.dtype(dtype).str)
        buf = self._buffers.get(key)
        if buf is None:
            buf = np.empty(shape, dtype)
            self._buffers[key] = buf
        return buf


def _forward(x: np.ndarray, adj: NormalizedAdjacency, params: ModelParams,
             config: ModelConfig, keep_cache: bool, ws: Workspace | None = None):
    """Batched forward pass on (B, W, N, F); returns (preds (B, K, N), cache).

    Layout strategy: the conv stage keeps the node axis leading, so the sparse
    product and the dense projection alternate on reshape views of one
    contiguous buffer (rows ordered (node, step, batch)); the recurrence then
    runs step-major with fused gate weights, writing into workspace buffers.
    """
    b, w, n, f = x.shape
    if (w, f) != (config.window_steps, config.n_features) or n != adj.n:
        raise ValidationError(
            f"window shape {x.shape} does not match the model configuration"
        )
    if ws is None:
        ws = Workspace()
    cache = {"conv": []} if keep_cache else None
    hd = config.hidden_dim
    rows = n * b
    nwb = n * w * b

    entry = ws.get("entry", (n, w, b, f))
    np.copyto(entry, x.transpose(2, 1, 0, 3))
    h = entry.reshape(nwb, f)
    for layer, (cw, cb) in enumerate(zip(params.conv_w, params.conv_b)):
        d_in = cw.shape[0]
        mixed = (adj.matrix @ h.reshape(n, w * b * d_in)).reshape(nwb, d_in)
        h = ws.get(f"conv_h{layer}", (nwb, hd))
        np.matmul(mixed, cw, out=h)
        h += cb
        if keep_cache:
            act = ws.get(f"conv_act{layer}", (nwb, hd), dtype=bool)
            np.greater(h, 0.0, out=act)
            cache["conv"].append((mixed, act))
        np.maximum(h, 0.0, out=h)
        if not np.isfinite(h.sum()):
            raise NumericError(f"non-finite output of graph-conv layer {layer}")

    # Recurrence in step-major layout: seq[t] is a contiguous (N*B, HD) matrix.
    seq = ws.get("seq", (w, rows, hd))
    np.copyto(seq.reshape(w, n, b, hd), h.reshape(n, w, b, hd).transpose(1, 0, 2, 3))
    w_gates = np.hstack([params.w_update, params.w_reset, params.w_cand])
    u_zr = np.hstack([params.u_update, params.u_reset])
    b_zr = np.concatenate([params.b_update, params.b_reset])

    gx = ws.get("gx", (rows, 3 * hd))
    mixed_state = ws.get("mixed_state", (rows, hd))
    if keep_cache:
        zr_steps = ws.get("zr_steps", (w, rows, 2 * hd))
        cand_steps = ws.get("cand_steps", (w, rows, hd))
        states = ws.get("states", (w + 1, rows, hd))
        states[0] = 0.0
    else:
        zr_cur = ws.get("zr_cur", (rows, 2 * hd))
        cand_cur = ws.get("cand_cur", (rows, hd))
        state_cur = ws.get("state_cur", (rows, hd))
        state_cur[...] = 0.0
        state_next = ws.get("state_next", (rows, hd))

    for t in range(w):
        if keep_cache:
            prev, zr, cand, new = states[t], zr_steps[t], cand_steps[t], states[t + 1]
        else:
            prev, zr, cand, new = state_cur, zr_cur, cand_cur, state_next
        np.matmul(seq[t], w_gates, out=gx)  # update | reset | candidate blocks
        np.matmul(prev, u_zr, out=zr)
        zr += gx[:, : 2 * hd]
        zr += b_zr
        zr *= 0.5  # sigmoid(v) = 0.5 * tanh(v / 2) + 0.5
        np.tanh(zr, out=zr)
        zr *= 0.5
        zr += 0.5
        z, r = zr[:, :hd], zr[:, hd:]
        np.multiply(r, prev, out=mixed_state)
        np.matmul(mixed_state, params.u_cand, out=cand)
        cand += gx[:, 2 * hd :]
        cand += params.b_cand
        np.tanh(cand, out=cand)
        # new state = (1 - z) * prev + z * cand, written as prev + z * (cand - prev)
        np.subtract(cand, prev, out=new)
        new *= z
        new += prev
        if not np.isfinite(new.sum()):
            raise NumericError(f"non-finite recurrent state at window step {t}")
        if not keep_cache:
            state_cur, state_next = state_next, state_cur

    final = states[w] if keep_cache else state_cur
    preds = (final @ params.head_w + params.head_b).reshape(n, b, -1)
    if keep_cache:
        cache["seq"] = seq
        cache["zr"] = zr_steps
        cache["cand"] = cand_steps
        cache["states"] = states
        cache["fused"] = (w_gates, u_zr)
    return preds.transpose(1, 2, 0), cache


def forward(window: np.ndarray, adj: NormalizedAdjacency, params: ModelParams,
            config: ModelConfig) -> np.ndarray:
    """Predictions (K, N) in standardized units for one (W, N, F) window."""
    if window.ndim != 3:
        raise ValidationError(f"expected a (W, N, F) window, got shape {window.shape}")
    preds, _ = _forward(window[None], adj, params, config, keep_cache=False)
    return preds[0]


def forward_batch(windows: np.ndarray, adj: NormalizedAdjacency, params: ModelParams,
                  config: ModelConfig, workspace: Workspace | None = None) -> np.ndarray:
    """Predictions (B, K, N) for a (B, W, N, F) batch."""
    if windows.ndim != 4:
        raise ValidationError(f"expected a (B, W, N, F) batch, got shape {windows.shape}")
    preds, _ = _forward(windows, adj, params, config, keep_cache=False, ws=workspace)
    return preds


def loss_and_gradients(windows: np.ndarray, targets: np.ndarray,
                       adj: NormalizedAdjacency, params: ModelParams,
                       config: ModelConfig, workspace: Workspace | None = None
                       ) -> tuple[float, ModelParams]:
    """Mean-squared error over (batch x horizons x nodes) and its full gradient."""
    if windows.ndim != 4 or windows.shape[0] == 0:
        raise ValidationError("batch must be a non-empty (B, W, N, F) tensor")
    b, w, n, _ = windows.shape
    k = config.n_horizons
    if targets.shape != (b, k, n):
        raise ValidationError(
            f"targets shape {targets.shape} does not match (B={b}, K={k}, N={n})"
        )
    ws = workspace if workspace is not None else Workspace()
    preds, cache = _forward(windows, adj, params, config, keep_cache=True, ws=ws)
    diff = preds - targets  # (B, K, N)
    count = diff.size
    loss = float(np.sum(diff * diff) / count)
    if not np.isfinite(loss):
        raise NumericError("non-finite loss")

    grads = zeros_like_params(config)
    hd = config.hidden_dim
    rows = n * b
    w_gates, u_zr = cache["fused"]
    seq, zr_steps, cand_steps, states = (cache["seq"], cache["zr"], cache["cand"],
                                         cache["states"])
    dpred = np.ascontiguousarray(
        (2.0 / count) * diff.transpose(2, 0, 1)
    ).reshape(rows, k)

    h_final = states[w]  # (N*B, HD)
    grads.head_w += h_final.T @ dpred
    grads.head_b += dpred.sum(axis=0)
    dstate = dpred @ params.head_w.T  # (N*B, HD)

    # Gate gradients accumulate into fused buffers, split at the end; per-step
    # temporaries live in reusable scratch.
    g_wx = np.zeros((hd, 3 * hd))
    g_uzr = np.zeros((hd, 2 * hd))
    g_bx = np.zeros(3 * hd)
    da_all = ws.get("da_all", (rows, 3 * hd))
    d_rh = ws.get("d_rh", (rows, hd))
    s_a = ws.get("s_a", (rows, hd))
    s_b = ws.get("s_b", (rows, hd))
    s_c = ws.get("s_c", (rows, hd))
    dnext = ws.get("dnext", (rows, hd))
    dx_seq = ws.get("dx_seq", (w, rows, hd))
    for t in reversed(range(w)):
        xt, prev, cand = seq[t], states[t], cand_steps[t]
        zr = zr_steps[t]
        z, r = zr[:, :hd], zr[:, hd:]
        da_z, da_r = da_all[:, :hd], da_all[:, hd : 2 * hd]
        da_c = da_all[:, 2 * hd :]

        # candidate branch: da_c = (dstate * z) * (1 - cand^2)
        np.multiply(cand, cand, out=s_a)
        np.subtract(1.0, s_a, out=s_a)
        np.multiply(dstate, z, out=da_c)
        da_c *= s_a
        np.matmul(da_c, params.u_cand.T, out=d_rh)
        np.multiply(r, prev, out=s_a)
        grads.u_cand += s_a.T @ da_c

        # update gate: da_z = dstate * (cand - prev) * z * (1 - z)
        np.subtract(cand, prev, out=s_a)
        s_a *= dstate
        np.subtract(1.0, z, out=s_b)  # (1 - z), reused below for dprev
        np.multiply(s_a, z, out=da_z)
        da_z *= s_b

        # reset gate: da_r = (d_rh * prev) * r * (1 - r)
        np.multiply(d_rh, prev, out=s_a)
        np.subtract(1.0, r, out=s_c)
        np.multiply(s_a, r, out=da_r)
        da_r *= s_c

        g_wx += xt.T @ da_all
        g_uzr += prev.T @ da_all[:, : 2 * hd]
        g_bx += da_all.sum(axis=0)

        # dprev = dstate * (1 - z) + d_rh * r + da_zr @ u_zr.T
        np.multiply(dstate, s_b, out=dnext)
        np.multiply(d_rh, r, out=s_a)
        dnext += s_a
        np.matmul(da_all[:, : 2 * hd], u_zr.T, out=s_a)
        dnext += s_a
        np.matmul(da_all, w_gates.T, out=dx_seq[t])
        dstate, dnext = dnext, dstate

    grads.w_update += g_wx[:, :hd]
    grads.w_reset += g_wx[:, hd : 2 * hd]
    grads.w_cand += g_wx[:, 2 * hd :]
    grads.u_update += g_uzr[:, :hd]
    grads.u_reset += g_uzr[:, hd:]
    grads.b_update += g_bx[:hd]
    grads.b_reset += g_bx[hd : 2 * hd]
    grads.b_cand += g_bx[2 * hd :]

    # (W, N*B, HD) -> rows ordered (node, step, batch) as the conv caches are.
    nwb = n * w * b
    dh4 = ws.get("dh", (n, w, b, hd))
    np.copyto(dh4, dx_seq.reshape(w, n, b, hd).transpose(1, 0, 2, 3))
    dh = dh4.reshape(nwb, hd)
    dpre = ws.get("dpre", (nwb, hd))
    for layer in reversed(range(config.n_layers)):
        mixed, active = cache["conv"][layer]
        np.multiply(dh, active, out=dpre)
        grads.conv_w[layer] += mixed.T @ dpre
        grads.conv_b[layer] += dpre.sum(axis=0)
        if layer == 0:
            break  # the gradient w.r.t. the input window is not needed
        d_in = params.conv_w[layer].shape[0]
        dmixed = ws.get(f"dmixed{layer}", (nwb, d_in))
        np.matmul(dpre, params.conv_w[layer].T, out=dmixed)
        dh = (adj.matrix @ dmixed.reshape(n, w * b * d_in)).reshape(nwb, d_in)

    return loss, grads


def save_checkpoint(path, config: ModelConfig, params: ModelParams) -> None:
    """Magic, config block, then every tensor in declaration order (float64 LE)."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack(
            "<5I", config.n_features, config.hidden_dim, config.n_layers,
            config.window_steps, config.n_horizons,
        ))
        fh.write(struct.pack(f"<{config.n_horizons}I", *config.horizons_steps))
        for _, tensor in params.tensors():
            fh.write(np.ascontiguousarray(tensor, dtype="<f8").tobytes())


def load_checkpoint(path, expected_config: ModelConfig | None = None
                    ) -> tuple[ModelConfig, ModelParams]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise DataFormatError(f"{path}: not a {CHECKPOINT_MAGIC.decode()} checkpoint")
    off = len(CHECKPOINT_MAGIC)
    try:
        f, hd, layers, w, k = struct.unpack_from("<5I", blob, off)
        off += struct.calcsize("<5I")
        horizons = struct.unpack_from(f"<{k}I", blob, off)
        off += struct.calcsize(f"<{k}I")
    except struct.error as exc:
        raise DataFormatError(f"{path}: truncated checkpoint header") from exc
    config = ModelConfig(
        n_features=f, hidden_dim=hd, n_layers=layers,
        window_steps=w, horizons_steps=tuple(int(h) for h in horizons),
    )
    if expected_config is not None and config != expected_config:
        raise ValidationError(
            f"checkpoint configuration {config} does not match the expected {expected_config}"
        )
    params = zeros_like_params(config)
    for name, tensor in params.tensors():
        nbytes = tensor.size * 8
        if off + nbytes > len(blob):
            raise DataFormatError(f"{path}: truncated tensor {name}")
        tensor[...] = np.frombuffer(blob, dtype="<f8", count=tensor.size,
                                    offset=off).reshape(tensor.shape)
        off += nbytes
    if off != len(blob):
        raise DataFormatError(f"{path}: {len(blob) - off} trailing bytes")
    return config, params


def predict_batches(features: np.ndarray, targets: np.ndarray, anchors: np.ndarray,
                    adj: NormalizedAdjacency, params: ModelParams, config: ModelConfig,
                    batch_size: int, workspace: Workspace | None = None
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Model predictions and aligned targets, (S, K, N), over all anchors."""
    ws = workspace if workspace is not None else Workspace()
    preds = []
    targs = []
    for lo in range(0, len(anchors), batch_size):
        batch = anchors[lo : lo + batch_size]
        x, y = gather_samples(features, targets, batch, config.window_steps,
                              config.horizons_steps)
        preds.append(forward_batch(x, adj, params, config, workspace=ws))
        targs.append(y)
    return np.concatenate(preds, axis=0), np.concatenate(targs, axis=0)


def gather_samples(features: np.ndarray, targets: np.ndarray, anchors: np.ndarray,
                   window_steps: int, horizons_steps: tuple[int, ...]
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Assemble (B, W, N, F) windows and (B, K, N) targets for the given anchors."""
    xs = np.stack([features[a - window_steps + 1 : a + 1] for a in anchors])
    ys = np.stack([np.stack([targets[a + h] for h in horizons_steps]) for a in anchors])
    return xs, ys
