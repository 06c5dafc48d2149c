"""Message-passing network over the bipartite encoding, with manual autodiff.

Architecture: linear embeddings of variable nodes (objective coefficient and
augmentation value) and constraint nodes (right-hand side), four half-layer
convolutions alternating variable-to-constraint and constraint-to-variable,
then a two-layer perceptron head with a sigmoid per variable.

Messages are the sender embedding scaled by the (standardized) coefficient,
aggregated by mean over incident edges.  Mean aggregation plus weight
sharing makes the network equivariant to variable permutations and
invariant to constraint permutations by construction; no positional
information enters except through the augmentation channel.

All parameters live in one flat float64 vector with named slices, so the
optimizer and checkpoints treat the model as a single array.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..kernels import edge_aggregate

PROB_CLAMP = 1e-7

# (name, shape builder) in storage order; h is the hidden width
def param_layout(hidden: int):
    h = int(hidden)
    layout = [
        ("var_embed_w", (h, 2)),
        ("var_embed_b", (h,)),
        ("cons_embed_w", (h, 1)),
        ("cons_embed_b", (h,)),
    ]
    for layer in range(4):
        layout += [
            (f"conv{layer}_self_w", (h, h)),
            (f"conv{layer}_msg_w", (h, h)),
            (f"conv{layer}_b", (h,)),
        ]
    layout += [
        ("head_w1", (h, h)),
        ("head_b1", (h,)),
        ("head_w2", (1, h)),
        ("head_b2", (1,)),
    ]
    return layout


@dataclass
class GnnModel:
    hidden: int
    params: np.ndarray
    seed: int = 0

    def __post_init__(self):
        self._slices = {}
        offset = 0
        for name, shape in param_layout(self.hidden):
            size = int(np.prod(shape))
            self._slices[name] = (slice(offset, offset + size), shape)
            offset += size
        if self.params.shape != (offset,):
            raise ValueError(f"parameter vector must have length {offset}")

    def view(self, name: str) -> np.ndarray:
        sl, shape = self._slices[name]
        return self.params[sl].reshape(shape)

    @property
    def num_params(self) -> int:
        return int(self.params.shape[0])


def num_params(hidden: int) -> int:
    return sum(int(np.prod(shape)) for _, shape in param_layout(hidden))


def init_model(hidden: int = 32, seed: int = 0) -> GnnModel:
    """Glorot-uniform weights, zero biases; deterministic in the seed."""
    rng = np.random.default_rng(int(seed))
    chunks = []
    for name, shape in param_layout(hidden):
        if len(shape) == 1:  # biases start at zero
            chunks.append(np.zeros(shape[0]))
        else:
            fan_out, fan_in = shape
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            chunks.append(rng.uniform(-limit, limit, size=int(np.prod(shape))))
    return GnnModel(hidden=hidden, params=np.concatenate(chunks), seed=int(seed))


@dataclass
class GraphBatch:
    """One or more graphs concatenated, with per-instance bookkeeping."""

    var_x: np.ndarray        # (N, 2) standardized (objective coeff, z)
    cons_x: np.ndarray       # (M, 1) standardized rhs
    edge_cons: np.ndarray    # (E,)
    edge_vars: np.ndarray    # (E,)
    edge_w: np.ndarray       # (E,) standardized coefficients
    inv_deg_cons: np.ndarray # (M,) 1/degree, 0 where isolated
    inv_deg_vars: np.ndarray # (N,)
    var_inst: np.ndarray     # (N,) instance slot
    num_insts: int
    var_weight: np.ndarray   # (N,) 1/n_i: per-instance mean weights

    @property
    def num_vars(self) -> int:
        return int(self.var_x.shape[0])

    @property
    def num_cons(self) -> int:
        return int(self.cons_x.shape[0])


def single_batch(var_x, cons_x, edge_cons, edge_vars, edge_w) -> GraphBatch:
    n, m = var_x.shape[0], cons_x.shape[0]
    inv_deg_cons = np.zeros(m)
    inv_deg_vars = np.zeros(n)
    if len(edge_w):
        cnt_c = np.bincount(edge_cons, minlength=m).astype(np.float64)
        cnt_v = np.bincount(edge_vars, minlength=n).astype(np.float64)
        inv_deg_cons[cnt_c > 0] = 1.0 / cnt_c[cnt_c > 0]
        inv_deg_vars[cnt_v > 0] = 1.0 / cnt_v[cnt_v > 0]
    return GraphBatch(
        var_x=np.ascontiguousarray(var_x, dtype=np.float64),
        cons_x=np.ascontiguousarray(cons_x, dtype=np.float64),
        edge_cons=np.ascontiguousarray(edge_cons, dtype=np.int64),
        edge_vars=np.ascontiguousarray(edge_vars, dtype=np.int64),
        edge_w=np.ascontiguousarray(edge_w, dtype=np.float64),
        inv_deg_cons=inv_deg_cons,
        inv_deg_vars=inv_deg_vars,
        var_inst=np.zeros(n, dtype=np.int64),
        num_insts=1,
        var_weight=np.full(n, 1.0 / n),
    )


def concat_batches(parts: list[GraphBatch]) -> GraphBatch:
    if len(parts) == 1:
        return parts[0]
    var_off = cons_off = 0
    vx, cx, ec, ev, ew, idc, idv, vi, vw = [], [], [], [], [], [], [], [], []
    for slot, p in enumerate(parts):
        vx.append(p.var_x)
        cx.append(p.cons_x)
        ec.append(p.edge_cons + cons_off)
        ev.append(p.edge_vars + var_off)
        ew.append(p.edge_w)
        idc.append(p.inv_deg_cons)
        idv.append(p.inv_deg_vars)
        vi.append(np.full(p.num_vars, slot, dtype=np.int64))
        vw.append(p.var_weight)
        var_off += p.num_vars
        cons_off += p.num_cons
    return GraphBatch(
        var_x=np.concatenate(vx),
        cons_x=np.concatenate(cx) if cons_off else np.zeros((0, 1)),
        edge_cons=np.concatenate(ec) if any(len(e) for e in ec) else np.zeros(0, dtype=np.int64),
        edge_vars=np.concatenate(ev) if any(len(e) for e in ev) else np.zeros(0, dtype=np.int64),
        edge_w=np.concatenate(ew) if any(len(e) for e in ew) else np.zeros(0),
        inv_deg_cons=np.concatenate(idc) if cons_off else np.zeros(0),
        inv_deg_vars=np.concatenate(idv),
        var_inst=np.concatenate(vi),
        num_insts=len(parts),
        var_weight=np.concatenate(vw),
    )


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def forward(model: GnnModel, batch: GraphBatch, want_cache: bool = False):
    """Per-variable probabilities; optionally the activation cache."""
    v = model.view
    hv_pre = batch.var_x @ v("var_embed_w").T + v("var_embed_b")
    hw_pre = batch.cons_x @ v("cons_embed_w").T + v("cons_embed_b")
    hv = np.maximum(hv_pre, 0.0)
    hw = np.maximum(hw_pre, 0.0)

    layers = []
    for layer in range(4):
        ws, wm, bias = v(f"conv{layer}_self_w"), v(f"conv{layer}_msg_w"), v(f"conv{layer}_b")
        if layer % 2 == 0:  # variable -> constraint
            raw = edge_aggregate(hv, batch.edge_vars, batch.edge_cons,
                                 batch.edge_w, batch.num_cons)
            agg = raw * batch.inv_deg_cons[:, None]
            pre = hw @ ws.T + agg @ wm.T + bias
            record = (hw, agg, pre)
            hw = np.maximum(pre, 0.0)
        else:               # constraint -> variable
            raw = edge_aggregate(hw, batch.edge_cons, batch.edge_vars,
                                 batch.edge_w, batch.num_vars)
            agg = raw * batch.inv_deg_vars[:, None]
            pre = hv @ ws.T + agg @ wm.T + bias
            record = (hv, agg, pre)
            hv = np.maximum(pre, 0.0)
        layers.append(record)

    t_pre = hv @ v("head_w1").T + v("head_b1")
    t = np.maximum(t_pre, 0.0)
    logits = (t @ v("head_w2").T + v("head_b2"))[:, 0]
    probs = _sigmoid(logits)
    if not want_cache:
        return probs
    cache = {
        "hv_pre": hv_pre, "hw_pre": hw_pre, "layers": layers,
        "hv_final": hv, "t_pre": t_pre, "t": t, "logits": logits, "probs": probs,
    }
    return probs, cache


def bce_loss(probs, labels, weights=None) -> float:
    """Binary cross entropy with probability clamp; weighted sum."""
    p = np.clip(probs, PROB_CLAMP, 1.0 - PROB_CLAMP)
    y = np.asarray(labels, dtype=np.float64)
    terms = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    if weights is None:
        return float(terms.mean()) if len(terms) else 0.0
    return float(terms @ weights)


def loss(pred, label) -> float:
    """Mean clamped BCE over one prediction vector (the public metric)."""
    return bce_loss(np.asarray(pred, dtype=np.float64), label)


def loss_and_grad(model: GnnModel, batch: GraphBatch, labels):
    """Sum over batch instances of per-instance mean BCE, and its gradient.

    Summing (rather than averaging) over instances keeps the accounting
    linear: duplicating a sample exactly doubles loss and gradient.  The
    trainer divides by the instance count.
    """
    probs, cache = forward(model, batch, want_cache=True)
    y = np.asarray(labels, dtype=np.float64)
    w = batch.var_weight
    total = bce_loss(probs, y, w)

    v = model.view
    grad = np.zeros_like(model.params)

    def gview(name):
        sl, shape = model._slices[name]
        return grad[sl].reshape(shape)

    # d(total)/d(logit): (p - y) per coordinate, zero where clamped
    p = probs
    inside = (p > PROB_CLAMP) & (p < 1.0 - PROB_CLAMP)
    dlogits = (p - y) * w * inside

    t, t_pre = cache["t"], cache["t_pre"]
    hv_final = cache["hv_final"]
    gview("head_w2")[...] += dlogits[None, :] @ t
    gview("head_b2")[...] += dlogits.sum()
    dt = dlogits[:, None] @ v("head_w2")
    dt_pre = dt * (t_pre > 0)
    gview("head_w1")[...] += dt_pre.T @ hv_final
    gview("head_b1")[...] += dt_pre.sum(axis=0)

    dhv = dt_pre @ v("head_w1")
    dhw = np.zeros((batch.num_cons, model.hidden))

    for layer in range(3, -1, -1):
        h_in, agg, pre = cache["layers"][layer]
        ws, wm = v(f"conv{layer}_self_w"), v(f"conv{layer}_msg_w")
        if layer % 2 == 0:  # forward was variable -> constraint
            dpre = dhw * (pre > 0)
            gview(f"conv{layer}_self_w")[...] += dpre.T @ h_in
            gview(f"conv{layer}_msg_w")[...] += dpre.T @ agg
            gview(f"conv{layer}_b")[...] += dpre.sum(axis=0)
            dhw = dpre @ ws
            draw = (dpre @ wm) * batch.inv_deg_cons[:, None]
            dhv = dhv + edge_aggregate(
                np.ascontiguousarray(draw), batch.edge_cons, batch.edge_vars,
                batch.edge_w, batch.num_vars)
        else:               # forward was constraint -> variable
            dpre = dhv * (pre > 0)
            gview(f"conv{layer}_self_w")[...] += dpre.T @ h_in
            gview(f"conv{layer}_msg_w")[...] += dpre.T @ agg
            gview(f"conv{layer}_b")[...] += dpre.sum(axis=0)
            dhv = dpre @ ws
            draw = (dpre @ wm) * batch.inv_deg_vars[:, None]
            dhw = dhw + edge_aggregate(
                np.ascontiguousarray(draw), batch.edge_vars, batch.edge_cons,
                batch.edge_w, batch.num_cons)

    dhv_pre = dhv * (cache["hv_pre"] > 0)
    gview("var_embed_w")[...] += dhv_pre.T @ batch.var_x
    gview("var_embed_b")[...] += dhv_pre.sum(axis=0)
    dhw_pre = dhw * (cache["hw_pre"] > 0)
    gview("cons_embed_w")[...] += dhw_pre.T @ batch.cons_x
    gview("cons_embed_b")[...] += dhw_pre.sum(axis=0)

    return total, grad
