"""Recurrent cells: plain LSTM plus two time-modulated variants.

All three cells share the same skeleton.  Per step they consume the previous
step's label vector ``l_prev``, the current feature vector ``x`` and a scalar
time lapse ``delta``, and update an internal state ``h``:

    f = sigmoid(W_fl l_prev + W_fx x [+ w_fj delta] + b_f)      (forget gate)
    i = sigmoid(W_il l_prev + W_ix x [+ w_ij delta] + b_i)      (input gate)
    o = sigmoid(W_ol l_prev + W_ox x [+ w_oj delta] + b_o)      (output gate)
    c = tanh  (W_cl l_prev + W_cx x [+ w_cj delta] + b_c)       (candidate)
    h = f * h_prev + i * c            [+ w_tj delta]
    y = o * tanh(h)

The gates intentionally take no ``h_prev`` input: recurrence flows only
through ``h``, so dh_t/dh_{t-1} = diag(f_t).  The bracketed delta terms exist
only in the time-modulated variants: the gate variant (``tlstmv1``) feeds
delta into all four pre-activations, the state variant (``tlstmv2``) adds a
single learned delta vector directly to ``h``.  Label probabilities come from
an affine readout over ``y`` followed by a sigmoid.

The backward pass is reverse-mode by hand over exactly this computation;
teacher-forced label inputs are treated as constants.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .linalg import sigmoid

__all__ = [
    "CellKind",
    "CellParameters",
    "StepTrace",
    "GradientSet",
    "cell_block_names",
    "init_cell_parameters",
    "forward_step",
    "forward_sequence",
    "backward_sequence",
]

GATES = ("f", "i", "o", "c")


class CellKind(Enum):
    STANDARD_LSTM = "lstm"
    TLSTM_V1 = "tlstmv1"
    TLSTM_V2 = "tlstmv2"

    @property
    def gate_delta(self):
        """True when delta feeds the four gate pre-activations."""
        return self is CellKind.TLSTM_V1

    @property
    def state_delta(self):
        """True when delta feeds the internal state directly."""
        return self is CellKind.TLSTM_V2


def cell_block_names(kind):
    """Canonical parameter-block order for a cell (checkpoint/optimizer order)."""
    names = []
    for g in GATES:
        names.extend([f"w_{g}l", f"w_{g}x"])
        if kind.gate_delta:
            names.append(f"w_{g}j")
        names.append(f"b_{g}")
    if kind.state_delta:
        names.append("w_tj")
    names.extend(["w_y", "b_y"])
    return names


def _block_shape(name, hidden, labels, features):
    if name == "w_y":
        return (labels, hidden)
    if name == "b_y":
        return (labels,)
    if name.endswith("l"):
        return (hidden, labels)
    if name.endswith("x"):
        return (hidden, features)
    return (hidden,)  # biases and delta weights


class CellParameters:
    """All weights of one cell, kept as per-gate named arrays.

    A stacked copy of the gate weights is cached for the hot loops; call
    :meth:`mark_updated` after mutating any block in place so the cache is
    rebuilt.  Treat instances as immutable while sequences are being
    evaluated.
    """

    def __init__(self, kind, hidden, labels, features, blocks):
        self.kind = kind
        self.hidden = hidden
        self.labels = labels
        self.features = features
        expected = cell_block_names(kind)
        if set(blocks) != set(expected):
            raise ValueError(
                f"{kind.value} cell expects blocks {expected}, got {sorted(blocks)}"
            )
        self._blocks = {}
        for name in expected:
            arr = np.ascontiguousarray(blocks[name], dtype=np.float64)
            want = _block_shape(name, hidden, labels, features)
            if arr.shape != want:
                raise ValueError(f"block {name} has shape {arr.shape}, expected {want}")
            self._blocks[name] = arr
            setattr(self, name, arr)
        self._stack = None

    def block_names(self):
        return list(self._blocks)

    def blocks(self):
        """Name -> array view, in canonical order."""
        return dict(self._blocks)

    def copy(self):
        return CellParameters(
            self.kind,
            self.hidden,
            self.labels,
            self.features,
            {k: v.copy() for k, v in self._blocks.items()},
        )

    def mark_updated(self):
        self._stack = None

    @property
    def stacked(self):
        """(w_in, b, w_j) with the four gates stacked row-wise, f/i/o/c order.

        ``w_in`` is (4H, L+D) over the concatenated (l_prev, x) input,
        ``b`` is (4H,), and ``w_j`` is (4H,) for the gate-delta variant else
        None.  Delta stays out of the stacked input on purpose: adding its
        term separately keeps a zero time lapse bit-for-bit identical to the
        plain LSTM.
        """
        if self._stack is None:
            rows = [
                np.concatenate(
                    [self._blocks[f"w_{g}l"], self._blocks[f"w_{g}x"]], axis=1
                )
                for g in GATES
            ]
            w_in = np.ascontiguousarray(np.concatenate(rows, axis=0))
            b = np.concatenate([self._blocks[f"b_{g}"] for g in GATES])
            w_j = (
                np.concatenate([self._blocks[f"w_{g}j"] for g in GATES])
                if self.kind.gate_delta
                else None
            )
            self._stack = (w_in, b, w_j)
        return self._stack


def init_cell_parameters(kind, hidden, labels, features, rng):
    """Fresh parameters: uniform +-1/sqrt(fan-in) weights, zero biases,
    forget bias +1 so the state starts out retentive."""
    blocks = {}
    for g in GATES:
        blocks[f"w_{g}l"] = rng.uniform(-1, 1, (hidden, labels)) / math.sqrt(labels)
        blocks[f"w_{g}x"] = rng.uniform(-1, 1, (hidden, features)) / math.sqrt(features)
        if kind.gate_delta:
            blocks[f"w_{g}j"] = rng.uniform(-1, 1, hidden)
        blocks[f"b_{g}"] = np.zeros(hidden)
    blocks["b_f"] = blocks["b_f"] + 1.0
    if kind.state_delta:
        blocks["w_tj"] = rng.uniform(-1, 1, hidden)
    blocks["w_y"] = rng.uniform(-1, 1, (labels, hidden)) / math.sqrt(hidden)
    blocks["b_y"] = np.zeros(labels)
    return CellParameters(kind, hidden, labels, features, blocks)


@dataclass(slots=True)
class StepTrace:
    """Everything the backward pass needs about one forward step."""

    l_prev: np.ndarray
    x: np.ndarray
    delta: float
    h_prev: np.ndarray
    f: np.ndarray
    i: np.ndarray
    o: np.ndarray
    c: np.ndarray
    h: np.ndarray
    tanh_h: np.ndarray
    y: np.ndarray
    probs: np.ndarray
    lx: np.ndarray  # cached concat(l_prev, x)


def forward_step(params, l_prev, x, delta, h_prev):
    """One cell step; returns the full activation trace."""
    hidden, labels, features = params.hidden, params.labels, params.features
    l_prev = np.asarray(l_prev, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    if l_prev.shape != (labels,) or x.shape != (features,) or h_prev.shape != (hidden,):
        raise ValueError(
            f"step input shapes {l_prev.shape}/{x.shape}/{h_prev.shape} do not match "
            f"(L,{labels}) (D,{features}) (H,{hidden})"
        )
    delta = float(delta)
    if not math.isfinite(delta) or delta < 0:
        raise ValueError(f"delta must be finite and >= 0, got {delta}")
    if not (np.isfinite(l_prev).all() and np.isfinite(x).all() and np.isfinite(h_prev).all()):
        raise ValueError("non-finite step input")

    w_in, b, w_j = params.stacked
    lx = np.concatenate((l_prev, x))
    pre = w_in @ lx
    if w_j is not None and delta != 0.0:
        pre += w_j * delta
    pre += b

    gate_act = sigmoid(pre[: 3 * hidden])
    f = gate_act[:hidden]
    i = gate_act[hidden : 2 * hidden]
    o = gate_act[2 * hidden :]
    c = np.tanh(pre[3 * hidden :])

    h = f * h_prev + i * c
    if params.kind.state_delta and delta != 0.0:
        h = h + params.w_tj * delta
    tanh_h = np.tanh(h)
    y = o * tanh_h
    probs = sigmoid(params.w_y @ y + params.b_y)
    return StepTrace(l_prev, x, delta, h_prev, f, i, o, c, h, tanh_h, y, probs, lx)


def forward_sequence(params, sample, features=None, delta_scale=1.0):
    """Run a whole sequence with teacher forcing.

    The first step sees a zero label vector and delta 0; later steps see the
    ground-truth labels of the previous step and ``delta * delta_scale``.
    ``features`` (T, D) overrides per-step features stored on the sample,
    which lets callers plug in a trainable encoder.  The plain LSTM ignores
    delta entirely.
    """
    steps = sample.steps
    if not steps:
        raise ValueError(f"sequence {sample.sequence_id!r} is empty")
    if features is None:
        if any(s.features is None for s in steps):
            raise ValueError(
                f"sequence {sample.sequence_id!r} has no stored features; "
                "pass encoded features explicitly"
            )
        features = np.stack([s.features for s in steps])
    else:
        features = np.asarray(features, dtype=np.float64)
    if features.shape != (len(steps), params.features):
        raise ValueError(
            f"features shape {features.shape} != ({len(steps)}, {params.features})"
        )

    traces = []
    h = np.zeros(params.hidden)
    l_prev = np.zeros(params.labels)
    for t, step in enumerate(steps):
        delta = 0.0 if t == 0 else float(step.delta) * delta_scale
        trace = forward_step(params, l_prev, features[t], delta, h)
        traces.append(trace)
        h = trace.h
        l_prev = np.asarray(step.labels, dtype=np.float64)
    return traces


class GradientSet:
    """Named gradient arrays, shape-congruent with a parameter container."""

    def __init__(self, blocks):
        self.blocks = blocks

    def __getitem__(self, name):
        return self.blocks[name]

    def keys(self):
        return self.blocks.keys()

    @classmethod
    def zeros_like(cls, params):
        return cls({name: np.zeros_like(arr) for name, arr in params.blocks().items()})


def backward_sequence(params, traces, d_readout, return_dx=False):
    """Reverse-mode gradients of the loss through a traced sequence.

    ``d_readout`` is a length-T list holding dLoss/dprobs at supervised
    steps and None elsewhere.  Teacher-forced label inputs are constants, so
    no gradient is produced for them.  With ``return_dx`` the per-step
    gradient w.r.t. the feature inputs is returned as a (T, D) array for
    encoder backprop.
    """
    T = len(traces)
    if T == 0:
        raise ValueError("no traces to backpropagate through")
    if len(d_readout) != T:
        raise ValueError(f"d_readout has {len(d_readout)} entries for {T} traces")
    hidden, labels, features = params.hidden, params.labels, params.features
    if traces[0].h.shape != (hidden,) or traces[0].probs.shape != (labels,):
        raise ValueError("traces do not match parameter dimensions")

    w_in, _, _ = params.stacked
    w_x_t = np.ascontiguousarray(w_in[:, labels:].T) if return_dx else None

    g_w_in = np.zeros_like(w_in)
    g_b = np.zeros(4 * hidden)
    g_w_j = np.zeros(4 * hidden) if params.kind.gate_delta else None
    g_w_tj = np.zeros(hidden) if params.kind.state_delta else None
    g_w_y = np.zeros_like(params.w_y)
    g_b_y = np.zeros(labels)
    dX = np.zeros((T, features)) if return_dx else None

    dh_next = np.zeros(hidden)
    for t in range(T - 1, -1, -1):
        tr = traces[t]
        dh = dh_next
        dr = d_readout[t]
        if dr is not None:
            dr = np.asarray(dr, dtype=np.float64)
            if dr.shape != (labels,):
                raise ValueError(f"readout gradient shape {dr.shape} != ({labels},)")
            dz = dr * tr.probs * (1.0 - tr.probs)
            g_w_y += np.outer(dz, tr.y)
            g_b_y += dz
            dy = params.w_y.T @ dz
            da_o = (dy * tr.tanh_h) * tr.o * (1.0 - tr.o)
            dh = dh + (dy * tr.o) * (1.0 - tr.tanh_h * tr.tanh_h)
        else:
            da_o = np.zeros(hidden)
        if g_w_tj is not None and tr.delta != 0.0:
            g_w_tj += dh * tr.delta
        da_f = (dh * tr.h_prev) * tr.f * (1.0 - tr.f)
        da_i = (dh * tr.c) * tr.i * (1.0 - tr.i)
        da_c = (dh * tr.i) * (1.0 - tr.c * tr.c)
        da = np.concatenate((da_f, da_i, da_o, da_c))
        g_w_in += np.outer(da, tr.lx)
        g_b += da
        if g_w_j is not None and tr.delta != 0.0:
            g_w_j += da * tr.delta
        if return_dx:
            dX[t] = w_x_t @ da
        dh_next = dh * tr.f

    blocks = {}
    for gi, g in enumerate(GATES):
        rows = slice(gi * hidden, (gi + 1) * hidden)
        blocks[f"w_{g}l"] = np.ascontiguousarray(g_w_in[rows, :labels])
        blocks[f"w_{g}x"] = np.ascontiguousarray(g_w_in[rows, labels:])
        if g_w_j is not None:
            blocks[f"w_{g}j"] = g_w_j[rows].copy()
        blocks[f"b_{g}"] = g_b[rows].copy()
    if g_w_tj is not None:
        blocks["w_tj"] = g_w_tj
    blocks["w_y"] = g_w_y
    blocks["b_y"] = g_b_y
    grads = GradientSet(blocks)
    return (grads, dX) if return_dx else grads
