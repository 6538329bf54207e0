"""Spectral GCNs driven by a fitted filter polynomial.

The feature transform is a two-layer MLP; its output is propagated over the
graph by the fitted polynomial of a normalized operator and fed to a softmax.
With fixed propagation coefficients this is Arnoldi-GCN; with coefficients
initialized from the fit and trained alongside the MLP it is G-Arnoldi-GCN.

Two propagation modes exist.  ``recurrence`` replays the Arnoldi recurrence
with the graph operator in place of the sample diagonal, i.e. it applies
exactly the fitted polynomial.  ``monomial`` sums operator powers weighted by
monomial coefficients.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from .approx import PolynomialApproximant, arnoldi_fit
from .filters import FilterSpec, eval_filter
from .graph import OperatorKind, PropagationOperator, SparseGraph, propagation_operator, spmm
from .sampling import sample

HIDDEN = 64


class PropagationMode(str, enum.Enum):
    RECURRENCE = "recurrence"
    MONOMIAL = "monomial"


@dataclass
class ModelParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    gamma: np.ndarray

    def copy(self) -> "ModelParams":
        return ModelParams(*(getattr(self, f.name).copy() for f in fields(self)))

    def items(self):
        return [(f.name, getattr(self, f.name)) for f in fields(self)]

    @classmethod
    def zeros_like(cls, other: "ModelParams") -> "ModelParams":
        return cls(*(np.zeros_like(v) for _, v in other.items()))


@dataclass
class GraphData:
    graph: SparseGraph
    features: np.ndarray
    labels: np.ndarray

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1


@dataclass(frozen=True)
class PropagationPlan:
    operator: PropagationOperator
    mode: PropagationMode
    approximant: PolynomialApproximant

    def __post_init__(self):
        mode = PropagationMode(self.mode)
        object.__setattr__(self, "mode", mode)
        a = self.approximant
        if mode is PropagationMode.MONOMIAL and a.monomial_coefficients is None:
            raise ValueError("monomial propagation needs monomial coefficients")
        if mode is PropagationMode.RECURRENCE and (a.basis is None or a.basis_coefficients is None):
            raise ValueError("recurrence propagation needs an Arnoldi basis")
        if a.basis is not None:
            simple = a.basis.samples.interval.lower < 0
            want = OperatorKind.NORMALIZED_ADJACENCY if simple else OperatorKind.LAPLACIAN
            if self.operator.kind is not want:
                raise ValueError(f"filter sampled on {a.basis.samples.interval} needs the {want.value} operator")

    @property
    def depth(self) -> int:
        return len(self.coefficients()) - 1

    def coefficients(self) -> np.ndarray:
        a = self.approximant
        c = a.basis_coefficients if self.mode is PropagationMode.RECURRENCE else a.monomial_coefficients
        return np.array(c, dtype=float)


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    dropout: float = 0.5
    epochs: int = 1000
    patience: int = 100
    seed: int = 0
    learn_gamma: bool = False
    propagation_learning_rate: Optional[float] = None
    propagation_dropout: float = 0.0
    hidden: int = HIDDEN

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")
        if not 0.0 <= self.dropout < 1.0 or not 0.0 <= self.propagation_dropout < 1.0:
            raise ValueError("dropout rates must lie in [0, 1)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.6
    val_fraction: float = 0.2
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        fr = (self.train_fraction, self.val_fraction, self.test_fraction)
        if any(f <= 0 for f in fr) or abs(sum(fr) - 1.0) > 1e-12:
            raise ValueError(f"split fractions must be positive and sum to 1, got {fr}")


@dataclass(frozen=True)
class TraceRow:
    epoch: int
    train_loss: float
    val_accuracy: float


def build_plan(graph: SparseGraph, spec: FilterSpec, scheme, degree: int,
               r: Optional[int] = None, mode=PropagationMode.RECURRENCE) -> PropagationPlan:
    """Sample ``spec`` on its domain, fit by Arnoldi, pair with the right operator.

    ``r`` defaults to ``degree + 1`` so the fitted polynomial has full degree.
    """
    mode = PropagationMode(mode)
    r = degree + 1 if r is None else r
    samples = sample(scheme, spec.domain, r)
    approx = arnoldi_fit(samples, eval_filter(spec, samples), degree, spec.name,
                         emit_monomial=mode is PropagationMode.MONOMIAL)
    kind = OperatorKind.NORMALIZED_ADJACENCY if spec.family == "simple" else OperatorKind.LAPLACIAN
    return PropagationPlan(propagation_operator(graph, kind), mode, approx)


def init_params(m: int, c: int, plan: PropagationPlan, hidden: int = HIDDEN, rng=None) -> ModelParams:
    """Glorot-uniform weights, zero biases, gamma from the fit."""
    rng = np.random.default_rng(0) if rng is None else rng
    lim1 = math.sqrt(6.0 / (m + hidden))
    lim2 = math.sqrt(6.0 / (hidden + c))
    return ModelParams(
        w1=rng.uniform(-lim1, lim1, (m, hidden)),
        b1=np.zeros(hidden),
        w2=rng.uniform(-lim2, lim2, (hidden, c)),
        b2=np.zeros(c),
        gamma=plan.coefficients(),
    )


# ------------------------------------------------------------------- forward


def _dropout_mask(shape, p, rng):
    if p <= 0.0 or rng is None:
        return None
    return (rng.random(shape) >= p) / (1.0 - p)


def mlp_forward(params: ModelParams, X, dropout: float = 0.0, rng=None, cache: Optional[dict] = None):
    """``relu(X w1 + b1) w2 + b2`` with inverted dropout on the hidden layer."""
    X = np.asarray(X, dtype=float)
    if X.shape[1] != params.w1.shape[0]:
        raise ValueError(f"features have {X.shape[1]} columns, w1 expects {params.w1.shape[0]}")
    pre = X @ params.w1 + params.b1
    hidden = np.maximum(pre, 0.0)
    mask = _dropout_mask(hidden.shape, dropout, rng)
    if mask is not None:
        hidden = hidden * mask
    out = hidden @ params.w2 + params.b2
    if cache is not None:
        cache.update(X=X, pre=pre, hidden=hidden, hidden_mask=mask)
    return out


def propagate(plan: PropagationPlan, H0, gamma, states: Optional[list] = None) -> np.ndarray:
    """``sum_k gamma_k W_k`` where ``W_k`` are the propagated basis signals."""
    gamma = np.asarray(gamma, dtype=float)
    if len(gamma) != plan.depth + 1:
        raise ValueError(f"gamma has {len(gamma)} entries, plan needs {plan.depth + 1}")
    M = plan.operator.matrix
    W = [np.asarray(H0, dtype=float)]
    if plan.mode is PropagationMode.MONOMIAL:
        for _ in range(plan.depth):
            W.append(spmm(M, W[-1]))
    else:
        H = plan.approximant.basis.h_table
        for m in range(plan.depth):
            v = spmm(M, W[m])
            for l in range(m + 1):
                v -= H[l, m] * W[l]
            W.append(v / H[m + 1, m])
    Z = gamma[0] * W[0]
    for k in range(1, len(W)):
        Z = Z + gamma[k] * W[k]
    if states is not None:
        states[:] = W
    return Z


def _propagate_backward(plan: PropagationPlan, gamma, dZ) -> np.ndarray:
    M = plan.operator.matrix
    K = plan.depth
    G = [g * dZ for g in gamma]
    if plan.mode is PropagationMode.MONOMIAL:
        for k in range(K - 1, -1, -1):
            G[k] = G[k] + spmm(M.T, G[k + 1])
    else:
        H = plan.approximant.basis.h_table
        for m in range(K - 1, -1, -1):
            t = G[m + 1] / H[m + 1, m]
            G[m] = G[m] + spmm(M.T, t)
            for l in range(m + 1):
                G[l] = G[l] - H[l, m] * t
    return G[0]


def softmax(Z):
    Z = np.asarray(Z, dtype=float)
    e = np.exp(Z - Z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _log_softmax(Z):
    shifted = Z - Z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _as_index(mask, n=None):
    idx = np.asarray(mask)
    if idx.dtype == bool:
        idx = np.flatnonzero(idx)
    if idx.size == 0:
        raise ValueError("mask selects no nodes")
    return idx


def loss(Z, labels, mask, params: ModelParams, weight_decay: float) -> float:
    """Masked mean cross-entropy plus ``wd/2 (|w1|^2 + |w2|^2)``."""
    idx = _as_index(mask)
    lsm = _log_softmax(np.asarray(Z, dtype=float)[idx])
    ce = -np.mean(lsm[np.arange(len(idx)), np.asarray(labels)[idx]])
    reg = 0.5 * weight_decay * (np.sum(params.w1 ** 2) + np.sum(params.w2 ** 2))
    return float(ce + reg)


@dataclass
class ForwardState:
    params: ModelParams
    plan: PropagationPlan
    labels: np.ndarray
    mask: np.ndarray
    weight_decay: float
    mlp_cache: dict = field(default_factory=dict)
    prop_mask: Optional[np.ndarray] = None
    states: list = field(default_factory=list)
    Z: Optional[np.ndarray] = None
    loss: float = math.nan


def forward(params: ModelParams, plan: PropagationPlan, X, labels, mask, weight_decay: float = 0.0,
            dropout: float = 0.0, prop_dropout: float = 0.0, rng=None) -> ForwardState:
    """Full forward pass keeping everything :func:`backward` needs."""
    st = ForwardState(params, plan, np.asarray(labels), _as_index(mask), weight_decay)
    H0 = mlp_forward(params, X, dropout, rng, st.mlp_cache)
    st.prop_mask = _dropout_mask(H0.shape, prop_dropout, rng)
    if st.prop_mask is not None:
        H0 = H0 * st.prop_mask
    st.Z = propagate(plan, H0, params.gamma, st.states)
    st.loss = loss(st.Z, st.labels, st.mask, params, weight_decay)
    return st


def backward(state: ForwardState, learn_gamma: bool = True, upstream: float = 1.0) -> ModelParams:
    """Reverse-mode gradients of ``upstream * loss`` for every parameter block."""
    if state.Z is None or not state.states:
        raise ValueError("backward needs a completed forward pass")
    p = state.params
    idx = state.mask
    probs = softmax(state.Z[idx])
    probs[np.arange(len(idx)), state.labels[idx]] -= 1.0
    dZ = np.zeros_like(state.Z)
    dZ[idx] = upstream * probs / len(idx)

    if learn_gamma:
        dgamma = np.array([np.sum(dZ * W) for W in state.states])
    else:
        dgamma = np.zeros_like(p.gamma)
    dH0 = _propagate_backward(state.plan, p.gamma, dZ)
    if state.prop_mask is not None:
        dH0 = dH0 * state.prop_mask

    c = state.mlp_cache
    wd = upstream * state.weight_decay
    dw2 = c["hidden"].T @ dH0 + wd * p.w2
    db2 = dH0.sum(axis=0)
    dhid = dH0 @ p.w2.T
    if c["hidden_mask"] is not None:
        dhid = dhid * c["hidden_mask"]
    dpre = dhid * (c["pre"] > 0)
    dw1 = c["X"].T @ dpre + wd * p.w1
    db1 = dpre.sum(axis=0)
    return ModelParams(dw1, db1, dw2, db2, dgamma)


# ------------------------------------------------------------------ training


class Adam:
    def __init__(self, params: ModelParams, rates: dict, b1=0.9, b2=0.999, eps=1e-8):
        self.rates = rates
        self.b1, self.b2, self.eps = b1, b2, eps
        self.t = 0
        self.m = ModelParams.zeros_like(params)
        self.v = ModelParams.zeros_like(params)

    def step(self, params: ModelParams, grads: ModelParams):
        self.t += 1
        bc1 = 1 - self.b1 ** self.t
        bc2 = 1 - self.b2 ** self.t
        for name, g in grads.items():
            lr = self.rates.get(name, 0.0)
            if lr == 0.0:
                continue
            m = getattr(self.m, name)
            v = getattr(self.v, name)
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            getattr(params, name)[...] -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def make_split(n: int, labels, split: SplitSpec):
    """Seeded random partition into train/val/test index arrays."""
    rng = np.random.Generator(np.random.PCG64(split.seed))
    perm = rng.permutation(n)
    n_train = int(math.floor(split.train_fraction * n + 0.5))
    n_val = int(math.floor(split.val_fraction * n + 0.5))
    train = np.sort(perm[:n_train])
    val = np.sort(perm[n_train:n_train + n_val])
    test = np.sort(perm[n_train + n_val:])
    if min(len(train), len(val), len(test)) == 0:
        raise ValueError(f"split of {n} nodes leaves an empty set: {len(train)}/{len(val)}/{len(test)}")
    return train, val, test


def predict(params: ModelParams, plan: PropagationPlan, X) -> np.ndarray:
    """Class probabilities in evaluation mode (no dropout)."""
    return softmax(propagate(plan, mlp_forward(params, X), params.gamma))


def auroc(scores, positives) -> float:
    """Rank-sum AUROC; tied scores count one half."""
    scores = np.asarray(scores, dtype=float)
    pos = np.asarray(positives, dtype=bool)
    n_pos = int(pos.sum())
    n_neg = len(pos) - n_pos
    if n_pos == 0 or n_neg == 0:
        return math.nan
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def score(probs, labels, mask) -> dict:
    idx = _as_index(mask)
    y = np.asarray(labels)[idx]
    p = np.asarray(probs)[idx]
    out = {"accuracy": float(np.mean(np.argmax(p, axis=1) == y)), "auroc": None}
    if p.shape[1] == 2:
        out["auroc"] = auroc(p[:, 1], y == 1)
    return out


def predict_and_score(params: ModelParams, plan: PropagationPlan, data: GraphData, mask) -> dict:
    return score(predict(params, plan, data.features), data.labels, mask)


def train(data: GraphData, plan: PropagationPlan, config: TrainConfig, split: SplitSpec):
    """Full-batch Adam with early stopping on validation accuracy.

    Returns ``(best_params, trace, (train, val, test))``.
    """
    n = data.graph.node_count
    if data.features.shape[0] != n or len(data.labels) != n:
        raise ValueError("features and labels must cover every node")
    train_idx, val_idx, test_idx = make_split(n, data.labels, split)
    rng = np.random.Generator(np.random.PCG64(config.seed))
    params = init_params(data.features.shape[1], data.num_classes, plan, config.hidden, rng)
    prop_lr = config.learning_rate if config.propagation_learning_rate is None else config.propagation_learning_rate
    rates = {"w1": config.learning_rate, "b1": config.learning_rate,
             "w2": config.learning_rate, "b2": config.learning_rate,
             "gamma": prop_lr if config.learn_gamma else 0.0}
    opt = Adam(params, rates)
    best = params.copy()
    best_acc = -1.0
    stale = 0
    trace = []
    for epoch in range(1, config.epochs + 1):
        st = forward(params, plan, data.features, data.labels, train_idx, config.weight_decay,
                     config.dropout, config.propagation_dropout, rng)
        grads = backward(st, config.learn_gamma)
        opt.step(params, grads)
        val_acc = predict_and_score(params, plan, data, val_idx)["accuracy"]
        trace.append(TraceRow(epoch, st.loss, val_acc))
        if val_acc > best_acc:
            best_acc = val_acc
            best = params.copy()
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    return best, trace, (train_idx, val_idx, test_idx)


def mlp_only_plan(plan: PropagationPlan) -> PropagationPlan:
    """Same operator with gamma pinned to (1, 0, ..., 0): no propagation."""
    a = plan.approximant
    e0 = np.zeros(plan.depth + 1)
    e0[0] = 1.0
    a2 = replace(a, basis_coefficients=e0 if a.basis_coefficients is not None else None,
                 monomial_coefficients=e0.copy() if a.monomial_coefficients is not None else None)
    return PropagationPlan(plan.operator, plan.mode, a2)


# ------------------------------------------------------------- serialization


def save_model(fh, params: ModelParams, meta: dict) -> None:
    """Plain-text model: ``key value`` header lines, then one block per parameter."""
    fh.write("# arnoldi-gcn model\n")
    for k, v in meta.items():
        fh.write(f"{k} {v}\n")
    for name, arr in params.items():
        a2 = np.atleast_2d(arr)
        fh.write(f"@{name} {a2.shape[0]} {a2.shape[1]}\n")
        for row in a2:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def load_model(lines):
    meta = {}
    blocks = {}
    it = iter(lines)
    for ln in it:
        s = ln.strip()
        if not s or s.startswith("#"):
            continue
        if s.startswith("@"):
            name, rows, cols = s[1:].split()
            rows, cols = int(rows), int(cols)
            data = [np.array(next(it).split(), dtype=float) for _ in range(rows)]
            arr = np.array(data).reshape(rows, cols)
            blocks[name] = arr
            continue
        key, _, val = s.partition(" ")
        meta[key] = val
    missing = {f.name for f in fields(ModelParams)} - set(blocks)
    if missing:
        raise ValueError(f"model file lacks blocks: {sorted(missing)}")
    vec = lambda a: a.ravel()
    params = ModelParams(blocks["w1"], vec(blocks["b1"]), blocks["w2"], vec(blocks["b2"]), vec(blocks["gamma"]))
    return params, meta
