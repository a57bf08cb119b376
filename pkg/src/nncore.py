#    This file is part of bevtrack 0.1.
#    Copyright (C) 2024-2026  The bevtrack authors
#
#    bevtrack is free software: you can redistribute it and/or modify
#    it under the terms of the GNU General Public License as published by
#    the Free Software Foundation, either version 3 of the License, or
#    (at your option) any later version.
#
#    This program is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU General Public License for more details.
#
#    You should have received a copy of the GNU General Public License
#    along with this program.  If not, see <http://www.gnu.org/licenses/>.


"""
:synopsis: Dense numeric core: layers, losses, optimizer and gradient checks.
"""


# standard library imports
import math
import zlib
import logging
import collections

# third party imports
import numpy as np
import torch
import torch.nn.functional as F

# library specific imports


DTYPE = torch.float64

# dense row-major array with optional gradient slot
NdArray = torch.Tensor


class DimensionError(ValueError):
    """Raised when array shapes do not agree."""

    pass


class NumericError(ArithmeticError):
    """Raised when a computation produces non-finite values.

    :ivar str parameter: name of the offending parameter
    :ivar dict checkpoint: last good parameters (if any)
    """

    def __init__(self, *args, parameter="", checkpoint=None, **kwargs):
        """Initialize NumericError.

        :param str parameter: name of the offending parameter
        :param dict checkpoint: last good parameters
        """
        super().__init__(*args, **kwargs)
        self.parameter = parameter
        self.checkpoint = checkpoint


class GradCheckError(RuntimeError):
    """Raised when a function cannot be checked by finite differences."""

    pass


_AttentionConfig = collections.namedtuple(
    "AttentionConfig", ("model_dim", "heads", "dropout"), defaults=(0.0,)
)


class AttentionConfig(_AttentionConfig):
    """Multi-head attention configuration."""

    __slots__ = ()

    def __new__(cls, model_dim, heads, dropout=0.0):
        if model_dim <= 0 or heads <= 0:
            raise ValueError("model_dim and heads must be positive")
        if model_dim % heads:
            raise ValueError(f"model_dim {model_dim} is not divisible by {heads} heads")
        if not 0.0 <= dropout < 1.0:
            raise ValueError(f"dropout {dropout} is not in [0,1)")
        return super().__new__(cls, model_dim, heads, dropout)

    @property
    def head_dim(self):
        return self.model_dim // self.heads


GradCheckReport = collections.namedtuple(
    "GradCheckReport", ("max_relative_error", "worst", "errors", "passed")
)


def make_rng(seed, *stream):
    """Make counter-based pseudo-random generator.

    :param int seed: seed
    :param stream: stream identifiers (integers or strings)

    :returns: generator
    :rtype: Generator
    """
    entropy = [int(seed)]
    for key in stream:
        if isinstance(key, str):
            key = zlib.crc32(key.encode("utf-8"))
        entropy.append(int(key))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


class ParamStore:
    """Named parameters with gradient slots and optimizer state.

    :ivar OrderedDict params: parameters by name
    :ivar int step: number of optimizer steps taken
    :ivar bool training: whether stochastic layers are active
    """

    def __init__(self, dtype=DTYPE):
        """Initialize parameter store.

        :param dtype dtype: scalar type
        """
        self.dtype = dtype
        self.params = collections.OrderedDict()
        self.step = 0
        self.training = False
        self._optimizer = None

    def add(self, name, value):
        """Add parameter.

        :param str name: unique name
        :param value: initial value

        :raises KeyError: when the name is taken

        :returns: parameter
        :rtype: Tensor
        """
        if name in self.params:
            raise KeyError(f"parameter '{name}' already exists")
        tensor = torch.as_tensor(np.asarray(value), dtype=self.dtype).clone()
        self.params[name] = tensor.requires_grad_(True)
        self._optimizer = None
        return self.params[name]

    def __getitem__(self, name):
        return self.params[name]

    def __contains__(self, name):
        return name in self.params

    def __iter__(self):
        return iter(self.params)

    def __len__(self):
        return len(self.params)

    def items(self):
        return self.params.items()

    @property
    def size(self):
        """Total number of scalars."""
        return sum(tensor.numel() for tensor in self.params.values())

    def train(self):
        self.training = True
        return self

    def eval(self):
        self.training = False
        return self

    def zero_grad(self):
        """Clear gradient slots."""
        for tensor in self.params.values():
            tensor.grad = None

    def snapshot(self):
        """Copy parameter values.

        :returns: parameter values by name
        :rtype: dict
        """
        return {name: tensor.detach().clone() for name, tensor in self.params.items()}

    def restore(self, snapshot):
        """Restore parameter values.

        :param dict snapshot: parameter values by name
        """
        with torch.no_grad():
            for name, value in snapshot.items():
                self.params[name].copy_(value)

    def to_arrays(self):
        """Export parameters.

        :returns: arrays by name
        :rtype: dict
        """
        return {
            name: tensor.detach().cpu().numpy().copy()
            for name, tensor in self.params.items()
        }

    @classmethod
    def from_arrays(cls, arrays, dtype=DTYPE):
        """Import parameters.

        :param dict arrays: arrays by name
        :param dtype dtype: scalar type

        :returns: parameter store
        :rtype: ParamStore
        """
        store = cls(dtype=dtype)
        for name, array in arrays.items():
            store.add(name, array)
        return store


def init_linear(store, name, din, dout, rng, bias=True, zero=False):
    """Add Glorot-uniform initialized linear layer.

    :param ParamStore store: parameter store
    :param str name: layer name
    :param int din: input dimension
    :param int dout: output dimension
    :param Generator rng: pseudo-random generator
    :param bool bias: toggle bias on/off
    :param bool zero: toggle zero initialization on/off
    """
    limit = math.sqrt(6.0 / (din + dout))
    if zero:
        weight = np.zeros((din, dout))
    else:
        weight = rng.uniform(-limit, limit, size=(din, dout))
    store.add(f"{name}.w", weight)
    if bias:
        store.add(f"{name}.b", np.zeros(dout))


def init_layer_norm(store, name, dim):
    store.add(f"{name}.gain", np.ones(dim))
    store.add(f"{name}.bias", np.zeros(dim))


def init_attention(store, name, cfg, rng):
    """Add query, key, value and output projections.

    :param ParamStore store: parameter store
    :param str name: layer name
    :param AttentionConfig cfg: attention configuration
    :param Generator rng: pseudo-random generator
    """
    for projection in ("q", "k", "v", "o"):
        init_linear(store, f"{name}.{projection}", cfg.model_dim, cfg.model_dim, rng)


def init_feed_forward(store, name, dim, rng, expansion=2):
    init_linear(store, f"{name}.fc1", dim, dim * expansion, rng)
    init_linear(store, f"{name}.fc2", dim * expansion, dim, rng)


def init_encoder_block(store, name, cfg, rng):
    """Add pre-norm self-attention block."""
    init_layer_norm(store, f"{name}.ln1", cfg.model_dim)
    init_attention(store, f"{name}.attn", cfg, rng)
    init_layer_norm(store, f"{name}.ln2", cfg.model_dim)
    init_feed_forward(store, f"{name}.ffn", cfg.model_dim, rng)


def init_decoder_block(store, name, cfg, rng):
    """Add pre-norm self-attention, cross-attention and feed-forward block."""
    init_layer_norm(store, f"{name}.ln1", cfg.model_dim)
    init_attention(store, f"{name}.self", cfg, rng)
    init_layer_norm(store, f"{name}.ln2", cfg.model_dim)
    init_attention(store, f"{name}.cross", cfg, rng)
    init_layer_norm(store, f"{name}.ln3", cfg.model_dim)
    init_feed_forward(store, f"{name}.ffn", cfg.model_dim, rng)


def linear(x, w, b=None):
    """Affine map y = x·w + b.

    :param Tensor x: input [*, Din]
    :param Tensor w: weight [Din, Dout]
    :param Tensor b: bias [Dout]

    :raises DimensionError: when shapes do not agree

    :returns: output [*, Dout]
    :rtype: Tensor
    """
    if w.dim() != 2 or x.shape[-1] != w.shape[0]:
        raise DimensionError(
            f"cannot multiply {tuple(x.shape)} by {tuple(w.shape)}"
        )
    y = torch.matmul(x, w)
    if b is None:
        return y
    if tuple(b.shape) != (w.shape[1],):
        raise DimensionError(f"bias {tuple(b.shape)} does not match {w.shape[1]}")
    return y + b


def apply_linear(x, store, name):
    bias = store[f"{name}.b"] if f"{name}.b" in store else None
    return linear(x, store[f"{name}.w"], bias)


def softmax(x, axis=-1):
    """Numerically stable softmax.

    :param Tensor x: input
    :param int axis: axis to normalize

    :returns: probabilities
    :rtype: Tensor
    """
    shifted = x - x.amax(dim=axis, keepdim=True).detach()
    return torch.softmax(shifted, dim=axis)


def layer_norm(x, gain, bias, eps=1e-5):
    """Normalize last axis to zero mean and unit variance, then scale.

    :param Tensor x: input [*, D]
    :param Tensor gain: gain [D]
    :param Tensor bias: bias [D]
    :param float eps: variance offset

    :returns: output [*, D]
    :rtype: Tensor
    """
    if eps <= 0:
        raise ValueError(f"eps {eps} is not positive")
    return F.layer_norm(x, (x.shape[-1],), gain, bias, eps)


def apply_layer_norm(x, store, name):
    return layer_norm(x, store[f"{name}.gain"], store[f"{name}.bias"])


def _split_heads(x, heads):
    head_dim = x.shape[-1] // heads
    return x.reshape(*x.shape[:-1], heads, head_dim).transpose(-3, -2)


def multi_head_attention(
    query, key, value, store, name, cfg, mask=None, training=False, weights=False
):
    """Scaled dot-product attention with several heads.

    Queries whose keys are all masked attend to nothing: their context is
    zero and they receive the output projection bias.

    :param Tensor query: queries [*, Nq, D]
    :param Tensor key: keys [*, Nk, D]
    :param Tensor value: values [*, Nk, D]
    :param ParamStore store: parameter store
    :param str name: layer name
    :param AttentionConfig cfg: attention configuration
    :param mask: allowed query-key pairs [*, Nq, Nk]
    :param bool training: toggle dropout on/off
    :param bool weights: toggle returning attention weights on/off

    :raises DimensionError: when shapes do not agree

    :returns: output [*, Nq, D] (and weights [*, H, Nq, Nk])
    :rtype: Tensor
    """
    dim = cfg.model_dim
    for label, tensor in (("query", query), ("key", key), ("value", value)):
        if tensor.shape[-1] != dim:
            raise DimensionError(f"{label} width {tensor.shape[-1]} is not {dim}")
    if key.shape[-2] != value.shape[-2]:
        raise DimensionError(
            f"{key.shape[-2]} keys but {value.shape[-2]} values"
        )
    q = _split_heads(apply_linear(query, store, f"{name}.q"), cfg.heads)
    k = _split_heads(apply_linear(key, store, f"{name}.k"), cfg.heads)
    v = _split_heads(apply_linear(value, store, f"{name}.v"), cfg.heads)
    scores = torch.matmul(q, k.transpose(-1, -2)) / math.sqrt(cfg.head_dim)
    if key.shape[-2] == 0:
        attention = scores
    elif mask is None:
        attention = softmax(scores)
    else:
        allowed = torch.as_tensor(mask, dtype=torch.bool).unsqueeze(-3)
        scores = scores.masked_fill(~allowed, float("-inf"))
        empty = ~allowed.any(dim=-1, keepdim=True)
        scores = scores.masked_fill(empty, 0.0)
        attention = softmax(scores).masked_fill(~allowed, 0.0)
    if cfg.dropout > 0:
        attention = F.dropout(attention, cfg.dropout, training)
    context = torch.matmul(attention, v).transpose(-3, -2)
    context = context.reshape(*context.shape[:-2], dim)
    output = apply_linear(context, store, f"{name}.o")
    if weights:
        return output, attention
    return output


def feed_forward(x, store, name):
    hidden = torch.relu(apply_linear(x, store, f"{name}.fc1"))
    return apply_linear(hidden, store, f"{name}.fc2")


def encoder_block(x, store, name, cfg, mask=None):
    """Pre-norm self-attention block.

    :param Tensor x: tokens [*, N, D]
    :param ParamStore store: parameter store
    :param str name: block name
    :param AttentionConfig cfg: attention configuration
    :param mask: allowed token pairs [*, N, N]

    :returns: tokens [*, N, D]
    :rtype: Tensor
    """
    h = apply_layer_norm(x, store, f"{name}.ln1")
    x = x + multi_head_attention(
        h, h, h, store, f"{name}.attn", cfg, mask=mask, training=store.training
    )
    h = apply_layer_norm(x, store, f"{name}.ln2")
    return x + feed_forward(h, store, f"{name}.ffn")


def decoder_block(x, keys, values, store, name, cfg, cross_mask=None):
    """Pre-norm block: self-attention, cross-attention, feed-forward.

    :param Tensor x: queries [N, D]
    :param Tensor keys: keys [M, D]
    :param Tensor values: values [M, D]
    :param ParamStore store: parameter store
    :param str name: block name
    :param AttentionConfig cfg: attention configuration
    :param cross_mask: allowed query-key pairs [N, M]

    :returns: queries [N, D]
    :rtype: Tensor
    """
    h = apply_layer_norm(x, store, f"{name}.ln1")
    x = x + multi_head_attention(
        h, h, h, store, f"{name}.self", cfg, training=store.training
    )
    h = apply_layer_norm(x, store, f"{name}.ln2")
    x = x + multi_head_attention(
        h,
        keys,
        values,
        store,
        f"{name}.cross",
        cfg,
        mask=cross_mask,
        training=store.training,
    )
    h = apply_layer_norm(x, store, f"{name}.ln3")
    return x + feed_forward(h, store, f"{name}.ffn")


def l1_loss(pred, target):
    """Mean absolute error.

    :param Tensor pred: prediction
    :param Tensor target: target of the same shape

    :raises DimensionError: when shapes differ

    :returns: loss
    :rtype: Tensor
    """
    if tuple(pred.shape) != tuple(target.shape):
        raise DimensionError(
            f"prediction {tuple(pred.shape)} and target {tuple(target.shape)} differ"
        )
    if pred.numel() == 0:
        return pred.sum()
    return (pred - target).abs().mean()


def focal_loss(logits, target_class, alpha=0.25, gamma=2.0):
    """Softmax focal loss −α(1−p_t)^γ log(p_t), averaged.

    :param Tensor logits: logits [N, K]
    :param target_class: target classes [N]
    :param float alpha: weight
    :param float gamma: focusing exponent

    :raises ValueError: when a target class is out of range

    :returns: loss
    :rtype: Tensor
    """
    target = torch.as_tensor(target_class, dtype=torch.long).reshape(-1)
    if logits.shape[0] == 0:
        return logits.sum() * 0.0
    if target.numel() and (target.min() < 0 or target.max() >= logits.shape[-1]):
        raise ValueError(f"target classes not in [0,{logits.shape[-1]})")
    log_p = F.log_softmax(logits, dim=-1)
    log_pt = log_p.gather(-1, target[:, None]).squeeze(-1)
    pt = log_pt.exp()
    return (-alpha * (1.0 - pt) ** gamma * log_pt).mean()


def adamw_step(store, lr, betas=(0.9, 0.999), weight_decay=0.01, eps=1e-8):
    """Apply one AdamW update with decoupled weight decay.

    Missing gradients count as zero gradients.

    :param ParamStore store: parameter store
    :param float lr: learning rate
    :param tuple betas: moment decay rates
    :param float weight_decay: decoupled weight decay
    :param float eps: denominator offset

    :raises NumericError: when a gradient is not finite
    """
    for name, tensor in store.items():
        if tensor.grad is None:
            tensor.grad = torch.zeros_like(tensor)
        elif not bool(torch.isfinite(tensor.grad).all()):
            raise NumericError(
                f"non-finite gradient in parameter '{name}'", parameter=name
            )
    if store._optimizer is None:
        store._optimizer = torch.optim.AdamW(
            list(store.params.values()),
            lr=lr,
            betas=tuple(betas),
            eps=eps,
            weight_decay=weight_decay,
            foreach=False,
        )
    for group in store._optimizer.param_groups:
        group.update(lr=lr, betas=tuple(betas), eps=eps, weight_decay=weight_decay)
    store._optimizer.step()
    store.step += 1


def checkable_names(store):
    """Parameters whose gradient does not vanish identically.

    Attention key biases shift every score of a query by the same amount,
    so softmax cancels them and finite differences only see round-off.

    :param ParamStore store: parameter store

    :returns: parameter names
    :rtype: list
    """
    return [name for name in store.params if not name.endswith(".k.b")]


def grad_check(f, store, eps=1e-5, tol=1e-4, names=None, entries=None, floor=1e-6):
    """Compare analytic gradients with central finite differences.

    :param callable f: function of the store's parameters returning a scalar
    :param ParamStore store: parameter store (eval mode)
    :param float eps: perturbation
    :param float tol: largest accepted relative error
    :param list names: parameters to check (all if empty)
    :param int entries: entries sampled per parameter (all if empty)
    :param float floor: smallest gradient norm used as denominator

    :raises GradCheckError: when f is not deterministic

    :returns: report
    :rtype: GradCheckReport
    """
    logger = logging.getLogger().getChild(grad_check.__name__)
    if store.training:
        raise GradCheckError("gradient checks need eval mode (store.eval())")
    names = list(names or store.params)
    store.zero_grad()
    value = f()
    value.backward()
    with torch.no_grad():
        if float(f()) != float(value.detach()):
            raise GradCheckError("function is not deterministic, switch to eval mode")
        rng = make_rng(0, "grad_check")
        errors = {}
        for name in names:
            tensor = store[name]
            analytic = tensor.grad
            if analytic is None:
                analytic = torch.zeros_like(tensor)
            analytic = analytic.detach().reshape(-1).clone()
            flat = tensor.view(-1)
            indices = np.arange(flat.numel())
            if entries is not None and entries < flat.numel():
                indices = np.sort(rng.choice(flat.numel(), size=entries, replace=False))
            numeric = torch.zeros(len(indices), dtype=analytic.dtype)
            for i, index in enumerate(indices):
                original = float(flat[index])
                flat[index] = original + eps
                plus = float(f())
                flat[index] = original - eps
                minus = float(f())
                flat[index] = original
                numeric[i] = (plus - minus) / (2 * eps)
            analytic = analytic[torch.as_tensor(indices, dtype=torch.long)]
            denominator = max(
                float(analytic.norm()), float(numeric.norm()), floor
            )
            errors[name] = float((analytic - numeric).norm()) / denominator
    store.zero_grad()
    worst = max(errors, key=errors.get) if errors else ""
    max_error = errors[worst] if errors else 0.0
    logger.debug(f"max relative error {max_error:.3e} in '{worst}'")
    return GradCheckReport(max_error, worst, errors, max_error <= tol)
