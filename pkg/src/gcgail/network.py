"""Small feed-forward networks with hand-written backpropagation and Adam.

Three shapes are used by the trainers: a softmax policy (actor), a linear value head (critic) and a
sigmoid discriminator. All share the same hidden stack of dense ReLU layers. Everything is float64.

Conventions:
    * weights are stored as ``[out, in]`` matrices and inputs as row vectors, so a layer computes
      ``x @ w.T + b``; a 1-D input is treated as a batch of one;
    * the ReLU subgradient at exactly 0 is 0;
    * gradients of a batch are summed over rows, callers scale by the batch size.
"""

from collections.abc import Callable
from dataclasses import dataclass
from enum import Enum
from typing import Any, NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveInt, field_validator

from gcgail.errors import NumericError, ShapeError

DEFAULT_HIDDEN = (64, 64)


class HeadKind(str, Enum):
    """Output activation of a network."""

    SOFTMAX = 'softmax'
    LINEAR = 'linear'
    SIGMOID = 'sigmoid'


class MlpSpec(BaseModel):
    """Architecture of a network: input width, hidden widths and output head."""

    model_config = ConfigDict(frozen=True, extra='forbid')

    input_dim: PositiveInt
    hidden_dims: tuple[PositiveInt, ...] = Field(default=DEFAULT_HIDDEN)
    head: HeadKind
    n_actions: PositiveInt = 2

    @field_validator('hidden_dims')
    @classmethod
    def _non_empty(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if not value:
            msg = 'hidden_dims must contain at least one layer'
            raise ValueError(msg)
        return value

    @property
    def output_dim(self) -> int:
        """Width of the head: n_actions for softmax, 1 otherwise."""
        return self.n_actions if self.head is HeadKind.SOFTMAX else 1

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        """(out, in) shape of every weight matrix, first layer first."""
        widths = [self.input_dim, *self.hidden_dims, self.output_dim]
        return [(widths[k + 1], widths[k]) for k in range(len(widths) - 1)]

    @classmethod
    def policy(cls, input_dim: int, n_actions: int = 2, hidden_dims: tuple[int, ...] = DEFAULT_HIDDEN) -> 'MlpSpec':
        """Actor shape: softmax over actions."""
        return cls(input_dim=input_dim, hidden_dims=hidden_dims, head=HeadKind.SOFTMAX, n_actions=n_actions)

    @classmethod
    def value(cls, input_dim: int, hidden_dims: tuple[int, ...] = DEFAULT_HIDDEN) -> 'MlpSpec':
        """Critic shape: one linear output."""
        return cls(input_dim=input_dim, hidden_dims=hidden_dims, head=HeadKind.LINEAR)

    @classmethod
    def discriminator(cls, input_dim: int, hidden_dims: tuple[int, ...] = DEFAULT_HIDDEN) -> 'MlpSpec':
        """Discriminator shape: one sigmoid output."""
        return cls(input_dim=input_dim, hidden_dims=hidden_dims, head=HeadKind.SIGMOID)


class Layer(NamedTuple):
    """Weight matrix ``[out, in]`` and bias vector ``[out]``."""

    w: np.ndarray
    b: np.ndarray


Gradients = tuple[Layer, ...]


@dataclass(frozen=True)
class NetworkParams:
    """Immutable parameter set of one network."""

    spec: MlpSpec
    layers: tuple[Layer, ...]

    def __post_init__(self) -> None:
        """Check that layer shapes chain and match the spec."""
        expected = self.spec.layer_dims
        if len(self.layers) != len(expected):
            msg = f'Expected {len(expected)} layers, got {len(self.layers)}'
            raise ShapeError(msg)
        for k, (layer, (rows, cols)) in enumerate(zip(self.layers, expected, strict=True)):
            if layer.w.shape != (rows, cols) or layer.b.shape != (rows,):
                msg = f'Layer {k}: expected w {(rows, cols)} and b {(rows,)}, got {layer.w.shape} and {layer.b.shape}'
                raise ShapeError(msg)

    @property
    def n_parameters(self) -> int:
        """Total number of scalar parameters."""
        return sum(layer.w.size + layer.b.size for layer in self.layers)

    def is_finite(self) -> bool:
        """True when no weight or bias is NaN or infinite."""
        return all(np.isfinite(layer.w).all() and np.isfinite(layer.b).all() for layer in self.layers)


def init_params(spec: MlpSpec, rng: np.random.Generator | int) -> NetworkParams:
    """Glorot-uniform weights, zero biases.

    Args:
        spec: Architecture to build.
        rng: A numpy Generator or an integer seed.

    Returns:
        Freshly initialized parameters.
    """
    rng = np.random.default_rng(rng)
    layers = []
    for rows, cols in spec.layer_dims:
        limit = np.sqrt(6.0 / (rows + cols))
        layers.append(Layer(w=rng.uniform(-limit, limit, size=(rows, cols)), b=np.zeros(rows)))
    return NetworkParams(spec=spec, layers=tuple(layers))


def zeros_like(params: NetworkParams) -> Gradients:
    """Zero-filled structure with the shapes of `params`."""
    return tuple(Layer(np.zeros_like(layer.w), np.zeros_like(layer.b)) for layer in params.layers)


def _as_batch(params: NetworkParams, inputs: np.ndarray) -> np.ndarray:
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 1:
        x = x[np.newaxis, :]
    if x.ndim != 2 or x.shape[1] != params.spec.input_dim:  # noqa: PLR2004
        msg = f'Input width {x.shape[-1] if x.ndim else 0} does not match input_dim {params.spec.input_dim}'
        raise ShapeError(msg)
    return x


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise log-softmax, finite even for saturated logits."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Logistic function evaluated without overflow for either sign."""
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _apply_head(kind: HeadKind, z: np.ndarray) -> np.ndarray:
    if kind is HeadKind.SOFTMAX:
        return softmax(z)
    if kind is HeadKind.SIGMOID:
        return sigmoid(z)
    return z


@dataclass(frozen=True)
class ForwardCache:
    """Intermediate values of a batched forward pass, kept for backprop."""

    activations: tuple[np.ndarray, ...]  # input of every layer
    preactivations: tuple[np.ndarray, ...]  # affine output of every layer, last one is the head logit
    output: np.ndarray

    @property
    def logits(self) -> np.ndarray:
        """Pre-activation of the head."""
        return self.preactivations[-1]


def forward_cache(params: NetworkParams, inputs: np.ndarray) -> ForwardCache:
    """Batched forward pass that keeps every intermediate value.

    Args:
        params: Network parameters.
        inputs: ``[n, input_dim]`` batch or a single ``[input_dim]`` vector.

    Returns:
        The cache; ``output`` is always 2-D.
    """
    a = _as_batch(params, inputs)
    activations = [a]
    preactivations = []
    last = len(params.layers) - 1
    for k, layer in enumerate(params.layers):
        z = a @ layer.w.T + layer.b
        preactivations.append(z)
        if k < last:
            a = np.maximum(z, 0.0)
            activations.append(a)
    output = _apply_head(params.spec.head, preactivations[-1])
    return ForwardCache(activations=tuple(activations), preactivations=tuple(preactivations), output=output)


def forward(params: NetworkParams, inputs: np.ndarray) -> np.ndarray:
    """Network output for one vector (returns a vector) or a batch (returns ``[n, output_dim]``)."""
    output = forward_cache(params, inputs).output
    return output[0] if np.ndim(inputs) == 1 else output


def logits(params: NetworkParams, inputs: np.ndarray) -> np.ndarray:
    """Head pre-activation for a batch, ``[n, output_dim]``."""
    return forward_cache(params, inputs).logits


def backprop_logits(params: NetworkParams, cache: ForwardCache, grad_logits: np.ndarray) -> Gradients:
    """Reverse-mode pass starting from ∂loss/∂(head pre-activation).

    Args:
        params: Parameters used for the forward pass.
        cache: Cache returned by `forward_cache` on the same parameters.
        grad_logits: ``[n, output_dim]`` gradient at the head pre-activation.

    Returns:
        ∂loss/∂w and ∂loss/∂b for every layer, summed over the batch.
    """
    delta = np.asarray(grad_logits, dtype=np.float64).reshape(cache.logits.shape)
    if not np.isfinite(delta).all():
        msg = 'Non-finite gradient reached backprop'
        raise NumericError(msg)
    grads: list[Layer] = []
    for k in range(len(params.layers) - 1, -1, -1):
        a_in = cache.activations[k]
        grads.append(Layer(w=delta.T @ a_in, b=delta.sum(axis=0)))
        if k > 0:
            delta = (delta @ params.layers[k].w) * (cache.preactivations[k - 1] > 0.0)
    return tuple(reversed(grads))


def head_jacobian_product(kind: HeadKind, output: np.ndarray, grad_output: np.ndarray) -> np.ndarray:
    """Map ∂loss/∂output to ∂loss/∂logit for the given head."""
    if kind is HeadKind.SOFTMAX:
        return output * (grad_output - (grad_output * output).sum(axis=-1, keepdims=True))
    if kind is HeadKind.SIGMOID:
        return grad_output * output * (1.0 - output)
    return grad_output


def backprop(params: NetworkParams, inputs: np.ndarray, loss_grad_at_output: np.ndarray) -> Gradients:
    """Gradient of a loss with respect to every weight and bias.

    Args:
        params: Network parameters.
        inputs: Vector or batch that produced the output.
        loss_grad_at_output: ∂loss/∂output, same shape as the network output.

    Returns:
        Gradients with the layer structure of `params`.

    Raises:
        ShapeError: The upstream gradient does not match the output dimension.
        NumericError: The input or the upstream gradient contains non-finite values.
    """
    x = np.asarray(inputs, dtype=np.float64)
    g = np.asarray(loss_grad_at_output, dtype=np.float64)
    if not (np.isfinite(x).all() and np.isfinite(g).all()):
        msg = 'Non-finite input or gradient passed to backprop'
        raise NumericError(msg)
    cache = forward_cache(params, x)
    g = np.atleast_2d(g)
    if g.shape != cache.output.shape:
        msg = f'Upstream gradient shape {g.shape} does not match output shape {cache.output.shape}'
        raise ShapeError(msg)
    return backprop_logits(params, cache, head_jacobian_product(params.spec.head, cache.output, g))


@dataclass(frozen=True)
class AdamState:
    """First and second moment estimates plus hyperparameters of one Adam optimizer."""

    first_moment: Gradients
    second_moment: Gradients
    step_count: int = 0
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps_num: float = 1e-8

    @classmethod
    def for_params(cls, params: NetworkParams, learning_rate: float = 1e-4, **kwargs: float) -> 'AdamState':
        """Zero moments matching `params`."""
        return cls(first_moment=zeros_like(params), second_moment=zeros_like(params),
                   learning_rate=learning_rate, **kwargs)


def _check_grads(params: NetworkParams, grads: Gradients) -> None:
    if len(grads) != len(params.layers):
        msg = f'Gradient has {len(grads)} layers, parameters have {len(params.layers)}'
        raise ShapeError(msg)
    for k, (g, p) in enumerate(zip(grads, params.layers, strict=True)):
        if g.w.shape != p.w.shape or g.b.shape != p.b.shape:
            msg = f'Gradient shape mismatch at layer {k}'
            raise ShapeError(msg)
        if not (np.isfinite(g.w).all() and np.isfinite(g.b).all()):
            msg = f'Non-finite gradient at layer {k}'
            raise NumericError(msg)


def adam_update(params: NetworkParams, grads: Gradients, state: AdamState) -> tuple[NetworkParams, AdamState]:
    """One bias-corrected Adam descent step.

    Args:
        params: Current parameters.
        grads: ∂loss/∂params (descend; negate for ascent).
        state: Optimizer state.

    Returns:
        New parameters and new optimizer state; the inputs are not modified.
    """
    _check_grads(params, grads)
    t = state.step_count + 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** t
    corr2 = 1.0 - b2 ** t
    new_layers, new_m, new_v = [], [], []
    for p, g, m, v in zip(params.layers, grads, state.first_moment, state.second_moment, strict=True):
        m_w = b1 * m.w + (1.0 - b1) * g.w
        m_b = b1 * m.b + (1.0 - b1) * g.b
        v_w = b2 * v.w + (1.0 - b2) * g.w * g.w
        v_b = b2 * v.b + (1.0 - b2) * g.b * g.b
        step_w = state.learning_rate * (m_w / corr1) / (np.sqrt(v_w / corr2) + state.eps_num)
        step_b = state.learning_rate * (m_b / corr1) / (np.sqrt(v_b / corr2) + state.eps_num)
        new_layers.append(Layer(p.w - step_w, p.b - step_b))
        new_m.append(Layer(m_w, m_b))
        new_v.append(Layer(v_w, v_b))
    new_params = NetworkParams(spec=params.spec, layers=tuple(new_layers))
    if not new_params.is_finite():
        msg = 'Adam step produced non-finite parameters'
        raise NumericError(msg)
    new_state = AdamState(first_moment=tuple(new_m), second_moment=tuple(new_v), step_count=t,
                          learning_rate=state.learning_rate, beta1=b1, beta2=b2, eps_num=state.eps_num)
    return new_params, new_state


@dataclass(frozen=True)
class NetworkState:
    """Parameters bundled with the optimizer that trains them."""

    params: NetworkParams
    adam: AdamState

    @classmethod
    def create(cls, spec: MlpSpec, rng: np.random.Generator | int, learning_rate: float) -> 'NetworkState':
        """Initialize parameters and a fresh optimizer."""
        params = init_params(spec, rng)
        return cls(params=params, adam=AdamState.for_params(params, learning_rate=learning_rate))

    def step(self, grads: Gradients) -> 'NetworkState':
        """Apply one Adam descent step."""
        params, adam = adam_update(self.params, grads, self.adam)
        return NetworkState(params=params, adam=adam)


LossFn = Callable[[np.ndarray], tuple[float, np.ndarray]]

_GRAD_CHECK_STEP = 1e-5
_GRAD_CHECK_FLOOR = 1e-6
_KINK_MARGIN = 1e-3


def _relative_error(analytic: float, numeric: float) -> float:
    if analytic == 0.0 and numeric == 0.0:
        return 0.0
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), _GRAD_CHECK_FLOOR)


def _away_from_kinks(params: NetworkParams, rng: np.random.Generator, tries: int = 100) -> np.ndarray:
    x = rng.normal(size=params.spec.input_dim)
    for _ in range(tries):
        cache = forward_cache(params, x)
        if all((np.abs(z) > _KINK_MARGIN).all() for z in cache.preactivations[:-1]):
            return x
        x = rng.normal(size=params.spec.input_dim)
    return x


def grad_check(spec: MlpSpec,
               loss: LossFn,
               seed: int,
               *,
               params: NetworkParams | None = None,
               inputs: np.ndarray | None = None) -> float:
    """Compare backprop against central finite differences on every parameter.

    Relative error per entry is ``|a - n| / max(|a|, |n|, 1e-6)`` and 0 when both are 0. The
    input is redrawn until no hidden unit sits within 1e-3 of its ReLU kink.

    Args:
        spec: Architecture to build when `params` is not given.
        loss: Maps a network output vector to ``(loss value, ∂loss/∂output)``.
        seed: Seeds the initialization and the input draw.
        params: Optional explicit parameters instead of a random initialization.
        inputs: Optional explicit input vector.

    Returns:
        The maximum relative error over all parameters.
    """
    rng = np.random.default_rng(seed)
    if params is None:
        params = init_params(spec, rng)
    x = _away_from_kinks(params, rng) if inputs is None else np.asarray(inputs, dtype=np.float64)

    _, grad_out = loss(forward(params, x))
    analytic = backprop(params, x, grad_out)

    def loss_at(layers: tuple[Layer, ...]) -> float:
        return loss(forward(NetworkParams(spec=params.spec, layers=layers), x))[0]

    worst = 0.0
    for k, layer in enumerate(params.layers):
        for name in ('w', 'b'):
            base = getattr(layer, name)
            grad = getattr(analytic[k], name)
            for idx in np.ndindex(base.shape):
                values = []
                for sign in (1.0, -1.0):
                    bumped = base.copy()
                    bumped[idx] += sign * _GRAD_CHECK_STEP
                    trial = list(params.layers)
                    trial[k] = layer._replace(**{name: bumped})
                    values.append(loss_at(tuple(trial)))
                numeric = (values[0] - values[1]) / (2.0 * _GRAD_CHECK_STEP)
                worst = max(worst, _relative_error(float(grad[idx]), numeric))
    return worst


def _layers_to_json(layers: tuple[Layer, ...]) -> list[dict[str, Any]]:
    return [{'w': layer.w.ravel().tolist(), 'rows': layer.w.shape[0], 'cols': layer.w.shape[1],
             'b': layer.b.tolist()} for layer in layers]


def _layers_from_json(items: list[dict[str, Any]]) -> tuple[Layer, ...]:
    return tuple(Layer(w=np.asarray(item['w'], dtype=np.float64).reshape(item['rows'], item['cols']),
                       b=np.asarray(item['b'], dtype=np.float64)) for item in items)


def network_to_dict(params: NetworkParams, adam: AdamState | None = None) -> dict[str, Any]:
    """Checkpoint document ``{spec, layers, adam}`` with row-major flattened weights."""
    doc: dict[str, Any] = {'spec': params.spec.model_dump(mode='json'), 'layers': _layers_to_json(params.layers)}
    if adam is not None:
        doc['adam'] = {'m': _layers_to_json(adam.first_moment),
                       'v': _layers_to_json(adam.second_moment),
                       't': adam.step_count,
                       'learning_rate': adam.learning_rate,
                       'beta1': adam.beta1,
                       'beta2': adam.beta2,
                       'eps_num': adam.eps_num}
    return doc


def network_from_dict(doc: dict[str, Any]) -> tuple[NetworkParams, AdamState | None]:
    """Inverse of `network_to_dict`; bit-exact for finite float64 values."""
    params = NetworkParams(spec=MlpSpec.model_validate(doc['spec']), layers=_layers_from_json(doc['layers']))
    adam_doc = doc.get('adam')
    if adam_doc is None:
        return params, None
    adam = AdamState(first_moment=_layers_from_json(adam_doc['m']),
                     second_moment=_layers_from_json(adam_doc['v']),
                     step_count=int(adam_doc['t']),
                     learning_rate=float(adam_doc.get('learning_rate', 1e-4)),
                     beta1=float(adam_doc.get('beta1', 0.9)),
                     beta2=float(adam_doc.get('beta2', 0.999)),
                     eps_num=float(adam_doc.get('eps_num', 1e-8)))
    return params, adam
