"""
Learnable structure-aware noise schedules.

Each node and each node pair gets its own cumulative keep probability

    alpha_bar(t) = sigmoid(-zeta(t)),
    zeta(t) = zeta_hat(t) * (zeta_max - zeta_min) + zeta_min,
    zeta_hat(t) = sum_k f_k t^k,

where ``f`` is the softmax output of a small network fed with the
element's category, its RRWP slice and an optional condition. Because
``f`` lies on the simplex, ``zeta_hat(0) = 0``, ``zeta_hat(1) = 1`` and
``alpha_bar`` is nonincreasing in ``t``.

The mask-and-replace algebra (per-step matrices, the cumulative
coefficients and the marginal over ``K + 1`` states) lives here too.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from autodiff import (
    MLP,
    ArrayLike,
    Dense,
    ParamStore,
    Tensor,
    concat,
    lift,
    sigmoid,
    softmax,
    tsum,
)
from molecular_graph import NoisyGraph
from pipeline_errors import InputDomainError
from structural_encoding import RRWPTensor, node_category_features, pair_category_features

logger = logging.getLogger(__name__)

ROW_SUM_TOLERANCE = 1e-9
PROBABILITY_TOLERANCE = 1e-12


@dataclass
class SchedulerConfig:
    """Bounds and widths of the scheduling networks ([scheduler] section)."""

    k_poly: int = 6
    zeta_min: float = -10.0
    zeta_max: float = 10.0
    hidden_dim: int = 32

    def __post_init__(self):
        if self.k_poly < 1:
            raise InputDomainError(f"k_poly must be >= 1, got {self.k_poly}")
        if not self.zeta_min < self.zeta_max:
            raise InputDomainError(
                f"zeta_min ({self.zeta_min}) must be below zeta_max ({self.zeta_max})"
            )
        if self.hidden_dim < 1:
            raise InputDomainError(f"hidden_dim must be >= 1, got {self.hidden_dim}")


def _check_time(t: float) -> float:
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise InputDomainError(f"diffusion time must lie in [0, 1], got {t}")
    return t


def alpha_bar(
    weights: ArrayLike, t: float, zeta_min: float = -10.0, zeta_max: float = 10.0
) -> Tuple[Tensor, Tensor]:
    """
    Cumulative keep probability and its time derivative.

    Args:
        weights: Simplex weights ``f_1..f_K`` along the last axis.
        t: Diffusion time in ``[0, 1]``.

    Returns:
        ``(alpha_bar, d alpha_bar / dt)``, both differentiable in ``weights``.
    """
    t = _check_time(t)
    weights = lift(weights)
    k = np.arange(1, weights.shape[-1] + 1, dtype=np.float64)
    span = zeta_max - zeta_min
    zeta_hat = tsum(weights * t**k, axis=-1)
    keep = sigmoid((zeta_hat * span + zeta_min) * -1.0)
    slope = tsum(weights * (k * t ** (k - 1)), axis=-1)
    rate = keep * (1.0 - keep) * slope * -span
    return keep, rate


def finite_difference_rate(
    weights: ArrayLike,
    t: float,
    zeta_min: float = -10.0,
    zeta_max: float = 10.0,
    step: float = 1e-6,
) -> np.ndarray:
    """Central-difference estimate of the rate, for cross-checking."""
    low, high = max(t - step, 0.0), min(t + step, 1.0)
    a_high = alpha_bar(weights, high, zeta_min, zeta_max)[0].value
    a_low = alpha_bar(weights, low, zeta_min, zeta_max)[0].value
    return (a_high - a_low) / (high - low)


def interpolated_rate(
    weights: ArrayLike,
    t: float,
    num_steps: int,
    zeta_min: float = -10.0,
    zeta_max: float = 10.0,
) -> np.ndarray:
    """Slope of the piecewise-linear interpolation of ``alpha_bar`` on the ``s / T`` grid."""
    t = _check_time(t)
    segment = min(int(np.floor(t * num_steps)), num_steps - 1)
    left, right = segment / num_steps, (segment + 1) / num_steps
    a_left = alpha_bar(weights, left, zeta_min, zeta_max)[0].value
    a_right = alpha_bar(weights, right, zeta_min, zeta_max)[0].value
    return (a_right - a_left) * num_steps


def build_transition(alpha: float, beta: float, gamma: float, num_classes: int) -> np.ndarray:
    """
    Mask-and-replace transition matrix over ``num_classes + 1`` states.

    Row ``i`` is the distribution of the next state given state ``i``;
    the last state is the absorbing mask.

    Raises:
        InputDomainError: If a probability leaves ``[0, 1]`` or the rows
            do not sum to one.
    """
    if num_classes < 1:
        raise InputDomainError(f"need at least one class, got {num_classes}")
    for name, value in (("alpha", alpha), ("beta", beta), ("gamma", gamma)):
        if not -PROBABILITY_TOLERANCE <= value <= 1.0 + PROBABILITY_TOLERANCE:
            raise InputDomainError(f"{name} = {value} is not a probability")
    deficit = 1.0 - (alpha + (num_classes - 1) * gamma + beta)
    if abs(deficit) > ROW_SUM_TOLERANCE:
        raise InputDomainError(
            f"alpha + (K-1) gamma + beta must equal 1, deficit is {deficit:.3e}"
        )
    q = np.full((num_classes + 1, num_classes + 1), gamma, dtype=np.float64)
    np.fill_diagonal(q, alpha)
    q[:, num_classes] = beta
    q[num_classes, :] = 0.0
    q[num_classes, num_classes] = 1.0
    return q


def cumulate(alphas: Sequence[float], betas: Sequence[float]) -> Tuple[float, float, float]:
    """``(prod alpha, 1 - prod (1 - beta), remainder)`` over steps ``1..t``."""
    alphas = np.asarray(alphas, dtype=np.float64)
    betas = np.asarray(betas, dtype=np.float64)
    if alphas.shape != betas.shape or alphas.size == 0:
        raise InputDomainError("alphas and betas must be nonempty and equally long")
    if np.any((alphas < 0) | (alphas > 1) | (betas < 0) | (betas > 1)):
        raise InputDomainError("per-step alphas and betas must lie in [0, 1]")
    keep = float(np.prod(alphas))
    mask = float(1.0 - np.prod(1.0 - betas))
    replace = 1.0 - keep - mask
    if replace < -PROBABILITY_TOLERANCE:
        raise InputDomainError(
            f"inconsistent schedule: replace share {replace:.3e} is negative"
        )
    return keep, mask, max(replace, 0.0)


def marginal(
    x0, keep: ArrayLike, mask: ArrayLike, replace: ArrayLike, num_classes: int
) -> np.ndarray:
    """
    Distribution of ``x_t`` over ``num_classes + 1`` states given clean ``x0``.

    The original class keeps ``keep``, the mask gets ``mask`` and
    ``replace`` is spread uniformly over the other classes.
    """
    x0 = np.asarray(x0, dtype=np.int64)
    keep, mask, replace = (np.broadcast_to(np.asarray(v, dtype=np.float64), x0.shape) for v in (keep, mask, replace))
    total = keep + mask + replace
    if np.any(np.abs(total - 1.0) > ROW_SUM_TOLERANCE):
        raise InputDomainError("keep + mask + replace must equal 1")
    if num_classes == 1 and np.any(replace > PROBABILITY_TOLERANCE):
        raise InputDomainError("a single class cannot be replaced")
    spread = replace / max(num_classes - 1, 1)
    out = np.repeat(spread[..., None], num_classes + 1, axis=-1)
    np.put_along_axis(out, x0[..., None], keep[..., None], axis=-1)
    out[..., num_classes] = mask
    return out


def per_step_from_cumulative(
    keep: Sequence[float], mask: Sequence[float], replace: Sequence[float], num_classes: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Per-step ``(alpha_t, beta_t, gamma_t)`` for ``t = 1..T`` whose matrix
    product reproduces the given cumulative coefficients from a one-hot
    start. The clean state ``(1, 0, 0)`` is implied at ``t = 0``.

    Raises:
        InputDomainError: If no valid per-step probabilities exist.
    """
    a = np.concatenate([[1.0], np.asarray(keep, dtype=np.float64)])
    b = np.concatenate([[0.0], np.asarray(mask, dtype=np.float64)])
    c = np.concatenate([[0.0], np.asarray(replace, dtype=np.float64)])
    steps = len(a) - 1
    alphas, betas, gammas = np.zeros(steps), np.zeros(steps), np.zeros(steps)
    for t in range(1, steps + 1):
        unmasked = 1.0 - b[t - 1]
        beta = (b[t] - b[t - 1]) / unmasked if unmasked > PROBABILITY_TOLERANCE else 0.0
        numerator = a[t - 1] * (1.0 - beta) - a[t]
        denominator = a[t - 1] * (num_classes - 1) - c[t - 1]
        if num_classes == 1 or abs(denominator) <= PROBABILITY_TOLERANCE:
            if abs(numerator) > 1e-9:
                raise InputDomainError(f"step {t}: no replace probability matches the schedule")
            gamma = 0.0
        else:
            gamma = numerator / denominator
        alpha = 1.0 - beta - (num_classes - 1) * gamma
        for name, value in (("alpha", alpha), ("beta", beta), ("gamma", gamma)):
            if not -1e-9 <= value <= 1.0 + 1e-9:
                raise InputDomainError(f"step {t}: derived {name} = {value:.6g} is not a probability")
        alphas[t - 1], betas[t - 1], gammas[t - 1] = (
            np.clip(alpha, 0.0, 1.0),
            np.clip(beta, 0.0, 1.0),
            np.clip(gamma, 0.0, 1.0),
        )
    return alphas, betas, gammas


@dataclass
class ScheduleState:
    """Per-element cumulative coefficients at one diffusion time."""

    t: float
    node_keep: Tensor
    node_rate: Tensor
    node_replace: Tensor
    edge_keep: Tensor
    edge_rate: Tensor
    edge_replace: Tensor

    @property
    def node_mask(self) -> Tensor:
        return 1.0 - self.node_keep - self.node_replace

    @property
    def edge_mask(self) -> Tensor:
        return 1.0 - self.edge_keep - self.edge_replace

    def node_probabilities(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.node_keep.value, self.node_mask.value, self.node_replace.value

    def edge_probabilities(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.edge_keep.value, self.edge_mask.value, self.edge_replace.value


class _ElementScheduler:
    """``f(W h, W_s P, c)``: simplex weights for one element family."""

    def __init__(
        self,
        store: ParamStore,
        name: str,
        category_dim: int,
        walk_length: int,
        condition_dim: int,
        config: SchedulerConfig,
        rng: np.random.Generator,
        replace_head: bool,
    ):
        hidden = config.hidden_dim
        self.condition_dim = condition_dim
        self.category_proj = Dense(store, f"{name}/category", category_dim, hidden, rng, bias=False)
        self.structure_proj = Dense(store, f"{name}/structure", walk_length, hidden, rng, bias=False)
        self.body = MLP(store, f"{name}/body", 2 * hidden + condition_dim, hidden, config.k_poly, rng)
        self.replace = (
            Dense(store, f"{name}/replace", 2 * hidden + condition_dim, 1, rng) if replace_head else None
        )

    def _inputs(self, categories, structure, condition) -> Tensor:
        shape = categories.shape[:-1]
        if condition is None:
            condition = np.zeros(self.condition_dim)
        condition = np.broadcast_to(np.asarray(condition, dtype=np.float64), shape + (self.condition_dim,))
        return concat(
            [self.category_proj(categories), self.structure_proj(structure), condition],
            axis=-1,
        )

    def __call__(self, categories, structure, condition=None) -> Tuple[Tensor, Optional[Tensor]]:
        x = self._inputs(categories, structure, condition)
        weights = softmax(self.body(x), axis=-1)
        replace_logit = None
        if self.replace is not None:
            replace_logit = self.replace(x).reshape(x.shape[:-1])
        return weights, replace_logit


class StructureAwareScheduler:
    """
    Node and edge scheduling networks sharing one parameter store.

    With ``replace=True`` (latent-code mode) each element also gets a
    replace share ``rho = sigmoid(s) * sigmoid(g(x)) * (1 - t)`` of its
    corrupted mass, so ``replace_bar = (1 - alpha_bar) * rho`` and the
    prior at ``t = 1`` stays fully masked.
    """

    def __init__(
        self,
        store: ParamStore,
        config: SchedulerConfig,
        num_atom_classes: int,
        num_bond_classes: int,
        walk_length: int,
        condition_dim: int,
        rng: np.random.Generator,
        replace: bool = False,
        prefix: str = "scheduler",
    ):
        self.config = config
        self.num_atom_classes = num_atom_classes
        self.num_bond_classes = num_bond_classes
        self.walk_length = walk_length
        self.replace = replace
        self.prefix = prefix
        self.node_net = _ElementScheduler(
            store, f"{prefix}/node", num_atom_classes + 1, walk_length, condition_dim, config, rng, replace
        )
        self.edge_net = _ElementScheduler(
            store,
            f"{prefix}/edge",
            num_bond_classes + 1 + num_atom_classes + 1,
            walk_length,
            condition_dim,
            config,
            rng,
            replace,
        )
        self.replace_scale = store.add(f"{prefix}/replace_scale", 0.0) if replace else None

    def schedule_outputs(
        self, graph: NoisyGraph, encoding: RRWPTensor, condition=None
    ) -> Tuple[Tensor, Tensor]:
        """Simplex weights: ``(n, k_poly)`` for nodes and ``(n, n, k_poly)`` for pairs."""
        node_w, _ = self._node_outputs(graph, encoding, condition)
        edge_w, _ = self._edge_outputs(graph, encoding, condition)
        return node_w, edge_w

    def _node_outputs(self, graph, encoding, condition):
        categories = node_category_features(graph.atom_types, self.num_atom_classes)
        return self.node_net(categories, encoding.node_diag, condition)

    def _edge_outputs(self, graph, encoding, condition):
        categories = pair_category_features(
            graph.atom_types, graph.bond_types, self.num_atom_classes, self.num_bond_classes
        )
        return self.edge_net(categories, encoding.symmetric(), condition)

    def _replace_share(self, logit: Optional[Tensor], t: float, keep: Tensor) -> Tensor:
        if logit is None:
            return keep * 0.0
        rho = sigmoid(self.replace_scale) * sigmoid(logit) * (1.0 - t)
        return (1.0 - keep) * rho

    def schedule(
        self, graph: NoisyGraph, encoding: RRWPTensor, t: float, condition=None
    ) -> ScheduleState:
        """
        Evaluate every element's cumulative coefficients at time ``t``.

        ``graph`` supplies the element categories the networks read and
        must hold no mask tokens: the clean graph during training, the
        sampler's point estimate while sampling.
        """
        return self.schedule_grid(graph, encoding, [t], condition)[0]

    def schedule_grid(
        self, graph: NoisyGraph, encoding: RRWPTensor, times: Sequence[float], condition=None
    ) -> List[ScheduleState]:
        """One network pass, evaluated at every time in ``times``."""
        times = [_check_time(t) for t in times]
        if encoding.n != graph.n:
            raise InputDomainError(f"RRWP covers {encoding.n} nodes, graph has {graph.n}")
        if graph.has_mask():
            raise InputDomainError("the scheduler reads clean categories; got a graph with mask tokens")
        node_w, node_logit = self._node_outputs(graph, encoding, condition)
        edge_w, edge_logit = self._edge_outputs(graph, encoding, condition)
        zmin, zmax = self.config.zeta_min, self.config.zeta_max
        states = []
        for t in times:
            node_keep, node_rate = alpha_bar(node_w, t, zmin, zmax)
            edge_keep, edge_rate = alpha_bar(edge_w, t, zmin, zmax)
            states.append(
                ScheduleState(
                    t=t,
                    node_keep=node_keep,
                    node_rate=node_rate,
                    node_replace=self._replace_share(node_logit, t, node_keep),
                    edge_keep=edge_keep,
                    edge_rate=edge_rate,
                    edge_replace=self._replace_share(edge_logit, t, edge_keep),
                )
            )
        return states


def schedule_table(
    scheduler: StructureAwareScheduler,
    graph: NoisyGraph,
    encoding: RRWPTensor,
    num_steps: int,
    condition=None,
) -> pd.DataFrame:
    """Rows ``(t, element, alpha_bar, beta_bar, gamma_bar)`` on the ``s / T`` grid."""
    rows = []
    upper = np.triu_indices(graph.n, k=1)
    times = [step / num_steps for step in range(num_steps + 1)]
    for state in scheduler.schedule_grid(graph, encoding, times, condition):
        t = state.t
        keep, mask, replace = state.node_probabilities()
        for i in range(graph.n):
            rows.append((t, f"node:{i}", keep[i], mask[i], replace[i]))
        keep, mask, replace = state.edge_probabilities()
        for i, j in zip(*upper):
            rows.append((t, f"edge:{i}-{j}", keep[i, j], mask[i, j], replace[i, j]))
    return pd.DataFrame(rows, columns=["t", "element", "alpha_bar", "beta_bar", "gamma_bar"])
