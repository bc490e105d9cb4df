"""Ambiguous-node discovery and the neighborhood contrastive regularizer.

The trainer keeps a per-node memory of smoothed class probabilities,
updated after every epoch as an exponential moving average of the current
eval-mode predictions. The normalized entropy of a node's memory row is its
ambiguity score; nodes scoring above a threshold form the ambiguous set.

For each ambiguous node, neighbors split into a positive pool (embedding
similarity above a fraction of the best neighbor similarity) and a negative
pool (below a smaller fraction); similar non-neighbors are sampled as extra
positives. The contrast loss pulls pooled positives together and pushes
negatives apart through softplus on pairwise similarities, with gradients
flowing to both endpoints of every pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import Graph
from .tensor import (
    Tensor,
    gather_rows,
    row_dot,
    row_l2_normalize,
    softplus_elem,
    weighted_sum,
)

__all__ = [
    "DisamConfig",
    "AmbiguityState",
    "ContrastGroups",
    "NodePools",
    "update_memory",
    "ambiguity_scores",
    "select_ambiguous",
    "similarity",
    "build_groups",
    "sample_aux_positives",
    "build_contrast_groups",
    "jsd_contrast_loss",
]


@dataclass
class DisamConfig:
    """Knobs for ambiguity discovery and the contrast term.

    memory_decay        EMA weight on the previous memory row
    score_threshold     normalized-entropy cutoff for the ambiguous set
    pos_ratio/neg_ratio fractions of the max neighbor similarity that bound
                        the positive and negative pools
    aux_similarity_min  minimum similarity for auxiliary non-neighbor positives
    aux_samples         how many auxiliary positives to draw per node
    loss_weight         multiplier on the contrast term in the objective
    refresh_period      epochs between ambiguous-set/pool refreshes
    warmup_epochs       first epoch at which a refresh may happen
    normalized_similarity  cosine similarity when true, raw dot when false
    """

    memory_decay: float = 0.5
    score_threshold: float = 0.8
    pos_ratio: float = 0.75
    neg_ratio: float = 0.4
    aux_similarity_min: float = 0.7
    aux_samples: int = 8
    loss_weight: float = 1.0
    refresh_period: int = 10
    warmup_epochs: int = 50
    normalized_similarity: bool = True

    def validate(self) -> None:
        if not 0.0 <= self.memory_decay <= 1.0:
            raise ValueError("memory_decay must lie in [0, 1]")
        if not 0.0 < self.score_threshold <= 1.0:
            raise ValueError("score_threshold must lie in (0, 1]")
        if not 0.0 < self.neg_ratio <= self.pos_ratio <= 1.0:
            raise ValueError("need 0 < neg_ratio <= pos_ratio <= 1")
        if self.aux_samples < 0:
            raise ValueError("aux_samples must be >= 0")
        if self.loss_weight < 0:
            raise ValueError("loss_weight must be >= 0")
        if self.refresh_period < 1:
            raise ValueError("refresh_period must be >= 1")
        if self.warmup_epochs < 0:
            raise ValueError("warmup_epochs must be >= 0")


@dataclass
class AmbiguityState:
    """Per-node memory matrix plus the last refreshed scores and selection."""

    memory: np.ndarray
    scores: np.ndarray
    ambiguous: np.ndarray
    initialized: bool = False

    @classmethod
    def create(cls, num_nodes: int, num_classes: int) -> "AmbiguityState":
        return cls(
            memory=np.zeros((num_nodes, num_classes)),
            scores=np.zeros(num_nodes),
            ambiguous=np.empty(0, dtype=np.int64),
            initialized=False,
        )


def update_memory(
    state: AmbiguityState, class_probs: np.ndarray, memory_decay: float
) -> AmbiguityState:
    """EMA-blend current predictions into the memory; first call copies them."""
    if not 0.0 <= memory_decay <= 1.0:
        raise ValueError("memory_decay must lie in [0, 1]")
    probs = np.asarray(class_probs, dtype=np.float64)
    if probs.shape != state.memory.shape:
        raise ValueError(
            f"class_probs shape {probs.shape} != memory shape {state.memory.shape}"
        )
    sums = probs.sum(axis=1)
    if np.max(np.abs(sums - 1.0)) > 1e-6 or probs.min() < -1e-12:
        raise ValueError("class_probs rows must be probability vectors")
    if not state.initialized:
        state.memory[...] = probs
        state.initialized = True
    else:
        state.memory *= memory_decay
        state.memory += (1.0 - memory_decay) * probs
    return state


def ambiguity_scores(memory: np.ndarray) -> np.ndarray:
    """Entropy of each memory row, normalized by ln(num_classes) into [0, 1]."""
    mem = np.asarray(memory, dtype=np.float64)
    if mem.ndim != 2 or mem.shape[1] < 2:
        raise ValueError("memory must be (num_nodes, num_classes>=2)")
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(mem > 0, mem * np.log(mem), 0.0)
    raw = -plogp.sum(axis=1)
    scores = raw / np.log(mem.shape[1])
    # Clip float fuzz so exact one-hot/uniform rows land on 0 and 1.
    return np.clip(scores, 0.0, 1.0)


def select_ambiguous(scores: np.ndarray, threshold: float) -> np.ndarray:
    """Node indices whose score strictly exceeds the threshold, ascending."""
    scores = np.asarray(scores)
    return np.flatnonzero(scores > threshold).astype(np.int64)


def similarity(z_u, z_v) -> float:
    """Cosine similarity between two embedding rows; zero rows give 0.0."""
    u = np.asarray(z_u, dtype=np.float64).ravel()
    v = np.asarray(z_v, dtype=np.float64).ravel()
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(u @ v / (nu * nv))


def _normalize_rows(emb: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    return emb / np.where(norms > 0, norms, 1.0)


def _pools_for_node(
    zn: np.ndarray, g: Graph, v: int, pos_ratio: float, neg_ratio: float
) -> tuple[np.ndarray, np.ndarray]:
    nbr = g.neighbors(v)
    if nbr.size == 0:
        raise ValueError(f"node {v} is isolated; no contrast pools exist")
    sims = zn[nbr] @ zn[v]
    m = sims.max()
    if m > 0:
        pos = nbr[sims > pos_ratio * m]
    else:
        # Best neighbor already dissimilar: nothing qualifies as positive,
        # and every similarity <= m <= neg_ratio*m falls in the negative pool.
        pos = np.empty(0, dtype=np.int64)
    neg = nbr[sims <= neg_ratio * m]
    return pos.astype(np.int64), neg.astype(np.int64)


def build_groups(
    embeddings,
    g: Graph,
    v: int,
    pos_ratio: float = 0.75,
    neg_ratio: float = 0.4,
    *,
    normalized: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Split v's neighbors into positive and negative pools by similarity.

    Pools are fractions of the maximum neighbor similarity m: positives
    strictly above pos_ratio*m (empty when m <= 0), negatives at or below
    neg_ratio*m. Raises ValueError for isolated nodes so callers can skip.
    """
    if not 0.0 < neg_ratio <= pos_ratio <= 1.0:
        raise ValueError("need 0 < neg_ratio <= pos_ratio <= 1")
    emb = np.asarray(embeddings, dtype=np.float64)
    zn = _normalize_rows(emb) if normalized else emb
    return _pools_for_node(zn, g, v, pos_ratio, neg_ratio)


def _aux_candidates(zn: np.ndarray, g: Graph, v: int, min_similarity: float) -> np.ndarray:
    sims = zn @ zn[v]
    eligible = sims >= min_similarity
    eligible[v] = False
    eligible[g.neighbors(v)] = False
    return np.flatnonzero(eligible)


def sample_aux_positives(
    embeddings,
    g: Graph,
    v: int,
    min_similarity: float = 0.7,
    count: int = 8,
    rng: np.random.Generator | None = None,
    *,
    normalized: bool = True,
) -> np.ndarray:
    """Uniformly sample up to ``count`` similar non-neighbors of v.

    Candidates are nodes other than v and its neighbors whose similarity to
    v reaches ``min_similarity``. Sampling is without replacement and
    returns all candidates when fewer than ``count`` exist.
    """
    if rng is None:
        rng = np.random.default_rng()
    emb = np.asarray(embeddings, dtype=np.float64)
    zn = _normalize_rows(emb) if normalized else emb
    cand = _aux_candidates(zn, g, v, min_similarity)
    if cand.size <= count:
        return np.sort(cand).astype(np.int64)
    picked = rng.choice(cand, size=count, replace=False)
    return np.sort(picked).astype(np.int64)


@dataclass(frozen=True)
class NodePools:
    pos: np.ndarray
    neg: np.ndarray
    aux_pos: np.ndarray


@dataclass
class ContrastGroups:
    """Positive/negative/auxiliary pools for each selected node."""

    pools: dict[int, NodePools] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.pools)


def build_contrast_groups(
    embeddings,
    g: Graph,
    nodes,
    cfg: DisamConfig,
    rng: np.random.Generator,
) -> ContrastGroups:
    """Build pools for every node in ``nodes``, skipping isolated ones."""
    emb = np.asarray(embeddings, dtype=np.float64)
    zn = _normalize_rows(emb) if cfg.normalized_similarity else emb
    groups = ContrastGroups()
    for v in np.asarray(nodes, dtype=np.int64):
        v = int(v)
        if g.neighbors(v).size == 0:
            continue
        pos, neg = _pools_for_node(zn, g, v, cfg.pos_ratio, cfg.neg_ratio)
        cand = _aux_candidates(zn, g, v, cfg.aux_similarity_min)
        if cand.size <= cfg.aux_samples:
            aux = np.sort(cand).astype(np.int64)
        else:
            aux = np.sort(rng.choice(cand, size=cfg.aux_samples, replace=False)).astype(np.int64)
        groups.pools[v] = NodePools(pos=pos, neg=neg, aux_pos=aux)
    return groups


def jsd_contrast_loss(
    embeddings: Tensor, groups: ContrastGroups, *, normalized: bool = True
) -> Tensor:
    """Sum over selected nodes of softplus contrast on pair similarities.

    Per node: mean over pooled positives (neighbor positives plus auxiliary
    ones) of softplus(-sim) plus mean over negatives of softplus(sim).
    Empty pools contribute nothing. Gradients reach both pair endpoints.
    """
    anchor_idx: list[int] = []
    other_idx: list[int] = []
    weights: list[float] = []
    signs: list[float] = []
    for v in sorted(groups.pools):
        pools = groups.pools[v]
        pos_pool = np.concatenate([pools.pos, pools.aux_pos])
        if pos_pool.size:
            w = 1.0 / pos_pool.size
            for u in pos_pool:
                anchor_idx.append(v)
                other_idx.append(int(u))
                weights.append(w)
                signs.append(-1.0)
        if pools.neg.size:
            w = 1.0 / pools.neg.size
            for u in pools.neg:
                anchor_idx.append(v)
                other_idx.append(int(u))
                weights.append(w)
                signs.append(1.0)
    if not anchor_idx:
        return Tensor(np.zeros((1, 1)))

    zn = row_l2_normalize(embeddings) if normalized else embeddings
    left = gather_rows(zn, np.asarray(anchor_idx, dtype=np.int64))
    right = gather_rows(zn, np.asarray(other_idx, dtype=np.int64))
    sims = row_dot(left, right)
    signed = np.asarray(signs).reshape(-1, 1)
    # softplus(sign * sim): sign -1 for positives, +1 for negatives.
    terms = softplus_elem(_signed(sims, signed))
    return weighted_sum(terms, np.asarray(weights).reshape(-1, 1))


def _signed(sims: Tensor, signs: np.ndarray) -> Tensor:
    """Multiply the similarity column by fixed per-row signs."""
    vals = sims.values * signs

    def grad_fn(g):
        if sims.requires_grad:
            sims.accumulate_grad(g * signs)

    out = Tensor(vals)
    if sims.requires_grad:
        out.requires_grad = True
        out._parents = (sims,)
        out._backward_fn = grad_fn
    return out
