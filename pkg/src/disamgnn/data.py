"""Dataset bundles, stratified splits, SBM generation, and serialization.

A dataset bundle is a directory holding edges.tsv (two integer columns),
features.csv (dense real rows), labels.csv (one integer per node), an
optional splits.json, and meta.json. Checkpoints are a {base}.json manifest
plus a {base}.bin little-endian float64 blob and round-trip bit-exactly.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .graph import Graph, SplitMasks, build_graph
from .models import ModelParams
from .tensor import Tensor

__all__ = [
    "load_bundle",
    "save_bundle",
    "make_split",
    "SbmSpec",
    "block_probability_matrix",
    "sbm_generate",
    "ambiguity_preset",
    "separated_preset",
    "get_preset",
    "PRESET_NAMES",
    "save_checkpoint",
    "load_checkpoint",
    "write_history_csv",
    "write_ambiguity_csv",
    "read_ambiguity_csv",
    "write_group_report_csv",
]


# ---------------------------------------------------------------------------
# bundles


def _read_edges(path: str) -> np.ndarray:
    with open(path) as fh:
        content = fh.read().strip()
    if not content:
        return np.empty((0, 2), dtype=np.int64)
    rows = []
    for ln, line in enumerate(content.splitlines(), start=1):
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{ln}: expected two integer columns")
        rows.append((int(parts[0]), int(parts[1])))
    return np.asarray(rows, dtype=np.int64)


def _read_features(path: str) -> np.ndarray:
    rows = []
    width = None
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            vals = [float(tok) for tok in line.split(",")]
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise ValueError(f"{path}:{ln}: ragged row ({len(vals)} vs {width} columns)")
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no feature rows")
    return np.asarray(rows, dtype=np.float64)


def load_bundle(path: str) -> tuple[Graph, SplitMasks | None]:
    """Read a bundle directory into a Graph and its optional split masks."""
    if not os.path.isdir(path):
        raise FileNotFoundError(f"dataset bundle directory not found: {path}")

    def p(name):
        full = os.path.join(path, name)
        if not os.path.isfile(full):
            raise FileNotFoundError(f"bundle is missing {name}: {full}")
        return full

    edges = _read_edges(p("edges.tsv"))
    features = _read_features(p("features.csv"))
    labels = np.loadtxt(p("labels.csv"), dtype=np.int64, ndmin=1)

    num_classes = None
    meta_path = os.path.join(path, "meta.json")
    if os.path.isfile(meta_path):
        with open(meta_path) as fh:
            meta = json.load(fh)
        num_classes = meta.get("num_classes")
        for key, actual in (
            ("num_nodes", features.shape[0]),
            ("num_features", features.shape[1]),
        ):
            if key in meta and meta[key] != actual:
                raise ValueError(f"meta.json {key}={meta[key]} but files say {actual}")

    g = build_graph(edges, features, labels, num_classes=num_classes)

    masks = None
    splits_path = os.path.join(path, "splits.json")
    if os.path.isfile(splits_path):
        with open(splits_path) as fh:
            blob = json.load(fh)
        masks = SplitMasks(
            train=np.asarray(blob["train"], dtype=np.int64),
            val=np.asarray(blob["val"], dtype=np.int64),
            test=np.asarray(blob["test"], dtype=np.int64),
        )
        for arr in (masks.train, masks.val, masks.test):
            if arr.size and arr.max() >= g.num_nodes:
                raise ValueError("splits.json references nodes outside the graph")
    return g, masks


def save_bundle(
    g: Graph, path: str, masks: SplitMasks | None = None, name: str = "dataset"
) -> None:
    """Write a Graph (and optional splits) as a bundle directory."""
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "edges.tsv"), "w") as fh:
        seen = set()
        for v in range(g.num_nodes):
            for u in g.neighbors(v):
                key = (min(v, int(u)), max(v, int(u)))
                if key not in seen:
                    seen.add(key)
                    fh.write(f"{key[0]}\t{key[1]}\n")
    with open(os.path.join(path, "features.csv"), "w") as fh:
        for row in g.features:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
    with open(os.path.join(path, "labels.csv"), "w") as fh:
        for y in g.labels:
            fh.write(f"{int(y)}\n")
    meta = {
        "name": name,
        "num_nodes": g.num_nodes,
        "num_features": g.num_features,
        "num_classes": g.num_classes,
    }
    with open(os.path.join(path, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=1)
        fh.write("\n")
    if masks is not None:
        blob = {
            "train": masks.train.tolist(),
            "val": masks.val.tolist(),
            "test": masks.test.tolist(),
        }
        with open(os.path.join(path, "splits.json"), "w") as fh:
            json.dump(blob, fh)
            fh.write("\n")


# ---------------------------------------------------------------------------
# splits


def _largest_remainder(quotas: np.ndarray, total: int) -> np.ndarray:
    base = np.floor(quotas).astype(np.int64)
    leftover = total - int(base.sum())
    if leftover > 0:
        # Stable tie-break: larger remainder first, then lower class index.
        order = np.lexsort((np.arange(quotas.size), -(quotas - base)))
        base[order[:leftover]] += 1
    elif leftover < 0:
        order = np.lexsort((np.arange(quotas.size), quotas - base))
        for i in order:
            if leftover == 0:
                break
            if base[i] > 0:
                base[i] -= 1
                leftover += 1
    return base


def make_split(
    g: Graph,
    ratios: tuple[float, float, float] = (0.5, 1.0, 8.5),
    stratified: bool = True,
    rng: np.random.Generator | None = None,
) -> SplitMasks:
    """Deterministic train/val/test node split with the given proportions.

    Ratios are normalized, so (0.5, 1, 8.5) yields 5%/10%/85%. A stratified
    split allocates per class by largest remainder and guarantees at least
    one train node for every class. All three parts must come out non-empty
    and every class must have at least one member.
    """
    if rng is None:
        rng = np.random.default_rng()
    ratios = np.asarray(ratios, dtype=np.float64)
    if ratios.shape != (3,) or (ratios < 0).any() or ratios.sum() <= 0:
        raise ValueError("ratios must be three non-negative numbers with a positive sum")
    fracs = ratios / ratios.sum()
    n = g.num_nodes
    n_train = int(round(fracs[0] * n))
    n_val = int(round(fracs[1] * n))
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise ValueError(f"split sizes ({n_train}, {n_val}, {n_test}) must all be >= 1")

    class_counts = np.bincount(g.labels, minlength=g.num_classes)
    if (class_counts == 0).any():
        empty = np.flatnonzero(class_counts == 0).tolist()
        raise ValueError(f"classes without members cannot be stratified: {empty}")

    if not stratified:
        perm = rng.permutation(n)
        return SplitMasks(
            train=perm[:n_train], val=perm[n_train : n_train + n_val],
            test=perm[n_train + n_val :],
        )

    train_alloc = _largest_remainder(fracs[0] * class_counts, n_train)
    # Every class contributes at least one train node; borrow from the
    # largest allocation when rounding starved a class.
    for c in range(g.num_classes):
        if train_alloc[c] == 0:
            donor = int(np.argmax(train_alloc))
            if train_alloc[donor] <= 1:
                raise ValueError("train split too small to cover every class")
            train_alloc[donor] -= 1
            train_alloc[c] += 1
    val_quota = fracs[1] * class_counts
    val_alloc = _largest_remainder(val_quota, n_val)
    # Never allocate beyond what remains after train.
    for c in range(g.num_classes):
        room = class_counts[c] - train_alloc[c]
        if val_alloc[c] > room:
            val_alloc[c] = room
    shortfall = n_val - int(val_alloc.sum())
    if shortfall > 0:
        room = class_counts - train_alloc - val_alloc
        order = np.argsort(-room, kind="stable")
        for c in order:
            take = min(shortfall, int(room[c]))
            val_alloc[c] += take
            shortfall -= take
            if shortfall == 0:
                break

    train_parts, val_parts, test_parts = [], [], []
    for c in range(g.num_classes):
        members = np.flatnonzero(g.labels == c)
        members = rng.permutation(members)
        t, v = int(train_alloc[c]), int(val_alloc[c])
        train_parts.append(members[:t])
        val_parts.append(members[t : t + v])
        test_parts.append(members[t + v :])
    return SplitMasks(
        train=np.concatenate(train_parts),
        val=np.concatenate(val_parts),
        test=np.concatenate(test_parts),
    )


# ---------------------------------------------------------------------------
# stochastic block model


@dataclass(frozen=True)
class SbmSpec:
    """Stochastic block model with Gaussian features at per-class means."""

    class_sizes: tuple[int, ...]
    intra_p: object  # scalar or per-class sequence of within-block probabilities
    inter_p: object  # scalar or (C, C) array of off-diagonal probabilities
    class_means: np.ndarray
    noise_scale: float = 1.0
    seed: int = 0


def block_probability_matrix(spec: SbmSpec) -> np.ndarray:
    """(C, C) symmetric edge-probability matrix from intra/inter settings."""
    c = len(spec.class_sizes)
    inter = np.asarray(spec.inter_p, dtype=np.float64)
    if inter.ndim == 0:
        probs = np.full((c, c), float(inter))
    elif inter.shape == (c, c):
        probs = inter.copy()
    else:
        raise ValueError(f"inter_p must be scalar or ({c}, {c}) matrix")
    intra = np.asarray(spec.intra_p, dtype=np.float64)
    if intra.ndim == 0:
        intra = np.full(c, float(intra))
    elif intra.shape != (c,):
        raise ValueError(f"intra_p must be scalar or length-{c} per-class values")
    np.fill_diagonal(probs, intra)
    if not np.allclose(probs, probs.T):
        raise ValueError("inter_p matrix must be symmetric")
    if probs.min() < 0 or probs.max() > 1:
        raise ValueError("edge probabilities must lie in [0, 1]")
    return probs


def sbm_generate(spec: SbmSpec) -> Graph:
    """Sample a graph: Bernoulli block edges, Gaussian features per class."""
    sizes = np.asarray(spec.class_sizes, dtype=np.int64)
    if sizes.ndim != 1 or sizes.size < 2 or (sizes <= 0).any():
        raise ValueError("class_sizes must list >= 2 positive block sizes")
    means = np.asarray(spec.class_means, dtype=np.float64)
    if means.shape[0] != sizes.size:
        raise ValueError("class_means must have one row per class")
    probs = block_probability_matrix(spec)
    rng = np.random.default_rng(spec.seed)
    starts = np.concatenate([[0], np.cumsum(sizes)])
    n = int(starts[-1])
    labels = np.repeat(np.arange(sizes.size), sizes)

    edge_chunks = []
    for a in range(sizes.size):
        for b in range(a, sizes.size):
            p = probs[a, b]
            if a == b:
                iu, ju = np.triu_indices(sizes[a], k=1)
                hit = rng.random(iu.size) < p
                if hit.any():
                    edge_chunks.append(
                        np.stack([starts[a] + iu[hit], starts[a] + ju[hit]], axis=1)
                    )
            else:
                hits = rng.random((sizes[a], sizes[b])) < p
                ia, ib = np.nonzero(hits)
                if ia.size:
                    edge_chunks.append(
                        np.stack([starts[a] + ia, starts[b] + ib], axis=1)
                    )
    edges = np.concatenate(edge_chunks) if edge_chunks else np.empty((0, 2), np.int64)
    features = means[labels] + spec.noise_scale * rng.standard_normal(
        (n, means.shape[1])
    )
    return build_graph(edges, features, labels, num_classes=sizes.size)


def ambiguity_preset(seed: int = 362) -> SbmSpec:
    """Two major blocks plus a small minority wired 5x more strongly to both.

    The minority class sits on the boundary between the majors: its
    inter-block probability (0.0075) is five times the major-major one
    (0.0015), and the features share one unit of Gaussian noise around
    simplex corners, so minority nodes are the contested region.  The
    minority block itself is dense (intra 0.38 vs 0.04 for the majors),
    which keeps roughly four out of five minority neighbors in-class;
    the contested fringe is the remainder plus a handful of sparse
    boundary nodes.  The default generator seed picks a realization
    where that fringe is populated and the contrast dynamics settle
    early; changing the seed changes the realized graph substantially.
    """
    inter = np.array(
        [
            [0.0, 0.0015, 0.0075],
            [0.0015, 0.0, 0.0075],
            [0.0075, 0.0075, 0.0],
        ]
    )
    return SbmSpec(
        class_sizes=(300, 300, 60),
        intra_p=(0.04, 0.04, 0.38),
        inter_p=inter,
        class_means=np.eye(3),
        noise_scale=1.0,
        seed=seed,
    )


def separated_preset(seed: int = 11) -> SbmSpec:
    """Three equal, well-separated blocks; easy for any backbone."""
    return SbmSpec(
        class_sizes=(100, 100, 100),
        intra_p=0.05,
        inter_p=0.002,
        class_means=np.eye(3),
        noise_scale=0.5,
        seed=seed,
    )


PRESET_NAMES = ("ambiguity", "separated")


def get_preset(name: str) -> SbmSpec:
    if name == "ambiguity":
        return ambiguity_preset()
    if name == "separated":
        return separated_preset()
    raise ValueError(f"unknown preset {name!r}; available: {PRESET_NAMES}")


# ---------------------------------------------------------------------------
# checkpoints

_CKPT_DTYPE = "<f8"


def save_checkpoint(params: ModelParams, base_path: str) -> None:
    """Write {base}.json manifest and {base}.bin float64 blob."""
    entries = []
    offset = 0
    chunks = []
    for name, t in params.params.items():
        arr = np.ascontiguousarray(t.values, dtype=_CKPT_DTYPE)
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(arr.tobytes())
        offset += arr.nbytes
    manifest = {
        "format": "disamgnn-checkpoint",
        "version": 1,
        "backbone": params.backbone,
        "in_dim": params.in_dim,
        "hidden_dim": params.hidden_dim,
        "num_classes": params.num_classes,
        "num_layers": params.num_layers,
        "sgc_k": params.sgc_k,
        "dtype": _CKPT_DTYPE,
        "total_bytes": offset,
        "entries": entries,
    }
    directory = os.path.dirname(base_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(base_path + ".json", "w") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    with open(base_path + ".bin", "wb") as fh:
        fh.write(b"".join(chunks))


def load_checkpoint(base_path: str) -> ModelParams:
    """Read a checkpoint pair back into ModelParams, validating the layout."""
    with open(base_path + ".json") as fh:
        manifest = json.load(fh)
    if manifest.get("format") != "disamgnn-checkpoint":
        raise ValueError(f"{base_path}.json is not a checkpoint manifest")
    if manifest.get("dtype") != _CKPT_DTYPE:
        raise ValueError(f"unsupported checkpoint dtype {manifest.get('dtype')!r}")
    with open(base_path + ".bin", "rb") as fh:
        blob = fh.read()
    if len(blob) != manifest["total_bytes"]:
        raise ValueError(
            f"checkpoint blob is {len(blob)} bytes, manifest says {manifest['total_bytes']}"
        )
    itemsize = np.dtype(_CKPT_DTYPE).itemsize
    params: dict[str, Tensor] = {}
    expected_offset = 0
    for entry in manifest["entries"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape))
        offset = entry["offset"]
        if offset != expected_offset or offset + count * itemsize > len(blob):
            raise ValueError(f"corrupt checkpoint entry {entry['name']!r}")
        arr = np.frombuffer(
            blob, dtype=_CKPT_DTYPE, count=count, offset=offset
        ).reshape(shape)
        params[entry["name"]] = Tensor(arr.copy(), requires_grad=True)
        expected_offset = offset + count * itemsize
    if expected_offset != len(blob):
        raise ValueError("checkpoint blob has trailing bytes not covered by entries")
    return ModelParams(
        backbone=manifest["backbone"],
        in_dim=manifest["in_dim"],
        hidden_dim=manifest["hidden_dim"],
        num_classes=manifest["num_classes"],
        num_layers=manifest["num_layers"],
        sgc_k=manifest["sgc_k"],
        params=params,
    )


# ---------------------------------------------------------------------------
# csv surfaces

HISTORY_COLUMNS = (
    "epoch",
    "loss_ce",
    "loss_contrast",
    "loss_total",
    "train_acc",
    "val_acc",
    "num_ambiguous",
    "mean_ambiguity",
)


def write_history_csv(history, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_COLUMNS)
        for r in history.records:
            writer.writerow(
                [
                    r.epoch,
                    repr(r.loss_ce),
                    repr(r.loss_contrast),
                    repr(r.loss_total),
                    repr(r.train_acc),
                    repr(r.val_acc),
                    r.num_ambiguous,
                    repr(r.mean_ambiguity),
                ]
            )


def write_ambiguity_csv(state, path: str) -> None:
    flags = np.zeros(state.scores.shape[0], dtype=bool)
    flags[state.ambiguous] = True
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node_id", "score", "is_ambiguous"])
        for v in range(state.scores.shape[0]):
            writer.writerow([v, repr(float(state.scores[v])), int(flags[v])])


def read_ambiguity_csv(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Return (scores, is_ambiguous) arrays indexed by node id."""
    scores: dict[int, float] = {}
    flags: dict[int, bool] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            v = int(row["node_id"])
            scores[v] = float(row["score"])
            flags[v] = bool(int(row["is_ambiguous"]))
    n = max(scores) + 1 if scores else 0
    out_scores = np.zeros(n)
    out_flags = np.zeros(n, dtype=bool)
    for v, s in scores.items():
        out_scores[v] = s
        out_flags[v] = flags[v]
    return out_scores, out_flags


def write_group_report_csv(rows: list[dict], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "count", "accuracy", "mean_ambiguity"])
        for r in rows:
            acc = "" if math.isnan(r["accuracy"]) else repr(r["accuracy"])
            amb = "" if math.isnan(r["mean_ambiguity"]) else repr(r["mean_ambiguity"])
            writer.writerow([r["group"], r["count"], acc, amb])
