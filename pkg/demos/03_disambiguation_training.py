"""Plain cross-entropy vs. the ambiguity-aware contrastive objective.

Trains the same 2-layer GCN twice on the boundary-minority SBM preset:
once with only the supervised loss and once with the full objective,
where nodes whose smoothed prediction entropy stays high are pulled
toward confident neighbors and pushed away from dissimilar ones. The
script then compares test metrics and shows where the discovered
ambiguity actually lives.

Runs in roughly ten seconds on one CPU core.
"""

import numpy as np

from disamgnn import (
    DisamConfig,
    TrainConfig,
    ambiguity_preset,
    evaluate,
    make_split,
    node_homophily_vector,
    sbm_generate,
    train,
)

SEED = 0
# The CLI derives splits from a stream that is namespaced away from the
# model seed; mirror that so numbers here line up with `disamgnn train`.
SPLIT_STREAM = 104729


def describe(tag, report):
    print(
        f"  {tag:12s} acc={report.acc:.4f}"
        f"  macro_f1={report.macro_f1:.4f}"
        f"  macro_auroc={report.macro_auroc:.4f}"
    )


def main() -> None:
    g = sbm_generate(ambiguity_preset())
    masks = make_split(g, rng=np.random.default_rng([SPLIT_STREAM, SEED]))
    print(f"graph: {g.num_nodes} nodes, {g.num_edges} edges, {g.num_classes} classes")
    print(f"splits: train={masks.train.size} val={masks.val.size} test={masks.test.size}")
    print()

    # Baseline: same trainer, contrast weight zero. Memory and score
    # tracking still run (they are deterministic and RNG-free), so the
    # two configurations differ only in the extra loss term.
    ce_cfg = TrainConfig(seed=SEED, disam=DisamConfig(loss_weight=0.0))
    dg_cfg = TrainConfig(seed=SEED)

    print("training plain cross-entropy baseline ...")
    ce_params, ce_state, ce_hist = train(ce_cfg, g, masks)
    print(f"  stopped at epoch {ce_hist.records[-1].epoch}, "
          f"best val acc {ce_hist.best_val_acc:.4f} at epoch {ce_hist.best_epoch}")

    print("training with the contrastive regularizer (weight 1.0) ...")
    dg_params, dg_state, dg_hist = train(dg_cfg, g, masks)
    print(f"  stopped at epoch {dg_hist.records[-1].epoch}, "
          f"best val acc {dg_hist.best_val_acc:.4f} at epoch {dg_hist.best_epoch}")
    print()

    # A few trajectory snapshots. num_ambiguous is refreshed every 10
    # epochs after a 50-epoch warmup; early on nearly every node looks
    # ambiguous, then the set shrinks as predictions firm up.
    print("regularized run, selected trajectory rows")
    print("  epoch   loss_ce  loss_contrast  val_acc  num_ambiguous")
    shown = {0, 50, 100, 200, 400}
    for rec in dg_hist.records:
        if rec.epoch in shown or rec.epoch == dg_hist.records[-1].epoch:
            print(
                f"  {rec.epoch:5d}  {rec.loss_ce:8.4f}  {rec.loss_contrast:13.4f}"
                f"  {rec.val_acc:7.4f}  {rec.num_ambiguous:13d}"
            )
    print()

    print("test metrics")
    describe("plain CE", evaluate(ce_params, g, masks, "test"))
    describe("CE+contrast", evaluate(dg_params, g, masks, "test"))
    print()

    # Where do the high scores live? The preset plants class 2 on the
    # boundary between the two majority blocks, and the score tracker
    # finds exactly that neighborhood without ever seeing the labels.
    scores = dg_state.scores
    print("mean ambiguity score by true class (regularized run)")
    for c in range(g.num_classes):
        members = np.flatnonzero(g.labels == c)
        print(f"  class {c}: {scores[members].mean():.4f}   (n={members.size})")

    hom = node_homophily_vector(g)  # isolated nodes read as 1.0
    order = np.argsort(hom)
    tenth = max(1, order.size // 10)
    lo, hi = order[:tenth], order[-tenth:]
    print("mean ambiguity score by local label agreement (node homophily deciles)")
    print(f"  most mixed neighborhoods  (bottom 10%): {scores[lo].mean():.4f}  (n={lo.size})")
    print(f"  most uniform neighborhoods   (top 10%): {scores[hi].mean():.4f}  (n={hi.size})")
    print()

    # The final ambiguous set from the last refresh, for the curious.
    amb = dg_state.ambiguous
    frac_minority = float(np.mean(g.labels[amb] == 2)) if amb.size else 0.0
    print(f"final ambiguous set: {amb.size} nodes, {frac_minority:.0%} of them class 2")


if __name__ == "__main__":
    main()
