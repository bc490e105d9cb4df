"""One trainer, four message-passing backbones.

GCN, GraphSAGE, GIN, and SGC all run through the same training loop,
metrics, and contrastive machinery; the backbone is a config string.
This script trains each of them on the well-separated SBM preset, with
and without the regularizer, and tabulates test accuracy.

SGC is the stress case for the shared loop: its embeddings are the
propagated features themselves, a constant, so the contrast term can
shape nothing there and the two columns should land close together.
"""

import numpy as np

from disamgnn import (
    BACKBONES,
    DisamConfig,
    TrainConfig,
    evaluate,
    make_split,
    sbm_generate,
    separated_preset,
    train,
)


def main() -> None:
    g = sbm_generate(separated_preset())
    masks = make_split(g, rng=np.random.default_rng([104729, 0]))
    print(f"separated preset: {g.num_nodes} nodes, {g.num_edges} edges")
    print()

    # lr 1e-2 keeps the single-linear-layer SGC inside the 500-epoch
    # budget; the message-passing backbones converge there too, just
    # faster than at the default 1e-3.
    print(f"{'backbone':8s} {'plain CE':>10s} {'CE+contrast':>12s} {'best epochs':>14s}")
    for backbone in BACKBONES:
        accs = []
        best = []
        for weight in (0.0, 1.0):
            cfg = TrainConfig(
                backbone=backbone,
                max_epochs=500,
                lr=1e-2,
                seed=0,
                disam=DisamConfig(loss_weight=weight),
            )
            params, _, hist = train(cfg, g, masks)
            accs.append(evaluate(params, g, masks, "test").acc)
            best.append(hist.best_epoch)
        print(f"{backbone:8s} {accs[0]:10.4f} {accs[1]:12.4f} {str(best):>14s}")

    print()
    print("identical columns are expected here: the message-passing backbones")
    print("hit their best validation score within a couple of epochs, before")
    print("the first ambiguity refresh at epoch 50, so both runs restore the")
    print("same early snapshot; SGC trains longer but its constant embeddings")
    print("give the contrast term nothing to move. See demo 03 for a graph")
    print("where the regularizer changes the outcome.")


if __name__ == "__main__":
    main()
