"""Gradient checking the reverse-mode tape against finite differences.

The tensor module is a deliberately small autodiff engine: 2-D float64
tensors, a fixed vocabulary of ops, and a topological-order backward
pass. This script chains a representative mix of those ops into a scalar
readout and confirms the analytic gradients against 64-bit central
differences, the same oracle the test suite uses.
"""

import numpy as np

from disamgnn.tensor import (
    Tensor,
    add,
    backward,
    matmul,
    relu,
    row_dot,
    row_l2_normalize,
    softmax_rows,
    softplus_elem,
    sum_all,
)


def build_loss(tensors):
    """A scalar mixing matmul, bias add, relu, softmax, and a contrast tail."""
    x, w1, b1, w2, anchors = tensors
    h = relu(add(matmul(x, w1), b1))          # (n, hidden), bias broadcast
    z = row_l2_normalize(matmul(h, w2))       # unit rows
    p = softmax_rows(matmul(h, w2))
    sims = row_dot(z, anchors)                # (n, 1) cosine against constants
    return sum_all(add(softplus_elem(sims), sum_all(p)))


def central_difference(tensors, param, i, j, h=1e-5):
    flat = param.values.reshape(-1)
    k = i * param.values.shape[1] + j
    old = flat[k]
    flat[k] = old + h
    up = build_loss(tensors).item()
    flat[k] = old - h
    down = build_loss(tensors).item()
    flat[k] = old
    return (up - down) / (2.0 * h)


def main() -> None:
    rng = np.random.default_rng(7)
    # Keep relu inputs away from the kink at 0 so the finite-difference
    # stencil never straddles the nondifferentiable point.
    x = Tensor(rng.normal(size=(5, 4)) + 0.5, requires_grad=False)
    w1 = Tensor(rng.normal(scale=0.7, size=(4, 6)), requires_grad=True)
    b1 = Tensor(rng.normal(size=(1, 6)), requires_grad=True)
    w2 = Tensor(rng.normal(scale=0.7, size=(6, 3)), requires_grad=True)
    raw = rng.normal(size=(5, 3))
    anchors = Tensor(raw / np.linalg.norm(raw, axis=1, keepdims=True))
    tensors = [x, w1, b1, w2, anchors]

    pre = add(matmul(x, w1), b1)
    assert np.min(np.abs(pre.values)) > 1e-3, "relu input too close to its kink"

    loss = build_loss(tensors)
    backward(loss)
    print(f"loss = {loss.item():.6f}")

    worst = 0.0
    for name, p in (("w1", w1), ("b1", b1), ("w2", w2)):
        errs = np.zeros_like(p.values)
        for i in range(p.values.shape[0]):
            for j in range(p.values.shape[1]):
                fd = central_difference(tensors, p, i, j)
                an = p.grad[i, j]
                errs[i, j] = abs(an - fd) / max(abs(an) + abs(fd), 1e-8)
        print(f"  {name}: max relative error vs central differences = {errs.max():.2e}")
        worst = max(worst, errs.max())

    assert worst < 1e-4, "gradient check failed"
    print(f"gradient check passed (worst {worst:.2e} < 1e-4)")

    # Gradients accumulate across backward passes until cleared.
    g_once = w1.grad.copy()
    loss2 = build_loss(tensors)
    backward(loss2)
    assert np.allclose(w1.grad, 2.0 * g_once)
    w1.zero_grad()
    assert w1.grad is None
    print("accumulation across backward passes and zero_grad behave as documented")


if __name__ == "__main__":
    main()
