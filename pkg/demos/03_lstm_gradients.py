"""Check the hand-written BPTT gradients of the encoder-decoder against finite differences."""

import numpy as np

from evtraj import Seq2SeqModel, forward, loss_and_grads, mse_loss

rng = np.random.default_rng(0)
model = Seq2SeqModel.create(hidden_size=5, seed=0)
X = rng.normal(0, 0.5, size=(2, 4, 3))
T = rng.normal(0, 0.5, size=(2, 3, 3))

loss, grads = loss_and_grads(model, X, T)
print(f"loss {loss:.6f}")

h = 1e-5
for name, p in model.params().items():
    worst = 0.0
    for idx in np.ndindex(p.shape):
        old = p[idx]
        p[idx] = old + h
        up = mse_loss(forward(model, X, 3), T)
        p[idx] = old - h
        down = mse_loss(forward(model, X, 3), T)
        p[idx] = old
        num = (up - down) / (2 * h)
        worst = max(worst, abs(grads[name][idx] - num) / max(abs(num), abs(grads[name][idx]), 1e-6))
    print(f"{name:16s} {str(p.shape):10s} max relative error {worst:.1e}")
