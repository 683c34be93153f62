"""Train the trajectory predictor on a small synthetic corpus and forecast one track.

A reduced budget keeps this under a couple of minutes; the acceptance suite
runs the full-size version.
"""

import numpy as np

from evtraj import Seq2SeqModel, Spatial, TrainConfig, evaluate, predict, synthetic_corpus, train

corpus = synthetic_corpus(60, seed=0).resample(Spatial(2))
w_in, w_out = 20, 45
tr = corpus.windows("train", w_in, w_out, stride=4)
va = corpus.windows("validation", w_in, w_out)
te = corpus.windows("test", w_in, w_out)
print(f"windows: train {len(tr)}, validation {len(va)}, test {len(te)}")

model = Seq2SeqModel.create(seed=0)
model, curve = train(model, tr, va, TrainConfig(epochs=15, restore_best=True))
for epoch in (0, 4, 9, 14):
    print(f"epoch {epoch + 1:2d}: val loss {curve.val_loss[epoch]:.5f}, "
          f"val spatial RMSE {curve.val_spatial_rmse[epoch]:.2f} px")

err = evaluate(model, te)
print(f"test: spatial RMSE {err.spatial_rmse:.2f} px, temporal RMSE {err.temporal_rmse:.2f} ms")

track = corpus.select("test")[0]
history = track.points[:60]
pred = predict(model, history, w_in, w_out)
future = track.points[60 : 60 + w_out]
print("\nstep   predicted (x, y, t ms)        actual")
for k in (0, 9, 19, 44):
    print(f"{k + 1:3d}   ({pred['x'][k]:6.1f}, {pred['y'][k]:6.1f}, {pred['t'][k] / 1000:7.1f})"
          f"   ({future['x'][k]:6.1f}, {future['y'][k]:6.1f}, {future['t'][k] / 1000:7.1f})")
