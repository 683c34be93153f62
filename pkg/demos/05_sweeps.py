"""Window-length and sampling-strategy sweeps, written as plot-ready CSV.

Budgets here are small so the script finishes in a few minutes; trends are
noisier than in the acceptance suite. Output goes to $EVTRAJ_OUT_DIR or ./sweeps.
"""

import os
from pathlib import Path

from evtraj import Spatial, TrainConfig, compare_strategies, summary_json, sweep_win, sweep_wout, synthetic_corpus

out = Path(os.environ.get("EVTRAJ_OUT_DIR", "sweeps"))
out.mkdir(parents=True, exist_ok=True)
config = TrainConfig(epochs=8, restore_best=True)
raw = synthetic_corpus(60, seed=0)
d2 = raw.resample(Spatial(2))

wout = sweep_wout(d2, 20, (5, 15, 25, 35, 45), config, stride=8)
win = sweep_win(d2, 45, (5, 10, 20, 40), config, stride=8)
spatial, fixed = compare_strategies(raw, (2, 4, 6), 0, config, stride=8)

for result in (wout, win, spatial, fixed):
    (out / f"sweep_{result.axis}.csv").write_text(result.to_csv())
    print(result.axis, [round(float(v), 2) for v in result.spatial_rmse])
(out / "summary.json").write_text(summary_json([wout, win, spatial, fixed], {"epochs": 8, "stride": 8}))
print(f"CSV files written to {out}/")
