# %% [markdown]
# # Station workflow through the command line
#
# Write a small station table, hold out three stations, search the
# lengthscales, sample the posterior and predict at the held-out stations.

# %%
import json
import tempfile
from pathlib import Path

import numpy as np

from slgp.cli import main
from slgp.io import TEMPERATURE_SCHEMA

work = Path(tempfile.mkdtemp())
rng = np.random.default_rng(0)
rows = ["Station,Date,Daily average temperature,Altitude,Longitude,Latitude"]
for s in range(29):
    lat, lon, alt = rng.uniform(45.8, 47.8), rng.uniform(5.9, 10.5), rng.uniform(200, 3000)
    for d in range(20):
        rows.append(f"ST{s:02d},2019-01-{d + 1:02d},{12 - 0.0065 * alt + rng.normal(0, 3):.1f},"
                    f"{alt:.0f},{lon:.4f},{lat:.4f}")
(work / "meteo.csv").write_text("\n".join(rows) + "\n")

config = {
    "seed": 0, "p": 50,
    "data": {"path": str(work / "meteo.csv"), "schema": TEMPERATURE_SCHEMA.to_dict(),
             "holdout": ["ST01", "ST10", "ST20"]},
    "hyper_grid": {"per_dim": [[0.2, 0.4]] * 4, "tie": [[0, 1]]},
    "mcmc": {"n_iter": 3000, "burn_in": 1000, "thin": 20},
    "output": {"dir": str(work / "out")},
}
(work / "config.json").write_text(json.dumps(config))

# %%
assert main(["fit-mcmc", "--config", str(work / "config.json")]) == 0
assert main(["predict", "--fit", str(work / "out" / "fit.json")]) == 0
summary = json.loads((work / "out" / "predict.json").read_text())
for station, entry in summary["locations"].items():
    print(station, {k: round(v, 2) for k, v in entry["quantiles"].items()})
print("artifacts in", work / "out")
