"""A short end-to-end training run, from config file to rendered curves.

Writes an experiment configuration, runs it through the library (two reward
requirements on a blocked channel), and plots accuracy and global error per
interval. At this abbreviated length the curves are noisy; the acceptance
suite runs the full-length versions.
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from ris_semcom.harness import load_config, run_experiment

CONFIG = """
scenario.seed = 7
scenario.warmup_intervals = 64
experiment.n_intervals = 200
experiment.channel_mode = blocked
experiment.usage_control = false
experiment.n_seeds = 1
reward.user0 = {kind}@0-200
"""

os.makedirs("demos/output", exist_ok=True)
curves = {}
for kind in ("ACC", "RATE"):
    cfg_path = f"demos/output/run_{kind.lower()}.cfg"
    with open(cfg_path, "w") as fh:
        fh.write(CONFIG.format(kind=kind))
    spec = load_config(cfg_path)
    out = run_experiment(spec, out_path=f"demos/output/metrics_{kind.lower()}.csv")
    rows = np.genfromtxt(out, delimiter=",", names=True)
    curves[kind] = rows
    print(f"{kind}: wrote {out}, "
          f"final-50 acc {rows['acc'][-50:].mean():.2f}, mse {rows['mse'][-50:].mean():.4f}")

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
window = 15
for kind, rows in curves.items():
    smooth = np.convolve(rows["acc"], np.ones(window) / window, mode="valid")
    ax1.plot(rows["interval"][window - 1 :], smooth, label=f"RL-{kind}")
    smooth = np.convolve(rows["mse"], np.ones(window) / window, mode="valid")
    ax2.plot(rows["interval"][window - 1 :], smooth, label=f"RL-{kind}")
ax1.set_xlabel("time interval")
ax1.set_ylabel("object accuracy")
ax1.legend()
ax1.grid(alpha=0.3)
ax2.set_xlabel("time interval")
ax2.set_ylabel("global mse")
ax2.legend()
ax2.grid(alpha=0.3)
fig.suptitle("Blocked channel: requirement-aware control vs rate-only control")
fig.tight_layout()
fig.savefig("demos/output/learning_run.png", dpi=120)
print("figure saved to demos/output/learning_run.png")
