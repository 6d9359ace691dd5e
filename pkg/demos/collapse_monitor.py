"""Watch the collapse monitor on hand-written curves and on real training runs.

The monitor raises its flag once validation HR@10 has climbed above twice the
random baseline and then falls back under it, or as soon as the loss is NaN.

A very high modality learning rate on its own tends to degrade rather than
collapse: the title encoder ends in a layer norm, so its output stays bounded
and the DT-layer keeps learning at the normal rate. Blowing up every rate
drives the loss to NaN, which the monitor flags immediately.
"""

import tempfile
from pathlib import Path

import numpy as np

from recbench import experiment as ex
from recbench.experiment import ExperimentConfig
from recbench.training import collapse_monitor

# m = 500 items puts the random baseline at 10 / 500 = 0.02
for curve in ([0.01, 0.05, 0.09, 0.10], [0.01, 0.05, 0.09, 0.015], [0.01, 0.015, 0.012]):
    print(curve, "->", "collapsed" if collapse_monitor(curve, 500) else "ok")

cfg = ExperimentConfig.from_text("""
[synth]
n_users = 300
n_items = 120
vocab_size = 200

[item_encoder]
kind = text_e2e
text_width = 32
text_blocks = 1

[train]
epochs = 6
dim = 32
""")

root = Path(tempfile.mkdtemp(prefix="recbench-collapse-"))
data = ex.prepare(cfg)
for name, overrides in (("default", {}),
                        ("modality x1000", {"train.lr_modality": "1.0"}),
                        ("all rates 1e200", {"train.lr": "1e200"})):
    run_cfg = cfg.with_overrides(overrides) if overrides else cfg
    run_cfg.output_dir = str(root / name.replace(" ", "_"))
    with np.errstate(all="ignore"):
        rep = ex.run_experiment(run_cfg, data).train_report
    print(f"{name:16s} val HR@10 {[round(h, 3) for h in rep.val_hr]} "
          f"collapsed={rep.collapsed} epoch={rep.collapse_epoch}")
