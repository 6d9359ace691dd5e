"""Train an ID model and a title model on the same small synthetic catalogue and compare them.

    python demos/quickstart.py [output_dir]
"""

import sys
import tempfile
from pathlib import Path

from recbench import experiment as ex
from recbench.experiment import ExperimentConfig

SMALL = """
[synth]
n_users = 400
n_items = 150
vocab_size = 240
seed = 1

[item_encoder]
text_width = 32
text_blocks = 1

[train]
epochs = 8
dim = 32

[eval]
warm_k = 20,50
"""

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="recbench-"))
base = ExperimentConfig.from_text(SMALL)

# one prepared dataset shared by both runs, so the comparison is like for like
data = ex.prepare(base)
print("dataset:", ex.dump_stats(data))

runs = {}
for kind in ("id", "text_e2e"):
    cfg = base.with_overrides({"item_encoder.kind": kind})
    cfg.output_dir = str(out / kind)
    result = ex.run_experiment(cfg, data, on_epoch=lambda r, k=kind: print(
        f"  {k:8s} epoch {r.epoch:2d} loss {r.loss:.4f} val HR@10 {r.val_hr:.4f}"))
    runs[kind] = result
    print(f"{kind}: best epoch {result.train_report.best_epoch}, artifacts in {result.directory}")
    print(result.ranking_report.to_tsv())

rows = ex.compare([r.ranking_report for r in runs.values()])
print(ex.comparison_table(rows, 10))
print(ex.cost_report({k: r.train_report for k, r in runs.items()}))
