"""Offline desk run: generate, evaluate (oracle and tools), and plot one record.

Usage: python3 scripts/desk_run.py [OUT_DIR]
"""

import json
import sys
import time
from pathlib import Path

from tsalign.cli import main

out = Path(sys.argv[1] if len(sys.argv) > 1 else "desk-out")
out.mkdir(parents=True, exist_ok=True)
cfg = out / "desk.ini"
cfg.write_text("[run]\nseed = 21\n\n[corpus]\nuts = 100\nmts_shape = 50\nmts_local = 50\n")
corpus = out / "alignment.jsonl"

steps = [
    ["generate", "--config", str(cfg), "--out", str(out)],
    ["eval", "--config", str(cfg), "--corpus", str(corpus), "--oracle", "--out", str(out)],
    ["eval", "--config", str(cfg), "--corpus", str(corpus), "--tools", "acc=0.9", "--out", str(out)],
]
t0 = time.perf_counter()
for argv in steps:
    code = main(argv)
    print(f"$ tsalign {' '.join(argv[:1])} -> exit {code}")
    if code:
        sys.exit(code)
first = json.loads(corpus.open(encoding="utf-8").readline())["id"]
code = main(["plot", "--corpus", str(corpus), "--id", first, "--out", str(out / "plots")])
print(f"$ tsalign plot -> exit {code}; total {time.perf_counter() - t0:.1f}s")
sys.exit(code)
