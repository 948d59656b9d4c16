# Writes the files that test_exporter_load checks.
import os
import random
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "python"))
from feature_exporter import read_ad01, write_ad01  # noqa: E402

out = sys.argv[1]
os.makedirs(out, exist_ok=True)
rng = random.Random(0)
rows = [[rng.gauss(0, 1) for _ in range(7)] for _ in range(3)]
write_ad01(os.path.join(out, "three.ad01"), rows, ids=["img/a.png", "img/b.png", "img/c.png"])
write_ad01(os.path.join(out, "wide.ad01"), [[rng.uniform(-5, 5) for _ in range(768)] for _ in range(20)])
write_ad01(os.path.join(out, "empty.ad01"), [], dims=768)
assert len(read_ad01(os.path.join(out, "three.ad01"))) == 3
with open(os.path.join(out, "three.txt"), "w") as f:
    for r in rows:
        f.write(",".join(repr(v) for v in r) + "\n")
