"""Produce the committed reference values under data/.

For each instance in data/instances/, runs both hosts with generous
budgets and keeps the best solution found. The resulting cost table
(data/bks.csv) and solution files (data/solutions/) serve as the
best-found references for gap reporting and pattern-bin analyses; they
are not proven optima.

Run from the repository root:  python scripts/make_references.py
"""

from __future__ import annotations

import csv
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from pils.hosts import HostConfig, run_gls, run_hgs  # noqa: E402
from pils.model import parse_instance, validate, write_solution  # noqa: E402

BUDGET_S = 90.0
JOBS = [
    ("hgs", 101), ("hgs", 202), ("hgs", 303),
    ("gls", 404), ("gls", 505),
]


def one(task):
    path, host, seed = task
    inst = parse_instance(Path(path).read_text())
    runner = run_hgs if host == "hgs" else run_gls
    res = runner(inst, HostConfig(t_max=BUDGET_S, seed=seed))
    assert validate(inst, res.best) == []
    return Path(path).stem, res.best_cost, write_solution(inst, res.best)


def main():
    instances = sorted((ROOT / "data" / "instances").glob("*.vrp"))
    tasks = [(str(p), host, seed) for p in instances for host, seed in JOBS]
    best: dict[str, tuple[int, str]] = {}
    t0 = time.time()
    with ProcessPoolExecutor(max_workers=2) as pool:
        for name, cost, text in pool.map(one, tasks):
            if name not in best or cost < best[name][0]:
                best[name] = (cost, text)
            print(f"[{time.time() - t0:7.0f}s] {name}: {cost} "
                  f"(best {best[name][0]})", flush=True)
    out = ROOT / "data" / "solutions"
    out.mkdir(parents=True, exist_ok=True)
    with open(ROOT / "data" / "bks.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["instance", "bks"])
        for name in sorted(best):
            cost, text = best[name]
            w.writerow([name, cost])
            (out / f"{name}.sol").write_text(text)
    print("wrote data/bks.csv and data/solutions/")


if __name__ == "__main__":
    main()
