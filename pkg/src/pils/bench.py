"""Experiment harness: batch solving, paired ablation, pattern-bin and
move-statistics analyses, and convergence traces.

Every command writes plain CSV. All values derived from the search are
deterministic for a fixed (instance, seed, config); real wall-clock
readings are confined to clearly marked columns/files so the remaining
outputs are byte-reproducible.
"""

from __future__ import annotations

import csv
import sys
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .clock import UNITS_PER_SECOND
from .hosts import HostConfig, RunResult, run_gls, run_hgs
from .injection import contains_pattern
from .model import (
    ParseError,
    gap_percent,
    parse_instance,
    parse_solution,
    validate,
    write_solution,
)
from .patterns import PatternPool

DEFAULT_FRACTIONS = (1, 2, 5, 10, 15, 20, 30, 50, 75, 100)


class InputError(Exception):
    """Bad input files or values: exit code 2."""


class InternalError(Exception):
    """A produced artifact failed its own validity check: exit code 3."""


@dataclass
class RunSpec:
    """One batch of runs: instances x seeds for a host/pils setting."""

    instances: list
    host: str = "hgs"
    pils: bool = True
    seeds: int = 1
    seed_base: int = 0
    t_max: float = 60.0
    phi_freq: int | None = None
    phi_size: int | None = None
    l_min: int = 3
    l_max: int = 5
    p_ex: float | None = None
    out_dir: Path = Path("runs")
    bks_path: Path | None = None
    meta_path: Path | None = None
    jobs: int = 1
    units_per_second: int = UNITS_PER_SECOND
    dump_pool: bool = False

    def __post_init__(self):
        if self.host not in ("hgs", "gls"):
            raise InputError(f"unknown host {self.host!r}")
        if self.seeds < 1:
            raise InputError("seed count must be >= 1")
        if not self.instances:
            raise InputError("no instances given")

    def config(self, seed: int, pils: bool) -> HostConfig:
        return HostConfig(
            t_max=self.t_max,
            seed=seed,
            pils=pils,
            p_ex=self.p_ex,
            phi_freq=self.phi_freq,
            phi_size=self.phi_size,
            l_min=self.l_min,
            l_max=self.l_max,
            units_per_second=self.units_per_second,
        )


def load_bks(path) -> dict[str, int]:
    table = {}
    try:
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0] == "instance":
                    continue
                table[row[0]] = float(row[1])
    except OSError as exc:
        raise InputError(f"cannot read BKS table {path}: {exc}") from exc
    return table


def load_metadata(path) -> dict[str, dict]:
    meta = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            meta[row["instance"]] = row
    return meta


def _runner(host):
    return run_hgs if host == "hgs" else run_gls


def run_one(job: dict) -> dict:
    """Execute one (instance, host, pils, seed) run and write its artifacts.

    Top-level so a process pool can dispatch it; returns the summary row.
    """
    inst_path = Path(job["instance"])
    try:
        inst = parse_instance(inst_path.read_text())
    except OSError as exc:
        raise InputError(f"cannot read {inst_path}: {exc}") from exc
    cfg = HostConfig(**job["config"])
    result = _runner(job["host"])(inst, cfg)
    report = validate(inst, result.best)
    if report:
        raise InternalError(
            f"{inst_path.name}: emitted solution failed validation: {report[:3]}")
    out_dir = Path(job["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{inst_path.stem}__{job['host']}__{'pils' if cfg.pils else 'nopils'}__s{cfg.seed}"
    (out_dir / f"{stem}.sol").write_text(write_solution(inst, result.best))
    with open(out_dir / f"{stem}.events.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["virt_ms", "real_ms", "event", "cost", "pils_cum_virt_ms"])
        w.writerows(result.events)
    with open(out_dir / f"{stem}.moves.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pattern_len", "move_order", "routes", "delta"])
        w.writerows(result.moves)
    if job.get("dump_pool"):
        with open(out_dir / f"{stem}.pool.csv", "w", newline="") as fh:
            result.pool.dump(fh)
    b = result.bucket_units
    return {
        "instance": inst_path.stem,
        "host": job["host"],
        "pils": "on" if cfg.pils else "off",
        "seed": cfg.seed,
        "cost": result.best_cost,
        "t_pils_percent": f"{result.pils_share:.3f}",
        "wall_s": f"{result.virt_ms / 1000.0:.3f}",
        "budget_s": f"{cfg.t_max:g}",
        "units_total": result.total_units,
        "units_ls": b.get("ls", 0),
        "units_inject": b.get("pils_inject", 0),
        "units_extract": b.get("pils_extract", 0),
        "units_other": b.get("other", 0),
        "real_ms": result.real_ms,
    }


SUMMARY_COLUMNS = [
    "instance", "host", "pils", "seed", "cost", "gap_percent",
    "t_pils_percent", "wall_s", "budget_s", "units_total", "units_ls",
    "units_inject", "units_extract", "units_other",
]


def _run_one_tolerant(job: dict):
    try:
        return run_one(job)
    except (InputError, ParseError, OSError) as exc:
        return {"__error__": f"{Path(job['instance']).name}: {exc}"}


def _execute(jobs: list[dict], jobs_n: int) -> list[dict]:
    if jobs_n > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=jobs_n) as pool:
            rows = list(pool.map(_run_one_tolerant, jobs))
    else:
        rows = [_run_one_tolerant(j) for j in jobs]
    failures = {r["__error__"] for r in rows if "__error__" in r}
    rows = [r for r in rows if "__error__" not in r]
    for msg in sorted(failures):
        print(f"warning: skipped run: {msg}", file=sys.stderr)
    if not rows:
        raise InputError("every run failed: " + "; ".join(sorted(failures)))
    return rows


def _attach_gaps(rows, bks, warn=sys.stderr):
    for row in rows:
        ref = bks.get(row["instance"])
        if ref is None:
            row["gap_percent"] = ""
            if bks:
                print(f"warning: no BKS entry for {row['instance']}; gap left empty",
                      file=warn)
        else:
            row["gap_percent"] = f"{gap_percent(row['cost'], ref):.4f}"
    return rows


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([row[c] for c in columns])


def cmd_solve(spec: RunSpec) -> Path:
    """Run every (instance, seed); write solutions, logs and summary.csv."""
    jobs = []
    for path in spec.instances:
        for s in range(spec.seeds):
            jobs.append({
                "instance": str(path),
                "host": spec.host,
                "out_dir": str(spec.out_dir),
                "dump_pool": spec.dump_pool,
                "config": vars(spec.config(spec.seed_base + s, spec.pils)),
            })
    rows = _execute(jobs, spec.jobs)
    bks = load_bks(spec.bks_path) if spec.bks_path else {}
    _attach_gaps(rows, bks)
    rows.sort(key=lambda r: (r["instance"], r["host"], r["pils"], r["seed"]))
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(spec.out_dir / "summary.csv", SUMMARY_COLUMNS, rows)
    _write_csv(spec.out_dir / "timings.csv",
               ["instance", "host", "pils", "seed", "real_ms"], rows)
    return spec.out_dir / "summary.csv"


def cmd_ablate(spec: RunSpec) -> Path:
    """Paired runs with identical seeds, component on vs off."""
    jobs = []
    for path in spec.instances:
        for s in range(spec.seeds):
            for pils in (True, False):
                jobs.append({
                    "instance": str(path),
                    "host": spec.host,
                    "out_dir": str(spec.out_dir),
                    "dump_pool": spec.dump_pool,
                    "config": vars(spec.config(spec.seed_base + s, pils)),
                })
    rows = _execute(jobs, spec.jobs)
    bks = load_bks(spec.bks_path) if spec.bks_path else {}
    _attach_gaps(rows, bks)
    rows.sort(key=lambda r: (r["instance"], r["host"], r["pils"], r["seed"]))
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(spec.out_dir / "summary.csv", SUMMARY_COLUMNS, rows)
    _write_csv(spec.out_dir / "timings.csv",
               ["instance", "host", "pils", "seed", "real_ms"], rows)

    by_key = {(r["instance"], r["seed"], r["pils"]): r for r in rows}
    paired = []
    for path in spec.instances:
        name = Path(path).stem
        for s in range(spec.seeds):
            seed = spec.seed_base + s
            on = by_key.get((name, seed, "on"))
            off = by_key.get((name, seed, "off"))
            if on is None or off is None:
                continue
            paired.append({
                "instance": name,
                "host": spec.host,
                "seed": seed,
                "cost_on": on["cost"],
                "cost_off": off["cost"],
                "gap_on": on["gap_percent"],
                "gap_off": off["gap_percent"],
                "t_pils_percent": on["t_pils_percent"],
            })
    _write_csv(spec.out_dir / "ablate.csv",
               ["instance", "host", "seed", "cost_on", "cost_off",
                "gap_on", "gap_off", "t_pils_percent"], paired)

    meta = load_metadata(spec.meta_path) if spec.meta_path else {}
    cats: dict[str, list] = defaultdict(list)
    sizes = {}
    for row in paired:
        cats["all"].append(row)
        m = meta.get(row["instance"])
        if m:
            sizes[row["instance"]] = int(m.get("n", 0))
            for key in ("depot", "customer", "route_len"):
                if m.get(key):
                    cats[f"{key}={m[key]}"].append(row)
    if sizes:
        median = sorted(sizes.values())[len(sizes) // 2]
        for row in paired:
            n = sizes.get(row["instance"])
            if n is not None:
                cats["size=small" if n < median else "size=large"].append(row)
    cat_rows = []
    for cat in sorted(cats):
        group = cats[cat]
        mean = lambda key: sum(float(r[key]) for r in group) / len(group)
        entry = {
            "category": cat,
            "runs": len(group),
            "mean_cost_on": f"{mean('cost_on'):.2f}",
            "mean_cost_off": f"{mean('cost_off'):.2f}",
        }
        if all(r["gap_on"] != "" and r["gap_off"] != "" for r in group):
            entry["mean_gap_on"] = f"{mean('gap_on'):.4f}"
            entry["mean_gap_off"] = f"{mean('gap_off'):.4f}"
        else:
            entry["mean_gap_on"] = entry["mean_gap_off"] = ""
        cat_rows.append(entry)
    _write_csv(spec.out_dir / "ablate_categories.csv",
               ["category", "runs", "mean_cost_on", "mean_cost_off",
                "mean_gap_on", "mean_gap_off"], cat_rows)
    return spec.out_dir / "ablate.csv"


@dataclass
class BinReport:
    """Frequency-ranked pattern bins measured against a reference solution."""

    instance: str
    rows: list = field(default_factory=list)  # dicts per (length, bin)
    monotone: dict = field(default_factory=dict)  # length -> bool


def analyze_bins(pool: PatternPool, inst, reference, bks_value=None,
                 bin_size=None) -> BinReport:
    """Bin each length's patterns by descending frequency (bins of n) and
    measure per-bin presence in the reference and best-associated gap."""
    report = validate(inst, reference)
    if any(line.startswith("missing") for line in report):
        raise InputError(f"reference solution incomplete: {report[:3]}")
    size = bin_size or inst.n
    out = BinReport(instance=inst.name)
    for length in range(pool.l_min, pool.l_max + 1):
        ranked = pool.ranked(length)
        nbins = len(ranked) // size
        fractions = []
        for b in range(nbins):
            chunk = ranked[b * size:(b + 1) * size]
            present = sum(1 for p in chunk if contains_pattern(reference, p))
            frac = present / size
            gaps = [gap_percent(pool.best_cost[p], bks_value)
                    for p in chunk if p in pool.best_cost] if bks_value else []
            out.rows.append({
                "instance": inst.name,
                "length": length,
                "bin": b + 1,
                "bin_size": size,
                "present_fraction": f"{frac:.4f}",
                "mean_best_gap": f"{sum(gaps) / len(gaps):.4f}" if gaps else "",
            })
            fractions.append(frac)
        if fractions:
            out.monotone[length] = all(
                fractions[i] >= fractions[i + 1] for i in range(len(fractions) - 1))
    if not out.rows:
        raise InputError("pool dump holds less than one full bin for every length")
    return out


def cmd_analyze_bins(instance_path, pool_path, solution_path, bks_path,
                     out_dir: Path) -> Path:
    inst = parse_instance(Path(instance_path).read_text())
    with open(pool_path, newline="") as fh:
        pool = PatternPool.load(fh)
    reference = parse_solution(Path(solution_path).read_text(), inst)
    bks_value = None
    if bks_path:
        bks_value = load_bks(bks_path).get(Path(instance_path).stem)
    report = analyze_bins(pool, inst, reference, bks_value)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "bins.csv",
               ["instance", "length", "bin", "bin_size", "present_fraction",
                "mean_best_gap"], report.rows)
    mono_rows = [{"instance": inst.name, "length": l,
                  "monotone_presence": str(v).lower()}
                 for l, v in sorted(report.monotone.items())]
    _write_csv(out_dir / "bins_monotone.csv",
               ["instance", "length", "monotone_presence"], mono_rows)
    return out_dir / "bins.csv"


def _read_moves(paths):
    records = []
    for path in paths:
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                records.append((int(row["pattern_len"]), int(row["move_order"]),
                                int(row["routes"]), int(row["delta"])))
    return records


def cmd_move_stats(log_dir: Path, out_dir: Path) -> Path:
    """Normalized histograms of applied injections plus the per-component
    share of search effort."""
    log_dir = Path(log_dir)
    moves = _read_moves(sorted(log_dir.glob("*.moves.csv")))
    out_dir.mkdir(parents=True, exist_ok=True)
    hists = {
        "move_order": Counter(m[1] for m in moves),
        "pattern_size": Counter(m[0] for m in moves),
        "routes_involved": Counter(m[2] for m in moves),
    }
    rows = []
    for kind, counter in hists.items():
        total = sum(counter.values())
        for value in sorted(counter):
            rows.append({
                "histogram": kind,
                "value": value,
                "count": counter[value],
                "proportion": f"{counter[value] / total:.6f}",
            })
    if not moves:
        print("warning: no applied injection records found; histograms empty",
              file=sys.stderr)
    _write_csv(out_dir / "move_stats.csv",
               ["histogram", "value", "count", "proportion"], rows)

    share_rows = []
    summary = log_dir / "summary.csv"
    if summary.exists():
        groups = defaultdict(list)
        with open(summary, newline="") as fh:
            for row in csv.DictReader(fh):
                groups[(row["host"], row["pils"])].append(row)
        for (host, pils), rows_g in sorted(groups.items()):
            total = sum(int(r["units_total"]) for r in rows_g)
            if total == 0:
                continue
            share = lambda col: 100.0 * sum(int(r[col]) for r in rows_g) / total
            share_rows.append({
                "host": host,
                "pils": pils,
                "share_ls": f"{share('units_ls'):.3f}",
                "share_inject": f"{share('units_inject'):.3f}",
                "share_extract": f"{share('units_extract'):.3f}",
                "share_other": f"{share('units_other'):.3f}",
            })
    _write_csv(out_dir / "phase_share.csv",
               ["host", "pils", "share_ls", "share_inject", "share_extract",
                "share_other"], share_rows)
    return out_dir / "move_stats.csv"


def cmd_convergence(log_dir: Path, out_dir: Path, fractions=DEFAULT_FRACTIONS,
                    bks_path=None) -> Path:
    """Best cost at given fractions of the budget, averaged over seeds."""
    log_dir = Path(log_dir)
    summary = log_dir / "summary.csv"
    if not summary.exists():
        raise InputError(f"{summary} not found (run solve/ablate first)")
    runs = []
    with open(summary, newline="") as fh:
        runs.extend(csv.DictReader(fh))
    bks = load_bks(bks_path) if bks_path else {}
    series = defaultdict(list)  # (instance, host, pils) -> [per-run traces]
    for run in runs:
        stem = (f"{run['instance']}__{run['host']}"
                f"__{'pils' if run['pils'] == 'on' else 'nopils'}__s{run['seed']}")
        events_path = log_dir / f"{stem}.events.csv"
        if not events_path.exists():
            raise InputError(f"missing event log {events_path}")
        bests = []
        with open(events_path, newline="") as fh:
            for row in csv.DictReader(fh):
                if row["event"] == "new_best":
                    bests.append((int(row["virt_ms"]), int(row["cost"])))
        budget_ms = float(run["budget_s"]) * 1000.0
        trace = []
        for frac in fractions:
            cut = budget_ms * frac / 100.0
            value = None
            for t, cost in bests:
                if t <= cut:
                    value = cost
                else:
                    break
            if value is None:
                value = bests[0][1] if bests else int(run["cost"])
            trace.append(value)
        series[(run["instance"], run["host"], run["pils"])].append(trace)
    rows = []
    for (instance, host, pils), traces in sorted(series.items()):
        k = len(traces)
        for idx, frac in enumerate(fractions):
            mean_cost = sum(tr[idx] for tr in traces) / k
            ref = bks.get(instance)
            rows.append({
                "instance": instance,
                "host": host,
                "pils": pils,
                "fraction": frac,
                "mean_cost": f"{mean_cost:.2f}",
                "mean_gap": f"{gap_percent(mean_cost, ref):.4f}" if ref else "",
                "runs": k,
            })
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "convergence.csv",
               ["instance", "host", "pils", "fraction", "mean_cost",
                "mean_gap", "runs"], rows)
    return out_dir / "convergence.csv"
