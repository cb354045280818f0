#!/usr/bin/env python3
"""Writes the run fixtures under data/fixtures/:

run_812.json    results for every manifest task, 501 of them successes
run_levels.json run with level/split fields whose per-level slices hit
                fixed target figures
"""

import argparse
import itertools
import json
import random
from pathlib import Path

# level -> (tgc, sgc, avg interactions); level 0 is the whole split
LEVEL_TARGETS = {
    "normal": {0: (73.2, 62.5, 10.69), 1: (91.2, 84.2, 5.94), 2: (77.1, 68.8, 10.36), 3: (54.0, 38.1, 12.69)},
    "challenge": {0: (57.6, 48.2, 8.40), 1: (91.7, 87.5, 4.65), 2: (58.7, 42.0, 8.33), 3: (44.1, 38.5, 11.86)},
}
PER_SCENARIO = 3
RUN_812_SUCCESSES = 501


def close(value, target, places):
    return abs(value - target) <= 0.5 * 10 ** -places + 1e-9


def level_candidates(tgc, sgc, max_scenarios=90):
    out = []
    for n in range(2, max_scenarios + 1):
        for s in range(n + 1):
            if not close(100 * s / n, sgc, 1):
                continue
            tasks = PER_SCENARIO * n
            for k in range(PER_SCENARIO * s, PER_SCENARIO * s + (PER_SCENARIO - 1) * (n - s) + 1):
                if close(100 * k / tasks, tgc, 1):
                    out.append((n, s, k))
    return out


def step_totals(avg, tasks):
    return [t for t in range(int(avg * tasks) - 2, int(avg * tasks) + 3) if close(t / tasks, avg, 2)]


def solve_split(levels):
    """Per-level rows are matched exactly at one decimal (two for averages), and so are
    the split's overall completion rates. The overall interaction average is not
    a task-weighted mean of the level averages for any consistent set
    of counts, so it is only brought as close as possible."""
    cands = {l: level_candidates(*levels[l][:2]) for l in (1, 2, 3)}
    tgc_all, sgc_all, avg_all = levels[0]
    best = None
    for combo in itertools.product(cands[1], cands[2], cands[3]):
        n = sum(c[0] for c in combo)
        s = sum(c[1] for c in combo)
        k = sum(c[2] for c in combo)
        if not (close(100 * s / n, sgc_all, 1) and close(100 * k / (PER_SCENARIO * n), tgc_all, 1)):
            continue
        totals = [step_totals(levels[l][2], PER_SCENARIO * c[0]) for l, c in zip((1, 2, 3), combo)]
        if not all(totals):
            continue
        for steps in itertools.product(*totals):
            key = (round(abs(sum(steps) / (PER_SCENARIO * n) - avg_all), 1), n)
            if best is None or key < best[0]:
                best = (key, combo, steps)
    if best is None:
        raise SystemExit("no consistent fixture found")
    return best[1], best[2]


def spread_steps(total, count, rng):
    base = [total // count] * count
    for i in range(total - sum(base)):
        base[i] += 1
    # shuffle mass between pairs so the values are not all equal
    for _ in range(count * 2):
        a, b = rng.randrange(count), rng.randrange(count)
        d = rng.randint(0, 2)
        if base[a] - d >= 1:
            base[a] -= d
            base[b] += d
    return base


def levels_run(rng):
    results = {}
    for split, levels in LEVEL_TARGETS.items():
        combo, steps = solve_split(levels)
        for level, (n, s, k), total in zip((1, 2, 3), combo, steps):
            extra = k - PER_SCENARIO * s
            per = [PER_SCENARIO] * s + [0] * (n - s)
            failing = list(range(s, n))
            while extra:
                i = rng.choice(failing)
                if per[i] < PER_SCENARIO - 1:
                    per[i] += 1
                    extra -= 1
            step_values = spread_steps(total, PER_SCENARIO * n, rng)
            for sc in range(n):
                outcomes = ["success"] * per[sc] + ["failure"] * (PER_SCENARIO - per[sc])
                rng.shuffle(outcomes)
                for j, status in enumerate(outcomes):
                    tid = f"{split}-l{level}-sc{sc:02d}-{j}"
                    results[tid] = {"status": status, "steps": step_values[sc * PER_SCENARIO + j],
                                    "duration_ms": 0.0, "template_id": f"{split}-l{level}-sc{sc:02d}",
                                    "level": level, "split": split}
    return {"run_id": "levels-run", "agent_version": "fixture",
            "sample": {"name": "full", "size": len(results), "selection": "all_tasks", "seed": 0},
            "results": results, "started_at": "2025-01-01T00:00:00.000Z", "finished_at": "2025-01-01T00:00:00.000Z"}


def run_812(manifest, rng):
    tasks = manifest["tasks"]
    winners = set(rng.sample(range(len(tasks)), RUN_812_SUCCESSES))
    results = {}
    for i, t in enumerate(tasks):
        if i in winners:
            status = "success"
        else:
            status = "error" if rng.random() < 0.05 else "failure"
        results[t["id"]] = {"status": status, "steps": rng.randint(3, 20), "duration_ms": 0.0,
                            "template_id": t["template_id"]}
    return {"run_id": "full-812", "agent_version": "fixture",
            "sample": {"name": "full", "size": len(tasks), "selection": "all_tasks", "seed": 0},
            "results": results, "started_at": "2025-01-01T00:00:00.000Z", "finished_at": "2025-01-01T00:00:00.000Z"}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--data", default=str(Path(__file__).resolve().parent.parent / "data"))
    ap.add_argument("--seed", type=int, default=11)
    args = ap.parse_args()
    data = Path(args.data)
    rng = random.Random(args.seed)
    manifest = json.loads((data / "manifest" / "tasks_812.json").read_text())
    out = data / "fixtures"
    out.mkdir(parents=True, exist_ok=True)
    (out / "run_812.json").write_text(json.dumps(run_812(manifest, rng), indent=1) + "\n")
    (out / "run_levels.json").write_text(json.dumps(levels_run(rng), indent=1) + "\n")


if __name__ == "__main__":
    main()
