"""Regenerate the bundled synthetic ratings fixture.

Builds a crowdsourcing-shaped dataset: twelve conditions spanning the MOS
range, three screening levels, per-assignment screening outcomes, and a
sprinkling of flag failures. Raters who did well on the screening rate
closer to the laboratory MOS; failing raters drift, most strongly on the
noise-like and low-level conditions. Deterministic for a fixed seed.

Usage: python3 scripts/make_ratings_fixture.py [out_dir]
"""

import csv
import sys
from pathlib import Path

import numpy as np

SEED = 2024
N_WORKERS_PER_LEVEL = 28
ASSIGNMENTS_PER_WORKER = 3
CONDITIONS = {f"C{i:02d}": mos for i, mos in enumerate(
    (4.6, 1.6, 2.7, 2.3, 3.2, 2.9, 1.9, 4.1, 3.6, 3.9, 3.3, 1.2), start=1
)}
# conditions whose perception is most sensitive to a noisy environment
SENSITIVE = {"C02", "C04", "C05", "C07", "C12"}


def main(out_dir: Path) -> None:
    rng = np.random.default_rng(SEED)
    rows = []
    for level in (10, 8, 6):
        # harder screening levels fail more often
        p_correct = {10: 0.82, 8: 0.72, 6: 0.60}[level]
        for worker_index in range(N_WORKERS_PER_LEVEL):
            worker = f"w{level}_{worker_index:03d}"
            skill = rng.uniform(0.0, 1.0)
            for assignment_index in range(ASSIGNMENTS_PER_WORKER):
                assignment = f"{worker}_a{assignment_index}"
                n_correct = int(rng.binomial(4, min(0.98, p_correct * (0.7 + 0.6 * skill))))
                flags = {
                    "trapping_ok": int(rng.random() > 0.06),
                    "gold_ok": int(rng.random() > 0.05),
                    "headphone_ok": int(rng.random() > 0.07),
                }
                # good environments (high n_correct) track the lab closely
                fidelity = 0.25 + 0.75 * (n_correct / 4)
                for condition, lab in CONDITIONS.items():
                    drift = 0.0
                    if n_correct < 3 and condition in SENSITIVE:
                        drift = rng.uniform(0.5, 1.4)
                        if condition in ("C06", "C07"):
                            drift = -drift
                    noise = rng.normal(0.0, 1.3 - 0.9 * fidelity)
                    score = int(np.clip(round(lab + drift + noise), 1, 5))
                    rows.append(
                        {
                            "worker_id": worker,
                            "assignment_id": assignment,
                            "condition_id": condition,
                            "stimulus_id": f"{condition}_s{rng.integers(1, 7)}",
                            "score": score,
                            "jnd_level_db": level,
                            "n_correct": n_correct,
                            **flags,
                        }
                    )
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "ratings_fixture.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    with open(out_dir / "lab_mos_fixture.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["condition_id", "mos"])
        for condition, mos in sorted(CONDITIONS.items()):
            writer.writerow([condition, mos])
    print(f"wrote {len(rows)} rating rows for {3 * N_WORKERS_PER_LEVEL} workers")


if __name__ == "__main__":
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("tests/data")
    main(target)
