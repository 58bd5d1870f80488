"""Regenerate the stored true-front constants for every benchmark problem.

For each problem this samples the Pareto front at high resolution
(closed-form parameterization where one exists, otherwise a scrambled
low-discrepancy scan of the input box), derives the reference point as
the componentwise front minimum minus 10% of the front range, computes
the exact hypervolume, and rewrites src/choicebo/data/front_constants.json.

Run from the repository root:

    python3 scripts/compute_front_constants.py
"""

import json
import time
from pathlib import Path

import numpy as np

from choicebo.benchmarks import _DEFS, hypervolume, true_front

N_SAMPLES = 100_000  # closed-form front parameterizations
N_SCAN = 400_000  # input-box sweeps, rounded up to a power of two
SEED = 0
OUT = Path(__file__).resolve().parent.parent / "src" / "choicebo" / "data" / "front_constants.json"


def main() -> None:
    constants = {
        "_generated_by": "scripts/compute_front_constants.py",
        "_n_samples": N_SAMPLES,
        "_n_scan": N_SCAN,
        "_seed": SEED,
    }
    for name, definition in sorted(_DEFS.items()):
        start = time.perf_counter()
        n = N_SAMPLES if definition.front is not None else N_SCAN
        front = true_front(name, n, seed=SEED)
        lo = front.min(axis=0)
        span = front.max(axis=0) - lo
        if np.any(span <= 0):
            raise RuntimeError(f"{name}: degenerate front range {span}")
        ref = lo - 0.1 * span
        hv = hypervolume(front, ref)
        constants[name] = {
            "ref_point": ref.tolist(),
            "true_front_hv": hv,
            "front_size": int(front.shape[0]),
        }
        print(
            f"{name:16s} front={front.shape[0]:6d}  hv={hv:.6f}  "
            f"ref={np.round(ref, 4).tolist()}  ({time.perf_counter() - start:.1f}s)"
        )
    OUT.write_text(json.dumps(constants, indent=2, sort_keys=True), encoding="utf-8")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
