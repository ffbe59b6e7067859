"""Track many occlusion-free synthetic scenes and report link accuracy.

    python scripts/error_free_experiment.py --scenes 50 --slices 300
"""

import argparse
import time

from slicetrack.core import TrackerConfig
from slicetrack.evaluation import evaluate
from slicetrack.matching import track
from slicetrack.simulate import separable_scene


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenes", type=int, default=50)
    ap.add_argument("--slices", type=int, default=300)
    ap.add_argument("--policy", default="nearest-neighbor-resolve",
                    choices=TrackerConfig.POLICIES)
    args = ap.parse_args()

    start = time.perf_counter()
    totals = dict(total_links=0, correct_links=0, id_switches=0, fragmentations=0)
    print(f"{'seed':>4} {'T':>6} {'objects':>7} {'links':>6} {'correct':>7} {'switch':>6} {'events':>6}")
    for seed in range(args.scenes):
        config, det, truth, T = separable_scene(seed, n_slices=args.slices)
        trajs, events = track(det, TrackerConfig(T, ambiguity_policy=args.policy))
        r = evaluate(trajs, truth, T / 2)
        for k in totals:
            totals[k] += getattr(r, k)
        print(f"{seed:>4} {T:6.2f} {len(truth.ids()):>7} {r.total_links:>6} "
              f"{r.correct_links:>7} {r.id_switches:>6} {len(events):>6}")
    print(f"\n{totals}  ({time.perf_counter() - start:.2f}s)")


if __name__ == "__main__":
    main()
