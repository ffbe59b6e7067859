"""Engineered head-on merges: does the tracker flag the merge slice, and
do bystanders stay error-free?

    python scripts/occlusion_experiment.py --scenes 20
"""

import argparse

from slicetrack.core import TrackerConfig
from slicetrack.evaluation import evaluate
from slicetrack.matching import track
from slicetrack.simulate import merge_scene


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenes", type=int, default=20)
    ap.add_argument("--policy", default="flag-only", choices=TrackerConfig.POLICIES)
    args = ap.parse_args()

    for seed in range(args.scenes):
        _, det, truth, T, merge_slice, pair = merge_scene(seed)
        trajs, events = track(det, TrackerConfig(T, ambiguity_policy=args.policy))
        flagged = [e for e in events if e.slice_index == merge_slice]
        whole = evaluate(trajs, truth, T / 2)
        bystanders = evaluate(trajs, truth.restrict(truth.ids() - pair), T / 2)
        print(f"seed {seed:>2}: merge at {merge_slice:>3}, events {[(e.slice_index, e.kind) for e in events]}, "
              f"flagged={bool(flagged)}, switches={whole.id_switches}, "
              f"bystanders error-free={bystanders.error_free}")


if __name__ == "__main__":
    main()
