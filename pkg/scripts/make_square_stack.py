"""Write a PGM stack of two bright squares crossing a dark background.

    python scripts/make_square_stack.py out/ --frames 30
    slicetrack pipeline --frames out/frame_%04d.pgm --background out/background.pgm \
        --max-distance 5 --out-dir out/run
"""

import argparse
from pathlib import Path

from slicetrack.imaging import write_pgm
from slicetrack.simulate import render_squares


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out", type=Path)
    ap.add_argument("--frames", type=int, default=30)
    ap.add_argument("--width", type=int, default=160)
    ap.add_argument("--height", type=int, default=120)
    args = ap.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    size = (args.width, args.height)
    write_pgm(render_squares([], size), args.out / "background.pgm")
    for k in range(args.frames):
        squares = [(10 + 3 * k, 30 + k), (args.width - 10 - 2 * k, args.height - 20)]
        squares = [(x, y) for x, y in squares if 1 <= x < args.width - 1 and 1 <= y < args.height - 1]
        write_pgm(render_squares(squares, size), args.out / f"frame_{k:04d}.pgm")
    print(f"wrote {args.frames} frames to {args.out}")


if __name__ == "__main__":
    main()
