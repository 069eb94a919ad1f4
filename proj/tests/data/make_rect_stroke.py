"""Regenerates rect_stroke_661.txt: a hand-drawn-looking rectangular stroke.

The stroke walks the perimeter of a 220 m x 140 m rectangle with a slowly
drifting pen offset plus jitter. Seeds are scanned until the convex hull has
exactly 21 vertices; the chosen seed is recorded in the file header.
"""
import math
import sys

import numpy as np
from scipy.spatial import ConvexHull

N_POINTS = 661
WIDTH, HEIGHT = 220.0, 140.0
ORIGIN = (400.0, 300.0)


def stroke(seed):
    rng = np.random.default_rng(seed)
    perim = 2 * (WIDTH + HEIGHT)
    s = np.linspace(0.0, perim, N_POINTS, endpoint=False)
    pts = []
    drift = 0.0
    for d in s:
        drift = 0.97 * drift + rng.normal(0.0, 0.35)
        if d < WIDTH:
            x, y, nx, ny = d, 0.0, 0.0, -1.0
        elif d < WIDTH + HEIGHT:
            x, y, nx, ny = WIDTH, d - WIDTH, 1.0, 0.0
        elif d < 2 * WIDTH + HEIGHT:
            x, y, nx, ny = WIDTH - (d - WIDTH - HEIGHT), HEIGHT, 0.0, 1.0
        else:
            x, y, nx, ny = 0.0, HEIGHT - (d - 2 * WIDTH - HEIGHT), -1.0, 0.0
        off = drift + rng.normal(0.0, 0.4)
        pts.append((ORIGIN[0] + x + off * nx, ORIGIN[1] + y + off * ny))
    return np.round(np.array(pts), 3)


def main():
    for seed in range(10000):
        pts = stroke(seed)
        if len(ConvexHull(pts).vertices) == 21:
            with open(sys.argv[1] if len(sys.argv) > 1 else "rect_stroke_661.txt", "w") as f:
                f.write(f"# hand-drawn rectangular stroke, {N_POINTS} points, seed {seed}\n")
                for x, y in pts:
                    f.write(f"{x:.3f} {y:.3f}\n")
            print("seed", seed)
            return
    raise SystemExit("no seed found")


if __name__ == "__main__":
    main()
