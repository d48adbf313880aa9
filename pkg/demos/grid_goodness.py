"""How often a random dyadic grid makes a fixed cube bad, as the goodness depth r grows."""
import numpy as np

from sparset1.grid import (Cube, Goodness, GoodnessParams, ShiftSequence, classify_good,
                           max_run_length, skeleton_distance)

gamma = 0.25
Q = Cube(-12, (137,))
rng = np.random.default_rng(11)

for r in (4, 6, 8, 10):
    params = GoodnessParams(gamma, r)
    bad = 0
    for _ in range(400):
        om = ShiftSequence.random(-12, 24, 1, rng=rng)
        bad += classify_good(Q, om, params) is Goodness.BAD
    print(f"r={r:2d}  bad frequency {bad / 400:.3f}")

# a zero shift puts every cube on long runs of equal digits
om = ShiftSequence.zeros(-12, 24, 1)
print("\nzero shift, longest equal-digit run:", max_run_length(Q, om))
print("zero shift verdict at r=4:", classify_good(Q, om, GoodnessParams(gamma, 4)).name)

# distance of a small cube to the skeleton of a big one, relative to the small side
P = Cube(-4, (0,))
print("\nskeleton distance / side for a few children of P:")
for idx in (1, 37, 128, 200):
    R = Cube(-12, (idx,))
    print(f"  index {idx:3d}: {skeleton_distance(R, P) / R.side:.1f}")
