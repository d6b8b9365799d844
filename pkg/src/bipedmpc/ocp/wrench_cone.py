"""Rectangular contact-wrench cone for a flat foot.

Sixteen homogeneous inequality rows ``F w <= 0`` on the 6D wrench
``w = [fx, fy, fz, mx, my, mz]`` at the foot-center origin: the friction
pyramid, the center-of-pressure bounds from the foot half-extents, and the
eight coupled yaw-moment faces. Equivalent to requiring a nonnegative
pressure/friction distribution over the foot rectangle (the corner-generator
cone), which the test suite checks by linear programming.
"""

import numpy as np


def wrench_cone_rows(half_length, half_width, friction):
    """(16, 6) matrix F with the cone given by F w <= 0."""
    X, Y, mu = float(half_length), float(half_width), float(friction)
    if X <= 0 or Y <= 0 or mu <= 0:
        raise ValueError("foot half-extents and friction must be positive")
    rows = [
        # |fx| <= mu fz, |fy| <= mu fz
        [1, 0, -mu, 0, 0, 0],
        [-1, 0, -mu, 0, 0, 0],
        [0, 1, -mu, 0, 0, 0],
        [0, -1, -mu, 0, 0, 0],
        # CoP: |my| <= X fz, |mx| <= Y fz
        [0, 0, -X, 0, 1, 0],
        [0, 0, -X, 0, -1, 0],
        [0, 0, -Y, 1, 0, 0],
        [0, 0, -Y, -1, 0, 0],
    ]
    # yaw moment: mz_min <= mz <= mz_max with
    #   mz_max = mu(X+Y)fz - |Y fx + mu mx| - |X fy + mu my|
    #   mz_min = -mu(X+Y)fz + |Y fx - mu mx| + |X fy - mu my|
    for s1 in (1, -1):
        for s2 in (1, -1):
            rows.append([s1 * Y, s2 * X, -mu * (X + Y), s1 * mu, s2 * mu, 1])
            rows.append([s1 * Y, s2 * X, -mu * (X + Y), -s1 * mu, -s2 * mu, -1])
    return np.array(rows, dtype=float)
