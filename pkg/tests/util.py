"""Shared helpers for the test suite."""

import numpy as np

from ironreg.geometry import SimilarityTransform, quat_to_rot


def random_rotation(rng):
    q = rng.normal(size=4)
    return quat_to_rot(q / np.linalg.norm(q))


def random_transform(rng, scale_range=(0.5, 3.0), t_max=1.0):
    s = rng.uniform(*scale_range)
    t = rng.normal(size=3)
    t = t / np.linalg.norm(t) * rng.uniform(0, t_max)
    return SimilarityTransform(s, random_rotation(rng), t)


def random_unit_quaternions(rng, n):
    q = rng.normal(size=(n, 4))
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def rotation_angle_between(R1, R2):
    """Geodesic angle via ||R1-R2||_F = 2*sqrt(2)*sin(theta/2).

    Identical to arccos((trace-1)/2) but without its ~1e-8 resolution
    floor near zero, so sub-1e-9 assertions are meaningful.
    """
    d = np.linalg.norm(np.asarray(R1) - np.asarray(R2))
    return 2.0 * np.arcsin(min(d / (2.0 * np.sqrt(2.0)), 1.0))
