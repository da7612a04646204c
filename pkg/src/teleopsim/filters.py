"""O(1)-per-update sliding-window filters for vectors and orientations.

Vector streams (positions, forces) are smoothed with a running-sum moving
average over a ring buffer. Orientation streams are averaged as the dominant
eigenvector of the windowed outer-product matrix of the sample quaternions,
extracted by power iteration seeded with the previous output.

Both filters bound floating-point drift by recomputing their cumulative
state exactly from the ring buffer once every ``n`` updates, which keeps the
amortized update cost independent of the window size.

Windows are single-writer stateful objects: not safe for concurrent
mutation, safe to hand over between execution contexts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .se3 import Pose, UnitQuaternion


@dataclass(frozen=True)
class FilteredPose:
    """Smoothed position plus smoothed orientation."""

    position: np.ndarray
    orientation: UnitQuaternion

    def __post_init__(self):
        p = np.array(self.position, dtype=float).reshape(3)
        p.setflags(write=False)
        object.__setattr__(self, "position", p)

    @staticmethod
    def identity() -> "FilteredPose":
        return FilteredPose(np.zeros(3), UnitQuaternion.identity())


def dominant_eigenvector_sym4(m: np.ndarray, seed: np.ndarray | None = None):
    """Dominant eigenvector of a symmetric PSD 4x4 matrix.

    Power iteration with relative residual tolerance 1e-12 and at most 200
    iterations. Returns ``(vector, converged)``; on non-convergence the last
    iterate is returned with ``converged=False``.
    """
    m = np.asarray(m, dtype=float)
    if seed is not None and np.linalg.norm(seed) > 1e-12:
        v = np.asarray(seed, dtype=float) / np.linalg.norm(seed)
    else:
        e = np.zeros(4)
        e[int(np.argmax(np.diag(m)))] = 1.0
        v = e
    w = m @ v
    for _ in range(200):
        nw = float(np.linalg.norm(w))
        if nw < 1e-300:
            # m annihilates the iterate (e.g. zero matrix): nothing to improve.
            return v, True
        v = w / nw
        w = m @ v
        lam = float(v @ w)
        if float(np.linalg.norm(w - lam * v)) <= 1e-12 * max(lam, 1e-300):
            return v, True
    return v, False


class VectorWindow:
    """Moving average of 3-vectors with an O(1) running-sum update."""

    def __init__(self, size: int):
        if size < 1:
            raise ValueError("window size must be >= 1")
        self.size = size
        self._buf = np.zeros((size, 3))
        self._sum = np.zeros(3)
        self._count = 0
        self._mean = np.zeros(3)

    @property
    def count(self) -> int:
        return min(self._count, self.size)

    def push(self, sample) -> np.ndarray:
        """Insert a sample and return the mean of the current window."""
        v = np.asarray(sample, dtype=float)
        i = self._count % self.size
        if self._count >= self.size:
            self._sum = self._sum - self._buf[i]
        self._buf[i] = v
        self._sum = self._sum + v
        self._count += 1
        m = min(self._count, self.size)
        if self._count % self.size == 0:
            # periodic exact recompute bounds running-sum drift
            self._sum = self._buf.sum(axis=0)
        self._mean = self._sum / m
        return self._mean.copy()

    def mean(self) -> np.ndarray:
        """Current window mean; the last sample before a full window, zeros if empty."""
        return self._mean.copy()


class QuaternionWindow:
    """Windowed orientation average via the dominant-eigenvector method.

    Incoming samples are sign-aligned with the previous buffered sample
    (q and -q encode the same rotation) so that the accumulated
    outer-product matrix stays well conditioned for warm-started power
    iteration.
    """

    def __init__(self, size: int):
        if size < 1:
            raise ValueError("window size must be >= 1")
        self.size = size
        self._buf = np.zeros((size, 4))
        self._outer = np.zeros((4, 4))
        self._count = 0
        self._prev_sample: np.ndarray | None = None
        self._estimate = np.array([1.0, 0.0, 0.0, 0.0])
        self._has_output = False
        self.converged = True

    @property
    def count(self) -> int:
        return min(self._count, self.size)

    def push(self, q: UnitQuaternion) -> UnitQuaternion:
        """Insert a sample and return the averaged orientation."""
        v = q.as_array()
        if self._prev_sample is not None and float(v @ self._prev_sample) < 0.0:
            v = -v
        i = self._count % self.size
        if self._count >= self.size:
            old = self._buf[i]
            self._outer = self._outer - np.outer(old, old)
        self._buf[i] = v
        self._outer = self._outer + np.outer(v, v)
        self._count += 1
        self._prev_sample = v
        m = min(self._count, self.size)
        if self._count % self.size == 0:
            filled = self._buf[:m]
            self._outer = filled.T @ filled
        vec, ok = dominant_eigenvector_sym4(self._outer / m, seed=self._estimate)
        if float(vec @ self._estimate) < 0.0:
            vec = -vec
        self._estimate = vec
        self.converged = ok
        self._has_output = True
        return UnitQuaternion(*vec)

    def mean(self) -> UnitQuaternion:
        """Current average; identity if nothing was pushed yet."""
        if not self._has_output:
            return UnitQuaternion.identity()
        return UnitQuaternion(*self._estimate)


class PoseWindow:
    """Paired position and orientation windows producing a FilteredPose."""

    def __init__(self, size: int):
        self.positions = VectorWindow(size)
        self.orientations = QuaternionWindow(size)

    def push(self, pose: Pose) -> FilteredPose:
        p = self.positions.push(pose.position)
        q = self.orientations.push(pose.orientation)
        return FilteredPose(p, q)

    def mean(self) -> FilteredPose:
        return FilteredPose(self.positions.mean(), self.orientations.mean())
