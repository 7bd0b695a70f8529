"""Permutation-invariant scoring for separation outputs.

All N! reference-to-estimate assignments are evaluated exhaustively
(N <= 6, so at most 720 candidates) and the assignment with the highest
mean pairwise score wins; ties go to the lexicographically smallest
permutation. Exhaustive search is exact, which matters more here than
Hungarian-algorithm speed at 2-3 sources.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..audio import AudioBuffer
from ..errors import DegenerateSignal, TooManySources
from ._common import align_many, energy_ratio_db
from .snr import _si_snr_arrays

_MAX_SOURCES = 6


@dataclass(frozen=True)
class PitResult:
    """Best assignment: permutation[i] is the estimate index matched to reference i."""

    permutation: tuple[int, ...]
    per_pair_scores: tuple[float, ...]
    mean_score: float


def _snr_arrays(x: np.ndarray, y: np.ndarray) -> float:
    residual = y - x
    return energy_ratio_db(float(np.dot(x, x)), float(np.dot(residual, residual)))


_PAIR_METRICS = {"si_snr": _si_snr_arrays, "snr": _snr_arrays}


def pit_score(
    refs: list[AudioBuffer],
    ests: list[AudioBuffer],
    metric: str = "si_snr",
) -> PitResult:
    """Exhaustive best-permutation score; see module docstring."""
    if metric not in _PAIR_METRICS:
        raise ValueError(f"metric must be one of {sorted(_PAIR_METRICS)}, got {metric!r}")
    if len(refs) != len(ests) or not refs:
        raise ValueError(f"need equal non-empty source lists, got {len(refs)} vs {len(ests)}")
    n = len(refs)
    if n > _MAX_SOURCES:
        raise TooManySources(f"{n} sources; exhaustive search is limited to {_MAX_SOURCES}")

    arrays, _ = align_many(list(refs) + list(ests))
    ref_arrays = arrays[:n]
    est_arrays = arrays[n:]
    for i, r in enumerate(ref_arrays):
        if not np.any(r):
            raise DegenerateSignal(f"reference {i} is all-zero")
    score_fn = _PAIR_METRICS[metric]

    pair_scores = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            pair_scores[i, j] = score_fn(ref_arrays[i], est_arrays[j])

    best_perm: tuple[int, ...] | None = None
    best_mean = -np.inf
    for perm in itertools.permutations(range(n)):  # lexicographic order
        mean = float(np.mean([pair_scores[i, perm[i]] for i in range(n)]))
        if mean > best_mean:
            best_mean = mean
            best_perm = perm

    assert best_perm is not None
    per_pair = tuple(float(pair_scores[i, best_perm[i]]) for i in range(n))
    return PitResult(best_perm, per_pair, float(np.mean(per_pair)))
