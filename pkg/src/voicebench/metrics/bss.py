"""BSSEval-style separation scores (SDR / SIR / SAR).

Each estimate is decomposed against the references by least-squares
projection onto the subspace spanned by 0..filter_len-1 sample delays of
every reference:

    s_target = projection onto the delayed copies of the paired reference
    e_interf = projection onto all references' delay subspace - s_target
    e_artif  = estimate - projection onto the full subspace

    SDR = 10 log10(|s_target|^2 / |e_interf + e_artif|^2)
    SIR = 10 log10(|s_target|^2 / |e_interf|^2)
    SAR = 10 log10(|s_target + e_interf|^2 / |e_artif|^2)

The Gram matrix of delayed references is Toeplitz per block and is built
from FFT cross-correlations; the normal equations are solved with
Tikhonov damping 1e-10 * trace(G). Estimate i is scored against
reference i (permutation search lives in pit_score, not here).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import toeplitz
from scipy.signal import fftconvolve

from ..audio import AudioBuffer
from ..errors import DegenerateSignal, SingularProjection
from ._common import align_many, energy_ratio_db

_DAMPING = 1e-10
FLAG_SINGULAR = "singular_projection"


@dataclass(frozen=True)
class BssScores:
    """Per-source separation scores; None when the projection failed."""

    sdr: float | None
    sir: float | None
    sar: float | None
    flags: tuple[str, ...] = field(default=())


def _next_pow2(n: int) -> int:
    return 1 << (n - 1).bit_length()


class _DelayProjector:
    """Least-squares projection machinery shared by all estimates."""

    def __init__(self, refs: np.ndarray, filter_len: int):
        self.refs = refs  # (N, n), zero-padding handled below
        self.flen = filter_len
        n_src, n = refs.shape
        self.out_len = n + filter_len - 1
        self.n_fft = _next_pow2(self.out_len)
        self.ref_fft = np.fft.rfft(refs, self.n_fft, axis=1)

        # block-Toeplitz Gram matrix of all delayed references
        g = np.zeros((n_src * filter_len, n_src * filter_len))
        for i in range(n_src):
            for j in range(i + 1):
                corr = np.fft.irfft(self.ref_fft[i] * np.conj(self.ref_fft[j]), self.n_fft)
                block = toeplitz(
                    np.concatenate(([corr[0]], corr[-1 : -filter_len : -1])),
                    r=corr[:filter_len],
                )
                g[i * filter_len : (i + 1) * filter_len, j * filter_len : (j + 1) * filter_len] = block
                if i != j:
                    g[j * filter_len : (j + 1) * filter_len, i * filter_len : (i + 1) * filter_len] = block.T
        self.gram = g

    def _solve(self, gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        damped = gram + _DAMPING * np.trace(gram) * np.eye(gram.shape[0])
        coeffs = np.linalg.solve(damped, rhs)
        if not np.all(np.isfinite(coeffs)):
            raise SingularProjection("projection filter solve produced non-finite values")
        return coeffs

    def _cross_corr(self, est: np.ndarray) -> np.ndarray:
        est_fft = np.fft.rfft(est, self.n_fft)
        rhs = np.empty(self.refs.shape[0] * self.flen)
        for i in range(self.refs.shape[0]):
            c = np.fft.irfft(self.ref_fft[i] * np.conj(est_fft), self.n_fft)
            rhs[i * self.flen : (i + 1) * self.flen] = np.concatenate(
                ([c[0]], c[-1 : -self.flen : -1])
            )
        return rhs

    def project(self, est: np.ndarray, target: int) -> tuple[np.ndarray, np.ndarray]:
        """Return (projection onto target's delays, projection onto all delays)."""
        flen = self.flen
        rhs = self._cross_corr(est)
        t_slice = slice(target * flen, (target + 1) * flen)
        g_target = self.gram[t_slice, t_slice]

        c_target = self._solve(g_target, rhs[t_slice])
        c_all = self._solve(self.gram, rhs)

        proj_target = fftconvolve(c_target, self.refs[target])[: self.out_len]
        proj_all = np.zeros(self.out_len)
        for i in range(self.refs.shape[0]):
            proj_all += fftconvolve(c_all[i * flen : (i + 1) * flen], self.refs[i])[: self.out_len]
        return proj_target, proj_all


def bss_eval(
    refs: list[AudioBuffer],
    ests: list[AudioBuffer],
    filter_len: int = 512,
) -> list[BssScores]:
    """Score estimate i against reference i; see module docstring.

    A failed projection is reported per source via BssScores.flags; the
    remaining sources are still computed.
    """
    if len(refs) != len(ests) or not refs:
        raise ValueError(f"need equal non-empty source lists, got {len(refs)} vs {len(ests)}")
    if filter_len < 1:
        raise ValueError(f"filter_len must be >= 1, got {filter_len}")

    arrays, shared_flags = align_many(list(refs) + list(ests))
    n_src = len(refs)
    ref_mat = np.vstack(arrays[:n_src])
    est_mat = np.vstack(arrays[n_src:])

    for i, row in enumerate(ref_mat):
        if not np.any(row):
            raise DegenerateSignal(f"reference {i} is all-zero")
    for i in range(n_src):
        for j in range(i + 1, n_src):
            if np.array_equal(ref_mat[i], ref_mat[j]):
                raise SingularProjection(f"references {i} and {j} are identical")

    projector = _DelayProjector(ref_mat, filter_len)
    results = []
    for j in range(n_src):
        est_padded = np.concatenate([est_mat[j], np.zeros(filter_len - 1)])
        try:
            s_target, proj_all = projector.project(est_mat[j], j)
        except (SingularProjection, np.linalg.LinAlgError):
            results.append(BssScores(None, None, None, (*shared_flags, FLAG_SINGULAR)))
            continue
        e_interf = proj_all - s_target
        e_artif = est_padded - proj_all

        target_energy = float(np.dot(s_target, s_target))
        sdr = energy_ratio_db(target_energy, float(np.sum((e_interf + e_artif) ** 2)))
        sir = energy_ratio_db(target_energy, float(np.dot(e_interf, e_interf)))
        sar = energy_ratio_db(float(np.dot(proj_all, proj_all)), float(np.dot(e_artif, e_artif)))
        results.append(BssScores(sdr, sir, sar, tuple(shared_flags)))
    return results
