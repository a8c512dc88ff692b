"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The kernels here dominate the runtime of schedule replay and convolution
lowering. Set ``DIFFLIGHT_BACKEND=numpy`` to force the numpy path (e.g. on
hosts without a working numba install); ``DIFFLIGHT_BACKEND=numba`` forces
the JIT path. Default is numba when importable. ``benchmarks/bench_backends.py``
times the two side by side.
"""

from __future__ import annotations

import os

import numpy as np

_HAS_NUMBA = False
try:
    from numba import njit

    _HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only on hosts without numba
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


def _pick_backend() -> str:
    choice = os.environ.get("DIFFLIGHT_BACKEND", "").strip().lower()
    if choice in ("numba", "numpy"):
        if choice == "numba" and not _HAS_NUMBA:
            raise RuntimeError("DIFFLIGHT_BACKEND=numba but numba is not importable")
        return choice
    return "numba" if _HAS_NUMBA else "numpy"


BACKEND = _pick_backend()


def active_backend() -> str:
    return BACKEND


# --------------------------------------------------------------------------
# im2col patch extraction
# --------------------------------------------------------------------------

def _im2col_numpy(padded: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    c, hp, wp = padded.shape
    h_out = (hp - kh) // stride + 1
    w_out = (wp - kw) // stride + 1
    windows = np.lib.stride_tricks.sliding_window_view(padded, (kh, kw), axis=(1, 2))
    windows = windows[:, ::stride, ::stride, :, :]
    # (C, H_out, W_out, kh, kw) -> (H_out*W_out, C*kh*kw), row-major patches
    patches = windows.transpose(1, 2, 0, 3, 4).reshape(h_out * w_out, c * kh * kw)
    return np.ascontiguousarray(patches)


@njit(cache=True)
def _im2col_numba(padded: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:  # pragma: no cover - jitted
    c, hp, wp = padded.shape
    h_out = (hp - kh) // stride + 1
    w_out = (wp - kw) // stride + 1
    out = np.empty((h_out * w_out, c * kh * kw), dtype=np.float64)
    for oy in range(h_out):
        for ox in range(w_out):
            row = oy * w_out + ox
            col = 0
            for ch in range(c):
                for dy in range(kh):
                    for dx in range(kw):
                        out[row, col] = padded[ch, oy * stride + dy, ox * stride + dx]
                        col += 1
    return out


def im2col(padded: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """Flatten conv patches of a padded (C, H, W) map into (positions, C*kh*kw)."""
    padded = np.ascontiguousarray(padded, dtype=np.float64)
    if BACKEND == "numba":
        return _im2col_numba(padded, kh, kw, stride)
    return _im2col_numpy(padded, kh, kw, stride)


# --------------------------------------------------------------------------
# tiled GEMM accumulation (schedule replay)
# --------------------------------------------------------------------------

def _accumulate_tiles_numpy(
    weights: np.ndarray,
    acts: np.ndarray,
    gemm: np.ndarray,
    r0: np.ndarray,
    r1: np.ndarray,
    c0: np.ndarray,
    c1: np.ndarray,
    out: np.ndarray,
) -> None:
    for i in range(gemm.shape[0]):
        g = gemm[i]
        out[g, r0[i]:r1[i]] += weights[r0[i]:r1[i], c0[i]:c1[i]] @ acts[g, c0[i]:c1[i]]


@njit(cache=True)
def _accumulate_tiles_numba(weights, acts, gemm, r0, r1, c0, c1, out):  # pragma: no cover - jitted
    for i in range(gemm.shape[0]):
        g = gemm[i]
        for r in range(r0[i], r1[i]):
            total = 0.0
            for c in range(c0[i], c1[i]):
                total += weights[r, c] * acts[g, c]
            out[g, r] += total


def accumulate_tiles(
    weights: np.ndarray,
    acts: np.ndarray,
    gemm: np.ndarray,
    r0: np.ndarray,
    r1: np.ndarray,
    c0: np.ndarray,
    c1: np.ndarray,
    out: np.ndarray,
) -> None:
    """Replay tile passes of a matrix-vector workload, accumulating partial sums.

    ``weights`` is (rows, inner); ``acts`` is (instances, inner); each pass i
    adds weights[r0:r1, c0:c1] @ acts[gemm[i], c0:c1] into out[gemm[i], r0:r1].
    """
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    acts = np.ascontiguousarray(acts, dtype=np.float64)
    if BACKEND == "numba":
        _accumulate_tiles_numba(weights, acts, gemm, r0, r1, c0, c1, out)
    else:
        _accumulate_tiles_numpy(weights, acts, gemm, r0, r1, c0, c1, out)
