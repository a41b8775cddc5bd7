"""Hot inner loops: columnwise rank-one scatter/gather kernels.

The four kernels below dominate runtime for large point sets.  Each rank-one
column of a columnwise-Kronecker operator touches only a small window of
positions per axis, and the kernels walk exactly those windows.

Two interchangeable backends exist:

* ``numba`` (default): ``@njit``-compiled point loops, no large scratch.
* ``numpy``: chunked vectorized fallback using fancy indexing + ``bincount``.

Selection happens once at import via the ``SPLINEMG_KERNELS`` environment
variable (``auto``, ``numba`` or ``numpy``).  Both backends are sequential
and bit-deterministic.  ``get_backend(name)`` exposes both for benchmarking.
"""
from __future__ import annotations

import os

import numpy as np

_CHOICE = os.environ.get("SPLINEMG_KERNELS", "auto").lower()
if _CHOICE not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"SPLINEMG_KERNELS must be 'auto', 'numba' or 'numpy', got {_CHOICE!r}"
    )

if _CHOICE == "numpy":
    NUMBA_ENABLED = False
else:
    try:
        import numba

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        if _CHOICE == "numba":
            raise
        NUMBA_ENABLED = False

# Chunk length of the vectorized fallback; bounds its scratch memory at
# roughly 4 * CHUNK * ncomb values.
CHUNK = 2048


# ---------------------------------------------------------------------------
# numpy backend
# ---------------------------------------------------------------------------

def _window_weights(vals, digits, lo, hi):
    """Combined per-column window weights for points lo:hi, shape (hi-lo, ncomb)."""
    w = vals[lo:hi, 0, digits[:, 0]]
    for p in range(1, digits.shape[1]):
        w = w * vals[lo:hi, p, digits[:, p]]
    return w


def _np_scatter(vals, base, rel, digits, x, out):
    for lo in range(0, base.shape[0], CHUNK):
        hi = min(lo + CHUNK, base.shape[0])
        w = _window_weights(vals, digits, lo, hi)
        idx = base[lo:hi, None] + rel[None, :]
        out += np.bincount(
            idx.ravel(), weights=(x[lo:hi, None] * w).ravel(), minlength=out.shape[0]
        )
    return out


def _np_gather(vals, base, rel, digits, y, out):
    for lo in range(0, base.shape[0], CHUNK):
        hi = min(lo + CHUNK, base.shape[0])
        w = _window_weights(vals, digits, lo, hi)
        idx = base[lo:hi, None] + rel[None, :]
        out[lo:hi] = (w * y[idx]).sum(axis=1)
    return out


def _np_scatter_squares(vals, base, rel, digits, out):
    for lo in range(0, base.shape[0], CHUNK):
        hi = min(lo + CHUNK, base.shape[0])
        w = _window_weights(vals, digits, lo, hi)
        idx = base[lo:hi, None] + rel[None, :]
        out += np.bincount(idx.ravel(), weights=(w * w).ravel(), minlength=out.shape[0])
    return out


def _np_gram_matvec(vals, base, rel, digits, x, out):
    # Fused gather-then-scatter: out += A (A' x) without an n-length buffer.
    for lo in range(0, base.shape[0], CHUNK):
        hi = min(lo + CHUNK, base.shape[0])
        w = _window_weights(vals, digits, lo, hi)
        idx = base[lo:hi, None] + rel[None, :]
        s = (w * x[idx]).sum(axis=1)
        out += np.bincount(idx.ravel(), weights=(s[:, None] * w).ravel(), minlength=out.shape[0])
    return out


_NUMPY_BACKEND = {
    "scatter": _np_scatter,
    "gather": _np_gather,
    "scatter_squares": _np_scatter_squares,
    "gram_matvec": _np_gram_matvec,
}


# ---------------------------------------------------------------------------
# numba backend
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:

    @numba.njit(cache=True)
    def _nb_scatter(vals, base, rel, digits, x, out):
        n = base.shape[0]
        ncomb, num_axes = digits.shape
        for i in range(n):
            xi = x[i]
            if xi == 0.0:
                continue
            b = base[i]
            for c in range(ncomb):
                w = xi
                for p in range(num_axes):
                    w *= vals[i, p, digits[c, p]]
                out[b + rel[c]] += w
        return out

    @numba.njit(cache=True)
    def _nb_gather(vals, base, rel, digits, y, out):
        n = base.shape[0]
        ncomb, num_axes = digits.shape
        for i in range(n):
            b = base[i]
            acc = 0.0
            for c in range(ncomb):
                w = 1.0
                for p in range(num_axes):
                    w *= vals[i, p, digits[c, p]]
                acc += w * y[b + rel[c]]
            out[i] = acc
        return out

    @numba.njit(cache=True)
    def _nb_scatter_squares(vals, base, rel, digits, out):
        n = base.shape[0]
        ncomb, num_axes = digits.shape
        for i in range(n):
            b = base[i]
            for c in range(ncomb):
                w = 1.0
                for p in range(num_axes):
                    w *= vals[i, p, digits[c, p]]
                out[b + rel[c]] += w * w
        return out

    @numba.njit(cache=True)
    def _nb_gram_matvec(vals, base, rel, digits, x, out, wbuf):
        n = base.shape[0]
        ncomb, num_axes = digits.shape
        for i in range(n):
            b = base[i]
            s = 0.0
            for c in range(ncomb):
                w = 1.0
                for p in range(num_axes):
                    w *= vals[i, p, digits[c, p]]
                wbuf[c] = w
                s += w * x[b + rel[c]]
            if s != 0.0:
                for c in range(ncomb):
                    out[b + rel[c]] += wbuf[c] * s
        return out

    def _nb_gram_matvec_entry(vals, base, rel, digits, x, out):
        wbuf = np.empty(rel.shape[0])
        return _nb_gram_matvec(vals, base, rel, digits, x, out, wbuf)

    _NUMBA_BACKEND = {
        "scatter": _nb_scatter,
        "gather": _nb_gather,
        "scatter_squares": _nb_scatter_squares,
        "gram_matvec": _nb_gram_matvec_entry,
    }


def get_backend(name: str) -> dict:
    """Return the kernel table for ``'numba'`` or ``'numpy'``."""
    if name == "numpy":
        return _NUMPY_BACKEND
    if name == "numba":
        if not NUMBA_ENABLED:
            raise RuntimeError("numba backend requested but numba is unavailable")
        return _NUMBA_BACKEND
    raise ValueError(f"unknown backend {name!r}")


ACTIVE_BACKEND = "numba" if NUMBA_ENABLED else "numpy"
_ACTIVE = get_backend(ACTIVE_BACKEND)

scatter = _ACTIVE["scatter"]
gather = _ACTIVE["gather"]
scatter_squares = _ACTIVE["scatter_squares"]
gram_matvec = _ACTIVE["gram_matvec"]
