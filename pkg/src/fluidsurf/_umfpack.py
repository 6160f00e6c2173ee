"""Thin ctypes binding to the system UMFPACK library.

The coupled saddle-point matrices factor an order of magnitude faster with
UMFPACK's symmetric strategy and nested-dissection ordering than with the
SuperLU build shipped in scipy.  If the shared library is unavailable the
solver module falls back to scipy transparently.
"""

import ctypes
import ctypes.util

import numpy as np

__all__ = ["available", "UmfpackLU"]

_CONTROL_STRATEGY = 5
_CONTROL_ORDERING = 10
_STRATEGY_SYMMETRIC = 3
_ORDERING_CHOLMOD = 0
_SYS_A = 0

_ip = ctypes.POINTER(ctypes.c_int)
_dp = ctypes.POINTER(ctypes.c_double)


def _load():
    for name in ("libumfpack.so.5", "libumfpack.so",
                 ctypes.util.find_library("umfpack")):
        if not name:
            continue
        try:
            return ctypes.CDLL(name)
        except OSError:
            continue
    return None


_lib = _load()


def available():
    return _lib is not None


class UmfpackLU:
    """LU factorization of a square CSC matrix with a `solve` method."""

    def __init__(self, A):
        if _lib is None:
            raise RuntimeError("UMFPACK library not available")
        A = A.tocsc()
        A.sort_indices()
        self.n = A.shape[0]
        # keep references alive for the lifetime of the factorization
        self._Ap = np.ascontiguousarray(A.indptr, dtype=np.int32)
        self._Ai = np.ascontiguousarray(A.indices, dtype=np.int32)
        self._Ax = np.ascontiguousarray(A.data, dtype=np.float64)
        self._control = np.zeros(20)
        _lib.umfpack_di_defaults(self._control.ctypes.data_as(_dp))
        self._control[_CONTROL_STRATEGY] = _STRATEGY_SYMMETRIC
        self._control[_CONTROL_ORDERING] = _ORDERING_CHOLMOD

        sym = ctypes.c_void_p()
        status = _lib.umfpack_di_symbolic(
            self.n, self.n,
            self._Ap.ctypes.data_as(_ip), self._Ai.ctypes.data_as(_ip),
            self._Ax.ctypes.data_as(_dp), ctypes.byref(sym),
            self._control.ctypes.data_as(_dp), None)
        if status != 0:
            raise RuntimeError(f"umfpack symbolic failed (status {status})")
        self._numeric = ctypes.c_void_p()
        status = _lib.umfpack_di_numeric(
            self._Ap.ctypes.data_as(_ip), self._Ai.ctypes.data_as(_ip),
            self._Ax.ctypes.data_as(_dp), sym, ctypes.byref(self._numeric),
            self._control.ctypes.data_as(_dp), None)
        _lib.umfpack_di_free_symbolic(ctypes.byref(sym))
        if status != 0:
            self._numeric = None
            raise RuntimeError(f"umfpack numeric failed (status {status})")

    def solve(self, b):
        b = np.ascontiguousarray(b, dtype=np.float64)
        if b.shape != (self.n,):
            raise ValueError("right-hand side has wrong length")
        x = np.empty(self.n)
        status = _lib.umfpack_di_solve(
            _SYS_A,
            self._Ap.ctypes.data_as(_ip), self._Ai.ctypes.data_as(_ip),
            self._Ax.ctypes.data_as(_dp), x.ctypes.data_as(_dp),
            b.ctypes.data_as(_dp), self._numeric,
            self._control.ctypes.data_as(_dp), None)
        if status != 0:
            raise RuntimeError(f"umfpack solve failed (status {status})")
        return x

    def __del__(self):
        num = getattr(self, "_numeric", None)
        if num is not None and _lib is not None:
            _lib.umfpack_di_free_numeric(ctypes.byref(num))
