"""Hot numeric kernels.

Every function here has a pure-numpy implementation (suffix ``_np``) and a
numba ``@njit`` twin.  Which one backs the public name is decided once at
import time: numba is used when it imports cleanly and the environment
variable ``DISTREG_NO_NUMBA`` is unset/empty.  ``bench/benchmark_kernels.py``
times the two paths against each other.

Kernel ``kind`` codes: 0 = gaussian, 1 = laplace, 2 = constant.
"""

from __future__ import annotations

import math
import os

import numpy as np

_GAUSS, _LAPLACE, _CONST = 0, 1, 2


# ---------------------------------------------------------------------------
# numpy reference implementations

def kernel_cross_mean_np(a, wa, b, wb, kind, param):
    """Weighted double sum  sum_ij wa_i wb_j k(a_i, b_j)."""
    d = a[:, None] - b[None, :]
    if kind == _GAUSS:
        k = np.exp(-0.5 * (d / param) ** 2)
    elif kind == _LAPLACE:
        k = np.exp(-param * np.abs(d))
    else:
        k = np.full_like(d, param)
    return float(wa @ k @ wb)


def kde_pdf_np(xs, atoms, weights, bandwidths, kind):
    """Mixture-of-kernels density evaluated at each point of ``xs``."""
    z = (xs[:, None] - atoms[None, :]) / bandwidths[None, :]
    if kind == _GAUSS:
        k = np.exp(-0.5 * z * z) / (math.sqrt(2.0 * math.pi) * bandwidths[None, :])
    else:
        k = np.exp(-math.sqrt(2.0) * np.abs(z)) / (math.sqrt(2.0) * bandwidths[None, :])
    return k @ weights


def kde_cdf_np(xs, atoms, weights, bandwidths, kind):
    z = (xs[:, None] - atoms[None, :]) / bandwidths[None, :]
    if kind == _GAUSS:
        c = 0.5 * (1.0 + _erf_np(z / math.sqrt(2.0)))
    else:
        c = np.where(z < 0.0, 0.5 * np.exp(math.sqrt(2.0) * z),
                     1.0 - 0.5 * np.exp(-math.sqrt(2.0) * z))
    return c @ weights


def _erf_np(x):
    from scipy.special import erf

    return erf(x)


def pairwise_sq_dists_np(A, B):
    """Squared euclidean distances, M x N for A (M,d), B (N,d)."""
    aa = np.sum(A * A, axis=1)[:, None]
    bb = np.sum(B * B, axis=1)[None, :]
    d = aa + bb - 2.0 * (A @ B.T)
    np.maximum(d, 0.0, out=d)
    return d


def ecdf_np(xs, atoms, weights):
    """Weighted right-continuous ecdf: sum_i w_i 1{atom_i <= x} per x."""
    return (atoms[None, :] <= xs[:, None]) @ weights


# ---------------------------------------------------------------------------
# numba twins

def _build_numba():
    from numba import njit

    @njit(cache=True, fastmath=False)
    def kernel_cross_mean_nb(a, wa, b, wb, kind, param):
        total = 0.0
        for i in range(a.shape[0]):
            acc = 0.0
            ai = a[i]
            for j in range(b.shape[0]):
                d = ai - b[j]
                if kind == 0:
                    acc += wb[j] * math.exp(-0.5 * (d / param) ** 2)
                elif kind == 1:
                    acc += wb[j] * math.exp(-param * abs(d))
                else:
                    acc += wb[j] * param
            total += wa[i] * acc
        return total

    @njit(cache=True)
    def kde_pdf_nb(xs, atoms, weights, bandwidths, kind):
        out = np.empty(xs.shape[0])
        root2pi = math.sqrt(2.0 * math.pi)
        root2 = math.sqrt(2.0)
        for i in range(xs.shape[0]):
            acc = 0.0
            for j in range(atoms.shape[0]):
                z = (xs[i] - atoms[j]) / bandwidths[j]
                if kind == 0:
                    acc += weights[j] * math.exp(-0.5 * z * z) / (root2pi * bandwidths[j])
                else:
                    acc += weights[j] * math.exp(-root2 * abs(z)) / (root2 * bandwidths[j])
            out[i] = acc
        return out

    @njit(cache=True)
    def kde_cdf_nb(xs, atoms, weights, bandwidths, kind):
        out = np.empty(xs.shape[0])
        root2 = math.sqrt(2.0)
        for i in range(xs.shape[0]):
            acc = 0.0
            for j in range(atoms.shape[0]):
                z = (xs[i] - atoms[j]) / bandwidths[j]
                if kind == 0:
                    acc += weights[j] * 0.5 * (1.0 + math.erf(z / root2))
                else:
                    if z < 0.0:
                        acc += weights[j] * 0.5 * math.exp(root2 * z)
                    else:
                        acc += weights[j] * (1.0 - 0.5 * math.exp(-root2 * z))
        # right-continuity is automatic for continuous kernels
            out[i] = acc
        return out

    @njit(cache=True)
    def pairwise_sq_dists_nb(A, B):
        m, d = A.shape
        n = B.shape[0]
        out = np.empty((m, n))
        for i in range(m):
            for j in range(n):
                acc = 0.0
                for t in range(d):
                    diff = A[i, t] - B[j, t]
                    acc += diff * diff
                out[i, j] = acc
        return out

    @njit(cache=True)
    def ecdf_nb(xs, atoms, weights):
        out = np.empty(xs.shape[0])
        for i in range(xs.shape[0]):
            acc = 0.0
            for j in range(atoms.shape[0]):
                if atoms[j] <= xs[i]:
                    acc += weights[j]
            out[i] = acc
        return out

    return {
        "kernel_cross_mean": kernel_cross_mean_nb,
        "kde_pdf": kde_pdf_nb,
        "kde_cdf": kde_cdf_nb,
        "pairwise_sq_dists": pairwise_sq_dists_nb,
        "ecdf": ecdf_nb,
    }


_NUMPY_IMPLS = {
    "kernel_cross_mean": kernel_cross_mean_np,
    "kde_pdf": kde_pdf_np,
    "kde_cdf": kde_cdf_np,
    "pairwise_sq_dists": pairwise_sq_dists_np,
    "ecdf": ecdf_np,
}

USING_NUMBA = False
_impls = _NUMPY_IMPLS
if not os.environ.get("DISTREG_NO_NUMBA"):
    try:
        _impls = _build_numba()
        USING_NUMBA = True
    except Exception:  # pragma: no cover - numba missing or broken
        _impls = _NUMPY_IMPLS

kernel_cross_mean = _impls["kernel_cross_mean"]
kde_pdf = _impls["kde_pdf"]
kde_cdf = _impls["kde_cdf"]
pairwise_sq_dists = _impls["pairwise_sq_dists"]
ecdf = _impls["ecdf"]
