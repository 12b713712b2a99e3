# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: dense-net forward/backward and the 2-D quadrant statistic.

Mirrors the contract of the numpy reference in ``_ref.py``. The quadrant
statistic performs the same integer-count arithmetic as the reference, so the
two backends agree exactly there; the net kernels accumulate in plain C loops
and agree with the BLAS-backed reference to float64 rounding.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, tanh

cnp.import_array()

ACT_TANH = 0
ACT_RELU = 1

BACKEND_NAME = "compiled"


cdef void _affine(double[:, ::1] w, double[::1] b, double[::1] a, double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double s
    for i in range(w.shape[0]):
        s = b[i]
        for j in range(w.shape[1]):
            s += w[i, j] * a[j]
        out[i] = s


def forward_value(list ws, list bs, x, int act_id):
    """Scalar output of a dense net: hidden activation per act_id, tanh head."""
    cdef cnp.ndarray a = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray z
    cdef double[::1] zv
    cdef Py_ssize_t i, k, last = len(ws) - 1
    cdef int use_tanh
    for i in range(len(ws)):
        z = np.empty(ws[i].shape[0], dtype=np.float64)
        _affine(ws[i], bs[i], a, z)
        zv = z
        use_tanh = 1 if (i == last or act_id == ACT_TANH) else 0
        for k in range(zv.shape[0]):
            if use_tanh:
                zv[k] = tanh(zv[k])
            elif zv[k] < 0.0:
                zv[k] = 0.0
        a = z
    return float(a[0])


def forward_backward(list ws, list bs, x, int act_id, double upstream):
    """Forward pass plus exact reverse-mode gradients.

    Returns (y, dws, dbs, dx); see the reference implementation for the
    contract.
    """
    cdef cnp.ndarray a = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t nl = len(ws)
    cdef Py_ssize_t last = nl - 1
    cdef list acts = [a]
    cdef list zs = []
    cdef cnp.ndarray z
    cdef double[::1] zv, av
    cdef Py_ssize_t i, k, r, c
    cdef int use_tanh

    for i in range(nl):
        z = np.empty(ws[i].shape[0], dtype=np.float64)
        _affine(ws[i], bs[i], a, z)
        zs.append(np.array(z))
        zv = z
        use_tanh = 1 if (i == last or act_id == ACT_TANH) else 0
        for k in range(zv.shape[0]):
            if use_tanh:
                zv[k] = tanh(zv[k])
            elif zv[k] < 0.0:
                zv[k] = 0.0
        a = z
        acts.append(a)

    av = acts[nl]
    cdef double y = av[0]

    cdef list dws = [None] * nl
    cdef list dbs = [None] * nl
    cdef cnp.ndarray da = np.array([upstream], dtype=np.float64)
    cdef cnp.ndarray dz_arr, dw_arr, db_arr, da_next
    cdef double[::1] dav, dzv, prev, zrawv
    cdef double[:, ::1] wv, dwv
    cdef double s

    for i in range(last, -1, -1):
        dav = da
        av = acts[i + 1]
        zrawv = zs[i]
        dz_arr = np.empty(dav.shape[0], dtype=np.float64)
        dzv = dz_arr
        use_tanh = 1 if (i == last or act_id == ACT_TANH) else 0
        for k in range(dzv.shape[0]):
            if use_tanh:
                dzv[k] = dav[k] * (1.0 - av[k] * av[k])
            else:
                dzv[k] = dav[k] if zrawv[k] > 0.0 else 0.0
        prev = acts[i]
        dw_arr = np.empty((dzv.shape[0], prev.shape[0]), dtype=np.float64)
        dwv = dw_arr
        for r in range(dzv.shape[0]):
            for c in range(prev.shape[0]):
                dwv[r, c] = dzv[r] * prev[c]
        db_arr = np.array(dz_arr)
        wv = ws[i]
        da_next = np.empty(wv.shape[1], dtype=np.float64)
        dav = da_next
        for c in range(wv.shape[1]):
            s = 0.0
            for r in range(wv.shape[0]):
                s += wv[r, c] * dzv[r]
            dav[c] = s
        dws[i] = dw_arr
        dbs[i] = db_arr
        da = da_next

    return y, dws, dbs, da


cdef double _max_gap(double[:, ::1] centers, double[:, ::1] a, double[:, ::1] b) noexcept nogil:
    cdef Py_ssize_t n1 = a.shape[0]
    cdef Py_ssize_t n2 = b.shape[0]
    cdef Py_ssize_t k, i
    cdef double cx, cy, gap, worst = 0.0
    cdef long ca0, ca1, ca2, ca3
    cdef long cb0, cb1, cb2, cb3
    for k in range(centers.shape[0]):
        cx = centers[k, 0]
        cy = centers[k, 1]
        ca0 = ca1 = ca2 = ca3 = 0
        cb0 = cb1 = cb2 = cb3 = 0
        for i in range(n1):
            if a[i, 0] > cx:
                if a[i, 1] > cy:
                    ca0 += 1
                else:
                    ca3 += 1
            else:
                if a[i, 1] > cy:
                    ca1 += 1
                else:
                    ca2 += 1
        for i in range(n2):
            if b[i, 0] > cx:
                if b[i, 1] > cy:
                    cb0 += 1
                else:
                    cb3 += 1
            else:
                if b[i, 1] > cy:
                    cb1 += 1
                else:
                    cb2 += 1
        gap = fabs((<double> ca0) / n1 - (<double> cb0) / n2)
        if gap > worst:
            worst = gap
        gap = fabs((<double> ca1) / n1 - (<double> cb1) / n2)
        if gap > worst:
            worst = gap
        gap = fabs((<double> ca2) / n1 - (<double> cb2) / n2)
        if gap > worst:
            worst = gap
        gap = fabs((<double> ca3) / n1 - (<double> cb3) / n2)
        if gap > worst:
            worst = gap
    return worst


def ks2d_stat(a_in, b_in):
    """Two-sample quadrant statistic; see the reference docstring."""
    cdef cnp.ndarray a = np.ascontiguousarray(a_in, dtype=np.float64)
    cdef cnp.ndarray b = np.ascontiguousarray(b_in, dtype=np.float64)
    cdef double d1 = _max_gap(a, a, b)
    cdef double d2 = _max_gap(b, a, b)
    return (d1 + d2) / 2.0
