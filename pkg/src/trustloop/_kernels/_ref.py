"""Pure-numpy reference kernels.

Same contract as the compiled extension in ``_core.pyx``; used as the
fallback backend when the extension is unavailable and as the ground truth
for backend-agreement tests.
"""

from __future__ import annotations

import numpy as np

ACT_TANH = 0
ACT_RELU = 1

BACKEND_NAME = "python"


def forward_value(ws, bs, x, act_id):
    """Scalar output of a dense net: hidden activation per act_id, tanh head.

    ws/bs are per-layer weight matrices (out, in) and bias vectors, the last
    layer being the single-unit output layer.
    """
    a = np.asarray(x, dtype=np.float64)
    last = len(ws) - 1
    for i in range(len(ws)):
        z = ws[i] @ a + bs[i]
        if i == last or act_id == ACT_TANH:
            a = np.tanh(z)
        else:
            a = np.maximum(z, 0.0)
    return float(a[0])


def forward_backward(ws, bs, x, act_id, upstream):
    """Forward pass plus exact reverse-mode gradients.

    Returns (y, dws, dbs, dx) where dws/dbs mirror ws/bs and dx is the
    gradient with respect to the input, all scaled by the scalar upstream
    gradient.
    """
    a = np.asarray(x, dtype=np.float64)
    last = len(ws) - 1
    acts = [a]
    zs = []
    for i in range(len(ws)):
        z = ws[i] @ a + bs[i]
        zs.append(z)
        if i == last or act_id == ACT_TANH:
            a = np.tanh(z)
        else:
            a = np.maximum(z, 0.0)
        acts.append(a)
    y = float(acts[-1][0])

    dws = [None] * len(ws)
    dbs = [None] * len(ws)
    # tanh head: dy/dz = 1 - y^2
    da = np.array([upstream], dtype=np.float64)
    for i in range(last, -1, -1):
        if i == last or act_id == ACT_TANH:
            dz = da * (1.0 - acts[i + 1] ** 2)
        else:
            dz = da * (zs[i] > 0.0)
        dws[i] = np.outer(dz, acts[i])
        dbs[i] = dz
        da = ws[i].T @ dz
    return y, dws, dbs, da


def ks2d_stat(a, b):
    """Two-sample quadrant statistic over 2-D points.

    For every point of each sample taken as the origin, the plane splits into
    four quadrants by (x > cx, y > cy); the statistic per origin is the
    largest absolute difference between the two samples' quadrant fractions.
    The result averages the per-sample maxima, so swapping the samples leaves
    it unchanged.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    d1 = _max_quadrant_gap(a, a, b)
    d2 = _max_quadrant_gap(b, a, b)
    return (d1 + d2) / 2.0


def _max_quadrant_gap(centers, a, b):
    n1 = a.shape[0]
    n2 = b.shape[0]
    worst = 0.0
    for cx, cy in centers:
        agx = a[:, 0] > cx
        agy = a[:, 1] > cy
        bgx = b[:, 0] > cx
        bgy = b[:, 1] > cy
        for qa, qb in (
            (agx & agy, bgx & bgy),
            (~agx & agy, ~bgx & bgy),
            (~agx & ~agy, ~bgx & ~bgy),
            (agx & ~agy, bgx & ~bgy),
        ):
            gap = abs(int(qa.sum()) / n1 - int(qb.sum()) / n2)
            if gap > worst:
                worst = gap
    return worst
