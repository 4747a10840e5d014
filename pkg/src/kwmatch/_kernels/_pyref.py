"""Pure-numpy fallback kernels for the hashed pair classifier.

The compiled module in ``_core.pyx`` mirrors these step for step; anything
changed here must change there too.
"""

from __future__ import annotations

import numpy as np


def fastpair_forward_batch(emb, head_w, head_b, ids_flat, offsets):
    """Positive-class probability per example.

    ``ids_flat``/``offsets`` hold the concatenated bucket ids of all examples
    (offsets has n+1 entries). Embedding rows are averaged, projected by the
    affine head, and passed through a 2-way softmax.
    """
    n = len(offsets) - 1
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        ids = ids_flat[offsets[i] : offsets[i + 1]]
        h = emb[ids].mean(axis=0)
        z = h @ head_w + head_b
        m = z.max()
        e = np.exp(z - m)
        out[i] = e[1] / (e[0] + e[1])
    return out


def fastpair_train_epoch(emb, head_w, head_b, ids_flat, offsets, labels, order, lrs):
    """One SGD pass in the given visiting order with per-step learning rates.

    Updates the parameter arrays in place and returns the summed cross-entropy
    of the visited examples (measured before each update).
    """
    total = 0.0
    for step in range(len(order)):
        i = int(order[step])
        lr = lrs[step]
        ids = ids_flat[offsets[i] : offsets[i + 1]]
        h = emb[ids].mean(axis=0)
        z = h @ head_w + head_b
        m = z.max()
        e = np.exp(z - m)
        p = e / e.sum()
        y = int(labels[i])
        total -= np.log(p[y])
        dz = p.copy()
        dz[y] -= 1.0
        dh = head_w @ dz  # gradient w.r.t. h, taken before the head update
        head_w -= lr * np.outer(h, dz)
        head_b -= lr * dz
        np.subtract.at(emb, ids, (lr / len(ids)) * dh)
    return total
