"""Pure numpy/Python versions of the kernels in ``_kernels.pyx``."""
import numpy as np


def csr_spmm(offsets, targets, row_scale, col_scale, x):
    n = len(offsets) - 1
    out = np.zeros((n, x.shape[1]), dtype=np.float64)
    if len(targets) == 0:
        return out
    contrib = x[targets] * col_scale[targets][:, None]
    nonempty = offsets[1:] > offsets[:-1]
    starts = offsets[:-1][nonempty]
    out[nonempty] = np.add.reduceat(contrib, starts, axis=0)
    out *= row_scale[:, None]
    return out


def same_label_counts(offsets, targets, labels):
    n = len(offsets) - 1
    rows = np.repeat(np.arange(n), np.diff(offsets))
    same = (labels[rows] == labels[targets]).astype(np.int64)
    return np.bincount(rows, weights=same, minlength=n).astype(np.int64)


def label_propagation_sweep(offsets, targets, order, labels, counts):
    off = offsets.tolist()
    tg = targets.tolist()
    changes = 0
    for i in order.tolist():
        lo, hi = off[i], off[i + 1]
        if lo == hi:
            continue
        tally = {}
        for p in range(lo, hi):
            lab = int(labels[tg[p]])
            tally[lab] = tally.get(lab, 0) + 1
        best_count = max(tally.values())
        best = min(lab for lab, c in tally.items() if c == best_count)
        if best != labels[i]:
            labels[i] = best
            changes += 1
    return changes
