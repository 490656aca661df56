"""Second-order finite differences restricted to a node mask."""

import numpy as np


def _shift(a, k, s, fill):
    """b[p] = a[p + s e_k] along axis ``k``; ``fill`` where that falls off the grid."""
    out = np.full_like(a, fill)
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if s > 0:
        src[k] = slice(s, None)
        dst[k] = slice(None, -s)
    else:
        src[k] = slice(None, s)
        dst[k] = slice(-s, None)
    out[tuple(dst)] = a[tuple(src)]
    return out


def masked_gradient(f, mask, h, lead=0):
    """Gradient of ``f`` using only nodes inside ``mask``.

    ``f`` has shape ``lead_shape + grid_shape + trailing_shape`` where ``lead``
    counts the leading axes (e.g. time). Central differences where both
    neighbours are in the mask, second-order one-sided differences at the edge
    of the mask, first-order as a last resort. One-sided stencils are written
    as differences of differences so constants differentiate to exactly 0. The derivative index is appended
    as the final axis; nodes outside the mask get 0.
    """
    f = np.asarray(f, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    gd = mask.ndim
    grid_axes = list(range(lead, lead + gd))
    g = np.moveaxis(f, grid_axes, list(range(gd)))
    ex = (slice(None),) * gd + (None,) * (g.ndim - gd)
    out = np.zeros(g.shape + (gd,))
    for k in range(gd):
        hk = float(h[k])
        mp1, mm1 = _shift(mask, k, 1, False), _shift(mask, k, -1, False)
        mp2, mm2 = _shift(mask, k, 2, False), _shift(mask, k, -2, False)
        fp1, fm1 = _shift(g, k, 1, 0.0), _shift(g, k, -1, 0.0)
        fp2, fm2 = _shift(g, k, 2, 0.0), _shift(g, k, -2, 0.0)
        central = mask & mp1 & mm1
        fwd2 = mask & ~central & mp1 & mp2
        bwd2 = mask & ~central & ~fwd2 & mm1 & mm2
        fwd1 = mask & ~central & ~fwd2 & ~bwd2 & mp1
        bwd1 = mask & ~central & ~fwd2 & ~bwd2 & ~fwd1 & mm1
        d = np.zeros_like(g)
        d = np.where(central[ex], (fp1 - fm1) / (2 * hk), d)
        d = np.where(fwd2[ex], (3 * (fp1 - g) - (fp2 - fp1)) / (2 * hk), d)
        d = np.where(bwd2[ex], (3 * (g - fm1) - (fm1 - fm2)) / (2 * hk), d)
        d = np.where(fwd1[ex], (fp1 - g) / hk, d)
        d = np.where(bwd1[ex], (g - fm1) / hk, d)
        out[..., k] = d
    out = np.moveaxis(out, list(range(gd)), grid_axes)
    mshape = (1,) * lead + mask.shape + (1,) * (out.ndim - lead - gd)
    return np.where(mask.reshape(mshape), out, 0.0)
