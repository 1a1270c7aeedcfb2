"""Numba kernels for the coupled N-asset time loop."""

import numba as nb
import numpy as np


@nb.njit(cache=True)
def portfolio_chunk(
    p,
    pos,
    noise,
    unif,
    bridge_k,
    phi,
    q1,
    shift_coef,
    beta,
    theta,
    sqrt_n,
    r_prev,
    record,
    r_out,
    bin_lo,
    bin_width,
    n_bins,
    pnl,
    pnl_raw,
    flips,
    plus_count,
    pos_r_sum,
    bin_steps,
    bin_rsum,
    bin_plus,
):
    """Advance predictors and positions through one chunk of shocks.

    ``unif`` holds one uniform per asset and step for the Brownian-bridge
    touch test: a barrier at distances d0, d1 from the two end points is hit
    in between with probability exp(-bridge_k d0 d1), bridge_k = 2 / psi^2.
    The up touch uses u < P_up and the down touch u > 1 - P_down. Pass
    ``bridge_k = 0`` to test the end points only.

    Each asset trades against the band evaluated at the previous mean field
    ``r_prev``; R is then recomputed from the new positions. Statistics are
    accumulated only where ``record`` is true (after burn-in).
    """
    n_t, n_a = noise.shape
    for t in range(n_t):
        rsum = 0.0
        for i in range(n_a):
            p_old = p[i]
            p_new = phi[i] * p_old + noise[t, i]
            p[i] = p_new
            centre = shift_coef[i] * r_prev
            hi = q1[i] + centre
            lo = -q1[i] + centre
            old = pos[i]
            up = p_new >= hi
            dn = p_new <= lo
            k2 = bridge_k[i]
            if k2 > 0.0:
                if not up and old < 0.0:
                    e = k2 * (hi - p_old) * (hi - p_new)
                    if e < 50.0 and unif[t, i] < np.exp(-e):
                        up = True
                if not dn and old > 0.0:
                    e = k2 * (p_old - lo) * (p_new - lo)
                    if e < 50.0 and unif[t, i] > 1.0 - np.exp(-e):
                        dn = True
            if up and dn:
                # both touched within the step: the later touch is nearer the end point
                up = p_new >= centre
                dn = not up
            if up:
                pos[i] = 1.0
            elif dn:
                pos[i] = -1.0
            if record[t] and pos[i] != old:
                flips[i] += 1
            rsum += beta[i] * pos[i]
        r = rsum / sqrt_n
        r_out[t] = r
        if record[t]:
            k = int(np.floor((r - bin_lo) / bin_width))
            if k < 0:
                k = 0
            elif k >= n_bins:
                k = n_bins - 1
            bin_steps[k] += 1
            bin_rsum[k] += r
            for i in range(n_a):
                pi = pos[i]
                pnl_raw[i] += p[i] * pi
                pnl[i] += (p[i] - theta[i] * r) * pi
                pos_r_sum[i] += pi * r
                if pi > 0:
                    plus_count[i] += 1
                    bin_plus[i, k] += 1
        r_prev = r
    return r_prev

