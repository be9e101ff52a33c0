"""Compiled coordinate-descent kernels shared by the solvers.

One kernel covers all three penalized problems (multichannel group lasso,
single-channel lasso, row-sparse BCD) because they share the same structure:
singleton groups with scalar soft-thresholding plus size-K groups whose
within-group Gram is proportional to the identity, so every group update has
an exact closed form.  The kernels work in "correlation units": the problem
solved is

    minimize  rss(theta) + 2*tau_a * sum_g |alpha_g| + 2*tau_b * sum_j ||beta_j||_2

and callers scale tau_a/tau_b to encode their loss normalization.

State arrays are updated in place so regularization paths can warm-start:
``z_a[g]`` holds sum_k <psi_g, r_k> and ``z_b[j, k]`` holds <phi_j, r_k> for
the current residual, ``rss`` tracks ||R||_F^2 incrementally.
"""

import numpy as np
from numba import njit

_KAP_FLOOR = 1e-12


@njit(cache=True)
def _pass(
    gram_aa,
    gram_ab,
    gram_ba,
    gram_bb,
    diag_a,
    diag_b,
    kk,
    z_a,
    z_b,
    alpha,
    beta,
    tau_a,
    tau_b,
    active_only,
    rss,
):
    """One cyclic pass over all (or only active) groups.

    Returns (rss, squared l2 change of theta over the pass).
    """
    d1 = alpha.shape[0]
    d2 = beta.shape[0]
    K = beta.shape[1]
    sq_change = 0.0
    zt = np.empty(K)
    delta = np.empty(K)

    for g in range(d1):
        a_old = alpha[g]
        if active_only and a_old == 0.0:
            continue
        kap = kk * diag_a[g]
        if kap <= _KAP_FLOOR:
            continue
        zt_g = z_a[g] + kap * a_old
        mag = abs(zt_g) - tau_a
        a_new = 0.0
        if mag > 0.0:
            a_new = mag / kap if zt_g > 0.0 else -mag / kap
        d = a_new - a_old
        if d != 0.0:
            z_full = zt_g - kap * a_old
            rss += -2.0 * d * z_full + kap * d * d
            alpha[g] = a_new
            for g2 in range(d1):
                z_a[g2] -= d * kk * gram_aa[g, g2]
            for j in range(d2):
                gd = d * gram_ab[g, j]
                for k in range(K):
                    z_b[j, k] -= gd
            sq_change += d * d

    for j in range(d2):
        norm_old_sq = 0.0
        for k in range(K):
            norm_old_sq += beta[j, k] * beta[j, k]
        if active_only and norm_old_sq == 0.0:
            continue
        kap = diag_b[j]
        if kap <= _KAP_FLOOR:
            continue
        zt_norm_sq = 0.0
        for k in range(K):
            zt[k] = z_b[j, k] + kap * beta[j, k]
            zt_norm_sq += zt[k] * zt[k]
        zt_norm = np.sqrt(zt_norm_sq)
        scale = 0.0
        if zt_norm > tau_b:
            scale = (1.0 - tau_b / zt_norm) / kap
        changed = False
        sum_delta = 0.0
        for k in range(K):
            b_new = scale * zt[k]
            delta[k] = b_new - beta[j, k]
            if delta[k] != 0.0:
                changed = True
            sum_delta += delta[k]
        if changed:
            for k in range(K):
                z_full = zt[k] - kap * beta[j, k]
                rss += -2.0 * delta[k] * z_full + kap * delta[k] * delta[k]
                beta[j, k] = scale * zt[k]
                sq_change += delta[k] * delta[k]
            for g2 in range(d1):
                z_a[g2] -= sum_delta * gram_ba[j, g2]
            for j2 in range(d2):
                gj = gram_bb[j, j2]
                if gj != 0.0:
                    for k in range(K):
                        z_b[j2, k] -= delta[k] * gj
    return rss, sq_change


@njit(cache=True)
def _penalty(alpha, beta, tau_a, tau_b):
    pen = 0.0
    for g in range(alpha.shape[0]):
        pen += abs(alpha[g])
    pen *= 2.0 * tau_a
    gpen = 0.0
    for j in range(beta.shape[0]):
        nsq = 0.0
        for k in range(beta.shape[1]):
            nsq += beta[j, k] * beta[j, k]
        gpen += np.sqrt(nsq)
    return pen + 2.0 * tau_b * gpen


@njit(cache=True)
def _theta_norm(alpha, beta):
    nsq = 0.0
    for g in range(alpha.shape[0]):
        nsq += alpha[g] * alpha[g]
    for j in range(beta.shape[0]):
        for k in range(beta.shape[1]):
            nsq += beta[j, k] * beta[j, k]
    return np.sqrt(nsq)


@njit(cache=True)
def cd_fit(
    gram_aa,
    gram_ab,
    gram_ba,
    gram_bb,
    diag_a,
    diag_b,
    kk,
    z_a,
    z_b,
    alpha,
    beta,
    tau_a,
    tau_b,
    rss,
    tol,
    max_sweeps,
    trace,
):
    """Run cyclic group CD with active-set inner sweeps until the relative
    l2 change of theta over a full pass drops below ``tol``.

    Returns (sweeps, converged, rss, n_trace); trace receives the objective
    in kernel units after every pass.
    """
    sweeps = 0
    n_trace = 0
    converged = False
    while sweeps < max_sweeps:
        rss, sqc = _pass(
            gram_aa, gram_ab, gram_ba, gram_bb, diag_a, diag_b, kk,
            z_a, z_b, alpha, beta, tau_a, tau_b, False, rss,
        )
        sweeps += 1
        if n_trace < trace.shape[0]:
            trace[n_trace] = rss + _penalty(alpha, beta, tau_a, tau_b)
            n_trace += 1
        norm = _theta_norm(alpha, beta)
        rel = np.sqrt(sqc) / norm if norm > 0.0 else np.sqrt(sqc)
        if rel < tol:
            converged = True
            break
        while sweeps < max_sweeps:
            rss, sqc = _pass(
                gram_aa, gram_ab, gram_ba, gram_bb, diag_a, diag_b, kk,
                z_a, z_b, alpha, beta, tau_a, tau_b, True, rss,
            )
            sweeps += 1
            if n_trace < trace.shape[0]:
                trace[n_trace] = rss + _penalty(alpha, beta, tau_a, tau_b)
                n_trace += 1
            norm = _theta_norm(alpha, beta)
            rel = np.sqrt(sqc) / norm if norm > 0.0 else np.sqrt(sqc)
            if rel < tol:
                break
    return sweeps, converged, rss, n_trace
