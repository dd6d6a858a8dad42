"""Compiled per-path game simulation.

One numba kernel walks each path start to finish with O(1) memory: inline
xoshiro256++ streams seeded per (master seed, path index), node-wise
extraction dynamics driven by the running maximum, randomized stopping via a
precomputed level in running-max coordinates, and optional martingale
checkpoints.  Paths are independent, results land in path-indexed arrays and
aggregation happens outside, so output is identical for any worker count.

Strict IEEE semantics (no fastmath): results are reproducible bit for bit.
"""
from __future__ import annotations

import numpy as np
from numba import njit, prange

_U64 = np.uint64
_WRAP = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_INV_2_53 = 1.0 / 9007199254740992.0

# controller kinds
CTRL_EQUILIBRIUM = 0
CTRL_BARRIER = 1
# stopper kinds
STOP_EQUILIBRIUM = 0
STOP_THRESHOLD = 1
STOP_NEVER = 2
STOP_IMMEDIATE = 3
# checkpoint value modes
CP_NONE = 0
CP_EQ_VALUE = 1
CP_STATE = 2


@njit(inline="always", cache=True)
def _splitmix64(z):
    z = (z + _GOLDEN) & _WRAP
    z = ((z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)) & _WRAP
    z = ((z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)) & _WRAP
    return z ^ (z >> _U64(31))


@njit(inline="always", cache=True)
def _rotl(x, k):
    return ((x << _U64(k)) | (x >> _U64(64 - k))) & _WRAP


@njit(inline="always", cache=True)
def _seed_state(master_seed, path_index, s):
    base = (_U64(master_seed) + _GOLDEN * (_U64(path_index) + _U64(1))) & _WRAP
    for j in range(4):
        base = _splitmix64((base + _U64(j)) & _WRAP)
        s[j] = base


@njit(inline="always", cache=True)
def _next_u64(s):
    result = (_rotl((s[0] + s[3]) & _WRAP, 23) + s[0]) & _WRAP
    t = (s[1] << _U64(17)) & _WRAP
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@njit(inline="always", cache=True)
def _u01(s):
    return (_next_u64(s) >> _U64(11)) * _INV_2_53


@njit(inline="always", cache=True)
def _psi(x, z1, z2):
    return (np.exp(z2 * x) - np.exp(z1 * x)) / (z2 - z1)


@njit(inline="always", cache=True)
def _psi1(x, z1, z2):
    return (z2 * np.exp(z2 * x) - z1 * np.exp(z1 * x)) / (z2 - z1)


@njit(inline="always", cache=True)
def _b_of(z, z1, z2, psi1B, p_hat, B):
    """Boundary inverse b(z) by bisection on the strictly decreasing psi'."""
    if z <= 0.0:
        return B
    if z >= p_hat:
        return 0.0
    target = psi1B / (1.0 - z)
    lo = 0.0
    hi = B
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        if _psi1(mid, z1, z2) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@njit(inline="always", cache=True)
def _g_inverse(target, tab_G, tab_lam, tab_h, B):
    """Solve x + Lambda0(x) = target on [0, B] from the cumulative table."""
    n = tab_G.shape[0] - 1
    if target >= tab_G[n]:
        return B
    if target <= 0.0:
        return 0.0
    lo = 0
    hi = n
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if tab_G[mid] <= target:
            lo = mid
        else:
            hi = mid
    lam0 = tab_lam[lo]
    lam1 = tab_lam[lo + 1]
    a = (lam1 - lam0) / tab_h
    b = 1.0 + lam0
    c = tab_G[lo] - target
    disc = np.sqrt(max(b * b - 2.0 * a * c, 0.0))
    if abs(a) > 1e-300:
        u = -2.0 * c / (b + disc)
    else:
        u = -c / b
    return lo * tab_h + u


@njit(inline="always", cache=True)
def _gamma_value(xbar, p, z1, z2, psi1B, p_hat, B, s_scale):
    """Cumulative randomization of the equilibrium stopper as a function of
    the running maximum (boundary rescaled by s_scale)."""
    if p <= 0.0:
        return 1.0 if xbar >= B else 0.0
    xs = xbar / s_scale
    if xs >= B:
        c = 0.0
    else:
        c = 1.0 - psi1B / _psi1(xs, z1, z2)
        if c < 0.0:
            c = 0.0
    z = p if c > p else c
    return (p - z) / (p * (1.0 - z))


@njit(cache=True)
def rng_probe(master_seed, path_index, n, out):
    """First two uniforms then n polar normals of a path stream (testing)."""
    s = np.empty(4, dtype=np.uint64)
    _seed_state(master_seed, path_index, s)
    out[0] = _u01(s)
    out[1] = _u01(s)
    have_spare = False
    spare = 0.0
    for i in range(n):
        if have_spare:
            out[2 + i] = spare
            have_spare = False
        else:
            while True:
                u = 2.0 * _u01(s) - 1.0
                v = 2.0 * _u01(s) - 1.0
                q = u * u + v * v
                if 0.0 < q < 1.0:
                    break
            f = np.sqrt(-2.0 * np.log(q) / q)
            out[2 + i] = u * f
            spare = v * f
            have_spare = True


@njit(parallel=True, cache=True)
def run_games(
    master_seed,
    n_paths,
    n_steps,
    dt,
    mu,
    sigma,
    r,
    p,
    x0,
    ckind,
    clevel,
    b_p,
    lam0_bp,
    skind,
    slevel,
    s_scale,
    zeta1,
    zeta2,
    psi1B,
    p_hat,
    B,
    tab_h,
    tab_lam,
    tab_G,
    conditioned,
    cp_mode,
    cp_idx,
    out_j1,
    out_j2,
    out_j1c,
    out_theta,
    out_t0,
    out_tg,
    out_tb,
    out_trunc,
    out_cp,
):
    drift = mu * dt
    vol = sigma * np.sqrt(dt)
    n_cp = cp_idx.shape[0]

    for i in prange(n_paths):
        s = np.empty(4, dtype=np.uint64)
        _seed_state(master_seed, i, s)
        theta = _u01(s) < p
        uu = _u01(s)
        if uu <= 0.0:
            uu = _INV_2_53

        # stopping level in running-max coordinates (equilibrium stopper)
        stop_level = np.inf
        stop_inclusive = False
        if skind == STOP_EQUILIBRIUM:
            if p > 0.0:
                z_u = p * (1.0 - uu) / (1.0 - p * uu)
                stop_level = s_scale * _b_of(z_u, zeta1, zeta2, psi1B, p_hat, B)
            else:
                stop_level = B
                stop_inclusive = True
        elif skind == STOP_THRESHOLD:
            stop_level = slevel
            stop_inclusive = True

        # node 0: initial lump and state
        if ckind == CTRL_EQUILIBRIUM:
            yh = x0 if x0 < b_p else b_p
            lump = x0 - yh
            M = yh
            ybar = b_p
            fbar = b_p
            xbar = M if M < b_p else fbar
            x = yh
            d0 = lump
            d_cur = 0.0  # unused for equilibrium kind
        else:
            yh = x0
            M = x0
            d0 = x0 - clevel if x0 > clevel else 0.0
            d_cur = d0
            x = x0 - d0
            xbar = M if M < clevel else clevel
            ybar = 0.0  # unused for barrier kind
            fbar = 0.0

        j1 = 0.0
        j1c = 0.0
        j2 = 0.0
        t0 = -1.0
        tg = -1.0
        tb = -1.0
        gamma_prev = 0.0
        j1_alive = True
        j2_pending = skind != STOP_NEVER
        cond_alive = conditioned
        frozen = False
        frozen_val = 0.0
        cp_ptr = 0

        if d0 > 0.0:
            j1 += d0
            if cond_alive:
                j1c += d0  # weight 1: randomization starts at 0

        # events at node 0
        if j2_pending and skind == STOP_IMMEDIATE:
            j2 = x if x > 0.0 else 0.0
            tg = 0.0
            j2_pending = False
            if theta:
                j1_alive = False
                if cp_mode != CP_NONE and not frozen:
                    frozen = True
                    frozen_val = _freeze_value(cp_mode, x, xbar, b_p, zeta1, zeta2, 1.0)
        elif j2_pending and (
            (stop_inclusive and xbar >= stop_level) or (not stop_inclusive and xbar > stop_level)
        ):
            j2 = x if x > 0.0 else 0.0
            tg = 0.0
            j2_pending = False
            if theta:
                j1_alive = False
                if cp_mode != CP_NONE and not frozen:
                    frozen = True
                    frozen_val = _freeze_value(cp_mode, x, xbar, b_p, zeta1, zeta2, 1.0)
        if xbar >= B and tb < 0.0:
            tb = 0.0
            if cp_mode != CP_NONE and not frozen:
                frozen = True
                frozen_val = _freeze_value(cp_mode, x, xbar, b_p, zeta1, zeta2, 1.0)
        if x <= 0.0:
            t0 = 0.0
            if j2_pending:
                j2_pending = False
            j1_alive = False
            cond_alive = False
            if cp_mode != CP_NONE and not frozen:
                frozen = True
                frozen_val = 0.0 if cp_mode == CP_EQ_VALUE else (x if x > 0.0 else 0.0)

        # checkpoint at node 0
        while cp_ptr < n_cp and cp_idx[cp_ptr] == 0:
            if frozen:
                out_cp[i, cp_ptr] = frozen_val
            else:
                out_cp[i, cp_ptr] = _freeze_value(cp_mode, x, xbar, b_p, zeta1, zeta2, 1.0)
            cp_ptr += 1

        if cond_alive:
            gamma_prev = _stopper_gamma(
                skind, xbar, p, zeta1, zeta2, psi1B, p_hat, B, s_scale, slevel
            )

        have_spare = False
        spare = 0.0
        k = 0
        while k < n_steps:
            k += 1
            need_more = (
                j1_alive
                or j2_pending
                or cond_alive
                or (cp_mode != CP_NONE and cp_ptr < n_cp and not frozen)
            )
            if not need_more:
                break

            if have_spare:
                z = spare
                have_spare = False
            else:
                while True:
                    u = 2.0 * _u01(s) - 1.0
                    v = 2.0 * _u01(s) - 1.0
                    q = u * u + v * v
                    if 0.0 < q < 1.0:
                        break
                f = np.sqrt(-2.0 * np.log(q) / q)
                z = u * f
                spare = v * f
                have_spare = True

            yh += drift + vol * z
            record = False
            if yh > M:
                M = yh
                record = True
                if ckind == CTRL_EQUILIBRIUM:
                    if M > b_p:
                        fnew = _g_inverse(M + lam0_bp, tab_G, tab_lam, tab_h, B)
                        dd = (M - ybar) - (fnew - fbar)
                        ybar = M
                        fbar = fnew
                        xbar = fnew
                        if dd > 0.0:
                            disc = np.exp(-r * (k * dt))
                            if j1_alive:
                                j1 += disc * dd
                            if cond_alive:
                                j1c += disc * (1.0 - p * gamma_prev) * dd
                    else:
                        xbar = M
                else:
                    if M > clevel:
                        dd = (M - clevel) - d_cur
                        d_cur = M - clevel
                        xbar = clevel
                        if dd > 0.0:
                            disc = np.exp(-r * (k * dt))
                            if j1_alive:
                                j1 += disc * dd
                            if cond_alive:
                                j1c += disc * (1.0 - p * gamma_prev) * dd
                    else:
                        xbar = M

            if ckind == CTRL_EQUILIBRIUM:
                x = yh - ybar + fbar
            else:
                x = yh - d_cur

            if record:
                if j2_pending and (
                    (stop_inclusive and xbar >= stop_level)
                    or (not stop_inclusive and xbar > stop_level)
                ):
                    j2 = (x if x > 0.0 else 0.0) * np.exp(-r * (k * dt))
                    tg = k * dt
                    j2_pending = False
                    if theta:
                        j1_alive = False
                        if cp_mode != CP_NONE and not frozen:
                            frozen = True
                            frozen_val = _freeze_value(
                                cp_mode, x, xbar, b_p, zeta1, zeta2, np.exp(-r * (k * dt))
                            )
                if xbar >= B and tb < 0.0:
                    tb = k * dt
                    if cp_mode != CP_NONE and not frozen:
                        frozen = True
                        frozen_val = _freeze_value(
                            cp_mode, x, xbar, b_p, zeta1, zeta2, np.exp(-r * (k * dt))
                        )
                if cond_alive:
                    gamma_prev = _stopper_gamma(
                        skind, xbar, p, zeta1, zeta2, psi1B, p_hat, B, s_scale, slevel
                    )

            if x <= 0.0:
                t0 = k * dt
                if j2_pending:
                    j2_pending = False  # seizure value is empty at ruin
                j1_alive = False
                cond_alive = False
                if cp_mode != CP_NONE and not frozen:
                    frozen = True
                    frozen_val = 0.0

            while cp_ptr < n_cp and cp_idx[cp_ptr] == k:
                if frozen:
                    out_cp[i, cp_ptr] = frozen_val
                else:
                    out_cp[i, cp_ptr] = _freeze_value(
                        cp_mode, x, xbar, b_p, zeta1, zeta2, np.exp(-r * (k * dt))
                    )
                cp_ptr += 1

        # fill remaining checkpoints after early exit
        while cp_ptr < n_cp:
            out_cp[i, cp_ptr] = frozen_val
            cp_ptr += 1

        out_j1[i] = j1
        out_j2[i] = j2
        out_j1c[i] = j1c
        out_theta[i] = 1.0 if theta else 0.0
        out_t0[i] = t0
        out_tg[i] = tg
        out_tb[i] = tb
        out_trunc[i] = 1 if (j1_alive or j2_pending) else 0


@njit(inline="always", cache=True)
def _stopper_gamma(skind, xbar, p, z1, z2, psi1B, p_hat, B, s_scale, slevel):
    if skind == STOP_EQUILIBRIUM:
        return _gamma_value(xbar, p, z1, z2, psi1B, p_hat, B, s_scale)
    if skind == STOP_THRESHOLD:
        return 1.0 if xbar >= slevel else 0.0
    if skind == STOP_IMMEDIATE:
        return 1.0
    return 0.0


@njit(inline="always", cache=True)
def _freeze_value(cp_mode, x, xbar, b_p, z1, z2, disc):
    """Discounted diagnostic value at the current node."""
    if cp_mode == CP_STATE:
        return disc * (x if x > 0.0 else 0.0)
    m = xbar if xbar > b_p else b_p
    if m <= 0.0 or x <= 0.0:
        return 0.0
    return disc * m * _psi(x, z1, z2) / _psi(m, z1, z2)
