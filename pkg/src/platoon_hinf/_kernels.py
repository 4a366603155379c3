"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Set ``PLATOON_HINF_DISABLE_NUMBA=1`` before import to force the numpy path.
Both paths implement the same arithmetic; results agree to rounding.
"""

import os

import numpy as np

_DISABLED = os.environ.get("PLATOON_HINF_DISABLE_NUMBA", "").strip().lower() in (
    "1",
    "true",
    "yes",
    "on",
)

try:
    if _DISABLED:
        raise ImportError("numba disabled by PLATOON_HINF_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# polynomial evaluation on a grid
# ---------------------------------------------------------------------------


def _polyval_numpy(coeffs, x):
    """Horner evaluation, ascending coefficients, vectorized over ``x``."""
    out = np.zeros_like(x, dtype=np.complex128)
    for c in coeffs[::-1]:
        out = out * x + c
    return out


def _closed_loop_peaks_numpy(kn, kd, g_num, l_num, l_den, a, b, ws2, wt2, x):
    """Peaks of ``|W_S S|``, ``|W_T T|`` and ``|T|`` over the grid.

    ``ws2``/``wt2`` are squared weight magnitudes on the grid.
    """
    kn_v = _polyval_numpy(kn, x)
    kd_v = _polyval_numpy(kd, x)
    ldk = l_den * kd_v
    char = ldk + l_num * kn_v
    inv = 1.0 / (char.real**2 + char.imag**2)
    sn = a * ldk
    tnum = g_num * kn_v + b * ldk
    s2 = (sn.real**2 + sn.imag**2) * inv
    t2 = (tnum.real**2 + tnum.imag**2) * inv
    return (
        float(np.sqrt(np.max(ws2 * s2))),
        float(np.sqrt(np.max(wt2 * t2))),
        float(np.sqrt(np.max(t2))),
    )


def _schur_stable_numpy(coeffs, radius):
    """True if every root of ``coeffs`` (ascending) lies in ``|z| < radius``.

    Schur-Cohn reduction on the polynomial scaled to the unit disk.
    """
    c = np.asarray(coeffs, dtype=np.float64) * radius ** np.arange(len(coeffs))
    n = len(c) - 1
    while n > 0:
        if c[n] == 0.0:
            return False
        k = c[0] / c[n]
        if abs(k) >= 1.0:
            return False
        c = (c - k * c[::-1])[1:]
        n -= 1
    return True


def _simulate_numpy(
    phi_mat, gam, kn, kd, ffn, ffd, u_lead, x0, h_loop, offset,
    phi_steps, th_lo, th_frac, cacc, p_out, v_out, a_out, u_out, e_out,
):
    n_steps, n_veh = u_out.shape
    order = kn.shape[0] - 1
    q = ffn.shape[0] - 1
    x = x0.copy()
    ufb = np.zeros((n_steps, n_veh))
    ff = np.zeros((n_steps, n_veh))
    w = np.zeros((n_steps, n_veh))
    for k in range(n_steps):
        p_out[k] = x[:, 0]
        v_out[k] = x[:, 1]
        a_out[k] = x[:, 2]
        if np.any(np.abs(x) > 1e9):
            bad = int(np.argmax(np.any(np.abs(x) > 1e9, axis=1)))
            return k, bad
        u_out[k, 0] = u_lead[k]
        for i in range(1, n_veh):
            e = x[i - 1, 0] - x[i, 0] - offset - h_loop * x[i, 1]
            e_out[k, i] = e
            acc = 0.0
            for j in range(order + 1):
                kk = k - order + j
                if kk >= 0:
                    acc += kn[j] * e_out[kk, i]
            for j in range(order):
                kk = k - order + j
                if kk >= 0:
                    acc -= kd[j] * ufb[kk, i]
            ufb[k, i] = acc
            if cacc:
                lo = k - th_lo
                wv = 0.0
                if lo >= 0:
                    wv += (1.0 - th_frac) * u_out[lo, i - 1]
                if lo - 1 >= 0 and th_frac != 0.0:
                    wv += th_frac * u_out[lo - 1, i - 1]
                w[k, i] = wv
                fv = 0.0
                for j in range(q + 1):
                    kk = k - q + j
                    if kk >= 0:
                        fv += ffn[j] * w[kk, i]
                for j in range(q):
                    kk = k - q + j
                    if kk >= 0:
                        fv -= ffd[j] * ff[kk, i]
                ff[k, i] = fv
            u_out[k, i] = ufb[k, i] + ff[k, i]
        kd_idx = k - phi_steps
        ud = u_out[kd_idx] if kd_idx >= 0 else np.zeros(n_veh)
        x = x @ phi_mat.T + np.outer(ud, gam)
    return -1, -1


if HAVE_NUMBA:

    @njit(cache=True)
    def _polyval_jit(coeffs, x):
        out = np.zeros(x.shape[0], dtype=np.complex128)
        n = coeffs.shape[0]
        for m in range(x.shape[0]):
            acc = 0j
            xm = x[m]
            for j in range(n - 1, -1, -1):
                acc = acc * xm + coeffs[j]
            out[m] = acc
        return out

    @njit(cache=True)
    def _closed_loop_peaks_jit(kn, kd, g_num, l_num, l_den, a, b, ws2, wt2, x):
        gs = 0.0
        gt = 0.0
        tn = 0.0
        nk = kn.shape[0]
        nd = kd.shape[0]
        for m in range(x.shape[0]):
            xr = x[m].real
            xi = x[m].imag
            # Horner in real arithmetic
            pr = 0.0
            pi = 0.0
            for j in range(nk - 1, -1, -1):
                pr, pi = pr * xr - pi * xi + kn[j], pr * xi + pi * xr
            qr = 0.0
            qi = 0.0
            for j in range(nd - 1, -1, -1):
                qr, qi = qr * xr - qi * xi + kd[j], qr * xi + qi * xr
            kn_v = complex(pr, pi)
            ldk = l_den[m] * complex(qr, qi)
            char = ldk + l_num[m] * kn_v
            inv = 1.0 / (char.real * char.real + char.imag * char.imag)
            sn = a[m] * ldk
            tnum = g_num[m] * kn_v + b[m] * ldk
            s2 = (sn.real * sn.real + sn.imag * sn.imag) * inv
            t2 = (tnum.real * tnum.real + tnum.imag * tnum.imag) * inv
            v = ws2[m] * s2
            if v > gs:
                gs = v
            v = wt2[m] * t2
            if v > gt:
                gt = v
            if t2 > tn:
                tn = t2
        return np.sqrt(gs), np.sqrt(gt), np.sqrt(tn)

    @njit(cache=True)
    def _schur_stable_jit(coeffs, radius):
        n = coeffs.shape[0] - 1
        c = np.empty(n + 1)
        w = np.empty(n + 1)
        rk = 1.0
        for j in range(n + 1):
            c[j] = coeffs[j] * rk
            rk *= radius
        while n > 0:
            if c[n] == 0.0:
                return False
            k = c[0] / c[n]
            if abs(k) >= 1.0:
                return False
            for j in range(n + 1):
                w[j] = c[j] - k * c[n - j]
            for j in range(n):
                c[j] = w[j + 1]
            n -= 1
        return True

    @njit(cache=True)
    def _simulate_jit(
        phi_mat, gam, kn, kd, ffn, ffd, u_lead, x0, h_loop, offset,
        phi_steps, th_lo, th_frac, cacc, p_out, v_out, a_out, u_out, e_out,
    ):
        n_steps, n_veh = u_out.shape
        order = kn.shape[0] - 1
        q = ffn.shape[0] - 1
        x = x0.copy()
        xn = np.empty_like(x)
        ufb = np.zeros((n_steps, n_veh))
        ff = np.zeros((n_steps, n_veh))
        w = np.zeros((n_steps, n_veh))
        for k in range(n_steps):
            for i in range(n_veh):
                p_out[k, i] = x[i, 0]
                v_out[k, i] = x[i, 1]
                a_out[k, i] = x[i, 2]
            for i in range(n_veh):
                for c in range(3):
                    if abs(x[i, c]) > 1e9:
                        return k, i
            u_out[k, 0] = u_lead[k]
            for i in range(1, n_veh):
                e = x[i - 1, 0] - x[i, 0] - offset - h_loop * x[i, 1]
                e_out[k, i] = e
                acc = 0.0
                for j in range(order + 1):
                    kk = k - order + j
                    if kk >= 0:
                        acc += kn[j] * e_out[kk, i]
                for j in range(order):
                    kk = k - order + j
                    if kk >= 0:
                        acc -= kd[j] * ufb[kk, i]
                ufb[k, i] = acc
                if cacc:
                    lo = k - th_lo
                    wv = 0.0
                    if lo >= 0:
                        wv += (1.0 - th_frac) * u_out[lo, i - 1]
                    if lo - 1 >= 0 and th_frac != 0.0:
                        wv += th_frac * u_out[lo - 1, i - 1]
                    w[k, i] = wv
                    fv = 0.0
                    for j in range(q + 1):
                        kk = k - q + j
                        if kk >= 0:
                            fv += ffn[j] * w[kk, i]
                    for j in range(q):
                        kk = k - q + j
                        if kk >= 0:
                            fv -= ffd[j] * ff[kk, i]
                    ff[k, i] = fv
                u_out[k, i] = ufb[k, i] + ff[k, i]
            kd_idx = k - phi_steps
            for i in range(n_veh):
                ud = u_out[kd_idx, i] if kd_idx >= 0 else 0.0
                for r in range(3):
                    acc = gam[r] * ud
                    for c in range(3):
                        acc += phi_mat[r, c] * x[i, c]
                    xn[i, r] = acc
            for i in range(n_veh):
                for c in range(3):
                    x[i, c] = xn[i, c]
        return -1, -1

    polyval = _polyval_jit
    closed_loop_peaks = _closed_loop_peaks_jit
    schur_stable = _schur_stable_jit
    _simulate = _simulate_jit
else:
    polyval = _polyval_numpy
    closed_loop_peaks = _closed_loop_peaks_numpy
    schur_stable = _schur_stable_numpy
    _simulate = _simulate_numpy


def simulate_platoon(
    phi_mat, gam, kn, kd, ffn, ffd, u_lead, x0, h_loop, offset,
    phi_steps, th_lo, th_frac, cacc, n_steps,
):
    """Run the platoon time loop; returns output arrays and a divergence marker.

    The marker is ``(k, i)`` for the first step/vehicle whose state exceeded
    1e9 in magnitude, or ``(-1, -1)`` on success.
    """
    n_veh = x0.shape[0]
    outs = [np.full((n_steps, n_veh), np.nan) for _ in range(4)]
    e_out = np.zeros((n_steps, n_veh))
    e_out[:, 0] = np.nan
    outs.append(e_out)
    k_bad, i_bad = _simulate(
        np.ascontiguousarray(phi_mat, dtype=np.float64),
        np.ascontiguousarray(gam, dtype=np.float64),
        np.ascontiguousarray(kn, dtype=np.float64),
        np.ascontiguousarray(kd, dtype=np.float64),
        np.ascontiguousarray(ffn, dtype=np.float64),
        np.ascontiguousarray(ffd, dtype=np.float64),
        np.ascontiguousarray(u_lead, dtype=np.float64),
        np.ascontiguousarray(x0, dtype=np.float64),
        float(h_loop),
        float(offset),
        int(phi_steps),
        int(th_lo),
        float(th_frac),
        bool(cacc),
        *outs,
    )
    return outs, (int(k_bad), int(i_bad))
