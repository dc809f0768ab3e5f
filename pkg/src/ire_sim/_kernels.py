"""Hot inner loops, jitted when numba is available.

Determinism rules observed by every kernel here:
  * fixed iteration order (atom index ascending, node index ascending),
  * compensated (Kahan) accumulation for the long scalar sums,
  * no fastmath (no reassociation), float64 throughout.

The pure-numpy fallbacks compute the same quantities with vectorized
expressions; they are for environments without numba and are not
guaranteed bit-identical to the jitted path (different libm vectorization),
only equivalent to roundoff.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency normally
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


# uint64 -> (0,1) double: keep the top 53 bits, offset by half an ulp so the
# result is never exactly 0 (safe under log).
_U53 = 1.1102230246251565e-16  # 2^-53
_U54 = 5.551115123125783e-17  # 2^-54


@njit(cache=True)
def normals_from_raw(raw):
    """Map counter-stream words to standard normals, 8 words -> 6 normals.

    raw: (n, 8) uint64. Words 0..5 feed three fixed Box-Muller pairs per
    atom; words 6..7 are reserved. Returns (n, 6) float64.
    """
    n = raw.shape[0]
    out = np.empty((n, 6), dtype=np.float64)
    for i in range(n):
        for m in range(3):
            u1 = float(raw[i, 2 * m] >> np.uint64(11)) * _U53 + _U54
            u2 = float(raw[i, 2 * m + 1] >> np.uint64(11)) * _U53 + _U54
            r = math.sqrt(-2.0 * math.log(u1))
            a = 2.0 * math.pi * u2
            out[i, 2 * m] = r * math.cos(a)
            out[i, 2 * m + 1] = r * math.sin(a)
    return out


def normals_from_raw_np(raw):
    """Vectorized fallback for normals_from_raw."""
    u = (raw >> np.uint64(11)).astype(np.float64) * _U53 + _U54
    u1 = u[:, 0::2][:, :3]
    u2 = u[:, 1::2][:, :3]
    r = np.sqrt(-2.0 * np.log(u1))
    a = 2.0 * np.pi * u2
    out = np.empty((raw.shape[0], 6), dtype=np.float64)
    out[:, 0::2] = r * np.cos(a)
    out[:, 1::2] = r * np.sin(a)
    return out


@njit(cache=True)
def eta_chunk(
    raw,
    r0,
    sig_v,
    tm,
    st,
    ct,
    k_w,
    k_s,
    k_r,
    k_i,
    z_w,
    z_s,
    z_i,
    ww2,
    ws2,
    wi2,
    c_p,
    amp0,
):
    """Accumulate one atom chunk of the streaming efficiency estimator.

    raw: (n, 8) uint64 counter words for this chunk's atoms. Returns the
    partial sums (Re S1, Im S1, S2, SXX) where S1 = sum A_j R_j P_j,
    S2 = sum |A_j|^2 and SXX = sum |A_j R_j P_j|^2. Each sum is Kahan
    compensated; atoms are visited in index order.
    """
    n = raw.shape[0]
    s1r = 0.0
    e1r = 0.0
    s1i = 0.0
    e1i = 0.0
    s2 = 0.0
    e2 = 0.0
    sxx = 0.0
    exx = 0.0
    for i in range(n):
        u0 = float(raw[i, 0] >> np.uint64(11)) * _U53 + _U54
        u1 = float(raw[i, 1] >> np.uint64(11)) * _U53 + _U54
        u2 = float(raw[i, 2] >> np.uint64(11)) * _U53 + _U54
        u3 = float(raw[i, 3] >> np.uint64(11)) * _U53 + _U54
        u4 = float(raw[i, 4] >> np.uint64(11)) * _U53 + _U54
        u5 = float(raw[i, 5] >> np.uint64(11)) * _U53 + _U54
        ra = math.sqrt(-2.0 * math.log(u0))
        aa = 2.0 * math.pi * u1
        rb = math.sqrt(-2.0 * math.log(u2))
        ab = 2.0 * math.pi * u3
        rc = math.sqrt(-2.0 * math.log(u4))
        ac = 2.0 * math.pi * u5
        x = r0 * (ra * math.cos(aa))
        y = r0 * (ra * math.sin(aa))
        z = r0 * (rb * math.cos(ab))
        vx = sig_v * (rb * math.sin(ab))
        vy = sig_v * (rc * math.cos(ac))
        vz = sig_v * (rc * math.sin(ac))

        # stored amplitude at the initial position: tilted write mode times
        # the conjugate collection (signal) mode on the lab axis
        yt = y * ct - z * st
        zt = y * st + z * ct
        uw = 1.0 + (zt / z_w) ** 2
        rho2t = x * x + yt * yt
        env_w = math.exp(-rho2t / (ww2 * uw)) / math.sqrt(uw)
        ph_w = k_w * zt + k_w * rho2t * zt / (2.0 * (zt * zt + z_w * z_w)) - math.atan(zt / z_w)
        us = 1.0 + (z / z_s) ** 2
        rho2 = x * x + y * y
        env_s = math.exp(-rho2 / (ws2 * us)) / math.sqrt(us)
        ph_s = -(k_s * z + k_s * rho2 * z / (2.0 * (z * z + z_s * z_s)) - math.atan(z / z_s))
        amp_a = amp0 * env_w * env_s
        ph_a = ph_w + ph_s

        # retrieval at the drifted position: plane-wave drive along the
        # tilted -z axis plus the paraxial fiber projection on the lab axis
        xd = x + vx * tm
        yd = y + vy * tm
        zd = z + vz * tm
        ztd = yd * st + zd * ct
        ui = 1.0 + (zd / z_i) ** 2
        rho2d = xd * xd + yd * yd
        env_i = math.exp(-rho2d / (wi2 * ui)) / math.sqrt(ui)
        ph_p = (
            k_i * zd
            + k_i * rho2d * zd / (2.0 * (zd * zd + z_i * z_i))
            - math.atan(zd / z_i)
            - k_r * ztd
        )

        mag = amp_a * env_i * c_p
        ph = ph_a + ph_p
        xr = mag * math.cos(ph)
        xi = mag * math.sin(ph)

        t = s1r + xr
        if abs(s1r) >= abs(xr):
            e1r += (s1r - t) + xr
        else:
            e1r += (xr - t) + s1r
        s1r = t
        t = s1i + xi
        if abs(s1i) >= abs(xi):
            e1i += (s1i - t) + xi
        else:
            e1i += (xi - t) + s1i
        s1i = t
        a2 = amp_a * amp_a
        t = s2 + a2
        if abs(s2) >= a2:
            e2 += (s2 - t) + a2
        else:
            e2 += (a2 - t) + s2
        s2 = t
        m2 = mag * mag
        t = sxx + m2
        if abs(sxx) >= m2:
            exx += (sxx - t) + m2
        else:
            exx += (m2 - t) + sxx
        sxx = t
    return s1r + e1r, s1i + e1i, s2 + e2, sxx + exx


def eta_chunk_np(
    raw,
    r0,
    sig_v,
    tm,
    st,
    ct,
    k_w,
    k_s,
    k_r,
    k_i,
    z_w,
    z_s,
    z_i,
    ww2,
    ws2,
    wi2,
    c_p,
    amp0,
):
    """Vectorized fallback for eta_chunk."""
    g = normals_from_raw_np(raw)
    x = r0 * g[:, 0]
    y = r0 * g[:, 1]
    z = r0 * g[:, 2]
    vx = sig_v * g[:, 3]
    vy = sig_v * g[:, 4]
    vz = sig_v * g[:, 5]
    yt = y * ct - z * st
    zt = y * st + z * ct
    uw = 1.0 + (zt / z_w) ** 2
    rho2t = x * x + yt * yt
    env_w = np.exp(-rho2t / (ww2 * uw)) / np.sqrt(uw)
    ph_w = k_w * zt + k_w * rho2t * zt / (2.0 * (zt * zt + z_w * z_w)) - np.arctan(zt / z_w)
    us = 1.0 + (z / z_s) ** 2
    rho2 = x * x + y * y
    env_s = np.exp(-rho2 / (ws2 * us)) / np.sqrt(us)
    ph_s = -(k_s * z + k_s * rho2 * z / (2.0 * (z * z + z_s * z_s)) - np.arctan(z / z_s))
    amp_a = amp0 * env_w * env_s
    xd = x + vx * tm
    yd = y + vy * tm
    zd = z + vz * tm
    ztd = yd * st + zd * ct
    ui = 1.0 + (zd / z_i) ** 2
    rho2d = xd * xd + yd * yd
    env_i = np.exp(-rho2d / (wi2 * ui)) / np.sqrt(ui)
    ph_p = (
        k_i * zd
        + k_i * rho2d * zd / (2.0 * (zd * zd + z_i * z_i))
        - np.arctan(zd / z_i)
        - k_r * ztd
    )
    mag = amp_a * env_i * c_p
    ph = ph_w + ph_s + ph_p
    s1 = np.sum(mag * np.exp(1j * ph))
    s2 = float(np.sum(amp_a * amp_a))
    sxx = float(np.sum(mag * mag))
    return float(s1.real), float(s1.imag), s2, sxx


@njit(cache=True)
def angular_chunk(a_re, a_im, xd, yd, zd, st, ct, k_r, k_i, nx, ny, nz, out_re, out_im):
    """Accumulate one atom chunk of the sphere-sampled emission pattern.

    a_re/a_im: stored amplitudes A_j for the chunk. xd/yd/zd: drifted
    positions. nx/ny/nz: unit emission directions of the grid nodes.
    Adds sum_j A_j e^{-i k_r (yd sin + zd cos)} e^{-i k_i khat.r'} onto
    out_re/out_im, nodes in index order per atom.
    """
    n = a_re.shape[0]
    m = nx.shape[0]
    for j in range(n):
        ph0 = -k_r * (yd[j] * st + zd[j] * ct)
        c0 = math.cos(ph0)
        s0 = math.sin(ph0)
        br = a_re[j] * c0 - a_im[j] * s0
        bi = a_re[j] * s0 + a_im[j] * c0
        xj = xd[j]
        yj = yd[j]
        zj = zd[j]
        for t in range(m):
            ph = -k_i * (nx[t] * xj + ny[t] * yj + nz[t] * zj)
            c = math.cos(ph)
            s = math.sin(ph)
            out_re[t] += br * c - bi * s
            out_im[t] += br * s + bi * c


def angular_chunk_np(a_re, a_im, xd, yd, zd, st, ct, k_r, k_i, nx, ny, nz, out_re, out_im):
    """Vectorized fallback for angular_chunk (atoms outer, nodes inner)."""
    b = (a_re + 1j * a_im) * np.exp(-1j * k_r * (yd * st + zd * ct))
    for j in range(a_re.shape[0]):
        ph = -k_i * (nx * xd[j] + ny * yd[j] + nz * zd[j])
        contrib = b[j] * np.exp(1j * ph)
        out_re += contrib.real
        out_im += contrib.imag
