# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled contact stepper.

Mirrors ``pystep.py`` expression by expression; compiled with
fp-contraction disabled so both engines produce bit-identical results.
Change both together.  See pystep.py for the state and pack layouts.
"""
from libc.math cimport sqrt

import numpy as np

COMPILED = True


def run_window(double[::1] state, double[::1] coef, double[::1] pack, int n_sub):
    """Advance one action window of ``n_sub`` substeps; see pystep.run_window."""
    cdef double dt = pack[0], kp = pack[1], kd = pack[2]
    cdef double m_r = pack[3], m_o = pack[4], inv_in = pack[5]
    cdef double grav = pack[6], k_n = pack[7], c_n = pack[8]
    cdef double mu = pack[9], k_t = pack[10]
    cdef double r_o = pack[11], r_r = pack[12]
    cdef double floor_z = pack[13], limit = pack[14]
    cdef int n_walls = <int> pack[15]

    cdef double q0 = state[0], q1 = state[1], q2 = state[2]
    cdef double p0 = state[3], p1 = state[4], p2 = state[5]
    cdef double qd0 = state[6], qd1 = state[7], qd2 = state[8]
    cdef double pd0 = state[9], pd1 = state[10], pd2 = state[11]
    cdef double w0 = state[12], w1 = state[13], w2 = state[14]
    cdef double ow = state[15], ox = state[16], oy = state[17], oz = state[18]
    cdef double rf0 = state[19], rf1 = state[20], rf2 = state[21]
    cdef double rv0 = state[22], rv1 = state[23], rv2 = state[24]
    cdef double t = state[25]

    cdef double a0 = coef[0], a1 = coef[1], a2 = coef[2]
    cdef double inv_mr = 1.0 / m_r
    cdef double inv_mo = 1.0 / m_o

    cdef int i, c, base, k
    cdef double tau, tt, rt0, rt1, rt2, rtv0, rtv1, rtv2
    cdef double fr0, fr1, fr2, fo0, fo1, fo2, to0, to1, to2
    cdef double d, nx, ny, nz, lx, ly, lz, hx, hy, hz
    cdef double ux, uy, uz, dx, dy, dz, l2, ln
    cdef double ax, ay, az, vc0, vc1, vc2, vn, fn
    cdef double vt0, vt1, vt2, vt, ft, reg, fx, fy, fz, sf
    cdef double dow, dox, doy, doz, qn, h, hh, v
    cdef int diverged = 0

    for i in range(n_sub):
        tau = (i + 1) * dt
        tt = tau * tau
        rt0 = rf0 + rv0 * tau + a0 * tt
        rt1 = rf1 + rv1 * tau + a1 * tt
        rt2 = rf2 + rv2 * tau + a2 * tt
        rtv0 = rv0 + (2.0 * a0) * tau
        rtv1 = rv1 + (2.0 * a1) * tau
        rtv2 = rv2 + (2.0 * a2) * tau

        # robot PD force (robot gravity is compensated by the actuator)
        fr0 = kp * (rt0 - q0) + kd * (rtv0 - qd0)
        fr1 = kp * (rt1 - q1) + kd * (rtv1 - qd1)
        fr2 = kp * (rt2 - q2) + kd * (rtv2 - qd2)

        # object force and torque: gravity plus contacts
        fo0 = 0.0; fo1 = 0.0; fo2 = -m_o * grav
        to0 = 0.0; to1 = 0.0; to2 = 0.0

        # --- object vs floor and walls
        for c in range(n_walls + 1):
            if c == 0:
                d = (p2 - floor_z) - r_o
                nx = 0.0; ny = 0.0; nz = 1.0
            else:
                base = 16 + 6 * (c - 1)
                lx = pack[base]; ly = pack[base + 1]; lz = pack[base + 2]
                hx = pack[base + 3]; hy = pack[base + 4]; hz = pack[base + 5]
                ux = p0 if p0 > lx else lx
                if ux > hx: ux = hx
                uy = p1 if p1 > ly else ly
                if uy > hy: uy = hy
                uz = p2 if p2 > lz else lz
                if uz > hz: uz = hz
                dx = p0 - ux; dy = p1 - uy; dz = p2 - uz
                l2 = dx * dx + dy * dy + dz * dz
                if l2 > 0.0:
                    ln = sqrt(l2)
                    d = ln - r_o
                    nx = dx / ln; ny = dy / ln; nz = dz / ln
                else:
                    d = -r_o
                    nx = 0.0; ny = 0.0; nz = 1.0
            if d < 0.0:
                ax = -r_o * nx; ay = -r_o * ny; az = -r_o * nz
                vc0 = pd0 + (w1 * az - w2 * ay)
                vc1 = pd1 + (w2 * ax - w0 * az)
                vc2 = pd2 + (w0 * ay - w1 * ax)
                vn = vc0 * nx + vc1 * ny + vc2 * nz
                fn = -k_n * d - c_n * vn
                if fn > 0.0:
                    vt0 = vc0 - vn * nx
                    vt1 = vc1 - vn * ny
                    vt2 = vc2 - vn * nz
                    vt = sqrt(vt0 * vt0 + vt1 * vt1 + vt2 * vt2)
                    ft = mu * fn
                    reg = k_t * vt
                    if reg < ft: ft = reg
                    fx = fn * nx; fy = fn * ny; fz = fn * nz
                    if vt > 1e-9:
                        sf = ft / vt
                        fx -= sf * vt0; fy -= sf * vt1; fz -= sf * vt2
                    fo0 += fx; fo1 += fy; fo2 += fz
                    to0 += ay * fz - az * fy
                    to1 += az * fx - ax * fz
                    to2 += ax * fy - ay * fx

        # --- robot vs floor and walls (no spin, no torque)
        for c in range(n_walls + 1):
            if c == 0:
                d = (q2 - floor_z) - r_r
                nx = 0.0; ny = 0.0; nz = 1.0
            else:
                base = 16 + 6 * (c - 1)
                lx = pack[base]; ly = pack[base + 1]; lz = pack[base + 2]
                hx = pack[base + 3]; hy = pack[base + 4]; hz = pack[base + 5]
                ux = q0 if q0 > lx else lx
                if ux > hx: ux = hx
                uy = q1 if q1 > ly else ly
                if uy > hy: uy = hy
                uz = q2 if q2 > lz else lz
                if uz > hz: uz = hz
                dx = q0 - ux; dy = q1 - uy; dz = q2 - uz
                l2 = dx * dx + dy * dy + dz * dz
                if l2 > 0.0:
                    ln = sqrt(l2)
                    d = ln - r_r
                    nx = dx / ln; ny = dy / ln; nz = dz / ln
                else:
                    d = -r_r
                    nx = 0.0; ny = 0.0; nz = 1.0
            if d < 0.0:
                vn = qd0 * nx + qd1 * ny + qd2 * nz
                fn = -k_n * d - c_n * vn
                if fn > 0.0:
                    vt0 = qd0 - vn * nx
                    vt1 = qd1 - vn * ny
                    vt2 = qd2 - vn * nz
                    vt = sqrt(vt0 * vt0 + vt1 * vt1 + vt2 * vt2)
                    ft = mu * fn
                    reg = k_t * vt
                    if reg < ft: ft = reg
                    fx = fn * nx; fy = fn * ny; fz = fn * nz
                    if vt > 1e-9:
                        sf = ft / vt
                        fx -= sf * vt0; fy -= sf * vt1; fz -= sf * vt2
                    fr0 += fx; fr1 += fy; fr2 += fz

        # --- object vs robot
        dx = p0 - q0; dy = p1 - q1; dz = p2 - q2
        l2 = dx * dx + dy * dy + dz * dz
        if l2 > 0.0:
            ln = sqrt(l2)
            d = ln - r_o - r_r
            nx = dx / ln; ny = dy / ln; nz = dz / ln
        else:
            d = -(r_o + r_r)
            nx = 0.0; ny = 0.0; nz = 1.0
        if d < 0.0:
            ax = -r_o * nx; ay = -r_o * ny; az = -r_o * nz
            vc0 = (pd0 + (w1 * az - w2 * ay)) - qd0
            vc1 = (pd1 + (w2 * ax - w0 * az)) - qd1
            vc2 = (pd2 + (w0 * ay - w1 * ax)) - qd2
            vn = vc0 * nx + vc1 * ny + vc2 * nz
            fn = -k_n * d - c_n * vn
            if fn > 0.0:
                vt0 = vc0 - vn * nx
                vt1 = vc1 - vn * ny
                vt2 = vc2 - vn * nz
                vt = sqrt(vt0 * vt0 + vt1 * vt1 + vt2 * vt2)
                ft = mu * fn
                reg = k_t * vt
                if reg < ft: ft = reg
                fx = fn * nx; fy = fn * ny; fz = fn * nz
                if vt > 1e-9:
                    sf = ft / vt
                    fx -= sf * vt0; fy -= sf * vt1; fz -= sf * vt2
                fo0 += fx; fo1 += fy; fo2 += fz
                to0 += ay * fz - az * fy
                to1 += az * fx - ax * fz
                to2 += ax * fy - ay * fx
                fr0 -= fx; fr1 -= fy; fr2 -= fz

        # --- semi-implicit Euler
        qd0 += dt * (fr0 * inv_mr); qd1 += dt * (fr1 * inv_mr); qd2 += dt * (fr2 * inv_mr)
        q0 += dt * qd0; q1 += dt * qd1; q2 += dt * qd2
        pd0 += dt * (fo0 * inv_mo); pd1 += dt * (fo1 * inv_mo); pd2 += dt * (fo2 * inv_mo)
        p0 += dt * pd0; p1 += dt * pd1; p2 += dt * pd2
        w0 += dt * (to0 * inv_in); w1 += dt * (to1 * inv_in); w2 += dt * (to2 * inv_in)

        dow = -0.5 * (w0 * ox + w1 * oy + w2 * oz)
        dox = 0.5 * (ow * w0 + (w1 * oz - w2 * oy))
        doy = 0.5 * (ow * w1 + (w2 * ox - w0 * oz))
        doz = 0.5 * (ow * w2 + (w0 * oy - w1 * ox))
        ow += dt * dow; ox += dt * dox; oy += dt * doy; oz += dt * doz
        qn = sqrt(ow * ow + ox * ox + oy * oy + oz * oz)
        ow /= qn; ox /= qn; oy /= qn; oz /= qn

    h = n_sub * dt
    hh = h * h
    rf0 = rf0 + rv0 * h + a0 * hh
    rf1 = rf1 + rv1 * h + a1 * hh
    rf2 = rf2 + rv2 * h + a2 * hh
    rv0 = rv0 + (2.0 * a0) * h
    rv1 = rv1 + (2.0 * a1) * h
    rv2 = rv2 + (2.0 * a2) * h
    t = t + h

    out = np.empty(26)
    cdef double[::1] ov = out
    ov[0] = q0; ov[1] = q1; ov[2] = q2
    ov[3] = p0; ov[4] = p1; ov[5] = p2
    ov[6] = qd0; ov[7] = qd1; ov[8] = qd2
    ov[9] = pd0; ov[10] = pd1; ov[11] = pd2
    ov[12] = w0; ov[13] = w1; ov[14] = w2
    ov[15] = ow; ov[16] = ox; ov[17] = oy; ov[18] = oz
    ov[19] = rf0; ov[20] = rf1; ov[21] = rf2
    ov[22] = rv0; ov[23] = rv1; ov[24] = rv2
    ov[25] = t

    for k in range(26):
        v = ov[k]
        if not (-limit < v < limit):
            diverged = 1
            break
    return out, diverged
