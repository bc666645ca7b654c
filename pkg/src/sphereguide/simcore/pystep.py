"""Pure-Python contact stepper.

Fallback implementation of the 1 kHz substep loop.  The arithmetic here
mirrors ``_kernel.pyx`` expression by expression (the compiled module is
built with fp-contraction off), so both engines produce bit-identical
trajectories; ``tests/test_sim.py`` enforces that.  Change both together.

State layout (26 float64):
  [0:3] q robot center, [3:6] p object center, [6:9] qd, [9:12] pd,
  [12:15] w object angular velocity, [15:19] object quaternion (w,x,y,z),
  [19:22] actuator reference position, [22:25] reference velocity, [25] time.

Parameter pack layout (float64):
  [0] dt, [1] kp, [2] kd, [3] robot mass, [4] object mass,
  [5] 1/object moment of inertia, [6] gravity, [7] contact stiffness,
  [8] contact damping, [9] mu, [10] friction velocity gain,
  [11] object radius, [12] robot radius, [13] floor z,
  [14] divergence limit, [15] wall count, [16:] walls as (lo xyz, hi xyz).
"""
from math import sqrt

import numpy as np

COMPILED = False


def run_window(state, coef, pack, n_sub):
    """Advance one action window of ``n_sub`` substeps.

    ``coef`` is the quadratic coefficient of the reference segment: the
    robot tracks  ref0 + refvel0*tau + coef*tau^2  with a PD controller.
    Returns (new_state, diverged).
    """
    dt = float(pack[0]); kp = float(pack[1]); kd = float(pack[2])
    m_r = float(pack[3]); m_o = float(pack[4]); inv_in = float(pack[5])
    grav = float(pack[6]); k_n = float(pack[7]); c_n = float(pack[8])
    mu = float(pack[9]); k_t = float(pack[10])
    r_o = float(pack[11]); r_r = float(pack[12])
    floor_z = float(pack[13]); limit = float(pack[14])
    n_walls = int(pack[15])

    q0 = float(state[0]); q1 = float(state[1]); q2 = float(state[2])
    p0 = float(state[3]); p1 = float(state[4]); p2 = float(state[5])
    qd0 = float(state[6]); qd1 = float(state[7]); qd2 = float(state[8])
    pd0 = float(state[9]); pd1 = float(state[10]); pd2 = float(state[11])
    w0 = float(state[12]); w1 = float(state[13]); w2 = float(state[14])
    ow = float(state[15]); ox = float(state[16]); oy = float(state[17])
    oz = float(state[18])
    rf0 = float(state[19]); rf1 = float(state[20]); rf2 = float(state[21])
    rv0 = float(state[22]); rv1 = float(state[23]); rv2 = float(state[24])
    t = float(state[25])

    a0 = float(coef[0]); a1 = float(coef[1]); a2 = float(coef[2])
    inv_mr = 1.0 / m_r
    inv_mo = 1.0 / m_o

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
                lx = float(pack[base]); ly = float(pack[base + 1]); lz = float(pack[base + 2])
                hx = float(pack[base + 3]); hy = float(pack[base + 4]); hz = float(pack[base + 5])
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
                lx = float(pack[base]); ly = float(pack[base + 1]); lz = float(pack[base + 2])
                hx = float(pack[base + 3]); hy = float(pack[base + 4]); hz = float(pack[base + 5])
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
    out[0] = q0; out[1] = q1; out[2] = q2
    out[3] = p0; out[4] = p1; out[5] = p2
    out[6] = qd0; out[7] = qd1; out[8] = qd2
    out[9] = pd0; out[10] = pd1; out[11] = pd2
    out[12] = w0; out[13] = w1; out[14] = w2
    out[15] = ow; out[16] = ox; out[17] = oy; out[18] = oz
    out[19] = rf0; out[20] = rf1; out[21] = rf2
    out[22] = rv0; out[23] = rv1; out[24] = rv2
    out[25] = t

    diverged = 0
    for k in range(26):
        v = float(out[k])
        if not (-limit < v < limit):
            diverged = 1
            break
    return out, diverged
