"""Compiled core: coefficient bytecode interpreter and a Dormand-Prince 5(4)
integrator for the linear system

    u'  = -s u + u1 / p
    u1' = (q - z r) u + s u1 - r g

applied column-wise to a 2 x m state, each column with its own z.  Steps end
exactly on every coefficient breakpoint.  Optionally tracks a scaled Pruefer
angle atan2(kappa u, u1) per column (real part) for oscillation counting.
"""

import math

import numpy as np
from numba import njit

# Dormand-Prince tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40

OK, UNDERFLOW, NONFINITE, MAXSTEPS = 0, 1, 2, 3


@njit(cache=True)
def eval_prog(ops, args, consts, start, length, x, stack):
    if length == 1:
        if ops[start] == 0:
            return consts[args[start]]
        return x
    sp = 0
    for i in range(start, start + length):
        op = ops[i]
        if op == 0:
            stack[sp] = consts[args[i]]
            sp += 1
        elif op == 1:
            stack[sp] = x
            sp += 1
        elif op == 2:
            stack[sp - 1] = -stack[sp - 1]
        elif op <= 7:
            b = stack[sp - 1]
            a = stack[sp - 2]
            sp -= 1
            if op == 3:
                r = a + b
            elif op == 4:
                r = a - b
            elif op == 5:
                r = a * b
            elif op == 6:
                r = a / b if b != 0.0 else (np.inf * a if a != 0.0 else np.nan)
            else:
                r = np.power(a, b)
            stack[sp - 1] = r
        else:
            v = stack[sp - 1]
            if op == 8:
                v = np.sin(v)
            elif op == 9:
                v = np.cos(v)
            elif op == 10:
                v = np.exp(v)
            elif op == 11:
                v = np.sqrt(v) if v >= 0.0 else np.nan
            elif op == 12:
                v = np.log(v) if v > 0.0 else (-np.inf if v == 0.0 else np.nan)
            else:
                v = abs(v)
            stack[sp - 1] = v
    return stack[0]


@njit(cache=True)
def eval_table(ops, args, consts, starts, lengths, table, row, seg, xs):
    """Evaluate coefficient ``row`` on segment ``seg`` at many points."""
    stack = np.empty(32)
    out = np.empty(xs.shape[0])
    k = table[row, seg]
    for i in range(xs.shape[0]):
        out[i] = eval_prog(ops, args, consts, starts[k], lengths[k], xs[i], stack)
    return out


@njit(cache=True)
def _coefs(ops, args, consts, starts, lengths, table, seg, x, has_g, stack, out):
    k = table[0, seg]
    out[0] = 1.0 / eval_prog(ops, args, consts, starts[k], lengths[k], x, stack)
    k = table[1, seg]
    out[1] = eval_prog(ops, args, consts, starts[k], lengths[k], x, stack)
    k = table[2, seg]
    out[2] = eval_prog(ops, args, consts, starts[k], lengths[k], x, stack)
    k = table[3, seg]
    out[3] = eval_prog(ops, args, consts, starts[k], lengths[k], x, stack)
    if has_g:
        k = table[4, seg]
        out[4] = eval_prog(ops, args, consts, starts[k], lengths[k], x, stack)
    else:
        out[4] = 0.0


@njit(cache=True)
def _rhs(c, Y, zs, has_g, K):
    pinv, q, r, s, g = c[0], c[1], c[2], c[3], c[4]
    for j in range(Y.shape[1]):
        u = Y[0, j]
        v = Y[1, j]
        K[0, j] = -s * u + pinv * v
        K[1, j] = (q - zs[j] * r) * u + s * v
        if has_g:
            K[1, j] -= r * g


@njit(cache=True)
def _stages(x, h, Y, K1, zs, ops, args, consts, starts, lengths, table, seg, has_g,
            stack, c, K2, K3, K4, K5, K6, K7, Yt, Ynew):
    Yt[:, :] = Y + h * (A21 * K1)
    _coefs(ops, args, consts, starts, lengths, table, seg, x + C2 * h, has_g, stack, c)
    _rhs(c, Yt, zs, has_g, K2)
    Yt[:, :] = Y + h * (A31 * K1 + A32 * K2)
    _coefs(ops, args, consts, starts, lengths, table, seg, x + C3 * h, has_g, stack, c)
    _rhs(c, Yt, zs, has_g, K3)
    Yt[:, :] = Y + h * (A41 * K1 + A42 * K2 + A43 * K3)
    _coefs(ops, args, consts, starts, lengths, table, seg, x + C4 * h, has_g, stack, c)
    _rhs(c, Yt, zs, has_g, K4)
    Yt[:, :] = Y + h * (A51 * K1 + A52 * K2 + A53 * K3 + A54 * K4)
    _coefs(ops, args, consts, starts, lengths, table, seg, x + C5 * h, has_g, stack, c)
    _rhs(c, Yt, zs, has_g, K5)
    Yt[:, :] = Y + h * (A61 * K1 + A62 * K2 + A63 * K3 + A64 * K4 + A65 * K5)
    _coefs(ops, args, consts, starts, lengths, table, seg, x + h, has_g, stack, c)
    _rhs(c, Yt, zs, has_g, K6)
    Ynew[:, :] = Y + h * (B1 * K1 + B3 * K3 + B4 * K4 + B5 * K5 + B6 * K6)
    _rhs(c, Ynew, zs, has_g, K7)


@njit(cache=True)
def _wrap(d):
    while d > math.pi:
        d -= 2 * math.pi
    while d <= -math.pi:
        d += 2 * math.pi
    return d


@njit(cache=True)
def _segment(bps, x, d):
    nseg = bps.shape[0] - 1
    if d > 0:
        seg = np.searchsorted(bps, x, side="right") - 1
    else:
        seg = np.searchsorted(bps, x, side="left") - 1
    if seg < 0:
        seg = 0
    if seg > nseg - 1:
        seg = nseg - 1
    return seg


@njit(cache=True)
def integrate(x0, x1, Y0, zs, kap, group, ngroups, ops, args, consts, starts, lengths, table, bps,
              has_g, rtol, atol, h0, max_steps, store, track, rescale):
    m = Y0.shape[1]
    d = 1.0 if x1 >= x0 else -1.0
    cap = 256 if store else 2
    nodes = np.empty(cap)
    stepseg = np.zeros(cap, dtype=np.int64)
    Ys = np.empty((cap, 2, m), dtype=np.complex128)
    Y = Y0.copy()
    theta = np.zeros(m)
    raw = np.zeros(m)
    logsc = np.zeros(ngroups)
    for j in range(m):
        a = math.atan2(kap[j] * Y[0, j].real, Y[1, j].real)
        raw[j] = a
        t = a
        if t < 0:
            t += math.pi
        if t >= math.pi:
            t -= math.pi
        theta[j] = t
    nodes[0] = x0
    Ys[0] = Y
    n = 1
    stack = np.empty(32)
    c = np.empty(5)
    K1 = np.empty((2, m), dtype=np.complex128)
    K2 = np.empty_like(K1)
    K3 = np.empty_like(K1)
    K4 = np.empty_like(K1)
    K5 = np.empty_like(K1)
    K6 = np.empty_like(K1)
    K7 = np.empty_like(K1)
    Yt = np.empty_like(K1)
    Ynew = np.empty_like(K1)
    gmax = np.zeros(ngroups)
    status = OK
    steps = 0
    x = x0
    total = abs(x1 - x0)
    h = h0 if h0 > 0 else total / 64.0
    if h <= 0:
        h = 1.0
    while (x1 - x) * d > 0 and status == OK:
        seg = _segment(bps, x, d)
        xe = bps[seg + 1] if d > 0 else bps[seg]
        if (xe - x1) * d > 0:
            xe = x1
        _coefs(ops, args, consts, starts, lengths, table, seg, x, has_g, stack, c)
        _rhs(c, Y, zs, has_g, K1)
        while (xe - x) * d > 0:
            rem = abs(xe - x)
            if rem <= 1e-13 * max(1.0, abs(x)):
                x = xe
                break
            last = h >= rem * (1 - 1e-12)
            hh = rem if last else h
            if hh < 1e-14 * max(1.0, abs(x)):
                status = UNDERFLOW
                break
            if steps >= max_steps:
                status = MAXSTEPS
                break
            steps += 1
            _stages(x, d * hh, Y, K1, zs, ops, args, consts, starts, lengths, table, seg, has_g,
                    stack, c, K2, K3, K4, K5, K6, K7, Yt, Ynew)
            err = 0.0
            finite = True
            for i in range(2):
                for j in range(m):
                    e = d * hh * (E1 * K1[i, j] + E3 * K3[i, j] + E4 * K4[i, j] + E5 * K5[i, j]
                                  + E6 * K6[i, j] + E7 * K7[i, j])
                    yn = Ynew[i, j]
                    if not (np.isfinite(yn.real) and np.isfinite(yn.imag)):
                        finite = False
                    sc = atol + rtol * max(abs(Y[i, j]), abs(yn))
                    r = abs(e) / sc
                    if r > err:
                        err = r
            if not finite or not np.isfinite(err):
                h = hh * 0.25
                if h < 1e-14 * max(1.0, abs(x)):
                    status = NONFINITE
                    break
                continue
            turn_ok = True
            if track:
                for j in range(m):
                    a = math.atan2(kap[j] * Ynew[0, j].real, Ynew[1, j].real)
                    if abs(_wrap(a - raw[j])) > 0.75:
                        turn_ok = False
            if err <= 1.0 and turn_ok:
                x = xe if last else x + d * hh
                Y[:, :] = Ynew
                K1[:, :] = K7
                if track:
                    for j in range(m):
                        a = math.atan2(kap[j] * Y[0, j].real, Y[1, j].real)
                        theta[j] += _wrap(a - raw[j])
                        raw[j] = a
                if rescale:
                    gmax[:] = 0.0
                    for j in range(m):
                        v = max(abs(Y[0, j]), abs(Y[1, j]))
                        if v > gmax[group[j]]:
                            gmax[group[j]] = v
                    for g in range(ngroups):
                        if gmax[g] > 1e100 or (0.0 < gmax[g] < 1e-100):
                            for j in range(m):
                                if group[j] == g:
                                    Y[0, j] /= gmax[g]
                                    Y[1, j] /= gmax[g]
                                    K1[0, j] /= gmax[g]
                                    K1[1, j] /= gmax[g]
                            logsc[g] += math.log(gmax[g])
                if store:
                    if n == cap:
                        cap *= 2
                        nn = np.empty(cap)
                        nn[:n] = nodes[:n]
                        nodes = nn
                        ss = np.zeros(cap, dtype=np.int64)
                        ss[:n] = stepseg[:n]
                        stepseg = ss
                        yy = np.empty((cap, 2, m), dtype=np.complex128)
                        yy[:n] = Ys[:n]
                        Ys = yy
                    stepseg[n - 1] = seg
                    nodes[n] = x
                    Ys[n] = Y
                    n += 1
                else:
                    stepseg[0] = seg
                    nodes[1] = x
                    Ys[1] = Y
                    n = 2
                fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
                if not last or fac < 1.0:
                    h = hh * fac
            else:
                fac = 0.5 if not turn_ok else max(0.2, 0.9 * err ** -0.2)
                h = hh * min(fac, 0.9)
    if n == 1:
        nodes[1] = x
        Ys[1] = Y
        stepseg[0] = _segment(bps, x0, d)
        n = 2
    stepseg[n - 1] = stepseg[n - 2]
    return status, nodes[:n].copy(), stepseg[:n].copy(), Ys[:n].copy(), theta, logsc, steps


@njit(cache=True)
def dense(xq, xb, Yb, segq, zs, ops, args, consts, starts, lengths, table, has_g):
    """One Dormand-Prince step of length xq - xb from each base state.

    ``Yb`` has shape (nq, 2, m); returns the propagated states, same shape.
    """
    nq = xq.shape[0]
    m = Yb.shape[2]
    out = np.empty((nq, 2, m), dtype=np.complex128)
    stack = np.empty(32)
    c = np.empty(5)
    K1 = np.empty((2, m), dtype=np.complex128)
    K2 = np.empty_like(K1)
    K3 = np.empty_like(K1)
    K4 = np.empty_like(K1)
    K5 = np.empty_like(K1)
    K6 = np.empty_like(K1)
    K7 = np.empty_like(K1)
    Yt = np.empty_like(K1)
    Ynew = np.empty_like(K1)
    Y = np.empty_like(K1)
    for i in range(nq):
        h = xq[i] - xb[i]
        Y[:, :] = Yb[i]
        if h == 0.0:
            out[i] = Y
            continue
        _coefs(ops, args, consts, starts, lengths, table, segq[i], xb[i], has_g, stack, c)
        _rhs(c, Y, zs, has_g, K1)
        _stages(xb[i], h, Y, K1, zs, ops, args, consts, starts, lengths, table, segq[i], has_g,
                stack, c, K2, K3, K4, K5, K6, K7, Yt, Ynew)
        out[i] = Ynew
    return out
