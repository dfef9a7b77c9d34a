"""Compiled solver loops.

The candidate value for extending a fit from (t', u) to (t, v) is evaluated
with one fixed expression tree in every kernel (see ``core.extend_value``),
and candidates are always compared on that fully rounded value.  Comparing
partially accumulated values instead would break tie reproducibility: two
candidates strictly ordered before a final addition can round to equal
afterwards, and the argmin (hence the constraint memory) would then depend on
the summation layout.  Keep the arithmetic in sync across kernels and with
``core.extend_value``.

Constraint modes are encoded as integers: 0 none, 1 isotonic, 2 unimodal,
3 minimum interior angle.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

MODE_NONE = 0
MODE_ISOTONIC = 1
MODE_UNIMODAL = 2
MODE_MINANGLE = 3


@njit(cache=True, nogil=True)
def _column_runs(q, m):
    """Monotone-run boundaries (v_l, v_u) of one value column."""
    nondec = True
    noninc = True
    for i in range(m - 1):
        if q[i + 1] > q[i]:
            noninc = False
        if q[i + 1] < q[i]:
            nondec = False
    if nondec:
        return 0, 0
    if noninc:
        return m - 1, m - 1
    a = 0
    while a < m - 1 and q[a + 1] <= q[a]:
        a += 1
    b = m - 1
    while b > 0 and q[b - 1] <= q[b]:
        b -= 1
    if b < a:
        b = a
    return a, b


@njit(cache=True, nogil=True)
def _nearest_index(states, x, uniform, grid0, step):
    m = states.shape[0]
    if uniform:
        q = (x - grid0) / step
        k = int(math.floor(q))
        if k < 0:
            return 0
        if k >= m - 1:
            return m - 1
        return k if q - k <= 0.5 else k + 1
    j = np.searchsorted(states, x)
    if j == 0:
        return 0
    if j == m:
        return m - 1
    return j - 1 if x - states[j - 1] <= states[j] - x else j


@njit(cache=True, nogil=True)
def dp_full(s1, s2, sp, states, beta, mode, threshold):
    """Plain double-loop recursion, all constraint modes, no pruning."""
    n = s1.shape[0] - 1
    m = states.shape[0]
    inf = np.inf
    Q = np.empty((n + 1, m))
    for v in range(m):
        Q[0, v] = -beta
    cpt = np.full((n, m), -1, dtype=np.int64)
    cpu = np.full((n, m), -1, dtype=np.int64)
    part = np.empty(m)
    best = np.empty(m)
    btp = np.empty(m, dtype=np.int64)
    bui = np.empty(m, dtype=np.int64)
    # unimodal memory: 1 while no strictly decreasing segment has been used
    mem = np.ones((n + 1, m), dtype=np.uint8)
    # minangle memory, translated to an admissible-slope window per cell
    tan_lo = np.full((n + 1, m), -inf)
    tan_hi = np.full((n + 1, m), inf)
    half = 180.0 - threshold
    scanned = np.int64(0)
    for t in range(1, n + 1):
        for v in range(m):
            best[v] = inf
            btp[v] = -1
            bui[v] = -1
        for tp in range(t):
            d = float(t - tp)
            sA = s2[t] - s2[tp]
            sB = s1[t] - s1[tp]
            sC = sp[t] - sp[tp]
            cu2 = d / 3.0 - 0.5 + 1.0 / (6.0 * d)
            cu1 = (2.0 / d) * (sC - t * sB)
            cuv = d / 3.0 - 1.0 / (3.0 * d)
            cv2 = d / 3.0 + 0.5 + 1.0 / (6.0 * d)
            cv1 = (2.0 / d) * (tp * sB - sC)
            for u in range(m):
                su = states[u]
                part[u] = Q[tp, u] + (cu2 * su + cu1) * su
            for v in range(m):
                sv = states[v]
                wv = cuv * sv
                vpart = sA + (cv2 * sv + cv1) * sv
                if mode == MODE_NONE:
                    for u in range(m):
                        val = ((part[u] + wv * states[u]) + vpart) + beta
                        if val < best[v]:
                            best[v] = val
                            btp[v] = tp
                            bui[v] = u
                    scanned += m
                elif mode == MODE_ISOTONIC:
                    for u in range(v + 1):
                        val = ((part[u] + wv * states[u]) + vpart) + beta
                        if val < best[v]:
                            best[v] = val
                            btp[v] = tp
                            bui[v] = u
                    scanned += v + 1
                elif mode == MODE_UNIMODAL:
                    for u in range(m):
                        if mem[tp, u] == 1 or u >= v:
                            val = ((part[u] + wv * states[u]) + vpart) + beta
                            scanned += 1
                            if val < best[v]:
                                best[v] = val
                                btp[v] = tp
                                bui[v] = u
                else:
                    if tp == 0:
                        for u in range(m):
                            val = ((part[u] + wv * states[u]) + vpart) + beta
                            scanned += 1
                            if val < best[v]:
                                best[v] = val
                                btp[v] = tp
                                bui[v] = u
                    else:
                        for u in range(m):
                            diff = sv - states[u]
                            if tan_lo[tp, u] * d <= diff <= tan_hi[tp, u] * d:
                                val = ((part[u] + wv * states[u]) + vpart) + beta
                                scanned += 1
                                if val < best[v]:
                                    best[v] = val
                                    btp[v] = tp
                                    bui[v] = u
        for v in range(m):
            if btp[v] < 0:
                Q[t, v] = inf
                continue
            Q[t, v] = best[v]
            cpt[t - 1, v] = btp[v]
            cpu[t - 1, v] = bui[v]
            if mode == MODE_UNIMODAL:
                if mem[btp[v], bui[v]] == 0 or bui[v] > v:
                    mem[t, v] = 0
                else:
                    mem[t, v] = 1
            elif mode == MODE_MINANGLE:
                slope_in = (states[v] - states[bui[v]]) / (t - btp[v])
                a = math.degrees(math.atan(slope_in))
                lo_a = a - half
                hi_a = a + half
                tan_lo[t, v] = -inf if lo_a <= -90.0 else math.tan(math.radians(lo_a))
                tan_hi[t, v] = inf if hi_a >= 90.0 else math.tan(math.radians(hi_a))
    return Q, cpt, cpu, scanned


@njit(cache=True, nogil=True)
def dp_channel(s1, s2, sp, states, beta, isotonic, uniform, grid0, step):
    """Recursion with the per-column channel interval; none/isotonic modes."""
    n = s1.shape[0] - 1
    m = states.shape[0]
    inf = np.inf
    Q = np.empty((n + 1, m))
    for v in range(m):
        Q[0, v] = -beta
    cpt = np.full((n, m), -1, dtype=np.int64)
    cpu = np.full((n, m), -1, dtype=np.int64)
    part = np.empty(m)
    best = np.empty(m)
    btp = np.empty(m, dtype=np.int64)
    bui = np.empty(m, dtype=np.int64)
    vl = np.zeros(n + 1, dtype=np.int64)
    vu = np.zeros(n + 1, dtype=np.int64)
    scanned = np.int64(0)
    for t in range(1, n + 1):
        for v in range(m):
            best[v] = inf
            btp[v] = -1
            bui[v] = -1
        for tp in range(t):
            d = float(t - tp)
            sA = s2[t] - s2[tp]
            sB = s1[t] - s1[tp]
            sC = sp[t] - sp[tp]
            cu2 = d / 3.0 - 0.5 + 1.0 / (6.0 * d)
            cu1 = (2.0 / d) * (sC - t * sB)
            cuv = d / 3.0 - 1.0 / (3.0 * d)
            cv2 = d / 3.0 + 0.5 + 1.0 / (6.0 * d)
            cv1 = (2.0 / d) * (tp * sB - sC)
            for u in range(m):
                su = states[u]
                part[u] = Q[tp, u] + (cu2 * su + cu1) * su
            # d = 1 segments cost the same for every u up to rounding noise, so
            # no interval is sound in floating point; scan the whole column
            single = t - tp < 2
            w = t * sB - sC  # sum of (t - i) * y_i over the segment
            for v in range(m):
                sv = states[v]
                if single:
                    lo = 0
                    hi = m - 1
                else:
                    vs = 6.0 * w / ((d - 1.0) * (2.0 * d - 1.0)) - sv * (d + 1.0) / (2.0 * d - 1.0)
                    vsi = _nearest_index(states, vs, uniform, grid0, step)
                    lo = min(vl[tp], vsi)
                    hi = max(vu[tp], vsi)
                if isotonic:
                    if lo > v:
                        lo = v
                    if hi > v:
                        hi = v
                wv = cuv * sv
                vpart = sA + (cv2 * sv + cv1) * sv
                for u in range(lo, hi + 1):
                    val = ((part[u] + wv * states[u]) + vpart) + beta
                    if val < best[v]:
                        best[v] = val
                        btp[v] = tp
                        bui[v] = u
                scanned += hi - lo + 1
        for v in range(m):
            Q[t, v] = best[v]
            cpt[t - 1, v] = btp[v]
            cpu[t - 1, v] = bui[v]
        a, b = _column_runs(Q[t], m)
        vl[t] = a
        vu[t] = b
    return Q, cpt, cpu, scanned


@njit(cache=True, nogil=True)
def dp_inequality(s1, s2, sp, states, beta, alpha_p, gamma_p, alpha_m, gamma_m):
    """Recursion with permanent couple removal; unconstrained mode only.

    alive[v, t', u] tracks whether couple (t', u) is still a candidate for
    target state v.  General couples (u != v) are removed by the envelope
    certificate once their unpenalized value exceeds Q_t(v); same-state
    couples are arbitrated so at most one stays alive per target state.
    """
    n = s1.shape[0] - 1
    m = states.shape[0]
    inf = np.inf
    Q = np.empty((n + 1, m))
    for v in range(m):
        Q[0, v] = -beta
    cpt = np.full((n, m), -1, dtype=np.int64)
    cpu = np.full((n, m), -1, dtype=np.int64)
    alive = np.ones((m, n, m), dtype=np.uint8)
    alive_cnt = np.full((m, n), m, dtype=np.int64)
    same_tp = np.zeros(m, dtype=np.int64)
    buf = np.empty((n, m))  # candidate values without the new beta
    coef = np.empty((n, 4))  # per t': sA, cuv, cv2, cv1
    part = np.empty((n, m))
    scanned = np.int64(0)
    for t in range(1, n + 1):
        for tp in range(t):
            d = float(t - tp)
            sA = s2[t] - s2[tp]
            sB = s1[t] - s1[tp]
            sC = sp[t] - sp[tp]
            cu2 = d / 3.0 - 0.5 + 1.0 / (6.0 * d)
            cu1 = (2.0 / d) * (sC - t * sB)
            coef[tp, 0] = sA
            coef[tp, 1] = d / 3.0 - 1.0 / (3.0 * d)
            coef[tp, 2] = d / 3.0 + 0.5 + 1.0 / (6.0 * d)
            coef[tp, 3] = (2.0 / d) * (tp * sB - sC)
            for u in range(m):
                su = states[u]
                part[tp, u] = Q[tp, u] + (cu2 * su + cu1) * su
        for v in range(m):
            sv = states[v]
            best = inf
            bt = -1
            bu = -1
            for tp in range(t):
                if alive_cnt[v, tp] == 0:
                    continue
                wv = coef[tp, 1] * sv
                vpart = coef[tp, 0] + (coef[tp, 2] * sv + coef[tp, 3]) * sv
                for u in range(m):
                    if alive[v, tp, u] == 1:
                        val0 = (part[tp, u] + wv * states[u]) + vpart
                        buf[tp, u] = val0
                        val = val0 + beta
                        if val < best:
                            best = val
                            bt = tp
                            bu = u
                scanned += alive_cnt[v, tp]
            Q[t, v] = best
            cpt[t - 1, v] = bt
            cpu[t - 1, v] = bu
            if t == n:
                continue
            qref = Q[t, v]
            # envelope certificates for beaten couples with u != v
            for tp in range(t):
                if alive_cnt[v, tp] == 0:
                    continue
                dtp = float(t - tp)
                for u in range(m):
                    if u != v and alive[v, tp, u] == 1 and buf[tp, u] > qref:
                        su = states[u]
                        sw = (sp[t] - sp[tp]) - tp * (s1[t] - s1[tp])
                        spart = (su + 2.0 * sv) / 6.0
                        base = tp * spart - (sv - su) / (12.0 * dtp) + sw / dtp
                        if sv > su:
                            a = alpha_p[t] - spart
                            c = base + gamma_p[t]
                            if a * (t + 1) + c >= 0.0 and a * n + c >= 0.0:
                                alive[v, tp, u] = 0
                                alive_cnt[v, tp] -= 1
                        else:
                            a = alpha_m[t] - spart
                            c = base + gamma_m[t]
                            if a * (t + 1) + c <= 0.0 and a * n + c <= 0.0:
                                alive[v, tp, u] = 0
                                alive_cnt[v, tp] -= 1
            # same-state arbitration: exactly one of (old couple, fresh cell) survives
            tps = same_tp[v]
            if buf[tps, v] > qref:
                alive[v, tps, v] = 0
                alive_cnt[v, tps] -= 1
                same_tp[v] = t
            else:
                alive[v, t, v] = 0
                alive_cnt[v, t] -= 1
    return Q, cpt, cpu, scanned, alive


@njit(cache=True, nogil=True)
def dp_fixed_k(s1, s2, sp, states, kmax, mode, threshold):
    """Layered recursion with an exact number of segments, no penalty."""
    n = s1.shape[0] - 1
    m = states.shape[0]
    inf = np.inf
    qprev = np.full((n + 1, m), inf)
    qcur = np.full((n + 1, m), inf)
    for v in range(m):
        qprev[0, v] = 0.0
    cpt = np.full((kmax, n + 1, m), -1, dtype=np.int32)
    cpu = np.full((kmax, n + 1, m), -1, dtype=np.int32)
    mem_prev = np.ones((n + 1, m), dtype=np.uint8)
    mem_cur = np.ones((n + 1, m), dtype=np.uint8)
    tlo_prev = np.full((n + 1, m), -inf)
    thi_prev = np.full((n + 1, m), inf)
    tlo_cur = np.full((n + 1, m), -inf)
    thi_cur = np.full((n + 1, m), inf)
    part = np.empty(m)
    half = 180.0 - threshold
    for k in range(1, kmax + 1):
        for t in range(n + 1):
            for v in range(m):
                qcur[t, v] = inf
        for t in range(k, n + 1):
            for tp in range(k - 1, t):
                finite = False
                for u in range(m):
                    if qprev[tp, u] < inf:
                        finite = True
                        break
                if not finite:
                    continue
                d = float(t - tp)
                sA = s2[t] - s2[tp]
                sB = s1[t] - s1[tp]
                sC = sp[t] - sp[tp]
                cu2 = d / 3.0 - 0.5 + 1.0 / (6.0 * d)
                cu1 = (2.0 / d) * (sC - t * sB)
                cuv = d / 3.0 - 1.0 / (3.0 * d)
                cv2 = d / 3.0 + 0.5 + 1.0 / (6.0 * d)
                cv1 = (2.0 / d) * (tp * sB - sC)
                for u in range(m):
                    su = states[u]
                    part[u] = qprev[tp, u] + (cu2 * su + cu1) * su
                for v in range(m):
                    sv = states[v]
                    wv = cuv * sv
                    vpart = sA + (cv2 * sv + cv1) * sv
                    if mode == MODE_NONE or (mode == MODE_MINANGLE and k == 1):
                        for u in range(m):
                            val = (part[u] + wv * states[u]) + vpart
                            if val < qcur[t, v]:
                                qcur[t, v] = val
                                cpt[k - 1, t, v] = tp
                                cpu[k - 1, t, v] = u
                    elif mode == MODE_ISOTONIC:
                        for u in range(v + 1):
                            val = (part[u] + wv * states[u]) + vpart
                            if val < qcur[t, v]:
                                qcur[t, v] = val
                                cpt[k - 1, t, v] = tp
                                cpu[k - 1, t, v] = u
                    elif mode == MODE_UNIMODAL:
                        for u in range(m):
                            if mem_prev[tp, u] == 1 or u >= v:
                                val = (part[u] + wv * states[u]) + vpart
                                if val < qcur[t, v]:
                                    qcur[t, v] = val
                                    cpt[k - 1, t, v] = tp
                                    cpu[k - 1, t, v] = u
                    else:
                        for u in range(m):
                            diff = sv - states[u]
                            if tlo_prev[tp, u] * d <= diff <= thi_prev[tp, u] * d:
                                val = (part[u] + wv * states[u]) + vpart
                                if val < qcur[t, v]:
                                    qcur[t, v] = val
                                    cpt[k - 1, t, v] = tp
                                    cpu[k - 1, t, v] = u
            for v in range(m):
                tp = cpt[k - 1, t, v]
                if tp < 0:
                    continue
                iu = cpu[k - 1, t, v]
                if mode == MODE_UNIMODAL:
                    if mem_prev[tp, iu] == 0 or iu > v:
                        mem_cur[t, v] = 0
                    else:
                        mem_cur[t, v] = 1
                elif mode == MODE_MINANGLE:
                    slope_in = (states[v] - states[iu]) / (t - tp)
                    a = math.degrees(math.atan(slope_in))
                    lo_a = a - half
                    hi_a = a + half
                    tlo_cur[t, v] = -inf if lo_a <= -90.0 else math.tan(math.radians(lo_a))
                    thi_cur[t, v] = inf if hi_a >= 90.0 else math.tan(math.radians(hi_a))
        qprev, qcur = qcur, qprev
        mem_prev, mem_cur = mem_cur, mem_prev
        tlo_prev, tlo_cur = tlo_cur, tlo_prev
        thi_prev, thi_cur = thi_cur, thi_prev
    return qprev, cpt, cpu


@njit(cache=True, nogil=True)
def enumerate_paths(s1, s2, sp, states, beta, mode, threshold):
    """Exhaustive minimum over all change-point vectors and state assignments.

    Depth-first enumeration with the same value arithmetic as the solver
    kernels; constraints are applied along each enumerated path.  Returns the
    optimal objective, the first optimal path in visit order, and the best
    objective for each exact segment count (meaningful with beta = 0).
    """
    n = s1.shape[0] - 1
    m = states.shape[0]
    inf = np.inf
    st_t = np.zeros(n + 2, dtype=np.int64)
    st_s = np.zeros(n + 2, dtype=np.int64)
    st_mem = np.zeros(n + 2)
    st_acc = np.zeros(n + 2)
    it_t = np.zeros(n + 2, dtype=np.int64)
    it_s = np.zeros(n + 2, dtype=np.int64)
    best = inf
    best_len = 0
    best_t = np.zeros(n + 2, dtype=np.int64)
    best_s = np.zeros(n + 2, dtype=np.int64)
    best_per_k = np.full(n + 1, inf)
    for s0 in range(m):
        depth = 0
        st_t[0] = 0
        st_s[0] = s0
        st_mem[0] = inf
        st_acc[0] = -beta
        it_t[0] = 1
        it_s[0] = 0
        while depth >= 0:
            t2 = it_t[depth]
            if t2 > n:
                depth -= 1
                continue
            s2i = it_s[depth]
            if s2i + 1 < m:
                it_s[depth] = s2i + 1
            else:
                it_s[depth] = 0
                it_t[depth] = t2 + 1
            t = st_t[depth]
            si = st_s[depth]
            su = states[si]
            sv = states[s2i]
            if mode == MODE_ISOTONIC:
                if su > sv:
                    continue
            elif mode == MODE_UNIMODAL:
                if st_mem[depth] == 0.0 and su < sv:
                    continue
            elif mode == MODE_MINANGLE:
                if t > 0:
                    slope2 = (sv - su) / (t2 - t)
                    angle = 180.0 - abs(
                        math.degrees(math.atan(st_mem[depth])) - math.degrees(math.atan(slope2))
                    )
                    if angle < threshold:
                        continue
            d = float(t2 - t)
            sA = s2[t2] - s2[t]
            sB = s1[t2] - s1[t]
            sC = sp[t2] - sp[t]
            cu2 = d / 3.0 - 0.5 + 1.0 / (6.0 * d)
            cu1 = (2.0 / d) * (sC - t2 * sB)
            cuv = d / 3.0 - 1.0 / (3.0 * d)
            cv2 = d / 3.0 + 0.5 + 1.0 / (6.0 * d)
            cv1 = (2.0 / d) * (t * sB - sC)
            acc = (
                (st_acc[depth] + (cu2 * su + cu1) * su)
                + (cuv * sv) * su
                + (sA + (cv2 * sv + cv1) * sv)
            ) + beta
            if t2 == n:
                segs = depth + 1
                if acc < best_per_k[segs]:
                    best_per_k[segs] = acc
                if acc < best:
                    best = acc
                    best_len = depth + 2
                    for i in range(depth + 1):
                        best_t[i] = st_t[i]
                        best_s[i] = st_s[i]
                    best_t[depth + 1] = n
                    best_s[depth + 1] = s2i
                continue
            nm = 0.0
            if mode == MODE_UNIMODAL:
                nm = 0.0 if (st_mem[depth] == 0.0 or su > sv) else 1.0
            elif mode == MODE_MINANGLE:
                nm = (sv - su) / (t2 - t)
            depth += 1
            st_t[depth] = t2
            st_s[depth] = s2i
            st_mem[depth] = nm
            st_acc[depth] = acc
            it_t[depth] = t2 + 1
            it_s[depth] = 0
    return best, best_len, best_t, best_s, best_per_k
