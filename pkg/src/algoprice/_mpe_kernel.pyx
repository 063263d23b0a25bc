# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled enumeration kernel for two-price Markov profiles.

Same contract and algorithm as ``_mpe_kernel_py`` (the documented
reference); only the inner loops are lowered to C.
"""

from libc.stdlib cimport free, malloc


def enumerate_survivors(padj, popp, feas, double beta, double tol,
                        fa_pool, fb_pool):
    cdef double c_padj[4][4]
    cdef double c_popp[4][4]
    cdef int nresp[4]
    cdef int resp[4][4]
    cdef int r, s, i, j, ia, ib, n0, m, start, length, c, nxt, base, r0, rr
    cdef int plen, pidx, found
    cdef double one_m = 1.0 - beta
    cdef double acc_u, acc_v, w, bl, denom, val0, best, v, oval0, ov

    for r in range(4):
        for s in range(4):
            c_padj[r][s] = padj[r][s]
            c_popp[r][s] = popp[r][s]
    for s in range(4):
        nresp[s] = 0
        for r in range(4):
            if feas[r][s]:
                resp[s][nresp[s]] = r
                nresp[s] += 1

    cdef int na = len(fa_pool)
    cdef int nb = len(fb_pool)
    cdef signed char *pa = <signed char *> malloc(na * 4)
    cdef signed char *pb = <signed char *> malloc(nb * 4)
    if pa == NULL or pb == NULL:
        free(pa)
        free(pb)
        raise MemoryError()
    for i in range(na):
        row = fa_pool[i]
        for s in range(4):
            pa[i * 4 + s] = row[s]
    for i in range(nb):
        row = fb_pool[i]
        for s in range(4):
            pb[i * 4 + s] = row[s]

    cdef int succ[8]
    cdef double fu[8]
    cdef double fv[8]
    cdef double vu[8]
    cdef double vv[8]
    cdef unsigned char done[8]
    cdef int path[8]
    cdef signed char fcur[8]
    cdef int ok

    out_a = []
    out_b = []
    try:
        for ia in range(na):
            for s in range(4):
                fcur[s] = pa[ia * 4 + s]
            for ib in range(nb):
                for s in range(4):
                    fcur[4 + s] = pb[ib * 4 + s]
                for s in range(4):
                    r = fcur[s]
                    succ[s] = 4 + r
                    fu[s] = c_padj[r][s]
                    fv[s] = c_popp[r][s]
                    r = fcur[4 + s]
                    succ[4 + s] = r
                    fu[4 + s] = c_padj[r][s]
                    fv[4 + s] = c_popp[r][s]
                for s in range(8):
                    done[s] = 0

                for n0 in range(8):
                    if done[n0]:
                        continue
                    plen = 0
                    m = n0
                    while True:
                        if done[m]:
                            start = -1
                            break
                        found = 0
                        for pidx in range(plen):
                            if path[pidx] == m:
                                found = 1
                                start = pidx
                                break
                        if found:
                            break
                        path[plen] = m
                        plen += 1
                        m = succ[m]
                    if not done[m]:
                        # new cycle path[start:plen], head m == path[start]
                        length = plen - start
                        acc_u = 0.0
                        acc_v = 0.0
                        w = 1.0
                        for j in range(length):
                            c = path[start + j]
                            if j % 2 == 0:
                                acc_u += w * one_m * fu[c]
                                acc_v += w * one_m * fv[c]
                            else:
                                acc_u += w * one_m * fv[c]
                                acc_v += w * one_m * fu[c]
                            w *= beta
                        bl = w
                        if length % 2 == 0:
                            vu[m] = acc_u / (1.0 - bl)
                            vv[m] = acc_v / (1.0 - bl)
                        else:
                            denom = 1.0 - bl * bl
                            vu[m] = (acc_u + bl * acc_v) / denom
                            vv[m] = (acc_v + bl * acc_u) / denom
                        done[m] = 1
                        for j in range(length - 1, 0, -1):
                            c = path[start + j]
                            if j + 1 == length:
                                nxt = path[start]
                            else:
                                nxt = path[start + j + 1]
                            vu[c] = one_m * fu[c] + beta * vv[nxt]
                            vv[c] = one_m * fv[c] + beta * vu[nxt]
                            done[c] = 1
                        plen = start
                    for j in range(plen - 1, -1, -1):
                        c = path[j]
                        nxt = succ[c]
                        vu[c] = one_m * fu[c] + beta * vv[nxt]
                        vv[c] = one_m * fv[c] + beta * vu[nxt]
                        done[c] = 1

                ok = 1
                for i in range(2):
                    base = 4 - 4 * i
                    for s in range(4):
                        r0 = fcur[i * 4 + s]
                        val0 = one_m * c_padj[r0][s] + beta * vv[base + r0]
                        best = val0
                        for j in range(nresp[s]):
                            rr = resp[s][j]
                            v = one_m * c_padj[rr][s] + beta * vv[base + rr]
                            if v > best:
                                best = v
                        if val0 < best - tol:
                            ok = 0
                            break
                        oval0 = one_m * c_popp[r0][s] + beta * vu[base + r0]
                        for j in range(nresp[s]):
                            rr = resp[s][j]
                            v = one_m * c_padj[rr][s] + beta * vv[base + rr]
                            if v >= best - tol:
                                ov = one_m * c_popp[rr][s] + beta * vu[base + rr]
                                if ov > oval0 + tol:
                                    ok = 0
                                    break
                        if not ok:
                            break
                    if not ok:
                        break
                if ok:
                    out_a.append(ia)
                    out_b.append(ib)
    finally:
        free(pa)
        free(pb)
    return out_a, out_b
