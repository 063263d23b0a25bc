"""Pure-Python enumeration kernel for two-price Markov profiles.

This is the readable reference implementation; the compiled kernel in
``_mpe_kernel.pyx`` mirrors it exactly and is differential-tested against
it.  Selected at import time by :mod:`algoprice.two_price` when the
extension is unavailable or explicitly disabled.

States are (adjuster, opponent-algorithm) nodes, ``n = adjuster*4 + s``.
Each joint profile induces one successor per node, so values solve a
deterministic alternating recursion that is evaluated exactly by following
every chain into its cycle and substituting the closed-form geometric sum.
No iteration, no convergence tolerance.
"""


def profile_values(fa, fb, padj, popp, beta):
    """Exact node values for one joint profile.

    Returns ``(vu, vv)`` where ``vu[n]`` is the value of the seller
    adjusting at node ``n`` and ``vv[n]`` the value of the seller whose
    algorithm is currently fixed, satisfying

        vu[n] = (1-beta) * flow_adj[n] + beta * vv[succ[n]]
        vv[n] = (1-beta) * flow_opp[n] + beta * vu[succ[n]]
    """
    succ = [0] * 8
    fu = [0.0] * 8
    fv = [0.0] * 8
    for s in range(4):
        r = fa[s]
        succ[s] = 4 + r
        fu[s] = padj[r][s]
        fv[s] = popp[r][s]
        r = fb[s]
        succ[4 + s] = r
        fu[4 + s] = padj[r][s]
        fv[4 + s] = popp[r][s]

    vu = [None] * 8
    vv = [None] * 8
    one_m = 1.0 - beta
    for n0 in range(8):
        if vu[n0] is not None:
            continue
        path = []
        m = n0
        while vu[m] is None and m not in path:
            path.append(m)
            m = succ[m]
        if vu[m] is None:
            start = path.index(m)
            cyc = path[start:]
            length = len(cyc)
            acc_u = 0.0
            acc_v = 0.0
            w = 1.0
            for j, c in enumerate(cyc):
                if j % 2 == 0:
                    acc_u += w * one_m * fu[c]
                    acc_v += w * one_m * fv[c]
                else:
                    acc_u += w * one_m * fv[c]
                    acc_v += w * one_m * fu[c]
                w *= beta
            bl = w  # beta ** length
            if length % 2 == 0:
                vu[m] = acc_u / (1.0 - bl)
                vv[m] = acc_v / (1.0 - bl)
            else:
                denom = 1.0 - bl * bl
                vu[m] = (acc_u + bl * acc_v) / denom
                vv[m] = (acc_v + bl * acc_u) / denom
            for j in range(length - 1, 0, -1):
                c = cyc[j]
                nxt = cyc[(j + 1) % length]
                vu[c] = one_m * fu[c] + beta * vv[nxt]
                vv[c] = one_m * fv[c] + beta * vu[nxt]
            tail = path[:start]
        else:
            tail = path
        for c in reversed(tail):
            nxt = succ[c]
            vu[c] = one_m * fu[c] + beta * vv[nxt]
            vv[c] = one_m * fv[c] + beta * vu[nxt]
    return vu, vv


def enumerate_survivors(padj, popp, feas, beta, tol, fa_pool, fb_pool):
    """Indices of joint profiles where every node's response is a best reply.

    A profile survives when, at every node, the prescribed response attains
    the maximum adjuster value over the policy-feasible responses and, among
    the responses tied within ``tol``, gives the opponent at least as much
    (indifference resolved in the opponent's favor).
    """
    feas_resp = [[r for r in range(4) if feas[r][s]] for s in range(4)]
    one_m = 1.0 - beta
    out_a = []
    out_b = []
    for ia, fa in enumerate(fa_pool):
        for ib, fb in enumerate(fb_pool):
            vu, vv = profile_values(fa, fb, padj, popp, beta)
            ok = True
            for i in (0, 1):
                f = fa if i == 0 else fb
                base = 4 - 4 * i  # nodes of the opposite parity
                for s in range(4):
                    r0 = f[s]
                    val0 = one_m * padj[r0][s] + beta * vv[base + r0]
                    best = val0
                    for r in feas_resp[s]:
                        v = one_m * padj[r][s] + beta * vv[base + r]
                        if v > best:
                            best = v
                    if val0 < best - tol:
                        ok = False
                        break
                    oval0 = one_m * popp[r0][s] + beta * vu[base + r0]
                    for r in feas_resp[s]:
                        v = one_m * padj[r][s] + beta * vv[base + r]
                        if v >= best - tol:
                            ov = one_m * popp[r][s] + beta * vu[base + r]
                            if ov > oval0 + tol:
                                ok = False
                                break
                    if not ok:
                        break
                if not ok:
                    break
            if ok:
                out_a.append(ia)
                out_b.append(ib)
    return out_a, out_b
