"""Numba kernels for incremental ICL deltas, greedy sweeps and merge loops.

Two engines live here.  The *block* engine covers every model whose data
term is a sum over blocks ``(k, l)`` of a function of the block count and the
number of cell pairs in the block (binary SBM, dc-SBM and both LBMs; a
bipartite matrix is handled as a row->column graph whose blocks are only
active from row clusters to column clusters).  The *mom* engine covers the
mixture of multinomials, whose data term is a sum over clusters.

Scalar parameters travel in a float64 vector ``par``:

    0 kind   (0 Beta-Bernoulli blocks, 1 Gamma-Poisson blocks)
    1 h0     (eta0 | beta)
    2 h1     (zeta0 | log beta)
    3 h2     (lgamma(eta0+zeta0) - lgamma(eta0) - lgamma(zeta0) | unused)
    4 selfp  (diagonal cell pairs counted in diagonal blocks)
    5 bip    (bipartite masking of blocks)
    6 dc     (degree-correction cluster terms)
    7 alpha

Lookup tables hold ``lgamma``/``log`` values at integer offsets; an index
past the end of a table falls back to direct evaluation.
"""

import math

import numpy as np
from numba import njit

NEG_INF = -np.inf

# ---------------------------------------------------------------- tables


@njit(cache=True, nogil=True)
def _tab_lg(t, k, off):
    # lgamma(off + k)
    if k < t.shape[0]:
        return t[k]
    return math.lgamma(off + k)


@njit(cache=True, nogil=True)
def _tab_log(t, k, scale):
    # log(scale * k + 1)
    if k < t.shape[0]:
        return t[k]
    return math.log(scale * k + 1.0)


@njit(cache=True, nogil=True)
def _lgk(lg, k):
    # lgamma(k) for integer k >= 1
    if k < lg.shape[0]:
        return lg[k]
    return math.lgamma(k)


@njit(cache=True, nogil=True)
def _logk(lk, k):
    if k < lk.shape[0]:
        return lk[k]
    return math.log(k)


@njit(cache=True, nogil=True)
def _la(la, n, alpha):
    # lgamma(alpha + n) - lgamma(alpha)
    if n < la.shape[0]:
        return la[n]
    return math.lgamma(alpha + n) - math.lgamma(alpha)


@njit(cache=True, nogil=True)
def _kpart(K, N, alpha):
    if K <= 0:
        return 0.0
    return math.lgamma(alpha * K) - math.lgamma(N + alpha * K)


@njit(cache=True, nogil=True)
def _pz_swap(ng, nh, K, N, alpha, la):
    d = _la(la, ng - 1, alpha) - _la(la, ng, alpha) + _la(la, nh + 1, alpha) - _la(la, nh, alpha)
    if ng == 1:
        d += _kpart(K - 1, N, alpha) - _kpart(K, N, alpha)
    return d


@njit(cache=True, nogil=True)
def _pz_merge(na, nb, K, N, alpha, la):
    return (_la(la, na + nb, alpha) - _la(la, na, alpha) - _la(la, nb, alpha)
            + _kpart(K - 1, N, alpha) - _kpart(K, N, alpha))


@njit(cache=True, nogil=True)
def _lin_merge(na, nb, K, lg, lk):
    # change of the alpha-free intercept when merging two clusters
    return _lgk(lg, na + nb) - _lgk(lg, na) - _lgk(lg, nb) + _logk(lk, K) - _logk(lk, K - 1)


# ---------------------------------------------------------------- block engine


@njit(cache=True, nogil=True)
def _pairs(a, b, na, nb, selfp):
    if a == b and not selfp:
        return na * (na - 1)
    return na * nb


@njit(cache=True, nogil=True)
def _F(a, b, nu, na, nb, side, par, t0, t1, t2):
    """Integrated log-likelihood of block (a, b) with ``nu`` total count."""
    if na <= 0 or nb <= 0:
        return 0.0
    if par[5] > 0.5 and not (side[a] == 0 and side[b] == 1):
        return 0.0
    P = _pairs(a, b, na, nb, par[4] > 0.5)
    if par[0] < 0.5:
        return (par[3] + _tab_lg(t0, nu, par[1]) + _tab_lg(t1, P - nu, par[2])
                - _tab_lg(t2, P, par[1] + par[2]))
    return _tab_lg(t0, nu, 1.0) + nu * par[2] - (nu + 1.0) * _tab_log(t1, P, par[1])


@njit(cache=True, nogil=True)
def _T(n, deg, lg, lk):
    """Degree-correction term of one cluster for one direction."""
    if n <= 0 or deg == 0:
        return 0.0
    return _lgk(lg, n) + deg * _logk(lk, n) - _lgk(lg, n + deg)


@njit(cache=True, nogil=True)
def fill_fold(nu, size, side, par, t0, t1, t2, Fold):
    K = nu.shape[0]
    for a in range(K):
        for b in range(K):
            Fold[a, b] = _F(a, b, nu[a, b], size[a], size[b], side, par, t0, t1, t2)


@njit(cache=True, nogil=True)
def _refresh_fold(c, nu, size, side, par, t0, t1, t2, Fold):
    K = nu.shape[0]
    for l in range(K):
        Fold[c, l] = _F(c, l, nu[c, l], size[c], size[l], side, par, t0, t1, t2)
        Fold[l, c] = _F(l, c, nu[l, c], size[l], size[c], side, par, t0, t1, t2)


@njit(cache=True, nogil=True)
def block_data_term(nu, size, dout, din, side, par, t0, t1, t2, lg, lk):
    K = nu.shape[0]
    tot = 0.0
    for a in range(K):
        for b in range(K):
            tot += _F(a, b, nu[a, b], size[a], size[b], side, par, t0, t1, t2)
    if par[6] > 0.5:
        for a in range(K):
            tot += _T(size[a], dout[a], lg, lk) + _T(size[a], din[a], lg, lk)
    return tot


@njit(cache=True, nogil=True)
def _gather(i, z, optr, oidx, ow, iptr, iidx, iw, o, q):
    o[:] = 0
    q[:] = 0
    for p in range(optr[i], optr[i + 1]):
        o[z[oidx[p]]] += ow[p]
    for p in range(iptr[i], iptr[i + 1]):
        q[z[iidx[p]]] += iw[p]


@njit(cache=True, nogil=True)
def _removal(g, o, q, s, size, side, nu, Fold, par, t0, t1, t2, Rrow, Rcol):
    """Change of blocks (g, l) and (l, g), l != g, when an element leaves g."""
    K = nu.shape[0]
    ng1 = size[g] - 1
    tot = 0.0
    for l in range(K):
        if l == g or size[l] == 0:
            Rrow[l] = 0.0
            Rcol[l] = 0.0
            continue
        nl = size[l]
        Rrow[l] = _F(g, l, nu[g, l] - o[l], ng1, nl, side, par, t0, t1, t2) - Fold[g, l]
        Rcol[l] = _F(l, g, nu[l, g] - q[l], nl, ng1, side, par, t0, t1, t2) - Fold[l, g]
        tot += Rrow[l] + Rcol[l]
    return tot


@njit(cache=True, nogil=True)
def _swap_delta(g, h, o, q, s, deo, dei, size, dout, din, side, ksz, nside,
                nu, Fold, Rrow, Rcol, Rtot, par, t0, t1, t2, lg, lk, la):
    K = nu.shape[0]
    ng = size[g]
    nh = size[h]
    d = Rtot - Rrow[h] - Rcol[h]
    for l in range(K):
        if l == g or l == h or size[l] == 0:
            continue
        nl = size[l]
        d += _F(h, l, nu[h, l] + o[l], nh + 1, nl, side, par, t0, t1, t2) - Fold[h, l]
        d += _F(l, h, nu[l, h] + q[l], nl, nh + 1, side, par, t0, t1, t2) - Fold[l, h]
    d += _F(g, g, nu[g, g] - o[g] - q[g] - s, ng - 1, ng - 1, side, par, t0, t1, t2) - Fold[g, g]
    d += _F(h, h, nu[h, h] + o[h] + q[h] + s, nh + 1, nh + 1, side, par, t0, t1, t2) - Fold[h, h]
    d += _F(g, h, nu[g, h] - o[h] + q[g], ng - 1, nh + 1, side, par, t0, t1, t2) - Fold[g, h]
    d += _F(h, g, nu[h, g] + o[g] - q[h], nh + 1, ng - 1, side, par, t0, t1, t2) - Fold[h, g]
    if par[6] > 0.5:
        d += (_T(ng - 1, dout[g] - deo, lg, lk) - _T(ng, dout[g], lg, lk)
              + _T(nh + 1, dout[h] + deo, lg, lk) - _T(nh, dout[h], lg, lk)
              + _T(ng - 1, din[g] - dei, lg, lk) - _T(ng, din[g], lg, lk)
              + _T(nh + 1, din[h] + dei, lg, lk) - _T(nh, din[h], lg, lk))
    sd = side[g]
    d += _pz_swap(ng, nh, ksz[sd], nside[sd], par[7], la)
    return d


@njit(cache=True, nogil=True)
def _apply_swap(i, g, h, o, q, s, deo, dei, z, size, dout, din, side, ksz,
                nu, Fold, par, t0, t1, t2):
    K = nu.shape[0]
    for l in range(K):
        nu[g, l] -= o[l]
        nu[l, g] -= q[l]
    nu[g, g] -= s
    for l in range(K):
        nu[h, l] += o[l]
        nu[l, h] += q[l]
    nu[h, h] += s
    size[g] -= 1
    size[h] += 1
    dout[g] -= deo
    dout[h] += deo
    din[g] -= dei
    din[h] += dei
    if size[g] == 0:
        ksz[side[g]] -= 1
    z[i] = h
    _refresh_fold(g, nu, size, side, par, t0, t1, t2, Fold)
    _refresh_fold(h, nu, size, side, par, t0, t1, t2, Fold)


@njit(cache=True, nogil=True)
def block_swap_delta(i, h, z, optr, oidx, ow, iptr, iidx, iw, selfw, edeg_out, edeg_in,
                     size, dout, din, side, ksz, nside, nu, Fold, par, t0, t1, t2, lg, lk, la):
    K = nu.shape[0]
    o = np.zeros(K, np.int64)
    q = np.zeros(K, np.int64)
    Rrow = np.zeros(K)
    Rcol = np.zeros(K)
    g = z[i]
    _gather(i, z, optr, oidx, ow, iptr, iidx, iw, o, q)
    s = selfw[i]
    Rtot = _removal(g, o, q, s, size, side, nu, Fold, par, t0, t1, t2, Rrow, Rcol)
    return _swap_delta(g, h, o, q, s, edeg_out[i], edeg_in[i], size, dout, din, side, ksz, nside,
                       nu, Fold, Rrow, Rcol, Rtot, par, t0, t1, t2, lg, lk, la)


@njit(cache=True, nogil=True)
def block_apply_swap(i, h, z, optr, oidx, ow, iptr, iidx, iw, selfw, edeg_out, edeg_in,
                     size, dout, din, side, ksz, nu, Fold, par, t0, t1, t2):
    K = nu.shape[0]
    o = np.zeros(K, np.int64)
    q = np.zeros(K, np.int64)
    g = z[i]
    _gather(i, z, optr, oidx, ow, iptr, iidx, iw, o, q)
    _apply_swap(i, g, h, o, q, selfw[i], edeg_out[i], edeg_in[i], z, size, dout, din, side, ksz,
                nu, Fold, par, t0, t1, t2)


@njit(cache=True, nogil=True)
def block_sweep(order, z, optr, oidx, ow, iptr, iidx, iw, selfw, edeg_out, edeg_in,
                size, dout, din, side, ksz, nside, nu, Fold, allowed, use_mask, eps,
                par, t0, t1, t2, lg, lk, la):
    """One pass of best-improvement single-element moves; returns #moves."""
    K = nu.shape[0]
    o = np.zeros(K, np.int64)
    q = np.zeros(K, np.int64)
    Rrow = np.zeros(K)
    Rcol = np.zeros(K)
    moves = 0
    for t in range(order.shape[0]):
        i = order[t]
        g = z[i]
        has = False
        for h in range(K):
            if h != g and size[h] > 0 and side[h] == side[g] and (not use_mask or allowed[g, h]):
                has = True
                break
        if not has:
            continue
        _gather(i, z, optr, oidx, ow, iptr, iidx, iw, o, q)
        s = selfw[i]
        Rtot = _removal(g, o, q, s, size, side, nu, Fold, par, t0, t1, t2, Rrow, Rcol)
        best = eps
        bh = -1
        for h in range(K):
            if h == g or size[h] == 0 or side[h] != side[g]:
                continue
            if use_mask and not allowed[g, h]:
                continue
            d = _swap_delta(g, h, o, q, s, edeg_out[i], edeg_in[i], size, dout, din, side, ksz,
                            nside, nu, Fold, Rrow, Rcol, Rtot, par, t0, t1, t2, lg, lk, la)
            if d > best:
                best = d
                bh = h
        if bh >= 0:
            _apply_swap(i, g, bh, o, q, s, edeg_out[i], edeg_in[i], z, size, dout, din, side,
                        ksz, nu, Fold, par, t0, t1, t2)
            moves += 1
    return moves


@njit(cache=True, nogil=True)
def _merge_model_delta(a, b, size, dout, din, side, nu, Fold, par, t0, t1, t2, lg, lk):
    K = nu.shape[0]
    na = size[a]
    nb = size[b]
    nu_ = na + nb
    d = 0.0
    for l in range(K):
        if l == a or l == b or size[l] == 0:
            continue
        nl = size[l]
        d += _F(a, l, nu[a, l] + nu[b, l], nu_, nl, side, par, t0, t1, t2) - Fold[a, l] - Fold[b, l]
        d += _F(l, a, nu[l, a] + nu[l, b], nl, nu_, side, par, t0, t1, t2) - Fold[l, a] - Fold[l, b]
    tot = nu[a, a] + nu[a, b] + nu[b, a] + nu[b, b]
    d += _F(a, a, tot, nu_, nu_, side, par, t0, t1, t2) - Fold[a, a] - Fold[a, b] - Fold[b, a] - Fold[b, b]
    if par[6] > 0.5:
        d += (_T(nu_, dout[a] + dout[b], lg, lk) - _T(na, dout[a], lg, lk) - _T(nb, dout[b], lg, lk)
              + _T(nu_, din[a] + din[b], lg, lk) - _T(na, din[a], lg, lk) - _T(nb, din[b], lg, lk))
    return d


@njit(cache=True, nogil=True)
def _contrib(a, b, l, size, side, nu, Fold, par, t0, t1, t2):
    # part of the (a, b) merge delta carried by column/row cluster l
    nab = size[a] + size[b]
    nl = size[l]
    if nl == 0:
        return 0.0
    return (_F(a, l, nu[a, l] + nu[b, l], nab, nl, side, par, t0, t1, t2) - Fold[a, l] - Fold[b, l]
            + _F(l, a, nu[l, a] + nu[l, b], nl, nab, side, par, t0, t1, t2) - Fold[l, a] - Fold[l, b])


@njit(cache=True, nogil=True)
def block_merge_delta(a, b, size, dout, din, side, ksz, nside, nu, Fold, par, t0, t1, t2, lg, lk, la):
    d = _merge_model_delta(a, b, size, dout, din, side, nu, Fold, par, t0, t1, t2, lg, lk)
    s = side[a]
    return d + _pz_merge(size[a], size[b], ksz[s], nside[s], par[7], la)


@njit(cache=True, nogil=True)
def _apply_merge(g, h, size, dout, din, side, ksz, nu, Fold, par, t0, t1, t2):
    K = nu.shape[0]
    for l in range(K):
        nu[g, l] += nu[h, l]
    for l in range(K):
        nu[l, g] += nu[l, h]
    for l in range(K):
        nu[h, l] = 0
        nu[l, h] = 0
    size[g] += size[h]
    size[h] = 0
    dout[g] += dout[h]
    din[g] += din[h]
    dout[h] = 0
    din[h] = 0
    ksz[side[g]] -= 1
    _refresh_fold(g, nu, size, side, par, t0, t1, t2, Fold)
    _refresh_fold(h, nu, size, side, par, t0, t1, t2, Fold)


@njit(cache=True, nogil=True)
def block_apply_merge(g, h, size, dout, din, side, ksz, nu, Fold, par, t0, t1, t2):
    _apply_merge(g, h, size, dout, din, side, ksz, nu, Fold, par, t0, t1, t2)


@njit(cache=True, nogil=True)
def _valid_pair(a, b, size, side, allowed, use_mask):
    if size[a] == 0 or size[b] == 0 or side[a] != side[b]:
        return False
    if use_mask and not allowed[a, b]:
        return False
    return True


@njit(cache=True, nogil=True)
def _prior(mode, a, b, size, side, ksz, nside, alpha, lg, lk, la):
    s = side[a]
    if mode == 0:
        return _pz_merge(size[a], size[b], ksz[s], nside[s], alpha, la)
    return _lin_merge(size[a], size[b], ksz[s], lg, lk)


@njit(cache=True, nogil=True)
def block_merge_loop(mode, size, dout, din, side, ksz, nside, nu, Fold, allowed, use_mask, eps,
                     par, t0, t1, t2, lg, lk, la, out_pairs, out_vals):
    """Repeated steepest merges.

    mode 0: ICL hill climbing, stops when the best delta is <= eps.
    mode 1: intercept agglomeration, merges down to one cluster per side.
    Records (g, h) and (criterion delta, data-term delta) for every merge.
    """
    K = nu.shape[0]
    M = np.zeros((K, K))
    for a in range(K):
        for b in range(a + 1, K):
            if _valid_pair(a, b, size, side, allowed, use_mask):
                M[a, b] = _merge_model_delta(a, b, size, dout, din, side, nu, Fold, par, t0, t1, t2, lg, lk)
    nm = 0
    while True:
        best = NEG_INF
        g = -1
        h = -1
        for a in range(K):
            if size[a] == 0:
                continue
            for b in range(a + 1, K):
                if not _valid_pair(a, b, size, side, allowed, use_mask):
                    continue
                v = M[a, b] + _prior(mode, a, b, size, side, ksz, nside, par[7], lg, lk, la)
                if v > best:
                    best = v
                    g = a
                    h = b
        if g < 0:
            break
        if mode == 0 and best <= eps:
            break
        out_pairs[nm, 0] = g
        out_pairs[nm, 1] = h
        out_vals[nm, 0] = best
        out_vals[nm, 1] = M[g, h]
        nm += 1
        for a in range(K):
            if a == g or a == h or size[a] == 0:
                continue
            for b in range(a + 1, K):
                if b == g or b == h or not _valid_pair(a, b, size, side, allowed, use_mask):
                    continue
                M[a, b] -= (_contrib(a, b, g, size, side, nu, Fold, par, t0, t1, t2)
                            + _contrib(a, b, h, size, side, nu, Fold, par, t0, t1, t2))
        _apply_merge(g, h, size, dout, din, side, ksz, nu, Fold, par, t0, t1, t2)
        if use_mask:
            for l in range(K):
                allowed[g, l] = allowed[g, l] or allowed[h, l]
                allowed[l, g] = allowed[l, g] or allowed[l, h]
                allowed[h, l] = False
                allowed[l, h] = False
        for a in range(K):
            if a == g or size[a] == 0:
                continue
            for b in range(a + 1, K):
                if b == g or not _valid_pair(a, b, size, side, allowed, use_mask):
                    continue
                M[a, b] += _contrib(a, b, g, size, side, nu, Fold, par, t0, t1, t2)
        for l in range(K):
            if l == g:
                continue
            a = min(g, l)
            b = max(g, l)
            if _valid_pair(a, b, size, side, allowed, use_mask):
                M[a, b] = _merge_model_delta(a, b, size, dout, din, side, nu, Fold, par, t0, t1, t2, lg, lk)
    return nm


@njit(cache=True, nogil=True)
def block_merge_matrix(size, dout, din, side, nu, Fold, par, t0, t1, t2, lg, lk):
    """Data-term merge deltas for all same-side pairs (upper triangle)."""
    K = nu.shape[0]
    M = np.full((K, K), np.nan)
    for a in range(K):
        for b in range(a + 1, K):
            if size[a] > 0 and size[b] > 0 and side[a] == side[b]:
                M[a, b] = _merge_model_delta(a, b, size, dout, din, side, nu, Fold, par, t0, t1, t2, lg, lk)
    return M


# ---------------------------------------------------------------- mom engine


@njit(cache=True, nogil=True)
def _tb(tb, k, beta, lgb):
    # lgamma(beta + k) - lgamma(beta)
    if k < tb.shape[0]:
        return tb[k]
    return math.lgamma(beta + k) - lgb


@njit(cache=True, nogil=True)
def _mom_add(ptr, idx, w, ci, i, orow, c, sign, tb, td, beta, bd, lgb, lgbd):
    # change of one cluster's term when element i is added (sign=1) or removed (sign=-1)
    d = 0.0
    for p in range(ptr[i], ptr[i + 1]):
        j = idx[p]
        d += _tb(tb, orow[j] + sign * w[p], beta, lgb) - _tb(tb, orow[j], beta, lgb)
    d -= _tb(td, c + sign * ci, bd, lgbd) - _tb(td, c, bd, lgbd)
    return d


@njit(cache=True, nogil=True)
def mom_swap_delta(i, h, z, ptr, idx, w, crow, size, o, c, ksz, N, par, tb, td, la):
    beta = par[1]
    bd = par[2]
    lgb = par[3]
    lgbd = par[4]
    alpha = par[7]
    g = z[i]
    d = _mom_add(ptr, idx, w, crow[i], i, o[g], c[g], -1, tb, td, beta, bd, lgb, lgbd)
    d += _mom_add(ptr, idx, w, crow[i], i, o[h], c[h], 1, tb, td, beta, bd, lgb, lgbd)
    return d + _pz_swap(size[g], size[h], ksz[0], N, alpha, la)


@njit(cache=True, nogil=True)
def _mom_apply(i, g, h, z, ptr, idx, w, crow, size, o, c, ksz):
    for p in range(ptr[i], ptr[i + 1]):
        o[g, idx[p]] -= w[p]
        o[h, idx[p]] += w[p]
    c[g] -= crow[i]
    c[h] += crow[i]
    size[g] -= 1
    size[h] += 1
    if size[g] == 0:
        ksz[0] -= 1
    z[i] = h


@njit(cache=True, nogil=True)
def mom_apply_swap(i, h, z, ptr, idx, w, crow, size, o, c, ksz):
    _mom_apply(i, z[i], h, z, ptr, idx, w, crow, size, o, c, ksz)


@njit(cache=True, nogil=True)
def mom_sweep(order, z, ptr, idx, w, crow, size, o, c, ksz, N, allowed, use_mask, eps,
              par, tb, td, la):
    K = o.shape[0]
    beta = par[1]
    bd = par[2]
    lgb = par[3]
    lgbd = par[4]
    alpha = par[7]
    moves = 0
    for t in range(order.shape[0]):
        i = order[t]
        g = z[i]
        rem = _mom_add(ptr, idx, w, crow[i], i, o[g], c[g], -1, tb, td, beta, bd, lgb, lgbd)
        best = eps
        bh = -1
        for h in range(K):
            if h == g or size[h] == 0:
                continue
            if use_mask and not allowed[g, h]:
                continue
            d = rem + _mom_add(ptr, idx, w, crow[i], i, o[h], c[h], 1, tb, td, beta, bd, lgb, lgbd)
            d += _pz_swap(size[g], size[h], ksz[0], N, alpha, la)
            if d > best:
                best = d
                bh = h
        if bh >= 0:
            _mom_apply(i, g, bh, z, ptr, idx, w, crow, size, o, c, ksz)
            moves += 1
    return moves


@njit(cache=True, nogil=True)
def _mom_merge_model(a, b, o, c, par, tb, td):
    beta = par[1]
    bd = par[2]
    lgb = par[3]
    lgbd = par[4]
    d = 0.0
    for j in range(o.shape[1]):
        oa = o[a, j]
        ob = o[b, j]
        if oa == 0 or ob == 0:
            continue
        d += _tb(tb, oa + ob, beta, lgb) - _tb(tb, oa, beta, lgb) - _tb(tb, ob, beta, lgb)
    d -= _tb(td, c[a] + c[b], bd, lgbd) - _tb(td, c[a], bd, lgbd) - _tb(td, c[b], bd, lgbd)
    return d


@njit(cache=True, nogil=True)
def mom_merge_delta(a, b, size, o, c, ksz, N, par, tb, td, la):
    return _mom_merge_model(a, b, o, c, par, tb, td) + _pz_merge(size[a], size[b], ksz[0], N, par[7], la)


@njit(cache=True, nogil=True)
def mom_apply_merge(g, h, size, o, c, ksz):
    for j in range(o.shape[1]):
        o[g, j] += o[h, j]
        o[h, j] = 0
    c[g] += c[h]
    c[h] = 0
    size[g] += size[h]
    size[h] = 0
    ksz[0] -= 1


@njit(cache=True, nogil=True)
def mom_merge_matrix(size, o, c, par, tb, td):
    K = o.shape[0]
    M = np.full((K, K), np.nan)
    for a in range(K):
        for b in range(a + 1, K):
            if size[a] > 0 and size[b] > 0:
                M[a, b] = _mom_merge_model(a, b, o, c, par, tb, td)
    return M


@njit(cache=True, nogil=True)
def mom_merge_loop(mode, size, o, c, ksz, N, allowed, use_mask, eps, par, tb, td, lg, lk, la,
                   out_pairs, out_vals):
    K = o.shape[0]
    side = np.zeros(K, np.int8)
    nside = np.array([N, 0], np.int64)
    M = np.zeros((K, K))
    for a in range(K):
        for b in range(a + 1, K):
            if _valid_pair(a, b, size, side, allowed, use_mask):
                M[a, b] = _mom_merge_model(a, b, o, c, par, tb, td)
    nm = 0
    while True:
        best = NEG_INF
        g = -1
        h = -1
        for a in range(K):
            if size[a] == 0:
                continue
            for b in range(a + 1, K):
                if not _valid_pair(a, b, size, side, allowed, use_mask):
                    continue
                v = M[a, b] + _prior(mode, a, b, size, side, ksz, nside, par[7], lg, lk, la)
                if v > best:
                    best = v
                    g = a
                    h = b
        if g < 0:
            break
        if mode == 0 and best <= eps:
            break
        out_pairs[nm, 0] = g
        out_pairs[nm, 1] = h
        out_vals[nm, 0] = best
        out_vals[nm, 1] = M[g, h]
        nm += 1
        mom_apply_merge(g, h, size, o, c, ksz)
        if use_mask:
            for l in range(K):
                allowed[g, l] = allowed[g, l] or allowed[h, l]
                allowed[l, g] = allowed[l, g] or allowed[l, h]
                allowed[h, l] = False
                allowed[l, h] = False
        for l in range(K):
            if l == g:
                continue
            a = min(g, l)
            b = max(g, l)
            if _valid_pair(a, b, size, side, allowed, use_mask):
                M[a, b] = _mom_merge_model(a, b, o, c, par, tb, td)
    return nm
