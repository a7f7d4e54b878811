"""Array kernels behind LiveState and the compiled sampling loop.

Everything here works on 0-based variable indices. Variable states use the
codes from `formula` (0, 1, STAR=2, UNTOUCHED=3), so `state >= STAR` means
"free". Negative return codes signal outcomes other than a bit.
"""

from __future__ import annotations

from collections import namedtuple

import numpy as np
from numba import njit

ZERO, ONE, STAR, UNT = 0, 1, 2, 3

# return codes
HALT_RECURSING = -1
HALT_SAMPLING = -2
LOCAL_UNIFORMITY = -3
TOO_LARGE = -4
UNSAT = -5
BUDGET = -6
STEP_BUDGET = -7
DEPTH_EXCEEDED = -8
CONTAINMENT = -9
NON_SOLUTION = -10

# scal slots
SC_DEFICIT, SC_NSTAR, SC_TLEN, SC_EPOCH, SC_EPOCH2, SC_CONEPOCH, SC_CONSIZE = 0, 1, 2, 3, 4, 5, 6

# stats slots
ST_TAU, ST_FRAMES, ST_MAXDEPTH, ST_MAXCON, ST_LEAVES, ST_ATTEMPTS = 0, 1, 2, 3, 4, 5
ST_HALT_CON, ST_HALT_DEPTH, ST_OVERFLOWS, ST_NEXTVAR = 6, 7, 8, 9
N_STATS = 12

FArr = namedtuple(
    "FArr", ["n", "m", "cptr", "cvar", "cpos", "cneg", "vptr", "vcl", "vslot", "sepv", "sepc", "need"]
)
SArr = namedtuple(
    "SArr",
    [
        "sigma", "sat", "live", "star", "frozen", "defic", "uncov",
        "cover", "ucon", "starpos", "starlist", "tvar", "tprev", "scal",
        "cvis", "vvis", "queue", "conlist", "cvis2", "vvis2", "loc", "compv", "compc",
        "fw", "fmark", "fdepth",
    ],
)


def formula_arrays(f) -> dict:
    """CSR incidence arrays for a Formula (separator-independent part)."""
    n, m = f.n, f.m
    cptr = np.zeros(m + 1, dtype=np.int64)
    cvar, cpos, cneg = [], [], []
    for i, c in enumerate(f.clauses):
        signs: dict[int, list[int]] = {}
        for lit in c.literals:
            s = signs.setdefault(lit.variable_index - 1, [0, 0])
            s[1 if lit.negated else 0] = 1
        for v in sorted(signs):
            cvar.append(v)
            cpos.append(signs[v][0])
            cneg.append(signs[v][1])
        cptr[i + 1] = len(cvar)
    cvar_a = np.asarray(cvar, dtype=np.int32)
    deg = np.bincount(cvar_a, minlength=n) if m else np.zeros(n, dtype=np.int64)
    vptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(deg, out=vptr[1:])
    vcl = np.empty(len(cvar), dtype=np.int32)
    vslot = np.empty(len(cvar), dtype=np.int64)
    fill = vptr[:-1].copy()
    for i in range(m):
        for j in range(cptr[i], cptr[i + 1]):
            v = cvar[j]
            vcl[fill[v]] = i
            vslot[fill[v]] = j
            fill[v] += 1
    return dict(
        n=n, m=m, cptr=cptr, cvar=cvar_a,
        cpos=np.asarray(cpos, dtype=np.uint8), cneg=np.asarray(cneg, dtype=np.uint8),
        vptr=vptr, vcl=vcl, vslot=vslot,
    )


def bind(f, v_sep=(), c_sep=(), need: int = 0) -> FArr:
    base = f.arrays
    sepv = np.zeros(f.n, dtype=np.uint8)
    for v in v_sep:
        sepv[v - 1] = 1
    sepc = np.zeros(f.m, dtype=np.uint8)
    for c in c_sep:
        sepc[c] = 1
    return FArr(sepv=sepv, sepc=sepc, need=np.int64(need), **base)


def new_state(n: int, m: int) -> SArr:
    i32, i64 = np.int32, np.int64
    return SArr(
        sigma=np.full(n, UNT, dtype=np.int8),
        sat=np.zeros(m, i32), live=np.zeros(m, i32), star=np.zeros(m, i32),
        frozen=np.zeros(m, np.uint8), defic=np.zeros(m, np.uint8), uncov=np.zeros(m, i32),
        cover=np.zeros(n, i32), ucon=np.zeros(n, np.uint8),
        starpos=np.full(n, -1, i32), starlist=np.zeros(n, i32),
        tvar=np.zeros(2 * n + 2, i32), tprev=np.zeros(2 * n + 2, np.int8),
        scal=np.zeros(8, i64),
        cvis=np.zeros(m, i64), vvis=np.zeros(n, i64), queue=np.zeros(n, i32),
        conlist=np.zeros(m, i32), cvis2=np.zeros(m, i64), vvis2=np.zeros(n, i64),
        loc=np.full(n, -1, i32), compv=np.zeros(n, i32), compc=np.zeros(m, i32),
        fw=np.zeros(n + 1, i64), fmark=np.zeros(n + 1, i64), fdepth=np.zeros(n + 1, i64),
    )


# ------------------------------------------------------------- counters


@njit(cache=True)
def _refresh_var(F, S, y):
    u = 1 if (S.sigma[y] == UNT and F.sepv[y] == 0 and S.cover[y] == 0) else 0
    if u != S.ucon[y]:
        d = 1 if u == 1 else -1
        S.ucon[y] = u
        for p in range(F.vptr[y], F.vptr[y + 1]):
            S.uncov[F.vcl[p]] += d


@njit(cache=True)
def _refresh_clause(F, S, c):
    open_ = S.sat[c] == 0 and F.sepc[c] == 0
    fz = 1 if (open_ and S.live[c] <= F.need) else 0
    df = 1 if (open_ and S.live[c] < F.need) else 0
    if df != S.defic[c]:
        S.scal[SC_DEFICIT] += df - S.defic[c]
        S.defic[c] = df
    if fz != S.frozen[c]:
        d = 1 if fz == 1 else -1
        S.frozen[c] = fz
        for j in range(F.cptr[c], F.cptr[c + 1]):
            y = F.cvar[j]
            S.cover[y] += d
            _refresh_var(F, S, y)


@njit(cache=True)
def _set(F, S, x, new):
    old = S.sigma[x]
    if old == new:
        return
    S.sigma[x] = new
    if old == STAR:
        # swap-remove from the star list
        p = S.starpos[x]
        last = S.scal[SC_NSTAR] - 1
        z = S.starlist[last]
        S.starlist[p] = z
        S.starpos[z] = p
        S.starpos[x] = -1
        S.scal[SC_NSTAR] = last
    if new == STAR:
        S.starpos[x] = S.scal[SC_NSTAR]
        S.starlist[S.scal[SC_NSTAR]] = x
        S.scal[SC_NSTAR] += 1
    dlive = 0
    if F.sepv[x] == 0:
        dlive = (1 if new >= STAR else 0) - (1 if old >= STAR else 0)
    dstar = (1 if new == STAR else 0) - (1 if old == STAR else 0)
    for p in range(F.vptr[x], F.vptr[x + 1]):
        c = F.vcl[p]
        j = F.vslot[p]
        so = 1 if ((old == ONE and F.cpos[j] == 1) or (old == ZERO and F.cneg[j] == 1)) else 0
        sn = 1 if ((new == ONE and F.cpos[j] == 1) or (new == ZERO and F.cneg[j] == 1)) else 0
        S.sat[c] += sn - so
        S.live[c] += dlive
        S.star[c] += dstar
        _refresh_clause(F, S, c)
    _refresh_var(F, S, x)


@njit(cache=True)
def init_state(F, S):
    S.sigma[:] = UNT
    S.sat[:] = 0
    S.star[:] = 0
    S.frozen[:] = 0
    S.defic[:] = 0
    S.uncov[:] = 0
    S.cover[:] = 0
    S.ucon[:] = 0
    S.starpos[:] = -1
    S.scal[SC_DEFICIT] = 0
    S.scal[SC_NSTAR] = 0
    S.scal[SC_TLEN] = 0
    for c in range(F.m):
        live = 0
        for j in range(F.cptr[c], F.cptr[c + 1]):
            if F.sepv[F.cvar[j]] == 0:
                live += 1
        S.live[c] = live
    for c in range(F.m):
        _refresh_clause(F, S, c)
    for y in range(F.n):
        _refresh_var(F, S, y)


@njit(cache=True)
def load_sigma(F, S, sigma):
    """Reset to all-untouched, then apply `sigma` without recording a trail."""
    init_state(F, S)
    for x in range(F.n):
        if sigma[x] != UNT:
            _set(F, S, x, sigma[x])


@njit(cache=True)
def copy_state(T, S):
    """Copy the mutable counters of template T into S (work arrays and epochs are kept)."""
    S.sigma[:] = T.sigma
    S.sat[:] = T.sat
    S.live[:] = T.live
    S.star[:] = T.star
    S.frozen[:] = T.frozen
    S.defic[:] = T.defic
    S.uncov[:] = T.uncov
    S.cover[:] = T.cover
    S.ucon[:] = T.ucon
    S.starpos[:] = T.starpos
    S.starlist[:] = T.starlist
    S.scal[SC_DEFICIT] = T.scal[SC_DEFICIT]
    S.scal[SC_NSTAR] = T.scal[SC_NSTAR]
    S.scal[SC_TLEN] = 0


@njit(cache=True)
def assign(F, S, x, new):
    t = S.scal[SC_TLEN]
    S.tvar[t] = x
    S.tprev[t] = S.sigma[x]
    S.scal[SC_TLEN] = t + 1
    _set(F, S, x, new)


@njit(cache=True)
def rollback(F, S, mark):
    t = S.scal[SC_TLEN]
    while t > mark:
        t -= 1
        _set(F, S, S.tvar[t], S.tprev[t])
    S.scal[SC_TLEN] = t


@njit(cache=True)
def is_alive(F, S, x):
    return S.sigma[x] == UNT and F.sepv[x] == 0 and S.cover[x] == 0 and S.scal[SC_DEFICIT] == 0


@njit(cache=True)
def is_interior(F, S, c):
    # frozen, bad or separator clause
    if F.sepc[c] == 1:
        return True
    return S.sat[c] == 0 and (S.frozen[c] == 1 or S.uncov[c] == 0)


@njit(cache=True)
def con_scan(F, S, limit):
    """BFS over C_con seeded at every starred variable.

    Returns (size, next_var). Stops early once size exceeds `limit`, in which
    case next_var is -1. Members of the scanned set carry the stamp
    S.scal[SC_CONEPOCH] in S.cvis.
    """
    S.scal[SC_EPOCH] += 1
    ep = S.scal[SC_EPOCH]
    tail = 0
    for i in range(S.scal[SC_NSTAR]):
        w = S.starlist[i]
        S.vvis[w] = ep
        S.queue[tail] = w
        tail += 1
    head = 0
    size = 0
    best = -1
    alive_ok = S.scal[SC_DEFICIT] == 0
    S.scal[SC_CONEPOCH] = ep
    while head < tail:
        x = S.queue[head]
        head += 1
        for p in range(F.vptr[x], F.vptr[x + 1]):
            c = F.vcl[p]
            if S.cvis[c] == ep:
                continue
            S.cvis[c] = ep
            S.conlist[size] = c
            size += 1
            if size > limit:
                S.scal[SC_CONSIZE] = size
                return size, -1
            if alive_ok:
                for j in range(F.cptr[c], F.cptr[c + 1]):
                    y = F.cvar[j]
                    if (best < 0 or y < best) and S.sigma[y] == UNT and F.sepv[y] == 0 and S.cover[y] == 0:
                        best = y
            if is_interior(F, S, c):
                for j in range(F.cptr[c], F.cptr[c + 1]):
                    y = F.cvar[j]
                    if S.sigma[y] >= STAR and S.vvis[y] != ep:
                        S.vvis[y] = ep
                        S.queue[tail] = y
                        tail += 1
    S.scal[SC_CONSIZE] = size
    return size, best


# ------------------------------------------------------- components/count


@njit(cache=True)
def collect_component(F, sigma, sat, w, cap, vvis, cvis, ep, compv, compc, v0, c0):
    """Component of free variable w among unsatisfied clauses.

    Appends variables at compv[v0:] and clauses at compc[c0:]. Returns the
    number of variables and clauses added; the variable count is -1 when it
    would exceed `cap` (cap < 0 means no cap).
    """
    vvis[w] = ep
    compv[v0] = w
    nv = 1
    nc = 0
    head = 0
    while head < nv:
        x = compv[v0 + head]
        head += 1
        for p in range(F.vptr[x], F.vptr[x + 1]):
            c = F.vcl[p]
            if sat[c] != 0 or cvis[c] == ep:
                continue
            cvis[c] = ep
            compc[c0 + nc] = c
            nc += 1
            for j in range(F.cptr[c], F.cptr[c + 1]):
                y = F.cvar[j]
                if sigma[y] >= STAR and vvis[y] != ep:
                    vvis[y] = ep
                    if cap >= 0 and nv >= cap:
                        return -1, nc
                    compv[v0 + nv] = y
                    nv += 1
    return nv, nc


@njit(cache=True)
def count_component(F, sigma, vars_, nv, cls, nc, target, loc):
    """Exact (#solutions, #solutions with target=1) of one residual component.

    Depth-first enumeration in ascending variable order; a clause is checked as
    soon as its highest free variable is set. Requires nv <= 62.
    """
    vs = np.sort(vars_[:nv])
    for i in range(nv):
        loc[vs[i]] = i
    pos = np.zeros(nc, np.int64)
    neg = np.zeros(nc, np.int64)
    last = np.full(nc, -1, np.int64)
    for t in range(nc):
        c = cls[t]
        for j in range(F.cptr[c], F.cptr[c + 1]):
            y = F.cvar[j]
            if sigma[y] >= STAR:
                li = loc[y]
                if F.cpos[j] == 1:
                    pos[t] |= np.int64(1) << li
                if F.cneg[j] == 1:
                    neg[t] |= np.int64(1) << li
                if li > last[t]:
                    last[t] = li
    tl = loc[target] if target >= 0 else 0
    for i in range(nv):
        loc[vs[i]] = -1
    for t in range(nc):
        if last[t] < 0:
            return 0, 0
    order = np.argsort(last, kind="mergesort")
    start = np.zeros(nv + 1, np.int64)
    for t in range(nc):
        start[last[t] + 1] += 1
    for d in range(nv):
        start[d + 1] += start[d]
    choice = np.zeros(nv + 1, np.int8)
    z = 0
    z1 = 0
    x = np.int64(0)
    d = 0
    while d >= 0:
        if d == nv:
            z += 1
            z1 += (x >> tl) & 1
            d -= 1
            continue
        ch = choice[d]
        if ch == 2:
            choice[d] = 0
            d -= 1
            continue
        choice[d] = ch + 1
        if ch == 1:
            x |= np.int64(1) << d
        else:
            x &= ~(np.int64(1) << d)
        ok = True
        for t in range(start[d], start[d + 1]):
            q = order[t]
            if (x & pos[q]) == 0 and ((~x) & neg[q]) == 0:
                ok = False
                break
        if ok:
            d += 1
    return z, z1


@njit(cache=True)
def tau_draw(rng, dnum, dden):
    r = rng.integers(0, 2 * dden)
    if r < 2 * dnum:
        return STAR
    if r < dnum + dden:
        return ZERO
    return ONE


@njit(cache=True)
def nu_draw(rng, z, z1, dnum, dden):
    """Draw from nu(1) = (z1/z - (1-delta)/2)/delta with delta = dnum/dden."""
    numer = 2 * dden * z1 - (dden - dnum) * z
    total = 2 * dnum * z
    if numer < 0 or numer > total:
        return LOCAL_UNIFORMITY
    r = rng.integers(0, total)
    return ONE if r < numer else ZERO


@njit(cache=True)
def sample_component(F, sigma, vars_, nv, cls, nc, rng, budget, stats, loc, cap):
    """Rejection-sample one component and write the accepted bits into sigma.

    Bits are drawn in ascending variable order, at most 62 per integer draw.
    budget < 0 means unbounded; an unbounded loop checks satisfiability by
    counting (when nv <= cap) after 2**16 failed attempts.
    """
    vs = np.sort(vars_[:nv])
    for i in range(nv):
        loc[vs[i]] = i
    bits = np.zeros(nv, np.int8)
    attempts = 0
    next_check = 1 << 16
    code = 0
    while True:
        if budget >= 0 and attempts >= budget:
            code = BUDGET
            break
        if budget < 0 and attempts >= next_check:
            next_check *= 4
            if nv <= cap and nv <= 62:
                for i in range(nv):
                    loc[vs[i]] = -1
                z, _ = count_component(F, sigma, vs, nv, cls, nc, -1, loc)
                for i in range(nv):
                    loc[vs[i]] = i
                if z == 0:
                    code = UNSAT
                    break
        attempts += 1
        s0 = 0
        while s0 < nv:
            width = min(62, nv - s0)
            r = rng.integers(0, np.int64(1) << width)
            for j in range(width):
                bits[s0 + j] = (r >> j) & 1
            s0 += width
        ok = True
        for t in range(nc):
            c = cls[t]
            good = False
            for j in range(F.cptr[c], F.cptr[c + 1]):
                y = F.cvar[j]
                val = bits[loc[y]] if sigma[y] >= STAR else sigma[y]
                if (val == ONE and F.cpos[j] == 1) or (val == ZERO and F.cneg[j] == 1):
                    good = True
                    break
            if not good:
                ok = False
                break
        if ok:
            break
    stats[ST_ATTEMPTS] += attempts
    for i in range(nv):
        loc[vs[i]] = -1
    if code == 0:
        for i in range(nv):
            sigma[vs[i]] = bits[i]
    return code


@njit(cache=True)
def reject_targets(F, sigma, sat, targets, slim, budget, rng, stats, cap):
    """Rejection sampling on every component of the residual formula meeting `targets`.

    All components are collected before any is sampled so that the size
    guard (`slim` clauses, < 0 disables it) fires before randomness is used.
    Writes sampled bits into sigma.
    """
    n = F.n
    m = F.m
    vvis = np.zeros(n, np.int64)
    cvis = np.zeros(m, np.int64)
    loc = np.full(n, -1, np.int32)
    compv = np.zeros(n, np.int32)
    compc = np.zeros(m, np.int32)
    vstart = np.zeros(n + 1, np.int64)
    cstart = np.zeros(n + 1, np.int64)
    ncomp = 0
    nvt = 0
    nct = 0
    for i in range(len(targets)):
        x = targets[i]
        if vvis[x] == 1:
            continue
        nv, nc = collect_component(F, sigma, sat, x, -1, vvis, cvis, 1, compv, compc, nvt, nct)
        if slim >= 0 and nc > slim:
            stats[ST_HALT_CON] = nc
            return HALT_SAMPLING
        nvt += nv
        nct += nc
        ncomp += 1
        vstart[ncomp] = nvt
        cstart[ncomp] = nct
    for q in range(ncomp):
        code = sample_component(
            F, sigma, compv[vstart[q]:vstart[q + 1]], vstart[q + 1] - vstart[q],
            compc[cstart[q]:cstart[q + 1]], cstart[q + 1] - cstart[q],
            rng, budget, stats, loc, cap,
        )
        if code < 0:
            return code
    return 0


# ------------------------------------------------------ marginal sampler


@njit(cache=True)
def leaf_counts(F, S, w, cap):
    """Exact counts for w's component; also checks it lies inside the last C_con scan.

    Returns (z, z1, code) with code 0, TOO_LARGE or CONTAINMENT.
    """
    S.scal[SC_EPOCH2] += 1
    ep2 = S.scal[SC_EPOCH2]
    nv, nc = collect_component(F, S.sigma, S.sat, w, cap, S.vvis2, S.cvis2, ep2, S.compv, S.compc, 0, 0)
    if nv < 0:
        return 0, 0, TOO_LARGE
    ep = S.scal[SC_CONEPOCH]
    for t in range(nc):
        if S.cvis[S.compc[t]] != ep:
            return 0, 0, CONTAINMENT
    z, z1 = count_component(F, S.sigma, S.compv, nv, S.compc, nc, w, S.loc)
    return z, z1, 0


@njit(cache=True)
def _leaf(F, S, w, rng, dnum, dden, cap, stats, fstats):
    z, z1, code = leaf_counts(F, S, w, cap)
    stats[ST_LEAVES] += 1
    if code < 0:
        return code
    if z == 0:
        return UNSAT
    lo = min(z1, z - z1) / z
    if lo < fstats[0]:
        fstats[0] = lo
    return nu_draw(rng, z, z1, dnum, dden)


@njit(cache=True)
def overflow(F, S, v, rng, dnum, dden, slim, kk, cap, stats, fstats, max_steps):
    """Iterative MarginOverflow on starred v; restores S to its entry state.

    Frames hold (variable, trail mark after its star, depth at that point).
    A nested frame's fixings are rolled back before its variable is
    overwritten from STAR to the returned bit; the caller then resumes its own
    loop (the tail call). Depth counts variables fixed since the entry state.
    """
    top = 0
    S.fw[0] = v
    S.fmark[0] = S.scal[SC_TLEN]
    S.fdepth[0] = 0
    depth = 0
    stats[ST_FRAMES] += 1
    limit = slim if slim >= 0 else F.m
    while True:
        if depth > stats[ST_MAXDEPTH]:
            stats[ST_MAXDEPTH] = depth
        if slim >= 0 and depth > slim * kk + 1:
            rollback(F, S, S.fmark[0])
            return DEPTH_EXCEEDED
        size, u = con_scan(F, S, limit)
        stats[ST_NEXTVAR] += 1
        if size > stats[ST_MAXCON]:
            stats[ST_MAXCON] = size
        if slim >= 0 and size > slim:
            stats[ST_HALT_CON] = size
            stats[ST_HALT_DEPTH] = depth
            rollback(F, S, S.fmark[0])
            return HALT_RECURSING
        if u < 0:
            w = S.fw[top]
            b = _leaf(F, S, w, rng, dnum, dden, cap, stats, fstats)
            if b < 0:
                rollback(F, S, S.fmark[0])
                return b
            rollback(F, S, S.fmark[top])
            if top == 0:
                return b
            depth = S.fdepth[top]
            top -= 1
            assign(F, S, w, b)
            continue
        if max_steps > 0 and stats[ST_TAU] + stats[ST_ATTEMPTS] >= max_steps:
            rollback(F, S, S.fmark[0])
            return STEP_BUDGET
        stats[ST_TAU] += 1
        t = tau_draw(rng, dnum, dden)
        assign(F, S, u, t)
        depth += 1
        if t == STAR:
            top += 1
            S.fw[top] = u
            S.fmark[top] = S.scal[SC_TLEN]
            S.fdepth[top] = depth
            stats[ST_FRAMES] += 1


@njit(cache=True)
def margin_sample(F, S, v, rng, dnum, dden, slim, kk, cap, stats, fstats, max_steps):
    """tau draw for alive v; STAR routes to overflow. Leaves S unchanged."""
    if max_steps > 0 and stats[ST_TAU] + stats[ST_ATTEMPTS] >= max_steps:
        return STEP_BUDGET
    stats[ST_TAU] += 1
    t = tau_draw(rng, dnum, dden)
    if t != STAR:
        return t
    stats[ST_OVERFLOWS] += 1
    mark = S.scal[SC_TLEN]
    assign(F, S, v, STAR)
    b = overflow(F, S, v, rng, dnum, dden, slim, kk, cap, stats, fstats, max_steps)
    rollback(F, S, mark)
    return b


@njit(cache=True)
def margin_sample_many(F, S, v, runs, rng, dnum, dden, slim, kk, cap, stats, fstats, codes):
    """Repeat margin_sample from the same state; codes[r] receives each outcome."""
    for r in range(runs):
        codes[r] = margin_sample(F, S, v, rng, dnum, dden, slim, kk, cap, stats, fstats, 0)


@njit(cache=True)
def finish_run(F, S, rng, slim, budget, stats, cap):
    """Size guard and final rejection on Lambda(sigma), then verify the result."""
    for c in range(F.m):
        if S.sat[c] == 0:
            free = False
            for j in range(F.cptr[c], F.cptr[c + 1]):
                if S.sigma[F.cvar[j]] >= STAR:
                    free = True
                    break
            if not free:
                return UNSAT
    nfree = 0
    for x in range(F.n):
        if S.sigma[x] >= STAR:
            nfree += 1
    targets = np.empty(nfree, np.int32)
    q = 0
    for x in range(F.n):
        if S.sigma[x] >= STAR:
            targets[q] = x
            q += 1
    code = reject_targets(F, S.sigma, S.sat, targets, slim, budget, rng, stats, cap)
    if code < 0:
        return code
    for c in range(F.m):
        good = False
        for j in range(F.cptr[c], F.cptr[c + 1]):
            val = S.sigma[F.cvar[j]]
            if (val == ONE and F.cpos[j] == 1) or (val == ZERO and F.cneg[j] == 1):
                good = True
                break
        if not good:
            return NON_SOLUTION
    return 0


@njit(cache=True)
def run_once(F, S, T, rng, dnum, dden, slim, kk, cap, budget, stats, fstats, max_steps):
    """One full pass: ascending loop over alive variables, then finish_run."""
    copy_state(T, S)
    for i in range(F.n):
        if is_alive(F, S, i):
            b = margin_sample(F, S, i, rng, dnum, dden, slim, kk, cap, stats, fstats, max_steps)
            if b < 0:
                return b
            _set(F, S, i, b)
    return finish_run(F, S, rng, slim, budget, stats, cap)


@njit(cache=True)
def pack_bits(sigma):
    key = np.int64(0)
    for x in range(len(sigma)):
        key = (key << 1) | np.int64(sigma[x])
    return key


@njit(cache=True)
def run_many(F, S, T, rng, runs, dnum, dden, slim, kk, cap, budget, stats, fstats, keys, codes, rstats, max_steps):
    """Repeated run_once; keys[r] packs the solution with variable 1 as the top bit.

    rstats[r] records (max depth, max |C_con|) of run r. max_steps applies
    to each run separately.
    """
    for r in range(runs):
        stats[ST_MAXDEPTH] = 0
        stats[ST_MAXCON] = 0
        lim = stats[ST_TAU] + stats[ST_ATTEMPTS] + max_steps if max_steps > 0 else 0
        code = run_once(F, S, T, rng, dnum, dden, slim, kk, cap, budget, stats, fstats, lim)
        codes[r] = code
        keys[r] = pack_bits(S.sigma) if code == 0 else -1
        rstats[r, 0] = stats[ST_MAXDEPTH]
        rstats[r, 1] = stats[ST_MAXCON]


@njit(cache=True)
def reject_many(F, sigma0, sat0, targets, runs, rng, budget, stats, cap, keys, codes):
    sigma = sigma0.copy()
    for r in range(runs):
        sigma[:] = sigma0
        code = reject_targets(F, sigma, sat0, targets, -1, budget, rng, stats, cap)
        codes[r] = code
        keys[r] = pack_bits(sigma) if code == 0 else -1


@njit(cache=True)
def sat_flags(F, sigma):
    sat = np.zeros(F.m, np.int32)
    for c in range(F.m):
        for j in range(F.cptr[c], F.cptr[c + 1]):
            val = sigma[F.cvar[j]]
            if (val == ONE and F.cpos[j] == 1) or (val == ZERO and F.cneg[j] == 1):
                sat[c] = 1
                break
    return sat


@njit(cache=True)
def component_coins(F, sigma, sat, v, count, rng, budget, stats, cap, out):
    """`count` independent exact draws of variable v's marginal under sigma.

    The component of v is collected once and rejection-sampled `count` times.
    """
    vvis = np.zeros(F.n, np.int64)
    cvis = np.zeros(F.m, np.int64)
    loc = np.full(F.n, -1, np.int32)
    compv = np.zeros(F.n, np.int32)
    compc = np.zeros(F.m, np.int32)
    nv, nc = collect_component(F, sigma, sat, v, -1, vvis, cvis, 1, compv, compc, 0, 0)
    sig = sigma.copy()
    for r in range(count):
        code = sample_component(F, sig, compv, nv, compc, nc, rng, budget, stats, loc, cap)
        if code < 0:
            return code
        out[r] = sig[v]
        for i in range(nv):
            sig[compv[i]] = sigma[compv[i]]
    return 0


@njit(cache=True)
def component_counts(F, sigma, sat, v, cap):
    """(z, z1, nv) for v's residual component; nv = -1 when it exceeds cap."""
    vvis = np.zeros(F.n, np.int64)
    cvis = np.zeros(F.m, np.int64)
    loc = np.full(F.n, -1, np.int32)
    compv = np.zeros(F.n, np.int32)
    compc = np.zeros(F.m, np.int32)
    nv, nc = collect_component(F, sigma, sat, v, cap, vvis, cvis, 1, compv, compc, 0, 0)
    if nv < 0:
        return 0, 0, -1
    z, z1 = count_component(F, sigma, compv, nv, compc, nc, v, loc)
    return z, z1, nv
