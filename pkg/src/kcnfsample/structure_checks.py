"""Executable predicates for the structural properties of random k-CNF formulas.

Each checker evaluates one quantified statement over a formula, either over
every subset inside the size bound (exhaustive) or over randomly drawn
subsets (sampled). Sampled runs never report "holds". Every violation
carries a witness that `recheck` confirms with a separate naive evaluation.

Property ids: p3.2 clause width, p3.3 sparse subsets (two items), p3.4
overlap counting, p3.5 connected clause sets, p3.6 neighbourhood growth,
p3.7 maximum degree, p3.8 high-degree count, p3.9 high-degree fraction in
connected sets, p3.10 peeling.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .errors import UnsupportedMode
from .formula import Formula, as_rng

PROPERTY_IDS = ("p3.2", "p3.3", "p3.4", "p3.5", "p3.6", "p3.7", "p3.8", "p3.9", "p3.10")
EXHAUSTIVE, SAMPLED = "exhaustive", "sampled"
HOLDS, VIOLATED, NOT_REFUTED, SKIPPED = "holds", "violated", "no_violation_found", "skipped"

# e to 40 digits, as a bracket of rationals
E_LO = Fraction(27182818284590452353602874713526624977572, 10**40)
E_HI = E_LO + Fraction(1, 10**40)


@dataclass(frozen=True)
class CheckParams:
    eta: Fraction = Fraction(1, 5)
    D: Fraction = Fraction(8)
    b: Fraction | None = None  # None: every b = j/k >= eta
    max_size: int | None = None  # replaces the property's own subset-size bound
    ell_max: int = 6
    overlap: int = 6  # peeling threshold
    n_cap: int = 16
    clause_cap: int = 12
    enum_limit: int = 2_000_000

    @classmethod
    def from_params(cls, p, **kw) -> "CheckParams":
        return cls(eta=Fraction(p.eta), D=Fraction(p.D), **kw)


@dataclass
class CheckReport:
    property_id: str
    mode: str
    verdict: str
    witness: dict | None = None
    ratio: float | None = None  # largest lhs/rhs seen; > 1 means violated
    trials: int = 0
    reason: str | None = None

    def to_json(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


# ------------------------------------------------------------------ helpers


def _log2k_ratio(k: int, mult: int) -> float:
    return math.inf if k < 2 else mult * k / math.log2(k)


def subset_bound(prop: str, f: Formula, cp: CheckParams) -> int:
    """Largest subset size the property quantifies over."""
    if cp.max_size is not None:
        return cp.max_size
    k, n = f.k or 0, f.n
    if prop in ("p3.3a", "p3.3b", "p3.4"):
        mult = {"p3.3a": 1, "p3.3b": 2, "p3.4": 3}[prop]
        e = _log2k_ratio(k, mult)
        return 0 if math.isinf(e) else int(math.floor(n / 2**e))
    if prop == "p3.10":
        return n >> (4 * k)
    return n


def _masks(f: Formula) -> list[int]:
    return [sum(1 << (v - 1) for v in c.vbl) for c in f.clauses]


def _vars_of(mask: int) -> list[int]:
    out, v = [], 1
    while mask:
        if mask & 1:
            out.append(v)
        mask >>= 1
        v += 1
    return out


def _popcount(x: np.ndarray) -> np.ndarray:
    return np.bitwise_count(x.astype(np.uint64)).astype(np.int64)


def _subset_masks(n: int, t: int) -> np.ndarray:
    rows = []
    for s in range(1, min(t, n) + 1):
        for comb in itertools.combinations(range(n), s):
            rows.append(sum(1 << i for i in comb))
    return np.array(rows, dtype=np.int64)


def _var_adj(f: Formula) -> list[set[int]]:
    adj = [set() for _ in range(f.n + 1)]
    for c in f.clauses:
        for a in c.vbl:
            adj[a] |= c.vbl
    for v in range(1, f.n + 1):
        adj[v].discard(v)
    return adj


def _clause_adj(f: Formula) -> list[set[int]]:
    adj = [set() for _ in range(f.m)]
    for cls in f.var_to_clauses[1:]:
        for a in cls:
            adj[a].update(cls)
    for i in range(f.m):
        adj[i].discard(i)
    return adj


def _connected_sets(adj, roots, limit_size: int, budget: list[int], excl_lower: bool):
    """Yield each connected vertex set (as a frozenset) containing a root exactly once.

    With excl_lower, sets are grown from their smallest vertex, so each
    connected set of the graph appears once over all roots.
    """

    def rec(S, cand, excl):
        budget[0] -= 1
        if budget[0] < 0:
            raise UnsupportedMode("connected-set enumeration exceeds the configured limit")
        yield S
        if len(S) == limit_size:
            return
        excl = set(excl)
        cand = list(cand)
        for i, w in enumerate(cand):
            child_excl = excl | {w}
            nxt = [x for x in cand[i + 1:] if x not in excl]
            seen = set(nxt) | S
            for y in sorted(adj[w]):
                if y not in seen and y not in child_excl:
                    nxt.append(y)
                    seen.add(y)
            yield from rec(S | {w}, nxt, child_excl)
            excl.add(w)

    for r in roots:
        excl = set(range(r)) if excl_lower else set()
        excl.add(r)
        cand = [y for y in sorted(adj[r]) if y not in excl]
        yield from rec(frozenset([r]), cand, excl)


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise UnsupportedMode(msg)


def _report(pid, mode, viol, ratio, trials) -> CheckReport:
    if viol is not None:
        return CheckReport(pid, mode, VIOLATED, viol, ratio, trials)
    return CheckReport(pid, mode, HOLDS if mode == EXHAUSTIVE else NOT_REFUTED, None, ratio, trials)


def _degrees(f: Formula) -> list[int]:
    return [0] + [len(f.var_to_clauses[v]) for v in range(1, f.n + 1)]


def _log2_floor_pow(n: int, k: int) -> int:
    """floor(k * log2(n)) computed exactly."""
    return (n**k).bit_length() - 1


# --------------------------------------------------------------- properties


def _p32(f, cp, mode, rng, trials):
    k = f.k or 0
    viol, worst = None, 0.0
    for i, c in enumerate(f.clauses):
        w = len(c.vbl)
        r = (k - 2) / w if w else math.inf
        if r > worst:
            worst = r
        if w < k - 2 and viol is None:
            viol = {"clause": i, "vbl": sorted(c.vbl), "width": w}
    return _report("p3.2", EXHAUSTIVE, viol, worst, f.m)


def _p33_item1(f, cp, mode, rng, trials, masks):
    k, eta, n = f.k, Fraction(cp.eta), f.n
    t = subset_bound("p3.3a", f, cp)
    cm = np.array(masks, dtype=np.int64)
    if mode == EXHAUSTIVE:
        _require(n <= cp.n_cap, f"exhaustive subset checks need n <= {cp.n_cap}")
        subs = _subset_masks(n, t)
    else:
        subs = _random_subsets(n, t, trials, rng)
    if subs.size == 0 or cm.size == 0:
        return None, 0.0
    inside = ((subs[:, None] & cm[None, :]) == cm[None, :]).sum(axis=1)
    size = _popcount(subs)
    # count <= (1 + eta) |V'| / k  <=>  count * k * den <= (num + den) |V'|
    lhs = inside * k * eta.denominator
    rhs = (eta.numerator + eta.denominator) * size
    ratio = float((lhs / rhs).max())
    bad = np.nonzero(lhs > rhs)[0]
    if bad.size:
        j = int(bad[0])
        return {"item": 1, "vars": _vars_of(int(subs[j])), "inside": int(inside[j])}, ratio
    return None, ratio


def _clause_subsets(m: int, t: int, cp: CheckParams, include_empty: bool = False):
    total = sum(math.comb(m, s) for s in range(0 if include_empty else 1, min(t, m) + 1))
    _require(t <= cp.clause_cap, f"exhaustive clause-subset checks need |C'| <= {cp.clause_cap}")
    _require(total <= cp.enum_limit, f"{total} clause subsets exceed the enumeration limit")
    for s in range(0 if include_empty else 1, min(t, m) + 1):
        yield from itertools.combinations(range(m), s)


def _random_clause_subsets(m, t, trials, rng, include_empty=False):
    lo = 0 if include_empty else 1
    hi = min(t, m)
    for _ in range(trials):
        if hi < lo:
            return
        s = int(rng.integers(lo, hi + 1))
        yield tuple(sorted(rng.choice(m, size=s, replace=False).tolist()))


def _random_subsets(n, t, trials, rng) -> np.ndarray:
    hi = min(t, n)
    if hi < 1:
        return np.zeros(0, np.int64)
    rows = []
    for _ in range(trials):
        s = int(rng.integers(1, hi + 1))
        rows.append(sum(1 << int(i) for i in rng.choice(n, size=s, replace=False)))
    return np.array(rows, dtype=np.int64)


def _p33_item2(f, cp, mode, rng, trials, masks):
    k, eta = f.k, Fraction(cp.eta)
    t = subset_bound("p3.3b", f, cp)
    if mode == EXHAUSTIVE:
        _require(f.n <= cp.n_cap, f"exhaustive subset checks need n <= {cp.n_cap}")
        subsets = _clause_subsets(f.m, t, cp)
    else:
        subsets = _random_clause_subsets(f.m, t, trials, rng)
    worst = 0.0
    for cs in subsets:
        u = 0
        for c in cs:
            u |= masks[c]
        union = u.bit_count()
        # |union| >= k |C'| / (1 + eta)
        lhs, rhs = k * len(cs), union * (1 + eta)
        worst = max(worst, float(lhs / rhs) if rhs else math.inf)
        if lhs > rhs:
            return {"item": 2, "clauses": list(cs), "union": union}, worst
    return None, worst


def _p33(f, cp, mode, rng, trials):
    masks = _masks(f)
    v1, r1 = _p33_item1(f, cp, mode, rng, trials, masks)
    if v1 is not None:
        return _report("p3.3", mode, v1, r1, trials)
    v2, r2 = _p33_item2(f, cp, mode, rng, trials, masks)
    return _report("p3.3", mode, v2, max(r1, r2), trials)


def _b_values(f, cp) -> list[Fraction]:
    k, eta = f.k, Fraction(cp.eta)
    if cp.b is not None:
        if Fraction(cp.b) < eta:
            raise ValueError("b must be at least eta")
        return [Fraction(cp.b)]
    return [Fraction(j, k) for j in range(1, k + 1) if Fraction(j, k) >= eta]


def _p34(f, cp, mode, rng, trials):
    k, eta, n = f.k, Fraction(cp.eta), f.n
    t = subset_bound("p3.4", f, cp)
    if mode == EXHAUSTIVE:
        _require(n <= cp.n_cap, f"exhaustive subset checks need n <= {cp.n_cap}")
        subs = _subset_masks(n, t)
    else:
        subs = _random_subsets(n, t, trials, rng)
    cm = np.array(_masks(f), dtype=np.int64)
    if subs.size == 0 or cm.size == 0:
        return _report("p3.4", mode, None, 0.0, len(subs))
    overlap = _popcount(subs[:, None] & cm[None, :])
    size = _popcount(subs)
    worst = 0.0
    for b in _b_values(f, cp):
        need = math.ceil(b * k)
        cnt = (overlap >= need).sum(axis=1)
        coef = (b - eta) * k  # |V'| >= coef * cnt
        lhs = cnt * coef.numerator
        rhs = size * coef.denominator
        worst = max(worst, float((lhs / rhs).max()))
        bad = np.nonzero(lhs > rhs)[0]
        if bad.size:
            j = int(bad[0])
            w = {"vars": _vars_of(int(subs[j])), "b": str(b), "count": int(cnt[j])}
            return _report("p3.4", mode, w, worst, len(subs))
    return _report("p3.4", mode, None, worst, len(subs))


def connected_set_counts(f: Formula, c: int, ell_max: int, limit: int = 2_000_000) -> list[int]:
    """counts[l] = number of connected clause sets of size l containing clause c."""
    adj = _clause_adj(f)
    counts = [0] * (ell_max + 1)
    for S in _connected_sets(adj, [c], ell_max, [limit], excl_lower=False):
        counts[len(S)] += 1
    return counts


def _p35_bound(f: Formula, ell: int, e: Fraction) -> Fraction:
    alpha = Fraction(f.m, f.n)
    return alpha**2 * f.n**4 * (e * f.k**2 * alpha) ** ell


def _p35(f, cp, mode, rng, trials):
    budget = [cp.enum_limit]
    adj = _clause_adj(f)
    worst = 0.0
    for c in range(f.m):
        counts = [0] * (cp.ell_max + 1)
        for S in _connected_sets(adj, [c], cp.ell_max, budget, excl_lower=False):
            counts[len(S)] += 1
        for ell in range(1, cp.ell_max + 1):
            lo, hi = _p35_bound(f, ell, E_LO), _p35_bound(f, ell, E_HI)
            worst = max(worst, float(Fraction(counts[ell]) / lo))
            if counts[ell] > hi:
                w = {"clause": c, "size": ell, "count": counts[ell], "bound": float(hi)}
                return _report("p3.5", EXHAUSTIVE, w, worst, f.m)
            if counts[ell] > lo:
                raise RuntimeError("bound comparison not resolved by the e bracket")
    return _report("p3.5", EXHAUSTIVE, None, worst, f.m)


def _closed_nbhd_size(adj, S) -> int:
    out = set(S)
    for v in S:
        out |= adj[v]
    return len(out)


def _random_connected(adj, n, lo, hi, rng):
    start = int(rng.integers(1, n + 1))
    target = int(rng.integers(lo, hi + 1))
    S = {start}
    frontier = set(adj[start])
    while len(S) < target and frontier:
        w = sorted(frontier)[int(rng.integers(len(frontier)))]
        S.add(w)
        frontier |= adj[w]
        frontier -= S
    return frozenset(S)


def _connected_var_sets(f, cp, mode, rng, trials, lo=1):
    adj = _var_adj(f)
    hi = min(cp.max_size or f.n, f.n)
    if mode == EXHAUSTIVE:
        _require(f.n <= cp.n_cap, f"exhaustive subset checks need n <= {cp.n_cap}")
        return adj, _connected_sets(adj, range(1, f.n + 1), hi, [cp.enum_limit], excl_lower=True)
    return adj, (_random_connected(adj, f.n, max(lo, 1), max(hi, lo), rng) for _ in range(trials))


def _p36(f, cp, mode, rng, trials):
    k, n = f.k, f.n
    alpha = Fraction(f.m, n)
    floor_klog = _log2_floor_pow(n, k)
    adj, sets = _connected_var_sets(f, cp, mode, rng, trials)
    worst, count = 0.0, 0
    for S in sets:
        count += 1
        nb = _closed_nbhd_size(adj, S)
        bound = 3 * k**4 * alpha * max(len(S), floor_klog)
        worst = max(worst, float(nb / bound) if bound else math.inf)
        if nb > bound:
            return _report("p3.6", mode, {"vars": sorted(S), "neighbourhood": nb, "bound": float(bound)}, worst, count)
    return _report("p3.6", mode, None, worst, count)


def _p37(f, cp, mode, rng, trials):
    deg = _degrees(f)
    d = max(deg[1:], default=0)
    v = deg.index(d) if f.n else 0
    x = d - 4 * f.k * Fraction(f.m, f.n)  # holds iff x <= 6 log2 n
    gap = float(x) - 6 * math.log2(f.n)
    if x <= 0:
        holds = True
    elif abs(gap) > 1e-9:
        holds = gap < 0
    else:
        # 2^x <= n^6  <=>  2^p <= n^(6q), only reached near equality
        holds = 2 ** x.numerator <= f.n ** (6 * x.denominator)
    bound = 4 * f.k * f.m / f.n + 6 * math.log2(f.n)
    ratio = d / bound if bound else math.inf
    w = None if holds else {"variable": v, "degree": d, "bound": bound}
    return _report("p3.7", EXHAUSTIVE, w, ratio, f.n)


def _high_degree(f, D) -> set[int]:
    deg = _degrees(f)
    return {v for v in range(1, f.n + 1) if deg[v] >= D}


def _p38(f, cp, mode, rng, trials):
    hd = _high_degree(f, Fraction(cp.D))
    # |HD| <= n / 2^(4k)
    ratio = len(hd) * 2 ** (4 * f.k) / f.n
    w = {"variables": sorted(hd)} if len(hd) * 2 ** (4 * f.k) > f.n else None
    return _report("p3.8", EXHAUSTIVE, w, ratio, f.n)


def _p39(f, cp, mode, rng, trials):
    k, n = f.k, f.n
    hd = _high_degree(f, Fraction(cp.D))
    lo = max(1, math.ceil(math.log2(n))) if n > 1 else 1
    adj, sets = _connected_var_sets(f, cp, mode, rng, trials, lo=lo)
    worst, count = 0.0, 0
    for S in sets:
        if 2 ** len(S) < n:  # premise |V'| >= log2 n
            continue
        count += 1
        h = len(S & hd)
        worst = max(worst, h * k * k / len(S))
        if h * k * k > len(S):
            return _report("p3.9", mode, {"vars": sorted(S), "high_degree": sorted(S & hd)}, worst, count)
    return _report("p3.9", mode, None, worst, count)


def peel(f: Formula, base, overlap: int, masks=None) -> list[int]:
    """Maximal peeling sequence from `base`: clauses outside it, each sharing
    at least `overlap` variables with everything collected so far.

    The set of clauses that can ever join only grows as V_s grows, so the
    closure taken smallest-index-first is the longest possible sequence.
    """
    masks = masks if masks is not None else _masks(f)
    base = set(base)
    V = 0
    for c in base:
        V |= masks[c]
    seq: list[int] = []
    used = set(base)
    changed = True
    while changed:
        changed = False
        for c in range(f.m):
            if c not in used and (masks[c] & V).bit_count() >= overlap:
                seq.append(c)
                used.add(c)
                V |= masks[c]
                changed = True
                break
    return seq


def _p310(f, cp, mode, rng, trials):
    t = subset_bound("p3.10", f, cp)
    masks = _masks(f)
    if mode == EXHAUSTIVE:
        _require(f.n <= cp.n_cap, f"exhaustive subset checks need n <= {cp.n_cap}")
        subsets = _clause_subsets(f.m, t, cp, include_empty=True)
    else:
        subsets = _random_clause_subsets(f.m, t, trials, rng, include_empty=True)
    worst, count = 0.0, 0
    for base in subsets:
        count += 1
        seq = peel(f, base, cp.overlap, masks)
        ell = len(seq)
        worst = max(worst, ell / len(base) if base else (math.inf if ell else 0.0))
        if ell > len(base):
            w = {"base": list(base), "sequence": seq[: len(base) + 1], "overlap": cp.overlap}
            return _report("p3.10", mode, w, worst, count)
    return _report("p3.10", mode, None, worst, count)


_CHECKERS = {
    "p3.2": _p32, "p3.3": _p33, "p3.4": _p34, "p3.5": _p35, "p3.6": _p36,
    "p3.7": _p37, "p3.8": _p38, "p3.9": _p39, "p3.10": _p310,
}


def check_property(
    f: Formula,
    property_id: str,
    params: CheckParams | None = None,
    mode: str = EXHAUSTIVE,
    rng=None,
    trials: int = 1000,
) -> CheckReport:
    if property_id not in _CHECKERS:
        raise ValueError(f"unknown property {property_id!r}; expected one of {PROPERTY_IDS}")
    if mode not in (EXHAUSTIVE, SAMPLED):
        raise UnsupportedMode(f"unknown mode {mode!r}")
    cp = params or CheckParams()
    if f.k is None:
        return CheckReport(property_id, mode, SKIPPED, reason="formula has no clauses")
    return _CHECKERS[property_id](f, cp, mode, as_rng(rng), trials)


def check_all(f: Formula, params: CheckParams | None = None, mode: str = EXHAUSTIVE, rng=None, trials: int = 1000):
    rng = as_rng(rng)
    out = []
    for pid in PROPERTY_IDS:
        try:
            out.append(check_property(f, pid, params, mode, rng, trials))
        except UnsupportedMode as e:
            out.append(CheckReport(pid, mode, SKIPPED, reason=str(e)))
    return out


# ------------------------------------------------------- witness rechecking


def _naive_connected(S, edge) -> bool:
    S = list(S)
    if not S:
        return False
    seen, stack = {S[0]}, [S[0]]
    while stack:
        a = stack.pop()
        for b in S:
            if b not in seen and edge(a, b):
                seen.add(b)
                stack.append(b)
    return len(seen) == len(S)


def _share_clause(f):
    return lambda a, b: any(a in c.vbl and b in c.vbl for c in f.clauses)


def recheck(f: Formula, report: CheckReport, params: CheckParams | None = None) -> bool:
    """Independently confirm that a violation witness breaks its property."""
    cp = params or CheckParams()
    w = report.witness
    if report.verdict != VIOLATED or w is None:
        return False
    k, n, m = f.k, f.n, f.m
    eta = Fraction(cp.eta)
    pid = report.property_id
    vb = [set(c.vbl) for c in f.clauses]
    if pid == "p3.2":
        return len(vb[w["clause"]]) < k - 2
    if pid == "p3.3":
        if w["item"] == 1:
            V = set(w["vars"])
            if not 1 <= len(V) <= subset_bound("p3.3a", f, cp):
                return False
            inside = sum(1 for s in vb if s <= V)
            return inside > (1 + eta) * len(V) / k
        cs = w["clauses"]
        if not 1 <= len(set(cs)) <= subset_bound("p3.3b", f, cp):
            return False
        union = set().union(*(vb[c] for c in cs))
        return len(union) < Fraction(k * len(cs)) / (1 + eta)
    if pid == "p3.4":
        V, b = set(w["vars"]), Fraction(w["b"])
        if b < eta or not 1 <= len(V) <= subset_bound("p3.4", f, cp):
            return False
        cnt = sum(1 for s in vb if len(s & V) >= b * k)
        return len(V) < (b - eta) * k * cnt
    if pid == "p3.5":
        c, ell = w["clause"], w["size"]
        # ball of radius ell - 1 around c, then brute-force all subsets
        ball, layer = {c}, {c}
        for _ in range(ell - 1):
            layer = {d for a in layer for d in range(m) if d not in ball and vb[a] & vb[d]}
            ball |= layer
        others = sorted(ball - {c})
        edge = lambda a, b: bool(vb[a] & vb[b])  # noqa: E731
        cnt = sum(1 for rest in itertools.combinations(others, ell - 1) if _naive_connected((c,) + rest, edge))
        return cnt > _p35_bound(f, ell, E_HI)
    if pid == "p3.6":
        V = set(w["vars"])
        if not _naive_connected(V, _share_clause(f)):
            return False
        nb = {u for u in range(1, n + 1) if u in V or any(u in s and (s & V) for s in vb)}
        return len(nb) > 3 * k**4 * Fraction(m, n) * max(len(V), math.floor(k * math.log2(n) + 1e-12))
    if pid == "p3.7":
        v = w["variable"]
        d = sum(1 for s in vb if v in s)
        return d > 4 * k * m / n + 6 * math.log2(n)
    if pid == "p3.8":
        hd = w["variables"]
        return all(sum(1 for s in vb if v in s) >= cp.D for v in hd) and len(hd) > Fraction(n, 2 ** (4 * k))
    if pid == "p3.9":
        V = set(w["vars"])
        if not _naive_connected(V, _share_clause(f)) or len(V) < math.log2(n):
            return False
        h = sum(1 for v in V if sum(1 for s in vb if v in s) >= cp.D)
        return h > Fraction(len(V), k * k)
    if pid == "p3.10":
        base, seq = w["base"], w["sequence"]
        if len(set(base)) > subset_bound("p3.10", f, cp) or len(seq) <= len(base):
            return False
        if len(set(seq)) != len(seq) or set(seq) & set(base):
            return False
        V = set().union(*(vb[c] for c in base)) if base else set()
        for c in seq:
            if len(vb[c] & V) < w["overlap"]:
                return False
            V |= vb[c]
        return True
    return False


# ------------------------------------------------------ parameter profiles


def parameter_gates(p) -> dict[str, bool]:
    """Parameter-level conditions of the good and nice instance profiles.

    These say whether the theory's assumptions are met; structural
    conditions are separate checks. At desk scale they are expected to fail.
    """
    k = p.k
    alpha = Fraction(p.alpha)
    xi = Fraction(p.xi)
    log_k = math.log2(k) if k > 1 else 0.0
    gates = {
        "k_at_least_2^20": k >= 2**20,
        "xi_in_range": 2 ** (-k / 8) <= float(xi) <= 1,
        "alpha_small": alpha == 0 or math.log2(alpha) <= math.log2(xi) + k / 3 - 50 * log_k,
        "eta_is_profile": abs(float(p.eta) - 15 * log_k / k) < 1e-12,
        "D_is_profile": Fraction(p.D) == Fraction(k) ** 8 * (alpha + 1) / xi,
    }
    gates["good_parameters"] = all(gates.values())
    gates["nice_parameters"] = gates["good_parameters"] and alpha >= Fraction(1, k**3)
    return gates
