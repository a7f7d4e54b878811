"""kcnfsample command line: generate, sample, count, check, verify, bench."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import structure_checks as SC
from .errors import BudgetExhausted, KcnfError, LocalUniformityViolated
from .formula import Formula, generate_random_kcnf, parse_dimacs, write_dimacs
from .marginal import count_solutions
from .params import Params, desk_overrides, params_for
from .pipeline import Sampler, approx_count, certify_delta, sample_with_policy
from .rejection import CLI_BUDGET, RejectionBudget, rejection_sampling
from .separator import construct_sep, separator_summary
from .verify import (
    SolutionHistogram,
    measure_halt_rate,
    noise_radius,
    rejection_handle,
    solution_keys,
    tv_from_histogram,
)

EXIT_OK, EXIT_USAGE, EXIT_HALT, EXIT_BUDGET = 0, 1, 2, 3
CHUNK = 10_000  # runs per independently seeded chunk
DESK_MAX_STEPS = 10**7


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class CliConfig:
    subcommand: str
    input: str | None = None
    generator: dict | None = None
    overrides: dict = field(default_factory=dict)  # raw flag text, echoed in reports
    fmt: str = "json"
    policy: str | None = None


# ------------------------------------------------------------------ parsing


def _s_value(text: str):
    if text == "paper":
        return text
    if text.lower() in ("inf", "infinity", "none"):
        return None
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("s must be non-negative")
    return v


def _add_formula_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("-i", "--input", help="DIMACS file ('-' for stdin)")
    p.add_argument("-k", type=int, help="clause width for a generated formula")
    p.add_argument("-n", type=int, help="variables for a generated formula")
    p.add_argument("--m", type=int, help="clauses for a generated formula")
    p.add_argument("--alpha", type=float, help="density; m = floor(alpha * n)")
    p.add_argument("--gen-seed", type=int, help="generator seed (defaults to --seed)")


def _add_params(p: argparse.ArgumentParser, delta_default: str = "auto") -> None:
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--xi", type=float, default=1.0)
    p.add_argument("--delta", default=delta_default, help="fraction, float, 'auto' (certify) or 'paper'")
    p.add_argument("--s", type=_s_value, default="paper", help="truncation size, 'inf', or the default formula value")
    p.add_argument("--eta", help="overlap/live-floor parameter override")
    p.add_argument("--D", dest="D", help="high-degree threshold override")
    p.add_argument("--cap", type=int, help="leaf enumeration cap")
    p.add_argument("--budget", type=int, help="rejection attempts per component")
    p.add_argument("--max-steps", type=int, help="tau draws plus rejection attempts per run")
    p.add_argument("--probe-runs", type=int, default=200, help="runs per delta candidate for --delta auto")
    p.add_argument("--profile", choices=("desk", "paper"), default="desk",
                   help="desk: small-k eta and D plus a step guard; paper: formula values only")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="kcnfsample", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", parser_class=_Parser)

    g = sub.add_parser("generate", help="random k-CNF in DIMACS")
    g.add_argument("-k", type=int, required=True)
    g.add_argument("-n", type=int, required=True)
    g.add_argument("--m", type=int)
    g.add_argument("--alpha", type=float)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output")

    s = sub.add_parser("sample", help="draw one solution")
    _add_formula_source(s)
    _add_params(s)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--mode", choices=("auto", "recursive", "rejection"), default="auto")
    s.add_argument("--policy", choices=("report_halt", "fallback", "fallback_rejection"), default="fallback_rejection")
    s.add_argument("--format", choices=("json",), default="json")
    s.add_argument("-o", "--output", help="write the JSON report here instead of stdout")

    c = sub.add_parser("count", help="approximate number of solutions")
    _add_formula_source(c)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--eps", type=float, default=0.05)
    c.add_argument("--runs-per-step", type=int, default=10_000)
    c.add_argument("--no-exact-shortcut", action="store_true")
    c.add_argument("--exact", action="store_true", help="also report the enumeration count")
    c.add_argument("--format", choices=("json",), default="json")
    c.add_argument("-o", "--output")

    k = sub.add_parser("check", help="structural property checkers")
    _add_formula_source(k)
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--property", default="all", help="p3.2 ... p3.10 or all")
    k.add_argument("--mode", choices=(SC.EXHAUSTIVE, SC.SAMPLED), default=SC.EXHAUSTIVE)
    k.add_argument("--trials", type=int, default=1000)
    k.add_argument("--eps", type=float, default=0.05)
    k.add_argument("--xi", type=float, default=1.0)
    k.add_argument("--eta")
    k.add_argument("--D", dest="D")
    k.add_argument("--b")
    k.add_argument("--max-size", type=int)
    k.add_argument("--ell-max", type=int, default=6)
    k.add_argument("--overlap", type=int, default=6)
    k.add_argument("--format", choices=("json",), default="json")
    k.add_argument("-o", "--output")

    v = sub.add_parser("verify", help="distribution and truncation checks against enumeration")
    _add_formula_source(v)
    _add_params(v)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--runs", type=int, default=100_000)
    v.add_argument("--mode", choices=("full", "rejection", "halt"), default="full")
    v.add_argument("--jobs", type=int, default=1)
    v.add_argument("--plot", help="directory for figures")
    v.add_argument("--format", choices=("json",), default="json")
    v.add_argument("-o", "--output")

    b = sub.add_parser("bench", help="wall-time sweep over n")
    b.add_argument("-k", type=int, default=5)
    b.add_argument("--alpha", type=float, default=0.5)
    b.add_argument("--n-list", default="1000,10000,100000")
    b.add_argument("--runs", type=int, default=5)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--policy", choices=("report_halt", "fallback", "fallback_rejection"), default="report_halt")
    b.add_argument("--plot", help="figure path (png)")
    b.add_argument("--format", choices=("csv", "json"), default="csv")
    b.add_argument("-o", "--output")
    _add_params(b, delta_default="1/8")
    return ap


# --------------------------------------------------------------- utilities


def _load_formula(a) -> tuple[Formula, dict | None]:
    has_gen = any(getattr(a, x, None) is not None for x in ("k", "n", "m", "alpha"))
    if (a.input is None) == (not has_gen):
        raise UsageError("give exactly one of -i/--input or a generator spec (-k, -n, --m or --alpha)")
    if a.input is not None:
        text = sys.stdin.read() if a.input == "-" else Path(a.input).read_text()
        return parse_dimacs(text), None
    return _generate(a.k, a.n, a.m, a.alpha, a.gen_seed if a.gen_seed is not None else a.seed)


def _generate(k, n, m, alpha, seed) -> tuple[Formula, dict]:
    if k is None or n is None:
        raise UsageError("a generator spec needs -k and -n")
    if (m is None) == (alpha is None):
        raise UsageError("give exactly one of --m or --alpha")
    if m is None:
        m = math.floor(alpha * n)
    spec = {"k": k, "n": n, "m": m, "alpha": alpha, "seed": seed}
    return generate_random_kcnf(k, n, m, seed), spec


def _raw_overrides(a) -> dict:
    out = {}
    for key in ("delta", "eta", "D", "cap", "budget", "max_steps", "profile"):
        val = getattr(a, key, None)
        if val is not None and val != "paper":
            out[key] = str(val)
    s = getattr(a, "s", "paper")
    if s != "paper":
        out["s"] = "inf" if s is None else str(s)
    return out


def config_of(a) -> CliConfig:
    """Parsed arguments as a CliConfig; overrides keep the flag text verbatim."""
    gen = None
    if getattr(a, "k", None) is not None or getattr(a, "n", None) is not None:
        gen = {key: getattr(a, key, None) for key in ("k", "n", "m", "alpha")}
    return CliConfig(
        subcommand=a.cmd,
        input=getattr(a, "input", None),
        generator=gen,
        overrides=_raw_overrides(a),
        fmt=getattr(a, "format", "json"),
        policy=getattr(a, "policy", None),
    )


def _params(f: Formula, a, seed_rng) -> tuple[Params, dict]:
    """Profile defaults, CLI overrides, then delta certification when asked."""
    ov: dict = {}
    if a.profile == "desk" and f.k:
        ov.update(desk_overrides(f.k, Fraction(f.m, f.n)))
        ov["max_steps"] = DESK_MAX_STEPS
    if a.s != "paper":
        ov["s"] = a.s
    for key in ("eta", "D", "cap", "budget", "max_steps"):
        val = getattr(a, key, None)
        if val is not None:
            ov[key] = val
    delta = str(a.delta)
    if delta not in ("auto", "paper"):
        ov["delta"] = Fraction(delta)
    p = params_for(f, a.eps, a.xi, overrides=ov)
    info = {}
    if delta == "auto":
        cert = certify_delta(f, p, seed_rng, probe_runs=a.probe_runs)
        p = p.with_overrides(delta=cert.delta)
        info = {"certified_delta": str(cert.delta), "min_leaf_margin": cert.min_margin,
                "tried": [[str(d), why] for d, why in cert.tried]}
    return p, info


def _emit(obj, a, out) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if getattr(a, "output", None):
        Path(a.output).write_text(text)
    else:
        out.write(text)


def _solution_line(bits) -> str:
    return "v " + " ".join(str(i + 1) if b else str(-(i + 1)) for i, b in enumerate(bits)) + " 0"


def _chunk_seeds(seed: int, runs: int) -> list[tuple[int, np.random.SeedSequence]]:
    """Fixed-size chunks, each with its own spawned stream; independent of --jobs."""
    nchunks = max(1, math.ceil(runs / CHUNK))
    seqs = np.random.SeedSequence(seed).spawn(nchunks)
    sizes = [min(CHUNK, runs - i * CHUNK) for i in range(nchunks)]
    return list(zip(sizes, seqs))


# ------------------------------------------------------------- subcommands


def cmd_generate(a, out, err) -> int:
    f, spec = _generate(a.k, a.n, a.m, a.alpha, a.seed)
    alpha = "none" if spec["alpha"] is None else repr(spec["alpha"])
    text = f"c generated k={f.k} n={f.n} m={f.m} alpha={alpha} seed={a.seed}\n" + write_dimacs(f)
    if a.output:
        Path(a.output).write_text(text)
    else:
        out.write(text)
    return EXIT_OK


def cmd_sample(a, out, err) -> int:
    f, spec = _load_formula(a)
    rng = np.random.default_rng(a.seed)
    budget = a.budget if a.budget is not None else CLI_BUDGET
    report = {"formula": {"n": f.n, "m": f.m, "k": f.k, "generator": spec}, "overrides": config_of(a).overrides}
    t0 = time.perf_counter()
    if a.mode == "rejection":
        rb = RejectionBudget(budget)
        res = rejection_sampling(f, _untouched(f), range(1, f.n + 1), rng, rb)
        bits = tuple(res[v] for v in range(1, f.n + 1))
        report.update(outcome="sample", path="rejection", counters={"rejection_attempts": rb.attempts_used})
    else:
        p, info = _params(f, a, rng)
        if a.budget is None:
            p = p.with_overrides(budget=budget)
        report.update(params=p.to_json(), regime=p.regime, certification=info)
        if a.mode == "recursive":
            p = p.with_overrides()  # recursive path regardless of regime
            rep = Sampler(f, p).run(rng)
            if rep.outcome == "halt" and a.policy != "report_halt":
                from .pipeline import _rejection_report

                rep2 = _rejection_report(f, rng, budget, t0, rep.halt)
                rep2.counters = {**rep.counters, **rep2.counters}
                rep = rep2
        else:
            rep = sample_with_policy(f, a.eps, rng, a.policy, params=p, rejection_budget=budget)
        report.update(rep.to_json())
        bits = rep.assignment
    report["timing"] = {"wall_seconds": time.perf_counter() - t0}
    if bits is None:
        _emit(report, a, out)
        return EXIT_HALT
    if not f.is_solution(bits):
        raise AssertionError("emitted assignment does not satisfy the formula")
    out.write(_solution_line(bits) + "\n")
    _emit(report, a, out)
    return EXIT_OK


def _untouched(f):
    from .formula import PartialAssignment

    return PartialAssignment.untouched(f.n)


def cmd_count(a, out, err) -> int:
    f, spec = _load_formula(a)
    t0 = time.perf_counter()
    est = approx_count(f, a.runs_per_step, a.eps, a.seed, exact_shortcut=not a.no_exact_shortcut)
    rep = {"formula": {"n": f.n, "m": f.m, "k": f.k, "generator": spec}, "count": est.to_json()}
    if a.exact:
        rep["exact"] = count_solutions(f)
    rep["timing"] = {"wall_seconds": time.perf_counter() - t0}
    _emit(rep, a, out)
    return EXIT_OK


def cmd_check(a, out, err) -> int:
    f, spec = _load_formula(a)
    p = params_for(f, a.eps, a.xi)
    kw = {}
    for key in ("max_size",):
        if getattr(a, key) is not None:
            kw[key] = getattr(a, key)
    cp = SC.CheckParams(
        eta=Fraction(a.eta) if a.eta else Fraction(p.eta),
        D=Fraction(a.D) if a.D else Fraction(p.D),
        b=Fraction(a.b) if a.b else None,
        ell_max=a.ell_max,
        overlap=a.overlap,
        **kw,
    )
    rng = np.random.default_rng(a.seed)
    if a.property == "all":
        reports = SC.check_all(f, cp, a.mode, rng, a.trials)
    else:
        reports = [SC.check_property(f, a.property, cp, a.mode, rng, a.trials)]
    sep = construct_sep(f, None, cp.D, cp.eta) if f.k else None
    doc = {
        "formula": {"n": f.n, "m": f.m, "k": f.k, "generator": spec},
        "note": "verdicts test the predicates on this formula; they say nothing about the high-probability claims",
        "check_params": {"eta": str(cp.eta), "D": str(cp.D), "b": None if cp.b is None else str(cp.b),
                         "ell_max": cp.ell_max, "overlap": cp.overlap, "max_size": cp.max_size},
        "reports": [r.to_json() for r in reports],
        "witness_rechecks": [SC.recheck(f, r, cp) for r in reports if r.verdict == SC.VIOLATED],
        "parameter_gates": SC.parameter_gates(p),
        "separator": separator_summary(f, sep) if sep else None,
    }
    _emit(doc, a, out)
    return EXIT_OK


def _verify_chunks(f, p, sep, chunks, jobs, fn):
    def work(arg):
        size, seq = arg
        return fn(size, np.random.default_rng(seq))

    if jobs <= 1:
        return [work(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(work, chunks))


def cmd_verify(a, out, err) -> int:
    f, spec = _load_formula(a)
    t0 = time.perf_counter()
    rng = np.random.default_rng(np.random.SeedSequence(a.seed).spawn(1)[0])
    doc = {"formula": {"n": f.n, "m": f.m, "k": f.k, "generator": spec}, "mode": a.mode,
           "overrides": config_of(a).overrides, "runs": a.runs, "seed": a.seed}
    chunks = _chunk_seeds(a.seed, a.runs)
    if a.mode == "rejection":
        sols = solution_keys(f)
        handle = rejection_handle(f, a.budget if a.budget is not None else CLI_BUDGET)
        parts = _verify_chunks(f, None, None, chunks, a.jobs, lambda r, g: _hist(handle(r, g), sols))
        doc.update(_dist_summary(parts, sols))
    else:
        p, info = _params(f, a, rng)
        doc.update(params=p.to_json(), regime=p.regime, certification=info)
        sep = construct_sep(f, None, p.D, p.eta)
        if a.mode == "full":
            sols = solution_keys(f)

            def fn(r, g):
                b = Sampler(f, p, sep).run_many(r, g)
                return _hist((b.keys, b.codes), sols), int(b.depth.max(initial=0))

            res = _verify_chunks(f, p, sep, chunks, a.jobs, fn)
            doc.update(_dist_summary([h for h, _ in res], sols))
            doc["max_depth"] = max(d for _, d in res)
        else:
            res = _verify_chunks(f, p, sep, chunks, a.jobs, lambda r, g: measure_halt_rate(f, p, r, g, sep))
            by_site = {k: sum(r.by_site[k] for r in res) for k in res[0].by_site}
            halts = sum(by_site.values())
            depth: dict[int, int] = {}
            for r in res:
                for d, c in r.depth_hist.items():
                    depth[d] = depth.get(d, 0) + c
            doc.update(halt_rate=halts / a.runs, by_site=by_site,
                       depth_hist={str(d): c for d, c in sorted(depth.items())},
                       max_depth=max(r.max_depth for r in res),
                       depth_bound=None if p.s is None else p.s * p.k + 1)
            if a.plot:
                from .plotting import plot_depth_histogram

                plot_depth_histogram(depth, Path(a.plot) / "depth.png", doc["depth_bound"])
    if a.plot and a.mode != "halt":
        from .plotting import plot_solution_histogram

        counts = np.array(doc.pop("_counts"))
        plot_solution_histogram(counts, a.runs, Path(a.plot) / "solutions.png", f"verify --mode {a.mode}")
    doc.pop("_counts", None)
    doc["timing"] = {"wall_seconds": time.perf_counter() - t0}
    _emit(doc, a, out)
    return EXIT_OK


def _hist(draws, sols) -> SolutionHistogram:
    h = SolutionHistogram()
    h.add(draws[0], draws[1], set(sols.tolist()))
    return h


def _dist_summary(parts, sols) -> dict:
    from scipy.stats import chisquare

    hist = SolutionHistogram()
    for h in parts:
        hist = hist.merge(h)
    obs = np.array([hist.counts.get(int(s), 0) for s in sols], dtype=float)
    if len(sols) >= 2 and obs.sum() > 0:
        chi = chisquare(obs)
        stat, pv = float(chi.statistic), float(chi.pvalue)
    else:
        stat, pv = 0.0, 1.0
    return {
        "tv_estimate": float(tv_from_histogram(hist, sols)),
        "chi_square": stat,
        "p_value": pv,
        "halt_rate": hist.halts / hist.total,
        "noise_radius": noise_radius(hist, sols),
        "n_solutions": int(len(sols)),
        "non_solutions": hist.non_solutions,
        "_counts": obs.tolist(),
    }


def cmd_bench(a, out, err) -> int:
    try:
        ns = [int(x) for x in a.n_list.split(",") if x]
    except ValueError:
        raise UsageError("--n-list must be comma separated integers")
    rows = []
    seqs = np.random.SeedSequence(a.seed).spawn(len(ns))
    for n, seq in zip(ns, seqs):
        gen_seed, *run_seqs = seq.spawn(a.runs + 1)
        m = math.floor(a.alpha * n)
        f = generate_random_kcnf(a.k, n, m, np.random.default_rng(gen_seed))
        p, _ = _params(f, a, np.random.default_rng(run_seqs[0]))
        t = time.perf_counter()
        sep = construct_sep(f, None, p.D, p.eta)
        sep_time = time.perf_counter() - t

        def one(i, seq_i):
            t0 = time.perf_counter()
            try:
                rep = Sampler(f, p, sep).run(np.random.default_rng(seq_i))
            except KcnfError as e:
                # a failed run is a data point, not the end of the sweep
                return {
                    "n": n, "m": m, "k": a.k, "run": i, "outcome": "error", "path": type(e).__name__,
                    "halt_site": "", "wall_time": time.perf_counter() - t0, "sep_time": sep_time,
                    "v_sep": len(sep.v_sep), "tau_draws": 0, "max_depth": 0, "max_con": 0,
                    "delta": str(p.delta), "s": "inf" if p.s is None else p.s,
                }
            if rep.outcome == "halt" and a.policy != "report_halt":
                from .pipeline import _rejection_report

                rep = _rejection_report(f, np.random.default_rng(seq_i.spawn(1)[0]), CLI_BUDGET, time.perf_counter(), rep.halt)
            c = rep.counters
            return {
                "n": n, "m": m, "k": a.k, "run": i, "outcome": rep.outcome, "path": rep.path,
                "halt_site": rep.halt.location if rep.halt else "",
                "wall_time": rep.wall_time, "sep_time": sep_time, "v_sep": len(sep.v_sep),
                "tau_draws": c.get("tau_draws", 0), "max_depth": c.get("max_depth", 0),
                "max_con": c.get("max_con", 0), "delta": str(p.delta), "s": "inf" if p.s is None else p.s,
            }

        if a.jobs <= 1:
            rows += [one(i, s) for i, s in enumerate(run_seqs)]
        else:
            with ThreadPoolExecutor(max_workers=a.jobs) as ex:
                rows += list(ex.map(lambda t: one(*t), enumerate(run_seqs)))
    if a.plot:
        from .plotting import plot_scaling

        med = [float(np.median([r["wall_time"] for r in rows if r["n"] == n])) for n in ns]
        plot_scaling(ns, med, a.plot)
    if a.format == "json":
        _emit({"rows": rows}, a, out)
        return EXIT_OK
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]) if rows else ["n"], lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if a.output:
        Path(a.output).write_text(buf.getvalue())
    else:
        out.write(buf.getvalue())
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate, "sample": cmd_sample, "count": cmd_count,
    "check": cmd_check, "verify": cmd_verify, "bench": cmd_bench,
}


def run_cli(argv, out=None, err=None) -> int:
    out = out if out is not None else sys.stdout
    err = err if err is not None else sys.stderr
    try:
        a = build_parser().parse_args(argv)
        if a.cmd is None:
            raise UsageError("missing subcommand; expected one of " + ", ".join(COMMANDS))
        return COMMANDS[a.cmd](a, out, err)
    except UsageError as e:
        err.write(f"error: usage: {e}\n")
        return EXIT_USAGE
    except BudgetExhausted as e:
        err.write(f"error: budget: {e}\n")
        return EXIT_BUDGET
    except LocalUniformityViolated as e:
        err.write(f"error: local-uniformity: {e}\n")
        return EXIT_USAGE
    except (KcnfError, ValueError, OSError) as e:
        err.write(f"error: {type(e).__name__}: {e}\n")
        return EXIT_USAGE


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
