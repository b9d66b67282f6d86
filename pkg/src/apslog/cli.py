"""Command-line front end: predict, expand, logs, zeta, eta, verify.

Exit codes: 0 ok, 1 verification failed, 2 usage/parse, 3 grading, 4 numeric conditioning.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

import sympy as sp

from . import __version__
from . import grade_algebra as ga
from . import log_extractor as le
from . import product_resolvent as pr
from . import spectral_model as sm
from . import symfrac as sf
from . import trace_numerics as tn

log = logging.getLogger("apslog")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_GRADING, EXIT_CONDITIONING = 0, 1, 2, 3, 4

RUN_DEFAULTS = {
    "r": 0,
    "window": [1e3, 1e8],
    "samples": 48,
    "perturb": "",
    "F": None,
    "fit_template": [18, 6],
    "power_start": None,
    "log_start": None,
    "tau": 1e-6,
    "seed": 0,
    "m_max": 2,
    "sample_dps": 50,
    "fit_dps": 60,
    "cond_max": 1e34,
    "log_depth": 8,
}


class UsageError(ValueError):
    pass


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def manifest_digest(manifest: dict) -> str:
    """sha256 of the canonical JSON form of a run manifest."""
    return hashlib.sha256(canonical_json(manifest).encode()).hexdigest()


def _emit(obj, stream=None):
    stream = stream or sys.stdout
    stream.write(json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n")


def _num(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, sp.Basic):
        return str(x)
    return x


# ---------------------------------------------------------------------------
# predict / logs


def cmd_predict(args) -> int:
    try:
        out = ga.predict(args.expr, args.n)
    except ga.ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ga.GradingError as exc:
        print(f"grading error: {exc}", file=sys.stderr)
        return EXIT_GRADING
    out["expr"] = args.expr
    out["n"] = args.n
    _emit(out)
    return EXIT_OK


def _read_json(path: str):
    if path == "-":
        return json.load(sys.stdin)
    return json.loads(Path(path).read_text())


def cmd_logs(args) -> int:
    try:
        data = _read_json(args.terms)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read term list: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if isinstance(data, dict):
        terms, n = data.get("terms", []), data.get("n", args.n)
    else:
        terms, n = data, args.n
    if n is None:
        print("n missing: pass --n or put it in the input document", file=sys.stderr)
        return EXIT_USAGE
    model = None
    if args.model:
        try:
            model = sm.load_model(_read_json(args.model))
        except (OSError, ValueError, KeyError) as exc:
            print(f"bad model config: {exc}", file=sys.stderr)
            return EXIT_USAGE
    try:
        rep = le.enumerate_log_powers(terms, int(n), depth=args.depth, model=model)
    except (ValueError, KeyError, sp.SympifyError) as exc:
        print(f"bad term list: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _emit(rep.as_json())
    return EXIT_OK


# ---------------------------------------------------------------------------
# expand


def parse_perturb(text: str | None, model: sm.SpectralModel) -> pr.PerturbationSpec | None:
    """'0:p,1:q' -> P = p + x q, with tangential orders taken from the model."""
    if not text:
        return None
    orders = {t.label: t.order for t in model.tangential}
    terms = []
    for item in text.split(","):
        k, _, label = item.strip().partition(":")
        if not label or not k.strip().isdigit():
            raise UsageError(f"bad perturbation item {item!r}; expected k:label")
        label = label.strip()
        if label not in orders:
            raise UsageError(f"perturbation label {label!r} is not a tangential operator of the model")
        terms.append(pr.PerturbationTerm(int(k), label, orders[label]))
    return pr.PerturbationSpec(tuple(terms))


def resolve_run(config: dict, args) -> dict:
    run = dict(RUN_DEFAULTS)
    unknown = set(config.get("run", {})) - set(RUN_DEFAULTS)
    if unknown:
        raise UsageError(f"unknown run keys: {sorted(unknown)}")
    run.update(config.get("run", {}))
    for key in ("r", "window", "samples", "perturb", "F", "fit_template", "power_start", "log_start", "tau",
                "seed", "m_max"):
        val = getattr(args, key, None)
        if val is not None:
            run[key] = val
    run["window"] = [float(v) for v in run["window"]]
    run["fit_template"] = [int(v) for v in run["fit_template"]]
    for key in ("power_start", "log_start"):
        if run[key] is not None:
            run[key] = str(Fraction(str(run[key])))
    run["jobs"] = 1 if args.deterministic else max(1, args.jobs)
    run["deterministic"] = bool(args.deterministic)
    return run


def predicted_log_slots(model, spec, F, r: int, m_max: int, depth: int) -> set[Fraction]:
    """Log exponents the enumerator does not certify to vanish (empty for odd n)."""
    if model.dim_n % 2 == 1:
        return set()
    expr = pr.perturbed_trace_expr(spec, m_max, r)
    if F:
        expr = sp.expand(expr * sf.label_symbol(F))
    terms = pr.canonicalize_scalar(expr, spec.orders() if spec else {})
    return le.enumerate_log_powers(terms, model.dim_n, depth=depth).powers()


def locality_tags(powers, logs, slots) -> dict:
    """Tags from the predictor only: a log coefficient is local, the power beside it is not."""
    tags = {}
    for e in powers:
        tags[(e, False)] = "nonlocal" if e in slots else "local"
    for e in logs:
        tags[(e, True)] = "local" if e in slots else "zero"
    return tags


_WORKER = {}


def _worker_init(model_cfg, perturb, F, r, m_max):
    model = sm.load_model(model_cfg)
    _WORKER["setup"] = tn.TraceSetup(model, parse_perturb(perturb, model), F, r, m_max)


def _worker_samples(chunk, dps):
    import mpmath as mp

    vals = tn.trace_samples(_WORKER["setup"], chunk, dps)
    with mp.workdps(dps):
        return [mp.nstr(v, dps + 5) for v in vals]


def _samples(setup, model_cfg, run, xs):
    if run["jobs"] == 1:
        return tn.trace_samples(setup, xs, run["sample_dps"])
    import mpmath as mp

    jobs = run["jobs"]
    chunks = [xs[i::jobs] for i in range(jobs)]
    init = (model_cfg, run["perturb"], run["F"], run["r"], run["m_max"])
    with ProcessPoolExecutor(jobs, initializer=_worker_init, initargs=init) as pool:
        parts = list(pool.map(_worker_samples, chunks, [run["sample_dps"]] * jobs))
    out = [None] * len(xs)
    with mp.workdps(run["sample_dps"]):
        for i, part in enumerate(parts):
            for j, v in enumerate(part):
                out[i + j * jobs] = mp.mpf(v)
    return out


def write_csv(path: Path, series: tn.ExpansionSeries, digest: str):
    buf = io.StringIO()
    buf.write(f"# manifest: {digest}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(series.CSV_HEADER)
    w.writerows(series.rows())
    path.write_bytes(buf.getvalue().encode())


def plot_series(path: Path, series: tn.ExpansionSeries, digest: str, title: str):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    lead = abs(series.leading().coefficient) or 1.0
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for has_log, marker, label in ((False, "o", "power"), (True, "s", "log")):
        pts = [t for t in series.terms if t.has_log == has_log]
        ax.errorbar([float(t.exponent) for t in pts], [abs(t.coefficient) / lead + 1e-300 for t in pts],
                    yerr=[t.sigma / lead for t in pts], fmt=marker, ms=4, capsize=2, label=label)
    ax.axhline(series.tau, color="0.5", ls="--", lw=0.8, label=f"tau = {series.tau:g}")
    ax.set_yscale("log")
    ax.set_xlabel("exponent of (-lambda)")
    ax.set_ylabel("|coefficient| / |leading|")
    ax.set_title(title, fontsize=9)
    ax.invert_xaxis()
    ax.legend(fontsize=8)
    fig.text(0.01, 0.01, f"manifest {digest[:16]}", fontsize=6, color="0.4")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None, "Description": f"manifest {digest}"})
    plt.close(fig)


def cmd_expand(args) -> int:
    try:
        config = _read_json(args.config)
        model = sm.load_model(config)
        run = resolve_run(config, args)
        spec = parse_perturb(run["perturb"], model)
        if run["F"] is not None and run["F"] not in model.labels():
            raise UsageError(f"--F {run['F']!r} is not a tangential operator of the model")
    except (OSError, json.JSONDecodeError, sm.ModelError, UsageError, KeyError, ValueError) as exc:
        print(f"bad config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    lo, hi = run["window"]
    npow, nlog = run["fit_template"]
    if not (0 < lo < hi):
        report = {"window": [lo, hi], "reason": "window must satisfy 0 < lo < hi", "condition": None}
        print("conditioning failure: " + json.dumps(report), file=sys.stderr)
        return EXIT_CONDITIONING
    if run["samples"] < 2 * (npow + nlog):
        print(f"usage: {run['samples']} samples cannot fit {npow + nlog} coefficients (need twice as many)",
              file=sys.stderr)
        return EXIT_USAGE
    n, r = model.dim_n, int(run["r"])
    pstart = Fraction(run["power_start"]) if run["power_start"] else Fraction(n - 3, 2) - r
    lstart = Fraction(run["log_start"]) if run["log_start"] else Fraction(-r - 1)
    powers, logs = tn.half_steps(pstart, npow), tn.half_steps(lstart, nlog)
    slots = predicted_log_slots(model, spec, run["F"], r, run["m_max"], run["log_depth"])
    setup = tn.TraceSetup(model, spec, run["F"], r, run["m_max"])
    xs = tn.geometric_window(lo, hi, run["samples"])
    try:
        ys = _samples(setup, {k: v for k, v in config.items() if k != "run"}, run, xs)
        series = tn.fit_expansion(xs, ys, powers, logs, run["tau"], dps=run["fit_dps"], cond_max=run["cond_max"],
                                  locality=locality_tags(powers, logs, slots))
    except tn.ConditioningError as exc:
        print(f"conditioning failure: {exc}\n" + json.dumps(exc.report, sort_keys=True), file=sys.stderr)
        return EXIT_CONDITIONING
    except tn.DivergentSumError as exc:
        print(f"conditioning failure: {exc}", file=sys.stderr)
        return EXIT_CONDITIONING

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = ["expansion.csv"] + (["expansion.png"] if args.plot else [])
    manifest = {
        "command": "expand",
        "config_path": Path(args.config).name if args.config != "-" else "-",
        "model": {k: v for k, v in config.items() if k != "run"},
        "resolved": run,
        "seed": run["seed"],
        "tool_version": __version__,
        "outputs": outputs,
        "tolerances": {"tau": run["tau"], "cond_max": run["cond_max"], "zero_rule": "|c| <= max(tau*|lead|, 5 sigma)"},
        "fit": {"power_exponents": [str(e) for e in powers], "log_exponents": [str(e) for e in logs],
                "predicted_log_slots": sorted(str(e) for e in slots), "condition": f"{series.condition:.6e}",
                "residual": f"{series.fit_residual:.6e}"},
    }
    digest = manifest_digest(manifest)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    write_csv(out / "expansion.csv", series, digest)
    if args.plot:
        plot_series(out / "expansion.png", series, digest, f"{model.kind} n={n}, r={r}, window [{lo:g}, {hi:g}]")
    rel = series.max_relative_log()
    print(json.dumps({"manifest": digest, "outputs": [str(out / o) for o in outputs],
                      "max_relative_log": rel, "condition": series.condition}, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# zeta / eta / verify


def _zeta_like(args, which: str) -> int:
    try:
        model = sm.load_model(_read_json(args.config))
        s = complex(args.s.replace(" ", "")) if "j" in args.s else float(Fraction(args.s))
    except (OSError, json.JSONDecodeError, sm.ModelError, KeyError, ValueError) as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        res = tn.zeta_eta(model, which, s, args.F, args.method)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _emit({
        "function": which,
        "s": _num(s),
        "value": _num(res.value) if res.value is not None else None,
        "at_pole": res.at_pole,
        "method": res.method,
        "poles": [[_num(v) for v in p] for p in res.poles],
    })
    return EXIT_OK


def cmd_zeta(args) -> int:
    return _zeta_like(args, "zeta")


def cmd_eta(args) -> int:
    return _zeta_like(args, "eta")


def cmd_verify(args) -> int:
    from . import suites

    names = list(suites.SUITES) if args.suite == "all" else [args.suite]
    unknown = [nm for nm in names if nm not in suites.SUITES]
    if unknown:
        print(f"unknown suite {unknown[0]!r}; choose from {', '.join(suites.SUITES)} or all", file=sys.stderr)
        return EXIT_USAGE
    results = [suites.run_suite(nm) for nm in names]
    _emit({"suites": [r.as_json() for r in results], "passed": all(r.passed for r in results)})
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="apslog", description="Log terms in boundary resolvent and heat trace expansions.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    q = sub.add_parser("predict", help="grade an operator expression and print its trace template")
    q.add_argument("expr")
    q.add_argument("--n", type=int, default=2)
    q.set_defaults(func=cmd_predict)

    q = sub.add_parser("expand", help="sample a model trace and fit the log-aware template")
    q.add_argument("config", help="model JSON (optionally with a 'run' section), or - for stdin")
    q.add_argument("--r", type=int)
    q.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"))
    q.add_argument("--samples", type=int)
    q.add_argument("--perturb", help="commuting perturbation, e.g. '0:p,1:q'")
    q.add_argument("--F", help="tangential label multiplying the trace")
    q.add_argument("--fit-template", dest="fit_template", type=lambda s: [int(v) for v in s.split(",")],
                   metavar="NPOW,NLOG")
    q.add_argument("--power-start", dest="power_start")
    q.add_argument("--log-start", dest="log_start")
    q.add_argument("--tau", type=float)
    q.add_argument("--m-max", dest="m_max", type=int)
    q.add_argument("--seed", type=int)
    q.add_argument("--jobs", type=int, default=1)
    q.add_argument("--deterministic", action="store_true", help="sequential summation, bit-stable output")
    q.add_argument("--out", default="apslog_out")
    q.add_argument("--plot", action="store_true", help="also write expansion.png")
    q.set_defaults(func=cmd_expand)

    q = sub.add_parser("logs", help="enumerate log powers of a canonical term list")
    q.add_argument("terms", help="JSON list of {kind, l, m, j[, coeff, L]} or {n, terms}; - for stdin")
    q.add_argument("--n", type=int)
    q.add_argument("--depth", type=int, default=4)
    q.add_argument("--model", help="model JSON giving exact coefficients")
    q.set_defaults(func=cmd_logs)

    for name, fn in (("zeta", cmd_zeta), ("eta", cmd_eta)):
        q = sub.add_parser(name, help=f"{name} function of a model")
        q.add_argument("config")
        q.add_argument("--s", required=True)
        q.add_argument("--F")
        q.add_argument("--method", default="auto", choices=["auto", "mellin", "hurwitz"])
        q.set_defaults(func=fn)

    q = sub.add_parser("verify", help="run an acceptance suite")
    q.add_argument("suite")
    q.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
