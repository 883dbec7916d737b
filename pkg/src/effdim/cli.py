"""Command-line front end: estimate, construct, deviation, validate.

Reports are JSON with ``"schema": 1`` (or CSV where noted).  Output bytes
depend only on the command, its configuration and ``--seed``; wall time is
included only with ``--timing``.  Exit codes: 0 ok, 1 a check failed,
2 usage / parse / I-O error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .bias import (
    ConstantBias,
    bias_from_json,
    chernoff_alpha,
    deviation_tail_exact,
    deviation_tail_mc,
    sample_sequence,
)
from .compress import compression_trace
from .constructions import (
    RegularitySpec,
    build_regularity_prefix,
    ledger_csv,
    sandwich_check,
    selfsimilar_dimension,
    selfsimilar_prefix,
)
from .errors import EffdimError, ResourceError
from .fsg import FiniteStateGambler, frequency_gambler, induced_gale, success_exponent_search
from .gales import kraft_sum, validate
from .predict import (
    KTPredictor,
    bound_check,
    loss_trace,
    mixture,
    predictor_from_json,
    success_rate,
    to_martingale,
)
from .serialize import gale_from_json, read_sequence, write_sequence
from .util import all_strings, format_rational, parse_rational

SCHEMA = 1
PREDICTOR_TYPES = {"constant", "measure", "table", "context", "kt", "mixture"}


class UsageError(Exception):
    pass


def _digest(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _report(command: str, config: dict, seed: int | None, outputs: dict,
            started: float | None) -> dict:
    rep = {"schema": SCHEMA, "version": __version__, "command": command, "config": config,
           "config_digest": _digest(config), "seed": seed, "outputs": outputs}
    if started is not None:
        rep["wall_time"] = time.perf_counter() - started
    return rep


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"


def _default(x: Any):
    if isinstance(x, Fraction):
        return format_rational(x)
    raise TypeError(f"not serializable: {type(x).__name__}")


def _window(text: str | None) -> tuple[int, int] | None:
    if text is None:
        return None
    try:
        lo, hi = (int(v) for v in text.split(","))
    except ValueError as exc:
        raise UsageError(f"--window expects LO,HI, got {text!r}") from exc
    return lo, hi


def _bias(text: str):
    """A rational like ``1/4`` or a JSON schedule (inline or ``@file``)."""
    if text.startswith("@"):
        text = Path(text[1:]).read_text()
    text = text.strip()
    if text.startswith("{"):
        return bias_from_json(json.loads(text))
    return ConstantBias(parse_rational(text))


def _finite(x: float) -> float | None:
    return x if math.isfinite(x) else None


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------


def cmd_estimate(args: argparse.Namespace) -> int:
    w = read_sequence(args.input)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    bad = set(methods) - {"compress", "fsg", "predict"}
    if bad or not methods:
        raise UsageError(f"unknown methods {sorted(bad)}")
    window = _window(args.window)
    config = {"input_bits": len(w), "input_sha256": hashlib.sha256(w.encode()).hexdigest(),
              "methods": methods, "window": list(window) if window else None}
    out: dict[str, Any] = {}
    if "compress" in methods:
        tr = compression_trace(w, window=window)
        out["compress"] = {"lower": tr.ratio_lower, "upper": tr.ratio_upper,
                           "window": list(tr.window), "compressor": "lz78",
                           "note": "upper bounds on dimension / strong dimension"}
    if "fsg" in methods:
        per = []
        for order in range(args.max_order + 1):
            G = frequency_gambler(w, order)
            io_ = success_exponent_search(G, w, "io", window=window)
            ae = success_exponent_search(G, w, "ae", window=window)
            per.append({"order": order, "states": len(G.states), "io": io_.s, "ae": ae.s})
        out["fsg"] = {"lower": min(p["io"] for p in per), "upper": min(p["ae"] for p in per),
                      "window": list(io_.window), "margin_bits": io_.margin_bits, "gamblers": per}
    if "predict" in methods:
        pi = mixture([KTPredictor(k, exact=False) for k in range(args.max_order + 1)])
        lt = loss_trace(pi, w, window)
        sr = success_rate(pi, w, window)
        out["predict"] = {"lower": lt.rate_lower, "upper": lt.rate_upper, "window": list(lt.window),
                          "predictability": {"rate": float(sr.rate), "lower": sr.lower,
                                             "upper": sr.upper}}
    if len(methods) >= 2 and "predict" in out:
        p = min(max(out["predict"]["predictability"]["rate"], 0.5), 1.0)
        checks = {}
        for m in methods:
            d = min(max(out[m]["lower"], 0.0), 1.0)
            checks[m] = bound_check(p, d, args.slack).to_json()
        out["bound_check"] = checks
    rep = _report("estimate", config, None, out, time.perf_counter() if args.timing else None)
    if args.format == "csv":
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["method", "lower", "upper", "window_lo", "window_hi"])
        for m in methods:
            wr.writerow([m, repr(out[m]["lower"]), repr(out[m]["upper"]), *out[m]["window"]])
        _emit(buf.getvalue(), args.out)
    else:
        _emit(_json(rep), args.out)
    return 0


# ---------------------------------------------------------------------------
# construct
# ---------------------------------------------------------------------------


def cmd_construct(args: argparse.Namespace) -> int:
    started = time.perf_counter() if args.timing else None
    kind = args.kind
    n = args.n
    if n < 0:
        raise UsageError("--n must be >= 0")
    outputs: dict[str, Any] = {}
    ledger_text = None
    if kind == "regularity":
        if args.seed is None:
            raise UsageError("regularity construction is randomized: --seed is required")
        spec = RegularitySpec(args.alpha, args.beta, args.seed, args.schedule)
        config = {"kind": kind, "n": n, **spec.to_json()}
        w, ledger = build_regularity_prefix(spec, max(n, 1))
        w = w[:n]
        rep = sandwich_check(ledger, spec)
        outputs = {"blocks": len(ledger), "sandwich_passed": rep.passed,
                   "schedule_note": "fast schedule replaces the log* driver"
                   if spec.schedule == "fast" else None}
        ledger_text = ledger_csv(ledger)
    elif kind == "selfsimilar":
        if not args.A:
            raise UsageError("selfsimilar needs --A")
        A = [a.strip() for a in args.A.split(",")]
        config = {"kind": kind, "n": n, "A": A}
        w = selfsimilar_prefix(A, n, args.seed)
        outputs = {"dimension": selfsimilar_dimension(A),
                   "traversal": "seeded" if args.seed is not None else "round-robin"}
    elif kind == "biased":
        if args.seed is None:
            raise UsageError("biased sampling is randomized: --seed is required")
        beta = _bias(args.bias)
        config = {"kind": kind, "n": n, "bias": beta.to_json()}
        w = sample_sequence(beta, n, args.seed)
        outputs = {"ones": w.count("1")}
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(kind)
    outputs["length"] = len(w)
    outputs["sha256"] = hashlib.sha256(w.encode()).hexdigest()
    if args.out:
        write_sequence(args.out, w)
        outputs["sequence_file"] = Path(args.out).name
    if ledger_text is not None and args.ledger:
        Path(args.ledger).write_text(ledger_text)
    text = _json(_report("construct", config, args.seed, outputs, started))
    if args.report:
        Path(args.report).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# deviation
# ---------------------------------------------------------------------------


def cmd_deviation(args: argparse.Namespace) -> int:
    beta = _bias(args.bias)
    try:
        ns = [int(x) for x in args.n.split(",")]
    except ValueError as exc:
        raise UsageError(f"--n expects a comma-separated list, got {args.n!r}") from exc
    if args.trials < 0:
        raise UsageError("--trials must be >= 0")
    if args.trials > 0 and args.seed is None:
        raise UsageError("Monte-Carlo trials are randomized: --seed is required")
    lo, hi = beta.bounds
    delta = min(lo, 1 - hi)
    try:
        theta, alpha = chernoff_alpha(delta, args.eps)
    except EffdimError:
        theta = alpha = math.nan
    rows = []
    for n in ns:
        row: dict[str, Any] = {"n": n}
        try:
            row["exact"] = deviation_tail_exact(beta, n, args.eps).probability
            row["status"] = "ok"
        except ResourceError:
            row["exact"] = None
            row["status"] = "mc-only"
        if args.trials > 0:
            mc = deviation_tail_mc(beta, n, args.eps, args.trials, args.seed)
            row["mc"], row["mc_stderr"] = mc.estimate, mc.stderr
        else:
            row["mc"] = row["mc_stderr"] = None
        row["bound"] = 2 * alpha ** n if math.isfinite(alpha) else None
        rows.append(row)
    if args.format == "json":
        config = {"bias": beta.to_json(), "n": ns, "eps": args.eps, "trials": args.trials}
        out = {"theta": _finite(theta), "alpha": _finite(alpha), "delta": float(delta), "rows": rows}
        _emit(_json(_report("deviation", config, args.seed,
                            out, time.perf_counter() if args.timing else None)), args.out)
    else:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        cols = ["n", "exact", "mc", "mc_stderr", "bound", "status"]
        wr.writerow(cols)
        for r in rows:
            wr.writerow(["" if r[c] is None else (repr(r[c]) if isinstance(r[c], float) else r[c])
                         for c in cols])
        _emit(buf.getvalue(), args.out)
    return 0


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def _detect(spec: Any) -> str:
    if isinstance(spec, dict):
        if "object" in spec:
            return spec["object"]
        if "states" in spec:
            return "fsg"
        if "rule" in spec:
            return "gale"
        if spec.get("type") in PREDICTOR_TYPES:
            return "predictor"
    raise UsageError("cannot tell whether the file holds a gale, an fsg or a predictor")


def _unwrap(spec: dict, kind: str) -> dict:
    return spec.get(kind, spec) if "object" in spec else spec


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        spec = json.loads(Path(args.file).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.file}: invalid JSON ({exc})") from exc
    kind = _detect(spec)
    body = _unwrap(spec, kind)
    depth = args.depth
    checks: list[dict] = []
    if kind == "fsg":
        G = FiniteStateGambler.from_json(body)
        probs = G.problems()
        checks.append({"check": "bets sum to one", "passed": not probs, "problems": probs})
        if not probs:
            rep = validate(induced_gale(G, 1), depth)
            checks.append({"check": "induced gale condition", **rep.to_json()})
    elif kind == "gale":
        g = gale_from_json(body)
        rep = validate(g, depth)
        checks.append({"check": "gale condition", **rep.to_json()})
        k = min(depth, 4)
        kr = kraft_sum(g, list(all_strings(k)))
        checks.append({"check": f"kraft on all strings of length {k}", "passed": kr.holds,
                       "value": kr.value, "bound": kr.bound})
    elif kind == "predictor":
        pi = predictor_from_json(body)
        rep = validate(to_martingale(pi), depth)
        checks.append({"check": "predictions in [0, 1] and martingale condition", **rep.to_json()})
    else:
        raise UsageError(f"unknown object kind {kind!r}")
    passed = all(c["passed"] for c in checks)
    config = {"object": kind, "depth": depth, "spec_sha256": _digest(spec)}
    _emit(_json(_report("validate", config, None, {"passed": passed, "checks": checks},
                        time.perf_counter() if args.timing else None)), args.out)
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="effdim", description="Gale-based dimension tools")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default=None, help="write the report here instead of stdout")
        sp.add_argument("--format", choices=["json", "csv"], default="json")
        sp.add_argument("--window", default=None, help="LO,HI finite-horizon window")
        sp.add_argument("--depth", type=int, default=8)
        sp.add_argument("--timing", action="store_true", help="add wall time (breaks byte equality)")

    e = sub.add_parser("estimate", help="dimension estimates for a bit sequence")
    common(e)
    e.add_argument("input")
    e.add_argument("--methods", default="compress")
    e.add_argument("--max-order", type=int, default=2)
    e.add_argument("--slack", type=float, default=0.05)
    e.set_defaults(func=cmd_estimate)

    c = sub.add_parser("construct", help="generate a sequence prefix")
    common(c)
    c.add_argument("kind", choices=["regularity", "selfsimilar", "biased"])
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--alpha", default="1")
    c.add_argument("--beta", default="1")
    c.add_argument("--schedule", choices=["logstar", "fast"], default="logstar")
    c.add_argument("--A", default=None, help="comma-separated prefix set")
    c.add_argument("--bias", default="1/2", help="rational, JSON schedule or @file")
    c.add_argument("--ledger", default=None, help="CSV path for the block ledger")
    c.add_argument("--report", default=None, help="JSON path for the run report")
    c.set_defaults(func=cmd_construct)

    d = sub.add_parser("deviation", help="deviation tails of the self-information")
    common(d)
    d.set_defaults(format="csv")
    d.add_argument("--bias", required=True)
    d.add_argument("--n", required=True, help="comma-separated lengths")
    d.add_argument("--eps", type=float, required=True)
    d.add_argument("--trials", type=int, default=0)
    d.set_defaults(func=cmd_deviation)

    v = sub.add_parser("validate", help="check a gale, FSG or predictor file")
    common(v)
    v.add_argument("file")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, EffdimError, OSError, ValueError, KeyError) as exc:
        print(f"effdim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
