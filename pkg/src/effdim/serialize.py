"""JSON forms of gales and sequence file I/O."""

from __future__ import annotations

import struct
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .bias import bias_from_json
from .errors import DomainError, StructuralError
from .fsg import FiniteStateGambler, induced_gale
from .gales import ConstantRule, CoverRule, MeasureRule, SGale, TableRule, cover_gale, mix
from .predict import predictor_from_json, to_martingale
from .util import check_bits, format_rational, parse_rational


def _num(x: Any):
    if isinstance(x, float):
        return x
    return parse_rational(x)


def gale_to_json(g: SGale) -> dict:
    rule = g.rule.to_json()
    if isinstance(g.rule, CoverRule):
        rule["s_prime"] = format_rational(getattr(g.rule, "s_prime"))
    out: dict[str, Any] = {"s": format_rational(g.s), "kind": g.kind, "rule": rule}
    if g.initial is not None:
        out["initial"] = format_rational(g.initial)
    else:
        out["log_initial"] = g.log_initial
    return out


def gale_from_json(spec: Mapping[str, Any]) -> SGale:
    """Build a gale from ``{"s", "kind", "rule": {"type": ...}}``.

    Rule types: constant, measure, cover, table, fsg, predictor, mixture.
    """
    try:
        s = _num(spec["s"])
        kind = spec.get("kind", "gale")
        rule = spec["rule"]
        kind_r = rule["type"]
    except (KeyError, TypeError) as exc:
        raise StructuralError(f"malformed gale spec: {exc}") from exc
    initial = parse_rational(spec.get("initial", 1))
    if kind_r == "constant":
        r = ConstantRule(rule["p0"], rule.get("p1"))
        return SGale(s, r, kind, initial)
    if kind_r == "measure":
        beta = bias_from_json(rule["beta"])
        return SGale(s, MeasureRule(beta), kind, initial)
    if kind_r == "table":
        r = TableRule(rule.get("bets", {}), rule.get("default", "1/2"), rule.get("depth"))
        return SGale(s, r, kind, initial)
    if kind_r == "cover":
        g = cover_gale(rule["A"], s, _num(rule["s_prime"]))
        return g if kind == "gale" else SGale(g.s, g.rule, kind, g.initial, g.log_initial)
    if kind_r == "fsg":
        return induced_gale(FiniteStateGambler.from_json(rule["fsg"]), s)
    if kind_r == "predictor":
        g = to_martingale(predictor_from_json(rule["predictor"]))
        if s != 1:
            raise DomainError("predictor martingales have s = 1")
        return g
    if kind_r == "mixture":
        parts = [gale_from_json({"s": spec["s"], "kind": kind, "rule": r}) for r in rule["components"]]
        weights = rule.get("weights")
        return mix(parts, None if weights is None else [_num(w) for w in weights])
    raise StructuralError(f"unknown rule type {kind_r!r}")


# ---------------------------------------------------------------------------
# Sequence files
# ---------------------------------------------------------------------------


def read_sequence(path: str | Path) -> str:
    """ASCII ``0``/``1`` (whitespace ignored) or, for ``.bin``, packed bits
    after an 8-byte big-endian bit count."""
    p = Path(path)
    data = p.read_bytes()
    if p.suffix == ".bin":
        if len(data) < 8:
            raise DomainError(f"{p}: truncated packed file")
        (n,) = struct.unpack(">Q", data[:8])
        bits = np.unpackbits(np.frombuffer(data[8:], dtype=np.uint8))
        if len(bits) < n:
            raise DomainError(f"{p}: header says {n} bits, file holds {len(bits)}")
        return (bits[:n] + ord("0")).astype(np.uint8).tobytes().decode()
    text = "".join(data.decode("ascii", errors="replace").split())
    return check_bits(text)


def write_sequence(path: str | Path, w: str) -> None:
    p = Path(path)
    if p.suffix == ".bin":
        bits = np.frombuffer(w.encode(), dtype=np.uint8) - ord("0")
        p.write_bytes(struct.pack(">Q", len(w)) + np.packbits(bits).tobytes())
    else:
        p.write_text(w + "\n")
