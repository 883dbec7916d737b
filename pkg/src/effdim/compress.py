"""LZ78 compression and compression-ratio dimension estimates.

The parse splits ``w`` into phrases, each a previously seen phrase extended
by one bit; a trailing phrase may repeat an existing one.  Phrase ``j``
(1-based) costs ``ceil(log2 j) + 1`` bits: a pointer to one of the ``j``
earlier phrases (the empty phrase included) and the new bit.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

from .errors import DomainError
from .util import check_bits, resolve_window

MIN_ESTIMATE_LENGTH = 1024


def phrase_cost(j: int) -> int:
    """Bits used by the ``j``-th phrase."""
    return (j - 1).bit_length() + 1


def code_length_for(c: int) -> int:
    """``sum_{j=1..c} (ceil(log2 j) + 1)`` in closed form."""
    total = c
    # ceil(log2 j) = k for 2**(k-1) < j <= 2**k
    k = 1
    while (1 << (k - 1)) < c:
        lo, hi = (1 << (k - 1)) + 1, min(c, 1 << k)
        total += k * (hi - lo + 1)
        k += 1
    return total


@dataclass
class LZ78Result:
    bits: int
    phrases: list[tuple[int, int | None]]
    length: int

    @property
    def ratio(self) -> float:
        return self.bits / self.length if self.length else 0.0


def lz78_parse(w: str) -> list[tuple[int, int | None]]:
    """Phrases as (index of prefix phrase, appended bit); index 0 is the empty phrase.

    The last entry has bit ``None`` when the input ends inside a known phrase.
    """
    check_bits(w)
    children: dict[int, int] = {}
    phrases: list[tuple[int, int | None]] = []
    node = 0
    for ch in w:
        b = 1 if ch == "1" else 0
        key = 2 * node + b
        nxt = children.get(key)
        if nxt is None:
            phrases.append((node, b))
            children[key] = len(phrases)
            node = 0
        else:
            node = nxt
    if node:
        phrases.append((node, None))
    return phrases


def lz78_compress(w: str) -> LZ78Result:
    phrases = lz78_parse(w)
    return LZ78Result(code_length_for(len(phrases)), phrases, len(w))


def lz78_decompress(phrases: Sequence[tuple[int, int | None]]) -> str:
    table = [""]
    out = []
    for idx, bit in phrases:
        if not 0 <= idx < len(table):
            raise DomainError(f"phrase pointer {idx} out of range")
        if bit is None:
            out.append(table[idx])
            continue
        p = table[idx] + str(bit)
        table.append(p)
        out.append(p)
    return "".join(out)


def lz78_encode(w: str) -> str:
    """The actual code string whose length is ``lz78_compress(w).bits``.

    A trailing repeated phrase is sent with a filler bit; the decoder drops
    it using the known input length.
    """
    out = []
    for j, (idx, bit) in enumerate(lz78_parse(w), start=1):
        width = (j - 1).bit_length()
        if width:
            out.append(format(idx, f"0{width}b"))
        out.append("0" if bit is None else str(bit))
    return "".join(out)


def lz78_decode(code: str, n: int) -> str:
    check_bits(code)
    phrases: list[tuple[int, int | None]] = []
    pos, j = 0, 1
    while pos < len(code):
        width = (j - 1).bit_length()
        idx = int(code[pos:pos + width], 2) if width else 0
        bit = int(code[pos + width])
        phrases.append((idx, bit))
        pos += width + 1
        j += 1
    return lz78_decompress(phrases)[:n]


# ---------------------------------------------------------------------------
# Traces and estimates
# ---------------------------------------------------------------------------


def default_checkpoints(n: int, start: int = 256, ratio: float = 1.1) -> list[int]:
    """Geometric checkpoints ``start, start*1.1, ...`` (rounded, distinct) plus ``n``."""
    pts = []
    x = float(start)
    while x < n:
        m = int(round(x))
        if not pts or m > pts[-1]:
            pts.append(m)
        x *= ratio
    if n >= 1 and (not pts or pts[-1] != n):
        pts.append(n)
    return pts


@dataclass
class CompressionTrace:
    n: int
    checkpoints: list[int]
    code_lengths: list[int]
    window: tuple[int, int]
    ratio_lower: float
    ratio_upper: float

    @property
    def ratios(self) -> list[float]:
        return [b / m for m, b in zip(self.checkpoints, self.code_lengths)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["m", "bits", "ratio"])
        for m, b in zip(self.checkpoints, self.code_lengths):
            wr.writerow([m, b, repr(b / m)])
        return buf.getvalue()


def compression_trace(w: str, checkpoints: Sequence[int] | None = None,
                      window: tuple[int, int] | None = None) -> CompressionTrace:
    """LZ78 code length of ``w[:m]`` for every checkpoint ``m`` in one pass."""
    check_bits(w)
    n = len(w)
    pts = sorted(set(default_checkpoints(n) if checkpoints is None else checkpoints))
    if any(m < 1 or m > n for m in pts):
        raise DomainError("checkpoints must lie in [1, len(w)]")
    lengths = []
    children: dict[int, int] = {}
    node = 0
    phrases = 0
    bits = 0
    it = iter(pts)
    target = next(it, None)
    for i, ch in enumerate(w, start=1):
        key = 2 * node + (ch == "1")
        nxt = children.get(key)
        if nxt is None:
            phrases += 1
            bits += (phrases - 1).bit_length() + 1
            children[key] = phrases
            node = 0
        else:
            node = nxt
        if i == target:
            # a pending partial phrase is emitted as one more phrase
            lengths.append(bits + ((phrases).bit_length() + 1 if node else 0))
            target = next(it, None)
    lo, hi = resolve_window(n, window)
    in_win = [b / m for m, b in zip(pts, lengths) if lo <= m <= hi]
    if not in_win:
        raise DomainError(f"no checkpoint inside window [{lo}, {hi}]")
    return CompressionTrace(n, pts, lengths, (lo, hi), min(in_win), max(in_win))


@dataclass
class DimensionEstimate:
    lower: float
    upper: float
    window: tuple[int, int]
    method: str = "lz78"

    def to_json(self) -> dict:
        return {"method": self.method, "lower": self.lower, "upper": self.upper,
                "window": list(self.window)}


def dim_estimates(w: str, checkpoints: Sequence[int] | None = None,
                  window: tuple[int, int] | None = None) -> DimensionEstimate:
    """(min, max) of LZ78 code length per bit over the checkpoint window.

    Both numbers are upper-bound surrogates for dimension and strong dimension.
    """
    if len(w) < MIN_ESTIMATE_LENGTH:
        raise DomainError(f"dimension estimates need at least {MIN_ESTIMATE_LENGTH} bits")
    tr = compression_trace(w, checkpoints, window)
    return DimensionEstimate(tr.ratio_lower, tr.ratio_upper, tr.window)
