"""Words over the alphabet {1, ..., N}, eventually periodic infinite words and
Bernoulli weights on cylinders.

Symbols are 1-based in every public function.  Array views handed to the
numeric kernels are 0-based.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

Word = tuple  # finite word: tuple of ints in 1..N

ENUMERATION_CAP = 10**8
DEFAULT_TAIL = (1,)


class EnumerationCapError(ValueError):
    def __init__(self, count: int, cap: int):
        self.count = count
        self.cap = cap
        super().__init__(f"enumeration of {count} words exceeds the cap of {cap}")


def check_cap(n_symbols: int, n: int, cap: int = ENUMERATION_CAP) -> int:
    count = n_symbols**n
    if count > cap:
        raise EnumerationCapError(count, cap)
    return count


def as_word(symbols: Sequence[int], n_symbols: int | None = None) -> Word:
    w = tuple(int(s) for s in symbols)
    if n_symbols is not None:
        bad = [s for s in w if not 1 <= s <= n_symbols]
        if bad:
            raise ValueError(f"symbol {bad[0]} outside 1..{n_symbols}")
    return w


@dataclass(frozen=True)
class TailedWord:
    """Infinite word ``prefix tail tail tail ...``."""

    prefix: Word = ()
    tail: Word = DEFAULT_TAIL

    def __post_init__(self):
        object.__setattr__(self, "prefix", as_word(self.prefix))
        object.__setattr__(self, "tail", as_word(self.tail))
        if not self.tail:
            raise ValueError("tail must be non-empty")
        if any(s < 1 for s in self.prefix + self.tail):
            raise ValueError("symbols are 1-based")

    def symbol(self, k: int) -> int:
        """The symbol at 0-based position ``k``."""
        if k < len(self.prefix):
            return self.prefix[k]
        return self.tail[(k - len(self.prefix)) % len(self.tail)]

    def first(self, n: int) -> Word:
        return tuple(self.symbol(k) for k in range(n))

    def indices(self, n: int) -> np.ndarray:
        """First ``n`` symbols as a 0-based int array."""
        p = np.asarray(self.prefix, dtype=np.int64) - 1
        if n <= len(p):
            return p[:n].copy()
        t = np.asarray(self.tail, dtype=np.int64) - 1
        reps = -(-(n - len(p)) // len(t))
        return np.concatenate([p, np.tile(t, reps)])[:n]

    def shift(self, k: int = 1) -> "TailedWord":
        if k <= len(self.prefix):
            return TailedWord(self.prefix[k:], self.tail)
        r = (k - len(self.prefix)) % len(self.tail)
        return TailedWord((), self.tail[r:] + self.tail[:r])

    def max_symbol(self) -> int:
        return max(self.prefix + self.tail)


@dataclass(frozen=True)
class BernoulliWeights:
    p: tuple

    def __post_init__(self):
        p = tuple(float(v) for v in self.p)
        if not p or any(v < 0 or not math.isfinite(v) for v in p):
            raise ValueError("weights must be finite and non-negative")
        if abs(math.fsum(p) - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {math.fsum(p)!r}, not 1")
        object.__setattr__(self, "p", p)

    @classmethod
    def uniform(cls, n: int) -> "BernoulliWeights":
        return cls((1.0 / n,) * n)

    @property
    def n_symbols(self) -> int:
        return len(self.p)

    def array(self) -> np.ndarray:
        return np.asarray(self.p)


def common_prefix(i: TailedWord, j: TailedWord, max_depth: int) -> tuple[Word, bool]:
    """Longest common prefix, cut at ``max_depth``; the flag reports the cut."""
    if max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    out = []
    for k in range(max_depth):
        a = i.symbol(k)
        if a != j.symbol(k):
            return tuple(out), False
        out.append(a)
    return tuple(out), True


def reverse(w: Sequence[int]) -> Word:
    return tuple(reversed(tuple(w)))


def cylinder_mass(p: BernoulliWeights, w: Sequence[int]) -> float:
    m = 1.0
    for s in w:
        m *= p.p[s - 1]
    return m


def enumerate_words(n: int, n_symbols: int, cap: int = ENUMERATION_CAP) -> Iterator[Word]:
    """All words of length ``n`` in lexicographic order."""
    if n < 0:
        raise ValueError("n must be non-negative")
    check_cap(n_symbols, n, cap)
    return itertools.product(range(1, n_symbols + 1), repeat=n)


def all_words_array(n: int, n_symbols: int, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Lexicographic ``(N**n, n)`` array of 0-based symbols."""
    count = check_cap(n_symbols, n, cap)
    idx = np.arange(count, dtype=np.int64)
    out = np.empty((count, n), dtype=np.int64)
    for k in range(n - 1, -1, -1):
        out[:, k] = idx % n_symbols
        idx //= n_symbols
    return out


# --------------------------------------------------------------------------
# serialization


def format_word(w: Sequence[int], n_symbols: int) -> str:
    if n_symbols <= 9:
        return "".join(str(s) for s in w)
    return ",".join(str(s) for s in w)


def parse_word(text: str, n_symbols: int) -> Word:
    text = text.strip()
    if not text:
        return ()
    if n_symbols <= 9 and "," not in text:
        parts = list(text)
    else:
        parts = [p for p in text.split(",") if p.strip()]
    try:
        return as_word((int(p) for p in parts), n_symbols)
    except ValueError as exc:
        raise ValueError(f"bad word {text!r}: {exc}") from None


def format_tailed(w: TailedWord, n_symbols: int) -> str:
    return f"{format_word(w.prefix, n_symbols)}:({format_word(w.tail, n_symbols)})"


def parse_tailed(text: str, n_symbols: int) -> TailedWord:
    """Read ``prefix:(tail)``; a bare prefix gets the default tail."""
    text = text.strip()
    if ":" not in text:
        return TailedWord(parse_word(text, n_symbols), DEFAULT_TAIL)
    head, _, tail = text.partition(":")
    tail = tail.strip()
    if not (tail.startswith("(") and tail.endswith(")")):
        raise ValueError(f"bad tailed word {text!r}: tail must be parenthesized")
    return TailedWord(parse_word(head, n_symbols), parse_word(tail[1:-1], n_symbols))


def random_tailed_words(rng: np.random.Generator, count: int, n_symbols: int, length: int,
                        p: BernoulliWeights | None = None) -> list[TailedWord]:
    """Random words with an i.i.d. prefix of ``length`` symbols and the default tail."""
    probs = None if p is None else p.array()
    arr = rng.choice(n_symbols, size=(count, length), p=probs) + 1
    return [TailedWord(tuple(int(s) for s in row), DEFAULT_TAIL) for row in arr]
