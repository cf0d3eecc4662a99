"""Alphabet, sequence and configuration types shared across the package.

Tokenization is one token per residue. Token ids are laid out densely:
the 20 residues first (0-19), then the control tokens BOS, EOS, SEP, then
one token per registered condition tag, in registration order.
"""

from __future__ import annotations

import enum
import hashlib
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence as Seq

import numpy as np

from .errors import ConfigError, InvalidResidue, InvalidToken

RESIDUES = "ACDEFGHIKLMNPQRSTVWY"
SPECIALS = ("<bos>", "<eos>", "<sep>")

# Corpus serialization affixes. Stand-ins: the exact strings used for the
# original corpus were never published.
PREFIX = "Seq=<"
SUFFIX = ">"

_NON_STANDARD = re.compile(f"[^{RESIDUES}]")
_RESIDUE_LUT = np.full(256, -1, dtype=np.int16)
for _i, _c in enumerate(RESIDUES):
    _RESIDUE_LUT[ord(_c)] = _i


@dataclass(frozen=True)
class Alphabet:
    residues: tuple[str, ...] = tuple(RESIDUES)
    specials: tuple[str, ...] = SPECIALS
    condition_tokens: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "residues", tuple(self.residues))
        object.__setattr__(self, "specials", tuple(self.specials))
        object.__setattr__(self, "condition_tokens", tuple(self.condition_tokens))
        if len(self.residues) != 20 or len(set(self.residues)) != 20:
            raise ConfigError("alphabet needs exactly 20 distinct residues")
        if any(len(r) != 1 or not r.isupper() for r in self.residues):
            raise ConfigError("residues must be single uppercase letters")
        if len(self.specials) != 3 or len(set(self.specials)) != 3:
            raise ConfigError("specials must be (BOS, EOS, SEP)")
        if set(self.specials) & set(self.residues):
            raise ConfigError("specials overlap residues")
        tags = self.condition_tokens
        if len(set(tags)) != len(tags):
            raise ConfigError("duplicate condition tokens")
        if any(not t for t in tags):
            raise ConfigError("empty condition token")
        if set(tags) & (set(self.residues) | set(self.specials)):
            raise ConfigError("condition tokens overlap residues or specials")

    @classmethod
    def with_tags(cls, tags: Iterable[str]) -> "Alphabet":
        seen: dict[str, None] = {}
        for t in tags:
            if t:
                seen.setdefault(t, None)
        return cls(condition_tokens=tuple(seen))

    @property
    def size(self) -> int:
        return 23 + len(self.condition_tokens)

    @property
    def bos(self) -> int:
        return 20

    @property
    def eos(self) -> int:
        return 21

    @property
    def sep(self) -> int:
        return 22

    @property
    def emittable(self) -> np.ndarray:
        """Boolean mask of tokens a model may emit: residues and EOS."""
        mask = np.zeros(self.size, dtype=bool)
        mask[:20] = True
        mask[self.eos] = True
        return mask

    @cached_property
    def labels(self) -> tuple[str, ...]:
        return self.residues + self.specials + tuple(f"<{t}>" for t in self.condition_tokens)

    @cached_property
    def hash(self) -> str:
        return hashlib.sha256("\n".join(self.labels).encode()).hexdigest()[:16]

    @cached_property
    def _tag_ids(self) -> dict[str, int]:
        return {t: 23 + i for i, t in enumerate(self.condition_tokens)}

    def condition_id(self, tag: str) -> int:
        try:
            return self._tag_ids[tag]
        except KeyError:
            raise ConfigError(f"unknown condition tag {tag!r}") from None

    def tag_of(self, token: int) -> str | None:
        if token >= 23:
            return self.condition_tokens[token - 23]
        return None

    def is_residue(self, token: int) -> bool:
        return 0 <= token < 20

    def prompt(self, tag: str | None = None) -> tuple[int, ...]:
        """Start-of-sequence tokens: BOS, then the condition token if any."""
        if tag is None:
            return (self.bos,)
        return (self.bos, self.condition_id(tag))


@dataclass(frozen=True)
class Sequence:
    tokens: tuple[int, ...]
    alphabet: Alphabet = field(default_factory=Alphabet, repr=False, compare=False)

    def __post_init__(self):
        toks = tuple(int(t) for t in self.tokens)
        object.__setattr__(self, "tokens", toks)
        a = self.alphabet
        for i, t in enumerate(toks):
            if not 0 <= t < a.size or t == a.sep:
                raise InvalidToken(f"token {t} at position {i} is not valid here")
            if t == a.bos and i != 0:
                raise InvalidToken("BOS allowed only at position 0")
            if t == a.eos and i != len(toks) - 1:
                raise InvalidToken("EOS allowed only at the last position")

    @property
    def residue_len(self) -> int:
        return sum(1 for t in self.tokens if t < 20)

    @property
    def residue_ids(self) -> np.ndarray:
        arr = np.fromiter(self.tokens, dtype=np.int64, count=len(self.tokens))
        return arr[arr < 20]

    @property
    def terminated(self) -> bool:
        return bool(self.tokens) and self.tokens[-1] == self.alphabet.eos

    @property
    def tag(self) -> str | None:
        for t in self.tokens:
            if t >= 23:
                return self.alphabet.tag_of(t)
        return None

    def __len__(self) -> int:
        return len(self.tokens)

    def __str__(self) -> str:
        return detokenize(self, self.alphabet)


@dataclass(frozen=True)
class Segment:
    """A run of generated tokens; ``terminal`` is set when it ends in EOS."""

    tokens: tuple[int, ...]
    terminal: bool = False

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))
        if not self.tokens:
            raise ConfigError("segment must hold at least one token")

    @property
    def residues(self) -> tuple[int, ...]:
        return tuple(t for t in self.tokens if t < 20)

    def __len__(self) -> int:
        return len(self.tokens)


def encode_residues(text: str) -> np.ndarray:
    """Residue string to an int array of residue ids, validating as it goes."""
    m = _NON_STANDARD.search(text)
    if m is not None:
        raise InvalidResidue(m.start(), m.group())
    return _RESIDUE_LUT[np.frombuffer(text.encode("ascii"), dtype=np.uint8)].astype(np.int64)


def validate_sequence(text: str, alphabet: Alphabet | None = None) -> Sequence:
    """Parse a raw residue string into a :class:`Sequence`.

    Only the 20 standard uppercase letters are accepted. Lowercase, ambiguity
    codes (X, B, Z, U, O), gaps and whitespace raise :class:`InvalidResidue`
    with the offending position; nothing is coerced.
    """
    alphabet = alphabet or Alphabet()
    return Sequence(tuple(encode_residues(text).tolist()), alphabet)


def detokenize(seq: Sequence, alphabet: Alphabet | None = None) -> str:
    alphabet = alphabet or seq.alphabet
    return "".join(alphabet.residues[t] for t in seq.tokens if t < 20)


def residues_to_str(tokens: Iterable[int]) -> str:
    return "".join(RESIDUES[t] for t in tokens if t < 20)


def make_sequence(
    residues: str | Seq[int],
    alphabet: Alphabet,
    tag: str | None = None,
    bos: bool = True,
    eos: bool = False,
) -> Sequence:
    body = encode_residues(residues).tolist() if isinstance(residues, str) else list(residues)
    head = list(alphabet.prompt(tag)) if bos else ([alphabet.condition_id(tag)] if tag else [])
    tail = [alphabet.eos] if eos else []
    return Sequence(tuple(head + body + tail), alphabet)


class ScoreScope(str, enum.Enum):
    SEGMENT_ONLY = "segment"
    PREFIX_PLUS_SEGMENT = "prefix"


@dataclass(frozen=True)
class GenerationConfig:
    num_candidates: int = 8
    segment_len: int = 20
    tau0: float = 1.0
    tau_final: float = 1.0
    gamma: float = 0.1
    score_floor: float = 0.55
    max_residues: int = 511
    seed: int = 42
    fallback_rounds: int = 3
    score_scope: ScoreScope = ScoreScope.PREFIX_PLUS_SEGMENT
    length_normalize: bool = False

    def __post_init__(self):
        object.__setattr__(self, "score_scope", ScoreScope(self.score_scope))
        _check_int(self, "num_candidates", 2)
        _check_int(self, "segment_len", 1)
        _check_int(self, "max_residues", 1)
        _check_int(self, "fallback_rounds", 0)
        for name in ("tau0", "tau_final"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be a positive finite number, got {v!r}")
        if self.tau_final > self.tau0:
            raise ConfigError(f"tau_final ({self.tau_final}) must not exceed tau0 ({self.tau0})")
        if not 0 < self.gamma <= 1:
            raise ConfigError(f"gamma must lie in (0, 1], got {self.gamma!r}")
        if not 0 <= self.score_floor <= 1:
            raise ConfigError(f"score_floor must lie in [0, 1], got {self.score_floor!r}")
        if not isinstance(self.seed, int) or not -(2**63) <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit integer, got {self.seed!r}")

    @property
    def keep(self) -> int:
        """Candidates retained by the probability filter: ceil(N / 2)."""
        return -(-self.num_candidates // 2)


def _check_int(cfg, name: str, lo: int) -> None:
    v = getattr(cfg, name)
    if isinstance(v, bool) or not isinstance(v, int) or v < lo:
        raise ConfigError(f"{name} must be an integer >= {lo}, got {v!r}")


def affix(residues: str) -> str:
    return f"{PREFIX}{residues}{SUFFIX}"


def strip_affix(line: str) -> str:
    if not (line.startswith(PREFIX) and line.endswith(SUFFIX)):
        raise ValueError(f"line is not affixed: {line[:40]!r}")
    return line[len(PREFIX) : len(line) - len(SUFFIX)]
