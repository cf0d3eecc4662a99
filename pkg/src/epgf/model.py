"""Autoregressive sequence-model contract and the n-gram baseline.

Any object exposing ``alphabet``, ``model_id``, ``order`` and
``logprobs(context) -> ndarray`` can drive generation. Log-probabilities
are the primitive: the distribution handed to the sampler is always
rebuilt from them the same way, so in-process and remote models that agree
on log-probabilities produce bit-identical samples.
"""

from __future__ import annotations

import hashlib
import io
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence as Seq, runtime_checkable

import numpy as np

from .core import Alphabet, Sequence, encode_residues
from .errors import ConfigError, DataError, EmptyCorpus, OrderTooLarge

MAX_ORDER = 8
FORMAT_HEADER = "# epgf-ngram v1"


@runtime_checkable
class LanguageModel(Protocol):
    alphabet: Alphabet
    model_id: str
    order: int

    def logprobs(self, context: Seq[int]) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class TokenDistribution:
    """Next-token distribution over the full token-id space."""

    probs: np.ndarray
    logprobs: np.ndarray

    def __post_init__(self):
        if self.probs.ndim != 1 or np.any(self.probs < 0) or abs(self.probs.sum() - 1.0) > 1e-9:
            raise DataError("token distribution must be non-negative and sum to 1")

    @classmethod
    def from_logprobs(cls, logprobs) -> "TokenDistribution":
        lp = np.asarray(logprobs, dtype=np.float64)
        if lp.ndim != 1 or np.any(np.isnan(lp)) or np.any(lp == np.inf):
            raise DataError("log-probabilities must be a vector of finite values or -inf")
        p = np.exp(lp)
        total = p.sum()
        if not total > 0:
            raise DataError("distribution has no mass")
        return cls(p / total, lp)

    def sample(self, rng: np.random.Generator) -> int:
        return sample_index(self.probs, rng)

    @property
    def argmax(self) -> int:
        return int(np.argmax(self.probs))


def sample_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw using a single uniform from ``rng``."""
    cdf = np.cumsum(probs)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    if idx >= probs.size:
        idx = int(np.flatnonzero(probs)[-1])
    return idx


def _context_tokens(context, alphabet: Alphabet) -> tuple[int, ...]:
    toks = tuple(context.tokens) if isinstance(context, Sequence) else tuple(int(t) for t in context)
    if not toks or toks[0] != alphabet.bos:
        toks = (alphabet.bos,) + toks
    if len(toks) > 1 and toks[-1] == alphabet.eos:
        raise DataError("cannot condition on a context that already ended")
    return toks


class UniformModel:
    """Uniform over residues and EOS; the smoothing-only limit of every n-gram."""

    order = 1

    def __init__(self, alphabet: Alphabet | None = None):
        self.alphabet = alphabet or Alphabet()
        self.model_id = f"uniform-{self.alphabet.hash}"
        mask = self.alphabet.emittable
        lp = np.full(self.alphabet.size, -np.inf)
        lp[mask] = -math.log(mask.sum())
        lp.setflags(write=False)
        self._lp = lp

    def logprobs(self, context) -> np.ndarray:
        return self._lp


class NgramModel:
    """Add-alpha smoothed n-gram over residue tokens.

    ``counts`` maps a context (the last ``order - 1`` tokens of the
    BOS-padded history) to a count vector over the token space. Condition
    tags sit right after BOS, so they shape the first ``order - 1`` steps.
    """

    def __init__(self, order: int, alpha: float, alphabet: Alphabet, counts: dict[tuple, np.ndarray]):
        if isinstance(order, bool) or not isinstance(order, int) or order < 1:
            raise ConfigError(f"order must be a positive integer, got {order!r}")
        if order > MAX_ORDER:
            raise OrderTooLarge(f"order {order} exceeds the maximum of {MAX_ORDER}")
        if not (alpha > 0 and math.isfinite(alpha)):
            raise ConfigError(f"alpha must be positive, got {alpha!r}")
        self.order = order
        self.alpha = float(alpha)
        self.alphabet = alphabet
        self.counts = {k: v for k, v in counts.items()}
        mask = alphabet.emittable
        self._mask = mask
        n_emit = int(mask.sum())
        self._unseen = np.where(mask, -math.log(n_emit), -np.inf)
        self._unseen.setflags(write=False)
        self._lp: dict[tuple, np.ndarray] = {}
        with np.errstate(divide="ignore"):
            for key, c in self.counts.items():
                p = np.where(mask, c + self.alpha, 0.0) / (c[mask].sum() + self.alpha * n_emit)
                lp = np.log(p)
                lp.setflags(write=False)
                self._lp[key] = lp
        self.model_id = f"ngram-k{order}-{self.digest()}"

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.order}|{self.alpha!r}|{self.alphabet.hash}".encode())
        for key in sorted(self.counts):
            h.update(repr(key).encode())
            h.update(self.counts[key].astype(np.int64).tobytes())
        return h.hexdigest()[:12]

    def context_key(self, context) -> tuple[int, ...]:
        if self.order == 1:
            return ()
        toks = _context_tokens(context, self.alphabet)
        pad = (self.alphabet.bos,) * (self.order - 2)
        return (pad + toks)[-(self.order - 1):]

    def logprobs(self, context) -> np.ndarray:
        return self._lp.get(self.context_key(context), self._unseen)

    def __eq__(self, other):
        if not isinstance(other, NgramModel):
            return NotImplemented
        return (
            self.order == other.order
            and self.alpha == other.alpha
            and self.alphabet == other.alphabet
            and self.counts.keys() == other.counts.keys()
            and all(np.array_equal(v, other.counts[k]) for k, v in self.counts.items())
        )

    # -- persistence -------------------------------------------------------

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    def dumps(self) -> str:
        out = io.StringIO()
        out.write(FORMAT_HEADER + "\n")
        out.write(f"order\t{self.order}\n")
        out.write(f"alpha\t{self.alpha!r}\n")
        out.write(f"alphabet\t{self.alphabet.hash}\n")
        out.write("tags\t" + "\t".join(self.alphabet.condition_tokens) + "\n")
        out.write("counts\n")
        for key in sorted(self.counts):
            c = self.counts[key]
            ctx = " ".join(map(str, key)) if key else "-"
            body = " ".join(f"{t}:{int(c[t])}" for t in np.flatnonzero(c))
            out.write(f"{ctx}\t{body}\n")
        return out.getvalue()

    @classmethod
    def load(cls, path) -> "NgramModel":
        return cls.loads(Path(path).read_text())

    @classmethod
    def loads(cls, text: str) -> "NgramModel":
        lines = text.splitlines()
        if not lines or lines[0].strip() != FORMAT_HEADER:
            raise DataError("not an epgf n-gram model file")
        meta: dict[str, list[str]] = {}
        i = 1
        while i < len(lines) and lines[i] != "counts":
            parts = lines[i].split("\t")
            meta[parts[0]] = parts[1:]
            i += 1
        try:
            order = int(meta["order"][0])
            alpha = float(meta["alpha"][0])
            expected_hash = meta["alphabet"][0]
        except (KeyError, IndexError, ValueError) as exc:
            raise DataError(f"model header incomplete: {exc}") from None
        alphabet = Alphabet.with_tags(t for t in meta.get("tags", []) if t)
        if alphabet.hash != expected_hash:
            raise DataError("model alphabet hash does not match its tag list")
        counts: dict[tuple, np.ndarray] = {}
        for line in lines[i + 1:]:
            if not line.strip():
                continue
            ctx, _, body = line.partition("\t")
            key = () if ctx == "-" else tuple(int(t) for t in ctx.split())
            vec = np.zeros(alphabet.size, dtype=np.int64)
            for item in body.split():
                t, c = item.split(":")
                vec[int(t)] = int(c)
            counts[key] = vec
        return cls(order, alpha, alphabet, counts)


def _corpus_items(corpus, alphabet: Alphabet | None):
    """Normalize corpus entries to (residue id list, tag) and pick an alphabet."""
    items = []
    for entry in corpus:
        if isinstance(entry, Sequence):
            items.append((entry.residue_ids.tolist(), entry.tag))
            if alphabet is None:
                alphabet = entry.alphabet
        elif isinstance(entry, str):
            items.append((encode_residues(entry).tolist(), None))
        else:
            res, tag = entry
            ids = encode_residues(res).tolist() if isinstance(res, str) else list(res)
            items.append((ids, tag or None))
    if alphabet is None:
        alphabet = Alphabet.with_tags(t for _, t in items if t)
    return items, alphabet


def train_ngram(corpus: Iterable, order: int = 3, alpha: float = 0.1, alphabet: Alphabet | None = None) -> NgramModel:
    """Count n-gram events over BOS-padded, EOS-terminated token streams.

    ``corpus`` holds :class:`Sequence` objects, residue strings, or
    ``(residues, tag)`` pairs.
    """
    if order > MAX_ORDER:
        raise OrderTooLarge(f"order {order} exceeds the maximum of {MAX_ORDER}")
    items, alphabet = _corpus_items(corpus, alphabet)
    if not items:
        raise EmptyCorpus()
    ctx_len = order - 1
    pad = (alphabet.bos,) * max(ctx_len - 1, 0)
    counts: dict[tuple, np.ndarray] = defaultdict(lambda: np.zeros(alphabet.size, dtype=np.int64))
    for ids, tag in items:
        head = pad + alphabet.prompt(tag)
        stream = head + tuple(ids) + (alphabet.eos,)
        for i in range(len(head), len(stream)):
            key = stream[i - ctx_len:i] if ctx_len else ()
            counts[key][stream[i]] += 1
    return NgramModel(order, alpha, alphabet, dict(counts))


def next_distribution(model, context) -> TokenDistribution:
    toks = _context_tokens(context, model.alphabet)
    return TokenDistribution.from_logprobs(model.logprobs(toks))


def _steps(seq, alphabet: Alphabet) -> tuple[tuple[int, ...], list[int]]:
    """Split a sequence into its conditioning prompt and the tokens to predict."""
    if isinstance(seq, str):
        seq = Sequence(tuple(encode_residues(seq).tolist()), alphabet)
    toks = list(seq.tokens)
    if not toks or toks[0] != alphabet.bos:
        toks.insert(0, alphabet.bos)
    head = 1
    while head < len(toks) and toks[head] >= 23:
        head += 1
    body = [t for t in toks[head:] if t != alphabet.eos]
    return tuple(toks[:head]), body + [alphabet.eos]


def sequence_logprob(model, seq) -> float:
    """Sum of log p(x_i | x_<i) over residues and the closing EOS."""
    total, _ = _logprob_and_steps(model, seq)
    return total


def _logprob_and_steps(model, seq) -> tuple[float, int]:
    prompt, targets = _steps(seq, model.alphabet)
    ctx = list(prompt)
    terms = []
    for t in targets:
        terms.append(float(model.logprobs(tuple(ctx))[t]))
        ctx.append(t)
    return math.fsum(terms), len(targets)


def perplexity(model, corpus: Iterable) -> float:
    """exp of the mean negative log-likelihood per prediction step."""
    total, steps = [], 0
    for seq in corpus:
        lp, n = _logprob_and_steps(model, seq)
        total.append(lp)
        steps += n
    if steps == 0:
        raise EmptyCorpus()
    return math.exp(-math.fsum(total) / steps)
