"""Segment-level generation with probabilistic-biophysical selection.

Each round samples ``N`` candidate segments from the model, keeps the
``ceil(N/2)`` most likely, scores the survivors with the biophysical
scorer, drops those under the score floor and draws one from a softmax of
the scores at temperature tau. The chosen segment is appended and tau
decays toward ``tau_final``.

Randomness is derived from one master seed: every round gets its own
sampling and selection seeds (recorded in the trace), and every candidate
in a batch gets an independent child stream. Candidates are advanced in
lockstep so a remote model can answer one batched request per step without
changing any draw.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence as Seq

import numpy as np

from .bioscore import ScorerConfig, bioscore
from .core import Alphabet, GenerationConfig, ScoreScope, Segment, Sequence, encode_residues, residues_to_str
from .errors import DegenerateModel, EmptySequence, EPGFError, ModelFailure, ScorerFailure
from .model import sample_index

STREAM_SAMPLE = 1
STREAM_SELECT = 2
STREAM_SEQUENCE = 3
STREAM_BASELINE = 4

MAX_CONSECUTIVE_FALLBACKS = 20


def derive_seed(master: int, *path: int) -> int:
    """Deterministic 63-bit sub-seed for a named position under ``master``."""
    ss = np.random.SeedSequence([master & (2**64 - 1), *path])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


@dataclass
class Candidate:
    segment: Segment
    logprob: float
    bioscore: float | None = None
    selected: bool = False
    steps: tuple[float, ...] = ()

    def to_json(self) -> dict:
        return {
            "tokens": list(self.segment.tokens),
            "residues": residues_to_str(self.segment.tokens),
            "terminal": self.segment.terminal,
            "logprob": self.logprob,
            "steps": list(self.steps),
            "bioscore": self.bioscore,
            "selected": self.selected,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Candidate":
        return cls(Segment(tuple(d["tokens"]), d["terminal"]), d["logprob"], d["bioscore"],
                   d["selected"], tuple(d.get("steps", ())))


@dataclass
class Round:
    index: int
    tau_used: float
    candidates: list[Candidate]
    retained_ids: list[int]
    selected_id: int
    fallback_used: bool
    resample_count: int
    sample_seeds: list[int]
    select_seed: int
    rejected_batches: list[list[Candidate]] = field(default_factory=list)

    @property
    def selected(self) -> Candidate:
        return self.candidates[self.selected_id]

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "tau": self.tau_used,
            "sample_seeds": self.sample_seeds,
            "select_seed": self.select_seed,
            "candidates": [c.to_json() for c in self.candidates],
            "retained_ids": self.retained_ids,
            "selected_id": self.selected_id,
            "fallback_used": self.fallback_used,
            "resample_count": self.resample_count,
            "rejected_batches": [[c.to_json() for c in b] for b in self.rejected_batches],
        }

    @classmethod
    def from_json(cls, d: dict) -> "Round":
        return cls(
            index=d["index"], tau_used=d["tau"],
            candidates=[Candidate.from_json(c) for c in d["candidates"]],
            retained_ids=list(d["retained_ids"]), selected_id=d["selected_id"],
            fallback_used=d["fallback_used"], resample_count=d["resample_count"],
            sample_seeds=list(d["sample_seeds"]), select_seed=d["select_seed"],
            rejected_batches=[[Candidate.from_json(c) for c in b] for b in d["rejected_batches"]],
        )


@dataclass
class GenerationTrace:
    seed: int
    tag: str | None
    rounds: list[Round]
    final_sequence: Sequence
    stop_reason: str  # "EOS" or "MaxLength"

    @property
    def taus(self) -> list[float]:
        return [r.tau_used for r in self.rounds]

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "tag": self.tag,
            "stop_reason": self.stop_reason,
            "sequence": str(self.final_sequence),
            "tokens": list(self.final_sequence.tokens),
            "rounds": [r.to_json() for r in self.rounds],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), separators=(",", ":"))

    @classmethod
    def from_json(cls, d: dict, alphabet: Alphabet) -> "GenerationTrace":
        return cls(d["seed"], d["tag"], [Round.from_json(r) for r in d["rounds"]],
                   Sequence(tuple(d["tokens"]), alphabet), d["stop_reason"])


# -- model access ---------------------------------------------------------------

def _batch_logprobs(model, contexts: list[tuple[int, ...]]) -> list[np.ndarray]:
    try:
        if hasattr(model, "logprobs_batch"):
            return list(model.logprobs_batch(contexts))
        return [model.logprobs(c) for c in contexts]
    except ModelFailure:
        raise
    except EPGFError as exc:
        raise ModelFailure(str(exc)) from exc


def _probs(lp: np.ndarray) -> np.ndarray:
    p = np.exp(lp)
    return p / p.sum()


def sample_candidates(model, prefix, segment_len: int, num: int, rng: np.random.Generator) -> list[Candidate]:
    """Draw ``num`` segments by ancestral sampling, each up to ``segment_len`` tokens.

    A segment stops early at EOS. Its log-probability is the sum of the
    per-token log-probabilities recorded in ``steps``.
    """
    if num < 1 or segment_len < 1:
        raise ValueError("num and segment_len must be positive")
    eos = model.alphabet.eos
    base = tuple(prefix.tokens) if isinstance(prefix, Sequence) else tuple(prefix)
    gens = rng.spawn(num)
    toks: list[list[int]] = [[] for _ in range(num)]
    steps: list[list[float]] = [[] for _ in range(num)]
    active = list(range(num))
    for _ in range(segment_len):
        rows = _batch_logprobs(model, [base + tuple(toks[j]) for j in active])
        still = []
        for j, lp in zip(active, rows):
            t = sample_index(_probs(lp), gens[j])
            toks[j].append(t)
            steps[j].append(float(lp[t]))
            if t != eos:
                still.append(j)
        active = still
        if not active:
            break
    return [
        Candidate(Segment(tuple(toks[j]), toks[j][-1] == eos), math.fsum(steps[j]), steps=tuple(steps[j]))
        for j in range(num)
    ]


def filter_keep(n: int) -> int:
    return -(-n // 2)


def probabilistic_filter(candidates: Seq[Candidate], n: int | None = None, length_normalize: bool = False) -> list[int]:
    """Indices of the ceil(N/2) most likely candidates, best first.

    Ties go to the lower candidate index.
    """
    n = len(candidates) if n is None else n
    if n != len(candidates):
        raise ValueError(f"expected {n} candidates, got {len(candidates)}")
    score = np.array([c.logprob / (len(c.segment) if length_normalize else 1) for c in candidates])
    order = np.argsort(-score, kind="stable")
    return [int(i) for i in order[:filter_keep(n)]]


def selection_probabilities(scores, tau: float) -> np.ndarray:
    """Softmax of scores / tau, shifted by the max for stability."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    b = np.asarray(scores, dtype=float)
    z = np.exp((b - b.max()) / tau)
    return z / z.sum()


def update_tau(tau: float, gamma: float, tau_final: float) -> float:
    return max(tau_final, tau * gamma)


def tau_schedule(tau0: float, gamma: float, tau_final: float, rounds: int) -> list[float]:
    """Temperatures used by rounds 0..rounds-1."""
    out, tau = [], tau0
    for _ in range(rounds):
        out.append(tau)
        tau = update_tau(tau, gamma, tau_final)
    return out


Scorer = ScorerConfig | Callable[[np.ndarray, str | None], float]


def _score_fn(scorer: Scorer | None) -> Callable[[np.ndarray, str | None], float]:
    if scorer is None:
        scorer = ScorerConfig.default()
    if isinstance(scorer, ScorerConfig):
        cfg = scorer
        return lambda ids, tag: bioscore(ids, tag, cfg).overall
    return scorer


def score_candidate(cand: Candidate, prefix_residues: Seq[int], scope: ScoreScope, score: Callable, tag) -> float:
    seg = cand.segment.residues
    ids = np.fromiter(((list(prefix_residues) + list(seg)) if scope is ScoreScope.PREFIX_PLUS_SEGMENT else seg),
                      dtype=np.int64)
    if ids.size == 0:
        return 0.0  # nothing to assess
    try:
        value = float(score(ids, tag))
    except EmptySequence:
        return 0.0
    except Exception as exc:
        raise ScorerFailure(f"scorer failed: {exc}") from exc
    if not 0.0 <= value <= 1.0:
        raise ScorerFailure(f"scorer returned {value!r} outside [0, 1]")
    return value


def choose(scores: Seq[float], floor: float, tau: float, rng: np.random.Generator) -> int | None:
    """Position (within ``scores``) of the softmax draw among scores >= floor."""
    ok = [i for i, b in enumerate(scores) if b >= floor]
    if not ok:
        return None
    p = selection_probabilities([scores[i] for i in ok], tau)
    return ok[sample_index(p, rng)]


def biophysical_select(retained: list[Candidate], prefix_residues, scorer: Scorer | None, cfg: GenerationConfig,
                       tau: float, rng: np.random.Generator, tag: str | None = None,
                       resample: Callable[[], list[Candidate]] | None = None):
    """Score, apply the floor and draw one candidate.

    When no candidate reaches the floor, ``resample`` (if given) supplies a
    fresh retained batch, up to ``cfg.fallback_rounds`` times. If every
    batch fails, the best-scoring candidate of the last batch is taken and
    the fallback flag is raised.

    Returns ``(chosen, fallback_used, resample_count)``.
    """
    if not retained:
        raise ValueError("nothing to select from")
    score = _score_fn(scorer)
    batch = retained
    resamples = 0
    while True:
        for c in batch:
            c.bioscore = score_candidate(c, prefix_residues, cfg.score_scope, score, tag)
        scores = [c.bioscore for c in batch]
        pos = choose(scores, cfg.score_floor, tau, rng)
        if pos is not None:
            return batch[pos], False, resamples
        if resample is None or resamples >= cfg.fallback_rounds:
            best = max(range(len(batch)), key=lambda i: (scores[i], -i))
            return batch[best], True, resamples
        batch = resample()
        resamples += 1


def replay_selection(rnd: Round, cfg: GenerationConfig) -> int:
    """Recompute a round's selected_id from its recorded scores, tau and seed."""
    retained = [rnd.candidates[i] for i in rnd.retained_ids]
    scores = [c.bioscore for c in retained]
    if rnd.fallback_used:
        pos = max(range(len(scores)), key=lambda i: (scores[i], -i))
    else:
        pos = choose(scores, cfg.score_floor, rnd.tau_used, np.random.default_rng(rnd.select_seed))
    return rnd.retained_ids[pos]


def _start(model, cfg: GenerationConfig, tag, prefix) -> list[int]:
    alphabet = model.alphabet
    tokens = list(alphabet.prompt(tag))
    if prefix:
        tokens += encode_residues(prefix).tolist() if isinstance(prefix, str) else list(prefix)
    return tokens


def generate(model, scorer: Scorer | None = None, cfg: GenerationConfig | None = None,
             tag: str | None = None, prefix: str | None = None, seed: int | None = None):
    """Run the full segment-selection loop; returns ``(Sequence, GenerationTrace)``."""
    cfg = cfg or GenerationConfig()
    seed = cfg.seed if seed is None else seed
    score = _score_fn(scorer)
    alphabet = model.alphabet
    tokens = _start(model, cfg, tag, prefix)
    residues = [t for t in tokens if t < 20]
    tau = cfg.tau0
    rounds: list[Round] = []
    streak = 0
    stop = None
    if len(residues) >= cfg.max_residues:
        stop = "MaxLength"
    while stop is None:
        r = len(rounds)
        seg_len = min(cfg.segment_len, cfg.max_residues - len(residues))
        batches: list[list[Candidate]] = []
        seeds: list[int] = []
        retained_of: list[list[int]] = []

        def draw() -> list[Candidate]:
            s = derive_seed(seed, STREAM_SAMPLE, r, len(batches))
            cands = sample_candidates(model, tokens, seg_len, cfg.num_candidates, np.random.default_rng(s))
            keep = probabilistic_filter(cands, cfg.num_candidates, cfg.length_normalize)
            batches.append(cands)
            seeds.append(s)
            retained_of.append(keep)
            return [cands[i] for i in keep]

        select_seed = derive_seed(seed, STREAM_SELECT, r)
        chosen, fallback, resamples = biophysical_select(
            draw(), residues, score, cfg, tau, np.random.default_rng(select_seed), tag, resample=draw)
        chosen.selected = True
        final = batches[-1]
        rounds.append(Round(
            index=r, tau_used=tau, candidates=final, retained_ids=retained_of[-1],
            selected_id=next(i for i, c in enumerate(final) if c is chosen), fallback_used=fallback, resample_count=resamples,
            sample_seeds=seeds, select_seed=select_seed, rejected_batches=batches[:-1],
        ))
        streak = streak + 1 if fallback else 0
        if streak >= MAX_CONSECUTIVE_FALLBACKS:
            raise DegenerateModel(f"{streak} consecutive rounds fell back below the score floor")
        tokens.extend(chosen.segment.tokens)
        residues.extend(chosen.segment.residues)
        tau = update_tau(tau, cfg.gamma, cfg.tau_final)
        if chosen.segment.terminal:
            stop = "EOS"
        elif len(residues) >= cfg.max_residues:
            stop = "MaxLength"
    seq = Sequence(tuple(tokens), alphabet)
    return seq, GenerationTrace(seed, tag, rounds, seq, stop)


def baseline_generate(model, cfg: GenerationConfig | None = None, tag: str | None = None,
                      prefix: str | None = None, seed: int | None = None) -> Sequence:
    """Plain ancestral sampling, no filtering or scoring; the ablation control."""
    cfg = cfg or GenerationConfig()
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(derive_seed(seed, STREAM_BASELINE))
    tokens = _start(model, cfg, tag, prefix)
    n_res = sum(1 for t in tokens if t < 20)
    eos = model.alphabet.eos
    while n_res < cfg.max_residues:
        lp = _batch_logprobs(model, [tuple(tokens)])[0]
        t = sample_index(_probs(lp), rng)
        tokens.append(t)
        if t == eos:
            break
        n_res += 1
    return Sequence(tuple(tokens), model.alphabet)


def sequence_seed(master: int, index: int) -> int:
    """Seed of the ``index``-th sequence in a multi-sequence run."""
    return derive_seed(master, STREAM_SEQUENCE, index)
