"""Sequence-level evaluation: identity, BioScore summaries, two-arm ablation."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence as Seq

import numpy as np

from .bioscore import METRICS, MetricReport, ScorerConfig, bioscore
from .core import Sequence, detokenize
from .errors import EmptySequence, EmptySet


def _text(s) -> str:
    return detokenize(s) if isinstance(s, Sequence) else str(s)


def lcs_length(a: str, b: str) -> int:
    """Longest common subsequence length, bit-parallel over ``a``."""
    if not a or not b:
        return 0
    masks: dict[str, int] = {}
    for i, ch in enumerate(a):
        masks[ch] = masks.get(ch, 0) | (1 << i)
    full = (1 << len(a)) - 1
    v = full
    for ch in b:
        u = v & masks.get(ch, 0)
        v = ((v + u) | (v - u)) & full
    return len(a) - bin(v).count("1")


def nw_identity(a, b) -> float:
    """Global identity with match 1, mismatch 0, gaps 0, over the longer length.

    Under that scoring the optimal global alignment score is the LCS length.
    """
    sa, sb = _text(a), _text(b)
    if not sa or not sb:
        raise EmptySequence("identity needs two non-empty sequences")
    return lcs_length(sa, sb) / max(len(sa), len(sb))


@dataclass(frozen=True)
class Summary:
    n: int
    mean: float
    sd: float
    min: float
    max: float

    @classmethod
    def of(cls, values: Seq[float]) -> "Summary":
        if not len(values):
            raise EmptySet()
        arr = np.asarray(sorted(values), dtype=float)
        mean = math.fsum(arr) / arr.size
        sd = math.sqrt(math.fsum((arr - mean) ** 2) / arr.size)
        return cls(int(arr.size), mean, sd, float(arr[0]), float(arr[-1]))


@dataclass
class ScoreSet:
    reports: list[MetricReport]
    summary: Summary
    metric_means: dict[str, float]


def score_set(sequences: Iterable, scorer: ScorerConfig | None = None, tag: str | None = None) -> ScoreSet:
    """Score every sequence; summary statistics use the population SD."""
    scorer = scorer or ScorerConfig.default()
    reports = [bioscore(s, tag, scorer) for s in sequences]
    if not reports:
        raise EmptySet()
    summary = Summary.of([r.overall for r in reports])
    means = {m: math.fsum(sorted(r.sub_scores[m] for r in reports)) / len(reports) for m in METRICS}
    return ScoreSet(reports, summary, means)


@dataclass
class AblationReport:
    arm_a: str
    arm_b: str
    mean_bioscore: dict[str, float]
    summaries: dict[str, Summary]
    metric_means: dict[str, dict[str, float]]
    relative_delta: float | None
    n: dict[str, int]
    identity_to_reference: dict[str, Summary] | None = field(default=None)

    def to_json(self) -> dict:
        d = asdict(self)
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    def table(self) -> str:
        a, b = self.arm_a, self.arm_b
        width = max(len(m) for m in (*METRICS, "overall BioScore")) + 2
        rows = [f"{'metric':<{width}}{a:>12}{b:>12}"]
        rows.append("-" * len(rows[0]))
        for m in METRICS:
            rows.append(f"{m:<{width}}{self.metric_means[a][m]:>12.4f}{self.metric_means[b][m]:>12.4f}")
        rows.append("-" * len(rows[0]))
        rows.append(f"{'overall BioScore':<{width}}{self.mean_bioscore[a]:>12.4f}{self.mean_bioscore[b]:>12.4f}")
        rows.append(f"{'sd':<{width}}{self.summaries[a].sd:>12.4f}{self.summaries[b].sd:>12.4f}")
        rows.append(f"{'n':<{width}}{self.n[a]:>12d}{self.n[b]:>12d}")
        if self.identity_to_reference:
            ia, ib = self.identity_to_reference[a], self.identity_to_reference[b]
            rows.append(f"{'max identity to ref':<{width}}{ia.mean:>12.4f}{ib.mean:>12.4f}")
        delta = "n/a" if self.relative_delta is None else f"{100 * self.relative_delta:+.2f}%"
        rows.append(f"relative delta ({a} vs {b}): {delta}")
        return "\n".join(rows) + "\n"


def _identity_summary(seqs: list[str], reference: list[str]) -> Summary:
    return Summary.of([max(nw_identity(s, r) for r in reference) for s in seqs if s])


def ablation_report(arm_a_sequences: Iterable, arm_b_sequences: Iterable, scorer: ScorerConfig | None = None,
                    tag: str | None = None, labels: tuple[str, str] = ("EPGF", "baseline"),
                    reference: Iterable | None = None) -> AblationReport:
    """Compare two arms; ``relative_delta = (mean_a - mean_b) / mean_b``."""
    a_seqs = [_text(s) for s in arm_a_sequences]
    b_seqs = [_text(s) for s in arm_b_sequences]
    if not a_seqs or not b_seqs:
        raise EmptySet("both arms need at least one sequence")
    la, lb = labels
    if la == lb:
        lb = lb + "_b"
    sa, sb = score_set(a_seqs, scorer, tag), score_set(b_seqs, scorer, tag)
    ma, mb = sa.summary.mean, sb.summary.mean
    delta = (ma - mb) / mb if mb > 0 else None
    ident = None
    if reference is not None:
        ref = [_text(r) for r in reference]
        if ref:
            ident = {la: _identity_summary(a_seqs, ref), lb: _identity_summary(b_seqs, ref)}
    return AblationReport(
        arm_a=la, arm_b=lb,
        mean_bioscore={la: ma, lb: mb},
        summaries={la: sa.summary, lb: sb.summary},
        metric_means={la: sa.metric_means, lb: sb.metric_means},
        relative_delta=delta,
        n={la: len(a_seqs), lb: len(b_seqs)},
        identity_to_reference=ident,
    )
