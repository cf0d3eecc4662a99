"""Corpus preparation: FASTA ingestion, filtering, affixing and instruction records.

Everything here streams: records are produced one at a time and rejection
counters are filled in as the iterators are consumed.
"""

from __future__ import annotations

import io
import json
import random
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator

from .core import affix, encode_residues, strip_affix
from .errors import DataError, EmptyRecord, InvalidResidue, MalformedHeader

GENERATE_TEMPLATE = "Generate a protein sequence for the given superfamily."
DETERMINE_TEMPLATE = "Determine the superfamily of the given protein sequence."
TEMPLATES = (GENERATE_TEMPLATE, DETERMINE_TEMPLATE)


@dataclass(frozen=True)
class FastaRecord:
    id: str
    description: str
    residues: str

    def __post_init__(self):
        if not self.id:
            raise MalformedHeader(">" + self.description)


def _lines(stream) -> Iterable[str]:
    # A str is FASTA text if it looks like it, otherwise a path.
    if isinstance(stream, str) and (stream.startswith(">") or "\n" in stream or not stream):
        yield from io.StringIO(stream)
    elif isinstance(stream, (str, Path)):
        with open(stream) as fh:
            yield from fh
    else:
        yield from stream


def parse_fasta(stream) -> Iterator[FastaRecord]:
    """Yield records from FASTA text, a path, or any iterable of lines.

    Sequence lines are joined with all whitespace removed. The header is
    split into id and description at the first whitespace.
    """
    rid = desc = None
    chunks: list[str] = []
    for raw in _lines(stream):
        line = raw.rstrip("\r\n")
        if line.startswith(">"):
            if rid is not None:
                if not chunks:
                    raise EmptyRecord(rid)
                yield FastaRecord(rid, desc, "".join(chunks))
            header = line[1:]
            if not header.strip() or header[0].isspace():
                raise MalformedHeader(line)
            parts = header.split(None, 1)
            rid, desc = parts[0], (parts[1].strip() if len(parts) > 1 else "")
            chunks = []
        elif line.strip():
            if rid is None:
                raise MalformedHeader(line)
            chunks.append("".join(line.split()))
    if rid is not None:
        if not chunks:
            raise EmptyRecord(rid)
        yield FastaRecord(rid, desc, "".join(chunks))


def write_fasta(records: Iterable[tuple[str, str]], fh: IO[str], width: int = 60) -> None:
    """Write ``(header, residues)`` pairs."""
    for header, seq in records:
        fh.write(f">{header}\n")
        for i in range(0, len(seq), width):
            fh.write(seq[i:i + width] + "\n")
        if not seq:
            fh.write("\n")


@dataclass
class FilterStats:
    seen: int = 0
    kept: int = 0
    nonstandard: int = 0
    too_long: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _is_standard(residues: str) -> bool:
    try:
        encode_residues(residues)
    except (InvalidResidue, UnicodeEncodeError):
        return False
    return True


def filter_pretraining(records: Iterable[FastaRecord], max_len: int = 512) -> tuple[Iterator[FastaRecord], FilterStats]:
    """Keep records of standard residues only, strictly shorter than ``max_len``."""
    stats = FilterStats()

    def run():
        for rec in records:
            stats.seen += 1
            if not _is_standard(rec.residues):
                stats.nonstandard += 1
            elif len(rec.residues) >= max_len:
                stats.too_long += 1
            else:
                stats.kept += 1
                yield rec

    return run(), stats


def affix_pretraining(record) -> str:
    residues = record.residues if isinstance(record, FastaRecord) else str(record)
    return affix(residues)


@dataclass(frozen=True)
class InstructionRecord:
    instruction: str
    input: str
    output: str

    def __post_init__(self):
        if self.instruction not in TEMPLATES:
            raise DataError(f"unknown instruction template {self.instruction!r}")
        protein = self.output if self.instruction == GENERATE_TEMPLATE else self.input
        try:
            encode_residues(strip_affix(protein))
        except ValueError as exc:
            raise DataError(f"instruction record protein field is invalid: {exc}") from None

    @property
    def protein(self) -> str:
        return strip_affix(self.output if self.instruction == GENERATE_TEMPLATE else self.input)

    @property
    def tag(self) -> str:
        return self.input if self.instruction == GENERATE_TEMPLATE else self.output

    def to_json(self) -> str:
        return json.dumps({"instruction": self.instruction, "input": self.input, "output": self.output})


@dataclass
class InstructionStats:
    seen: int = 0
    kept: int = 0
    records: int = 0
    too_long: int = 0
    nonstandard: int = 0
    empty_tag: int = 0
    tags: Counter = field(default_factory=Counter)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tags"] = dict(sorted(self.tags.items()))
        return d


def build_instruction_records(annotated: Iterable[tuple[str, str]], max_len: int = 256,
                              stats: InstructionStats | None = None) -> Iterator[InstructionRecord]:
    """Two records per kept (residues, tag) pair: a generation and a determination task.

    Pairs with an empty tag, a non-standard residue, or length >= ``max_len``
    are skipped and counted in ``stats``.
    """
    stats = stats if stats is not None else InstructionStats()
    for residues, tag in annotated:
        stats.seen += 1
        tag = (tag or "").strip()
        if not tag:
            stats.empty_tag += 1
            continue
        if not _is_standard(residues):
            stats.nonstandard += 1
            continue
        if len(residues) >= max_len:
            stats.too_long += 1
            continue
        stats.kept += 1
        stats.tags[tag] += 1
        seq = affix(residues)
        stats.records += 2
        yield InstructionRecord(GENERATE_TEMPLATE, tag, seq)
        yield InstructionRecord(DETERMINE_TEMPLATE, seq, tag)


def read_annotations(path, fasta=None) -> Iterator[tuple[str, str]]:
    """Read a two-column TSV of (residues or record id, tag).

    When ``fasta`` is given, a first column matching a record id there is
    replaced by that record's residues.
    """
    lookup = {r.id: r.residues for r in parse_fasta(fasta)} if fasta is not None else {}
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            key, _, tag = line.partition("\t")
            key = key.strip()
            yield lookup.get(key, key), tag


def split_train_test(records, train_fraction: float = 0.9, seed: int = 42) -> tuple[list, list]:
    """Seeded shuffle, then the first ``round(fraction * n)`` items go to train."""
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction!r}")
    items = list(records)
    order = list(range(len(items)))
    random.Random(seed).shuffle(order)
    cut = round(train_fraction * len(items))
    return [items[i] for i in order[:cut]], [items[i] for i in order[cut:]]


def read_instructions(path) -> Iterator[InstructionRecord]:
    with open(path) as fh:
        for line in fh:
            if line.strip():
                d = json.loads(line)
                yield InstructionRecord(d["instruction"], d["input"], d["output"])


def tagged_corpus(records: Iterable[FastaRecord], tag_key: str = "tag") -> Iterator[tuple[str, str | None]]:
    """(residues, tag) pairs, reading ``tag=...`` from FASTA descriptions."""
    prefix = tag_key + "="
    for rec in records:
        tag = None
        for tok in rec.description.split():
            if tok.startswith(prefix):
                tag = tok[len(prefix):] or None
        yield rec.residues, tag
