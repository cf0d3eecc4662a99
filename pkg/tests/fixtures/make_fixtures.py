"""Regenerate the committed FASTA fixtures.

    python tests/fixtures/make_fixtures.py

Output is deterministic (fixed seed), so re-running reproduces the files
byte for byte.

desk_corpus.fasta
    500 synthetic sequences with Swiss-Prot-like composition, occasional
    low-complexity stretches (homopolymer runs, dipeptide repeats, Gly/Ser
    linkers) as seen in real proteomes, and a superfamily tag per record
    with one of that family's motifs planted.
smoke_200.fasta
    The first 200 desk records, for the end-to-end CLI run.
dataset_rules.fasta
    Records probing the length and alphabet rules.
annotations.tsv
    Residue/tag pairs for the instruction builder.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

HERE = Path(__file__).parent
RESIDUES = "ACDEFGHIKLMNPQRSTVWY"
TAGS = ("SAM-MT", "TPHD", "Trx", "CheY")
MOTIFS = {
    "SAM-MT": ["VLDVGCGTG", "ILEIGSGAG", "VLDLGAGPG"],
    "TPHD": ["WAELGNAYY", "WYKLGLAYF", "WSNLGNVYK"],
    "Trx": ["WCGPCK", "WCAPCR", "FSATWCGPCKMI"],
    "CheY": ["ILIVDDDPM", "VLMVDDNPT", "ALIVDDEPV"],
}


def _background() -> np.ndarray:
    rows = (HERE.parent.parent / "src/epgf/data/swissprot_background.tsv").read_text().splitlines()
    vals = dict(line.split("\t") for line in rows if line and not line.startswith("#"))
    p = np.array([float(vals[r]) for r in RESIDUES])
    return p / p.sum()


def natural_like(rng: np.random.Generator, bg: np.ndarray, tag: str) -> str:
    n = int(rng.integers(60, 260))
    out: list[str] = []
    while len(out) < n:
        u = rng.random()
        if u < 0.012:
            out += [RESIDUES[rng.choice(20, p=bg)] if rng.random() < 0.5 else str(rng.choice(list("QEKSGPAN")))] \
                * int(rng.integers(5, 12))
        elif u < 0.018:
            pair = "".join(rng.choice(list("QPSGEKAT"), size=2))
            out += list(pair * int(rng.integers(3, 7)))
        elif u < 0.022:
            out += list("GGGGS" * int(rng.integers(1, 3)))
        else:
            out.append(RESIDUES[rng.choice(20, p=bg)])
    motif = MOTIFS[tag][int(rng.integers(len(MOTIFS[tag])))]
    at = int(rng.integers(0, max(1, n - len(motif))))
    out[at:at + len(motif)] = list(motif)
    return "M" + "".join(out[: n - 1])


def write_fasta(path: Path, records) -> None:
    with path.open("w") as fh:
        for rid, desc, seq in records:
            fh.write(f">{rid} {desc}\n" if desc else f">{rid}\n")
            for i in range(0, len(seq), 60):
                fh.write(seq[i:i + 60] + "\n")


def main() -> None:
    rng = np.random.default_rng(20240501)
    bg = _background()
    records = []
    for i in range(500):
        tag = TAGS[i % 4]
        records.append((f"desk{i:04d}", f"tag={tag}", natural_like(rng, bg, tag)))
    write_fasta(HERE / "desk_corpus.fasta", records)
    write_fasta(HERE / "smoke_200.fasta", records[:200])

    def rand_seq(n: int) -> str:
        return "M" + "".join(rng.choice(list(RESIDUES), size=n - 1))

    rules = [
        ("len255", "standard", rand_seq(255)),
        ("len256", "standard", rand_seq(256)),
        ("len511", "standard", rand_seq(511)),
        ("len512", "standard", rand_seq(512)),
        ("hasX", "nonstandard", rand_seq(40)[:20] + "X" + rand_seq(19)),
        ("hasB", "nonstandard", rand_seq(40)[:10] + "B" + rand_seq(29)),
        ("hasU", "nonstandard", rand_seq(40)[:30] + "U" + rand_seq(9)),
        ("short", "standard", rand_seq(30)),
    ]
    write_fasta(HERE / "dataset_rules.fasta", rules)

    with (HERE / "annotations.tsv").open("w") as fh:
        fh.write("# residues_or_id\ttag\n")
        for i, n in enumerate((50, 120, 255, 200)):
            fh.write(f"{rand_seq(n)}\t{TAGS[i % 4]}\n")
        fh.write("short\tCheY\n")
        fh.write(f"{rand_seq(256)}\tSAM-MT\n")
        fh.write(f"{rand_seq(300)}\tTrx\n")
        fh.write(f"{rand_seq(30)[:12]}X{rand_seq(17)}\tCheY\n")
        fh.write(f"{rand_seq(40)}\t\n")


if __name__ == "__main__":
    main()
