"""Corpus preparation: filtering, affixing and the two-task instruction set.

    python demos/prepare_datasets.py
"""

import io
from pathlib import Path

from epgf.datasets import (InstructionStats, affix_pretraining, build_instruction_records, filter_pretraining,
                           parse_fasta, read_annotations, split_train_test)

FIX = Path(__file__).parent.parent / "tests" / "fixtures"

kept, stats = filter_pretraining(parse_fasta(FIX / "dataset_rules.fasta"), max_len=512)
for rec in kept:
    print(f"{rec.id:<8} {affix_pretraining(rec)[:40]}...")
print("filter:", stats.to_dict())

stats = InstructionStats()
records = list(build_instruction_records(read_annotations(FIX / "annotations.tsv", FIX / "dataset_rules.fasta"),
                                         max_len=256, stats=stats))
print("\ninstructions:", stats.to_dict())
out = io.StringIO()
for rec in records[:2]:
    out.write(rec.to_json()[:110] + "...\n")
print(out.getvalue(), end="")

train, test = split_train_test(records, 0.9, seed=42)
print(f"split: {len(train)} train / {len(test)} test")
