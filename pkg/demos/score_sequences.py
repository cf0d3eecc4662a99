"""Score a few proteins and look at what each sub-score responds to.

    python demos/score_sequences.py
"""

from epgf.bioscore import METRICS, bioscore

examples = {
    "lysozyme fragment": "KVFGRCELAAAMKRHGLDNYRGYSLGNWVCAAKFESNFNTQATNRNTDGSTDYGILQINSRWWCNDGRTP",
    "thioredoxin-like": "MVKQIESKTAFQEALDAAGDKLVVVDFSATWCGPCKMIKPFFHSLSEKYSNVIFLEVDVDDCQDVA",
    "poly-Q tract": "MATLEKLMKAFESLKSF" + "Q" * 30 + "PPPPPPPPPP",
    "charged block": "MEEEEEEEEEEKKKKKKKKKKDDDDDDDDD",
}

header = f"{'':<20}" + "".join(f"{m[:9]:>10}" for m in METRICS) + f"{'overall':>10}"
print(header)
for name, seq in examples.items():
    rep = bioscore(seq, tag="Trx")
    print(f"{name:<20}" + "".join(f"{rep.sub_scores[m]:>10.3f}" for m in METRICS) + f"{rep.overall:>10.3f}")

# The motif column is computed against the Trx registry: only the
# thioredoxin-like sequence carries the CGPC active site.
print()
print("untagged overall for the thioredoxin-like sequence:", round(bioscore(examples["thioredoxin-like"]).overall, 4))
