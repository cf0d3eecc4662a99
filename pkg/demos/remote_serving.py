"""Drive generation through the HTTP logits protocol.

    python demos/remote_serving.py

A model served on loopback is indistinguishable from the in-process one:
the same seed yields the same protein and the same trace.
"""

import time
from pathlib import Path

from epgf.core import GenerationConfig
from epgf.datasets import parse_fasta, tagged_corpus
from epgf.engine import generate
from epgf.model import train_ngram
from epgf.remote import RemoteModel, serve

FIXTURE = Path(__file__).parent.parent / "tests" / "fixtures" / "desk_corpus.fasta"
model = train_ngram(tagged_corpus(parse_fasta(FIXTURE)), order=3)
cfg = GenerationConfig(max_residues=120)

with serve(model, "127.0.0.1:0") as handle:
    client = RemoteModel(handle.url)
    print(f"serving {client.model_id} at {handle.url} (alphabet {client.alphabet.hash})")
    t0 = time.perf_counter()
    remote_seq, remote_trace = generate(client, cfg=cfg, tag="SAM-MT", seed=7)
    t_remote = time.perf_counter() - t0

t0 = time.perf_counter()
local_seq, local_trace = generate(model, cfg=cfg, tag="SAM-MT", seed=7)
t_local = time.perf_counter() - t0

print(remote_seq)
print(f"identical sequence: {remote_seq == local_seq}; identical trace: {remote_trace.dumps() == local_trace.dumps()}")
print(f"in-process {t_local * 1000:.0f} ms, loopback {t_remote * 1000:.0f} ms")
