"""Train n-gram models of several orders and compare held-out perplexity.

    python demos/train_and_perplexity.py
"""

from pathlib import Path

from epgf.datasets import parse_fasta, split_train_test, tagged_corpus
from epgf.model import UniformModel, perplexity, train_ngram

FIXTURE = Path(__file__).parent.parent / "tests" / "fixtures" / "desk_corpus.fasta"

pairs = list(tagged_corpus(parse_fasta(FIXTURE)))
train, test = split_train_test(pairs, 0.9, seed=1)
held_out = [res for res, _ in test]

print(f"{len(train)} training sequences, {len(test)} held out")
print(f"uniform      perplexity {perplexity(UniformModel(), held_out):7.3f}")
for k in (1, 2, 3, 4):
    for alpha in (0.01, 0.1, 1.0):
        model = train_ngram(train, order=k, alpha=alpha)
        print(f"k={k} a={alpha:<5} perplexity {perplexity(model, held_out):7.3f}  ({len(model.counts)} contexts)")

# Higher orders overfit the small corpus quickly: counts spread over 21^(k-1)
# contexts, so most held-out contexts are unseen and fall back to uniform.
