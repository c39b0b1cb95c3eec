"""Walkthrough: the evaluation metrics on hand-checkable cases.

Run with `python3 demos/04_evaluation_metrics.py`. Shows how each score
reacts to n-gram overlap, word order, length, and fragmentation, ending
with a corpus-level report.
"""

from basts.metrics import (
    corpus_bleu,
    evaluate_corpus,
    meteor_lite,
    rouge_l,
    rouge_n,
    sentence_bleu,
)


def show(label, value):
    print(f"  {label:<46s} {value:6.4f}")


ref = "close the connection if it has been idle".split()

# 1. Sentence BLEU: clipped n-gram precision with a brevity penalty.
print("sentence BLEU against:", " ".join(ref))
show("identical hypothesis", sentence_bleu(ref, ref))
show("one word wrong", sentence_bleu(
    "close the connection if it has been busy".split(), ref))
show("short prefix (brevity penalty)", sentence_bleu(
    "close the connection".split(), ref))
show("same words scrambled", sentence_bleu(
    "the if close has it been connection idle".split(), ref))
show("scrambled, smoothing off", sentence_bleu(
    "the if close has it been connection idle".split(), ref, smoothing=False))

# 2. ROUGE: recall/precision F scores over unigrams, bigrams, and the
#    longest common subsequence.
hyp = "close the idle connection".split()
print("\nROUGE of", " ".join(hyp), "against", " ".join(ref))
show("ROUGE-1", rouge_n(hyp, ref, 1))
show("ROUGE-2", rouge_n(hyp, ref, 2))
show("ROUGE-L", rouge_l(hyp, ref))

# 3. METEOR (exact-match variant): a recall-weighted harmonic mean times
#    a fragmentation penalty; scrambling costs through the chunk count.
print("\nMETEOR")
show("identical", meteor_lite(ref, ref))
show("one contiguous chunk missing a word",
     meteor_lite("close the connection".split(), ref))
show("same words, two chunks",
     meteor_lite("if it has been idle close the connection".split(), ref))

# 4. Corpus-level BLEU pools counts before taking precisions, so strong
#    and weak sentences interact differently than the sentence mean.
pairs = [
    ("set the flag".split(), "set the flag".split()),
    ("clears the store".split(), "clears and compacts the store".split()),
]
print("\ncorpus of two pairs")
show("C-BLEU (pooled counts)", corpus_bleu(pairs))
report = evaluate_corpus(pairs)
print("\nfull report, scores scaled by 100:")
for name, value in report.scaled().items():
    print(f"  {name:<10s} {value:6.2f}")
