"""Error rates and perplexity with the usual traps spelled out."""

from speechground.lm import CountLM, UniformLM, lm_perplexity
from speechground.metrics import corpus_wer, wer

# WER counts the edit operations aligning hypothesis to reference and
# divides by the reference length.
for ref, hyp in [("the cat sat", "the cat sat"),
                 ("the cat sat", "the cat"),
                 ("the cat sat", "the fat cat sat"),
                 ("a", "b c")]:
    counts, rate = wer(ref, hyp)
    print(f"  ref {ref!r:18s} hyp {hyp!r:18s} "
          f"S={counts.substitutions} D={counts.deletions} "
          f"I={counts.insertions} WER={rate:.3f}")

# Note the last pair: one substitution plus one insertion against a
# one-word reference gives WER 2.0.  The metric is a ratio, not a rate
# bounded by one.

# Corpus WER pools counts before dividing.  Averaging per-utterance
# rates would weight the two-word utterance as much as the eight-word
# one and report 0.25 instead of 0.1.
pairs = [("a b", "a c"), ("e f g h i j k l", "e f g h i j k l")]
_, pooled = corpus_wer(pairs)
averaged = sum(wer(r, h)[1] for r, h in pairs) / len(pairs)
print(f"pooled {pooled:.3f} vs averaged {averaged:.3f}")

# Perplexity is the exponential of mean negative log probability per
# token, end-of-sentence included.  A uniform model over V tokens plus
# the end event scores exactly V + 1.
uniform = UniformLM(("a", "b", "c"))
print(f"uniform over 3 tokens: PPL = {lm_perplexity(uniform, ['a b c']):.1f}")

# A bigram count model does better on text shaped like its corpus and
# worse on shuffled text.
corpus = ["a b c", "a b c", "a b", "c a b"]
lm = CountLM.from_corpus(corpus, order=2, alpha=0.5)
print(f"bigram on its corpus:   PPL = {lm_perplexity(lm, corpus):.2f}")
print(f"bigram on reversals:    PPL = "
      f"{lm_perplexity(lm, [' '.join(reversed(s.split())) for s in corpus]):.2f}")
