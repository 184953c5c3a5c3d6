"""Alignment-free sequence probabilities on a posteriorgram you can read."""

import itertools
import math

import numpy as np

from speechground.ctc import (Posteriorgram, Vocabulary, bruteforce_distribution,
                              collapse, ctc_forward, ctc_loss,
                              ctc_prefix_logprob)

# Three frames over {blank, a, b}.  Every path is one symbol per frame;
# collapsing merges repeats and drops blanks.
rows = np.array([
    [0.1, 0.7, 0.2],
    [0.5, 0.3, 0.2],
    [0.1, 0.2, 0.7],
])
p = Posteriorgram(np.log(rows))
vocab = Vocabulary(("a", "b"))

print("paths that collapse to 'a b':")
total = 0.0
for path in itertools.product(range(3), repeat=3):
    if collapse(path) == (1, 2):
        prob = math.prod(rows[t, v] for t, v in enumerate(path))
        total += prob
        print(f"  {''.join(vocab.token(v) for v in path):24s} {prob:.4f}")
print(f"summed by hand: {total:.6f}")

# The forward recursion gets the same mass without enumerating paths.
_, logp = ctc_forward(p, (1, 2))
print(f"forward pass:   {math.exp(logp):.6f}   "
      f"(loss {ctc_loss(p, (1, 2)):.4f} nats)")

# All label sequences together carry probability one.
dist = bruteforce_distribution(p)
print(f"{len(dist)} reachable sequences, total mass "
      f"{math.fsum(dist.values()):.6f}")
best = max(dist, key=dist.get)
print(f"most likely sequence: {best} with {dist[best]:.4f}")

# Prefix probability is the mass of every sequence starting with the
# prefix, which is what a label-synchronous search ranks partial
# hypotheses by.
for prefix in ((), (1,), (1, 2), (2,)):
    mass = math.exp(ctc_prefix_logprob(p, prefix))
    name = " ".join(vocab.token(v) for v in prefix) or "(empty)"
    print(f"  P(starts with {name:8s}) = {mass:.4f}")
