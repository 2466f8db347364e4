"""Writes a small two-year token corpus and its vocabularies.

Counts are done here with collections.Counter, independently of the C++
implementation. Run from this directory.
"""
from collections import Counter
import random

MIN_DF, MAX_DF_RATIO, MAX_SIZE = 2, 0.5, 14

rng = random.Random(5)
words = ["revenue", "margin", "guidance", "oil", "gas", "loan", "deposit", "store", "traffic",
         "backlog", "order", "tariff", "pricing", "churn", "subscriber", "freight", "yield",
         "inventory", "demand", "supply"]
streams = {2010: [], 2011: []}
doc_id = 100
for year, vocab_slice in ((2010, words[:12]), (2011, words[4:])):
    for _ in range(12):
        n = rng.randint(3, 9)
        streams[year].append((doc_id, [rng.choice(vocab_slice) for _ in range(n)]))
        doc_id += 1
# One common term to exercise the max-df cut and a sentinel seen only in 2011.
for year in streams:
    for _, toks in streams[year]:
        toks.append("company")
streams[2011][0][1].append("sentinel")
streams[2011][1][1].append("sentinel")


def ranked(df, n_docs):
    ok = [(t, n) for t, n in df.items() if n >= MIN_DF and n <= MAX_DF_RATIO * n_docs]
    return sorted(ok, key=lambda p: (-p[1], p[0]))


df = Counter()
n_docs = 0
vocabs = {}
prev = None
for year in (2010, 2011):
    for _, toks in streams[year]:
        df.update(set(toks))
        n_docs += 1
    cands = ranked(df, n_docs)
    if prev is None:
        terms = sorted(t for t, _ in cands[:MAX_SIZE])
    else:
        room = MAX_SIZE - len(prev)
        fresh = [t for t, _ in cands if t not in prev][:room]
        terms = prev + sorted(fresh)
    vocabs[year] = [(t, df[t]) for t in terms]
    prev = terms

with open("streams.tsv", "w") as f:
    for year in (2010, 2011):
        for did, toks in streams[year]:
            f.write(f"{year}\t{did}\t{' '.join(toks)}\n")
for year, v in vocabs.items():
    with open(f"golden_vocab_{year}.tsv", "w") as f:
        for i, (t, n) in enumerate(v):
            f.write(f"{t}\t{i}\t{n}\n")

# Sparse vector of the first 2011 document under the 2011 vocabulary.
index = {t: i for i, (t, _) in enumerate(vocabs[2011])}
did, toks = streams[2011][0]
counts = Counter(index[t] for t in toks if t in index)
with open("golden_dtm_first_2011.csv", "w") as f:
    f.write("doc_id,index,count\n")
    for i in sorted(counts):
        f.write(f"{did},{i},{counts[i]}\n")
