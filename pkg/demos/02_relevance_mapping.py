"""Map gold-summary sentences back to the article sentences that fed them.

The mapper ranks every article sentence against each summary sentence,
either by TF-IDF cosine (fit per article) or by ROUGE-1 F1, and keeps the
top-N indices.  The deduplicated union of those indices is what the
perturbation stage will paraphrase.
"""

from relpara.corpus import load_dataset
from relpara.fixtures import fixture20_path
from relpara.relevance import MapperMode, map_summary, select_nonrelevant

dataset = load_dataset(fixture20_path(), name="fixture20")
article, gold = dataset.pairs[1]

print("article sentences:")
for sentence in article.sentences:
    print(f"  [{sentence.index}] {sentence.text}")
print("\ngold summary:")
for sentence in gold.sentences:
    print(f"  ({sentence.index}) {sentence.text}")

for kind in ("tfidf-cosine", "rouge1-f1"):
    relmap = map_summary(article, gold.sentences, MapperMode(kind, top_n=1))
    print(f"\n{kind} mapping:")
    for sidx, ranked in relmap.entries:
        print(f"  summary sentence {sidx} <- article sentence {ranked[0]}")
    print(f"  index set: {list(relmap.index_set)}")

# Widening to top-3 pools more candidate sources per summary sentence.
wide = map_summary(article, gold.sentences, MapperMode("tfidf-cosine", top_n=3))
print("\ntop-3 mapping entries:")
for sidx, ranked in wide.entries:
    print(f"  summary sentence {sidx} -> ranked article indices {list(ranked)}")

# The random baseline draws the same number of sentences from everything
# the mapper did NOT select (seeded, so reruns agree).
relmap = map_summary(article, gold.sentences, MapperMode("tfidf-cosine", 1))
random_pick = select_nonrelevant(article, relmap, seed=42)
print(f"\nnon-relevant baseline would paraphrase instead: {sorted(random_pick)}")
