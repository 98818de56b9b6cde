"""Walk through sentence segmentation and dataset profiling.

The segmenter is a deterministic rule table: a sentence ends at '.', '!'
or '?' when the terminator is followed by whitespace plus an uppercase
letter or digit (or end of text), and a small abbreviation list keeps
"Dr.", "U.S.", "No." and friends from splitting too early.
"""

from relpara.corpus import load_dataset, segment_sentences
from relpara.fixtures import fixture20_path

TEXT = (
    "Dr. Alvarez docked at the U.S. naval pier on Monday. "
    "Cargo crane No. 4 lifted 60 crates! Was the manifest complete? "
    "Nobody checked until Tuesday."
)

print("input text:")
print(f"  {TEXT}\n")
print("segmented sentences:")
for sentence in segment_sentences(TEXT):
    print(f"  [{sentence.index}] {sentence.text}")

# Profiles drive prompt construction: the requested summary length is the
# half-up rounding of the mean gold-summary sentence count.
dataset = load_dataset(fixture20_path(), name="fixture20")
profile = dataset.profile
print(f"\nfixture dataset: {len(dataset.pairs)} pairs ({dataset.dropped} dropped on load)")
print(f"  avg article sentences: {profile.avg_article_sentences:.3f}")
print(f"  avg summary sentences: {profile.avg_summary_sentences:.3f}")
print(f"  target summary length: {profile.target_summary_len}")
