import pytest

from relpara.analysis import (
    PositionHistogram,
    ReportBundle,
    dumps_stable,
    emit_report,
    histogram_divergence,
    position_distribution,
)
from relpara.corpus import Article, Sentence
from relpara.llm import ParsedSummary
from relpara.metrics import MetricReport, change_report
from relpara.perturb import ExclusionLog
from relpara.relevance import MapperMode


def make_article(article_id, *texts):
    return Article(article_id, tuple(Sentence(i, t) for i, t in enumerate(texts)))


def parsed(*texts):
    return ParsedSummary(
        tuple(Sentence(i, t) for i, t in enumerate(texts)), raw="\n".join(texts), truncated=False
    )


DISTINCT_LINES = [
    "alpha anchor ash",
    "bravo bucket bone",
    "cedar colt cliff",
    "delta dune dock",
    "ember elk edge",
    "fable fern flint",
    "grove gull grain",
    "harbor hawk hedge",
    "ivy iron inlet",
    "joust jade jetty",
]


class TestPositionDistribution:
    def test_exact_match_positions(self):
        article = make_article("h1", *DISTINCT_LINES)
        summary = parsed(DISTINCT_LINES[0], DISTINCT_LINES[5])
        hist = position_distribution([article], [("h1", summary)], bins=10)
        # Positions 0/9 -> bin 0 and 5/9 -> bin 5, half the mass each.
        assert hist.bins[0] == 0.5
        assert hist.bins[5] == 0.5
        assert sum(hist.bins) == pytest.approx(1.0)
        assert hist.n_mapped == 2

    def test_single_sentence_article_goes_to_bin_zero(self):
        article = make_article("h2", "only line here")
        hist = position_distribution([article], [("h2", parsed("only line here"))], bins=10)
        assert hist.bins[0] == 1.0
        assert hist.n_mapped == 1

    def test_last_position_clamped_into_final_bin(self):
        article = make_article("h3", *DISTINCT_LINES[:4])
        hist = position_distribution(
            [article], [("h3", parsed(DISTINCT_LINES[3]))], bins=10
        )
        assert hist.bins[-1] == 1.0

    def test_fixture_extractive_summaries_map_to_source(self, fixture_dataset):
        # Extractive candidates are verbatim first sentences, so the top-1
        # mapping lands on index 0 for every pair: all mass in bin 0.
        articles = [a for a, _ in fixture_dataset.pairs]
        summaries = [(a.id, parsed(a.sentences[0].text)) for a in articles]
        hist = position_distribution(articles, summaries, MapperMode(), 10)
        assert hist.bins[0] == 1.0
        assert hist.n_mapped == len(articles)

    def test_order_invariant(self, fixture_dataset):
        articles = [a for a, _ in fixture_dataset.pairs]
        summaries = [(a.id, parsed(a.sentences[-1].text)) for a in articles]
        forward = position_distribution(articles, summaries, MapperMode(), 10)
        backward = position_distribution(articles[::-1], summaries[::-1], MapperMode(), 10)
        assert forward.bins == backward.bins

    def test_length_misalignment_rejected(self):
        article = make_article("h4", "a b c")
        with pytest.raises(ValueError):
            position_distribution([article], [], bins=10)

    def test_id_misalignment_rejected(self):
        article = make_article("h5", "a b c")
        with pytest.raises(ValueError, match="misalignment"):
            position_distribution([article], [("other", parsed("a b c"))], bins=10)

    def test_invalid_bins_rejected(self):
        with pytest.raises(ValueError):
            position_distribution([], [], bins=0)


class TestHistogramDivergence:
    def test_identical_is_zero(self):
        h = PositionHistogram((0.25, 0.75), 4)
        assert histogram_divergence(h, h) == 0.0

    def test_disjoint_masses_are_two(self):
        a = PositionHistogram((1.0, 0.0), 1)
        b = PositionHistogram((0.0, 1.0), 1)
        assert histogram_divergence(a, b) == 2.0

    def test_simple_sum(self):
        a = PositionHistogram((0.5, 0.5), 2)
        b = PositionHistogram((0.75, 0.25), 4)
        assert histogram_divergence(a, b) == pytest.approx(0.5, abs=1e-12)

    def test_bin_count_mismatch_rejected(self):
        with pytest.raises(ValueError):
            histogram_divergence(PositionHistogram((1.0,), 1), PositionHistogram((0.5, 0.5), 2))


class TestHistogramContract:
    def test_negative_bin_rejected(self):
        with pytest.raises(ValueError):
            PositionHistogram((-0.1, 1.1), 2)

    def test_bins_must_sum_to_one_when_mapped(self):
        with pytest.raises(ValueError):
            PositionHistogram((0.2, 0.2), 2)

    def test_empty_histogram_allowed(self):
        PositionHistogram((0.0, 0.0), 0)


def make_bundle():
    original = MetricReport(
        dataset="fixture20", backend="mock", n_pairs=2,
        rouge1_f1=0.40, rouge2_f1=0.30, rougeL_f1=0.35,
    )
    perturbed = MetricReport(
        dataset="fixture20", backend="mock", n_pairs=2,
        rouge1_f1=0.37, rouge2_f1=0.24, rougeL_f1=0.28,
    )
    return ReportBundle(
        original=original,
        perturbed=perturbed,
        change=change_report(original, perturbed),
        histograms=(
            PositionHistogram((1.0, 0.0), 2),
            PositionHistogram((0.5, 0.5), 2),
        ),
        exclusions=ExclusionLog(),
    )


class TestEmitReport:
    def test_manifest_lists_exactly_five_files(self, tmp_path):
        paths = emit_report(make_bundle(), tmp_path)
        assert [p.name for p in paths] == [
            "report.json", "metrics.csv", "histograms.csv", "metrics.svg", "histograms.svg",
        ]
        assert all(p.exists() for p in paths)

    def test_change_cell_matches_formula(self, tmp_path):
        emit_report(make_bundle(), tmp_path)
        rows = (tmp_path / "metrics.csv").read_text().splitlines()
        assert rows[0] == "metric,original,perturbed,change_pct"
        assert rows[1] == "rouge1_f1,0.400000,0.370000,-7.500000"

    def test_reruns_byte_identical(self, tmp_path):
        emit_report(make_bundle(), tmp_path / "one")
        emit_report(make_bundle(), tmp_path / "two")
        for name in ("report.json", "metrics.csv", "histograms.csv", "metrics.svg",
                     "histograms.svg"):
            assert (tmp_path / "one" / name).read_bytes() == (
                tmp_path / "two" / name
            ).read_bytes()

    def test_report_floats_fixed_precision(self, tmp_path):
        emit_report(make_bundle(), tmp_path)
        text = (tmp_path / "report.json").read_text()
        assert '"rouge1_f1": 0.400000' in text
        assert '"refusal_rate": 0.000000' in text

    def test_unwritable_target_rejected(self, tmp_path):
        blocker = tmp_path / "blocked"
        blocker.write_text("a plain file")
        with pytest.raises(OSError):
            emit_report(make_bundle(), blocker)


class TestStableJson:
    def test_sorted_keys_and_float_format(self):
        got = dumps_stable({"b": 1.5, "a": [True, None, 2]})
        assert got == '{"a": [true, null, 2], "b": 1.500000}'

    def test_negative_zero_normalized(self):
        assert dumps_stable(-0.0) == "0.000000"
