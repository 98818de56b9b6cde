import dataclasses
import json

import pytest

from relpara.analysis import histogram_divergence
from relpara.llm import GenerationConfig
from relpara.perturb import PerturbationPlan
from relpara.pipeline import (
    PipelineError,
    RunConfig,
    mock_paraphraser,
    mock_summarizer,
    run_experiment,
)
from relpara.relevance import MapperMode


def base_config(fixture_path, out_dir, **overrides) -> RunConfig:
    config = RunConfig(
        dataset_path=str(fixture_path),
        out_dir=str(out_dir),
        dataset_name="fixture20",
        summarizer=mock_summarizer(),
        paraphraser=mock_paraphraser(),
        plan=PerturbationPlan(mode="relevant", top_n_paraphrase=1, seed=0),
        mapper=MapperMode("tfidf-cosine", 1),
        seed=0,
    )
    return dataclasses.replace(config, **overrides)


EXPECTED_FILES = [
    "profile.json",
    "relmaps.jsonl",
    "perturbed.jsonl",
    "exclusions.json",
    "summaries_original.jsonl",
    "summaries_perturbed.jsonl",
    "report.json",
    "metrics.csv",
    "histograms.csv",
    "metrics.svg",
    "histograms.svg",
    "run_manifest.json",
]


class TestRunExperiment:
    def test_identity_plan_zero_change(self, fixture_path, tmp_path):
        config = base_config(
            fixture_path, tmp_path, plan=PerturbationPlan(mode="identity", seed=0)
        )
        bundle = run_experiment(config)
        assert bundle.change.changes == {
            "rouge1_f1": 0.0, "rouge2_f1": 0.0, "rougeL_f1": 0.0,
        }
        assert histogram_divergence(*bundle.histograms) == 0.0
        assert bundle.exclusions.refusal_rate == 0.0

    def test_none_repeat_plan_zero_change(self, fixture_path, tmp_path):
        config = base_config(
            fixture_path, tmp_path, plan=PerturbationPlan(mode="none-repeat", seed=0)
        )
        bundle = run_experiment(config)
        assert all(pct == 0.0 for pct in bundle.change.changes.values())
        assert histogram_divergence(*bundle.histograms) == 0.0

    def test_all_intermediates_persisted(self, fixture_path, tmp_path):
        run_experiment(base_config(fixture_path, tmp_path))
        for name in EXPECTED_FILES:
            assert (tmp_path / name).exists(), name

    def test_relevant_plan_changes_something(self, fixture_path, tmp_path):
        bundle = run_experiment(base_config(fixture_path, tmp_path))
        # The reversal paraphrase scrambles the mapped source sentence, so the
        # extractive summarizer's first-sentence candidates move for at least
        # some pairs; the exact values are pinned by the golden-run test.
        assert bundle.original.n_pairs == 20
        assert bundle.perturbed.n_pairs == 20
        assert any(pct != 0.0 for pct in bundle.change.changes.values())

    def test_reruns_byte_identical(self, fixture_path, tmp_path):
        run_experiment(base_config(fixture_path, tmp_path / "one"))
        run_experiment(base_config(fixture_path, tmp_path / "two"))
        assert (tmp_path / "one" / "report.json").read_bytes() == (
            tmp_path / "two" / "report.json"
        ).read_bytes()

    def test_inflight_limit_does_not_change_report(self, fixture_path, tmp_path):
        run_experiment(base_config(fixture_path, tmp_path / "k1", max_in_flight=1))
        run_experiment(base_config(fixture_path, tmp_path / "k8", max_in_flight=8))
        assert (tmp_path / "k1" / "report.json").read_bytes() == (
            tmp_path / "k8" / "report.json"
        ).read_bytes()

    def test_limit_subsamples_prefix(self, fixture_path, tmp_path):
        bundle = run_experiment(base_config(fixture_path, tmp_path, limit=5))
        assert bundle.original.n_pairs == 5

    def test_missing_dataset_fails_in_load_stage(self, tmp_path):
        config = base_config(tmp_path / "missing.jsonl", tmp_path / "out")
        with pytest.raises(PipelineError, match="load"):
            run_experiment(config)

    def test_manifest_records_hash_and_backends(self, fixture_path, tmp_path):
        config = base_config(fixture_path, tmp_path)
        run_experiment(config)
        manifest = json.loads((tmp_path / "run_manifest.json").read_text())
        assert manifest["config_hash"] == config.config_hash()
        assert manifest["seed"] == 0
        assert manifest["backends"]["summarizer"] == "mock"
        assert manifest["n_pairs_loaded"] == 20
        assert "started_at" in manifest and "finished_at" in manifest


class TestConfigHash:
    def test_same_config_same_hash(self, fixture_path, tmp_path):
        a = base_config(fixture_path, tmp_path)
        b = base_config(fixture_path, tmp_path)
        assert a.config_hash() == b.config_hash()

    @pytest.mark.parametrize(
        "overrides",
        [
            {"seed": 1},
            {"limit": 5},
            {"max_in_flight": 2},
            {"plan": PerturbationPlan(mode="identity", seed=0)},
            {"plan": PerturbationPlan(mode="relevant", top_n_paraphrase=3, seed=0)},
            {"mapper": MapperMode("rouge1-f1", 1)},
            {"rouge2": False},
            {"template_style": "plain"},
            {"bins": 20},
            {"summarizer_config": GenerationConfig(temperature=0.0)},
            {"bertscore_endpoint": "http://127.0.0.1:9999"},
            {"geval": True},
            {"target_summary_len": 2},
        ],
    )
    def test_any_field_change_changes_hash(self, fixture_path, tmp_path, overrides):
        base = base_config(fixture_path, tmp_path)
        changed = base_config(fixture_path, tmp_path, **overrides)
        assert base.config_hash() != changed.config_hash()
