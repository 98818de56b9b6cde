"""Command-line interface: stage-by-stage commands plus the end-to-end run.

Configuration lives in a TOML file; every field can be overridden by a flag
(flags win).  Exit codes: 0 ok, 1 config error, 2 pipeline error, 3 exclusion
threshold exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

try:
    import tomllib  # Python 3.11+
except ModuleNotFoundError:  # pragma: no cover - 3.10 fallback
    import tomli as tomllib

from relpara.analysis import (
    dumps_stable,
    histogram_divergence,
    position_distribution,
)
from relpara.corpus import DatasetError, Sentence, load_dataset
from relpara.llm import Backend, GenerationConfig, LlmError, ParsedSummary
from relpara.metrics import MetricOptions, SidecarError, change_report, evaluate_corpus
from relpara.perturb import (
    AbortThresholdExceeded,
    PerturbationPlan,
    build_perturbed_corpus,
)
from relpara.pipeline import (
    PipelineError,
    RunConfig,
    mock_judge,
    mock_paraphraser,
    mock_summarizer,
    persist_perturbed,
    persist_summaries,
    run_experiment,
    summarize_corpus,
    summary_template,
)
from relpara.relevance import MapperMode, map_summary

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PIPELINE = 2
EXIT_ABORT = 3

_PSI_KINDS = {"tfidf": "tfidf-cosine", "rouge1": "rouge1-f1"}
_MOCK_BACKENDS = {
    "mock-extractive": mock_summarizer,
    "mock-reversal": mock_paraphraser,
    "mock-judge": mock_judge,
}


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); config errors are exit 1
        raise ConfigError(message)


def _load_toml(path: str) -> dict:
    try:
        with open(path, "rb") as handle:
            return tomllib.load(handle)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}")


def _resolve_backend(name: str, config: dict):
    if name in _MOCK_BACKENDS:
        return _MOCK_BACKENDS[name]()
    defs = config.get("backends", {})
    if name not in defs:
        raise ConfigError(
            f"backend {name!r} not defined under [backends.{name}] "
            f"(known: {sorted(defs) + sorted(_MOCK_BACKENDS)})"
        )
    spec = defs[name]
    try:
        return Backend(
            name=name,
            base_url=spec["base_url"],
            model_id=spec["model_id"],
            api_key_env=spec.get("api_key_env", "RELPARA_API_KEY"),
            max_retries=int(spec.get("max_retries", 3)),
            timeout=float(spec.get("timeout", 60.0)),
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad backend definition [backends.{name}]: {exc}")


def _generation_config(config: dict, role: str, temperature_override=None) -> GenerationConfig:
    section = config.get("generation", {}).get(role, {})
    temperature = section.get("temperature", 0.0 if role == "judge" else 1.0)
    if temperature_override is not None:
        temperature = temperature_override
    return GenerationConfig(
        temperature=float(temperature),
        max_tokens=int(section.get("max_tokens", 64 if role == "judge" else 512)),
    )


def _build_run_config(args) -> RunConfig:
    config = _load_toml(args.config) if args.config else {}
    ds = config.get("dataset", {})
    run = config.get("run", {})
    met = config.get("metrics", {})
    roles = config.get("roles", {})

    dataset_path = args.dataset or ds.get("path")
    if not dataset_path:
        raise ConfigError("no dataset given (use --dataset or [dataset].path)")
    if not Path(dataset_path).exists():
        raise ConfigError(f"dataset file not found: {dataset_path}")
    out_dir = args.out or run.get("out")
    if not out_dir:
        raise ConfigError("no output directory given (use --out or [run].out)")

    if args.mock:
        summarizer, paraphraser, judge = mock_summarizer(), mock_paraphraser(), mock_judge()
    else:
        summarizer = _resolve_backend(
            args.summarizer or roles.get("summarizer", "mock-extractive"), config
        )
        paraphraser = _resolve_backend(
            args.paraphraser or roles.get("paraphraser", "mock-reversal"), config
        )
        judge_name = args.judge or roles.get("judge")
        judge = _resolve_backend(judge_name, config) if judge_name else None

    psi = args.psi or run.get("psi", "tfidf")
    if psi not in _PSI_KINDS:
        raise ConfigError(f"--psi must be one of {sorted(_PSI_KINDS)}")
    mode = args.mode or run.get("mode", "relevant")
    top_n = args.top_n if args.top_n is not None else int(run.get("top_n", 1))
    seed = args.seed if args.seed is not None else int(run.get("seed", 0))

    try:
        plan = PerturbationPlan(mode=mode, top_n_paraphrase=top_n, seed=seed)
        mapper = MapperMode(kind=_PSI_KINDS[psi], top_n=top_n)
    except ValueError as exc:
        raise ConfigError(str(exc))

    bertscore_endpoint = (
        args.bertscore_endpoint
        if args.bertscore_endpoint is not None
        else met.get("bertscore_endpoint") or None
    )

    return RunConfig(
        dataset_path=dataset_path,
        out_dir=out_dir,
        dataset_name=getattr(args, "name", None) or ds.get("name"),
        target_summary_len=(
            args.target_len if args.target_len is not None else ds.get("target_summary_len")
        ),
        summarizer=summarizer,
        paraphraser=paraphraser,
        judge=judge,
        summarizer_config=_generation_config(config, "summarizer", args.temperature),
        paraphraser_config=_generation_config(config, "paraphraser", args.temperature),
        judge_config=_generation_config(config, "judge"),
        plan=plan,
        mapper=mapper,
        rouge1=bool(met.get("rouge1", True)),
        rouge2=bool(met.get("rouge2", True)),
        rougeL=bool(met.get("rougeL", True)),
        bertscore_endpoint=bertscore_endpoint or None,
        geval=args.geval or bool(met.get("geval", False)),
        seed=seed,
        max_in_flight=(
            args.max_in_flight if args.max_in_flight is not None else int(run.get("max_in_flight", 4))
        ),
        limit=args.limit if args.limit is not None else run.get("limit"),
        template_style=args.template or run.get("template", "numbered"),
        bins=int(run.get("bins", 10)),
    )


def _read_summaries(path: str) -> list[tuple[str, ParsedSummary]]:
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            obj = json.loads(line)
            sentences = tuple(Sentence(i, t) for i, t in enumerate(obj["sentences"]))
            rows.append(
                (str(obj["id"]), ParsedSummary(sentences, obj.get("raw", ""), obj.get("truncated", False)))
            )
    return rows


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_ingest(args) -> int:
    dataset = load_dataset(args.infile, name=args.name, target_override=args.target_len)
    profile_path = Path(args.profile_out)
    profile_path.parent.mkdir(parents=True, exist_ok=True)
    profile_path.write_text(
        json.dumps(dataset.profile.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    print(
        f"{dataset.name}: {len(dataset.pairs)} pairs loaded, {dataset.dropped} dropped; "
        f"profile -> {profile_path}"
    )
    return EXIT_OK


def cmd_stats(args) -> int:
    dataset = load_dataset(args.dataset).limit(args.limit)
    profile = dataset.profile
    print(f"dataset: {dataset.name}")
    print(f"pairs: {len(dataset.pairs)} (dropped {dataset.dropped})")
    print(f"avg article sentences: {profile.avg_article_sentences:.4f}")
    print(f"avg summary sentences: {profile.avg_summary_sentences:.4f}")
    print(f"target summary length: {profile.target_summary_len}")
    return EXIT_OK


def cmd_map(args) -> int:
    dataset = load_dataset(args.dataset).limit(args.limit)
    mode = MapperMode(kind=_PSI_KINDS[args.psi], top_n=args.top_n)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as handle:
        for article, gold in dataset.pairs:
            relmap = map_summary(article, gold.sentences, mode)
            handle.write(json.dumps(relmap.to_dict(), ensure_ascii=False) + "\n")
    print(f"wrote relevance maps for {len(dataset.pairs)} articles -> {out}")
    return EXIT_OK


def cmd_paraphrase(args) -> int:
    config = _load_toml(args.config) if args.config else {}
    dataset = load_dataset(args.dataset).limit(args.limit)
    if args.mock:
        paraphraser = mock_paraphraser()
    else:
        paraphraser = _resolve_backend(
            args.paraphraser or config.get("roles", {}).get("paraphraser", "mock-reversal"),
            config,
        )
    plan = PerturbationPlan(mode=args.mode, top_n_paraphrase=args.top_n, seed=args.seed)
    mapper = MapperMode(kind=_PSI_KINDS[args.psi], top_n=args.top_n)
    gen_config = _generation_config(config, "paraphraser", args.temperature)
    pairs, exclusions = build_perturbed_corpus(
        dataset, plan, mapper, paraphraser, gen_config, max_in_flight=args.max_in_flight
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    persist_perturbed(out_dir / "perturbed.jsonl", pairs)
    (out_dir / "exclusions.json").write_text(
        json.dumps(exclusions.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(
        f"perturbed {len(pairs)} articles ({len(exclusions.excluded_ids)} excluded, "
        f"refusal rate {exclusions.refusal_rate:.4f}) -> {out_dir}"
    )
    return EXIT_OK


def cmd_summarize(args) -> int:
    config = _load_toml(args.config) if args.config else {}
    dataset = load_dataset(args.corpus).limit(args.limit)
    if args.mock:
        summarizer = mock_summarizer()
    else:
        summarizer = _resolve_backend(
            args.summarizer or config.get("roles", {}).get("summarizer", "mock-extractive"),
            config,
        )
    n = args.n_sentences or dataset.profile.target_summary_len
    template = summary_template(args.template, n)
    summaries = summarize_corpus(
        [a for a, _ in dataset.pairs],
        summarizer,
        _generation_config(config, "summarizer", args.temperature),
        template,
        args.seed,
        args.kind,
        args.max_in_flight,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    persist_summaries(out, summaries)
    print(f"summarized {len(summaries)} articles -> {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    dataset = load_dataset(args.dataset)
    golds = {g.article_id: g for _, g in dataset.pairs}
    original = _read_summaries(args.original_summaries)
    perturbed = _read_summaries(args.perturbed_summaries)
    if [i for i, _ in original] != [i for i, _ in perturbed]:
        raise PipelineError("evaluate", ValueError("summary id sequences differ"))
    ids = [i for i, _ in original]
    missing = [i for i in ids if i not in golds]
    if missing:
        raise PipelineError("evaluate", ValueError(f"ids missing from dataset: {missing[:5]}"))
    gold_list = [golds[i] for i in ids]
    options = MetricOptions(bertscore_endpoint=args.bertscore_endpoint or None)
    original_report = evaluate_corpus(gold_list, original, options, dataset=dataset.name)
    perturbed_report = evaluate_corpus(gold_list, perturbed, options, dataset=dataset.name)
    change = change_report(original_report, perturbed_report)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "evaluation.json").write_text(
        dumps_stable(change.to_dict()) + "\n", encoding="utf-8"
    )
    for name, pct in change.changes.items():
        print(f"{name}: {pct:+.3f}%")
    print(f"evaluation -> {out_dir / 'evaluation.json'}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    dataset = load_dataset(args.dataset)
    perturbed_ds = load_dataset(args.perturbed_corpus)
    original = _read_summaries(args.original_summaries)
    perturbed = _read_summaries(args.perturbed_summaries)
    articles = {a.id: a for a, _ in dataset.pairs}
    originals = [articles[i] for i, _ in original]
    perturbed_articles = {a.id: a for a, _ in perturbed_ds.pairs}
    perturbeds = [perturbed_articles[i] for i, _ in perturbed]
    mode = MapperMode(kind=_PSI_KINDS[args.psi], top_n=1)
    hist_original = position_distribution(originals, original, mode, args.bins)
    hist_perturbed = position_distribution(perturbeds, perturbed, mode, args.bins)
    divergence = histogram_divergence(hist_original, hist_perturbed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "original": hist_original.to_dict(),
        "perturbed": hist_perturbed.to_dict(),
        "l1_divergence": divergence,
    }
    (out_dir / "histograms.json").write_text(dumps_stable(payload) + "\n", encoding="utf-8")
    print(f"histogram L1 divergence: {divergence:.6f}")
    print(f"analysis -> {out_dir / 'histograms.json'}")
    return EXIT_OK


def cmd_run(args) -> int:
    run_config = _build_run_config(args)
    bundle = run_experiment(run_config)
    print(f"dataset: {bundle.original.dataset} ({bundle.original.n_pairs} pairs)")
    for name, pct in bundle.change.changes.items():
        old = bundle.original.metric_means()[name]
        new = bundle.perturbed.metric_means()[name]
        print(f"{name}: {old:.6f} -> {new:.6f} ({pct:+.3f}%)")
    divergence = histogram_divergence(*bundle.histograms)
    print(f"histogram L1 divergence: {divergence:.6f}")
    print(f"refusal rate: {bundle.exclusions.refusal_rate:.4f}")
    print(f"outputs -> {run_config.out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="relpara", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common_llm_flags(p):
        p.add_argument("--config", help="TOML config file")
        p.add_argument("--temperature", type=float, default=None)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--limit", type=int, default=None, help="use only the first N pairs")
        p.add_argument("--max-in-flight", type=int, default=4)
        p.add_argument("--mock", action="store_true", help="force deterministic mock backends")

    p = sub.add_parser("ingest", help="load a JSONL dataset and emit its profile")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--profile-out", required=True)
    p.add_argument("--name", default=None)
    p.add_argument("--target-len", type=int, default=None)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("stats", help="print dataset statistics")
    p.add_argument("--dataset", required=True)
    p.add_argument("--limit", type=int, default=None)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("map", help="write relevance maps for audit")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--psi", choices=sorted(_PSI_KINDS), default="tfidf")
    p.add_argument("--top-n", type=int, default=1)
    p.add_argument("--limit", type=int, default=None)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("paraphrase", help="build the perturbed corpus")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--mode", choices=("relevant", "nonrelevant-random", "identity"),
                   default="relevant")
    p.add_argument("--top-n", type=int, default=1)
    p.add_argument("--psi", choices=sorted(_PSI_KINDS), default="tfidf")
    p.add_argument("--paraphraser", default=None, help="backend name from config")
    add_common_llm_flags(p)
    p.set_defaults(func=cmd_paraphrase)

    p = sub.add_parser("summarize", help="summarize a corpus (original or perturbed)")
    p.add_argument("--corpus", required=True, help="JSONL corpus to summarize")
    p.add_argument("--out", required=True, help="output summaries JSONL")
    p.add_argument("--n-sentences", type=int, default=None)
    p.add_argument("--template", choices=("numbered", "plain"), default="numbered")
    p.add_argument("--kind", default="summarize-original",
                   help="seed-derivation label, e.g. summarize-perturbed")
    p.add_argument("--summarizer", default=None, help="backend name from config")
    add_common_llm_flags(p)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("evaluate", help="score original vs perturbed summaries")
    p.add_argument("--dataset", required=True)
    p.add_argument("--original-summaries", required=True)
    p.add_argument("--perturbed-summaries", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--bertscore-endpoint", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze", help="positional source analysis")
    p.add_argument("--dataset", required=True)
    p.add_argument("--perturbed-corpus", required=True)
    p.add_argument("--original-summaries", required=True)
    p.add_argument("--perturbed-summaries", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--psi", choices=sorted(_PSI_KINDS), default="tfidf")
    p.add_argument("--bins", type=int, default=10)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("run", help="end-to-end experiment")
    p.add_argument("--dataset", default=None)
    p.add_argument("--name", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--mode", choices=("relevant", "nonrelevant-random", "identity", "none-repeat"),
                   default=None)
    p.add_argument("--top-n", type=int, default=None)
    p.add_argument("--psi", choices=sorted(_PSI_KINDS), default=None)
    p.add_argument("--target-len", type=int, default=None)
    p.add_argument("--template", choices=("numbered", "plain"), default=None)
    p.add_argument("--summarizer", default=None)
    p.add_argument("--paraphraser", default=None)
    p.add_argument("--judge", default=None)
    p.add_argument("--geval", action="store_true")
    p.add_argument("--bertscore-endpoint", default=None)
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--max-in-flight", type=int, default=None)
    p.add_argument("--mock", action="store_true")
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AbortThresholdExceeded as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except PipelineError as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except (DatasetError, LlmError, SidecarError, ValueError, OSError) as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
