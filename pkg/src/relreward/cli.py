"""Command-line surface; every subcommand is a thin adapter over one module.

Exit codes: 0 success, 1 flag/config validation error, 2 runtime failure.
Secrets stay out of files by default: the API key can come from the
RELREWARD_API_KEY environment variable, which overrides the config file.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from .core import (
    Decision,
    Episode,
    EpisodeLoadError,
    ModelOutput,
    RelationLabel,
    load_episodes,
    save_episodes,
)
from .dictionary import (
    BuilderConfig,
    DictionaryFormatError,
    build_dictionary,
    load_dictionary,
    save_dictionary,
)
from .evaluation import (
    aggregate_human_scores,
    cohen_kappa,
    export_human_eval_csv,
    read_human_eval_csv,
    sample_for_human_eval,
    score_predictions,
)
from .llm import (
    ChatClient,
    ChatClientError,
    ChatRequest,
    ClientPolicy,
    Message,
    RequestDefaults,
    RetryPolicy,
    parse_model_output,
    run_inference,
)
from .reward import RewardConfig, combined_reward, group_advantages
from .sampler import SamplerConfig, corpus_stats, sample_test_set, sample_training_set, split_corpus
from .server import ScoringApp, serve
from .templates import episode_template_names

logger = logging.getLogger(__name__)

API_KEY_ENV = "RELREWARD_API_KEY"

CONFIG_KEYS = {
    "endpoint",
    "api_key",
    "model_id",
    "extractor_model_id",
    "template",
    "temperature",
    "max_tokens",
    "max_in_flight",
    "timeout",
    "retry_max_attempts",
    "retry_base_backoff",
    "retry_jitter",
    "w_entity",
    "w_relation",
    "length_normalizer",
    "std_epsilon",
    "seed",
}


class CLIValidationError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise CLIValidationError(message)


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as handle:
            config = json.load(handle)
    except OSError as exc:
        raise CLIValidationError(f"cannot read config file: {exc}") from exc
    except ValueError as exc:
        raise CLIValidationError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise CLIValidationError("config file must hold a JSON object")
    unknown = set(config) - CONFIG_KEYS
    if unknown:
        raise CLIValidationError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    return config


class _Settings:
    """Flag > environment (API key only) > config file resolution."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = _load_config(getattr(args, "config", None))

    def get(self, key: str, default=None):
        value = getattr(self.args, key, None)
        if value is not None:
            return value
        return self.config.get(key, default)

    def api_key(self) -> str:
        flag = getattr(self.args, "api_key", None)
        if flag:
            return flag
        return os.environ.get(API_KEY_ENV) or self.config.get("api_key", "")

    def reward_config(self) -> RewardConfig:
        return RewardConfig(
            w_entity=float(self.get("w_entity", 0.4)),
            w_relation=float(self.get("w_relation", 1.0)),
            length_normalizer=float(self.get("length_normalizer", 5.0)),
            std_epsilon=float(self.get("std_epsilon", 1e-8)),
        )

    def client_policy(self) -> ClientPolicy:
        return ClientPolicy(
            max_in_flight=int(self.get("max_in_flight", 4)),
            timeout=float(self.get("timeout", 60.0)),
            retry=RetryPolicy(
                max_attempts=int(self.get("retry_max_attempts", 3)),
                base_backoff=float(self.get("retry_base_backoff", 0.5)),
                jitter=float(self.get("retry_jitter", 0.1)),
            ),
        )

    def endpoint(self) -> str:
        endpoint = self.get("endpoint")
        if not endpoint:
            raise CLIValidationError("the following arguments are required: --endpoint")
        return endpoint

    def client(self, endpoint: str | None = None) -> ChatClient:
        return ChatClient(endpoint or self.endpoint(), api_key=self.api_key())


def _read_outputs(path: str) -> list[tuple[str, str]]:
    """Read output/checkpoint JSONL; accepts "episode_id" or "id" keys."""
    rows: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            key = "episode_id" if "episode_id" in obj else "id"
            if key not in obj or "raw_text" not in obj:
                raise ValueError(f"{path}: line {line_no} lacks episode_id/raw_text")
            rows.append((str(obj[key]), str(obj["raw_text"])))
    return rows


def _pairs_from_files(
    episodes_path: str, outputs_path: str, missing_as_unparseable: bool
) -> list[tuple[Episode, ModelOutput]]:
    episodes = load_episodes(episodes_path)
    by_id = {episode.id: episode for episode in episodes}
    outputs = {}
    skipped = 0
    for episode_id, raw in _read_outputs(outputs_path):
        if episode_id not in by_id:
            skipped += 1
            continue
        outputs[episode_id] = parse_model_output(raw)
    if skipped:
        logger.warning("%d output line(s) had no matching episode", skipped)
    pairs: list[tuple[Episode, ModelOutput]] = []
    missing = 0
    for episode in episodes:
        output = outputs.get(episode.id)
        if output is None:
            if not missing_as_unparseable:
                missing += 1
                continue
            missing += 1
            output = ModelOutput(
                raw_text="", explanation="", decision=Decision.UNPARSEABLE,
                error="missing output",
            )
        pairs.append((episode, output))
    if missing:
        logger.warning("%d episode(s) had no output line", missing)
    return pairs


def _write_json(payload: dict, path: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if path:
        Path(path).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _parse_quotas(raw_quotas: list[str] | None) -> dict[RelationLabel, int]:
    quotas: dict[RelationLabel, int] = {}
    for item in raw_quotas or []:
        label, sep, count = item.rpartition("=")
        if not sep or not label:
            raise CLIValidationError(f"--quota takes label=count, got {item!r}")
        try:
            quotas[RelationLabel(label)] = int(count)
        except ValueError as exc:
            raise CLIValidationError(f"bad quota {item!r}: {exc}") from exc
    return quotas


def cmd_sample_train(args: argparse.Namespace) -> int:
    episodes = load_episodes(args.episodes)
    cfg = SamplerConfig(
        max_positives_per_label=args.max_positives_per_label,
        cross_sample_count=args.cross_count,
        seed=args.seed,
        quotas=_parse_quotas(args.quota),
        no_relation_total=args.no_relation_total,
    )
    sampled = sample_training_set(split_corpus(episodes), cfg)
    save_episodes(sampled, args.out)
    _write_json(corpus_stats(sampled).to_dict(), args.stats)
    return 0


def cmd_sample_test(args: argparse.Namespace) -> int:
    episodes = load_episodes(args.episodes)
    try:
        sampled = sample_test_set(episodes, args.size, args.seed)
    except ValueError as exc:
        raise CLIValidationError(str(exc)) from exc
    save_episodes(sampled, args.out)
    _write_json(corpus_stats(sampled).to_dict(), args.stats)
    return 0


def cmd_infer(args: argparse.Namespace) -> int:
    settings = _Settings(args)
    episodes = load_episodes(args.episodes)
    template = settings.get("template", "cogre")
    if template not in episode_template_names():
        raise CLIValidationError(
            f"unknown template {template!r}; choose from {', '.join(episode_template_names())}"
        )
    defaults = RequestDefaults(
        model_id=settings.get("model_id", ""),
        temperature=float(settings.get("temperature", 0.0)),
        max_tokens=int(settings.get("max_tokens", 1024)),
        seed=args.request_seed,
    )
    results = run_inference(
        episodes,
        template,
        settings.client(),
        defaults,
        settings.client_policy(),
        checkpoint_path=args.out,
    )
    failures = sum(1 for _, output in results if output.error)
    logger.info("inference finished: %d episode(s), %d failure(s)", len(results), failures)
    return 0


def cmd_build_dict(args: argparse.Namespace) -> int:
    settings = _Settings(args)
    endpoint = settings.endpoint()
    episodes = load_episodes(args.episodes)
    template = settings.get("template", "cogre")
    vanilla = settings.client(endpoint)
    extractor = settings.client(args.extractor_endpoint or endpoint)
    policy = settings.client_policy()
    defaults = RequestDefaults(
        model_id=settings.get("model_id", ""),
        temperature=float(settings.get("temperature", 0.0)),
        max_tokens=int(settings.get("max_tokens", 1024)),
    )

    from .templates import episode_bindings, render_prompt

    def infer(episode: Episode) -> ModelOutput:
        prompt = render_prompt(template, episode_bindings(template, episode))
        response = vanilla.complete(
            ChatRequest(
                model_id=defaults.model_id,
                messages=(Message("user", prompt),),
                temperature=defaults.temperature,
                max_tokens=defaults.max_tokens,
            ),
            policy,
        )
        return parse_model_output(response.content)

    def extract(prompt: str) -> str:
        response = extractor.complete(
            ChatRequest(
                model_id=settings.get("extractor_model_id", defaults.model_id),
                messages=(Message("user", prompt),),
                temperature=defaults.temperature,
                max_tokens=defaults.max_tokens,
            ),
            policy,
        )
        return response.content

    config = BuilderConfig(
        samples_per_label=args.samples_per_label,
        seed=args.seed,
        max_parallel_labels=args.max_parallel_labels,
        vanilla_model_id=settings.get("model_id", ""),
        extractor_model_id=settings.get("extractor_model_id", settings.get("model_id", "")),
        no_relation_cues=tuple(args.no_relation_cue or ()),
        built_at=datetime.now(timezone.utc).isoformat() if args.stamp else None,
    )
    dictionary = build_dictionary(episodes, infer, extract, config)
    save_dictionary(dictionary, args.out)
    logger.info("dictionary with %d entries written to %s", len(dictionary.entries), args.out)
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    settings = _Settings(args)
    cfg = settings.reward_config()
    dictionary = load_dictionary(args.dict)
    episodes = {episode.id: episode for episode in load_episodes(args.episodes)}
    skipped = 0
    with open(args.out, "w", encoding="utf-8", newline="\n") as out:
        for episode_id, raw in _read_outputs(args.outputs):
            episode = episodes.get(episode_id)
            if episode is None:
                skipped += 1
                logger.warning("no episode with id %r; skipping", episode_id)
                continue
            breakdown = combined_reward(parse_model_output(raw), episode, dictionary, cfg)
            out.write(json.dumps({"episode_id": episode_id, **breakdown.to_dict()},
                                 ensure_ascii=False))
            out.write("\n")
    if skipped:
        logger.warning("skipped %d output line(s) without matching episodes", skipped)
    return 0


def cmd_advantages(args: argparse.Namespace) -> int:
    settings = _Settings(args)
    if (args.rewards is None) == (args.rewards_file is None):
        raise CLIValidationError("provide exactly one of --rewards or --rewards-file")
    if args.rewards is not None:
        try:
            rewards = json.loads(args.rewards)
        except ValueError as exc:
            raise CLIValidationError(f"--rewards must be a JSON array: {exc}") from exc
        if not isinstance(rewards, list):
            raise CLIValidationError("--rewards must be a JSON array of numbers")
    else:
        rewards = [
            float(json.loads(line)["total"])
            for line in Path(args.rewards_file).read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
    if not rewards:
        raise CLIValidationError("reward group must be non-empty")
    advantages = group_advantages([float(r) for r in rewards], settings.reward_config())
    print(json.dumps(advantages))
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    pairs = _pairs_from_files(args.episodes, args.outputs, missing_as_unparseable=True)
    report = score_predictions(pairs)
    _write_json(report.to_dict(), args.out)
    return 0


def cmd_human_eval_export(args: argparse.Namespace) -> int:
    pairs = _pairs_from_files(args.episodes, args.outputs, missing_as_unparseable=False)
    items = sample_for_human_eval(pairs, per_category=args.per_category, seed=args.seed)
    export_human_eval_csv(items, args.out)
    logger.info("exported %d item(s) to %s", len(items), args.out)
    return 0


def cmd_human_eval_aggregate(args: argparse.Namespace) -> int:
    reports = []
    ratings = []
    for path in args.ratings:
        items = read_human_eval_csv(path)
        totals = aggregate_human_scores(items)
        reports.append(
            {"file": path, "totals": {c.value: n for c, n in sorted(totals.items())}}
        )
        ratings.append({item.episode_id: item.score for item in items})
    payload: dict = {"ratings": reports}
    if len(ratings) == 2:
        shared = sorted(ratings[0].keys() & ratings[1].keys())
        if not shared:
            raise CLIValidationError("rating files share no episode ids")
        agreement = cohen_kappa(
            [ratings[0][i] for i in shared], [ratings[1][i] for i in shared]
        )
        payload["agreement"] = agreement.to_dict()
        payload["agreement"]["items"] = len(shared)
    elif len(ratings) > 2:
        raise CLIValidationError("at most two rating files are supported")
    _write_json(payload, args.out)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    settings = _Settings(args)
    app = ScoringApp(
        dictionary=load_dictionary(args.dict),
        episodes=load_episodes(args.episodes),
        cfg=settings.reward_config(),
    )
    serve(app, args.host, args.port)
    return 0


def _add_reward_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--w-entity", type=float, dest="w_entity")
    parser.add_argument("--w-relation", type=float, dest="w_relation")
    parser.add_argument("--length-normalizer", type=float, dest="length_normalizer")
    parser.add_argument("--std-epsilon", type=float, dest="std_epsilon")


def _add_client_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--endpoint", dest="endpoint")
    parser.add_argument("--api-key", dest="api_key")
    parser.add_argument("--model", dest="model_id")
    parser.add_argument("--temperature", type=float, dest="temperature")
    parser.add_argument("--max-tokens", type=int, dest="max_tokens")
    parser.add_argument("--max-in-flight", type=int, dest="max_in_flight")
    parser.add_argument("--timeout", type=float, dest="timeout")
    parser.add_argument("--config", dest="config")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="relreward", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("sample-train", help="sample a training corpus")
    p.add_argument("--episodes", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stats", default=None)
    p.add_argument("--max-positives-per-label", type=int, required=True)
    p.add_argument("--cross-count", type=int, required=True)
    p.add_argument("--quota", action="append", metavar="LABEL=COUNT")
    p.add_argument("--no-relation-total", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sample_train)

    p = sub.add_parser("sample-test", help="sample a distribution-preserving test set")
    p.add_argument("--episodes", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stats", default=None)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sample_test)

    p = sub.add_parser("infer", help="run a prompt template over episodes")
    p.add_argument("--episodes", required=True)
    p.add_argument("--out", required=True, help="output/checkpoint JSONL; resumes if present")
    p.add_argument("--template", dest="template")
    p.add_argument("--request-seed", type=int, default=None)
    _add_client_flags(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("build-dict", help="build the keyword dictionary offline")
    p.add_argument("--episodes", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--endpoint", dest="endpoint", required=True)
    p.add_argument("--extractor-endpoint", default=None)
    p.add_argument("--extractor-model", dest="extractor_model_id")
    p.add_argument("--template", dest="template")
    p.add_argument("--samples-per-label", type=int, default=5)
    p.add_argument("--max-parallel-labels", type=int, default=1)
    p.add_argument("--no-relation-cue", action="append")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stamp", action="store_true", help="record the build time in meta")
    p.add_argument("--api-key", dest="api_key")
    p.add_argument("--model", dest="model_id")
    p.add_argument("--temperature", type=float, dest="temperature")
    p.add_argument("--max-tokens", type=int, dest="max_tokens")
    p.add_argument("--max-in-flight", type=int, dest="max_in_flight")
    p.add_argument("--timeout", type=float, dest="timeout")
    p.add_argument("--config", dest="config")
    p.set_defaults(func=cmd_build_dict)

    p = sub.add_parser("score", help="score raw outputs against a dictionary")
    p.add_argument("--dict", required=True)
    p.add_argument("--episodes", required=True)
    p.add_argument("--outputs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", dest="config")
    _add_reward_flags(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("advantages", help="group-relative advantages for rewards")
    p.add_argument("--rewards", default=None, help="JSON array of rewards")
    p.add_argument("--rewards-file", default=None, help="score output JSONL")
    p.add_argument("--config", dest="config")
    _add_reward_flags(p)
    p.set_defaults(func=cmd_advantages)

    p = sub.add_parser("evaluate", help="precision/recall/F1 over outputs")
    p.add_argument("--episodes", required=True)
    p.add_argument("--outputs", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("human-eval-export", help="sample explanations for raters")
    p.add_argument("--episodes", required=True)
    p.add_argument("--outputs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--per-category", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_human_eval_export)

    p = sub.add_parser("human-eval-aggregate", help="aggregate rater spreadsheets")
    p.add_argument("--ratings", action="append", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_human_eval_aggregate)

    p = sub.add_parser("serve", help="HTTP /score and /advantages endpoints")
    p.add_argument("--dict", required=True)
    p.add_argument("--episodes", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8370)
    p.add_argument("--config", dest="config")
    _add_reward_flags(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except CLIValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if getattr(args, "func", None) is None:
        parser.print_help(sys.stderr)
        return 1
    try:
        return args.func(args)
    except CLIValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (EpisodeLoadError, DictionaryFormatError, ChatClientError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
