#!/usr/bin/env python3
"""Benchmark the compiled stemming kernel against the pure-Python fallback.

Two workloads:
  stem   - raw stemming throughput over a synthetic token corpus
  score  - end-to-end reward scoring (tokenize + stem + match + score),
           the loop a trainer drives on every rollout

Each backend runs in a subprocess so the import-time backend selection is
exercised exactly as production does it (RELREWARD_PURE_PYTHON=1 forces the
fallback).

Usage: python benchmarks/bench_kernels.py [--mode stem|score|both] [--repeat N]
"""

from __future__ import annotations

import argparse
import json
import os
import random
import subprocess
import sys
import time


def token_corpus(n: int = 200_000) -> list[str]:
    rng = random.Random(1234)
    stems = [
        "found", "attend", "school", "relation", "university", "sibling",
        "organization", "company", "location", "country", "capital",
        "employee", "member", "summary", "sentence", "person", "city",
        "marriage", "nationally", "hopefulness", "adjustment", "scoring",
    ]
    suffixes = ["", "s", "ed", "ing", "al", "ation", "ness", "er", "ly"]
    return [rng.choice(stems) + rng.choice(suffixes) for _ in range(n)]


def bench_stem() -> dict:
    from relreward import _kernels

    corpus = token_corpus()
    _kernels.stem_words(corpus[:1000])  # warm up
    started = time.perf_counter()
    _kernels.stem_words(corpus)
    elapsed = time.perf_counter() - started
    return {
        "backend": _kernels.BACKEND,
        "tokens": len(corpus),
        "seconds": elapsed,
        "tokens_per_second": len(corpus) / elapsed,
    }


def bench_score() -> dict:
    from relreward import _kernels
    from relreward.core import RelationLabel
    from relreward.dictionary import DictionaryEntry, DictionaryMeta, KeywordDictionary
    from relreward.reward import RewardConfig, hit_at_dict_reward

    rng = random.Random(99)
    labels = [RelationLabel(f"rel:kind_{i}") for i in range(10)]
    vocabulary = token_corpus(4000)
    entries = {
        label: DictionaryEntry(
            label,
            entity_keywords=tuple(rng.sample(vocabulary, 3)),
            relation_keywords=tuple(rng.sample(vocabulary, 8)),
        )
        for label in labels
    }
    dictionary = KeywordDictionary(entries, DictionaryMeta(None, "", "", 1, 0))
    explanations = [
        " ".join(rng.sample(vocabulary, rng.randint(30, 90))) for _ in range(300)
    ]
    cfg = RewardConfig()

    hit_at_dict_reward(explanations[0], labels[0], labels[1], dictionary, cfg)
    started = time.perf_counter()
    count = 0
    for explanation in explanations:
        r1, r2 = rng.choice(labels), rng.choice(labels)
        hit_at_dict_reward(explanation, r1, r2, dictionary, cfg)
        count += 1
    elapsed = time.perf_counter() - started
    return {
        "backend": _kernels.BACKEND,
        "scored": count,
        "seconds": elapsed,
        "scores_per_second": count / elapsed,
    }


def run_worker(mode: str, force_pure: bool) -> dict:
    env = dict(os.environ)
    env.pop("RELREWARD_PURE_PYTHON", None)
    if force_pure:
        env["RELREWARD_PURE_PYTHON"] = "1"
    result = subprocess.run(
        [sys.executable, os.path.abspath(__file__), "--worker", mode],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    return json.loads(result.stdout)


def compare(mode: str, repeat: int) -> None:
    rate_key = "tokens_per_second" if mode == "stem" else "scores_per_second"
    results = {}
    for force_pure in (False, True):
        best = None
        for _ in range(repeat):
            row = run_worker(mode, force_pure)
            if best is None or row[rate_key] > best[rate_key]:
                best = row
        results[best["backend"]] = best
    print(f"\n{mode} workload (best of {repeat}):")
    for backend, row in results.items():
        print(f"  {backend:5s}  {row['seconds']:.3f}s  {row[rate_key]:>12,.0f} {rate_key}")
    if "c" in results and "pure" in results:
        speedup = results["c"][rate_key] / results["pure"][rate_key]
        print(f"  compiled speedup: x{speedup:.1f}")
    elif "c" not in results:
        print("  compiled backend not built; only the fallback was measured")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--mode", choices=("stem", "score", "both"), default="both")
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--worker", choices=("stem", "score"), help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.worker:
        row = bench_stem() if args.worker == "stem" else bench_score()
        print(json.dumps(row))
        return 0

    modes = ("stem", "score") if args.mode == "both" else (args.mode,)
    for mode in modes:
        compare(mode, args.repeat)
    return 0


if __name__ == "__main__":
    sys.exit(main())
