"""Reward engineering for one-shot relation extraction RL.

Everything around the GPU training loop: keyword-dictionary construction
from model self-explanations, dictionary-hit and accuracy rewards with
group-relative advantages, corpus sampling, prompt rendering and response
parsing, and the evaluation harness.
"""

from .core import (
    ConfusionCategory,
    Decision,
    Episode,
    GoldAnswer,
    ModelOutput,
    RelationLabel,
    SentenceInstance,
    classify,
    effective_answer,
    load_episodes,
    save_episodes,
)
from .dictionary import (
    BuilderConfig,
    DictionaryEntry,
    GoodCase,
    KeywordDictionary,
    build_dictionary,
    load_dictionary,
    save_dictionary,
)
from .evaluation import (
    AgreementReport,
    HumanEvalItem,
    MetricsReport,
    cohen_kappa,
    sample_for_human_eval,
    score_predictions,
)
from .reward import (
    HitCounts,
    RewardBreakdown,
    RewardConfig,
    accuracy_reward,
    combined_reward,
    group_advantages,
    hit_at_dict_reward,
    hit_counts,
    hit_score,
)
from .sampler import (
    CorpusSplit,
    CorpusStats,
    SamplerConfig,
    corpus_stats,
    sample_test_set,
    sample_training_set,
    split_corpus,
)
from .templates import render_prompt
from .textnorm import (
    LabelKeywords,
    NormalizedToken,
    dedupe_keywords,
    match_keyword,
    normalize,
    tokenize_label,
)

__version__ = "0.1.0"
