import pytest

from relreward.core import Episode, GoldAnswer, RelationLabel, SentenceInstance
from relreward.dictionary import DictionaryEntry, DictionaryMeta, KeywordDictionary


def sentence(relation: str, text: str = "", subject: str = "A", obj: str = "B") -> SentenceInstance:
    if text:
        # keep entity spans inside the sentence so loaders stay quiet
        words = text.rstrip(".").split()
        subject, obj = words[0], words[-1]
    else:
        text = f"{subject} relates to {obj}."
    return SentenceInstance(
        text=text,
        subject=subject,
        object=obj,
        relation=RelationLabel(relation),
    )


def episode(
    ep_id: str,
    support_relation: str,
    test_relation: str,
    gold: GoldAnswer = GoldAnswer.DERIVED,
    support_text: str = "",
    test_text: str = "",
) -> Episode:
    return Episode(
        id=ep_id,
        support=sentence(support_relation, support_text),
        test=sentence(test_relation, test_text, subject="C", obj="D"),
        gold_answer=gold,
    )


@pytest.fixture
def schools_entry() -> DictionaryEntry:
    return DictionaryEntry(
        label=RelationLabel("per:schools_attended"),
        entity_keywords=("person", "school", "univers"),
        relation_keywords=("attend", "enrol", "graduat"),
    )


@pytest.fixture
def no_relation_entry() -> DictionaryEntry:
    return DictionaryEntry(
        label=RelationLabel("no_relation"),
        entity_keywords=(),
        relation_keywords=("relat", "no relation"),
    )


@pytest.fixture
def small_dictionary(schools_entry, no_relation_entry) -> KeywordDictionary:
    founded = DictionaryEntry(
        label=RelationLabel("org:founded_by"),
        entity_keywords=("organ", "compani", "person"),
        relation_keywords=("found", "cofound", "creat"),
    )
    entries = {e.label: e for e in (schools_entry, no_relation_entry, founded)}
    return KeywordDictionary(
        entries=entries,
        meta=DictionaryMeta(None, "mock-vanilla", "mock-extractor", 5, 0),
    )


# -- acceptance criterion reporting ------------------------------------------

_acceptance_results: list[tuple[str, bool]] = []


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.rsplit("::", 1)[-1]
    if name.startswith("test_criterion_"):
        _acceptance_results.append((name, report.passed))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for name, passed in sorted(_acceptance_results):
        tag = name.removeprefix("test_criterion_")
        number, _, slug = tag.partition("_")
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(
            f"  criterion {int(number):2d} [{status}] {slug.replace('_', ' ')}"
        )
