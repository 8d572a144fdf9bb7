"""Prompt templates and the placeholder-substitution renderer.

Template bodies are stored verbatim (including quirks of the source prompts);
rendering is a single literal pass, so placeholder markers inside bound
values are never re-expanded.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

_PLACEHOLDER_RE = re.compile(r"\{([a-z0-9_]+)\}")


class UnknownTemplateError(KeyError):
    pass


class MissingBindingError(KeyError):
    def __init__(self, placeholder: str):
        self.placeholder = placeholder
        super().__init__(f"missing binding for placeholder {placeholder!r}")


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str
    placeholders: frozenset[str]


_HEADER = (
    "You are given two sentences. Follow the three steps below to determine "
    "whether they express a similar relation."
)

_SUMMARIZATION_EXAMPLES = """\
Summarize the relations between "Malcolm Peeler" and "Pangburn" in "Dr. Malcolm Peeler , grew in Pangburn, has continued the family tradition of practicing medicine in Jonesboro .".
Summarization: Malcolm Peeler came from Pangburn.

Summarize the relations between "Oceania" and "PECC" in "Oceania and the Western Hemisphere within the PECC region , as surplus food producers and exporters , confront unique consumer issues , such as lower food expenditure and higher caloric intake compared to Asia .".
Summarization: Oceania within region PECC.

Summarize the relations between "Global Climate Research Institute" and "GCRI" in "Climate change challenges remain a key concern at the annual summit. The outlook is concerning, according to the Global Climate Research Institute ( GCRI ), which coordinates the event each year.".
Summarization: Global Climate Research Institute is abbreviated as GCRI.

Summarize the relations between "Panasonic Corp" and "Tesla Inc" in "Tesla Inc. is a wholly-owned subsidiary of Panasonic Corp, focusing on energy storage solutions.".
Summarization: Panasonic Corp is a subsidiary of Tesla Inc.\
"""

_SUMMARIZE_STEPS_1_2 = """\
Step 1: summarize the relations between "{support_sentence_subject}" and "{support_sentence_object}" in "{support_sentence}".
Label your result as: Relation_Summarization_1.

Step 2: summarize the relations between "{test_sentence_subject}" and "{test_sentence_object}" in "{test_sentence}".
Label your result as: Relation_Summarization_2.\
"""

COGRE = f"""\
{_HEADER}

---

Summarization: Focus on the main parts between subjects and objects in the sentences.
Summarization examples:

{_SUMMARIZATION_EXAMPLES}

---

{_SUMMARIZE_STEPS_1_2}

Step 3: are the relations between "{{support_sentence_subject}}" and "{{support_sentence_object}}" in Relation_Summarization_1 and between "{{test_sentence_subject}}" and "{{test_sentence_object}}" in Relation_Summarization_2 similar?
Focus on the keywords in the Relation_Summarization_1 an Relation_Summarization_2 that convey relations.

Generate the understanding process, followed by Yes or No in a separate line.
"""

DIRECT = """\
Are the relations between "{support_sentence_subject}" and "{support_sentence_object}" in "{support_sentence}" and between "{test_sentence_subject}" and "{test_sentence_object}" in {test_sentence} similar?
Directly answer Yes or No in a separate line.
---
IMPORTANT: must answer with just Yes or No.
"""

SIMPLE_REASONING = """\
Are the relations between "{support_sentence_subject}" and "{support_sentence_object}" in "{support_sentence}" and between "{test_sentence_subject}" and "{test_sentence_object}" in {test_sentence} similar?
Generate the understanding process, followed by Yes or No in a separate line.
"""

SUMASK_ONE_PROMPT = f"""\
{_HEADER}

---

Summarization examples:

{_SUMMARIZATION_EXAMPLES}

---

{_SUMMARIZE_STEPS_1_2}

Step 3: generate a question as: are the relations between "{{support_sentence_subject}}" and "{{support_sentence_object}}" in Relation_Summarization_1 and between "{{test_sentence_subject}}" and "{{test_sentence_object}}" in Relation_Summarization_2 similar?

Step 4: directly answer the question with Yes or No in a separate line.
"""

KEYWORD_EXTRACTION_HEADER = """\
Relation: {relation}
Please extract the words or phrases that indicate trigger words or relation summaries from the following answers; the relation is {relation}.
Output a string list contain all the words.
"""

KEYWORD_EXTRACTION_CASE = """\
output_case_{index}:
{content}
support_sentence: {support_sentence}
test_sentence: {test_sentence}
"""

KEYWORD_EXTRACTION = KEYWORD_EXTRACTION_HEADER + "\n".join(
    KEYWORD_EXTRACTION_CASE.replace("{index}", str(i))
    .replace("{content}", f"{{content_{i}}}")
    .replace("{support_sentence}", f"{{support_sentence_{i}}}")
    .replace("{test_sentence}", f"{{test_sentence_{i}}}")
    for i in range(1, 6)
)

ABLATE_NO_CHUNKING = f"""\
{_HEADER}
Step1: are the relations between "{{paraphrased_sentence_subject}}" and "{{paraphrased_sentence_object}}" in {{paraphrased_sentence}} and between "{{test_sentence_subject}}" and "{{test_sentence_object}}" in {{test_sentence}} similar? Focus on the keywords in the {{paraphrased_sentence}} an {{test_sentence}} that convey relations.
Generate the understanding process, followed by Yes or No in a separate line.
"""

ABLATE_NO_REASONING = f"""\
{_HEADER}

---

Summarization examples:

{_SUMMARIZATION_EXAMPLES}

---

{_SUMMARIZE_STEPS_1_2}

Step 3: generate a question as: are the relations between "{{support_sentence_subject}}" and "{{support_sentence_object}}" in Relation_Summarization_1 and between "{{test_sentence_subject}}" and "{{test_sentence_object}}" in Relation_Summarization_2 similar?

Step 4: Focus on the keywords in the Relation_Summarization_1 an Relation_Summarization_2 that convey relations, and directly answer the question with Yes or No in a separate line.
"""

ABLATE_NO_KEYWORDS = f"""\
{_HEADER}

---

Summarization examples:

{_SUMMARIZATION_EXAMPLES}

---

{_SUMMARIZE_STEPS_1_2}

Step 3: generate a question as: are the relations between "{{support_sentence_subject}}" and "{{support_sentence_object}}" in Relation_Summarization_1 and between "{{test_sentence_subject}}" and "{{test_sentence_object}}" in Relation_Summarization_2 similar?
Generate the understanding process, followed by Yes or No in a separate line.
"""


def scan_placeholders(body: str) -> frozenset[str]:
    return frozenset(_PLACEHOLDER_RE.findall(body))


def _template(name: str, body: str) -> PromptTemplate:
    return PromptTemplate(name=name, body=body, placeholders=scan_placeholders(body))


TEMPLATES: dict[str, PromptTemplate] = {
    t.name: t
    for t in (
        _template("cogre", COGRE),
        _template("direct", DIRECT),
        _template("simple_reasoning", SIMPLE_REASONING),
        _template("sumask_one_prompt", SUMASK_ONE_PROMPT),
        _template("keyword_extraction", KEYWORD_EXTRACTION),
        _template("ablate_no_chunking", ABLATE_NO_CHUNKING),
        _template("ablate_no_reasoning", ABLATE_NO_REASONING),
        _template("ablate_no_keywords", ABLATE_NO_KEYWORDS),
    )
}


def get_template(name: str) -> PromptTemplate:
    try:
        return TEMPLATES[name]
    except KeyError:
        raise UnknownTemplateError(f"unknown template {name!r}") from None


def fill(body: str, bindings: dict[str, str]) -> str:
    """Substitute placeholders in one pass; bound values are inserted literally."""

    def replace(match: re.Match) -> str:
        key = match.group(1)
        if key not in bindings:
            raise MissingBindingError(key)
        return bindings[key]

    return _PLACEHOLDER_RE.sub(replace, body)


def render_prompt(name: str, bindings: dict[str, str]) -> str:
    """Fill a template's placeholders with literal values, no re-expansion."""
    return fill(get_template(name).body, bindings)


def episode_bindings(template_name: str, episode) -> dict[str, str]:
    """Map an episode's fields onto a template's placeholder names."""
    template = get_template(template_name)
    values = {
        "support_sentence_subject": episode.support.subject,
        "support_sentence_object": episode.support.object,
        "support_sentence": episode.support.text,
        "test_sentence_subject": episode.test.subject,
        "test_sentence_object": episode.test.object,
        "test_sentence": episode.test.text,
        # the no-chunking ablation takes a paraphrase where the others take
        # the raw support sentence; without a paraphraser we pass it through
        "paraphrased_sentence_subject": episode.support.subject,
        "paraphrased_sentence_object": episode.support.object,
        "paraphrased_sentence": episode.support.text,
    }
    unknown = template.placeholders - values.keys()
    if unknown:
        raise MissingBindingError(sorted(unknown)[0])
    return {k: values[k] for k in template.placeholders}


def episode_template_names() -> list[str]:
    """Templates renderable directly from an episode (not keyword extraction)."""
    return [name for name in TEMPLATES if name != "keyword_extraction"]
