"""Chat-completion client, output parsers, and the batch inference driver.

The client speaks the standard chat-completions wire schema over an
injectable transport; a deterministic canned transport (endpoint scheme
``mock:``) serves offline runs and tests.  Parsers turn raw completions into
structured ModelOutput values and never raise on model noise: an answer that
cannot be read is the Unparseable decision, not an error.
"""

from __future__ import annotations

import json
import logging
import random
import re
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .core import Decision, Episode, ModelOutput
from .templates import episode_bindings, render_prompt
from .textnorm import STOPWORDS, normalize

logger = logging.getLogger(__name__)

Transport = Callable[[str, dict, bytes, float], tuple[int, bytes]]


class ChatClientError(Exception):
    pass


class TransportError(ChatClientError):
    """Network-level failure; retryable."""


class AuthError(ChatClientError):
    """Credential rejection; configuration-level, never retried."""


class MalformedResponseError(ChatClientError):
    """The endpoint answered 200 with a body that is not the wire schema."""


class RetriesExhaustedError(ChatClientError):
    pass


@dataclass(frozen=True)
class Message:
    role: str
    content: str


@dataclass(frozen=True)
class ChatRequest:
    model_id: str
    messages: tuple[Message, ...]
    temperature: float = 0.0
    max_tokens: int = 1024
    seed: Optional[int] = None

    def to_wire(self) -> dict:
        wire = {
            "model": self.model_id,
            "messages": [{"role": m.role, "content": m.content} for m in self.messages],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }
        if self.seed is not None:
            wire["seed"] = self.seed
        return wire


@dataclass(frozen=True)
class ChatResponse:
    content: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    total_tokens: int = 0
    latency_s: float = 0.0


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    base_backoff: float = 0.5
    jitter: float = 0.0


@dataclass(frozen=True)
class ClientPolicy:
    max_in_flight: int = 4
    timeout: float = 60.0
    retry: RetryPolicy = field(default_factory=RetryPolicy)

    def __post_init__(self) -> None:
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be at least 1")


@dataclass(frozen=True)
class RequestDefaults:
    """Per-run request parameters shared by every episode."""

    model_id: str
    temperature: float = 0.0
    max_tokens: int = 1024
    seed: Optional[int] = None


def http_transport(endpoint: str, headers: dict, body: bytes, timeout: float) -> tuple[int, bytes]:
    request = urllib.request.Request(endpoint, data=body, headers=headers, method="POST")
    try:
        with urllib.request.urlopen(request, timeout=timeout) as response:
            return response.status, response.read()
    except urllib.error.HTTPError as exc:
        return exc.code, exc.read()
    except (urllib.error.URLError, TimeoutError, OSError) as exc:
        raise TransportError(str(exc)) from exc


def make_mock_transport(responder: Callable[[str], str]) -> Transport:
    """Wrap a prompt->text function as a wire-level transport for tests."""

    def transport(endpoint: str, headers: dict, body: bytes, timeout: float) -> tuple[int, bytes]:
        request = json.loads(body.decode("utf-8"))
        prompt = request["messages"][-1]["content"]
        content = responder(prompt)
        payload = {
            "choices": [{"message": {"content": content}}],
            "usage": {
                "prompt_tokens": len(prompt.split()),
                "completion_tokens": len(content.split()),
                "total_tokens": len(prompt.split()) + len(content.split()),
            },
        }
        return 200, json.dumps(payload).encode("utf-8")

    return transport


_EXTRACTION_RELATION_RE = re.compile(r"^Relation:\s*(.+)$", re.MULTILINE)
_SUPPORT_LINE_RE = re.compile(r"^support_sentence:\s*(.+)$", re.MULTILINE)
_STEP_SENTENCE_RE = re.compile(
    r'Step 1: summarize the relations between "(?P<s_subj>.*?)" and '
    r'"(?P<s_obj>.*?)" in "(?P<s_text>.*?)"\.\s*\n'
    r".*?"
    r'Step 2: summarize the relations between "(?P<t_subj>.*?)" and '
    r'"(?P<t_obj>.*?)" in "(?P<t_text>.*?)"\.',
    re.DOTALL,
)
_QUESTION_RE = re.compile(
    r'between "(?P<s_subj>.*?)" and "(?P<s_obj>.*?)" in "(?P<s_text>.*?)" '
    r'and between "(?P<t_subj>.*?)" and "(?P<t_obj>.*?)" in (?P<t_text>.*?) similar\?',
    re.DOTALL,
)


def _content_words(text: str) -> list[str]:
    return [t.stem for t in normalize(text, drop_stopwords=True)]


def canned_responder(prompt: str) -> str:
    """Deterministic stand-in model for offline runs.

    Keyword-extraction prompts get back a list built from the relation's own
    segment words plus prominent content words of the first support sentence.
    Reasoning prompts get summaries that echo the sentences and a Yes/No that
    depends only on whether the two sentences share a content-word stem.
    """
    extraction = _EXTRACTION_RELATION_RE.search(prompt)
    if extraction and prompt.startswith("Relation:"):
        relation = extraction.group(1).strip()
        words = [w for w in re.split(r"[:/_]+", relation.lower()) if w and w not in STOPWORDS]
        support = _SUPPORT_LINE_RE.search(prompt)
        if support:
            for token in normalize(support.group(1), drop_stopwords=True):
                if token.surface.isalpha() and token.surface not in words:
                    words.append(token.surface)
                if len(words) >= 6:
                    break
        return json.dumps(words)

    match = _STEP_SENTENCE_RE.search(prompt) or _QUESTION_RE.search(prompt)
    if match is None:
        return "I cannot parse this request."
    groups = match.groupdict()
    support_text = groups["s_text"]
    test_text = groups["t_text"].strip().strip('"')
    overlap = sorted(set(_content_words(support_text)) & set(_content_words(test_text)))
    decision = "Yes" if overlap else "No"
    if "Directly answer Yes or No" in prompt and "understanding process" not in prompt.lower():
        return decision
    if overlap:
        reasoning = "The summaries share the cue words: " + ", ".join(overlap) + "."
    else:
        reasoning = "The summaries do not share any relation cue words."
    return (
        f"Relation_Summarization_1: {support_text}\n"
        f"Relation_Summarization_2: {test_text}\n"
        "Understanding Process:\n"
        f"{reasoning}\n"
        f"{decision}"
    )


canned_transport = make_mock_transport(canned_responder)


class ChatClient:
    """Retry-aware chat-completions client over an injectable transport."""

    def __init__(
        self,
        endpoint: str,
        api_key: str = "",
        transport: Optional[Transport] = None,
        sleep: Callable[[float], None] = time.sleep,
        rng: Optional[random.Random] = None,
    ):
        self.endpoint = endpoint
        self.api_key = api_key
        if transport is None:
            transport = canned_transport if endpoint.startswith("mock:") else http_transport
        self._transport = transport
        self._sleep = sleep
        self._rng = rng or random.Random(0)

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    def complete(self, request: ChatRequest, policy: ClientPolicy) -> ChatResponse:
        """Return the first successful completion within the retry budget.

        Retries cover transport failures and HTTP 429/5xx only; auth and
        malformed-body failures surface immediately.
        """
        payload = json.dumps(request.to_wire()).encode("utf-8")
        attempts = 0
        last_error: Exception | None = None
        started = time.perf_counter()
        while attempts < policy.retry.max_attempts:
            attempts += 1
            try:
                status, body = self._transport(self.endpoint, self._headers(), payload, policy.timeout)
            except TransportError as exc:
                last_error = exc
            else:
                if status == 200:
                    return self._parse_body(body, time.perf_counter() - started)
                if status in (401, 403):
                    raise AuthError(f"authentication failed (HTTP {status})")
                if status == 429 or status >= 500:
                    last_error = TransportError(f"HTTP {status}")
                else:
                    raise ChatClientError(f"HTTP {status}: {body[:200]!r}")
            if attempts < policy.retry.max_attempts:
                delay = policy.retry.base_backoff * (2 ** (attempts - 1))
                if policy.retry.jitter:
                    delay += self._rng.uniform(0, policy.retry.jitter)
                self._sleep(delay)
        raise RetriesExhaustedError(
            f"gave up after {attempts} attempt(s): {last_error}"
        ) from last_error

    @staticmethod
    def _parse_body(body: bytes, latency: float) -> ChatResponse:
        try:
            obj = json.loads(body.decode("utf-8"))
            content = obj["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedResponseError(f"unparseable response body: {body[:200]!r}") from exc
        usage = obj.get("usage") or {}
        return ChatResponse(
            content=str(content),
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
            total_tokens=int(usage.get("total_tokens", 0)),
            latency_s=latency,
        )


def _alpha(text: str) -> str:
    return "".join(ch for ch in text if ch.isalpha()).lower()


_CONCLUSION_VERDICT_RE = re.compile(r"\W*(yes|no)\b", re.IGNORECASE)


def _line_decision(line: str) -> Optional[Decision]:
    alpha = _alpha(line)
    if alpha == "yes":
        return Decision.YES
    if alpha == "no":
        return Decision.NO
    cleaned = line.strip().lstrip("#*->_• \t").lower()
    if cleaned.startswith("conclusion"):
        _, sep, rest = cleaned.partition(":")
        if sep:
            verdict = _CONCLUSION_VERDICT_RE.match(rest)
            if verdict:
                return Decision.YES if verdict.group(1).lower() == "yes" else Decision.NO
    return None


def parse_decision(raw: str) -> Decision:
    """Read the final Yes/No off a completion.

    Non-empty lines are scanned from the end; the first whose alphabetic
    content is exactly yes/no, or that opens with "Conclusion:" followed by a
    yes/no, decides.  Anything else is Unparseable.
    """
    for line in reversed(raw.splitlines()):
        if not line.strip():
            continue
        decision = _line_decision(line)
        if decision is not None:
            return decision
    return Decision.UNPARSEABLE


_SUMMARY_LABEL_RE = re.compile(r"relation_summarization_([12])\s*:?[ \t]*", re.IGNORECASE)
_SUMMARY_BOUNDARY_RE = re.compile(r"\n\s*\n|\n[A-Za-z][A-Za-z_ ]{0,40}:")


def parse_summaries(raw: str) -> tuple[Optional[str], Optional[str]]:
    """Extract the two labeled relation summaries when present."""
    found: dict[str, str] = {}
    matches = list(_SUMMARY_LABEL_RE.finditer(raw))
    for i, match in enumerate(matches):
        index = match.group(1)
        if index in found:
            continue
        start = match.end()
        end = matches[i + 1].start() if i + 1 < len(matches) else len(raw)
        boundary = _SUMMARY_BOUNDARY_RE.search(raw, start, end)
        if boundary:
            end = boundary.start()
        text = raw[start:end].strip()
        if text:
            found[index] = text
    return found.get("1"), found.get("2")


def parse_model_output(raw: str, error: Optional[str] = None) -> ModelOutput:
    """Parse a completion into explanation, summaries, and decision.

    The explanation is the raw text with the deciding line removed; when no
    decision is readable the full text stands as the explanation.
    """
    lines = raw.splitlines()
    decision = Decision.UNPARSEABLE
    deciding_index: Optional[int] = None
    for index in range(len(lines) - 1, -1, -1):
        if not lines[index].strip():
            continue
        parsed = _line_decision(lines[index])
        if parsed is not None:
            decision = parsed
            deciding_index = index
            break
    if deciding_index is None:
        explanation = raw
    else:
        explanation = "\n".join(
            line for i, line in enumerate(lines) if i != deciding_index
        ).strip()
    summary_1, summary_2 = parse_summaries(raw)
    return ModelOutput(
        raw_text=raw,
        explanation=explanation,
        decision=decision,
        summary_1=summary_1,
        summary_2=summary_2,
        error=error,
    )


def _load_checkpoint(path: Path) -> dict[str, str]:
    done: dict[str, str] = {}
    if not path.exists():
        return done
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                done[str(obj["id"])] = str(obj["raw_text"])
            except (ValueError, KeyError, TypeError):
                # a crash mid-append can truncate the tail line; treat the
                # item as not completed rather than refusing to resume
                logger.warning("checkpoint %s: skipping corrupt line %d", path, line_no)
    return done


def run_inference(
    episodes: list[Episode],
    template_name: str,
    client: ChatClient,
    defaults: RequestDefaults,
    policy: ClientPolicy,
    checkpoint_path: str | Path | None = None,
) -> list[tuple[Episode, ModelOutput]]:
    """Render, call, and parse every episode, preserving input order.

    Completions are appended to the checkpoint file as they arrive (single
    writer); on resumption, episodes whose ids are already checkpointed are
    not re-sent.  Per-item failures become Unparseable outputs with the error
    attached; only configuration-level failures (bad template, bad
    credentials) abort the run.
    """
    checkpoint = Path(checkpoint_path) if checkpoint_path else None
    done = _load_checkpoint(checkpoint) if checkpoint else {}
    if done:
        logger.info("resuming: %d episode(s) already completed", len(done))

    pending = [ep for ep in episodes if ep.id not in done]
    for episode in pending:
        episode_bindings(template_name, episode)  # fail fast on bad templates

    raw_results: dict[str, str] = dict(done)
    errors: dict[str, str] = {}
    total_tokens = 0

    def call(episode: Episode) -> ChatResponse:
        prompt = render_prompt(template_name, episode_bindings(template_name, episode))
        request = ChatRequest(
            model_id=defaults.model_id,
            messages=(Message("user", prompt),),
            temperature=defaults.temperature,
            max_tokens=defaults.max_tokens,
            seed=defaults.seed,
        )
        return client.complete(request, policy)

    handle = open(checkpoint, "a", encoding="utf-8", newline="\n") if checkpoint else None
    try:
        with ThreadPoolExecutor(max_workers=policy.max_in_flight) as pool:
            futures = {pool.submit(call, ep): ep for ep in pending}
            completed = 0
            for future in as_completed(futures):
                episode = futures[future]
                completed += 1
                try:
                    response = future.result()
                except AuthError:
                    raise
                except ChatClientError as exc:
                    errors[episode.id] = str(exc)
                    logger.warning("episode %s failed: %s", episode.id, exc)
                    continue
                raw_results[episode.id] = response.content
                total_tokens += response.total_tokens
                if handle is not None:
                    handle.write(
                        json.dumps(
                            {"id": episode.id, "raw_text": response.content},
                            ensure_ascii=False,
                        )
                    )
                    handle.write("\n")
                    handle.flush()
                if completed % 50 == 0 or completed == len(pending):
                    logger.info(
                        "inference progress: %d/%d (tokens so far: %d)",
                        completed, len(pending), total_tokens,
                    )
    finally:
        if handle is not None:
            handle.close()

    results: list[tuple[Episode, ModelOutput]] = []
    for episode in episodes:
        if episode.id in raw_results:
            results.append((episode, parse_model_output(raw_results[episode.id])))
        else:
            results.append(
                (
                    episode,
                    ModelOutput(
                        raw_text="",
                        explanation="",
                        decision=Decision.UNPARSEABLE,
                        error=errors.get(episode.id, "no completion"),
                    ),
                )
            )
    return results
