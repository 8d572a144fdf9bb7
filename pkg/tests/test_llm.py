import json
import string

import pytest
from hypothesis import given
from hypothesis import strategies as st

from relreward.core import Decision
from relreward.llm import (
    AuthError,
    ChatClient,
    ChatRequest,
    ClientPolicy,
    MalformedResponseError,
    Message,
    RequestDefaults,
    RetriesExhaustedError,
    RetryPolicy,
    canned_responder,
    make_mock_transport,
    parse_decision,
    parse_model_output,
    parse_summaries,
    run_inference,
)
from relreward.templates import (
    TEMPLATES,
    MissingBindingError,
    UnknownTemplateError,
    episode_bindings,
    render_prompt,
    scan_placeholders,
)
from tests.conftest import episode


def full_bindings(value="X"):
    return {
        "support_sentence_subject": "Dominique de Menil",
        "support_sentence_object": "Menil Collection",
        "support_sentence": "Dominique de Menil founded the Menil Collection.",
        "test_sentence_subject": "Angelo Mozilo",
        "test_sentence_object": "Countrywide Financial",
        "test_sentence": "Angelo Mozilo co-founded Countrywide Financial.",
    }


class TestTemplates:
    def test_registry_has_all_eight(self):
        assert set(TEMPLATES) == {
            "cogre",
            "direct",
            "simple_reasoning",
            "sumask_one_prompt",
            "keyword_extraction",
            "ablate_no_chunking",
            "ablate_no_reasoning",
            "ablate_no_keywords",
        }

    def test_declared_placeholders_match_bodies(self):
        for template in TEMPLATES.values():
            assert scan_placeholders(template.body) == template.placeholders

    def test_cogre_render_contains_label_line_and_subject(self):
        rendered = render_prompt("cogre", full_bindings())
        assert "Label your result as: Relation_Summarization_1." in rendered
        assert "Dominique de Menil" in rendered
        assert "{" not in rendered and "}" not in rendered

    def test_missing_binding_names_placeholder(self):
        bindings = full_bindings()
        del bindings["test_sentence"]
        with pytest.raises(MissingBindingError) as exc_info:
            render_prompt("cogre", bindings)
        assert exc_info.value.placeholder == "test_sentence"

    def test_unknown_template(self):
        with pytest.raises(UnknownTemplateError):
            render_prompt("nonexistent", {})

    def test_binding_value_with_marker_is_literal(self):
        bindings = full_bindings()
        bindings["support_sentence"] = "contains {test_sentence} marker"
        rendered = render_prompt("cogre", bindings)
        assert "contains {test_sentence} marker" in rendered

    def test_keyword_extraction_has_five_blocks(self):
        body = TEMPLATES["keyword_extraction"].body
        for i in range(1, 6):
            assert f"output_case_{i}:" in body

    @given(
        st.dictionaries(
            st.sampled_from(sorted(full_bindings())),
            st.text(alphabet=string.ascii_letters + " ", min_size=1, max_size=12),
            min_size=6,
        ),
        st.dictionaries(
            st.sampled_from(sorted(full_bindings())),
            st.text(alphabet=string.ascii_letters + " ", min_size=1, max_size=12),
            min_size=6,
        ),
    )
    def test_render_injective_for_marker_free_values(self, a, b):
        rendered_a = render_prompt("cogre", a)
        rendered_b = render_prompt("cogre", b)
        assert (rendered_a == rendered_b) == (a == b)

    def test_episode_bindings_cover_each_template(self):
        ep = episode("e", "per:siblings", "per:siblings")
        for name in TEMPLATES:
            if name == "keyword_extraction":
                continue
            rendered = render_prompt(name, episode_bindings(name, ep))
            assert "{" not in rendered


class TestParseDecision:
    @pytest.mark.parametrize(
        "raw,expected",
        [
            ("reasoning here\nYes", Decision.YES),
            ("reasoning here\nNo", Decision.NO),
            ("the answer could be Yes somewhere\nConclusion: No.", Decision.NO),
            ("Conclusion:\nYes.", Decision.YES),
            ("maybe", Decision.UNPARSEABLE),
            ("", Decision.UNPARSEABLE),
            ("**Yes**", Decision.YES),
            ("yes!", Decision.YES),
            ("Notably absent", Decision.UNPARSEABLE),
            ("Yes\n\n   \n", Decision.YES),
            ("Conclusion: Yes, they match.", Decision.YES),
            ("Conclusion: Not the same.", Decision.UNPARSEABLE),
        ],
    )
    def test_cases(self, raw, expected):
        assert parse_decision(raw) == expected

    @given(st.text(alphabet=string.ascii_letters + " .,\n", max_size=80))
    def test_appending_yes_line_decides_yes(self, prefix):
        assert parse_decision(prefix + "\nYes") is Decision.YES

    @given(st.sampled_from([" ", "\t", ".", "!", "**", "  .  "]))
    def test_trailing_noise_on_decision_line(self, noise):
        assert parse_decision("reasoning\nYes" + noise) is Decision.YES


class TestParseSummaries:
    A4_SHAPED = (
        "Relation_Summarization_1:  \n"
        "Federal regulators filed a civil fraud lawsuit against Angelo Mozilo, \n"
        "co-founder of Countrywide Financial Corp.\n"
        "Relation_Summarization_2:  Dominique de Menil founded the Menil Collection.\n"
        "\n"
        "Understanding Process:\n"
        "- details here.\n"
        "Conclusion: No.\n"
    )

    def test_both_labels_extracted(self):
        summary_1, summary_2 = parse_summaries(self.A4_SHAPED)
        assert summary_1.startswith("Federal regulators")
        assert summary_1.endswith("Corp.")
        assert summary_2 == "Dominique de Menil founded the Menil Collection."

    def test_only_first_label(self):
        summary_1, summary_2 = parse_summaries("Relation_Summarization_1: only one here\n")
        assert summary_1 == "only one here"
        assert summary_2 is None

    def test_neither_label(self):
        assert parse_summaries("no labels at all") == (None, None)

    def test_unlabeled_section_does_not_leak(self):
        raw = (
            "Relation_Summarization_2: Bob founded Acme.\n"
            "Understanding Process: irrelevant\n"
        )
        _, summary_2 = parse_summaries(raw)
        assert summary_2 == "Bob founded Acme."


class TestParseModelOutput:
    def test_decision_line_removed_from_explanation(self):
        output = parse_model_output("line one\nline two\nYes")
        assert output.decision is Decision.YES
        assert output.explanation == "line one\nline two"
        assert len(output.explanation) <= len(output.raw_text)

    def test_unparseable_keeps_full_text(self):
        output = parse_model_output("nothing to see")
        assert output.decision is Decision.UNPARSEABLE
        assert output.explanation == "nothing to see"


def echo_transport_factory(responses):
    """Transport returning queued (status, body) pairs, recording calls."""
    calls = []

    def transport(endpoint, headers, body, timeout):
        calls.append(json.loads(body.decode("utf-8")))
        status, content = responses[min(len(calls) - 1, len(responses) - 1)]
        if isinstance(content, str):
            payload = {
                "choices": [{"message": {"content": content}}],
                "usage": {"prompt_tokens": 1, "completion_tokens": 1, "total_tokens": 2},
            }
            return status, json.dumps(payload).encode()
        return status, content

    transport.calls = calls
    return transport


REQ = ChatRequest(model_id="m", messages=(Message("user", "hello"),))


class TestChatClient:
    def test_echo_roundtrip(self):
        client = ChatClient("http://x", transport=make_mock_transport(lambda p: p.upper()))
        response = client.complete(REQ, ClientPolicy())
        assert response.content == "HELLO"
        assert response.total_tokens == 2

    def test_retries_on_429_then_succeeds_with_backoff(self):
        transport = echo_transport_factory([(429, b""), (429, b""), (200, "ok")])
        sleeps = []
        client = ChatClient("http://x", transport=transport, sleep=sleeps.append)
        policy = ClientPolicy(retry=RetryPolicy(max_attempts=3, base_backoff=0.5, jitter=0.0))
        response = client.complete(REQ, policy)
        assert response.content == "ok"
        assert len(transport.calls) == 3
        assert sleeps == [0.5, 1.0]

    def test_jitter_stays_within_bounds(self):
        import random as random_module

        transport = echo_transport_factory([(429, b""), (200, "ok")])
        sleeps = []
        client = ChatClient(
            "http://x", transport=transport, sleep=sleeps.append,
            rng=random_module.Random(3),
        )
        policy = ClientPolicy(retry=RetryPolicy(max_attempts=2, base_backoff=1.0, jitter=0.25))
        client.complete(REQ, policy)
        assert len(sleeps) == 1
        assert 1.0 <= sleeps[0] <= 1.25

    def test_gives_up_after_budget(self):
        transport = echo_transport_factory([(500, b"boom")])
        client = ChatClient("http://x", transport=transport, sleep=lambda s: None)
        with pytest.raises(RetriesExhaustedError):
            client.complete(REQ, ClientPolicy(retry=RetryPolicy(max_attempts=2)))
        assert len(transport.calls) == 2

    def test_auth_failure_is_immediate(self):
        transport = echo_transport_factory([(401, b"denied")])
        client = ChatClient("http://x", transport=transport, sleep=lambda s: None)
        with pytest.raises(AuthError):
            client.complete(REQ, ClientPolicy())
        assert len(transport.calls) == 1

    def test_malformed_body_errors(self):
        transport = echo_transport_factory([(200, b"not json")])
        client = ChatClient("http://x", transport=transport, sleep=lambda s: None)
        with pytest.raises(MalformedResponseError):
            client.complete(REQ, ClientPolicy())

    def test_wire_schema(self):
        transport = echo_transport_factory([(200, "fine")])
        client = ChatClient("http://x", api_key="sk-test", transport=transport)
        request = ChatRequest(
            model_id="m1",
            messages=(Message("user", "q"),),
            temperature=0.25,
            max_tokens=64,
        )
        client.complete(request, ClientPolicy())
        wire = transport.calls[0]
        assert wire == {
            "model": "m1",
            "messages": [{"role": "user", "content": "q"}],
            "temperature": 0.25,
            "max_tokens": 64,
        }

    def test_mock_endpoint_selects_canned_transport(self):
        client = ChatClient("mock:canned")
        prompt = render_prompt("cogre", episode_bindings("cogre", episode(
            "e", "org:founded_by", "org:founded_by",
            support_text="Ann founded Acme.", test_text="Bob founded Biz.",
        )))
        response = client.complete(
            ChatRequest(model_id="m", messages=(Message("user", prompt),)),
            ClientPolicy(),
        )
        assert "Relation_Summarization_1" in response.content


class TestCannedResponder:
    def test_extraction_prompt_yields_keyword_list(self):
        prompt = (
            "Relation: org:founded_by\n"
            "Please extract the words...\n"
            "output_case_1:\nwhatever\n"
            "support_sentence: Ann founded the Acme Corporation.\n"
            "test_sentence: Bob founded Biz.\n"
        )
        keywords = json.loads(canned_responder(prompt))
        assert "founded" in keywords
        assert keywords == sorted(set(keywords), key=keywords.index)

    def test_reasoning_prompt_decision_depends_on_overlap(self):
        matched = episode(
            "e", "a:b", "a:b",
            support_text="Ann founded Acme.", test_text="Bob founded Biz.",
        )
        unmatched = episode(
            "e2", "a:b", "c:d",
            support_text="Ann founded Acme.", test_text="Cats sleep daily.",
        )
        yes = canned_responder(render_prompt("cogre", episode_bindings("cogre", matched)))
        no = canned_responder(render_prompt("cogre", episode_bindings("cogre", unmatched)))
        assert parse_decision(yes) is Decision.YES
        assert parse_decision(no) is Decision.NO

    def test_direct_prompt_is_bare_answer(self):
        ep = episode(
            "e", "a:b", "a:b",
            support_text="Ann founded Acme.", test_text="Bob founded Biz.",
        )
        raw = canned_responder(render_prompt("direct", episode_bindings("direct", ep)))
        assert raw == "Yes"


DEFAULTS = RequestDefaults(model_id="m")
POLICY = ClientPolicy(max_in_flight=2, retry=RetryPolicy(max_attempts=1))


def make_episodes(n=3):
    return [
        episode(
            f"ep{i}", "org:founded_by", "org:founded_by",
            support_text=f"Ann founded Acme{i}.", test_text=f"Bob founded Biz{i}.",
        )
        for i in range(n)
    ]


class TestRunInference:
    def test_preserves_order(self, tmp_path):
        episodes = make_episodes(3)
        client = ChatClient("mock:canned")
        results = run_inference(episodes, "cogre", client, DEFAULTS, POLICY)
        assert [ep.id for ep, _ in results] == ["ep0", "ep1", "ep2"]
        assert all(output.decision is Decision.YES for _, output in results)

    def test_partial_failure_degrades_to_unparseable(self):
        episodes = make_episodes(3)

        def flaky(prompt):
            if "Acme1" in prompt:
                raise RuntimeError("no canned answer")
            return canned_responder(prompt)

        def transport(endpoint, headers, body, timeout):
            request = json.loads(body.decode())
            prompt = request["messages"][-1]["content"]
            if "Acme1" in prompt:
                return 500, b"server error"
            return make_mock_transport(canned_responder)(endpoint, headers, body, timeout)

        client = ChatClient("http://x", transport=transport, sleep=lambda s: None)
        results = run_inference(episodes, "cogre", client, DEFAULTS, POLICY)
        assert results[1][1].decision is Decision.UNPARSEABLE
        assert results[1][1].error
        assert results[0][1].decision is Decision.YES
        assert results[2][1].decision is Decision.YES

    def test_corrupt_checkpoint_tail_line_is_redone(self, tmp_path, caplog):
        episodes = make_episodes(2)
        checkpoint = tmp_path / "out.jsonl"
        checkpoint.write_text(
            json.dumps({"id": "ep0", "raw_text": "kept\nYes"}) + "\n"
            + '{"id": "ep1", "raw_te',  # truncated by a crash
            encoding="utf-8",
        )
        client = ChatClient("mock:canned")
        with caplog.at_level("WARNING", logger="relreward.llm"):
            results = run_inference(
                episodes, "cogre", client, DEFAULTS, POLICY, checkpoint_path=checkpoint
            )
        assert results[0][1].raw_text == "kept\nYes"
        assert results[1][1].decision is Decision.YES  # re-run, not lost
        assert any("corrupt line 2" in message for message in caplog.messages)

    def test_resume_skips_checkpointed_ids(self, tmp_path):
        episodes = make_episodes(3)
        checkpoint = tmp_path / "out.jsonl"
        seen: list[str] = []

        def recording(prompt):
            seen.append(prompt)
            return canned_responder(prompt)

        client = ChatClient("mock:x", transport=make_mock_transport(recording))
        first = run_inference(
            episodes[:2], "cogre", client, DEFAULTS, POLICY, checkpoint_path=checkpoint
        )
        assert len(seen) == 2
        second = run_inference(
            episodes, "cogre", client, DEFAULTS, POLICY, checkpoint_path=checkpoint
        )
        assert len(seen) == 3  # only ep2 was sent
        assert [ep.id for ep, _ in second] == ["ep0", "ep1", "ep2"]
        assert [output.raw_text for _, output in second[:2]] == [
            output.raw_text for _, output in first
        ]
        lines = [json.loads(l) for l in checkpoint.read_text().splitlines()]
        assert {line["id"] for line in lines} == {"ep0", "ep1", "ep2"}
