import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from profci import pilot
from profci.model import (
    RESULT_SENTINEL,
    GivenWhenThen,
    MalformedDocument,
    MalformedResultLine,
    SchemaViolation,
    Status,
    TaskResult,
    format_result_line,
    manifest_to_dict,
    parse_manifest,
    parse_result_stream,
    serialize_manifest,
)


def doc(**overrides):
    base = {
        "exercise_name": "demo",
        "tasks": [],
        "student_suite_command": ["make", "test"],
        "completion_body_template": "Done! {survey_url}",
        "survey_url": "https://example.org/s",
        "report_endpoint": None,
    }
    base.update(overrides)
    return json.dumps(base)


def task(id="t1", **overrides):
    base = {
        "id": id,
        "title": f"Title {id}",
        "given": "a shop",
        "when": "a visitor arrives",
        "then": "a heading is shown",
        "hints": [],
        "command": ["run", id],
    }
    base.update(overrides)
    return base


def test_zero_tasks_is_valid():
    manifest = parse_manifest(doc())
    assert manifest.tasks == ()


def test_duplicate_ids_name_the_path():
    with pytest.raises(SchemaViolation) as err:
        parse_manifest(doc(tasks=[task("t1"), task("t1")]))
    assert str(err.value) == "tasks[1].id duplicate"


@pytest.mark.parametrize(
    "bad, path",
    [
        ({"given": "  "}, "tasks[0].given"),
        ({"then": ""}, "tasks[0].then"),
        ({"title": ""}, "tasks[0].title"),
        ({"command": []}, "tasks[0].command"),
        ({"command": "make"}, "tasks[0].command"),
    ],
)
def test_schema_violations(bad, path):
    with pytest.raises(SchemaViolation) as err:
        parse_manifest(doc(tasks=[task(**bad)]))
    assert err.value.path == path


def test_missing_task_key():
    t = task()
    del t["when"]
    with pytest.raises(SchemaViolation) as err:
        parse_manifest(doc(tasks=[t]))
    assert err.value.path == "tasks[0].when"


@pytest.mark.parametrize("text", ["", "{", "[1, 2]", "null"])
def test_malformed_documents(text):
    with pytest.raises(MalformedDocument):
        parse_manifest(text)


def test_unknown_fields_are_ignored():
    manifest = parse_manifest(doc(colour="blue", tasks=[task(extra=1)]))
    assert manifest.tasks[0].id == "t1"


def test_pilot_manifest_has_ordered_25_tasks():
    document = json.dumps(pilot.manifest_document())
    manifest = parse_manifest(document)
    assert [manifest.index_of(t.id) for t in manifest.tasks] == list(range(25))
    assert parse_manifest(serialize_manifest(manifest)) == manifest
    assert manifest_to_dict(manifest) == json.loads(document)


def test_completion_body_carries_survey_link_even_without_placeholder():
    manifest = parse_manifest(doc(completion_body_template="All done."))
    assert manifest.completion_body().endswith("https://example.org/s")


text = st.text(st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=20).filter(str.strip)


@st.composite
def manifests(draw):
    ids = draw(st.lists(st.text("abcdefgh-0123", min_size=1, max_size=6), unique=True, max_size=6))
    tasks = [
        task(
            i,
            title=draw(text),
            given=draw(text),
            when=draw(text),
            then=draw(text),
            hints=draw(st.lists(text, max_size=3)),
            command=draw(st.lists(text, min_size=1, max_size=3)),
        )
        for i in ids
    ]
    return doc(
        exercise_name=draw(text),
        tasks=tasks,
        survey_url=draw(st.text(max_size=20)),
        report_endpoint=draw(st.none() | text),
    )


@given(manifests())
def test_manifest_round_trip(document):
    manifest = parse_manifest(document)
    assert parse_manifest(serialize_manifest(manifest)) == manifest


# -- result stream -----------------------------------------------------------


def test_empty_stream():
    assert parse_result_stream("") == []


def test_pass_line_among_noise():
    line = RESULT_SENTINEL + json.dumps(
        {"id": "t3", "title": "T3", "status": "pass", "given": "g", "when": "w", "then": "t",
         "message": "", "hints": []}
    )
    stream = "\n".join(["collecting...", "ok", line, "warning: x", "##PROFCI##nospace", "done"]) + "\n"
    results = parse_result_stream(stream)
    assert len(results) == 1
    assert results[0].id == "t3"
    assert results[0].status is Status.PASS


def test_truncated_sentinel_line_raises_with_line_number():
    with pytest.raises(MalformedResultLine) as err:
        parse_result_stream(RESULT_SENTINEL + '{"id": "t1", "sta')
    assert err.value.line_number == 1


def test_unknown_status_raises():
    with pytest.raises(MalformedResultLine):
        parse_result_stream("noise\n" + RESULT_SENTINEL + '{"id": "t1", "status": "skipped"}\n')


def test_missing_description_is_tolerated():
    [result] = parse_result_stream(RESULT_SENTINEL + '{"id": "t1", "status": "fail", "message": "boom"}\n')
    assert result.description is None
    assert result.message == "boom"


results = st.builds(
    TaskResult,
    id=text,
    title=text,
    status=st.sampled_from([Status.PASS]),
    description=st.builds(GivenWhenThen, text, text, text),
    message=st.just(""),
    hints=st.lists(text, max_size=2).map(tuple),
) | st.builds(
    TaskResult,
    id=text,
    title=text,
    status=st.sampled_from([Status.FAIL, Status.ERROR]),
    description=st.builds(GivenWhenThen, text, text, text),
    message=text,
    hints=st.lists(text, max_size=2).map(tuple),
)
noise = st.text(st.characters(blacklist_characters="\r\n\x0b\x0c\x1c\x1d\x1e\x85  ",
                              blacklist_categories=("Cs",)), max_size=30).filter(
    lambda s: not s.startswith(RESULT_SENTINEL)
)
chunk = st.lists(st.one_of(results.map(format_result_line), noise.map(lambda s: s + "\n")), max_size=6).map("".join)


@given(results)
def test_result_line_round_trip(result):
    assert parse_result_stream(format_result_line(result)) == [result]


@given(chunk, chunk)
def test_prefix_stability(a, b):
    assert parse_result_stream(a + b) == parse_result_stream(a) + parse_result_stream(b)
