import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from builders import manifest_of, meta, solved_upto
from profci.evaluator import ActionKind, ForgeAction, evaluate_build, footer, with_footer
from profci.forge import (
    AuthRejected,
    FakeForge,
    FakeForgeServer,
    FileForge,
    ForgeConfig,
    ForgeUnavailable,
    HttpForge,
    IssueState,
    MissingTargetIssue,
    connect,
)


def create(title, build="b1", kind=ActionKind.CREATE_ISSUE):
    return ForgeAction(kind, title, with_footer(f"body for {title}", build, title))


def comment(title, build="b2"):
    return ForgeAction(ActionKind.COMMENT_ISSUE, title, with_footer("again", build, title))


def open_counts(forge):
    counts = {}
    for issue in forge.dump_state()["issues"]:
        if issue["state"] == "open":
            counts[issue["title"]] = counts.get(issue["title"], 0) + 1
    return counts


# -- fake --------------------------------------------------------------------


def test_fresh_fake_has_no_titles():
    assert FakeForge().list_open_issue_titles() == set()


def test_open_filter():
    forge = FakeForge()
    forge.create_issue("A")
    forge.close_issue(forge.create_issue("B").number)
    assert forge.list_open_issue_titles() == {"A"}
    assert forge.has_issue("B")


def test_create_on_empty_fake():
    ref = FakeForge().apply_action(create("A"))
    assert (ref.number, ref.state) == (1, IssueState.OPEN)


def test_comment_needs_open_target():
    forge = FakeForge()
    forge.close_issue(forge.create_issue("A").number)
    with pytest.raises(MissingTargetIssue):
        forge.apply_action(comment("A"))


def test_retried_create_is_one_issue():
    forge = FakeForge()
    first = forge.apply_action(create("A"))
    second = forge.apply_action(create("A"))
    assert first.number == second.number == 1
    assert len(forge.issues) == 1


def test_comment_goes_to_lowest_open_number():
    forge = FakeForge()
    forge.create_issue("A")
    forge.create_issue("A")
    forge.close_issue(1)
    forge.create_issue("A")
    ref = forge.apply_action(comment("A"))
    assert ref.number == 2
    assert forge.issues[2].comments and not forge.issues[3].comments


def test_injected_outage():
    forge = FakeForge()
    forge.fail_next = 1
    with pytest.raises(ForgeUnavailable):
        forge.list_open_issue_titles()
    assert forge.list_open_issue_titles() == set()


def test_file_forge_persists(tmp_path):
    path = tmp_path / "forge.json"
    FileForge(path).apply_action(create("A"))
    again = FileForge(path)
    assert again.list_open_issue_titles() == {"A"}
    assert json.loads(path.read_text())["issues"][0]["title"] == "A"


def test_connect_picks_backend(tmp_path):
    assert isinstance(connect(ForgeConfig(f"file://{tmp_path}/f.json", "o/r")), FileForge)
    assert isinstance(connect(ForgeConfig("https://api.example.org", "o/r", "tok")), HttpForge)
    with pytest.raises(ValueError):
        connect(ForgeConfig("ftp://x", "o/r"))


@pytest.mark.parametrize("repo", ["nope", "a/b/c", "/b", ""])
def test_repository_shape(repo):
    with pytest.raises(ValueError):
        ForgeConfig("https://x", repo)


def test_token_not_in_repr():
    assert "s3cret-token" not in repr(ForgeConfig("https://x", "o/r", "s3cret-token"))


# -- HTTP --------------------------------------------------------------------


@pytest.fixture
def served():
    forge = FakeForge("owner/shop")
    with FakeForgeServer(forge, token="tok-123") as server:
        yield forge, server


def http_client(server, token="tok-123", sleeps=None):
    sleep = sleeps.append if sleeps is not None else (lambda s: None)
    return HttpForge(ForgeConfig(server.base_url, "owner/shop", token), sleep=sleep)


def test_pagination_unions_pages(served):
    forge, server = served
    for i in range(200):
        forge.create_issue(f"Issue {i:03d}")
    for i in range(5):
        forge.close_issue(forge.create_issue(f"Closed {i}").number)
    with http_client(server) as client:
        titles = client.list_open_issue_titles()
    assert titles == {f"Issue {i:03d}" for i in range(200)}
    pages = [p for m, p in server.requests if m == "GET"]
    assert any("page=2" in p for p in pages) and any("page=3" in p for p in pages)
    assert all("per_page=100" in p and "state=open" in p for p in pages)


def test_http_create_then_comment(served):
    forge, server = served
    with http_client(server) as client:
        ref = client.apply_action(create("A"))
        again = client.apply_action(create("A"))
        client.apply_action(comment("A"))
        client.apply_action(comment("A"))
    assert ref.number == again.number == 1
    assert len(forge.issues) == 1
    assert len(forge.issues[1].comments) == 1


def test_http_retries_outages_with_backoff(served):
    forge, server = served
    server.outages = 2
    sleeps = []
    with http_client(server, sleeps=sleeps) as client:
        assert client.list_open_issue_titles() == set()
    assert sleeps == [1.0, 2.0]


def test_http_gives_up_after_three_retries(served):
    _, server = served
    server.outages = 10
    sleeps = []
    with http_client(server, sleeps=sleeps) as client, pytest.raises(ForgeUnavailable):
        client.list_open_issue_titles()
    assert sleeps == [1.0, 2.0, 4.0]


def test_auth_rejection_is_not_retried(served):
    forge, server = served
    sleeps = []
    with http_client(server, token="wrong", sleeps=sleeps) as client, pytest.raises(AuthRejected) as err:
        client.apply_action(create("A"))
    assert sleeps == []
    assert forge.issues == {}
    assert "wrong" not in str(err.value)


def test_http_missing_comment_target(served):
    _, server = served
    with http_client(server) as client, pytest.raises(MissingTargetIssue):
        client.apply_action(comment("ghost"))


def test_unreachable_server():
    sleeps = []
    client = HttpForge(ForgeConfig("http://127.0.0.1:9", "o/r", "tok"), sleep=sleeps.append)
    with pytest.raises(ForgeUnavailable) as err:
        client.list_open_issue_titles()
    assert len(sleeps) == 3 and "tok" not in str(err.value)


# -- properties ----------------------------------------------------------------

N_TASKS = 6
steps = st.lists(
    st.tuples(st.integers(0, N_TASKS), st.booleans()),
    min_size=1,
    max_size=25,
)


def drive(plan):
    """Run builds through evaluator + fake forge; the bool closes solved issues."""
    m = manifest_of(N_TASKS)
    forge = FakeForge()
    applied = []
    for n, (score, student_closes) in enumerate(plan):
        state = forge.list_open_issue_titles()
        if forge.has_issue("🎉 Exercise complete"):
            state.add("🎉 Exercise complete")
        out = evaluate_build(solved_upto(score, m), m, state, meta(n))
        for action in out.actions:
            forge.apply_action(action)
            applied.append(action)
        if student_closes:
            for task in m.tasks[:score]:
                forge.close_titled(task.title)
    return forge, applied


@given(steps)
def test_dedup_invariant(plan):
    forge, _ = drive(plan)
    assert all(c <= 1 for c in open_counts(forge).values())


@given(steps, st.data())
def test_replaying_an_action_changes_nothing(plan, data):
    forge, applied = drive(plan)
    before = forge.dump_state()
    for action in data.draw(st.lists(st.sampled_from(applied), max_size=4)) if applied else []:
        forge.apply_action(action)
    assert forge.dump_state() == before


@given(st.integers(1, 5))
def test_n_applications_equal_one(n):
    once, many = FakeForge(), FakeForge()
    action = create("A", build="b9")
    once.apply_action(action)
    for _ in range(n):
        many.apply_action(action)
    assert once.dump_state() == many.dump_state()


def test_footer_shape():
    assert footer("b1", "A").startswith("<!-- profci:b1:") and footer("b1", "A").endswith(" -->")
