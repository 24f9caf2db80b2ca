"""Issue-tracker clients: an in-memory fake and a GitHub-compatible HTTP client."""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field
from enum import Enum
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Iterator
from urllib.parse import parse_qs, urlsplit

import httpx

from .evaluator import ActionKind, ForgeAction, footer_marker
from .retry import Unavailable, with_retries

_REPO_RE = re.compile(r"^[^/]+/[^/]+$")
PER_PAGE = 100


class ForgeError(RuntimeError):
    pass


class ForgeUnavailable(ForgeError, Unavailable):
    pass


class AuthRejected(ForgeError):
    pass


class MissingTargetIssue(ForgeError):
    pass


class IssueState(str, Enum):
    OPEN = "open"
    CLOSED = "closed"


@dataclass(frozen=True)
class IssueRef:
    number: int
    title: str
    state: IssueState


@dataclass(frozen=True)
class ForgeConfig:
    base_url: str
    repository: str
    auth_token: str = field(default="", repr=False)

    def __post_init__(self):
        if not _REPO_RE.match(self.repository):
            raise ValueError(f"repository must look like owner/name, got {self.repository!r}")


# -- in-memory fake ---------------------------------------------------------


@dataclass
class FakeIssue:
    number: int
    title: str
    body: str
    state: IssueState = IssueState.OPEN
    comments: list[str] = field(default_factory=list)

    def ref(self) -> IssueRef:
        return IssueRef(self.number, self.title, self.state)


class FakeForge:
    """In-process issue tracker for one repository.

    ``fail_next`` makes the next n calls raise ForgeUnavailable, which lets
    tests exercise the retry path.
    """

    def __init__(self, repository: str = "student/exercise"):
        self.repository = repository
        self.issues: dict[int, FakeIssue] = {}
        self.fail_next = 0
        self.calls = 0
        self._lock = threading.Lock()

    def _tick(self):
        self.calls += 1
        if self.fail_next > 0:
            self.fail_next -= 1
            raise ForgeUnavailable("injected outage")

    def list_open_issue_titles(self) -> set[str]:
        with self._lock:
            self._tick()
            return {i.title for i in self.issues.values() if i.state is IssueState.OPEN}

    def has_issue(self, title: str) -> bool:
        """True if an issue with ``title`` exists in any state."""
        with self._lock:
            self._tick()
            return any(i.title == title for i in self.issues.values())

    def _find_marker(self, marker: str) -> FakeIssue | None:
        for issue in sorted(self.issues.values(), key=lambda i: i.number):
            if footer_marker(issue.body) == marker:
                return issue
            if any(footer_marker(c) == marker for c in issue.comments):
                return issue
        return None

    def apply_action(self, action: ForgeAction) -> IssueRef:
        with self._lock:
            self._tick()
            marker = action.marker
            if marker is not None:
                existing = self._find_marker(marker)
                if existing is not None:
                    return existing.ref()
            if action.kind is ActionKind.COMMENT_ISSUE:
                target = self._lowest_open(action.title)
                if target is None:
                    raise MissingTargetIssue(f"no open issue titled {action.title!r}")
                target.comments.append(action.body)
                self._changed()
                return target.ref()
            number = max(self.issues, default=0) + 1
            self.issues[number] = FakeIssue(number, action.title, action.body)
            self._changed()
            return self.issues[number].ref()

    def _changed(self) -> None:
        """Hook called after every mutation."""

    def _lowest_open(self, title: str) -> FakeIssue | None:
        matches = [i for i in self.issues.values() if i.title == title and i.state is IssueState.OPEN]
        return min(matches, key=lambda i: i.number) if matches else None

    def create_issue(self, title: str, body: str = "") -> IssueRef:
        """Open an issue directly, the way a student would by hand."""
        with self._lock:
            number = max(self.issues, default=0) + 1
            self.issues[number] = FakeIssue(number, title, body or title)
            self._changed()
            return self.issues[number].ref()

    def close_issue(self, number: int) -> IssueRef:
        with self._lock:
            issue = self.issues[number]
            issue.state = IssueState.CLOSED
            self._changed()
            return issue.ref()

    def reopen_issue(self, number: int) -> IssueRef:
        with self._lock:
            issue = self.issues[number]
            issue.state = IssueState.OPEN
            self._changed()
            return issue.ref()

    def close_titled(self, title: str) -> None:
        for issue in list(self.issues.values()):
            if issue.title == title and issue.state is IssueState.OPEN:
                self.close_issue(issue.number)

    def dump_state(self) -> dict:
        with self._lock:
            return self._state()

    def _state(self) -> dict:
        return {
            "repository": self.repository,
            "issues": [
                {
                    "number": i.number,
                    "title": i.title,
                    "state": i.state.value,
                    "body": i.body,
                    "comments": list(i.comments),
                }
                for i in sorted(self.issues.values(), key=lambda i: i.number)
            ],
        }

    @classmethod
    def from_state(cls, state: dict) -> "FakeForge":
        forge = cls(state.get("repository", "student/exercise"))
        for raw in state.get("issues", []):
            forge.issues[raw["number"]] = FakeIssue(
                number=raw["number"],
                title=raw["title"],
                body=raw["body"],
                state=IssueState(raw["state"]),
                comments=list(raw.get("comments", [])),
            )
        return forge


class FileForge(FakeForge):
    """FakeForge persisted as JSON, addressed as ``file://`` forge URL."""

    def __init__(self, path: str | Path, repository: str = "student/exercise"):
        super().__init__(repository)
        self.path = Path(path)
        if self.path.exists():
            loaded = FakeForge.from_state(json.loads(self.path.read_text(encoding="utf-8")))
            self.issues = loaded.issues

    def _changed(self) -> None:
        self.path.write_text(json.dumps(self._state(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


# -- HTTP client ------------------------------------------------------------


class HttpForge:
    """Client for a GitHub-compatible issues REST surface."""

    def __init__(
        self,
        config: ForgeConfig,
        client: httpx.Client | None = None,
        timeout: float = 30.0,
        sleep=None,
    ):
        self.config = config
        self._retry_kwargs = {"sleep": sleep} if sleep is not None else {}
        headers = {"Accept": "application/vnd.github+json", "User-Agent": "profci"}
        if config.auth_token:
            headers["Authorization"] = f"token {config.auth_token}"
        self._client = client or httpx.Client(timeout=timeout)
        self._headers = headers
        self._repo_url = f"{config.base_url.rstrip('/')}/repos/{config.repository}"

    def close(self) -> None:
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _request(self, method: str, url: str, **kwargs) -> httpx.Response:
        try:
            response = self._client.request(method, url, headers=self._headers, **kwargs)
        except httpx.HTTPError as exc:
            # the exception text can echo the request; keep only the class name
            raise ForgeUnavailable(f"{method} request failed: {type(exc).__name__}") from None
        if response.status_code in (401, 403):
            raise AuthRejected(f"forge rejected credentials (HTTP {response.status_code})")
        if response.status_code == 404:
            raise ForgeError(f"repository {self.config.repository} not found (HTTP 404)")
        if response.status_code >= 500 or response.status_code == 429:
            raise ForgeUnavailable(f"forge returned HTTP {response.status_code}")
        if response.status_code >= 400:
            raise ForgeError(f"forge returned HTTP {response.status_code}")
        return response

    def _paginate(self, url: str, params: dict) -> Iterator[dict]:
        page = 1
        while True:
            response = self._request("GET", url, params=dict(params, per_page=PER_PAGE, page=page))
            items = response.json()
            if not isinstance(items, list):
                raise ForgeError("unexpected listing payload")
            yield from items
            if len(items) < PER_PAGE:
                return
            page += 1

    def _open_issues(self) -> list[dict]:
        issues = self._paginate(f"{self._repo_url}/issues", {"state": "open"})
        # the GitHub issues listing also returns pull requests
        return [i for i in issues if "pull_request" not in i]

    def list_open_issue_titles(self) -> set[str]:
        return with_retries(lambda: {i["title"] for i in self._open_issues()}, **self._retry_kwargs)

    def has_issue(self, title: str) -> bool:
        def probe():
            issues = self._paginate(f"{self._repo_url}/issues", {"state": "all"})
            return any(i.get("title") == title for i in issues if "pull_request" not in i)

        return with_retries(probe, **self._retry_kwargs)

    def apply_action(self, action: ForgeAction) -> IssueRef:
        return with_retries(lambda: self._apply(action), **self._retry_kwargs)

    def _apply(self, action: ForgeAction) -> IssueRef:
        marker = action.marker
        open_issues = sorted(self._open_issues(), key=lambda i: i["number"])
        if action.kind is ActionKind.COMMENT_ISSUE:
            targets = [i for i in open_issues if i["title"] == action.title]
            if not targets:
                raise MissingTargetIssue(f"no open issue titled {action.title!r}")
            target = targets[0]
            ref = IssueRef(target["number"], target["title"], IssueState.OPEN)
            if marker is not None:
                comments = self._paginate(f"{self._repo_url}/issues/{target['number']}/comments", {})
                if any(footer_marker(c.get("body") or "") == marker for c in comments):
                    return ref
            self._request(
                "POST",
                f"{self._repo_url}/issues/{target['number']}/comments",
                json={"body": action.body},
            )
            return ref
        if marker is not None:
            for issue in open_issues:
                if footer_marker(issue.get("body") or "") == marker:
                    return IssueRef(issue["number"], issue["title"], IssueState.OPEN)
        created = self._request(
            "POST", f"{self._repo_url}/issues", json={"title": action.title, "body": action.body}
        ).json()
        return IssueRef(created["number"], created["title"], IssueState(created.get("state", "open")))


def connect(config: ForgeConfig, sleep=None):
    """Pick a forge backend from the base URL scheme."""
    parts = urlsplit(config.base_url)
    if parts.scheme == "file":
        return FileForge(Path(parts.path), config.repository)
    if parts.scheme in ("http", "https"):
        return HttpForge(config, sleep=sleep)
    raise ValueError(f"unsupported forge URL scheme {parts.scheme!r}")


# -- HTTP wrapper around the fake, for tests and demos ----------------------


class _FakeForgeHandler(BaseHTTPRequestHandler):
    server: "FakeForgeServer"

    def log_message(self, format, *args):  # noqa: A002
        pass

    def _send(self, status: int, payload) -> None:
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _route(self) -> tuple[list[str], dict] | None:
        srv = self.server
        if srv.token and self.headers.get("Authorization") != f"token {srv.token}":
            self._send(401, {"message": "Bad credentials"})
            return None
        if srv.outages > 0:
            srv.outages -= 1
            self._send(503, {"message": "unavailable"})
            return None
        parts = urlsplit(self.path)
        prefix = f"/repos/{srv.forge.repository}/issues"
        if not parts.path.startswith(prefix):
            self._send(404, {"message": "Not Found"})
            return None
        rest = [p for p in parts.path[len(prefix):].split("/") if p]
        return rest, {k: v[-1] for k, v in parse_qs(parts.query).items()}

    def do_GET(self):  # noqa: N802
        routed = self._route()
        if routed is None:
            return
        rest, query = routed
        per_page = int(query.get("per_page", 30))
        page = int(query.get("page", 1))
        state = self.server.forge.dump_state()["issues"]
        if not rest:
            wanted = query.get("state", "open")
            rows = [
                {"number": i["number"], "title": i["title"], "state": i["state"], "body": i["body"]}
                for i in state
                if wanted == "all" or i["state"] == wanted
            ]
        elif len(rest) == 2 and rest[1] == "comments":
            issue = next((i for i in state if i["number"] == int(rest[0])), None)
            if issue is None:
                self._send(404, {"message": "Not Found"})
                return
            rows = [{"body": c} for c in issue["comments"]]
        else:
            self._send(404, {"message": "Not Found"})
            return
        self.server.requests.append(("GET", self.path))
        self._send(200, rows[(page - 1) * per_page: page * per_page])

    def do_POST(self):  # noqa: N802
        routed = self._route()
        if routed is None:
            return
        rest, _ = routed
        length = int(self.headers.get("Content-Length", 0))
        payload = json.loads(self.rfile.read(length) or b"{}")
        forge = self.server.forge
        self.server.requests.append(("POST", self.path))
        if not rest:
            ref = forge.create_issue(payload["title"], payload["body"])
            self._send(201, {"number": ref.number, "title": ref.title, "state": ref.state.value})
        elif len(rest) == 2 and rest[1] == "comments":
            issue = forge.issues.get(int(rest[0]))
            if issue is None:
                self._send(404, {"message": "Not Found"})
                return
            issue.comments.append(payload["body"])
            self._send(201, {"body": payload["body"]})
        else:
            self._send(404, {"message": "Not Found"})


class FakeForgeServer(ThreadingHTTPServer):
    """Serves a FakeForge over the GitHub-compatible issues routes."""

    daemon_threads = True

    def __init__(self, forge: FakeForge, token: str = "", address=("127.0.0.1", 0)):
        super().__init__(address, _FakeForgeHandler)
        self.forge = forge
        self.token = token
        self.outages = 0
        self.requests: list[tuple[str, str]] = []
        self._thread: threading.Thread | None = None

    @property
    def base_url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"

    def __enter__(self):
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self.shutdown()
        self.server_close()
