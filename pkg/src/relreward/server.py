"""Local HTTP scoring endpoint for trainer integration.

POST /score takes the same JSON bodies as the batch scoring file mode
({"episode_id", "raw_text"}, or a list of them) and answers with reward
breakdowns; POST /advantages standardizes a reward group.  Requests are
handled on a thread pool; scoring state is immutable, so no locking is
needed.
"""

from __future__ import annotations

import json
import logging
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .core import Episode
from .dictionary import KeywordDictionary
from .llm import parse_model_output
from .reward import RewardConfig, combined_reward, group_advantages

logger = logging.getLogger(__name__)


class _BadRequest(ValueError):
    pass


class ScoringApp:
    """Request-independent scoring logic behind the HTTP handler."""

    def __init__(
        self,
        dictionary: KeywordDictionary,
        episodes: list[Episode],
        cfg: RewardConfig,
    ):
        self.dictionary = dictionary
        self.episodes = {episode.id: episode for episode in episodes}
        self.cfg = cfg

    def score_one(self, obj: dict) -> dict:
        if not isinstance(obj, dict) or "episode_id" not in obj or "raw_text" not in obj:
            raise _BadRequest('body must carry "episode_id" and "raw_text"')
        episode_id = str(obj["episode_id"])
        episode = self.episodes.get(episode_id)
        if episode is None:
            raise _BadRequest(f"unknown episode_id {episode_id!r}")
        output = parse_model_output(str(obj["raw_text"]))
        breakdown = combined_reward(output, episode, self.dictionary, self.cfg)
        return {"episode_id": episode_id, **breakdown.to_dict()}

    def handle(self, path: str, body: object) -> object:
        if path == "/score":
            if isinstance(body, list):
                return [self.score_one(item) for item in body]
            return self.score_one(body)  # type: ignore[arg-type]
        if path == "/advantages":
            if not isinstance(body, dict) or "rewards" not in body:
                raise _BadRequest('body must carry "rewards"')
            rewards = body["rewards"]
            if not isinstance(rewards, list) or not all(
                isinstance(r, (int, float)) for r in rewards
            ):
                raise _BadRequest('"rewards" must be a list of numbers')
            if not rewards:
                raise _BadRequest('"rewards" must be non-empty')
            return {"advantages": group_advantages([float(r) for r in rewards], self.cfg)}
        raise LookupError(path)


def make_server(app: ScoringApp, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    """Build (but do not start) the HTTP server; port 0 picks a free port."""

    class Handler(BaseHTTPRequestHandler):
        def _reply(self, status: int, payload: object) -> None:
            data = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_POST(self) -> None:  # noqa: N802 (http.server API)
            length = int(self.headers.get("Content-Length", 0))
            try:
                body = json.loads(self.rfile.read(length).decode("utf-8"))
            except ValueError:
                self._reply(400, {"error": "invalid JSON body"})
                return
            try:
                self._reply(200, app.handle(self.path, body))
            except _BadRequest as exc:
                self._reply(400, {"error": str(exc)})
            except LookupError:
                self._reply(404, {"error": f"no such endpoint {self.path!r}"})
            except Exception as exc:  # pragma: no cover - defensive
                logger.exception("scoring request failed")
                self._reply(500, {"error": str(exc)})

        def log_message(self, fmt: str, *args) -> None:
            logger.debug("http: " + fmt, *args)

    return ThreadingHTTPServer((host, port), Handler)


def serve(app: ScoringApp, host: str, port: int) -> None:
    """Run the scoring server until interrupted."""
    server = make_server(app, host, port)
    bound_host, bound_port = server.server_address[:2]
    logger.info("serving /score and /advantages on http://%s:%s", bound_host, bound_port)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
