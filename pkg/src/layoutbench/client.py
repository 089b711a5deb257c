"""Chat-completions client: retries, bounded concurrency, resumable JSONL log."""
from __future__ import annotations

import base64
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Iterable

import httpx

from .textio import PromptBundle

log = logging.getLogger(__name__)

OK = "ok"
FAILED = "failed"

# error categories
TRANSPORT = "transport"
SERVER = "server"
PROTOCOL = "protocol"
EMPTY = "empty-response"


@dataclass
class EndpointConfig:
    url: str = "http://localhost:8000/v1/chat/completions"
    model: str = "default"
    api_key_env: str = "LAYOUTBENCH_API_KEY"
    max_retries: int = 3  # total attempts, not extra ones
    backoff: float = 1.0  # seconds before the second attempt; doubles after
    timeout: float = 300.0
    temperature: float = 0.0
    max_tokens: int = 16384

    @property
    def api_key(self) -> str | None:
        return os.environ.get(self.api_key_env) if self.api_key_env else None


@dataclass
class InferenceRequest:
    instance_id: str
    condition: str
    text: str
    image_png: bytes | None = None
    temperature: float = 0.0
    max_tokens: int = 16384

    def __post_init__(self):
        if self.condition == "visual" and not self.image_png:
            raise ValueError("visual requests carry exactly one image")
        if self.condition == "text" and self.image_png is not None:
            raise ValueError("text requests carry no image")

    @classmethod
    def from_bundle(cls, instance_id: str, bundle: PromptBundle, image_png: bytes | None = None,
                    endpoint: EndpointConfig | None = None) -> "InferenceRequest":
        endpoint = endpoint or EndpointConfig()
        return cls(instance_id, bundle.condition, bundle.user_text(), image_png,
                   endpoint.temperature, endpoint.max_tokens)

    def messages(self) -> list[dict]:
        if self.image_png is None:
            return [{"role": "user", "content": self.text}]
        data_url = "data:image/png;base64," + base64.b64encode(self.image_png).decode()
        return [{"role": "user", "content": [
            {"type": "image_url", "image_url": {"url": data_url}},
            {"type": "text", "text": self.text},
        ]}]

    def body(self, model: str) -> dict:
        return {"model": model, "messages": self.messages(),
                "temperature": self.temperature, "max_tokens": self.max_tokens}


@dataclass
class InferenceRecord:
    instance_id: str
    condition: str
    raw_response: str = ""
    latency_ms: float = 0.0
    attempt_count: int = 0
    status: str = FAILED
    error: str | None = None
    error_category: str | None = None

    @property
    def key(self) -> tuple[str, str]:
        return self.instance_id, self.condition

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "InferenceRecord":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


class RecordLog:
    """Append-only JSONL log doubling as the batch checkpoint.

    The last line for a key wins, so a retried failure is superseded by its
    later outcome.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, rec: InferenceRecord) -> None:
        line = json.dumps(rec.to_json(), sort_keys=True) + "\n"
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a+b") as f:
                # terminate a torn line left by an interrupted writer
                if f.tell() > 0:
                    f.seek(-1, 2)
                    if f.read(1) != b"\n":
                        line = "\n" + line
                f.write(line.encode())

    def load(self) -> dict[tuple[str, str], InferenceRecord]:
        out: dict[tuple[str, str], InferenceRecord] = {}
        if not self.path.exists():
            return out
        for line in self.path.read_text().splitlines():
            if not line.strip():
                continue
            try:
                rec = InferenceRecord.from_json(json.loads(line))
            except (json.JSONDecodeError, TypeError, KeyError):
                # a torn last line from an interrupted writer
                log.warning("skipping unreadable line in %s", self.path)
                continue
            out[rec.key] = rec
        return out


def _headers(config: EndpointConfig) -> dict:
    h = {"Content-Type": "application/json"}
    if config.api_key:
        h["Authorization"] = f"Bearer {config.api_key}"
    return h


def _extract_content(payload) -> str:
    content = payload["choices"][0]["message"]["content"]
    if isinstance(content, list):
        content = "".join(p.get("text", "") for p in content if isinstance(p, dict))
    if not isinstance(content, str):
        raise TypeError("message content is not text")
    return content


def submit(request: InferenceRequest, config: EndpointConfig, *,
           client: httpx.Client | None = None, log_to: RecordLog | None = None,
           sleep: Callable[[float], None] = time.sleep) -> InferenceRecord:
    """Send one request, retrying transport errors and 5xx/429 with exponential backoff.

    Other 4xx and malformed bodies fail at once with category ``protocol``.
    """
    own = client is None
    if own:
        client = httpx.Client(timeout=config.timeout)
    rec = InferenceRecord(request.instance_id, request.condition)
    t0 = time.perf_counter()
    try:
        body = request.body(config.model)
        for attempt in range(1, max(1, config.max_retries) + 1):
            rec.attempt_count = attempt
            retryable = False
            try:
                resp = client.post(config.url, json=body, headers=_headers(config),
                                   timeout=config.timeout)
            except httpx.TransportError as e:
                rec.error, rec.error_category, retryable = f"{type(e).__name__}: {e}", TRANSPORT, True
            else:
                if resp.status_code >= 500 or resp.status_code == 429:
                    rec.error = f"HTTP {resp.status_code}: {resp.text[:500]}"
                    rec.error_category, retryable = SERVER, True
                elif resp.status_code >= 400:
                    rec.error = f"HTTP {resp.status_code}: {resp.text[:500]}"
                    rec.error_category = PROTOCOL
                else:
                    try:
                        text = _extract_content(resp.json())
                    except (ValueError, KeyError, IndexError, TypeError) as e:
                        rec.error, rec.error_category = f"malformed response: {e}", PROTOCOL
                    else:
                        if text:
                            rec.raw_response, rec.status = text, OK
                            rec.error = rec.error_category = None
                        else:
                            rec.error, rec.error_category = "empty completion", EMPTY
            if rec.status == OK or not retryable:
                break
            if attempt < config.max_retries:
                sleep(config.backoff * 2 ** (attempt - 1))
    finally:
        if own:
            client.close()
    rec.latency_ms = (time.perf_counter() - t0) * 1000.0
    if log_to is not None:
        log_to.append(rec)
    return rec


def run_batch(requests: Iterable[InferenceRequest], config: EndpointConfig,
              parallelism: int = 4, checkpoint: str | Path | None = None, *,
              client: httpx.Client | None = None,
              sleep: Callable[[float], None] = time.sleep) -> list[InferenceRecord]:
    """Submit all requests with at most ``parallelism`` in flight.

    Results come back in input order. Keys already logged with status ok in
    ``checkpoint`` are not resubmitted; failed ones are.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    requests = list(requests)
    store = RecordLog(checkpoint) if checkpoint is not None else None
    done = store.load() if store is not None else {}
    todo = [r for r in requests if not (
        (r.instance_id, r.condition) in done and done[(r.instance_id, r.condition)].status == OK)]
    log.info("%d of %d requests to submit", len(todo), len(requests))

    own = client is None
    if own:
        client = httpx.Client(timeout=config.timeout,
                              limits=httpx.Limits(max_connections=parallelism))
    try:
        if todo:
            with ThreadPoolExecutor(max_workers=parallelism) as pool:
                for rec in pool.map(lambda r: submit(r, config, client=client, log_to=store,
                                                     sleep=sleep), todo):
                    done[rec.key] = rec
    finally:
        if own:
            client.close()
    return [done[(r.instance_id, r.condition)] for r in requests]
