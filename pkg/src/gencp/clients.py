"""HTTP adapters for hosted completion and fill-mask endpoints.

Wire formats (see docs/protocol.md):

* completions: ``POST {base_url}/completions`` with ``model``, ``prompt``,
  ``max_tokens=1``, ``temperature`` and ``logprobs=k``; the next-token
  distribution is read from ``choices[0].logprobs.top_logprobs[0]``.
* fill-mask: ``POST {base_url}`` with ``inputs`` and ``parameters.top_k``;
  the reply is a list of ``{token_str, score}`` per mask (a bare list when
  there is a single mask). Scores are probabilities.
"""

from __future__ import annotations

import json
import logging
import math
import os
import threading
import time
from dataclasses import dataclass
from typing import Callable, Optional

import httpx

from .core import Token
from .lm import MASK, Domain, make_domain

log = logging.getLogger(__name__)

LLM_KEY_ENV = "GENCP_LLM_API_KEY"
MLM_KEY_ENV = "GENCP_MLM_API_KEY"


class BackendError(RuntimeError):
    """Base class for adapter failures."""


class CredentialsError(BackendError):
    pass


class ConfigurationError(BackendError):
    pass


class ProtocolError(BackendError):
    pass


class BackendUnavailable(BackendError):
    """Retryable failure that outlived the retry budget."""


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    api_key_env: str = LLM_KEY_ENV
    model_name: str = ""
    timeout_ms: int = 30_000
    max_retries: int = 3
    backoff_base_ms: int = 200
    mask_token: str = MASK
    requests_per_second: Optional[float] = None
    cache: bool = False

    def __post_init__(self):
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


class _HttpBackend:
    def __init__(self, cfg: EndpointConfig, *, transport: Optional[httpx.BaseTransport] = None,
                 sleep: Callable[[float], None] = time.sleep):
        key = os.environ.get(cfg.api_key_env)
        if not key:
            raise CredentialsError(f"credentials absent: set {cfg.api_key_env}")
        self.cfg = cfg
        self._sleep = sleep
        self._client = httpx.Client(
            timeout=cfg.timeout_ms / 1000.0,
            transport=transport,
            headers={"Authorization": f"Bearer {key}"},
        )
        self._lock = threading.Lock()
        self._next_slot = 0.0
        self._cache: dict = {}
        self.requests = 0
        self.retries = 0
        self.cache_hits = 0

    def close(self) -> None:
        self._client.close()

    def _throttle(self) -> None:
        rps = self.cfg.requests_per_second
        if not rps:
            return
        with self._lock:
            now = time.monotonic()
            wait = self._next_slot - now
            self._next_slot = max(now, self._next_slot) + 1.0 / rps
        if wait > 0:
            self._sleep(wait)

    def _post(self, url: str, body: dict):
        attempt = 0
        while True:
            self._throttle()
            with self._lock:
                self.requests += 1
            try:
                resp = self._client.post(url, json=body)
            except httpx.TransportError as exc:
                failure = f"transport error: {exc}"
            else:
                if resp.status_code == 429 or resp.status_code >= 500:
                    failure = f"HTTP {resp.status_code}"
                elif resp.status_code >= 400:
                    raise ConfigurationError(f"HTTP {resp.status_code} from {url}: {resp.text[:200]}")
                else:
                    try:
                        return resp.json()
                    except json.JSONDecodeError as exc:
                        log.error("non-JSON payload from %s: %r", url, resp.text)
                        raise ProtocolError(f"response is not JSON: {exc}") from None
            if attempt >= self.cfg.max_retries:
                raise BackendUnavailable(f"{url}: {failure} after {attempt} retries")
            attempt += 1
            with self._lock:
                self.retries += 1
            self._sleep(self.cfg.backoff_base_ms * 2 ** (attempt - 1) / 1000.0)

    def _cached(self, key, compute):
        if not self.cfg.cache:
            return compute()
        with self._lock:
            if key in self._cache:
                self.cache_hits += 1
                return self._cache[key]
        value = compute()
        with self._lock:
            self._cache[key] = value
        return value


class CompletionClient(_HttpBackend):
    """Left-to-right backend over a completions endpoint."""

    def next_tokens(self, prompt: str, k: int, temperature: float = 0.8) -> Domain:
        key = (prompt, k, round(temperature, 2))
        return self._cached(key, lambda: self._request(prompt, k, temperature))

    def _request(self, prompt: str, k: int, temperature: float) -> Domain:
        body = {
            "model": self.cfg.model_name,
            "prompt": prompt,
            "max_tokens": 1,
            "temperature": temperature,
            "logprobs": k,
        }
        payload = self._post(self.cfg.base_url.rstrip("/") + "/completions", body)
        try:
            top = payload["choices"][0]["logprobs"]["top_logprobs"][0]
            tokens = [Token(str(s), float(lp)) for s, lp in top.items() if s]
        except (KeyError, IndexError, TypeError, ValueError, AttributeError) as exc:
            log.error("malformed completions payload: %r", payload)
            raise ProtocolError(f"malformed completions payload ({exc!r})") from None
        return make_domain(tokens, k, "autoregressive")


class FillMaskClient(_HttpBackend):
    """Masked backend over a fill-mask endpoint."""

    def __init__(self, cfg: EndpointConfig, **kwargs):
        super().__init__(cfg, **kwargs)
        self.mask_token = cfg.mask_token

    def fill_mask(self, prompt: str, k: int) -> list[Domain]:
        return self._cached((prompt, k), lambda: self._request(prompt, k))

    def _request(self, prompt: str, k: int) -> list[Domain]:
        masks = prompt.count(self.mask_token)
        payload = self._post(self.cfg.base_url, {"inputs": prompt, "parameters": {"top_k": k}})
        if masks == 1 and isinstance(payload, list) and payload and isinstance(payload[0], dict):
            payload = [payload]
        if not isinstance(payload, list) or len(payload) != masks:
            log.error("fill-mask payload arity mismatch: %r", payload)
            got = len(payload) if isinstance(payload, list) else type(payload).__name__
            raise ProtocolError(f"expected {masks} mask predictions, got {got}")
        domains = []
        try:
            for preds in payload:
                tokens = []
                for p in preds:
                    score = float(p["score"])
                    tokens.append(Token(str(p["token_str"]), math.log(score) if score > 0 else -math.inf))
                domains.append(make_domain(tokens, k, "masked"))
        except (KeyError, TypeError, ValueError) as exc:
            log.error("malformed fill-mask payload: %r", payload)
            raise ProtocolError(f"malformed fill-mask payload ({exc!r})") from None
        return domains


def complete_topk(cfg: EndpointConfig, prompt: str, k: int, temperature: float = 0.8,
                  **kwargs) -> Domain:
    client = CompletionClient(cfg, **kwargs)
    try:
        return client.next_tokens(prompt, k, temperature)
    finally:
        client.close()


def fill_mask_topk(cfg: EndpointConfig, masked_prompt: str, k: int, **kwargs) -> list[Domain]:
    client = FillMaskClient(cfg, **kwargs)
    try:
        return client.fill_mask(masked_prompt, k)
    finally:
        client.close()
