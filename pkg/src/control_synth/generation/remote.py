"""Client for a remote completion endpoint.

One completions-style POST is sent per candidate::

    {"model": ..., "prompt": ..., "temperature": ..., "top_p": ...,
     "repeat_penalty_window": ..., "max_tokens": ..., "n": 1}

and the reply is read from ``choices[0].text``. The full schema is in
docs/remote_protocol.md.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional

import httpx
from tenacity import (
    RetryError,
    Retrying,
    before_sleep_log,
    retry_if_exception_type,
    stop_after_attempt,
    wait_exponential,
)
from tenacity.wait import wait_base

from ..errors import (
    AuthenticationError,
    ConfigError,
    ExtractionFailure,
    MalformedResponseError,
    TransportError,
)
from ..models import CandidateBatch, GeneratorParams, Prompt
from .prompts import extract_policy

logger = logging.getLogger(__name__)

GENERATOR_ID = "remote"
MAX_ATTEMPTS = 3
RETRY_STATUSES = (429, 500, 502, 503, 504)


class _RetryableStatus(Exception):
    def __init__(self, status: int):
        super().__init__(f"HTTP {status}")
        self.status = status


class CompletionClient:
    """
    Synchronous completion client with retry and exponential backoff.

    Args:
        params: Endpoint, model and sampling parameters
        transport: Optional httpx transport (tests pass an ``httpx.MockTransport``)
        wait: Tenacity wait strategy between attempts
    """

    def __init__(
        self,
        params: GeneratorParams,
        transport: Optional[httpx.BaseTransport] = None,
        wait: Optional[wait_base] = None,
    ):
        if not params.endpoint:
            raise ConfigError(
                "no completion endpoint configured; set endpoint in [run] "
                "or the CONTROL_SYNTH_ENDPOINT environment variable"
            )
        self.params = params
        headers = {"Content-Type": "application/json"}
        if params.api_key:
            headers["Authorization"] = f"Bearer {params.api_key}"
        self.client = httpx.Client(
            timeout=params.request_timeout,
            headers=headers,
            transport=transport,
            limits=httpx.Limits(max_connections=params.max_connections),
        )
        self.wait = wait if wait is not None else wait_exponential(multiplier=0.5, max=8)

    def close(self) -> None:
        self.client.close()

    def __enter__(self) -> "CompletionClient":
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close()

    def payload(self, prompt_text: str) -> Dict[str, Any]:
        return {
            "model": self.params.model_id,
            "prompt": prompt_text,
            "temperature": self.params.temperature,
            "top_p": self.params.top_p,
            "repeat_penalty_window": self.params.repeat_last_n,
            "max_tokens": self.params.max_tokens,
            "n": 1,
        }

    def _post_once(self, body: Dict[str, Any]) -> httpx.Response:
        response = self.client.post(self.params.endpoint, json=body)
        if response.status_code in (401, 403):
            raise AuthenticationError(
                f"endpoint rejected credentials (HTTP {response.status_code}); "
                "check CONTROL_SYNTH_API_KEY"
            )
        if response.status_code in RETRY_STATUSES:
            raise _RetryableStatus(response.status_code)
        if response.status_code >= 400:
            raise TransportError("completion request failed", response.status_code)
        return response

    def complete(self, prompt_text: str) -> str:
        """
        Request one completion.

        Raises:
            TransportError: Endpoint unreachable or failing after all attempts
            AuthenticationError: Credentials rejected
            MalformedResponseError: Reply is not the expected JSON
        """
        body = self.payload(prompt_text)
        retrying = Retrying(
            stop=stop_after_attempt(MAX_ATTEMPTS),
            wait=self.wait,
            retry=retry_if_exception_type((httpx.TransportError, _RetryableStatus)),
            before_sleep=before_sleep_log(logger, logging.WARNING),
        )
        try:
            response = retrying(self._post_once, body)
        except RetryError as e:
            last = e.last_attempt.exception()
            status = last.status if isinstance(last, _RetryableStatus) else None
            raise TransportError(
                f"completion endpoint failed after {MAX_ATTEMPTS} attempts: {last}", status
            ) from last
        return parse_completion(response)


def parse_completion(response: httpx.Response) -> str:
    """Text of the first choice of a completion reply."""
    try:
        data = response.json()
        text = data["choices"][0]["text"]
    except (ValueError, KeyError, IndexError, TypeError) as e:
        raise MalformedResponseError(f"unexpected completion payload: {e!r}") from None
    if not isinstance(text, str):
        raise MalformedResponseError("completion text is not a string")
    return text


def generate_remote(
    prompt: Prompt,
    params: GeneratorParams,
    n: int,
    client: Optional[CompletionClient] = None,
) -> CandidateBatch:
    """
    Ask the remote model for ``n`` candidates.

    Requests go out concurrently, at most ``params.max_connections`` at a
    time. Replies without an extractable policy are dropped and counted.

    Raises:
        TransportError, AuthenticationError, MalformedResponseError
    """
    if n <= 0:
        return CandidateBatch((), prompt.lineage, GENERATOR_ID)

    owned = client is None
    client = client or CompletionClient(params)
    try:
        with ThreadPoolExecutor(max_workers=max(1, min(n, params.max_connections))) as pool:
            replies: List[str] = list(pool.map(client.complete, [prompt.text] * n))
    finally:
        if owned:
            client.close()

    sources: List[str] = []
    failures = 0
    for reply in replies:
        try:
            sources.append(extract_policy(reply, prompt.requested_name))
        except ExtractionFailure as e:
            failures += 1
            logger.warning("Dropped completion without a policy: %s", e)
    if failures:
        logger.info("%d of %d completions had no extractable policy", failures, n)
    return CandidateBatch(tuple(sources), prompt.lineage, GENERATOR_ID, failures)
