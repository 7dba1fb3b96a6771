"""Uniform provider boundary for all model calls.

Renders prompts, calls a chat-completions endpoint or a scripted mock,
leniently unwraps the reply, validates it against the template's schema,
and retries a bounded number of times. Every call is accounted for
(latency, approximate tokens) so cost profiles can be exported.
"""
from __future__ import annotations

import json
import os
import re
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from .errors import StructuredOutputError, TransportError
from .templates import render_prompt, validate_reply

DEFAULT_MAX_RETRIES = 2

_FENCE_RE = re.compile(r"\A```[a-zA-Z0-9_-]*\n(.*?)\n?```\Z", re.DOTALL)


class ProviderRole(str, Enum):
    ONLINE = "online"
    OFFLINE = "offline"


@dataclass
class ProviderConfig:
    role: ProviderRole = ProviderRole.ONLINE
    endpoint: str = "mock"
    model_name: str = "mock"
    sampling_temperature: float = 0.7
    max_retries: int = DEFAULT_MAX_RETRIES
    token_env: str = "EVODIALOG_API_TOKEN"

    def __post_init__(self):
        self.role = ProviderRole(self.role)
        if self.sampling_temperature < 0:
            raise ValueError("sampling_temperature must be >= 0")


@dataclass
class CallRecord:
    template_id: str
    variables: dict
    prompt: str
    reply: str
    latency_s: float
    prompt_tokens: int
    reply_tokens: int
    retry_count: int = 0


def lenient_unwrap(text: str) -> str:
    """Strip surrounding whitespace and one optional markdown code fence."""
    text = text.strip()
    m = _FENCE_RE.match(text)
    if m:
        text = m.group(1).strip()
    return text


class RemoteProvider:
    """Chat-completions-style JSON-over-HTTP client with bearer-token auth."""

    def __init__(self, config: ProviderConfig, timeout: float = 120.0):
        self.config = config
        self.timeout = timeout

    def complete(self, template_id: str, variables: dict, prompt: str) -> str:
        import httpx

        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.config.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        body = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.sampling_temperature,
        }
        try:
            resp = httpx.post(self.config.endpoint, json=body, headers=headers,
                              timeout=self.timeout)
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise TransportError(f"chat completion failed: {exc}") from exc
        return resp.json()["choices"][0]["message"]["content"]


Matcher = Callable[[str, dict], bool]


@dataclass
class _Script:
    matcher: Matcher
    replies: list[str]
    cursor: int = 0

    def next_reply(self) -> str:
        reply = self.replies[min(self.cursor, len(self.replies) - 1)]
        self.cursor += 1
        return reply


class ScriptedMockProvider:
    """Deterministic test double: canned replies per matcher, full call log.

    ``strict`` mode raises on unmatched calls; otherwise the configurable
    default reply is returned.
    """

    def __init__(self, strict: bool = True, default_reply: str = "{}"):
        self.strict = strict
        self.default_reply = default_reply
        self._scripts: list[_Script] = []
        self.call_log: list[tuple[str, dict]] = []

    def register_script(self, template_id: str, replies: list[str | dict],
                        predicate: Callable[[dict], bool] | None = None) -> None:
        def matcher(tid: str, variables: dict, _tid=template_id, _pred=predicate) -> bool:
            return tid == _tid and (_pred is None or _pred(variables))

        serialized = [r if isinstance(r, str) else json.dumps(r) for r in replies]
        self._scripts.append(_Script(matcher, serialized))

    def complete(self, template_id: str, variables: dict, prompt: str) -> str:
        self.call_log.append((template_id, variables))
        for script in self._scripts:
            if script.matcher(template_id, variables):
                return script.next_reply()
        if self.strict:
            raise TransportError(f"no scripted reply for template '{template_id}'")
        return self.default_reply


class LLMGateway:
    """Stateless-per-call facade over one online and one offline provider."""

    def __init__(self, online, offline=None,
                 online_config: ProviderConfig | None = None,
                 offline_config: ProviderConfig | None = None):
        self.providers = {
            ProviderRole.ONLINE: online,
            ProviderRole.OFFLINE: offline if offline is not None else online,
        }
        self.configs = {
            ProviderRole.ONLINE: online_config or ProviderConfig(role=ProviderRole.ONLINE),
            ProviderRole.OFFLINE: offline_config or ProviderConfig(
                role=ProviderRole.OFFLINE, sampling_temperature=0.8),
        }
        self.call_records: list[CallRecord] = []

    def complete_structured(self, role: ProviderRole, template_id: str,
                            variables: dict) -> dict:
        """Render, call, parse, validate; retry with the same prompt on bad output."""
        role = ProviderRole(role)
        provider = self.providers[role]
        config = self.configs[role]
        prompt = render_prompt(template_id, variables)
        last_raw = ""
        for attempt in range(config.max_retries + 1):
            start = time.monotonic()
            raw = provider.complete(template_id, variables, prompt)
            latency = time.monotonic() - start
            last_raw = raw
            record = CallRecord(
                template_id=template_id, variables=variables, prompt=prompt,
                reply=raw, latency_s=latency,
                prompt_tokens=len(prompt.split()), reply_tokens=len(raw.split()),
                retry_count=attempt,
            )
            self.call_records.append(record)
            try:
                parsed = json.loads(lenient_unwrap(raw))
            except json.JSONDecodeError:
                continue
            violations = validate_reply(template_id, parsed)
            if not violations:
                return parsed
        raise StructuredOutputError(
            f"reply for '{template_id}' failed schema validation after "
            f"{config.max_retries + 1} attempts", raw_reply=last_raw)

    def calls_for(self, template_id: str) -> list[CallRecord]:
        return [r for r in self.call_records if r.template_id == template_id]

    def cost_summary(self) -> dict:
        """Aggregate latency/token accounting in the shape of a cost table row."""
        if not self.call_records:
            return {"calls": 0, "total_latency_s": 0.0, "prompt_tokens": 0, "reply_tokens": 0}
        return {
            "calls": len(self.call_records),
            "total_latency_s": sum(r.latency_s for r in self.call_records),
            "prompt_tokens": sum(r.prompt_tokens for r in self.call_records),
            "reply_tokens": sum(r.reply_tokens for r in self.call_records),
        }
