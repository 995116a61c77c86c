"""Model-backend contracts and profile configuration.

Every external service (vision-language captioner, text generator, OCR,
similarity index, image fetcher) sits behind one of these small
synchronous contracts. Profiles name a concrete configuration; secrets
come from environment variables only, never from the profile file.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, runtime_checkable

from .errors import ConfigError


@dataclass(frozen=True)
class FetchedImage:
    """One candidate image as delivered by a fetcher or similarity index."""

    uri: str
    data: bytes
    tags: tuple[str, ...] = ()


@runtime_checkable
class VLMBackend(Protocol):
    backend_id: str

    def describe_image(self, image_id: str, image_data: bytes, prompt: str) -> str: ...


@runtime_checkable
class LLMBackend(Protocol):
    backend_id: str

    def complete(self, prompt: str) -> str: ...


@runtime_checkable
class OCRBackend(Protocol):
    def recognize(self, image_id: str, image_data: bytes) -> str: ...


@runtime_checkable
class SimilarityIndex(Protocol):
    index_name: str

    def neighbors(self, anchor_id: str, k: int) -> list[FetchedImage]: ...


@runtime_checkable
class ImageFetcher(Protocol):
    def fetch(self, phrase: str) -> list[FetchedImage]: ...


@dataclass(frozen=True)
class BackendProfile:
    """Named configuration for one backend endpoint."""

    name: str
    kind: str = "mock"                 # mock | http_chat
    model_name: str = ""
    base_url: str = ""
    api_key_env: str = ""              # env var holding the credential
    max_tokens: int = 1024
    temperature: float = 0.2
    rate_per_s: float = 5.0
    burst: int = 5
    retry_budget: int = 3
    timeout_s: float = 60.0
    extra: dict = field(default_factory=dict)

    def api_key(self) -> str:
        if not self.api_key_env:
            return ""
        value = os.environ.get(self.api_key_env, "")
        if not value:
            raise ConfigError(f"profile {self.name}: env var {self.api_key_env} is not set")
        return value


def load_profiles(path: str | Path) -> dict[str, BackendProfile]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read backend profiles from {path}: {exc}") from exc
    profiles = {}
    for name, cfg in doc.get("profiles", {}).items():
        known = {f for f in BackendProfile.__dataclass_fields__ if f not in ("name", "extra")}
        kwargs = {k: v for k, v in cfg.items() if k in known}
        extra = {k: v for k, v in cfg.items() if k not in known}
        profiles[name] = BackendProfile(name=name, extra=extra, **kwargs)
    return profiles


class HttpChatBackend:
    """Minimal chat-completions client for OpenAI-style HTTP endpoints.

    Used by both the captioning (image attached as a data URL) and the
    text-generation stages. Kept deliberately thin; retries and rate
    limiting are applied by the calling stage.
    """

    def __init__(self, profile: BackendProfile, transport=None):
        import httpx

        self.profile = profile
        self.backend_id = profile.model_name or profile.name
        self._client = httpx.Client(
            base_url=profile.base_url,
            timeout=profile.timeout_s,
            transport=transport,
        )

    def _post(self, messages: list[dict]) -> str:
        import httpx

        from .errors import BackendTimeout

        headers = {}
        if self.profile.api_key_env:
            headers["Authorization"] = f"Bearer {self.profile.api_key()}"
        try:
            resp = self._client.post(
                "/chat/completions",
                headers=headers,
                json={
                    "model": self.profile.model_name,
                    "max_tokens": self.profile.max_tokens,
                    "temperature": self.profile.temperature,
                    "messages": messages,
                },
            )
            resp.raise_for_status()
        except httpx.TimeoutException as exc:
            raise BackendTimeout(str(exc)) from exc
        return resp.json()["choices"][0]["message"]["content"]

    def complete(self, prompt: str) -> str:
        return self._post([{"role": "user", "content": prompt}])

    def describe_image(self, image_id: str, image_data: bytes, prompt: str) -> str:
        import base64

        payload = base64.b64encode(image_data).decode("ascii")
        content = [
            {"type": "text", "text": prompt},
            {"type": "image_url", "image_url": {"url": f"data:image/png;base64,{payload}"}},
        ]
        return self._post([{"role": "user", "content": content}])
