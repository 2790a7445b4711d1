"""HTTP client for a remote reasoner gateway.

Each capability is one POST carrying ``{"role", "payload", "capabilities",
"constraints"}``; the response body must be a single JSON document shaped
like the role's output type, anything else counts as a backend failure.

Configuration comes from the environment unless passed explicitly:
``POWERPOLICY_GATEWAY_URL``, ``POWERPOLICY_GATEWAY_KEY``, ``POWERPOLICY_GATEWAY_MODEL``.
"""
from __future__ import annotations

import json
import os
from typing import Any, Mapping

import httpx
import jsonschema

from ..constraints import constraints_to_dict
from ..device import Policy, profile_to_dict
from .redact import redact
from .types import ActivityResult, Advisory, BackendError, DecisionContext, state_to_dict

ENV_URL = "POWERPOLICY_GATEWAY_URL"
ENV_KEY = "POWERPOLICY_GATEWAY_KEY"
ENV_MODEL = "POWERPOLICY_GATEWAY_MODEL"

_ACTION = {
    "type": "object", "required": ["target", "verb"],
    "properties": {"target": {"type": "string"},
                   "verb": {"enum": ["KEEP", "SET", "ENABLE", "DISABLE", "LOCK", "DEFER"]},
                   "value": {"type": "integer"},
                   "priority": {"enum": ["High", "Medium", "Low"]},
                   "reason": {"type": "string"}},
}

RESPONSE_SCHEMAS = {
    "recognize": {"type": "object", "required": ["activity_type", "sub_activity"],
                  "properties": {"activity_type": {"type": "string"},
                                 "sub_activity": {"type": "string", "minLength": 1},
                                 "certainty": {"type": "number", "minimum": 0, "maximum": 1},
                                 "critical_level": {"enum": ["high", "medium", "low"]}}},
    "propose": {"type": "object", "required": ["actions"],
                "properties": {"actions": {"type": "array", "items": _ACTION}}},
    "verify": {"type": "object", "required": ["advisories"],
               "properties": {"advisories": {"type": "array", "items": {
                   "type": "object", "required": ["target", "advice"],
                   "properties": {"target": {"type": "string"}, "advice": {"type": "string"}}}}}},
    "emit": {"type": "object", "required": ["commands"],
             "properties": {"commands": {"type": "array", "items": {"type": "string"}}}},
}


class GatewayConfigError(ValueError):
    pass


class RemoteBackend:
    name = "remote"

    def __init__(self, url: str | None = None, key: str | None = None, model: str | None = None,
                 client: httpx.Client | None = None, timeout: float = 30.0):
        self.url = url or os.environ.get(ENV_URL)
        if not self.url:
            raise GatewayConfigError(f"no gateway endpoint; set {ENV_URL}")
        self.key = key if key is not None else os.environ.get(ENV_KEY, "")
        self.model = model or os.environ.get(ENV_MODEL, "")
        self.client = client or httpx.Client(timeout=timeout)

    def _call(self, role: str, payload: Mapping[str, Any], capabilities=None, constraints=None) -> dict:
        body = {"role": role, "payload": payload,
                "capabilities": profile_to_dict(capabilities) if capabilities is not None else None,
                "constraints": constraints_to_dict(constraints) if constraints is not None else None}
        if self.model:
            body["model"] = self.model
        headers = {"Authorization": f"Bearer {self.key}"} if self.key else {}
        try:
            resp = self.client.post(self.url, json=body, headers=headers)
            resp.raise_for_status()
            doc = json.loads(resp.text)
            jsonschema.validate(doc, RESPONSE_SCHEMAS[role])
        except (httpx.HTTPError, ValueError, jsonschema.ValidationError) as e:
            raise BackendError(f"{role}: {type(e).__name__}: {e}") from None
        return doc

    def recognize(self, ctx: DecisionContext) -> ActivityResult:
        doc = self._call("recognize", {"state": state_to_dict(ctx.device_state),
                                       "ui": redact(dict(ctx.ui_descriptor)),
                                       "history": [list(h) for h in ctx.app_history]})
        try:
            return ActivityResult.from_dict(doc)
        except ValueError as e:
            raise BackendError(f"recognize: {e}") from None

    def propose(self, activity, state, locks, rules, constraints, capabilities) -> Policy:
        payload = {"activity": activity.to_dict(), "state": state_to_dict(state),
                   "locks": dict(locks), "rules": [r.to_dict() for r in rules]}
        doc = self._call("propose", payload, capabilities, constraints)
        try:
            return Policy.from_list(doc["actions"])
        except (ValueError, KeyError) as e:
            raise BackendError(f"propose: {e}") from None

    def verify_assist(self, policy, constraints, capabilities) -> list[Advisory]:
        doc = self._call("verify", {"policy": policy.to_list()}, capabilities, constraints)
        return [Advisory(a["target"], a["advice"]) for a in doc["advisories"]]

    def emit_commands(self, policy, capabilities) -> list[str]:
        doc = self._call("emit", {"policy": policy.to_list()}, capabilities)
        return list(doc["commands"])
