"""App catalog: package name to benchmark category and scenario labels."""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Mapping

from ..device import data_path
from .types import CATEGORIES


@dataclass(frozen=True)
class AppInfo:
    package: str
    category: str
    name: str
    default_sub: str
    scenarios: Mapping[str, str]


@dataclass(frozen=True)
class AppCatalog:
    apps: Mapping[str, AppInfo]
    critical_level: Mapping[str, str]

    def __contains__(self, pkg: str) -> bool:
        return pkg in self.apps

    def __getitem__(self, pkg: str) -> AppInfo:
        return self.apps[pkg]

    def category(self, pkg: str) -> str | None:
        info = self.apps.get(pkg)
        return info.category if info else None


def load_catalog(path: str | Path | None = None) -> AppCatalog:
    doc = json.loads(Path(path or data_path("apps.json")).read_text(encoding="utf-8"))
    apps = {}
    for pkg, d in doc["apps"].items():
        if d["category"] not in CATEGORIES:
            raise ValueError(f"apps/{pkg}: unknown category {d['category']!r}")
        apps[pkg] = AppInfo(pkg, d["category"], d.get("name", pkg), d["default"], dict(d["scenarios"]))
    return AppCatalog(apps, dict(doc["critical_level"]))


@lru_cache(maxsize=1)
def default_catalog() -> AppCatalog:
    return load_catalog()
