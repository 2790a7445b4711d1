"""Per-cycle decision pipeline over a pluggable reasoner backend."""
from .backends import (ACTIVITY_PATCH, BUCKET_BASE, SUB_PATCH, AdversarialBackend, BrokenBackend,
                       HeuristicBackend, MixedBackend, ReasonerBackend, fallback, heuristic_targets)
from .catalog import AppCatalog, AppInfo, default_catalog, load_catalog
from .cycle import Pipeline, Toggles, arbitrate, detect_overrides, legalize, run_cycle
from .gateway import GatewayConfigError, RemoteBackend
from .redact import redact, redact_text
from .schedule import PERIOD_MIN, TriggerSchedule, trigger_walk
from .types import (CATEGORIES, IDLE, ActivityResult, Advisory, BackendError, CycleTrace,
                    DecisionContext)

__all__ = [
    "ACTIVITY_PATCH", "BUCKET_BASE", "SUB_PATCH", "AdversarialBackend", "BrokenBackend",
    "HeuristicBackend", "MixedBackend", "ReasonerBackend", "fallback", "heuristic_targets",
    "AppCatalog", "AppInfo", "default_catalog", "load_catalog",
    "Pipeline", "Toggles", "arbitrate", "detect_overrides", "legalize", "run_cycle",
    "GatewayConfigError", "RemoteBackend", "redact", "redact_text",
    "PERIOD_MIN", "TriggerSchedule", "trigger_walk",
    "CATEGORIES", "IDLE", "ActivityResult", "Advisory", "BackendError", "CycleTrace",
    "DecisionContext",
]
