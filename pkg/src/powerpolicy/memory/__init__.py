"""Two-tier preference memory: session locks plus distilled per-app rules."""
from .extractor import (DECAY, EVICT_BELOW, PROMOTE_AT, REWARDS, SEED, AnalyzerError, Extractor,
                        HeuristicAnalyzer, IntentAnalyzer, distill, generalize, update_confidence)
from .lpm import (LEVELS, CandidateRule, ContextRule, CorruptPageError, LPMPage, Retrieval,
                  aggregate_general_profile, load_page, persist_page, read_page_file, retrieve)
from .signature import ANY, ContextSignature, battery_bucket, time_slot
from .stm import (STM, AutoRecord, FeedbackEvent, events_to_csv, record_override, state_diff)

__all__ = [
    "DECAY", "EVICT_BELOW", "PROMOTE_AT", "REWARDS", "SEED", "AnalyzerError", "Extractor",
    "HeuristicAnalyzer", "IntentAnalyzer", "distill", "generalize", "update_confidence",
    "LEVELS", "CandidateRule", "ContextRule", "CorruptPageError", "LPMPage", "Retrieval",
    "aggregate_general_profile", "load_page", "persist_page", "read_page_file", "retrieve",
    "ANY", "ContextSignature", "battery_bucket", "time_slot",
    "STM", "AutoRecord", "FeedbackEvent", "events_to_csv", "record_override", "state_diff",
]
