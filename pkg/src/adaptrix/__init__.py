"""Profile-driven dynamic adaptation of component assemblies."""
from __future__ import annotations

from .adapter import (
    POLICIES,
    AdaptationPlan,
    AdaptationReport,
    CandidateChain,
    InteractivePolicy,
    adapt,
    auto_policy,
    build_parameter_graph,
    find_mismatched_branches,
    first_policy,
    generate_plans,
    plan,
    search_candidates,
)
from .assembly import (
    Assembly,
    Insert,
    Remove,
    Replace,
    SetConfig,
    apply_action,
    apply_actions,
    format_adl,
    parse_adl,
    structurally_equal,
    validate_assembly,
)
from .composition import (
    FlowValuation,
    Violation,
    check_axioms,
    compose_service_profile,
    propagate,
)
from .monitors import AdaptationLoop, ContextMonitor, LanguageDetector
from .profile import (
    ComponentProfile,
    Condition,
    ContextProfile,
    Parameter,
    ProfilePoint,
    Truth,
    evaluate_condition,
    parse_context,
    parse_profile,
    serialize_profile,
)
from .registry import Registry, load_registry, query
from .runtime import Message, RuntimeService, instantiate
from .scenario import load_scenario, parse_scenario, run_scenario

__all__ = [name for name in dir() if not name.startswith("_")]
