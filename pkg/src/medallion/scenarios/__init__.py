from .runner import (
    PLAYBOOKS,
    Recorder,
    ScenarioAssertion,
    ScenarioResult,
    list_scenarios,
    load_scenario,
    run_scenario,
)

__all__ = [
    "PLAYBOOKS",
    "Recorder",
    "ScenarioAssertion",
    "ScenarioResult",
    "list_scenarios",
    "load_scenario",
    "run_scenario",
]
