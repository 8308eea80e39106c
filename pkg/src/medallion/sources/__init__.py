from .credentials import DEFAULT_TTL, Credential, CredentialProvider
from .faults import NO_FAULT, FaultMode, FaultProfile
from .simulator import (
    FetchPage,
    SourceConfig,
    SourceHub,
    commit_shas,
    default_source_configs,
    fetch_page,
    generate_day,
    identity_entries,
    member_email,
    team_members,
)

__all__ = [
    "DEFAULT_TTL",
    "NO_FAULT",
    "Credential",
    "CredentialProvider",
    "FaultMode",
    "FaultProfile",
    "FetchPage",
    "SourceConfig",
    "SourceHub",
    "commit_shas",
    "default_source_configs",
    "fetch_page",
    "generate_day",
    "identity_entries",
    "member_email",
    "team_members",
]
