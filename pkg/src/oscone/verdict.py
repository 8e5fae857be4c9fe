"""Result type shared by every membership query."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any


class Verdict(enum.Enum):
    MEMBER = "Member"
    NONMEMBER = "NonMember"
    UNKNOWN = "Unknown"


@dataclass
class ConeVerdict:
    """``Member`` carries a certificate, ``NonMember`` a witness and
    ``Unknown`` only diagnostics."""

    status: Verdict
    certificate: Any = None
    witness: Any = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def is_member(self) -> bool:
        return self.status is Verdict.MEMBER

    @property
    def is_nonmember(self) -> bool:
        return self.status is Verdict.NONMEMBER

    @property
    def is_unknown(self) -> bool:
        return self.status is Verdict.UNKNOWN

    @classmethod
    def member(cls, certificate, **diagnostics):
        return cls(Verdict.MEMBER, certificate=certificate, diagnostics=diagnostics)

    @classmethod
    def nonmember(cls, witness, **diagnostics):
        return cls(Verdict.NONMEMBER, witness=witness, diagnostics=diagnostics)

    @classmethod
    def unknown(cls, **diagnostics):
        return cls(Verdict.UNKNOWN, diagnostics=diagnostics)

    def __repr__(self) -> str:
        return f"ConeVerdict({self.status.value})"
