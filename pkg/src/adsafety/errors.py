"""Shared error base. Every domain error carries a stable machine code."""

from __future__ import annotations


class AdSafetyError(Exception):
    """Base class for all domain errors.

    ``code`` is the stable machine-readable name used by the CLI exit-code
    mapping and the HTTP service error bodies.
    """

    code = "AdSafetyError"

    def __str__(self) -> str:
        msg = super().__str__()
        return msg if msg else self.code
