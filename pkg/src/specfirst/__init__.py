"""specfirst: a human-in-the-loop, spec-driven code generation workbench.

Workflow: a TOML problem specification seeds an LLM-generated test suite;
the user curates the tests (explain, regenerate, delete, edit); the model
implements a function that must satisfy the suite; failing runs can feed
generated advice back into regeneration. Every action lands in an
append-only, hash-anchored telemetry log from which the study metrics are
computed.
"""

__version__ = "0.1.0"
