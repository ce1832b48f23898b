"""Problem specification: parse, validate, serialize, and render for prompts.

The specification document is TOML with top-level keys:

    function_name = "two_sum"                  # required
    signature     = "two_sum(nums, target)"    # required
    description   = "..."                      # required, may be multi-line
    constraints   = ["...", "..."]             # optional array of strings
    [[examples]]                               # optional array of tables
    input    = "..."
    expected = "..."

Unknown top-level keys are preserved in the raw document and reported as
warnings, never errors, so user-authored specs stay editable.
"""

from __future__ import annotations

import logging
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import SpecParseError, SpecValidationError
from .hashing import sha256_text

log = logging.getLogger(__name__)

REQUIRED_KEYS = ("function_name", "signature", "description")
KNOWN_KEYS = REQUIRED_KEYS + ("constraints", "examples")


@dataclass(frozen=True)
class SpecExample:
    input: str
    expected: str


@dataclass(frozen=True)
class ProblemSpec:
    """Immutable parsed specification.

    Equality is semantic: the original document text and its hash are
    excluded so that parse(serialize(spec)) == spec holds even though the
    serializer emits a canonical form.
    """

    function_name: str
    signature: str
    description: str
    constraints: tuple[str, ...] = ()
    examples: tuple[SpecExample, ...] = ()
    raw_source: str = field(default="", compare=False)
    source_hash: str = field(default="", compare=False)
    unknown_keys: tuple[str, ...] = field(default=(), compare=False)


def _require_string(data: dict, key: str) -> str:
    if key not in data:
        raise SpecValidationError(f"missing required key: {key}")
    value = data[key]
    if not isinstance(value, str) or not value.strip():
        raise SpecValidationError(f"key {key!r} must be a non-empty string")
    return value


def parse_spec(document: str) -> ProblemSpec:
    """Parse a TOML specification document into a ProblemSpec."""
    if not document.strip():
        raise SpecValidationError("specification document is empty")
    try:
        data = tomllib.loads(document)
    except tomllib.TOMLDecodeError as exc:
        # tomllib messages carry "at line L, column C"; keep them verbatim.
        raise SpecParseError(f"invalid TOML: {exc}") from exc

    function_name = _require_string(data, "function_name")
    signature = _require_string(data, "signature")
    description = _require_string(data, "description")

    constraints_raw = data.get("constraints", [])
    if not isinstance(constraints_raw, list) or not all(isinstance(c, str) for c in constraints_raw):
        raise SpecValidationError("key 'constraints' must be an array of strings")

    examples_raw = data.get("examples", [])
    if not isinstance(examples_raw, list):
        raise SpecValidationError("key 'examples' must be an array of tables")
    examples = []
    for i, ex in enumerate(examples_raw):
        if not isinstance(ex, dict) or "input" not in ex or "expected" not in ex:
            raise SpecValidationError(f"examples[{i}] must be a table with 'input' and 'expected'")
        examples.append(SpecExample(input=str(ex["input"]), expected=str(ex["expected"])))

    unknown = tuple(sorted(k for k in data if k not in KNOWN_KEYS))
    for key in unknown:
        log.warning("specification has unknown key %r (preserved in raw source)", key)

    return ProblemSpec(
        function_name=function_name,
        signature=signature,
        description=description,
        constraints=tuple(constraints_raw),
        examples=tuple(examples),
        raw_source=document,
        source_hash=sha256_text(document),
        unknown_keys=unknown,
    )


_TOML_ESCAPES = {
    '"': '\\"',
    "\\": "\\\\",
    "\b": "\\b",
    "\f": "\\f",
    "\n": "\\n",
    "\r": "\\r",
    "\t": "\\t",
}


def _toml_string(value: str) -> str:
    """Encode a string as a TOML basic string.

    Control characters are escaped; everything else (including non-ASCII)
    stays literal. JSON-style surrogate-pair escapes are not valid TOML, so
    astral-plane characters must pass through unescaped.
    """
    out = ['"']
    for ch in value:
        if ch in _TOML_ESCAPES:
            out.append(_TOML_ESCAPES[ch])
        elif ord(ch) < 0x20 or ord(ch) == 0x7F:
            out.append(f"\\u{ord(ch):04X}")
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def serialize_spec(spec: ProblemSpec) -> str:
    """Render a canonical TOML document for the spec's semantic fields."""
    lines = [
        f"function_name = {_toml_string(spec.function_name)}",
        f"signature = {_toml_string(spec.signature)}",
        f"description = {_toml_string(spec.description)}",
    ]
    if spec.constraints:
        items = ", ".join(_toml_string(c) for c in spec.constraints)
        lines.append(f"constraints = [{items}]")
    for ex in spec.examples:
        lines.append("")
        lines.append("[[examples]]")
        lines.append(f"input = {_toml_string(ex.input)}")
        lines.append(f"expected = {_toml_string(ex.expected)}")
    return "\n".join(lines) + "\n"


def render_for_prompt(spec: ProblemSpec) -> str:
    """Deterministic plain-text rendering used inside generation prompts."""
    parts = [
        f"Function: {spec.function_name}",
        f"Signature: {spec.signature}",
        "",
        "Description:",
        spec.description.strip(),
    ]
    if spec.constraints:
        parts.append("")
        parts.append("Constraints:")
        parts.extend(f"- {c}" for c in spec.constraints)
    if spec.examples:
        parts.append("")
        parts.append("Examples:")
        for ex in spec.examples:
            parts.append(f"- input: {ex.input} -> expected: {ex.expected}")
    return "\n".join(parts) + "\n"
