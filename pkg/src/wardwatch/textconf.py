"""Line-oriented key-value file format shared by scenario, knowledge-base and
server configuration files.

Grammar: `#` starts a comment, blank lines are ignored, `[name]` or
`[name arg]` opens a section, and `key = value` lines belong to the most
recent section. Section names may repeat; keys may not repeat within one
section.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)


@dataclass
class Section:
    name: str
    arg: str | None
    line: int
    entries: dict[str, str] = field(default_factory=dict)
    entry_lines: dict[str, int] = field(default_factory=dict)

    def get(self, key: str, default: str | None = None) -> str | None:
        return self.entries.get(key, default)

    def require(self, key: str) -> str:
        if key not in self.entries:
            raise ParseError(
                f"section [{self.header}] is missing required key", self.line, key
            )
        return self.entries[key]

    def get_float(self, key: str, default: float | None = None) -> float | None:
        if key not in self.entries:
            return default
        return self._coerce(key, float)

    def require_float(self, key: str) -> float:
        self.require(key)
        return self._coerce(key, float)

    def get_int(self, key: str, default: int | None = None) -> int | None:
        if key not in self.entries:
            return default
        return self._coerce(key, int)

    def require_int(self, key: str) -> int:
        self.require(key)
        return self._coerce(key, int)

    def _coerce(self, key: str, kind):
        raw = self.entries[key]
        try:
            return kind(raw)
        except ValueError:
            raise ParseError(
                f"value {raw!r} is not a valid {kind.__name__}",
                self.entry_lines[key],
                key,
            ) from None

    @property
    def header(self) -> str:
        return self.name if self.arg is None else f"{self.name} {self.arg}"


def parse_sections(text: str) -> list[Section]:
    sections: list[Section] = []
    current: Section | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError("unterminated section header", lineno)
            inner = line[1:-1].strip()
            if not inner:
                raise ParseError("empty section header", lineno)
            name, _, arg = inner.partition(" ")
            current = Section(name=name, arg=arg.strip() or None, line=lineno)
            sections.append(current)
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {line!r}", lineno)
        if current is None:
            raise ParseError("key-value line before any section header", lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ParseError("empty key", lineno)
        if key in current.entries:
            raise ParseError(
                f"duplicate key in section [{current.header}]", lineno, key
            )
        current.entries[key] = value
        current.entry_lines[key] = lineno
    return sections


def format_value(value) -> str:
    """Render a value the parser reads back exactly (floats via repr)."""
    if isinstance(value, bool):
        return "on" if value else "off"
    if isinstance(value, float):
        return repr(value)
    return str(value)
