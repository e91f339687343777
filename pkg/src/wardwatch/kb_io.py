"""Knowledge-base text serialization.

Same line-oriented key-value format as scenario files, with sections
`[meta]`, `[bands <kind>]`, `[trend <kind>]` and `[debounce]`. Band tables
serialize as ascending breakpoints plus one band label per interval
(intervals are lower-inclusive, upper-exclusive, unbounded at both ends).
"""

from __future__ import annotations

from .engine import (
    Band,
    BandTable,
    DebounceConfig,
    KnowledgeBase,
    TrendRule,
    ValidationError,
    default_kb,
)
from .protocol import VitalKind
from .textconf import ParseError, Section, format_value, parse_sections


def save_kb(kb: KnowledgeBase) -> str:
    lines = [
        "# knowledge base: vital-sign bands, sudden-change rules, debounce",
        "",
        "[meta]",
        f"revision = {kb.revision}",
        f"author = {kb.author}",
        f"updated_at = {kb.updated_at}",
        "",
    ]
    for kind in VitalKind:
        table = kb.tables.get(kind)
        if table is None:
            continue
        lines.append(f"[bands {kind.label}]")
        lines.append(
            "breakpoints = " + " ".join(format_value(b) for b in table.breakpoints)
        )
        lines.append("bands = " + " ".join(band.label for band in table.bands))
        lines.append("")
    for kind in VitalKind:
        rule = kb.trends.get(kind)
        if rule is None:
            continue
        lines.append(f"[trend {kind.label}]")
        lines.append(f"window_s = {format_value(rule.window_s)}")
        lines.append(f"max_abs_delta = {format_value(rule.max_abs_delta)}")
        lines.append("")
    lines.append("[debounce]")
    lines.append(f"n_warning_raise = {kb.debounce.n_warning_raise}")
    lines.append(f"n_critical_raise = {kb.debounce.n_critical_raise}")
    lines.append(f"m_clear = {kb.debounce.m_clear}")
    lines.append("")
    return "\n".join(lines)


def load_kb(text: str) -> KnowledgeBase:
    """Parse a KB document; raises ParseError on malformed input and
    ValidationError on rule violations."""
    sections = parse_sections(text)
    tables: dict[VitalKind, BandTable] = {}
    trends: dict[VitalKind, TrendRule] = {}
    debounce = DebounceConfig()
    revision, author, updated_at = 1, "unknown", ""
    errors: list[str] = []
    for section in sections:
        if section.name == "meta":
            revision = section.get_int("revision", 1)
            author = section.get("author", "unknown")
            updated_at = section.get("updated_at", "")
        elif section.name == "bands":
            kind = _section_kind(section)
            if kind in tables:
                raise ParseError(f"duplicate [bands {kind.label}] section", section.line)
            tables[kind] = _parse_band_table(kind, section, errors)
        elif section.name == "trend":
            kind = _section_kind(section)
            trends[kind] = TrendRule(
                kind,
                window_s=section.require_float("window_s"),
                max_abs_delta=section.require_float("max_abs_delta"),
            )
            rule = trends[kind]
            if rule.window_s <= 0:
                errors.append(f"trend {kind.label}: nonpositive window_s {rule.window_s}")
            if rule.max_abs_delta <= 0:
                errors.append(
                    f"trend {kind.label}: nonpositive max_abs_delta {rule.max_abs_delta}"
                )
        elif section.name == "debounce":
            debounce = DebounceConfig(
                n_warning_raise=section.get_int("n_warning_raise", 3),
                n_critical_raise=section.get_int("n_critical_raise", 1),
                m_clear=section.get_int("m_clear", 5),
            )
            for name in ("n_warning_raise", "n_critical_raise", "m_clear"):
                if getattr(debounce, name) < 1:
                    errors.append(f"debounce: nonpositive {name}")
        else:
            raise ParseError(f"unknown section [{section.header}]", section.line)
    if not tables:
        errors.append("no band tables defined")
    if errors:
        raise ValidationError(errors)
    return KnowledgeBase(
        tables=tables,
        trends=trends,
        debounce=debounce,
        revision=revision,
        author=author,
        updated_at=updated_at,
    )


def load_kb_file(path) -> KnowledgeBase:
    with open(path, encoding="utf-8") as handle:
        return load_kb(handle.read())


def save_kb_file(kb: KnowledgeBase, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(save_kb(kb))


def write_default_kb(path) -> KnowledgeBase:
    kb = default_kb()
    save_kb_file(kb, path)
    return kb


def _section_kind(section: Section) -> VitalKind:
    if section.arg is None:
        raise ParseError(
            f"section [{section.name}] needs a vital kind argument", section.line
        )
    try:
        return VitalKind.from_label(section.arg)
    except KeyError:
        raise ParseError(f"unknown vital kind {section.arg!r}", section.line) from None


def _parse_band_table(kind: VitalKind, section: Section, errors: list[str]) -> BandTable:
    raw_breaks = section.require("breakpoints").split()
    raw_bands = section.require("bands").split()
    try:
        breakpoints = tuple(float(b) for b in raw_breaks)
    except ValueError:
        raise ParseError(
            "breakpoints must be numbers",
            section.entry_lines["breakpoints"],
            "breakpoints",
        ) from None
    try:
        bands = tuple(Band.from_label(b) for b in raw_bands)
    except KeyError as err:
        raise ParseError(str(err), section.entry_lines["bands"], "bands") from None
    if any(b >= a for b, a in zip(breakpoints, breakpoints[1:])):
        errors.append(f"bands {kind.label}: non-ascending breakpoints")
    if len(bands) != len(breakpoints) + 1:
        errors.append(
            f"bands {kind.label}: expected {len(breakpoints) + 1} band labels, "
            f"got {len(bands)}"
        )
    return BandTable(kind, breakpoints, bands)
