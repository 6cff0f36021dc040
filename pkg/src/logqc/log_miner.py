"""Mining numeric features out of preprocessing runtime logs.

A RuleSet is a list of declarative extraction rules: each rule names a
feature, carries a regular expression with one numeric capture group (or two
timestamp captures for step-runtime rules), and says which match occurrence
to take. Extraction never raises on arbitrary log text; anything that does
not parse becomes a Missing value plus a diagnostic.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .errors import DataError, RuleSpecError
from .ioutil import Diagnostics, format_number, write_csv

GROUPS = ("StepRuntime", "VoxelCount", "BrainCoordinate", "OtherMetric")

_PATTERN_FLAGS = re.MULTILINE | re.DOTALL
_SECONDS_PER_DAY = 86400


@dataclass(frozen=True)
class Occurrence:
    """Which regex match to take: first, last, or the k-th (1-based)."""

    kind: str  # "first" | "last" | "nth"
    index: int = 1

    @classmethod
    def parse(cls, text: str) -> "Occurrence":
        token = text.strip().lower()
        if token == "first":
            return cls("first")
        if token == "last":
            return cls("last")
        m = re.fullmatch(r"nth[\s(:]*(\d+)\)?", token)
        if m:
            k = int(m.group(1))
            if k < 1:
                raise RuleSpecError(f"nth occurrence must be >= 1, got {k}")
            return cls("nth", k)
        raise RuleSpecError(f"bad occurrence {text!r}; expected first, last, or nth <k>")

    def select(self, matches: list):
        if not matches:
            return None
        if self.kind == "first":
            return matches[0]
        if self.kind == "last":
            return matches[-1]
        return matches[self.index - 1] if self.index <= len(matches) else None

    def __str__(self) -> str:
        return self.kind if self.kind != "nth" else f"nth {self.index}"


@dataclass(frozen=True)
class FeatureRule:
    name: str
    group: str
    pattern: str
    regex: re.Pattern = field(compare=False, repr=False)
    occurrence: Occurrence = Occurrence("first")
    unit: str = ""


def make_rule(name: str, group: str, pattern: str, occurrence="first", unit: str = "") -> FeatureRule:
    """Validate and compile a single rule."""
    if not name:
        raise RuleSpecError("rule is missing a name")
    if group not in GROUPS:
        raise RuleSpecError(f"rule {name!r}: unknown group {group!r}; expected one of {GROUPS}")
    occ = occurrence if isinstance(occurrence, Occurrence) else Occurrence.parse(str(occurrence))
    try:
        regex = re.compile(pattern, _PATTERN_FLAGS)
    except re.error as exc:
        raise RuleSpecError(f"rule {name!r}: pattern does not compile: {exc}") from exc
    expected = 2 if group == "StepRuntime" else 1
    if regex.groups != expected:
        raise RuleSpecError(
            f"rule {name!r}: pattern has {regex.groups} capture group(s); "
            f"{group} rules need exactly {expected}"
        )
    return FeatureRule(name=name, group=group, pattern=pattern, regex=regex, occurrence=occ, unit=unit)


@dataclass(frozen=True)
class RuleSet:
    rules: tuple
    version: str = ""

    def __post_init__(self):
        seen = set()
        for rule in self.rules:
            if rule.name in seen:
                raise RuleSpecError(f"duplicate rule name {rule.name!r}")
            seen.add(rule.name)

    @property
    def names(self) -> list[str]:
        return [r.name for r in self.rules]

    def __len__(self) -> int:
        return len(self.rules)

    def by_name(self, name: str) -> FeatureRule:
        for rule in self.rules:
            if rule.name == name:
                return rule
        raise KeyError(name)


_RULE_KEYS = ("name", "group", "pattern", "occurrence", "unit")


def compile_rules(text: str) -> RuleSet:
    """Parse a rule-spec document (line-oriented blocks, or JSON) into a RuleSet.

    Line format: `key: value` lines, one blank-line-separated block per rule,
    with an optional leading `version:` line. `#` starts a comment line.
    """
    if text.lstrip().startswith("{"):
        return _compile_rules_json(text)
    version = ""
    raw_rules: list[dict] = []
    current: dict | None = None
    current_line = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if ":" not in line:
            raise RuleSpecError(f"line {lineno}: expected 'key: value', got {line!r}")
        key, _, value = line.partition(":")
        key = key.strip().lower()
        value = value.strip()
        if key == "version":
            if current is not None or raw_rules:
                raise RuleSpecError(f"line {lineno}: version must appear before the first rule")
            version = value
            continue
        if key not in _RULE_KEYS:
            raise RuleSpecError(f"line {lineno}: unknown field {key!r}")
        if key == "name":
            if current is not None:
                raw_rules.append(current)
            current = {"name": value, "_line": lineno}
            current_line = lineno
            continue
        if current is None:
            raise RuleSpecError(f"line {lineno}: field {key!r} appears before any 'name:'")
        if key in current:
            raise RuleSpecError(f"line {lineno}: duplicate field {key!r} in rule starting at line {current_line}")
        current[key] = value
    if current is not None:
        raw_rules.append(current)

    rules = []
    for raw in raw_rules:
        line = raw.pop("_line")
        for required in ("group", "pattern"):
            if required not in raw:
                raise RuleSpecError(
                    f"rule {raw.get('name', '?')!r} (line {line}): missing field {required!r}"
                )
        rules.append(
            make_rule(
                name=raw["name"],
                group=raw["group"],
                pattern=raw["pattern"],
                occurrence=raw.get("occurrence", "first"),
                unit=raw.get("unit", ""),
            )
        )
    return RuleSet(rules=tuple(rules), version=version)


def _compile_rules_json(text: str) -> RuleSet:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RuleSpecError(f"rule spec is not valid JSON: {exc}") from exc
    rules = []
    for entry in data.get("rules", []):
        missing = [k for k in ("name", "group", "pattern") if k not in entry]
        if missing:
            raise RuleSpecError(f"JSON rule entry {entry.get('name', '?')!r} missing {missing}")
        rules.append(
            make_rule(
                name=entry["name"],
                group=entry["group"],
                pattern=entry["pattern"],
                occurrence=entry.get("occurrence", "first"),
                unit=entry.get("unit", ""),
            )
        )
    return RuleSet(rules=tuple(rules), version=str(data.get("version", "")))


def load_rules(source: str | Path) -> RuleSet:
    """Load rules from a file path, or the shipped defaults for "default"."""
    if str(source) == "default":
        return default_rules()
    path = Path(source)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read rule spec {path}: {exc}") from exc
    return compile_rules(text)


@lru_cache(maxsize=1)
def default_rules() -> RuleSet:
    """The shipped 38-rule set matching the synthetic log grammar."""
    text = resources.files("logqc.data").joinpath("default.rules").read_text(encoding="utf-8")
    return compile_rules(text)


@dataclass
class FeatureVector:
    """Per-scan extraction result: feature name -> finite float or None."""

    scan_id: str
    values: dict
    source_path: str = ""

    def missing_count(self) -> int:
        return sum(1 for v in self.values.values() if v is None)


def _parse_clock(text: str) -> int:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"bad timestamp {text!r}")
    h, m, s = (int(p) for p in parts)
    return h * 3600 + m * 60 + s


def extract_features(log_text: str, rules: RuleSet, scan_id: str = "", source_path: str = "",
                     diagnostics: Diagnostics | None = None) -> FeatureVector:
    """Apply every rule to the log text; unmatched or unparseable -> Missing."""
    values: dict = {}
    for rule in rules.rules:
        value = None
        try:
            matches = list(rule.regex.finditer(log_text))
            chosen = rule.occurrence.select(matches)
            if chosen is not None:
                if rule.group == "StepRuntime":
                    start = _parse_clock(chosen.group(1))
                    end = _parse_clock(chosen.group(2))
                    delta = end - start
                    if delta < 0:
                        delta += _SECONDS_PER_DAY
                    value = float(delta)
                else:
                    parsed = float(chosen.group(1))
                    if parsed != parsed or parsed in (float("inf"), float("-inf")):
                        raise ValueError(f"non-finite value {chosen.group(1)!r}")
                    value = parsed
        except Exception as exc:  # extraction must never raise on log content
            if diagnostics is not None:
                diagnostics.add(scan_id or "<text>", f"rule {rule.name}: {exc}")
            value = None
        values[rule.name] = value
    return FeatureVector(scan_id=scan_id, values=values, source_path=source_path)


def extract_corpus(log_dir: str | Path, rules: RuleSet,
                   diagnostics: Diagnostics | None = None) -> list[FeatureVector]:
    """Extract one FeatureVector per log file, ordered by scan id (file stem)."""
    log_dir = Path(log_dir)
    if not log_dir.is_dir():
        raise DataError(f"log directory {log_dir} does not exist")
    vectors = []
    for path in sorted(log_dir.iterdir()):
        if path.name.startswith(".") or not path.is_file():
            continue
        scan_id = path.stem
        try:
            text = path.read_bytes().decode("utf-8", errors="replace")
        except OSError as exc:
            if diagnostics is not None:
                diagnostics.add(scan_id, f"unreadable file {path.name}: {exc}")
            continue
        vector = extract_features(text, rules, scan_id=scan_id, source_path=str(path),
                                  diagnostics=diagnostics)
        if len(rules) and vector.missing_count() == len(rules) and diagnostics is not None:
            diagnostics.add(scan_id, "no rule matched anything in this file")
        vectors.append(vector)
    vectors.sort(key=lambda v: v.scan_id)
    return vectors


def features_to_csv(vectors: list[FeatureVector], rules: RuleSet, path) -> None:
    """Wide CSV: one row per scan, one column per rule, empty cell = Missing."""
    header = ["scan_id"] + rules.names
    rows = []
    for vec in vectors:
        rows.append([vec.scan_id] + [format_number(vec.values.get(name)) for name in rules.names])
    write_csv(path, header, rows)
