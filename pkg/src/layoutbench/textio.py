"""Text serialization, prompt assembly and tolerant parsing of model answers.

Canonical form: one row per line, entries separated by one space, no
brackets. The parsers also take bracketed rows, commas and ragged
whitespace, and raise :class:`ParseError` with a category otherwise.
"""
from __future__ import annotations

import configparser
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from string import Template

import numpy as np

from .tasks import LUPair

THINK_OPEN = "<think>"
THINK_CLOSE = "</think>"

NO_STRUCTURE = "no-structure-found"
RAGGED_ROWS = "ragged-rows"
NON_NUMERIC = "non-numeric-token"
MISSING_LU = "missing-L-or-U"

CONDITIONS = ("text", "visual")


class ParseError(ValueError):
    def __init__(self, category: str, detail: str = ""):
        super().__init__(f"{category}: {detail}" if detail else category)
        self.category = category
        self.detail = detail


def format_entry(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if x.is_integer() and abs(x) < 2**53:
        return str(int(x))
    return repr(x)


def serialize_matrix(m) -> str:
    m = np.asarray(m)
    return "\n".join(" ".join(format_entry(v) for v in row) for row in m)


serialize_grid = serialize_matrix


def serialize_lu_pair(pair: LUPair) -> str:
    return f"L =\n{serialize_matrix(pair.l)}\nU =\n{serialize_matrix(pair.u)}"


_NUMBER = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")
_INT = re.compile(r"[+-]?\d+")
_INNER_BRACKETS = re.compile(r"\[([^\[\]]*)\]")
_FENCE = re.compile(r"^\s*`{3,}\w*\s*$")


def _rows_from_text(text: str) -> list[list[str]]:
    if "[" in text or "]" in text:
        groups = _INNER_BRACKETS.findall(text)
        leftover = _INNER_BRACKETS.sub(" ", text)
        if re.search(r"[^\s\[\],;]", leftover):
            bad = re.search(r"[^\s\[\],;]+", leftover).group()
            raise ParseError(NON_NUMERIC, repr(bad))
        lines = groups
    else:
        lines = [ln for ln in text.splitlines() if not _FENCE.match(ln)]
    rows = []
    for ln in lines:
        tokens = [t for t in re.split(r"[\s,;]+", ln) if t]
        if tokens:
            rows.append(tokens)
    return rows


def parse_matrix(text: str) -> np.ndarray:
    """Parse a numeric matrix; int64 when every token is an integer."""
    text = text.strip()
    if not text:
        raise ParseError(NO_STRUCTURE, "empty answer")
    rows = _rows_from_text(text)
    if not rows:
        raise ParseError(NO_STRUCTURE)
    for row in rows:
        for tok in row:
            if not _NUMBER.fullmatch(tok):
                raise ParseError(NON_NUMERIC, repr(tok))
    if len({len(r) for r in rows}) != 1:
        raise ParseError(RAGGED_ROWS, f"row lengths {[len(r) for r in rows]}")
    if all(_INT.fullmatch(t) for r in rows for t in r):
        values = [[int(t) for t in r] for r in rows]
        try:
            return np.array(values, dtype=np.int64)
        except OverflowError:
            pass
    return np.array([[float(t) for t in r] for r in rows], dtype=np.float64)


def parse_grid(text: str) -> np.ndarray:
    m = parse_matrix(text)
    if not np.isin(m, (0, 1)).all():
        raise ParseError(NON_NUMERIC, "grid cells must be 0 or 1")
    return m.astype(np.int64)


# a standalone L or U label, optionally followed by '=' or ':'
_LABEL = re.compile(r"(?<![A-Za-z])([LU])(?![A-Za-z])\s*[=:]?", re.IGNORECASE)


def parse_lu_pair(text: str) -> LUPair:
    labels = [(m.group(1).upper(), m.start(), m.end()) for m in _LABEL.finditer(text)]
    u_labels = [x for x in labels if x[0] == "U"]
    if not u_labels:
        raise ParseError(MISSING_LU, "no U block")
    _, u_start, u_end = u_labels[-1]
    l_labels = [x for x in labels if x[0] == "L" and x[2] <= u_start]
    if not l_labels:
        raise ParseError(MISSING_LU, "no L block before U")
    _, _, l_end = l_labels[-1]
    l = parse_matrix(text[l_end:u_start]).astype(np.float64)
    u = parse_matrix(text[u_end:]).astype(np.float64)
    return LUPair(l, u)


@dataclass(frozen=True)
class ParsedAnswer:
    reasoning: str
    answer_region: str
    value: object = None  # parsed structure, or the ParseError raised


def strip_reasoning(text: str) -> ParsedAnswer:
    """Keep only what follows the last ``</think>``; no tag means the whole text."""
    cut = text.rfind(THINK_CLOSE)
    if cut < 0:
        return ParsedAnswer("", text)
    reasoning = text[:cut]
    start = reasoning.find(THINK_OPEN)
    if start >= 0:
        reasoning = reasoning[start + len(THINK_OPEN):]
    return ParsedAnswer(reasoning, text[cut + len(THINK_CLOSE):])


PARSERS = {"transpose": parse_matrix, "life": parse_grid, "lu": parse_lu_pair}


def parse_response(task: str, text: str) -> ParsedAnswer:
    """Strip reasoning and parse the answer region for ``task``."""
    ans = strip_reasoning(text)
    try:
        value = PARSERS[task](ans.answer_region)
    except ParseError as e:
        value = e
    return ParsedAnswer(ans.reasoning, ans.answer_region, value)


def gold_answer(task: str, target) -> str:
    """Canonical answer text for a target, as a perfect model would write it."""
    if task == "lu":
        return serialize_lu_pair(target)
    return serialize_matrix(target)


@dataclass(frozen=True)
class PromptBundle:
    condition: str
    instruction: str
    payload: str  # serialized input (text) or image reference (visual)
    answer_format_note: str
    payload_note: str = ""

    def user_text(self) -> str:
        """The text part of the user turn."""
        if self.condition == "text":
            parts = [self.instruction, f"{self.payload_note}\n{self.payload}", self.answer_format_note]
        else:
            parts = [self.instruction, self.payload_note, self.answer_format_note]
        return "\n\n".join(p for p in parts if p)


class PromptTemplates:
    """Per-task prompt templates loaded from an INI file with ``${name}`` placeholders."""

    def __init__(self, path: str | Path | None = None):
        parser = configparser.ConfigParser(interpolation=None)
        if path is None:
            text = resources.files("layoutbench").joinpath("templates/prompts_v1.ini").read_text()
        else:
            text = Path(path).read_text()
        parser.read_string(text)
        self.version = parser.get("meta", "version", fallback="unversioned")
        self._sections = {s: dict(parser[s]) for s in parser.sections() if s != "meta"}

    def field(self, task: str, name: str, **values) -> str:
        try:
            raw = self._sections[task][name]
        except KeyError:
            raise KeyError(f"template has no {name!r} for task {task!r}") from None
        return Template(raw).substitute(values)


_default_templates: PromptTemplates | None = None


def build_prompt(instance, condition: str, templates: PromptTemplates | None = None,
                 image_ref: str | None = None) -> PromptBundle:
    global _default_templates
    if condition not in CONDITIONS:
        raise ValueError(f"unknown condition {condition!r}")
    if templates is None:
        if _default_templates is None:
            _default_templates = PromptTemplates()
        templates = _default_templates
    task, values = instance.task, {"size": instance.size}
    instruction = templates.field(task, "instruction", **values)
    note = templates.field(task, "answer_format", **values)
    if condition == "text":
        return PromptBundle(condition, instruction, serialize_matrix(instance.input), note,
                            templates.field(task, "text_payload_intro", **values))
    ref = image_ref if image_ref is not None else f"{instance.id}.png"
    return PromptBundle(condition, instruction, ref, note,
                        templates.field(task, "visual_payload_intro", **values))
