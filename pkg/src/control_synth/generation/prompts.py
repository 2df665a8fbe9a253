"""Prompt construction and policy extraction from generator output."""

import ast
import re
import textwrap
from typing import List, Optional

from ..errors import ExtractionFailure
from ..models import Prompt, TaskSpec, program_id_for
from ..policy_ast import PolicyProgram
from ..policy_printer import INDENT, pretty_print

INSTRUCTION = (
    "On every iteration, improve policy_v1 over the policy_vX methods from previous iterations."
)
VERSION_COUNT = 2
CANONICAL_NAME = "policy"

_FENCE_LINE = re.compile(r"^\s*```.*$")
_ANY_POLICY_DEF = re.compile(r"^\s*def\s+policy\w*\s*\(")


def version_name(k: int) -> str:
    return f"policy_v{k}"


def build_prompt(low: PolicyProgram, high: PolicyProgram, spec: TaskSpec) -> Prompt:
    """
    Lay out two parent programs for the generator to improve on.

    The lower-scoring parent is shown as policy_v0 and the higher-scoring one
    as policy_v1; the prompt ends with the header and docstring of
    policy_v2 so that a completion supplies its body.
    """
    description = spec.task_description.strip().replace('"""', "'''")
    header = f'"""{description}\n\n{INSTRUCTION}\n"""' if description else f'"""{INSTRUCTION}"""'
    returns = "float" if spec.action_dim == 1 else "np.ndarray"
    requested = version_name(VERSION_COUNT)

    parts = [header, "import numpy as np"]
    for k, program in enumerate((low, high)):
        parts.append(pretty_print(program, name=version_name(k)).rstrip("\n"))
    parts.append(
        f"def {requested}(obs: np.ndarray) -> {returns}:\n"
        f"{INDENT}\"\"\"Improved version of '{version_name(VERSION_COUNT - 1)}'.\"\"\"\n"
    )
    text = "\n\n\n".join(parts)
    return Prompt(
        text=text,
        lineage=(program_id_for(low), program_id_for(high)),
        version_count=VERSION_COUNT,
        requested_name=requested,
    )


def _indent_of(line: str) -> int:
    return len(line) - len(line.lstrip())


def _find_def(lines: List[str], pattern: "re.Pattern[str]") -> Optional[int]:
    for i, line in enumerate(lines):
        if pattern.match(line):
            return i
    return None


def _capture_block(lines: List[str], start: int, indent: int) -> List[str]:
    captured = [lines[start]]
    for line in lines[start + 1 :]:
        if line.strip() and _indent_of(line) <= indent:
            break
        captured.append(line)
    while captured and not captured[-1].strip():
        captured.pop()
    return captured


def _looks_like_body(body: str) -> bool:
    wrapped = "def policy(obs):\n" + textwrap.indent(textwrap.dedent(body), INDENT)
    try:
        tree = ast.parse(wrapped)
    except SyntaxError:
        return False
    return any(isinstance(node, ast.Return) for node in ast.walk(tree))


def _wrap_body(body_lines: List[str]) -> str:
    body = textwrap.dedent("\n".join(body_lines)).strip("\n")
    if not body or not _looks_like_body(body):
        raise ExtractionFailure("no policy function found in reply")
    return f"def {CANONICAL_NAME}(obs):\n" + textwrap.indent(body, INDENT) + "\n"


def extract_policy(llm_text: str, requested: str = version_name(VERSION_COUNT)) -> str:
    """
    Pull one policy function out of free-form generator output.

    Markdown fences are dropped. A ``def`` named ``requested`` wins. Failing
    that, an indented reply is read as the body of the open header the
    prompt ends with, up to the first unindented line. Otherwise the first
    ``def policy...`` is taken, and a reply holding only unindented
    statements is wrapped as a body. The function is renamed to ``policy``.

    Raises:
        ExtractionFailure: When no function or body can be found
    """
    lines = [line for line in llm_text.expandtabs(4).splitlines() if not _FENCE_LINE.match(line)]
    first = next((line for line in lines if line.strip()), None)
    if first is None:
        raise ExtractionFailure("empty reply")

    start = _find_def(lines, re.compile(rf"^\s*def\s+{re.escape(requested)}\s*\("))
    if start is None and _indent_of(first) > 0 and not first.lstrip().startswith("def "):
        body_lines: List[str] = []
        for line in lines:
            if line.strip() and _indent_of(line) == 0:
                break
            body_lines.append(line)
        return _wrap_body(body_lines)
    if start is None:
        start = _find_def(lines, _ANY_POLICY_DEF)
    if start is None:
        return _wrap_body(lines)

    captured = _capture_block(lines, start, _indent_of(lines[start]))
    source = textwrap.dedent("\n".join(captured))
    source = re.sub(r"^def\s+\w+", f"def {CANONICAL_NAME}", source, count=1)
    return source + "\n"
