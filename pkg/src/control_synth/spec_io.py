"""Reading task specification files and run configuration.

A specification file is UTF-8 text made of named sections::

    [task]
    description = Swing the pendulum up and hold it upright.
        Indented lines continue the description.

    [env]
    id = pendulum_swingup
    horizon = 1000

    [starter]
    ```python
    def policy(obs):
        return 0.0
    ```

    [run]
    islands = 10
    seed = 42

Blank lines and lines starting with ``#`` are ignored outside ``[starter]``.
"""

import re
import typing
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .environments import get_environment
from .errors import ConfigError, PolicyRuntimeError, PolicySyntaxError
from .models import DEFAULT_HORIZON, RunConfig, TaskSpec
from .policy_parser import parse
from .sandbox import eval_policy

SECTIONS = ("task", "env", "starter", "run")

_SECTION = re.compile(r"^\[(\w+)\]\s*$")
_FENCE = re.compile(r"^\s*```")

Overrides = Union[Mapping[str, object], Sequence[str], None]


@dataclass
class _Section:
    name: str
    line: int
    lines: List[Tuple[int, str]] = field(default_factory=list)


def zero_starter(action_dim: int) -> str:
    """Starter used when a spec has no [starter] section."""
    value = "0.0" if action_dim == 1 else "[" + ", ".join(["0.0"] * action_dim) + "]"
    return f"def policy(obs):\n    return {value}\n"


def _split_sections(text: str, path: Path) -> Dict[str, _Section]:
    sections: Dict[str, _Section] = {}
    current: Optional[_Section] = None
    in_fence = False
    for number, raw in enumerate(text.splitlines(), start=1):
        if _FENCE.match(raw):
            in_fence = not in_fence
        match = None if in_fence else _SECTION.match(raw)
        if match:
            name = match.group(1).lower()
            if name not in SECTIONS:
                raise ConfigError(f"{path}:{number}: unknown section [{name}]")
            if name in sections:
                raise ConfigError(f"{path}:{number}: duplicate section [{name}]")
            current = sections[name] = _Section(name, number)
            continue
        if current is None:
            if raw.strip() and not raw.lstrip().startswith("#"):
                raise ConfigError(f"{path}:{number}: text outside any section")
            continue
        current.lines.append((number, raw))
    if in_fence:
        raise ConfigError(f"{path}: unterminated ``` block")
    return sections


def _key_values(section: _Section, path: Path) -> Dict[str, Tuple[int, str]]:
    """Parse ``key = value`` lines; indented lines continue the previous value."""
    values: Dict[str, Tuple[int, str]] = {}
    last: Optional[str] = None
    for number, raw in section.lines:
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if raw[:1].isspace() and last is not None:
            line, value = values[last]
            values[last] = (line, f"{value} {stripped}".strip())
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{number}: expected 'key = value' in [{section.name}]")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key in values:
            raise ConfigError(f"{path}:{number}: duplicate key '{key}'")
        values[key] = (number, value)
        last = key
    return values


def _starter_text(section: _Section) -> Tuple[str, int]:
    """Program text of the [starter] section and the file line it starts after."""
    lines = section.lines
    fences = [i for i, (_, raw) in enumerate(lines) if _FENCE.match(raw)]
    if len(fences) >= 2:
        start, end = fences[0], fences[1]
        body = lines[start + 1 : end]
        return "\n".join(raw for _, raw in body) + "\n", lines[start][0]
    body = [(n, raw) for n, raw in lines]
    while body and not body[0][1].strip():
        body.pop(0)
    if not body:
        return "", section.line
    return "\n".join(raw for _, raw in body).rstrip() + "\n", body[0][0] - 1


def _read(path: Union[str, Path]) -> Tuple[Path, str]:
    path = Path(path)
    try:
        return path, path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"spec file not found: {path}") from None
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigError(f"cannot read {path}: {e}") from None


def load_spec(path: Union[str, Path]) -> TaskSpec:
    """
    Load and validate a task specification file.

    Args:
        path: Specification file

    Returns:
        TaskSpec whose starter policy parses and runs on a zero observation

    Raises:
        ConfigError: Missing file, malformed structure, unknown env id,
            dimension mismatch or a starter policy that fails to parse or run
    """
    path, text = _read(path)
    sections = _split_sections(text, path)

    task = _key_values(sections["task"], path) if "task" in sections else {}
    unknown = set(task) - {"description"}
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) in [task]: {', '.join(sorted(unknown))}")
    description = task.get("description", (0, ""))[1]

    if "env" not in sections:
        raise ConfigError(f"{path}: missing [env] section")
    env_values = _key_values(sections["env"], path)
    unknown = set(env_values) - {"id", "horizon", "obs_dim", "action_dim"}
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) in [env]: {', '.join(sorted(unknown))}")
    if "id" not in env_values:
        raise ConfigError(f"{path}: [env] needs an 'id'")
    env = get_environment(env_values["id"][1])
    integers = {}
    for key, default in (("horizon", DEFAULT_HORIZON), ("obs_dim", 0), ("action_dim", 0)):
        line, raw = env_values.get(key, (0, str(default)))
        try:
            integers[key] = int(raw)
        except ValueError:
            raise ConfigError(f"{path}:{line}: {key} must be int, got '{raw}'") from None

    if "starter" in sections:
        source, offset = _starter_text(sections["starter"])
    else:
        source, offset = "", 0
    if not source.strip():
        source = zero_starter(env.action_dim)

    spec = TaskSpec(
        task_description=description,
        starter_policy_source=source,
        env_id=env.env_id,
        horizon=integers["horizon"],
        obs_dim=integers["obs_dim"],
        action_dim=integers["action_dim"],
    )
    check_starter(spec, path, offset)
    return spec


def check_starter(spec: TaskSpec, path: Union[str, Path] = "<spec>", offset: int = 0) -> None:
    """Parse the starter and run it once on a zero observation."""
    try:
        program = parse(spec.starter_policy_source, spec.obs_dim, spec.action_dim)
    except PolicySyntaxError as e:
        raise ConfigError(
            f"{path}:{offset + e.line}:{e.column}: starter policy does not parse: {e.message}"
        ) from e
    try:
        eval_policy(program, [0.0] * spec.obs_dim)
    except PolicyRuntimeError as e:
        raise ConfigError(f"{path}: starter policy fails on a zero observation: {e}") from e


def _coerce(key: str, raw: object, annotation: object) -> object:
    optional = False
    if typing.get_origin(annotation) is Union:
        args = [a for a in typing.get_args(annotation) if a is not type(None)]
        optional, annotation = True, args[0]
    if optional and (raw is None or str(raw).strip().lower() in ("", "none", "null")):
        return None
    text = str(raw).strip()
    try:
        if annotation is int:
            if isinstance(raw, bool):
                raise ValueError
            return int(text)
        if annotation is float:
            return float(text)
    except ValueError:
        name = getattr(annotation, "__name__", str(annotation))
        raise ConfigError(f"{key} must be {name}, got '{raw}'") from None
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        text = text[1:-1]
    return text


def _normalize_overrides(overrides: Overrides) -> Dict[str, object]:
    if overrides is None:
        return {}
    if isinstance(overrides, Mapping):
        return dict(overrides)
    result: Dict[str, object] = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override '{item}' must look like key=value")
        key, value = item.split("=", 1)
        result[key.strip()] = value.strip()
    return result


def apply_overrides(cfg: RunConfig, overrides: Overrides) -> RunConfig:
    """Return ``cfg`` with overrides coerced and applied."""
    hints = typing.get_type_hints(RunConfig)
    changes = {}
    for key, raw in _normalize_overrides(overrides).items():
        key = key.replace("-", "_")
        if key not in hints:
            raise ConfigError(f"unknown run setting '{key}'")
        changes[key] = _coerce(key, raw, hints[key])
    return replace(cfg, **changes) if changes else cfg


def load_run_config(path: Union[str, Path, None] = None, overrides: Overrides = None) -> RunConfig:
    """
    Build a RunConfig from defaults, a file and overrides (in that precedence).

    The file may be a full specification file (its ``[run]`` section is read)
    or a plain list of ``key = value`` lines.

    Raises:
        ConfigError: Unreadable file, unknown key, uncoercible value or a
            violated invariant (for example islands < 2)
    """
    file_values: Dict[str, object] = {}
    if path is not None:
        path, text = _read(path)
        if any(_SECTION.match(line) for line in text.splitlines()):
            sections = _split_sections(text, path)
            run_section = sections.get("run")
        else:
            run_section = _Section("run", 0, list(enumerate(text.splitlines(), start=1)))
        if run_section is not None:
            file_values = {k: v for k, (_, v) in _key_values(run_section, path).items()}

    cfg = apply_overrides(RunConfig(), file_values)
    cfg = apply_overrides(cfg, overrides)
    if cfg.max_candidates < 1:
        raise ConfigError("max_candidates must be ≥ 1")
    return cfg
