"""Shipped policy files and sample task specifications."""

from pathlib import Path
from typing import List

CORPUS_DIR = Path(__file__).resolve().parent


def corpus_path(name: str) -> Path:
    """
    Locate a shipped file by name.

    Raises:
        FileNotFoundError: If no such file ships with the package
    """
    path = CORPUS_DIR / name
    if not path.is_file():
        raise FileNotFoundError(f"no corpus file named '{name}'")
    return path


def read_policy(name: str) -> str:
    if not name.endswith(".policy"):
        name += ".policy"
    return corpus_path(name).read_text(encoding="utf-8")


def policy_names(prefix: str = "") -> List[str]:
    return sorted(p.stem for p in CORPUS_DIR.glob(f"{prefix}*.policy"))
