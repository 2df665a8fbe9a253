"""Reporter for collecting and outputting run statistics."""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional


class Reporter:
    """Collects counters, notes and warnings for one command."""

    def __init__(self, title: str = "Control Synthesis Report"):
        self.title = title
        self.counters: Dict[str, int] = {}
        self.notes: List[Dict[str, Any]] = []
        self.warnings: List[str] = []
        self.results: Dict[str, Any] = {}

    def increment(self, category: str, count: int = 1) -> None:
        """
        Increment counter for a category.

        Args:
            category: Dotted category name (e.g., "rejections.parse_error")
            count: Amount to increment (default 1)
        """
        self.counters[category] = self.counters.get(category, 0) + count

    def note(self, description: str, details: Optional[Dict[str, Any]] = None) -> None:
        """
        Record a milestone.

        Args:
            description: Human-readable description
            details: Optional additional metadata
        """
        entry: Dict[str, Any] = {"description": description}
        if details:
            entry["details"] = details
        self.notes.append(entry)

    def warn(self, message: str) -> None:
        self.warnings.append(message)

    def set_result(self, key: str, value: Any) -> None:
        """Attach a named result (best score, histogram summary, ...)."""
        self.results[key] = value

    def get_summary(self) -> Dict[str, Any]:
        """
        Get summary of all statistics.

        Returns:
            Dictionary with counters, results, notes and warnings
        """
        return {
            "counters": dict(self.counters),
            "results": dict(self.results),
            "notes": list(self.notes),
            "warnings": list(self.warnings),
        }

    def write_json(self, path: Path) -> None:
        """
        Write report as JSON.

        Args:
            path: Output file path
        """
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.get_summary(), f, indent=2, ensure_ascii=False)

    def write_text(self, path: Path) -> None:
        """
        Write report as human-readable text.

        Args:
            path: Output file path
        """
        summary = self.get_summary()
        with open(path, "w", encoding="utf-8") as f:
            f.write(f"{self.title}\n")
            f.write("=" * 50 + "\n\n")

            if summary["results"]:
                f.write("Results:\n")
                for key, value in summary["results"].items():
                    if isinstance(value, str) and "\n" in value:
                        f.write(f"  {key}:\n")
                        for line in value.rstrip("\n").split("\n"):
                            f.write(f"    {line}\n")
                    else:
                        f.write(f"  {key}: {value}\n")
                f.write("\n")

            f.write("Counters:\n")
            if summary["counters"]:
                for category, count in sorted(summary["counters"].items()):
                    f.write(f"  - {category}: {count}\n")
            else:
                f.write("  (No events recorded)\n")

            if summary["warnings"]:
                f.write("\nWarnings:\n")
                for message in summary["warnings"]:
                    f.write(f"  - {message}\n")

            if summary["notes"]:
                f.write("\nNotes:\n")
                for entry in summary["notes"]:
                    f.write(f"  - {entry['description']}\n")
