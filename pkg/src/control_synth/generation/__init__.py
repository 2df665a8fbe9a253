"""Candidate generators and prompt handling."""

from .mock import generate_mock
from .prompts import build_prompt, extract_policy
from .remote import CompletionClient, generate_remote

__all__ = ["build_prompt", "extract_policy", "generate_mock", "generate_remote", "CompletionClient"]
