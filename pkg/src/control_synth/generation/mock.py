"""Deterministic mutation generator.

Candidates are produced by seeded edits on the higher-scoring parent, with
grafts taken from the lower-scoring one. Every candidate is printed from a
tree and re-parsed, so the output always lies inside the policy grammar.
"""

import logging
from typing import Any, Callable, Dict, List, Optional, Set

import numpy as np

from ..errors import PolicySyntaxError
from ..models import CandidateBatch, program_id_for
from ..policy_ast import (
    BinOp,
    Call,
    Compare,
    Expr,
    FunctionDef,
    Name,
    Num,
    ObsIndex,
    PolicyProgram,
    VarIndex,
    assigned_names,
    count_nodes,
    expr_kind,
    expressions,
    replace_expression,
    vector_names,
    walk,
)
from ..policy_parser import parse
from ..policy_printer import pretty_print

logger = logging.getLogger(__name__)

GENERATOR_ID = "mock"

PERTURB_FACTORS = (0.5, 0.9, 1.1, 2.0)
PERTURB_OFFSETS = (-1.0, -0.1, 0.1, 1.0)
NUDGE_FACTORS = (0.8, 0.9, 1.1, 1.25)
NUDGE_OFFSETS = (-0.1, 0.1)
TERM_GAINS = (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0)
WRAPPERS = ("sign", "tanh")
FLIPS = {"<": ">=", "<=": ">", ">": "<=", ">=": "<", "==": "!=", "!=": "=="}

MAX_EDITS = 3
GROWTH_LIMIT = 200  # nodes; larger programs only get non-growing edits

Edit = Callable[["_Mutation"], Optional[FunctionDef]]


class _Mutation:
    """One candidate under construction."""

    def __init__(self, fn: FunctionDef, donor: FunctionDef, obs_dim: int, rng: np.random.Generator):
        self.fn = fn
        self.donor = donor
        self.obs_dim = obs_dim
        self.rng = rng

    def pick(self, items: List[Any]) -> Any:
        return items[int(self.rng.integers(len(items)))]

    def scalar_positions(self) -> List[int]:
        vectors = vector_names(self.fn)
        return [
            i for i, e in enumerate(expressions(self.fn)) if expr_kind(e, vectors) == "scalar"
        ]

    def replace(self, position: int, new: Expr) -> FunctionDef:
        return replace_expression(self.fn, position, new)


def _perturb_literal(m: _Mutation) -> Optional[FunctionDef]:
    exprs = expressions(m.fn)
    positions = [i for i, e in enumerate(exprs) if isinstance(e, Num)]
    if not positions:
        return None
    position = m.pick(positions)
    node = exprs[position]
    assert isinstance(node, Num)
    value = node.value
    if m.rng.integers(2) == 0:
        value *= m.pick(list(PERTURB_FACTORS))
    else:
        value += m.pick(list(PERTURB_OFFSETS))
    return m.replace(position, Num(value))


def _flip_comparison(m: _Mutation) -> Optional[FunctionDef]:
    exprs = expressions(m.fn)
    positions = [i for i, e in enumerate(exprs) if isinstance(e, Compare)]
    if not positions:
        return None
    position = m.pick(positions)
    node = exprs[position]
    assert isinstance(node, Compare)
    index = int(m.rng.integers(len(node.ops)))
    ops = list(node.ops)
    ops[index] = FLIPS[ops[index]]
    return m.replace(position, Compare(node.left, tuple(ops), node.comparators))


def _nudge_threshold(m: _Mutation) -> Optional[FunctionDef]:
    exprs = expressions(m.fn)
    thresholds: Set[int] = set()
    for e in exprs:
        if isinstance(e, Compare):
            thresholds.update(id(x) for x in (e.left, *e.comparators) if isinstance(x, Num))
    positions = [i for i, e in enumerate(exprs) if id(e) in thresholds]
    if not positions:
        return None
    position = m.pick(positions)
    node = exprs[position]
    assert isinstance(node, Num)
    value = node.value
    if value == 0.0:
        value += m.pick(list(NUDGE_OFFSETS))
    else:
        value *= m.pick(list(NUDGE_FACTORS))
    return m.replace(position, Num(value))


def _graft_from_donor(m: _Mutation) -> Optional[FunctionDef]:
    scalars = set(assigned_names(m.fn)) - vector_names(m.fn)
    vectors = vector_names(m.fn)
    donor_vectors = vector_names(m.donor)

    def compatible(e: Expr) -> bool:
        if expr_kind(e, donor_vectors) != "scalar":
            return False
        for node in walk(e):
            if isinstance(node, Name) and node.id not in scalars:
                return False
            if isinstance(node, VarIndex) and node.name not in vectors:
                return False
        return True

    donors = [e for e in expressions(m.donor) if compatible(e)]
    targets = m.scalar_positions()
    if not donors or not targets:
        return None
    return m.replace(m.pick(targets), m.pick(donors))


def _wrap_clip(m: _Mutation) -> Optional[FunctionDef]:
    targets = m.scalar_positions()
    if not targets:
        return None
    position = m.pick(targets)
    target = expressions(m.fn)[position]
    return m.replace(position, Call("clip", (target, Num(-1.0), Num(1.0))))


def _insert_term(m: _Mutation) -> Optional[FunctionDef]:
    targets = m.scalar_positions()
    if not targets:
        return None
    position = m.pick(targets)
    target = expressions(m.fn)[position]
    gain = m.pick(list(TERM_GAINS))
    index = int(m.rng.integers(m.obs_dim))
    return m.replace(position, BinOp(target, "+", BinOp(Num(gain), "*", ObsIndex(index))))


def _wrap_intrinsic(m: _Mutation) -> Optional[FunctionDef]:
    targets = m.scalar_positions()
    if not targets:
        return None
    position = m.pick(targets)
    target = expressions(m.fn)[position]
    return m.replace(position, Call(m.pick(list(WRAPPERS)), (target,)))


NON_GROWING: Dict[str, Edit] = {
    "perturb_literal": _perturb_literal,
    "flip_comparison": _flip_comparison,
    "nudge_threshold": _nudge_threshold,
}
GROWING: Dict[str, Edit] = {
    "graft": _graft_from_donor,
    "wrap_clip": _wrap_clip,
    "insert_term": _insert_term,
    "wrap_intrinsic": _wrap_intrinsic,
}


def mutate(
    high: PolicyProgram, low: PolicyProgram, rng: np.random.Generator
) -> PolicyProgram:
    """Apply one to three seeded edits to a copy of ``high``."""
    fn = high.ast
    for _ in range(int(rng.integers(1, MAX_EDITS + 1))):
        edits = dict(NON_GROWING)
        if count_nodes(fn) <= GROWTH_LIMIT:
            edits.update(GROWING)
        names = list(edits)
        # untried edits in random order until one applies
        for k in rng.permutation(len(names)):
            result = edits[names[int(k)]](_Mutation(fn, low.ast, high.obs_dim, rng))
            if result is not None:
                fn = result
                break
    return PolicyProgram(ast=fn, obs_dim=high.obs_dim, action_dim=high.action_dim)


def generate_mock(
    low: PolicyProgram, high: PolicyProgram, seed: int, n: int
) -> CandidateBatch:
    """
    Produce ``n`` candidate sources by seeded edits.

    Args:
        low: Lower-scoring parent (graft donor)
        high: Higher-scoring parent (edited copy)
        seed: Stream seed; the same seed and parents give the same batch
        n: Number of candidates

    Returns:
        CandidateBatch of canonical program texts. An edit whose tree cannot
        be printed is counted in ``extraction_failures``; printed text that
        does not parse back is kept and rejected downstream.
    """
    rng = np.random.default_rng(seed)
    sources: List[str] = []
    unprintable = 0
    for _ in range(max(n, 0)):
        candidate = mutate(high, low, rng)
        try:
            text = pretty_print(candidate, name="policy")
        except PolicySyntaxError as e:
            logger.warning("Mock edit could not be printed: %s", e)
            unprintable += 1
            continue
        try:
            parse(text, high.obs_dim, high.action_dim)
        except PolicySyntaxError as e:
            logger.warning("Mock edit does not parse back: %s", e)
        sources.append(text)
    return CandidateBatch(
        sources=tuple(sources),
        prompt_lineage=(program_id_for(low), program_id_for(high)),
        generator_id=GENERATOR_ID,
        extraction_failures=unprintable,
    )

