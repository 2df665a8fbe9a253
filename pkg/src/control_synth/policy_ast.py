"""Node types for policy programs.

Nodes are frozen dataclasses, so two trees compare equal exactly when they
are structurally equal. Sequences are stored as tuples.
"""

import itertools
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Dict, Iterator, List, Optional, Set, Tuple, Union

# name -> (min arity, max arity); None means variadic
INTRINSICS: Dict[str, Tuple[int, Optional[int]]] = {
    "abs": (1, 1),
    "sign": (1, 1),
    "sin": (1, 1),
    "cos": (1, 1),
    "tan": (1, 1),
    "atan2": (2, 2),
    "sqrt": (1, 1),
    "exp": (1, 1),
    "tanh": (1, 1),
    "min": (2, None),
    "max": (2, None),
    "clip": (3, 3),
    "floor": (1, 1),
}

BINARY_OPS = ("+", "-", "*", "/")
COMPARE_OPS = ("<", "<=", ">", ">=", "==", "!=")
BOOL_OPS = ("and", "or")
UNARY_OPS = ("-", "not")


@dataclass(frozen=True)
class Node:
    """Base class for every policy program node."""


@dataclass(frozen=True)
class Expr(Node):
    """Base class for expressions."""


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Name(Expr):
    id: str


@dataclass(frozen=True)
class ObsIndex(Expr):
    """``obs[index]``; the index is checked against obs_dim at parse time."""

    index: int


@dataclass(frozen=True)
class VarIndex(Expr):
    """``name[index]`` on a local vector."""

    name: str
    index: int


@dataclass(frozen=True)
class Vector(Expr):
    elements: Tuple[Expr, ...]


@dataclass(frozen=True)
class UnaryOp(Expr):
    op: str
    operand: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    left: Expr
    op: str
    right: Expr


@dataclass(frozen=True)
class BoolOp(Expr):
    op: str
    values: Tuple[Expr, ...]


@dataclass(frozen=True)
class Compare(Expr):
    left: Expr
    ops: Tuple[str, ...]
    comparators: Tuple[Expr, ...]


@dataclass(frozen=True)
class Call(Expr):
    func: str
    args: Tuple[Expr, ...]


@dataclass(frozen=True)
class IfExp(Expr):
    test: Expr
    body: Expr
    orelse: Expr


@dataclass(frozen=True)
class Stmt(Node):
    """Base class for statements."""


@dataclass(frozen=True)
class Assign(Stmt):
    target: str
    value: Expr


@dataclass(frozen=True)
class IndexAssign(Stmt):
    target: str
    index: int
    value: Expr


@dataclass(frozen=True)
class If(Stmt):
    test: Expr
    body: Tuple[Stmt, ...]
    orelse: Tuple[Stmt, ...] = ()


@dataclass(frozen=True)
class Return(Stmt):
    value: Expr


@dataclass(frozen=True)
class FunctionDef(Node):
    name: str
    param: str
    body: Tuple[Stmt, ...]
    docstring: Optional[str] = None


@dataclass(frozen=True)
class PolicyProgram:
    """A parsed candidate policy.

    Equality is structural: two programs are equal when their trees and
    dimensions match, whatever their original source text looked like.
    """

    ast: FunctionDef
    obs_dim: int
    action_dim: int
    source: str = field(default="", compare=False)

    @property
    def name(self) -> str:
        return self.ast.name


NodeOrTuple = Union[Node, Tuple]


def walk(node: NodeOrTuple) -> Iterator[Node]:
    """Yield every node below (and including) ``node`` in pre-order."""
    if isinstance(node, tuple):
        for item in node:
            yield from walk(item)
        return
    if not isinstance(node, Node):
        return
    yield node
    for f in fields(node):
        value = getattr(node, f.name)
        if isinstance(value, (Node, tuple)):
            yield from walk(value)


def count_nodes(node: NodeOrTuple) -> int:
    return sum(1 for _ in walk(node))


def assigned_names(fn: FunctionDef) -> Set[str]:
    """Names bound by plain assignment anywhere in the function."""
    return {n.target for n in walk(fn.body) if isinstance(n, Assign)}


def vector_names(fn: FunctionDef) -> Set[str]:
    """Names that are ever bound to a vector value."""
    names: Set[str] = set()
    changed = True
    # fixed point: ``b = a`` makes b a vector when a is one
    while changed:
        changed = False
        for n in walk(fn.body):
            if isinstance(n, Assign) and n.target not in names:
                if expr_kind(n.value, names) == "vector":
                    names.add(n.target)
                    changed = True
    names.update(n.target for n in walk(fn.body) if isinstance(n, IndexAssign))
    return names


def expr_kind(expr: Expr, vectors: Set[str]) -> str:
    """Static value kind of an expression: ``"scalar"`` or ``"vector"``."""
    if isinstance(expr, Vector):
        return "vector"
    if isinstance(expr, Name):
        return "vector" if expr.id in vectors else "scalar"
    if isinstance(expr, IfExp):
        kinds = {expr_kind(expr.body, vectors), expr_kind(expr.orelse, vectors)}
        return "vector" if "vector" in kinds else "scalar"
    return "scalar"


def rewrite_expressions(
    node: NodeOrTuple, fn: Callable[[Expr, int], Optional[Expr]]
) -> NodeOrTuple:
    """Rebuild ``node`` calling ``fn(expr, position)`` on every expression.

    Positions count expressions in pre-order. When ``fn`` returns a node, it
    replaces the expression and its children are not visited.
    """
    counter = itertools.count()

    def rebuild(item: NodeOrTuple) -> NodeOrTuple:
        if isinstance(item, tuple):
            return tuple(rebuild(x) for x in item)
        if not isinstance(item, Node):
            return item
        if isinstance(item, Expr):
            new = fn(item, next(counter))
            if new is not None:
                return new
        changes = {}
        for f in fields(item):
            value = getattr(item, f.name)
            if isinstance(value, (Node, tuple)):
                changes[f.name] = rebuild(value)
        return replace(item, **changes) if changes else item

    return rebuild(node)


def expressions(node: NodeOrTuple) -> List[Expr]:
    """All expressions below ``node``, indexed like ``rewrite_expressions`` positions."""
    found: List[Expr] = []

    def collect(expr: Expr, _position: int) -> None:
        found.append(expr)
        return None

    rewrite_expressions(node, collect)
    return found


def replace_expression(fn: FunctionDef, position: int, new: Expr) -> FunctionDef:
    """Return a copy of ``fn`` with the expression at ``position`` replaced."""

    def swap(expr: Expr, pos: int) -> Optional[Expr]:
        return new if pos == position else None

    result = rewrite_expressions(fn, swap)
    assert isinstance(result, FunctionDef)
    return result
