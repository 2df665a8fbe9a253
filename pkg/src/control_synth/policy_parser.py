"""Parser for the policy language.

The surface syntax is the indentation-structured Python subset used by
evolved control policies: one function of the observation, built from
assignments, if/elif/else and return statements over numeric expressions.
Python's own tokenizer and parser read the text; this module then checks
the tree against the policy grammar and converts it into ``policy_ast``
nodes.
"""

import ast
import inspect
import math
import re
import textwrap
from typing import Dict, List, Optional, Set, Tuple

from .errors import PolicySyntaxError
from .policy_ast import (
    INTRINSICS,
    Assign,
    BinOp,
    BoolOp,
    Call,
    Compare,
    Expr,
    FunctionDef,
    If,
    IfExp,
    IndexAssign,
    Name,
    Num,
    ObsIndex,
    PolicyProgram,
    Return,
    Stmt,
    UnaryOp,
    VarIndex,
    Vector,
    walk,
)

# module prefixes under which intrinsics may be spelled
MODULE_PREFIXES = ("np", "numpy", "math")

ALIASES: Dict[str, str] = {
    "arctan2": "atan2",
    "absolute": "abs",
    "minimum": "min",
    "maximum": "max",
    "fmin": "min",
    "fmax": "max",
}

CONSTANTS: Dict[str, float] = {"pi": math.pi, "e": math.e}

_BINARY = {ast.Add: "+", ast.Sub: "-", ast.Mult: "*", ast.Div: "/"}
_COMPARE = {
    ast.Lt: "<",
    ast.LtE: "<=",
    ast.Gt: ">",
    ast.GtE: ">=",
    ast.Eq: "==",
    ast.NotEq: "!=",
}
_DEF_PATTERN = re.compile(r"^\s*def\s", re.MULTILINE)

WRAPPER_HEADER = "def policy(obs):\n"

# syntax tree depth limit
MAX_NESTING = 200


def parse(source: str, obs_dim: int, action_dim: int) -> PolicyProgram:
    """
    Parse policy source text into a validated program.

    Args:
        source: A complete ``def`` or a bare function body
        obs_dim: Length of the observation vector
        action_dim: Number of action components the policy must return

    Returns:
        PolicyProgram satisfying every grammar invariant

    Raises:
        PolicySyntaxError: With the offending line and column
    """
    if not source or not source.strip():
        raise PolicySyntaxError("empty program", 1, 1)

    text = textwrap.dedent(source.expandtabs(4))
    line_offset = 0
    if not _DEF_PATTERN.search(text):
        text = WRAPPER_HEADER + textwrap.indent(text, "    ")
        line_offset = 1

    try:
        module = ast.parse(text)
    except SyntaxError as e:
        line = max((e.lineno or 1) - line_offset, 1)
        column = e.offset or 1
        if line_offset and column > 4:
            column -= 4
        raise PolicySyntaxError(e.msg, line, column) from e
    except (ValueError, RecursionError, MemoryError) as e:
        # null bytes, or input too deep for the Python parser itself
        raise PolicySyntaxError(f"unreadable source: {e}", 1, 1) from e

    converter = _Converter(obs_dim, action_dim, line_offset)
    too_deep = _first_too_deep(module, MAX_NESTING)
    if too_deep is not None:
        raise converter.error(too_deep, f"program nests deeper than {MAX_NESTING} levels")
    try:
        fn = converter.convert_module(module)
    except RecursionError as e:
        raise PolicySyntaxError("program nests too deeply", 1, 1) from e
    return PolicyProgram(ast=fn, obs_dim=obs_dim, action_dim=action_dim, source=source)


class _Converter:
    """Checks a Python tree against the policy grammar and converts it."""

    def __init__(self, obs_dim: int, action_dim: int, line_offset: int):
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.line_offset = line_offset
        self.param = "obs"
        self.assigned: Set[str] = set()

    def error(self, node: ast.AST, message: str) -> PolicySyntaxError:
        line = getattr(node, "lineno", 1) - self.line_offset
        column = getattr(node, "col_offset", 0) + 1
        if self.line_offset and column > 4:
            column -= 4
        return PolicySyntaxError(message, max(line, 1), column)

    # -- structure ---------------------------------------------------------

    def convert_module(self, module: ast.Module) -> FunctionDef:
        functions = []
        for node in module.body:
            if isinstance(node, ast.FunctionDef):
                functions.append(node)
            elif isinstance(node, ast.Expr) and isinstance(node.value, ast.Constant):
                continue  # module docstring
            elif isinstance(node, (ast.Import, ast.ImportFrom)):
                raise self.error(node, "disallowed construct: import")
            else:
                raise self.error(
                    node, f"disallowed construct: {_describe(node)} outside the policy"
                )
        if len(functions) != 1:
            where = functions[1] if len(functions) > 1 else module
            raise self.error(where, "exactly one policy function expected")
        return self.convert_function(functions[0])

    def convert_function(self, node: ast.FunctionDef) -> FunctionDef:
        if node.decorator_list:
            raise self.error(node, "disallowed construct: decorator")
        args = node.args
        if (
            len(args.args) != 1
            or args.posonlyargs
            or args.kwonlyargs
            or args.vararg
            or args.kwarg
            or args.defaults
        ):
            raise self.error(node, "the policy takes exactly one parameter (the observation)")
        self.param = args.args[0].arg
        self.assigned = _collect_assigned(node)

        body = list(node.body)
        docstring: Optional[str] = None
        if body and isinstance(body[0], ast.Expr) and isinstance(body[0].value, ast.Constant):
            if isinstance(body[0].value.value, str):
                docstring = inspect.cleandoc(body[0].value.value)
                body = body[1:]

        statements = self.convert_block(body)
        fn = FunctionDef(name=node.name, param=self.param, body=statements, docstring=docstring)
        if not any(isinstance(n, Return) for n in walk(fn.body)):
            raise self.error(node, "the policy has no return statement")
        for n in walk(fn.body):
            if isinstance(n, IndexAssign) and n.target not in self.assigned:
                raise self.error(node, f"unknown identifier '{n.target}'")
        return fn

    def convert_block(self, nodes: List[ast.stmt]) -> Tuple[Stmt, ...]:
        statements: List[Stmt] = []
        for node in nodes:
            converted = self.convert_stmt(node)
            if converted is not None:
                statements.append(converted)
        return tuple(statements)

    def convert_stmt(self, node: ast.stmt) -> Optional[Stmt]:
        if isinstance(node, ast.Assign):
            if len(node.targets) != 1:
                raise self.error(node, "disallowed construct: chained assignment")
            return self._assign(node, node.targets[0], self.convert_expr(node.value))
        if isinstance(node, ast.AnnAssign):
            if node.value is None:
                raise self.error(node, "annotated name needs a value")
            return self._assign(node, node.target, self.convert_expr(node.value))
        if isinstance(node, ast.AugAssign):
            op = _BINARY.get(type(node.op))
            if op is None:
                raise self.error(node, f"disallowed operator {type(node.op).__name__}")
            current = self.convert_expr(node.target)
            value = BinOp(current, op, self.convert_expr(node.value))
            return self._assign(node, node.target, value)
        if isinstance(node, ast.If):
            return If(
                test=self.convert_expr(node.test),
                body=self.convert_block(node.body),
                orelse=self.convert_block(node.orelse),
            )
        if isinstance(node, ast.Return):
            if node.value is None:
                raise self.error(node, "return needs a value")
            value = self.convert_expr(node.value)
            if isinstance(value, Vector) and len(value.elements) != self.action_dim:
                raise self.error(
                    node,
                    f"policy returns {len(value.elements)} values, expected {self.action_dim}",
                )
            return Return(value)
        if isinstance(node, ast.Pass):
            return None
        if isinstance(node, ast.Expr) and isinstance(node.value, ast.Constant):
            if isinstance(node.value.value, str):
                return None
        raise self.error(node, f"disallowed construct: {_describe(node)}")

    def _assign(self, node: ast.stmt, target: ast.expr, value: Expr) -> Stmt:
        if isinstance(target, ast.Name):
            if target.id == self.param:
                raise self.error(target, "the observation cannot be reassigned")
            return Assign(target.id, value)
        if isinstance(target, ast.Subscript) and isinstance(target.value, ast.Name):
            name = target.value.id
            if name == self.param:
                raise self.error(target, "the observation cannot be modified")
            index = self._literal_index(target)
            return IndexAssign(name, index, value)
        raise self.error(node, "disallowed construct: assignment target")

    # -- expressions -------------------------------------------------------

    def convert_expr(self, node: ast.expr) -> Expr:
        method = getattr(self, f"_expr_{type(node).__name__}", None)
        if method is None:
            raise self.error(node, f"disallowed construct: {_describe(node)}")
        return method(node)

    def _expr_Constant(self, node: ast.Constant) -> Expr:
        value = node.value
        if isinstance(value, bool):
            return Num(1.0 if value else 0.0)
        if isinstance(value, (int, float)) and math.isfinite(value):
            return Num(float(value))
        raise self.error(node, f"unsupported literal {value!r}")

    def _expr_Name(self, node: ast.Name) -> Expr:
        if node.id == self.param:
            raise self.error(node, "the observation must be indexed with an integer literal")
        if node.id not in self.assigned:
            raise self.error(node, f"unknown identifier '{node.id}'")
        return Name(node.id)

    def _expr_Subscript(self, node: ast.Subscript) -> Expr:
        if not isinstance(node.value, ast.Name):
            raise self.error(node, "disallowed construct: subscript")
        name = node.value.id
        index = self._literal_index(node)
        if name == self.param:
            if not 0 <= index < self.obs_dim:
                raise self.error(
                    node, f"observation index {index} out of range [0, {self.obs_dim})"
                )
            return ObsIndex(index)
        if name not in self.assigned:
            raise self.error(node, f"unknown identifier '{name}'")
        return VarIndex(name, index)

    def _literal_index(self, node: ast.Subscript) -> int:
        index = node.slice
        if isinstance(index, ast.Slice):
            raise self.error(node, "disallowed construct: slice")
        negative = False
        if isinstance(index, ast.UnaryOp) and isinstance(index.op, ast.USub):
            negative, index = True, index.operand
        if not (
            isinstance(index, ast.Constant)
            and isinstance(index.value, int)
            and not isinstance(index.value, bool)
        ):
            raise self.error(node, "index must be an integer literal")
        value = -index.value if negative else index.value
        if value < 0:
            limit = f"[0, {self.obs_dim})" if _subject(node) == self.param else ">= 0"
            raise self.error(node, f"index {value} out of range {limit}")
        return value

    def _expr_UnaryOp(self, node: ast.UnaryOp) -> Expr:
        if isinstance(node.op, ast.UAdd):
            return self.convert_expr(node.operand)
        operand = self.convert_expr(node.operand)
        if isinstance(node.op, ast.USub):
            if isinstance(operand, Num):
                return Num(-operand.value)
            return UnaryOp("-", operand)
        if isinstance(node.op, ast.Not):
            return UnaryOp("not", operand)
        raise self.error(node, f"disallowed operator {type(node.op).__name__}")

    def _expr_BinOp(self, node: ast.BinOp) -> Expr:
        op = _BINARY.get(type(node.op))
        if op is None:
            raise self.error(node, f"disallowed operator {type(node.op).__name__}")
        return BinOp(self.convert_expr(node.left), op, self.convert_expr(node.right))

    def _expr_BoolOp(self, node: ast.BoolOp) -> Expr:
        op = "and" if isinstance(node.op, ast.And) else "or"
        return BoolOp(op, tuple(self.convert_expr(v) for v in node.values))

    def _expr_Compare(self, node: ast.Compare) -> Expr:
        ops = []
        for op in node.ops:
            symbol = _COMPARE.get(type(op))
            if symbol is None:
                raise self.error(node, f"disallowed comparison {type(op).__name__}")
            ops.append(symbol)
        return Compare(
            self.convert_expr(node.left),
            tuple(ops),
            tuple(self.convert_expr(c) for c in node.comparators),
        )

    def _expr_IfExp(self, node: ast.IfExp) -> Expr:
        return IfExp(
            self.convert_expr(node.test),
            self.convert_expr(node.body),
            self.convert_expr(node.orelse),
        )

    def _expr_List(self, node: ast.List) -> Expr:
        if not node.elts:
            raise self.error(node, "vector literal cannot be empty")
        return Vector(tuple(self.convert_expr(e) for e in node.elts))

    def _expr_Attribute(self, node: ast.Attribute) -> Expr:
        if (
            isinstance(node.value, ast.Name)
            and node.value.id in MODULE_PREFIXES
            and node.attr in CONSTANTS
        ):
            return Num(CONSTANTS[node.attr])
        raise self.error(node, f"unknown name '{ast.unparse(node)}'")

    def _expr_Call(self, node: ast.Call) -> Expr:
        if node.keywords:
            raise self.error(node, "keyword arguments are not allowed")
        func = _function_name(node.func)
        if func is None:
            raise self.error(node, f"unknown function '{ast.unparse(node.func)}'")
        if func == "zeros":
            return self._zeros(node)
        if func == "array":
            if len(node.args) != 1 or not isinstance(node.args[0], ast.List):
                raise self.error(node, "array() takes one list literal")
            return self._expr_List(node.args[0])
        canonical = ALIASES.get(func, func)
        if canonical not in INTRINSICS:
            raise self.error(node, f"unknown function '{func}'")
        low, high = INTRINSICS[canonical]
        count = len(node.args)
        if count < low or (high is not None and count > high):
            expected = f"{low}" if low == high else f"at least {low}"
            raise self.error(node, f"{canonical}() takes {expected} argument(s), got {count}")
        return Call(canonical, tuple(self.convert_expr(a) for a in node.args))

    def _zeros(self, node: ast.Call) -> Expr:
        if len(node.args) != 1:
            raise self.error(node, "zeros() takes one size argument")
        size = node.args[0]
        if isinstance(size, ast.Tuple) and len(size.elts) == 1:
            size = size.elts[0]
        if not (isinstance(size, ast.Constant) and isinstance(size.value, int)) or size.value < 1:
            raise self.error(node, "zeros() size must be a positive integer literal")
        return Vector(tuple(Num(0.0) for _ in range(size.value)))


def _function_name(func: ast.expr) -> Optional[str]:
    if isinstance(func, ast.Name):
        return func.id
    if (
        isinstance(func, ast.Attribute)
        and isinstance(func.value, ast.Name)
        and func.value.id in MODULE_PREFIXES
    ):
        return func.attr
    return None


def _subject(node: ast.Subscript) -> str:
    return node.value.id if isinstance(node.value, ast.Name) else ""


def _collect_assigned(fn: ast.FunctionDef) -> Set[str]:
    names: Set[str] = set()
    for node in ast.walk(fn):
        if isinstance(node, ast.Assign):
            targets = node.targets
        elif isinstance(node, (ast.AnnAssign, ast.AugAssign)):
            targets = [node.target]
        else:
            continue
        names.update(t.id for t in targets if isinstance(t, ast.Name))
    return names


def _first_too_deep(tree: ast.AST, limit: int) -> Optional[ast.AST]:
    """First positioned node found below ``limit`` levels, or None."""
    stack: List[Tuple[ast.AST, int, ast.AST]] = [(tree, 1, tree)]
    while stack:
        node, depth, located = stack.pop()
        if hasattr(node, "lineno"):
            located = node
        if depth > limit:
            return located
        for child in ast.iter_child_nodes(node):
            stack.append((child, depth + 1, located))
    return None


def _describe(node: ast.AST) -> str:
    labels = {
        "For": "loop",
        "AsyncFor": "loop",
        "While": "loop",
        "FunctionDef": "nested function",
        "AsyncFunctionDef": "nested function",
        "Lambda": "lambda",
        "ClassDef": "class",
        "Import": "import",
        "ImportFrom": "import",
        "ListComp": "comprehension",
        "GeneratorExp": "comprehension",
        "DictComp": "comprehension",
        "SetComp": "comprehension",
    }
    name = type(node).__name__
    return labels.get(name, name.lower())
