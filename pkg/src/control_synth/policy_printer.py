"""Canonical text form of policy programs.

``parse(pretty_print(p))`` is structurally equal to ``p`` for every program
the parser accepts.
"""

from typing import List, Optional

from .errors import PolicySyntaxError
from .policy_ast import (
    Assign,
    BinOp,
    BoolOp,
    Call,
    Compare,
    Expr,
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
)

INDENT = "    "

# binding strength, loosest first
_PREC_IFEXP = 0
_PREC_OR = 1
_PREC_AND = 2
_PREC_NOT = 3
_PREC_COMPARE = 4
_PREC_ADD = 5
_PREC_MUL = 6
_PREC_UNARY = 7
_PREC_ATOM = 8

_BINARY_PREC = {"+": _PREC_ADD, "-": _PREC_ADD, "*": _PREC_MUL, "/": _PREC_MUL}


def pretty_print(
    program: PolicyProgram, header: bool = True, name: Optional[str] = None
) -> str:
    """
    Render a program as canonical policy source.

    Args:
        program: Parsed policy
        header: When False only the (unindented) body is printed
        name: Function name to print instead of the program's own

    Returns:
        Source text ending with a newline

    Raises:
        PolicySyntaxError: The tree nests too deeply to print
    """
    fn = program.ast
    lines: List[str] = []
    try:
        if header:
            returns = "float" if program.action_dim == 1 else "np.ndarray"
            lines.append(f"def {name or fn.name}({fn.param}: np.ndarray) -> {returns}:")
            if fn.docstring:
                lines.extend(_docstring(fn.docstring, INDENT))
            _block(fn.body, fn.param, 1, lines)
        else:
            _block(fn.body, fn.param, 0, lines)
    except RecursionError:
        raise PolicySyntaxError("program nests too deeply to print") from None
    return "\n".join(lines) + "\n"


def _docstring(text: str, indent: str) -> List[str]:
    if '"""' in text or "\\" in text or text.endswith('"'):
        return [indent + repr(text)]
    parts = text.split("\n")
    if len(parts) == 1:
        return [f'{indent}"""{text}"""']
    lines = [f'{indent}"""{parts[0]}']
    lines.extend((indent + p) if p.strip() else "" for p in parts[1:])
    lines.append(f'{indent}"""')
    return lines


def _block(body: tuple, param: str, depth: int, lines: List[str]) -> None:
    if not body:
        lines.append(INDENT * depth + "pass")
        return
    for stmt in body:
        _stmt(stmt, param, depth, lines)


def _stmt(stmt: Stmt, param: str, depth: int, lines: List[str]) -> None:
    pad = INDENT * depth
    if isinstance(stmt, Assign):
        lines.append(f"{pad}{stmt.target} = {_expr(stmt.value, param)}")
    elif isinstance(stmt, IndexAssign):
        lines.append(f"{pad}{stmt.target}[{stmt.index}] = {_expr(stmt.value, param)}")
    elif isinstance(stmt, Return):
        lines.append(f"{pad}return {_expr(stmt.value, param)}")
    elif isinstance(stmt, If):
        keyword = "if"
        current: If = stmt
        while True:
            lines.append(f"{pad}{keyword} {_expr(current.test, param)}:")
            _block(current.body, param, depth + 1, lines)
            orelse = current.orelse
            if len(orelse) == 1 and isinstance(orelse[0], If):
                keyword, current = "elif", orelse[0]
                continue
            if orelse:
                lines.append(f"{pad}else:")
                _block(orelse, param, depth + 1, lines)
            break
    else:
        raise TypeError(f"unknown statement {type(stmt).__name__}")


def _prec(expr: Expr) -> int:
    if isinstance(expr, IfExp):
        return _PREC_IFEXP
    if isinstance(expr, BoolOp):
        return _PREC_OR if expr.op == "or" else _PREC_AND
    if isinstance(expr, UnaryOp):
        return _PREC_NOT if expr.op == "not" else _PREC_UNARY
    if isinstance(expr, Compare):
        return _PREC_COMPARE
    if isinstance(expr, BinOp):
        return _BINARY_PREC[expr.op]
    if isinstance(expr, Num) and (expr.value < 0 or str(expr.value).startswith("-")):
        return _PREC_UNARY
    return _PREC_ATOM


def _wrap(expr: Expr, param: str, parens: bool) -> str:
    text = _expr(expr, param)
    return f"({text})" if parens else text


def _expr(expr: Expr, param: str) -> str:
    if isinstance(expr, Num):
        return repr(expr.value)
    if isinstance(expr, Name):
        return expr.id
    if isinstance(expr, ObsIndex):
        return f"{param}[{expr.index}]"
    if isinstance(expr, VarIndex):
        return f"{expr.name}[{expr.index}]"
    if isinstance(expr, Vector):
        return "[" + ", ".join(_expr(e, param) for e in expr.elements) + "]"
    if isinstance(expr, Call):
        return f"{expr.func}(" + ", ".join(_expr(a, param) for a in expr.args) + ")"
    if isinstance(expr, UnaryOp):
        own = _prec(expr)
        operand = expr.operand
        # ``-(-1.0)`` keeps the literal from merging into ``--1.0``
        parens = _prec(operand) < own or (expr.op == "-" and _prec(operand) == _PREC_UNARY)
        space = " " if expr.op == "not" else ""
        return f"{expr.op}{space}{_wrap(operand, param, parens)}"
    if isinstance(expr, BinOp):
        own = _prec(expr)
        left = _wrap(expr.left, param, _prec(expr.left) < own)
        right = _wrap(expr.right, param, _prec(expr.right) <= own)
        return f"{left} {expr.op} {right}"
    if isinstance(expr, BoolOp):
        own = _prec(expr)
        joined = f" {expr.op} ".join(_wrap(v, param, _prec(v) <= own) for v in expr.values)
        return joined
    if isinstance(expr, Compare):
        parts = [_wrap(expr.left, param, _prec(expr.left) <= _PREC_COMPARE)]
        for op, comparator in zip(expr.ops, expr.comparators):
            parts.append(op)
            parts.append(_wrap(comparator, param, _prec(comparator) <= _PREC_COMPARE))
        return " ".join(parts)
    if isinstance(expr, IfExp):
        body = _wrap(expr.body, param, _prec(expr.body) <= _PREC_IFEXP)
        test = _wrap(expr.test, param, _prec(expr.test) <= _PREC_IFEXP)
        orelse = _expr(expr.orelse, param)
        return f"{body} if {test} else {orelse}"
    raise TypeError(f"unknown expression {type(expr).__name__}")
