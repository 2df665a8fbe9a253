"""Resource-limited interpreter for policy programs.

Every node evaluation counts against an operation budget and every produced
number passes a magnitude guard, so a valid program always halts with a
finite action in [-1, 1] or raises a ``PolicyRuntimeError``.
"""

import math
from dataclasses import dataclass
from typing import Callable, Dict, Sequence, Tuple, Union

from .errors import BudgetExceededError, NonFiniteError, PolicyRuntimeError
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

Value = Union[float, Tuple[float, ...]]
Action = Tuple[float, ...]


@dataclass(frozen=True)
class SandboxLimits:
    """Per-call resource limits for the interpreter."""

    max_ops_per_call: int = 10_000
    max_abs_value: float = 1e9

    def __post_init__(self) -> None:
        if self.max_ops_per_call <= 0:
            raise ValueError("max_ops_per_call must be positive")
        if not self.max_abs_value > 0:
            raise ValueError("max_abs_value must be positive")


DEFAULT_LIMITS = SandboxLimits()


def _sign(x: float) -> float:
    if x > 0:
        return 1.0
    if x < 0:
        return -1.0
    return 0.0


def _clip(x: float, low: float, high: float) -> float:
    return min(max(x, low), high)


_SCALAR_FUNCS: Dict[str, Callable[..., float]] = {
    "abs": abs,
    "sign": _sign,
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "atan2": math.atan2,
    "sqrt": math.sqrt,
    "exp": math.exp,
    "tanh": math.tanh,
    "min": min,
    "max": max,
    "clip": _clip,
    "floor": lambda x: float(math.floor(x)),
}

_ARITHMETIC: Dict[str, Callable[[float, float], float]] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": lambda a, b: a / b,
}

_COMPARISONS: Dict[str, Callable[[float, float], bool]] = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
}


class _Returned(Exception):
    def __init__(self, value: Value):
        self.value = value


class Interpreter:
    """Tree-walking evaluator for one policy call."""

    def __init__(self, program: PolicyProgram, obs: Tuple[float, ...], limits: SandboxLimits):
        self.program = program
        self.obs = obs
        self.limits = limits
        self.ops = 0
        self.env: Dict[str, Value] = {}
        self._expr_dispatch: Dict[type, Callable[[Expr], Value]] = {
            Num: self._num,
            Name: self._name,
            ObsIndex: self._obs_index,
            VarIndex: self._var_index,
            Vector: self._vector,
            UnaryOp: self._unary,
            BinOp: self._binop,
            BoolOp: self._boolop,
            Compare: self._compare,
            Call: self._call,
            IfExp: self._ifexp,
        }

    def run(self) -> Value:
        try:
            self._block(self.program.ast.body)
        except _Returned as r:
            return r.value
        raise PolicyRuntimeError("policy finished without returning a value")

    # -- bookkeeping -------------------------------------------------------

    def _tick(self) -> None:
        self.ops += 1
        if self.ops > self.limits.max_ops_per_call:
            raise BudgetExceededError(
                f"operation budget of {self.limits.max_ops_per_call} exceeded"
            )

    def _check(self, value: float) -> float:
        if not math.isfinite(value) or abs(value) > self.limits.max_abs_value:
            raise NonFiniteError(f"value {value!r} is non-finite or too large")
        return value

    @staticmethod
    def _scalar(value: Value, what: str) -> float:
        if isinstance(value, tuple):
            raise PolicyRuntimeError(f"{what} expects a scalar, got a vector")
        return value

    # -- statements --------------------------------------------------------

    def _block(self, body: Tuple[Stmt, ...]) -> None:
        for stmt in body:
            self._tick()
            if isinstance(stmt, Assign):
                self.env[stmt.target] = self.eval(stmt.value)
            elif isinstance(stmt, IndexAssign):
                self._index_assign(stmt)
            elif isinstance(stmt, If):
                test = self._scalar(self.eval(stmt.test), "if condition")
                self._block(stmt.body if test != 0.0 else stmt.orelse)
            elif isinstance(stmt, Return):
                raise _Returned(self.eval(stmt.value))

    def _index_assign(self, stmt: IndexAssign) -> None:
        current = self.env.get(stmt.target)
        if current is None:
            raise PolicyRuntimeError(f"'{stmt.target}' used before assignment")
        if not isinstance(current, tuple):
            raise PolicyRuntimeError(f"'{stmt.target}' is not a vector")
        if stmt.index >= len(current):
            raise PolicyRuntimeError(
                f"index {stmt.index} out of range for '{stmt.target}' of size {len(current)}"
            )
        value = self._scalar(self.eval(stmt.value), "element assignment")
        items = list(current)
        items[stmt.index] = value
        self.env[stmt.target] = tuple(items)

    # -- expressions -------------------------------------------------------

    def eval(self, expr: Expr) -> Value:
        self._tick()
        return self._expr_dispatch[type(expr)](expr)

    def _num(self, expr: Num) -> Value:
        return self._check(expr.value)

    def _name(self, expr: Name) -> Value:
        try:
            return self.env[expr.id]
        except KeyError:
            raise PolicyRuntimeError(f"'{expr.id}' used before assignment") from None

    def _obs_index(self, expr: ObsIndex) -> Value:
        return self.obs[expr.index]

    def _var_index(self, expr: VarIndex) -> Value:
        current = self._name(Name(expr.name))
        if not isinstance(current, tuple):
            raise PolicyRuntimeError(f"'{expr.name}' is not a vector")
        if expr.index >= len(current):
            raise PolicyRuntimeError(
                f"index {expr.index} out of range for '{expr.name}' of size {len(current)}"
            )
        return current[expr.index]

    def _vector(self, expr: Vector) -> Value:
        return tuple(self._scalar(self.eval(e), "vector element") for e in expr.elements)

    def _unary(self, expr: UnaryOp) -> Value:
        operand = self.eval(expr.operand)
        if expr.op == "not":
            return 1.0 if self._scalar(operand, "not") == 0.0 else 0.0
        if isinstance(operand, tuple):
            return tuple(-x for x in operand)
        return -operand

    def _binop(self, expr: BinOp) -> Value:
        left = self.eval(expr.left)
        right = self.eval(expr.right)
        return self._broadcast(_ARITHMETIC[expr.op], expr.op, left, right)

    def _boolop(self, expr: BoolOp) -> Value:
        for value_expr in expr.values:
            truthy = self._scalar(self.eval(value_expr), expr.op) != 0.0
            if expr.op == "and" and not truthy:
                return 0.0
            if expr.op == "or" and truthy:
                return 1.0
        return 1.0 if expr.op == "and" else 0.0

    def _compare(self, expr: Compare) -> Value:
        left = self._scalar(self.eval(expr.left), "comparison")
        for op, comparator_expr in zip(expr.ops, expr.comparators):
            right = self._scalar(self.eval(comparator_expr), "comparison")
            if not _COMPARISONS[op](left, right):
                return 0.0
            left = right
        return 1.0

    def _ifexp(self, expr: IfExp) -> Value:
        test = self._scalar(self.eval(expr.test), "conditional expression")
        return self.eval(expr.body if test != 0.0 else expr.orelse)

    def _call(self, expr: Call) -> Value:
        args = [self.eval(a) for a in expr.args]
        return self._broadcast(_SCALAR_FUNCS[expr.func], expr.func, *args)

    def _broadcast(self, fn: Callable[..., float], label: str, *args: Value) -> Value:
        sizes = {len(a) for a in args if isinstance(a, tuple)}
        if len(sizes) > 1:
            raise PolicyRuntimeError(f"{label}: vector sizes {sorted(sizes)} do not match")
        if not sizes:
            return self._apply(fn, label, args)
        size = sizes.pop()
        columns = [a if isinstance(a, tuple) else (a,) * size for a in args]
        return tuple(self._apply(fn, label, row) for row in zip(*columns))

    def _apply(self, fn: Callable[..., float], label: str, args: Sequence[float]) -> float:
        if label == "/" and args[1] == 0.0:
            raise NonFiniteError("division by zero")
        try:
            result = fn(*args)
        except (ValueError, OverflowError, ZeroDivisionError) as e:
            raise NonFiniteError(f"{label}: {e}") from None
        return self._check(float(result))


def eval_policy(
    program: PolicyProgram, obs: Sequence[float], limits: SandboxLimits = DEFAULT_LIMITS
) -> Action:
    """
    Evaluate a policy on one observation.

    Args:
        program: Parsed policy
        obs: Observation of length ``program.obs_dim``
        limits: Operation budget and magnitude guard

    Returns:
        Action tuple of length ``program.action_dim``, clamped to [-1, 1]

    Raises:
        BudgetExceededError: Operation budget exhausted or nesting too deep
        NonFiniteError: NaN, infinity, over-large value or division by zero
        PolicyRuntimeError: Any other runtime failure
    """
    values = tuple(float(x) for x in obs)
    if len(values) != program.obs_dim:
        raise ValueError(f"observation has {len(values)} values, expected {program.obs_dim}")

    try:
        result = Interpreter(program, values, limits).run()
    except RecursionError:
        raise BudgetExceededError("expression nests too deeply to evaluate") from None

    if program.action_dim == 1:
        if isinstance(result, tuple):
            raise PolicyRuntimeError("policy returned a vector where a scalar was expected")
        components: Tuple[float, ...] = (result,)
    else:
        if not isinstance(result, tuple):
            raise PolicyRuntimeError(
                f"policy returned a scalar where {program.action_dim} values were expected"
            )
        if len(result) != program.action_dim:
            raise PolicyRuntimeError(
                f"policy returned {len(result)} values, expected {program.action_dim}"
            )
        components = result
    return tuple(min(max(c, -1.0), 1.0) for c in components)
