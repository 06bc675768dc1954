"""Monotone access formulas and their linear secret-sharing matrices over Z_p.

Row indices in the public API are 1-based, matching the usual ``rho(i)``
notation: row ``i`` of the share-generating matrix belongs to the party
(attribute) ``rho[i - 1]``.
"""

from __future__ import annotations

import random
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

from ._canonical import Reader, Writer
from ._kernels import matvec, solve_left
from .errors import InvalidFormula, Malformed, NotAuthorized

RESERVED_PREFIX = "challenge:"


@dataclass(frozen=True)
class Leaf:
    attribute: str
    # set only by challenge_leaf(); excluded from equality and repr
    _system: bool = field(default=False, compare=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.attribute, str) or not self.attribute:
            raise InvalidFormula("leaf attribute must be a nonempty string")
        if self.attribute.startswith(RESERVED_PREFIX) and not self._system:
            raise InvalidFormula(f"attribute namespace {RESERVED_PREFIX!r} is reserved")


@dataclass(frozen=True)
class And:
    left: "AccessFormula"
    right: "AccessFormula"


@dataclass(frozen=True)
class Or:
    left: "AccessFormula"
    right: "AccessFormula"


AccessFormula = Leaf | And | Or


def challenge_leaf(attribute: str) -> Leaf:
    """A leaf in the reserved challenge namespace (protocol use only)."""
    if not attribute.startswith(RESERVED_PREFIX):
        raise InvalidFormula("challenge attributes must use the reserved prefix")
    return Leaf(attribute, _system=True)


def leaves(formula: AccessFormula) -> list[str]:
    """Leaf attributes in left-to-right order."""
    out: list[str] = []
    stack = [formula]
    while stack:
        node = stack.pop()
        if isinstance(node, Leaf):
            out.append(node.attribute)
        elif isinstance(node, (And, Or)):
            stack.append(node.right)
            stack.append(node.left)
        else:
            raise InvalidFormula(f"not a formula node: {node!r}")
    return out


def and_count(formula: AccessFormula) -> int:
    if isinstance(formula, Leaf):
        return 0
    return (isinstance(formula, And)) + and_count(formula.left) + and_count(formula.right)


def evaluate(formula: AccessFormula, attrs: Iterable[str]) -> bool:
    attrs = attrs if isinstance(attrs, (set, frozenset)) else frozenset(attrs)
    if isinstance(formula, Leaf):
        return formula.attribute in attrs
    if isinstance(formula, And):
        return evaluate(formula.left, attrs) and evaluate(formula.right, attrs)
    return evaluate(formula.left, attrs) or evaluate(formula.right, attrs)


def conjoin(*parts: AccessFormula) -> AccessFormula:
    """Left-associative AND of one or more formulas."""
    return _fold(And, parts)


def disjoin(*parts: AccessFormula) -> AccessFormula:
    """Left-associative OR of one or more formulas."""
    return _fold(Or, parts)


def _fold(node, parts):
    if not parts:
        raise InvalidFormula("cannot fold an empty list of formulas")
    acc = parts[0]
    for part in parts[1:]:
        acc = node(acc, part)
    return acc


def to_text(formula: AccessFormula) -> str:
    """Fully parenthesized infix form, for logs and error messages."""
    if isinstance(formula, Leaf):
        return formula.attribute
    op = "AND" if isinstance(formula, And) else "OR"
    return f"({to_text(formula.left)} {op} {to_text(formula.right)})"


@dataclass(frozen=True)
class LsssStructure:
    matrix: tuple[tuple[int, ...], ...]
    rho: tuple[str, ...]
    p: int

    def __post_init__(self):
        if self.p < 2:
            raise InvalidFormula("modulus must be at least 2")
        if not self.matrix or not self.matrix[0]:
            raise InvalidFormula("matrix must have at least one row and column")
        width = len(self.matrix[0])
        if len(self.rho) != len(self.matrix):
            raise InvalidFormula("rho must label every row")
        for row in self.matrix:
            if len(row) != width or any(not 0 <= v < self.p for v in row):
                raise InvalidFormula("rows must share a width and be reduced mod p")

    @property
    def rows(self) -> int:
        return len(self.matrix)

    @property
    def width(self) -> int:
        return len(self.matrix[0])

    def to_bytes(self) -> bytes:
        size = (self.p.bit_length() + 7) // 8
        w = Writer().u32(self.width).u32(self.rows)
        for row in self.matrix:
            for v in row:
                w.raw(v.to_bytes(size, "big"))
        for attr in self.rho:
            w.text(attr)
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes, p: int) -> "LsssStructure":
        r = Reader(data)
        structure = cls._read(r, p)
        r.done()
        return structure

    @classmethod
    def _read(cls, r: Reader, p: int) -> "LsssStructure":
        size = (p.bit_length() + 7) // 8
        width, rows = r.u32(), r.u32()
        if not width or not rows or width * rows * size > 1 << 24:
            raise Malformed("implausible LSSS dimensions")
        matrix = []
        for _ in range(rows):
            row = tuple(int.from_bytes(r.raw(size), "big") for _ in range(width))
            if any(v >= p for v in row):
                raise Malformed("LSSS entry not reduced mod p")
            matrix.append(row)
        rho = tuple(r.text() for _ in range(rows))
        if any(not a for a in rho):
            raise Malformed("empty row label")
        return cls(tuple(matrix), rho, p)


def compile(formula: AccessFormula, p: int) -> LsssStructure:
    """Labeled-vector conversion of a monotone formula into (M, rho).

    The root carries (1). OR children inherit the parent vector; an AND
    with parent vector v (width c) gives its left child v|1 and its right
    child 0^c|-1, widening every vector by one column.
    """
    if p < 2:
        raise InvalidFormula("modulus must be at least 2")
    width = 1
    labels: list[tuple[list[int], str]] = []
    stack: list[tuple[AccessFormula, list[int]]] = [(formula, [1])]
    while stack:
        node, vec = stack.pop()
        if isinstance(node, Leaf):
            labels.append((vec, node.attribute))
        elif isinstance(node, Or):
            stack.append((node.right, vec))
            stack.append((node.left, vec))
        elif isinstance(node, And):
            padded = vec + [0] * (width - len(vec))
            left = padded + [1]
            right = [0] * width + [-1]
            width += 1
            stack.append((node.right, right))
            stack.append((node.left, left))
        else:
            raise InvalidFormula(f"not a formula node: {node!r}")
    matrix = tuple(
        tuple(v % p for v in vec + [0] * (width - len(vec))) for vec, _ in labels
    )
    return LsssStructure(matrix, tuple(attr for _, attr in labels), p)


def share(structure: LsssStructure, secret: int, rng=None) -> list[tuple[int, int]]:
    """Shares ``lambda_i = (M v)_i`` for ``v = (secret, r_2, ..., r_n)``."""
    rng = rng or random.SystemRandom()
    p = structure.p
    vec = [secret % p] + [rng.randrange(p) for _ in range(structure.width - 1)]
    return list(enumerate(matvec(structure.matrix, vec, p), start=1))


def _candidate_rows(structure: LsssStructure, attrs: Iterable[str]) -> list[int]:
    attrs = attrs if isinstance(attrs, (set, frozenset)) else frozenset(attrs)
    return [i for i, a in enumerate(structure.rho, start=1) if a in attrs]


def _solve(structure: LsssStructure, rows: list[int]):
    return solve_left([structure.matrix[i - 1] for i in rows], structure.width, structure.p)


def satisfying_rows(structure: LsssStructure, attrs: Iterable[str]) -> frozenset[int] | None:
    """Rows labeled by ``attrs`` if they span e1 = (1, 0, ..., 0), else None."""
    rows = _candidate_rows(structure, attrs)
    if not rows or _solve(structure, rows) is None:
        return None
    return frozenset(rows)


def reconstruct_coefficients(structure: LsssStructure, rows: Iterable[int]) -> dict[int, int]:
    """Coefficients w_i with ``sum(w_i * M_i) == e1`` mod p.

    Rows are taken in ascending order and the earliest independent ones
    become pivots, so the result is deterministic; redundant rows get 0.
    """
    ordered = sorted(set(rows))
    if any(not 1 <= i <= structure.rows for i in ordered):
        raise ValueError("row index out of range")
    w = _solve(structure, ordered) if ordered else None
    if w is None:
        raise NotAuthorized("rows do not span the target vector")
    return dict(zip(ordered, w))


def recombine(coefficients: Mapping[int, int], shares: Mapping[int, int], p: int) -> int:
    return sum(w * shares[i] for i, w in coefficients.items()) % p
