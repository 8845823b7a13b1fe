"""Class-expression trees: the genotype evolved by the learner.

Every node is an immutable, hashable value. Hash, length and depth are
computed once at construction from the children's cached values, so
building a tree by path copying stays cheap and nodes can key memo tables.

Node addresses are pre-order indices; address 0 is the root.
"""
from __future__ import annotations

import re
from typing import Iterator, Optional

from .kb import BOOLEAN, NUMERIC, OBJECT, THING, KnowledgeBase, format_value


class ConceptSyntaxError(ValueError):
    def __init__(self, message: str, pos: int):
        self.pos = pos
        super().__init__(f"{message} at position {pos}")


class RoleKindError(ValueError):
    pass


class Concept:
    """Base node. Subclasses set their fields once, then call ``_seal``."""

    __slots__ = ("children", "length", "depth", "_hash")

    children: tuple
    length: int
    depth: int

    def _key(self) -> tuple:
        raise NotImplementedError

    def _seal(self, children: tuple) -> None:
        object.__setattr__(self, "children", children)
        object.__setattr__(self, "_hash", hash((type(self).__name__,) + self._key()))
        object.__setattr__(self, "length", 1 + sum(c.length for c in children))
        object.__setattr__(self, "depth", 1 + max(c.depth for c in children) if children else 0)

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if type(self) is not type(other) or self._hash != other._hash:  # type: ignore[attr-defined]
            return False
        return self._key() == other._key()  # type: ignore[attr-defined]

    def __reduce__(self):
        return (type(self), self._key())

    def with_children(self, kids: tuple) -> "Concept":
        raise NotImplementedError

    def __str__(self) -> str:
        return serialize(self)


class _Leaf(Concept):
    __slots__ = ()
    def with_children(self, kids: tuple) -> "Concept":
        return self


class ThingNode(_Leaf):
    __slots__ = ()
    def __init__(self) -> None:
        self._seal(())

    def _key(self) -> tuple:
        return ()

    def __repr__(self) -> str:
        return "Thing"


Thing = ThingNode()


class Atomic(_Leaf):
    __slots__ = ("name",)
    __match_args__ = ("name",)

    def __init__(self, name: str) -> None:
        object.__setattr__(self, "name", name)
        self._seal(())

    def _key(self) -> tuple:
        return (self.name,)

    def __repr__(self) -> str:
        return f"Atomic({self.name!r})"


class Not(Concept):
    __slots__ = ("child",)
    __match_args__ = ("child",)

    def __init__(self, child: Concept) -> None:
        object.__setattr__(self, "child", child)
        self._seal((child,))

    def _key(self) -> tuple:
        return (self.child,)

    def with_children(self, kids: tuple) -> Concept:
        return Not(kids[0])

    def __repr__(self) -> str:
        return f"Not({self.child!r})"


class _Binary(Concept):
    __slots__ = ("left", "right")
    __match_args__ = ("left", "right")

    def __init__(self, left: Concept, right: Concept) -> None:
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        self._seal((left, right))

    def _key(self) -> tuple:
        return (self.left, self.right)

    def with_children(self, kids: tuple) -> Concept:
        return type(self)(kids[0], kids[1])

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.left!r}, {self.right!r})"


class And(_Binary):
    __slots__ = ()


class Or(_Binary):
    __slots__ = ()


class _Quantified(Concept):
    __slots__ = ("role", "child")
    __match_args__ = ("role", "child")

    def __init__(self, role: str, child: Concept) -> None:
        object.__setattr__(self, "role", role)
        object.__setattr__(self, "child", child)
        self._seal((child,))

    def _key(self) -> tuple:
        return (self.role, self.child)

    def with_children(self, kids: tuple) -> Concept:
        return type(self)(self.role, kids[0])

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.role!r}, {self.child!r})"


class Exists(_Quantified):
    __slots__ = ()


class Forall(_Quantified):
    __slots__ = ()


class _Cardinality(Concept):
    __slots__ = ("n", "role", "child")
    __match_args__ = ("n", "role", "child")
    min_n = 0

    def __init__(self, n: int, role: str, child: Concept) -> None:
        if isinstance(n, bool) or int(n) != n or n < self.min_n:
            raise ValueError(f"{type(self).__name__} needs an integer n >= {self.min_n}, got {n!r}")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "role", role)
        object.__setattr__(self, "child", child)
        self._seal((child,))

    def _key(self) -> tuple:
        return (self.n, self.role, self.child)

    def with_children(self, kids: tuple) -> Concept:
        return type(self)(self.n, self.role, kids[0])

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.n}, {self.role!r}, {self.child!r})"


class MinCard(_Cardinality):
    __slots__ = ()
    min_n = 1


class MaxCard(_Cardinality):
    __slots__ = ()
    min_n = 0


class _DataBound(_Leaf):
    __slots__ = ("role", "value")
    __match_args__ = ("role", "value")

    def __init__(self, role: str, value: float) -> None:
        object.__setattr__(self, "role", role)
        object.__setattr__(self, "value", float(value))
        self._seal(())

    def _key(self) -> tuple:
        return (self.role, self.value)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.role!r}, {format_value(self.value)})"


class DataLE(_DataBound):
    __slots__ = ()


class DataGE(_DataBound):
    __slots__ = ()


class BoolEq(_Leaf):
    __slots__ = ("role", "value")
    __match_args__ = ("role", "value")

    def __init__(self, role: str, value: bool) -> None:
        object.__setattr__(self, "role", role)
        object.__setattr__(self, "value", bool(value))
        self._seal(())

    def _key(self) -> tuple:
        return (self.role, self.value)

    def __repr__(self) -> str:
        return f"BoolEq({self.role!r}, {self.value})"


def length(c: Concept) -> int:
    return c.length


def depth(c: Concept) -> int:
    return c.depth


def iter_preorder(c: Concept) -> Iterator[Concept]:
    stack = [c]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children))


def enumerate_nodes(c: Concept) -> list[int]:
    return list(range(c.length))


def subtree_at(c: Concept, addr: int) -> Concept:
    if not 0 <= addr < c.length:
        raise IndexError(f"address {addr} out of range for tree of length {c.length}")
    node = c
    while addr:
        addr -= 1
        for kid in node.children:
            if addr < kid.length:
                node = kid
                break
            addr -= kid.length
    return node


def node_depth(c: Concept, addr: int) -> int:
    """Edge distance from the root to the node at ``addr``."""
    if not 0 <= addr < c.length:
        raise IndexError(f"address {addr} out of range for tree of length {c.length}")
    node, d = c, 0
    while addr:
        addr -= 1
        d += 1
        for kid in node.children:
            if addr < kid.length:
                node = kid
                break
            addr -= kid.length
    return d


def replace_subtree(c: Concept, addr: int, sub: Concept) -> Concept:
    if not 0 <= addr < c.length:
        raise IndexError(f"address {addr} out of range for tree of length {c.length}")
    if addr == 0:
        return sub
    rel = addr - 1
    kids = list(c.children)
    for i, kid in enumerate(kids):
        if rel < kid.length:
            kids[i] = replace_subtree(kid, rel, sub)
            return c.with_children(tuple(kids))
        rel -= kid.length
    raise AssertionError("unreachable")


def serialize(c: Concept) -> str:
    if isinstance(c, ThingNode):
        return THING
    if isinstance(c, Atomic):
        return c.name
    if isinstance(c, Not):
        return f"not({serialize(c.child)})"
    if isinstance(c, And):
        return f"and({serialize(c.left)}, {serialize(c.right)})"
    if isinstance(c, Or):
        return f"or({serialize(c.left)}, {serialize(c.right)})"
    if isinstance(c, Exists):
        return f"exists {c.role}.({serialize(c.child)})"
    if isinstance(c, Forall):
        return f"forall {c.role}.({serialize(c.child)})"
    if isinstance(c, MinCard):
        return f"min {c.n} {c.role}.({serialize(c.child)})"
    if isinstance(c, MaxCard):
        return f"max {c.n} {c.role}.({serialize(c.child)})"
    if isinstance(c, DataLE):
        return f"{c.role} <= {format_value(c.value)}"
    if isinstance(c, DataGE):
        return f"{c.role} >= {format_value(c.value)}"
    if isinstance(c, BoolEq):
        return f"{c.role} = {format_value(c.value)}"
    raise TypeError(f"not a concept: {c!r}")


_TOKEN = re.compile(
    r"\s*(?:(?P<num>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?(?![^\s(),.<>=#]))"
    r"|(?P<op><=|>=|[(),.=])"
    r"|(?P<ident>[^\s(),.<>=#]+))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ConceptSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0
        self.role_kinds: dict[str, str] = {}

    def peek(self, offset: int = 0) -> tuple[str, str, int]:
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def take(self, kind: str, value: Optional[str] = None) -> str:
        k, v, pos = self.peek()
        if k != kind or (value is not None and v != value):
            want = repr(value) if value is not None else kind
            got = repr(v) if k != "end" else "end of input"
            raise ConceptSyntaxError(f"expected {want}, got {got}", pos)
        self.i += 1
        return v

    def role(self, kind: str) -> str:
        pos = self.peek()[2]
        r = self.take("ident")
        seen = self.role_kinds.setdefault(r, kind)
        if seen != kind:
            raise RoleKindError(f"role {r!r} used as both {seen} and {kind} (position {pos})")
        return r

    def filler(self) -> Concept:
        self.take("op", ".")
        self.take("op", "(")
        c = self.concept()
        self.take("op", ")")
        return c

    def count(self) -> int:
        k, v, pos = self.peek()
        if k != "num" or not re.fullmatch(r"\d+", v):
            raise ConceptSyntaxError(f"expected cardinality, got {v!r}", pos)
        self.i += 1
        return int(v)

    def concept(self) -> Concept:
        k, v, pos = self.peek()
        if k != "ident":
            raise ConceptSyntaxError(f"expected concept, got {v!r}" if k != "end" else "unexpected end of input", pos)
        nk, nv, _ = self.peek(1)
        if v in ("not", "and", "or") and (nk, nv) == ("op", "("):
            self.i += 2
            first = self.concept()
            if v == "not":
                self.take("op", ")")
                return Not(first)
            self.take("op", ",")
            second = self.concept()
            self.take("op", ")")
            return And(first, second) if v == "and" else Or(first, second)
        if v in ("exists", "forall") and nk == "ident":
            self.i += 1
            r = self.role(OBJECT)
            return (Exists if v == "exists" else Forall)(r, self.filler())
        if v in ("min", "max") and nk == "num":
            self.i += 1
            n = self.count()
            r = self.role(OBJECT)
            cls = MinCard if v == "min" else MaxCard
            try:
                return cls(n, r, self.filler())
            except ValueError as exc:
                raise ConceptSyntaxError(str(exc), pos) from None
        if nk == "op" and nv in ("<=", ">="):
            self.i += 2
            r = v
            self._note_role(r, NUMERIC, pos)
            num = self.take("num")
            return (DataLE if nv == "<=" else DataGE)(r, float(num))
        if nk == "op" and nv == "=":
            self.i += 2
            self._note_role(v, BOOLEAN, pos)
            b = self.take("ident")
            if b not in ("true", "false"):
                raise ConceptSyntaxError(f"expected true or false, got {b!r}", self.peek(-1)[2])
            return BoolEq(v, b == "true")
        self.i += 1
        return Thing if v == THING else Atomic(v)

    def _note_role(self, r: str, kind: str, pos: int) -> None:
        seen = self.role_kinds.setdefault(r, kind)
        if seen != kind:
            raise RoleKindError(f"role {r!r} used as both {seen} and {kind} (position {pos})")


def parse(text: str, kb: Optional[KnowledgeBase] = None) -> Concept:
    """Parse the canonical text form; with ``kb``, also check identifiers."""
    p = _Parser(text)
    c = p.concept()
    k, v, pos = p.peek()
    if k != "end":
        raise ConceptSyntaxError(f"trailing input {v!r}", pos)
    if kb is not None:
        check_concept(c, kb)
    return c


_ROLE_KIND = {Exists: OBJECT, Forall: OBJECT, MinCard: OBJECT, MaxCard: OBJECT,
              DataLE: NUMERIC, DataGE: NUMERIC, BoolEq: BOOLEAN}


def check_concept(c: Concept, kb: KnowledgeBase) -> None:
    """Raise if ``c`` mentions undeclared names or uses a role of the wrong kind."""
    for node in iter_preorder(c):
        if isinstance(node, Atomic):
            if node.name not in kb.extensions:
                raise KeyError(f"unknown concept {node.name!r}")
            continue
        want = _ROLE_KIND.get(type(node))
        if want is None:
            continue
        have = kb.role_signatures.get(node.role)
        if have is None:
            raise KeyError(f"unknown role {node.role!r}")
        if have != want:
            raise RoleKindError(f"role {node.role!r} is {have}, used as {want}")
