"""In-memory knowledge base with a materialized class hierarchy.

The text format is line oriented; ``#`` starts a comment::

    class <C>
    subclass <C> <D>          # C is a subclass of D
    objprop <r>
    dataprop <d> numeric|boolean
    type <x> <C>
    rel <x> <r> <y>
    data <x> <d> <value>      # true, false or a decimal literal

Instances are introduced by any ``type``/``rel``/``data`` record that mentions
them. Classes and roles must be declared before use.
"""
from __future__ import annotations

import io
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import IO, Union

import numpy as np

OBJECT = "object"
NUMERIC = "numeric"
BOOLEAN = "boolean"

THING = "Thing"

# Identifiers must survive the concept grammar unchanged.
_IDENT = re.compile(r"[^\s(),.<>=#]+\Z")
_DECIMAL = re.compile(r"[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?\Z")

Value = Union[str, float, bool]


class KBError(ValueError):
    """Raised for malformed or inconsistent knowledge-base input."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class KnowledgeBase:
    """Immutable knowledge base; build one with :func:`load_kb`.

    Instance, concept and role identifiers keep first-declaration order, which
    is the order every deterministic listing uses.
    """

    instances: tuple[str, ...] = ()
    atomic_concepts: tuple[str, ...] = ()
    subclass_edges: frozenset[tuple[str, str]] = frozenset()
    extensions: dict[str, frozenset[str]] = field(default_factory=dict)
    instance_types: dict[str, frozenset[str]] = field(default_factory=dict)
    object_adjacency: dict[tuple[str, str], tuple[str, ...]] = field(default_factory=dict)
    numeric_values: dict[tuple[str, str], frozenset[float]] = field(default_factory=dict)
    boolean_values: dict[tuple[str, str], frozenset[bool]] = field(default_factory=dict)
    role_signatures: dict[str, str] = field(default_factory=dict)

    def roles_of_kind(self, kind: str) -> list[str]:
        return [r for r, k in self.role_signatures.items() if k == kind]

    @property
    def object_roles(self) -> list[str]:
        return self.roles_of_kind(OBJECT)

    @property
    def numeric_roles(self) -> list[str]:
        return self.roles_of_kind(NUMERIC)

    @property
    def boolean_roles(self) -> list[str]:
        return self.roles_of_kind(BOOLEAN)

    @cached_property
    def index(self) -> dict[str, int]:
        return {x: i for i, x in enumerate(self.instances)}

    @cached_property
    def _triples(self) -> dict[str, list[tuple[str, Value]]]:
        out: dict[str, list[tuple[str, Value]]] = {x: [] for x in self.instances}
        idx = self.index
        for r in self.role_signatures:
            for x in self.instances:
                if (x, r) in self.object_adjacency:
                    ys = sorted(self.object_adjacency[(x, r)], key=idx.__getitem__)
                    out[x].extend((r, y) for y in ys)
                elif (x, r) in self.numeric_values:
                    out[x].extend((r, v) for v in sorted(self.numeric_values[(x, r)]))
                elif (x, r) in self.boolean_values:
                    out[x].extend((r, v) for v in sorted(self.boolean_values[(x, r)]))
        return out

    @cached_property
    def arrays(self) -> "KBArrays":
        return KBArrays.build(self)

    def _check_instance(self, x: str) -> None:
        if x not in self.index:
            raise KeyError(f"unknown instance {x!r}")


def instances_of(kb: KnowledgeBase, concept: str) -> frozenset[str]:
    try:
        return kb.extensions[concept]
    except KeyError:
        raise KeyError(f"unknown concept {concept!r}") from None


def types_of(kb: KnowledgeBase, x: str) -> frozenset[str]:
    kb._check_instance(x)
    return kb.instance_types.get(x, frozenset())


def outgoing_triples(kb: KnowledgeBase, x: str) -> list[tuple[str, Value]]:
    """(role, object) pairs asserted for ``x``, ordered by role then object."""
    kb._check_instance(x)
    return list(kb._triples[x])


def data_values(kb: KnowledgeBase, x: str, d: str) -> frozenset:
    kind = kb.role_signatures.get(d)
    if kind is None:
        raise KeyError(f"unknown data role {d!r}")
    if kind == OBJECT:
        raise KBError(f"{d!r} is an object role")
    store = kb.numeric_values if kind == NUMERIC else kb.boolean_values
    return store.get((x, d), frozenset())


@dataclass
class KBArrays:
    """Dense views used by the retrieval engine.

    Instance sets are boolean masks over ``kb.instances``; object roles are
    stored as CSR adjacency.
    """

    n: int
    extension: dict[str, np.ndarray]
    indptr: dict[str, np.ndarray]
    indices: dict[str, np.ndarray]
    degree: dict[str, np.ndarray]
    value_min: dict[str, np.ndarray]
    value_max: dict[str, np.ndarray]
    bool_mask: dict[tuple[str, bool], np.ndarray]

    @classmethod
    def build(cls, kb: KnowledgeBase) -> "KBArrays":
        n = len(kb.instances)
        idx = kb.index
        extension = {}
        for c, members in kb.extensions.items():
            m = np.zeros(n, dtype=bool)
            m[[idx[x] for x in members]] = True
            extension[c] = m
        indptr, indices, degree = {}, {}, {}
        value_min, value_max, bool_mask = {}, {}, {}
        for r, kind in kb.role_signatures.items():
            if kind == OBJECT:
                ptr = np.zeros(n + 1, dtype=np.int64)
                cols: list[int] = []
                for i, x in enumerate(kb.instances):
                    succ = kb.object_adjacency.get((x, r), ())
                    cols.extend(sorted(idx[y] for y in succ))
                    ptr[i + 1] = len(cols)
                indptr[r] = ptr
                indices[r] = np.asarray(cols, dtype=np.int64)
                degree[r] = np.diff(ptr)
            elif kind == NUMERIC:
                lo = np.full(n, np.nan)
                hi = np.full(n, np.nan)
                for (x, d), vals in kb.numeric_values.items():
                    if d == r:
                        lo[idx[x]] = min(vals)
                        hi[idx[x]] = max(vals)
                value_min[r] = lo
                value_max[r] = hi
            else:
                for b in (True, False):
                    m = np.zeros(n, dtype=bool)
                    for (x, d), vals in kb.boolean_values.items():
                        if d == r and b in vals:
                            m[idx[x]] = True
                    bool_mask[(r, b)] = m
        return cls(n, extension, indptr, indices, degree, value_min, value_max, bool_mask)


def parse_value(token: str, kind: str, lineno: int | None = None) -> float | bool:
    if kind == BOOLEAN:
        if token == "true":
            return True
        if token == "false":
            return False
        raise KBError(f"expected boolean value, got {token!r}", lineno)
    if not _DECIMAL.match(token):
        raise KBError(f"expected numeric value, got {token!r}", lineno)
    return float(token)


def _check_ident(token: str, lineno: int) -> str:
    if not _IDENT.match(token):
        raise KBError(f"invalid identifier {token!r}", lineno)
    return token


def _arity(parts: list[str], n: int, lineno: int) -> None:
    if len(parts) != n:
        raise KBError(f"{parts[0]!r} expects {n - 1} arguments, got {len(parts) - 1}", lineno)


def load_kb(source: Union[bytes, str, IO]) -> KnowledgeBase:
    """Parse the KB text format and materialize the subclass closure.

    ``source`` may be bytes, text, or a binary/text stream.
    """
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise KBError(f"input is not valid UTF-8: {exc}") from None

    classes: dict[str, None] = {}
    roles: dict[str, str] = {}
    instances: dict[str, None] = {}
    supers: dict[str, list[str]] = {}
    edges: set[tuple[str, str]] = set()
    asserted: dict[str, set[str]] = {}
    adjacency: dict[tuple[str, str], dict[str, None]] = {}
    numeric: dict[tuple[str, str], set[float]] = {}
    boolean: dict[tuple[str, str], set[bool]] = {}

    def need_class(c: str, lineno: int) -> None:
        if c not in classes:
            raise KBError(f"undeclared class {c!r}", lineno)

    def need_role(r: str, kinds: tuple[str, ...], lineno: int) -> str:
        kind = roles.get(r)
        if kind is None:
            raise KBError(f"undeclared role {r!r}", lineno)
        if kind not in kinds:
            raise KBError(f"role {r!r} is {kind}, not {'/'.join(kinds)}", lineno)
        return kind

    def instance(x: str, lineno: int) -> str:
        instances.setdefault(_check_ident(x, lineno), None)
        return x

    for lineno, raw in enumerate(io.StringIO(source), start=1):
        parts = raw.split("#", 1)[0].split()
        if not parts:
            continue
        head = parts[0]
        if head == "class":
            _arity(parts, 2, lineno)
            c = _check_ident(parts[1], lineno)
            if c == THING:
                raise KBError("Thing is built in and cannot be declared", lineno)
            classes.setdefault(c, None)
        elif head == "subclass":
            _arity(parts, 3, lineno)
            c, d = parts[1], parts[2]
            need_class(c, lineno)
            need_class(d, lineno)
            if (c, d) not in edges:
                edges.add((c, d))
                supers.setdefault(c, []).append(d)
        elif head in ("objprop", "dataprop"):
            if head == "objprop":
                _arity(parts, 2, lineno)
                kind = OBJECT
            else:
                _arity(parts, 3, lineno)
                kind = parts[2]
                if kind not in (NUMERIC, BOOLEAN):
                    raise KBError(f"data role kind must be numeric or boolean, got {kind!r}", lineno)
            r = _check_ident(parts[1], lineno)
            if roles.setdefault(r, kind) != kind:
                raise KBError(f"role {r!r} redeclared as {kind}", lineno)
        elif head == "type":
            _arity(parts, 3, lineno)
            need_class(parts[2], lineno)
            x = instance(parts[1], lineno)
            asserted.setdefault(x, set()).add(parts[2])
        elif head == "rel":
            _arity(parts, 4, lineno)
            need_role(parts[2], (OBJECT,), lineno)
            x, y = instance(parts[1], lineno), instance(parts[3], lineno)
            adjacency.setdefault((x, parts[2]), {})[y] = None
        elif head == "data":
            _arity(parts, 4, lineno)
            kind = need_role(parts[2], (NUMERIC, BOOLEAN), lineno)
            value = parse_value(parts[3], kind, lineno)
            x = instance(parts[1], lineno)
            store = numeric if kind == NUMERIC else boolean
            store.setdefault((x, parts[2]), set()).add(value)
        else:
            raise KBError(f"unknown record type {head!r}", lineno)

    closure = _supertype_closure(list(classes), supers)

    types: dict[str, frozenset[str]] = {}
    ext: dict[str, set[str]] = {c: set() for c in classes}
    for x in instances:
        ts: set[str] = set()
        for c in asserted.get(x, ()):
            ts |= closure[c]
        types[x] = frozenset(ts)
        for c in ts:
            ext[c].add(x)

    return KnowledgeBase(
        instances=tuple(instances),
        atomic_concepts=tuple(classes),
        subclass_edges=frozenset(edges),
        extensions={c: frozenset(m) for c, m in ext.items()},
        instance_types=types,
        object_adjacency={k: tuple(v) for k, v in adjacency.items()},
        numeric_values={k: frozenset(v) for k, v in numeric.items()},
        boolean_values={k: frozenset(v) for k, v in boolean.items()},
        role_signatures=dict(roles),
    )


def _supertype_closure(classes: list[str], supers: dict[str, list[str]]) -> dict[str, set[str]]:
    """Reflexive-transitive supertypes per class; raises on cycles."""
    closure: dict[str, set[str]] = {}
    state: dict[str, int] = {}  # 1 = on stack, 2 = done

    for root in classes:
        if root in state:
            continue
        stack = [(root, iter(supers.get(root, ())))]
        state[root] = 1
        while stack:
            c, it = stack[-1]
            d = next(it, None)
            if d is None:
                stack.pop()
                acc = {c}
                for s in supers.get(c, ()):
                    acc |= closure[s]
                closure[c] = acc
                state[c] = 2
            elif state.get(d) == 1:
                raise KBError(f"subclass cycle through {d!r}")
            elif d not in state:
                state[d] = 1
                stack.append((d, iter(supers.get(d, ()))))
    return closure


def dump_kb(kb: KnowledgeBase) -> str:
    """Render ``kb`` back to the text format (asserted types are the closure)."""
    lines = [f"class {c}" for c in kb.atomic_concepts]
    lines += [f"subclass {c} {d}" for c, d in sorted(kb.subclass_edges)]
    for r, kind in kb.role_signatures.items():
        lines.append(f"objprop {r}" if kind == OBJECT else f"dataprop {r} {kind}")
    for x in kb.instances:
        for c in sorted(kb.instance_types.get(x, ())):
            lines.append(f"type {x} {c}")
        for r, o in outgoing_triples(kb, x):
            if kb.role_signatures[r] == OBJECT:
                lines.append(f"rel {x} {r} {o}")
            else:
                lines.append(f"data {x} {r} {format_value(o)}")
    return "\n".join(lines) + "\n"


def format_value(v: float | bool) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def load_kb_file(path: str) -> KnowledgeBase:
    with open(path, "rb") as fh:
        return load_kb(fh)

