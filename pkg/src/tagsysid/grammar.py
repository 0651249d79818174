"""Tree Adjoining Grammars: elementary trees, substitution, adjunction, yield.

Trees are immutable. Every operation returns a new tree and shares untouched
subtrees with its input, so trees can be handed to worker threads freely.

Addresses are tuples of child indices taken from the root, ``()`` being the
root itself. Serialisation is pre-order, as nested s-expressions::

    (S (T (P (M 1))))            an initial tree
    (M M@foot * (F ...))         an auxiliary tree with its foot node
    (S@na S@foot + S)            root carries a null-adjunction constraint,
                                 the trailing ``S`` is a substitution site

Terminals that collide with the s-expression syntax are quoted: ``"("``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Hashable, Iterable, Iterator, Sequence

from .exceptions import (
    FootAdjunction,
    GrammarError,
    IncompleteTree,
    LabelMismatch,
    NotALeaf,
    NullAdjunctionViolation,
    UnknownGrammar,
)

__all__ = [
    "Symbol",
    "Node",
    "GrammarTree",
    "Grammar",
    "DerivedTree",
    "substitute",
    "adjoin",
    "yield_string",
    "validate_derived",
    "builtin_grammar",
    "parse_grammar",
    "load_grammar",
    "parse_tree",
    "to_sexpr",
    "BUILTIN_GRAMMARS",
]

Address = tuple


@dataclass(frozen=True)
class Symbol:
    name: str
    kind: str  # "nonterminal" | "terminal"

    def __post_init__(self):
        if self.kind not in ("nonterminal", "terminal"):
            raise ValueError(f"invalid symbol kind {self.kind!r}")


@dataclass(frozen=True, slots=True)
class Node:
    """One node of an elementary or derived tree.

    ``origin`` records provenance as ``(instance, address)``: which copy of
    which elementary tree contributed the node, and where it sat in it.
    """

    label: str
    children: tuple = ()
    terminal: bool = False
    na: bool = False
    foot: bool = False
    origin: tuple | None = None

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def size(self) -> int:
        return 1 + sum(c.size() for c in self.children)

    def walk(self, address: Address = ()) -> Iterator[tuple[Address, "Node"]]:
        """Pre-order traversal yielding ``(address, node)``."""
        stack = [(address, self)]
        while stack:
            addr, node = stack.pop()
            yield addr, node
            kids = node.children
            for i in range(len(kids) - 1, -1, -1):
                stack.append((addr + (i,), kids[i]))

    def at(self, address: Sequence[int]) -> "Node":
        node = self
        for i in address:
            try:
                node = node.children[i]
            except IndexError:
                raise IndexError(f"address {tuple(address)} does not exist") from None
        return node

    def replace_at(self, address: Sequence[int], new: "Node") -> "Node":
        if not address:
            return new
        i, rest = address[0], address[1:]
        if i >= len(self.children):
            raise IndexError(f"address {tuple(address)} does not exist")
        kids = list(self.children)
        kids[i] = kids[i].replace_at(rest, new)
        return replace(self, children=tuple(kids))


def _instantiate(node: Node, instance: Hashable, address: Address = ()) -> Node:
    kids = tuple(
        _instantiate(c, instance, address + (i,)) for i, c in enumerate(node.children)
    )
    return replace(node, children=kids, origin=(instance, address))


@dataclass(frozen=True)
class GrammarTree:
    """An elementary (initial or auxiliary) tree of a grammar."""

    name: str
    root: Node
    kind: str  # "initial" | "auxiliary"
    foot_address: Address | None = field(init=False, default=None)
    adjoinable: tuple = field(init=False, default=())
    substitution_sites: tuple = field(init=False, default=())

    def __post_init__(self):
        if self.kind not in ("initial", "auxiliary"):
            raise GrammarError(f"{self.name}: invalid tree kind {self.kind!r}")
        feet, adjoinable, sites = [], [], []
        for addr, node in self.root.walk():
            if node.foot:
                if node.children or node.terminal:
                    raise GrammarError(f"{self.name}: foot must be a non-terminal leaf")
                feet.append(addr)
            elif node.terminal:
                if node.children:
                    raise GrammarError(f"{self.name}: terminal {node.label!r} has children")
            elif node.is_leaf:
                sites.append((addr, node.label))
            elif not node.na:
                adjoinable.append((addr, node.label))
        if self.root.terminal:
            raise GrammarError(f"{self.name}: root must be a non-terminal")
        if self.kind == "initial" and feet:
            raise GrammarError(f"{self.name}: initial trees have no foot node")
        if self.kind == "auxiliary":
            if len(feet) != 1:
                raise GrammarError(f"{self.name}: auxiliary trees need exactly one foot node")
            if self.root.at(feet[0]).label != self.root.label:
                raise GrammarError(f"{self.name}: foot label must equal root label")
            object.__setattr__(self, "foot_address", feet[0])
        object.__setattr__(self, "adjoinable", tuple(adjoinable))
        object.__setattr__(self, "substitution_sites", tuple(sites))

    @property
    def label(self) -> str:
        return self.root.label

    def labels(self) -> set[str]:
        return {n.label for _, n in self.root.walk()}

    def size(self) -> int:
        return self.root.size()

    def __str__(self):
        return to_sexpr(self.root)


@dataclass(frozen=True)
class Grammar:
    non_terminals: frozenset
    terminals: frozenset
    start: str
    initial_trees: tuple
    auxiliary_trees: tuple
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "non_terminals", frozenset(self.non_terminals))
        object.__setattr__(self, "terminals", frozenset(self.terminals))
        object.__setattr__(self, "initial_trees", tuple(self.initial_trees))
        object.__setattr__(self, "auxiliary_trees", tuple(self.auxiliary_trees))
        clash = self.non_terminals & self.terminals
        if clash:
            raise GrammarError(f"symbols declared both terminal and non-terminal: {sorted(clash)}")
        if self.start not in self.non_terminals:
            raise GrammarError(f"start symbol {self.start!r} is not a non-terminal")
        for tree in self.initial_trees + self.auxiliary_trees:
            for _, node in tree.root.walk():
                pool = self.terminals if node.terminal else self.non_terminals
                if node.label not in pool:
                    raise GrammarError(f"{tree.name}: undeclared symbol {node.label!r}")
        if not any(t.label == self.start for t in self.initial_trees):
            raise GrammarError("no initial tree is rooted at the start symbol")
        aux_by_label: dict[str, list[int]] = {}
        for i, tree in enumerate(self.auxiliary_trees):
            aux_by_label.setdefault(tree.label, []).append(i)
        init_by_label: dict[str, list[int]] = {}
        for i, tree in enumerate(self.initial_trees):
            init_by_label.setdefault(tree.label, []).append(i)
        object.__setattr__(self, "_aux_by_label", {k: tuple(v) for k, v in aux_by_label.items()})
        object.__setattr__(self, "_init_by_label", {k: tuple(v) for k, v in init_by_label.items()})

    @property
    def symbols(self) -> list[Symbol]:
        return [Symbol(n, "nonterminal") for n in sorted(self.non_terminals)] + [
            Symbol(t, "terminal") for t in sorted(self.terminals)
        ]

    def auxiliary_for(self, label: str) -> tuple:
        """Indices of auxiliary trees whose root carries ``label``."""
        return self._aux_by_label.get(label, ())

    def initial_for(self, label: str) -> tuple:
        return self._init_by_label.get(label, ())

    def start_trees(self) -> tuple:
        return self.initial_for(self.start)

    def tree(self, kind: str, index: int) -> GrammarTree:
        return (self.initial_trees if kind == "initial" else self.auxiliary_trees)[index]

    def subset(self, initial: Iterable[str], auxiliary: Iterable[str], name: str | None = None) -> "Grammar":
        """Restrict to the named elementary trees; symbol sets shrink to what is used."""
        by_name = {t.name: t for t in self.initial_trees + self.auxiliary_trees}
        try:
            init = tuple(by_name[n] for n in initial)
            aux = tuple(by_name[n] for n in auxiliary)
        except KeyError as exc:
            raise GrammarError(f"no elementary tree named {exc.args[0]!r}") from None
        used_nt, used_t = set(), set()
        for tree in init + aux:
            for _, node in tree.root.walk():
                (used_t if node.terminal else used_nt).add(node.label)
        used_nt.add(self.start)
        return Grammar(used_nt, used_t, self.start, init, aux, name=name or self.name)

    def to_text(self) -> str:
        lines = [
            "nonterminals: " + " ".join(sorted(self.non_terminals)),
            "terminals: " + " ".join(_quote(t) for t in sorted(self.terminals)),
            f"start: {self.start}",
        ]
        for tree in self.initial_trees:
            lines.append(f"initial {tree.name}: {to_sexpr(tree.root)}")
        for tree in self.auxiliary_trees:
            lines.append(f"auxiliary {tree.name}: {to_sexpr(tree.root)}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class DerivedTree:
    """A tree built from elementary trees by substitution and adjunction."""

    root: Node
    adjunctions: int = 0

    @classmethod
    def from_initial(cls, initial: GrammarTree, instance: Hashable = 0) -> "DerivedTree":
        if initial.kind != "initial":
            raise GrammarError("derivations start from an initial tree")
        return cls(_instantiate(initial.root, instance))

    def at(self, address: Sequence[int]) -> Node:
        return self.root.at(address)

    def size(self) -> int:
        return self.root.size()

    def is_complete(self) -> bool:
        return all(n.terminal for _, n in self.root.walk() if n.is_leaf)

    def find_origin(self, origin: tuple) -> Address:
        for addr, node in self.root.walk():
            if node.origin == origin:
                return addr
        raise KeyError(origin)

    def __str__(self):
        return to_sexpr(self.root)


def substitute(
    target: DerivedTree, leaf_address: Sequence[int], initial: GrammarTree, instance: Hashable = None
) -> DerivedTree:
    """Replace the substitution site at ``leaf_address`` by a copy of ``initial``."""
    leaf_address = tuple(leaf_address)
    node = target.at(leaf_address)
    if node.terminal or node.children or node.foot:
        raise NotALeaf(f"node at {leaf_address} ({node.label!r}) is not a substitution site")
    if initial.kind != "initial":
        raise GrammarError(f"{initial.name} is not an initial tree")
    if initial.label != node.label:
        raise LabelMismatch(f"cannot substitute {initial.label!r} at {node.label!r}")
    new = _instantiate(initial.root, instance)
    return DerivedTree(target.root.replace_at(leaf_address, new), target.adjunctions)


def adjoin(
    target: DerivedTree, node_address: Sequence[int], aux: GrammarTree, instance: Hashable = None
) -> DerivedTree:
    """Adjoin ``aux`` at ``node_address``.

    The subtree rooted there is detached, ``aux`` takes its place and the
    detached subtree is re-attached at the foot of ``aux``.
    """
    node_address = tuple(node_address)
    node = target.at(node_address)
    if aux.kind != "auxiliary":
        raise GrammarError(f"{aux.name} is not an auxiliary tree")
    if node.terminal:
        raise LabelMismatch(f"cannot adjoin at terminal {node.label!r}")
    if node.foot:
        raise FootAdjunction(f"node at {node_address} is a foot node")
    if node.na:
        raise NullAdjunctionViolation(f"node at {node_address} carries a null-adjunction constraint")
    if aux.label != node.label:
        raise LabelMismatch(f"cannot adjoin {aux.label!r}-rooted tree at {node.label!r}")
    planted = _instantiate(aux.root, instance).replace_at(aux.foot_address, node)
    return DerivedTree(target.root.replace_at(node_address, planted), target.adjunctions + 1)


def yield_string(tree: DerivedTree | Node) -> list[str]:
    """Left-to-right terminal labels of a complete tree."""
    root = tree.root if isinstance(tree, DerivedTree) else tree
    out: list[str] = []
    stack = [root]
    while stack:
        node = stack.pop()
        if node.children:
            stack.extend(reversed(node.children))
        elif node.terminal:
            out.append(node.label)
        else:
            raise IncompleteTree(f"non-terminal leaf {node.label!r} remains")
    return out


def validate_derived(tree: DerivedTree, grammar: Grammar, complete: bool = True) -> None:
    """Raise ``GrammarError`` unless ``tree`` is a well-formed derived tree of ``grammar``.

    Checks the root label, the symbol alphabet, absence of dangling foot
    nodes and completeness. :func:`validate_provenance` additionally checks
    each node against the elementary tree it was copied from.
    """
    if tree.root.label != grammar.start:
        raise GrammarError(f"root label {tree.root.label!r} is not the start symbol")
    for addr, node in tree.root.walk():
        pool = grammar.terminals if node.terminal else grammar.non_terminals
        if node.label not in pool:
            raise GrammarError(f"{addr}: symbol {node.label!r} not in grammar")
        if node.foot:
            raise GrammarError(f"{addr}: dangling foot node")
        if node.terminal and node.children:
            raise GrammarError(f"{addr}: terminal with children")
        if complete and node.is_leaf and not node.terminal:
            raise GrammarError(f"{addr}: open substitution site {node.label!r}")


def validate_provenance(tree: DerivedTree, sources: dict) -> None:
    """Check each node against its source elementary node.

    ``sources`` maps instance ids to the ``GrammarTree`` they were copied from.
    """
    for addr, node in tree.root.walk():
        if node.origin is None:
            raise GrammarError(f"{addr}: node without provenance")
        inst, local = node.origin
        src = sources[inst].root.at(local)
        if (src.label, src.terminal, src.na) != (node.label, node.terminal, node.na):
            raise GrammarError(f"{addr}: node disagrees with its elementary tree")
        # children appear in elementary order, possibly expanded by operations
        for i, child in enumerate(node.children):
            cinst, clocal = child.origin
            if cinst == inst and clocal != local + (i,):
                raise GrammarError(f"{addr + (i,)}: child out of place")


# -- s-expressions -------------------------------------------------------------

_TOKEN = re.compile(r'"([^"]*)"|(\()|(\))|([^\s()"]+)')


def _lex(text: str) -> list[tuple[str, str]]:
    out, pos = [], 0
    for m in _TOKEN.finditer(text):
        if text[pos:m.start()].strip():
            raise GrammarError(f"unexpected text {text[pos:m.start()]!r}")
        pos = m.end()
        if m.group(1) is not None:
            out.append(("quoted", m.group(1)))
        elif m.group(2):
            out.append(("open", "("))
        elif m.group(3):
            out.append(("close", ")"))
        else:
            out.append(("atom", m.group(4)))
    if text[pos:].strip():
        raise GrammarError(f"unexpected text {text[pos:]!r}")
    return out


def _atom(kind: str, text: str, non_terminals, terminals) -> Node:
    if kind == "quoted":
        return Node(text, terminal=True)
    label, _, mark = text.partition("@")
    if mark not in ("", "foot", "na"):
        raise GrammarError(f"unknown annotation @{mark}")
    if non_terminals is not None and label in non_terminals:
        terminal = False
    elif terminals is not None and label in terminals:
        terminal = True
    else:
        terminal = non_terminals is not None and not mark
    if mark and terminal:
        raise GrammarError(f"annotation on terminal {label!r}")
    return Node(label, terminal=terminal, na=mark == "na", foot=mark == "foot")


def parse_tree(text: str, non_terminals=None, terminals=None) -> Node:
    """Parse one s-expression tree.

    Without symbol declarations, labels of inner nodes and annotated leaves
    are non-terminals and all other leaves are terminals.
    """
    tokens = _lex(text)
    pos = 0

    def node():
        nonlocal pos
        if pos >= len(tokens):
            raise GrammarError("unexpected end of tree")
        kind, val = tokens[pos]
        pos += 1
        if kind == "close":
            raise GrammarError("unbalanced ')'")
        if kind != "open":
            return _atom(kind, val, non_terminals, terminals)
        if pos >= len(tokens) or tokens[pos][0] not in ("atom", "quoted"):
            raise GrammarError("'(' must be followed by a label")
        head = _atom(*tokens[pos], non_terminals, terminals)
        pos += 1
        kids = []
        while pos < len(tokens) and tokens[pos][0] != "close":
            kids.append(node())
        if pos >= len(tokens):
            raise GrammarError("missing ')'")
        pos += 1
        if head.foot:
            raise GrammarError("foot node must be a leaf")
        return replace(head, children=tuple(kids), terminal=False)

    root = node()
    if pos != len(tokens):
        raise GrammarError("trailing tokens after tree")
    if non_terminals is None:
        root = _infer_kinds(root, {n.label for _, n in root.walk() if n.children or n.foot or n.na})
    return root


def _infer_kinds(node: Node, nts: set) -> Node:
    kids = tuple(_infer_kinds(c, nts) for c in node.children)
    return replace(node, children=kids, terminal=node.label not in nts)


def _quote(label: str) -> str:
    return f'"{label}"' if re.search(r'[\s()"@]', label) else label


def to_sexpr(node: Node) -> str:
    label = _quote(node.label)
    if node.foot:
        label += "@foot"
    elif node.na:
        label += "@na"
    if not node.children:
        return label
    return "(" + " ".join([label] + [to_sexpr(c) for c in node.children]) + ")"


# -- grammar files ---------------------------------------------------------------

def parse_grammar(text: str, name: str = "custom") -> Grammar:
    """Parse the grammar description format.

    Statements are ``key: value`` lines; a tree definition may continue over
    several lines until its parentheses balance. ``#`` starts a comment::

        nonterminals: S T M
        terminals: + 1 y          # optional, inferred from the trees if absent
        start: S
        initial alpha1: (S (T (M 1)))
        auxiliary beta1: (S S@foot + (T (M y)))
    """
    statements: list[tuple[int, str]] = []
    buf, depth, first = "", 0, 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = re.sub(r'#(?=(?:[^"]*"[^"]*")*[^"]*$).*', "", raw).strip()
        if not line:
            continue
        if not buf:
            first = lineno
        buf = f"{buf} {line}" if buf else line
        kinds = [k for k, _ in _lex(line)]
        depth += kinds.count("open") - kinds.count("close")
        if depth <= 0:
            statements.append((first, buf))
            buf, depth = "", 0
    if buf:
        raise GrammarError(f"line {first}: unterminated tree definition")

    nts = terms = start = None
    trees: list[tuple[int, str, str, str]] = []
    for lineno, stmt in statements:
        key, sep, value = stmt.partition(":")
        if not sep:
            raise GrammarError(f"line {lineno}: expected 'key: value'")
        key, value = key.strip(), value.strip()
        words = key.split()
        if key == "nonterminals":
            nts = set(value.split())
        elif key == "terminals":
            terms = {v for k, v in _lex(value)}
        elif key == "start":
            start = value
        elif len(words) == 2 and words[0] in ("initial", "auxiliary"):
            trees.append((lineno, words[0], words[1], value))
        else:
            raise GrammarError(f"line {lineno}: unknown statement {key!r}")
    if nts is None or start is None:
        raise GrammarError("grammar needs 'nonterminals' and 'start' declarations")
    initial, auxiliary, seen_terms = [], [], set()
    for lineno, kind, tname, body in trees:
        try:
            root = parse_tree(body, nts, terms)
            tree = GrammarTree(tname, root, kind)
        except GrammarError as exc:
            raise GrammarError(f"line {lineno}: {exc}") from None
        seen_terms |= {n.label for _, n in root.walk() if n.terminal}
        (initial if kind == "initial" else auxiliary).append(tree)
    return Grammar(nts, terms if terms is not None else seen_terms, start, initial, auxiliary, name=name)


def load_grammar(path) -> Grammar:
    path = Path(path)
    return parse_grammar(path.read_text(), name=path.stem)


# Node roles: S expression, T term, P polynomial (non-wrapped) term body,
# M monomial, F factor, FU/FY/FE input/output/noise factor, D lag of an
# input or output factor, L any lag. Tokens: "k" opens a lag, each "q" is
# one sample of delay, each "^" raises the factor's exponent by one, "1" is
# the empty product.
_FULL_GRAMMAR = r"""
nonterminals: S T P M F FU FY FE D L
terminals: + * 1 u y e k q ^ sin cos abs "(" ")"
start: S
initial alpha1: (S (T (P (M 1))))
initial alpha2: (S (T sin "(" (M 1) ")"))
initial alpha3: (S (T cos "(" (M 1) ")"))
initial alpha4: (S (T abs "(" (M 1) ")"))
auxiliary beta1: (M M@foot * (F (FU u (D (L k)))))
auxiliary beta2: (M M@foot * (F (FY y (D (L k q)))))
auxiliary beta3: (F F@foot ^)
auxiliary beta4: (S S@foot + (T (P (M 1))))
auxiliary beta5: (D D@foot q)
auxiliary beta6: (P P@foot * (F (FE e (L k q))))
auxiliary beta7: (L L@foot q)
auxiliary beta8: (S@na S@foot + S)
"""

_SUBSETS = {
    "narx": (["alpha1"], [f"beta{i}" for i in range(1, 6)]),
    "narmax": (["alpha1"], [f"beta{i}" for i in range(1, 8)]),
    "trig": ([f"alpha{i}" for i in range(1, 4)], [f"beta{i}" for i in range(1, 9)]),
    "full": ([f"alpha{i}" for i in range(1, 5)], [f"beta{i}" for i in range(1, 9)]),
}

BUILTIN_GRAMMARS = tuple(_SUBSETS)
_cache: dict[str, Grammar] = {}


def builtin_grammar(name: str) -> Grammar:
    """Return one of the shipped grammars ``narx``, ``narmax``, ``trig``, ``full``."""
    if name not in _SUBSETS:
        raise UnknownGrammar(f"unknown grammar {name!r}; expected one of {BUILTIN_GRAMMARS}")
    if name not in _cache:
        full = parse_grammar(_FULL_GRAMMAR, name="full")
        init, aux = _SUBSETS[name]
        _cache[name] = full.subset(init, aux, name=name)
    return _cache[name]
