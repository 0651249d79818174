"""TAG derivation trees as GP genotypes, with the variation operators.

A derivation tree records which elementary tree was attached where. Each
node names an elementary tree and the address, inside its parent's
elementary tree, at which it was substituted or adjoined. Every address of
an elementary tree hosts at most one operation, so a derivation tree always
decodes to exactly one derived tree.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .grammar import DerivedTree, Grammar, Node, adjoin, substitute, yield_string

__all__ = [
    "DerivationNode",
    "DerivationTree",
    "random_genotype",
    "add_adjunction",
    "derive",
    "replay",
    "crossover_genotypes",
    "mutate_genotype",
    "MUTATIONS",
]

MUTATIONS = ("delete", "regrow", "insert")
CROSSOVER_DRAWS = 16


@dataclass(frozen=True)
class DerivationNode:
    kind: str  # "initial", "adjoin" or "substitute"
    tree: int  # index into the grammar's initial or auxiliary trees
    address: tuple = ()  # site inside the parent's elementary tree
    children: tuple = ()

    @cached_property
    def n_adjunctions(self) -> int:
        return (self.kind == "adjoin") + sum(c.n_adjunctions for c in self.children)

    def elementary(self, grammar: Grammar):
        if self.kind == "adjoin":
            return grammar.auxiliary_trees[self.tree]
        return grammar.initial_trees[self.tree]

    def walk(self, path=()):
        """Pre-order traversal yielding ``(path, node)``."""
        stack = [(path, self)]
        while stack:
            p, node = stack.pop()
            yield p, node
            kids = node.children
            for i in range(len(kids) - 1, -1, -1):
                stack.append((p + (i,), kids[i]))

    def at(self, path):
        node = self
        for i in path:
            node = node.children[i]
        return node

    def replace_at(self, path, new: "DerivationNode | None") -> "DerivationNode":
        """Replace (or with ``None`` delete) the node at ``path``."""
        if not path:
            if new is None:
                raise ValueError("cannot delete the base of a derivation")
            return new
        i, rest = path[0], path[1:]
        kids = list(self.children)
        if not rest:
            if new is None:
                del kids[i]
            else:
                kids[i] = new
        else:
            kids[i] = kids[i].replace_at(rest, new)
        return replace(self, children=tuple(kids))

    def with_child(self, path, child: "DerivationNode") -> "DerivationNode":
        """Attach ``child`` below the node at ``path``, keeping children sorted by address."""
        parent = self.at(path)
        kids = tuple(sorted(parent.children + (child,), key=lambda c: c.address))
        return self.replace_at(path, replace(parent, children=kids))


@dataclass(frozen=True)
class DerivationTree:
    """GP genotype: a derivation rooted at an initial tree."""

    root: DerivationNode

    @property
    def base(self) -> int:
        return self.root.tree

    @property
    def adjunction_count(self) -> int:
        return self.root.n_adjunctions

    @property
    def operations(self) -> list[tuple]:
        """Flattened pre-order ``(kind, tree index, (parent op index, address))`` list.

        Op index 0 is the base; replaying the list in order reproduces the
        derivation.
        """
        ops = []
        index = {}
        for path, node in self.root.walk():
            index[path] = len(index)
            if path:
                ops.append((node.kind, node.tree, (index[path[:-1]], node.address)))
        return ops

    @cached_property
    def key(self) -> str:
        return _serialise(self.root)

    def __str__(self):
        return self.key


def _serialise(node: DerivationNode) -> str:
    tag = {"initial": "a", "adjoin": "b", "substitute": "s"}[node.kind]
    addr = ".".join(map(str, node.address))
    inner = "".join(_serialise(c) for c in node.children)
    return f"{tag}{node.tree}@{addr}[{inner}]"


# -- decoding ----------------------------------------------------------------------------

def derive(grammar: Grammar, genotype: DerivationTree) -> DerivedTree:
    """Build the derived tree directly from the derivation.

    Node provenance uses pre-order derivation indices as instance ids, the
    same ids :func:`replay` uses.
    """
    ids = {}
    adjoined = {}  # path -> {address: (child path, aux root)}
    substituted = {}  # path -> {address: (child path, initial root)}
    for path, node in genotype.root.walk():
        ids[path] = len(ids)
        adj, sub = {}, {}
        for i, c in enumerate(node.children):
            target = adj if c.kind == "adjoin" else sub
            target[c.address] = (path + (i,), c.elementary(grammar).root)
        adjoined[path], substituted[path] = adj, sub

    # ``foot`` is the continuation ``(path, addr, enode, foot)`` for the
    # subtree excised by the enclosing adjunction
    def expand(path, addr, enode, foot):
        hit = adjoined[path].get(addr)
        if hit is not None:
            return expand(hit[0], (), hit[1], (path, addr, enode, foot))
        return inner(path, addr, enode, foot)

    def inner(path, addr, enode, foot):
        if enode.foot:
            return inner(*foot)
        origin = (ids[path], addr)
        if enode.terminal:
            return Node(enode.label, terminal=True, origin=origin)
        if not enode.children:
            hit = substituted[path].get(addr)
            if hit is None:
                return Node(enode.label, na=enode.na, origin=origin)
            return expand(hit[0], (), hit[1], None)
        kids = tuple(
            [expand(path, addr + (j,), c, foot) for j, c in enumerate(enode.children)]
        )
        return Node(enode.label, kids, na=enode.na, origin=origin)

    root = genotype.root
    tree = expand((), (), root.elementary(grammar).root, None)
    return DerivedTree(tree, genotype.adjunction_count)


def replay(grammar: Grammar, genotype: DerivationTree) -> DerivedTree:
    """Decode by applying substitutions and adjunctions one at a time."""
    tree = DerivedTree.from_initial(genotype.root.elementary(grammar), instance=0)
    for i, (kind, idx, (parent, address)) in enumerate(genotype.operations, 1):
        target = tree.find_origin((parent, address))
        if kind == "adjoin":
            tree = adjoin(tree, target, grammar.auxiliary_trees[idx], instance=i)
        else:
            tree = substitute(tree, target, grammar.initial_trees[idx], instance=i)
    return tree


def tokens(grammar: Grammar, genotype: DerivationTree) -> list[str]:
    return yield_string(derive(grammar, genotype))


# -- construction ---------------------------------------------------------------------

def _complete(grammar: Grammar, node: DerivationNode, rng) -> DerivationNode:
    """Fill every open substitution site of ``node``'s elementary tree."""
    used = {c.address for c in node.children}
    kids = list(node.children)
    for addr, label in node.elementary(grammar).substitution_sites:
        if addr in used:
            continue
        options = grammar.initial_for(label)
        if not options:
            raise ValueError(f"no initial tree can fill a {label!r} substitution site")
        pick = options[rng.integers(len(options))]
        kids.append(_complete(grammar, DerivationNode("substitute", int(pick), addr), rng))
    return replace(node, children=tuple(sorted(kids, key=lambda c: c.address)))


def adjunction_choices(grammar: Grammar, root: DerivationNode, within=()) -> list[tuple]:
    """Every valid ``(node path, site address, aux index)`` for a new adjunction.

    Only derivation nodes at or below ``within`` are considered.
    """
    out = []
    sub = root.at(within)
    for rel, node in sub.walk():
        used = {c.address for c in node.children}
        for addr, label in node.elementary(grammar).adjoinable:
            if addr in used:
                continue
            for aux in grammar.auxiliary_for(label):
                out.append((within + rel, addr, aux))
    return out


def _new_adjunction(grammar, aux, addr, rng) -> DerivationNode:
    return _complete(grammar, DerivationNode("adjoin", int(aux), addr), rng)


def add_adjunction(grammar: Grammar, root: DerivationNode, rng, within=()):
    """Adjoin one random auxiliary tree, drawn uniformly over valid (tree, site) pairs.

    Returns the new root, or ``None`` if there is nowhere to adjoin.
    """
    choices = adjunction_choices(grammar, root, within)
    if not choices:
        return None
    path, addr, aux = choices[rng.integers(len(choices))]
    return root.with_child(path, _new_adjunction(grammar, aux, addr, rng))


class _Open:
    """Mutable mirror of a derivation node, used while growing."""

    __slots__ = ("kind", "tree", "address", "children")

    def __init__(self, node: DerivationNode):
        self.kind, self.tree, self.address = node.kind, node.tree, node.address
        self.children = [_Open(c) for c in node.children]

    def freeze(self) -> DerivationNode:
        kids = sorted((c.freeze() for c in self.children), key=lambda c: c.address)
        return DerivationNode(self.kind, self.tree, self.address, tuple(kids))


def _grow(grammar, root, count, rng, within=()):
    """Apply ``count`` uniform random adjunctions below ``within``.

    Same distribution as repeated :func:`add_adjunction`, but the list of
    open sites is updated incrementally instead of rebuilt each step.
    """
    if count <= 0:
        return root
    top = _Open(root.at(within))
    choices = []

    def register(node):
        tree = (grammar.auxiliary_trees if node.kind == "adjoin" else grammar.initial_trees)[node.tree]
        used = {c.address for c in node.children}
        for addr, label in tree.adjoinable:
            if addr not in used:
                choices.extend((node, addr, aux) for aux in grammar.auxiliary_for(label))
        for c in node.children:
            register(c)

    register(top)
    for _ in range(count):
        if not choices:
            break
        node, addr, aux = choices[rng.integers(len(choices))]
        new = _Open(_new_adjunction(grammar, aux, addr, rng))
        node.children.append(new)
        choices = [c for c in choices if c[0] is not node or c[1] != addr]
        register(new)
    return root.replace_at(within, top.freeze())


def random_genotype(grammar: Grammar, n_adjunctions: int, rng, base: int | None = None) -> DerivationTree:
    """Random derivation with ``n_adjunctions`` adjunctions."""
    starts = grammar.start_trees()
    if base is None:
        base = starts[rng.integers(len(starts))]
    root = _complete(grammar, DerivationNode("initial", int(base)), rng)
    return DerivationTree(_grow(grammar, root, n_adjunctions, rng))


def adjunction_paths(root: DerivationNode) -> list[tuple]:
    return [path for path, node in root.walk() if node.kind == "adjoin"]


# -- variation ------------------------------------------------------------------------------

def crossover_genotypes(grammar: Grammar, a: DerivationTree, b: DerivationTree, rng,
                        max_adjunctions: int):
    """Swap one adjunction subtree of ``a`` with a same-label one of ``b``.

    Returns the two children and whether an exchange took place. Without a
    compatible pair after ``CROSSOVER_DRAWS`` draws, or if a child would
    exceed the adjunction budget, the parents are returned unchanged.
    """
    pa, pb = adjunction_paths(a.root), adjunction_paths(b.root)
    if not pa or not pb:
        return a, b, False
    for _ in range(CROSSOVER_DRAWS):
        xa = pa[rng.integers(len(pa))]
        xb = pb[rng.integers(len(pb))]
        na, nb = a.root.at(xa), b.root.at(xb)
        if na.elementary(grammar).label != nb.elementary(grammar).label:
            continue
        ca = DerivationTree(_reattach(a.root, xa, replace(nb, address=na.address)))
        cb = DerivationTree(_reattach(b.root, xb, replace(na, address=nb.address)))
        if ca.adjunction_count > max_adjunctions or cb.adjunction_count > max_adjunctions:
            return a, b, False
        return ca, cb, True
    return a, b, False


def _reattach(root: DerivationNode, path, node: DerivationNode) -> DerivationNode:
    parent_path = path[:-1]
    return root.replace_at(path, None).with_child(parent_path, node)


def mutate_genotype(grammar: Grammar, g: DerivationTree, rng, max_adjunctions: int, kind: str):
    """Apply one mutation of the given ``kind``; may be a no-op."""
    root = g.root
    paths = adjunction_paths(root)
    if kind == "delete":
        if not paths:
            return g
        return DerivationTree(root.replace_at(paths[rng.integers(len(paths))], None))
    if kind == "regrow":
        if not paths:
            return g
        path = paths[rng.integers(len(paths))]
        old = root.at(path)
        size = old.n_adjunctions
        count = int(rng.integers(1, size + 1))
        label = old.elementary(grammar).label
        options = grammar.auxiliary_for(label)
        fresh = _new_adjunction(grammar, options[rng.integers(len(options))], old.address, rng)
        root = _reattach(root, path, fresh)
        # the fresh subtree sits among its siblings sorted by address
        parent = root.at(path[:-1])
        idx = next(i for i, c in enumerate(parent.children) if c.address == old.address)
        root = _grow(grammar, root, count - 1, rng, within=path[:-1] + (idx,))
        return DerivationTree(root)
    if kind == "insert":
        if g.adjunction_count >= max_adjunctions:
            return g
        grown = add_adjunction(grammar, root, rng)
        return g if grown is None else DerivationTree(grown)
    raise ValueError(f"unknown mutation {kind!r}")
