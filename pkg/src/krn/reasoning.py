"""Structural intelligence over nets.

Four capabilities live here:

* collapse/expand: replace a subnet with one complex node and restore
  it later, the "zooming" abstraction;
* concept mining: find value-free structural patterns that repeat;
* shaping: instantiate a concept's missing structure onto an instance
  that carries an is-a edge, marking everything created as inferred;
* structural queries: does this instance have that fragment, and is the
  answer asserted, inferred, or unknown.

Pattern matching compares node kinds, link shape, and property names;
property values never participate. A pattern node's names must be a
subset of its image's names, so more specific patterns match fewer
nodes, and a pattern action with a blank subject leaves the image's
subject unconstrained. Mining counts exact-structure occurrences (the
extracted pattern of the image is isomorphic to the template); a mined
template is kept only if no other sufficiently supported template
properly contains it.
"""

from __future__ import annotations

import copy
import enum
import itertools
import re
from dataclasses import dataclass

from .core import (
    ActionRecord,
    CollapsePayload,
    Kind,
    Net,
    NodeId,
    ObjectRecord,
    Provenance,
    Value,
    values_equal,
)
from .errors import (
    AmbiguousEndpoints,
    BoundaryViolation,
    KrnError,
    MalformedCondition,
    NotCollapsed,
    UnknownConcept,
    UnknownNode,
)

# Property names used for template bookkeeping on registered concept
# roots; they are stripped from extracted patterns.
SUPPORT_PROP = "concept-support"
PARENT_PROP = "concept-parent"
_BOOKKEEPING = {SUPPORT_PROP, PARENT_PROP}


def _neighbors(net: Net, nid: NodeId) -> list[NodeId]:
    rec = net.node(nid)
    if isinstance(rec, ObjectRecord):
        return sorted(set(rec.outgoing) | set(rec.incoming))
    out = {rec.target}
    if rec.subject is not None:
        out.add(rec.subject)
    return sorted(out)


# ------------------------------------------------------------- boundaries

@dataclass(frozen=True)
class CutLink:
    """One structural link crossing a boundary.

    `role` names the object's role in the action link; `via` is the kind
    of the outside endpoint.
    """

    inside: NodeId
    outside: NodeId
    via: str   # "action" | "object"
    role: str  # "subject" | "target"


@dataclass(frozen=True)
class Boundary:
    inside: frozenset
    cut: tuple


def compute_boundary(net: Net, inside) -> Boundary:
    inside = set(inside)
    if not inside:
        raise BoundaryViolation("inside set is empty")
    for nid in inside:
        net.node(nid)  # raises UnknownNode
    seen = {min(inside)}
    frontier = [min(inside)]
    while frontier:
        nid = frontier.pop()
        for nb in _neighbors(net, nid):
            if nb in inside and nb not in seen:
                seen.add(nb)
                frontier.append(nb)
    if seen != inside:
        raise BoundaryViolation("inside set is not connected")
    cut: list[CutLink] = []
    for nid in sorted(inside):
        rec = net.node(nid)
        if isinstance(rec, ObjectRecord):
            for aid in rec.outgoing:
                if aid not in inside:
                    cut.append(CutLink(nid, aid, "action", "subject"))
            for aid in rec.incoming:
                if aid not in inside:
                    cut.append(CutLink(nid, aid, "action", "target"))
        else:
            if rec.subject is not None and rec.subject not in inside:
                cut.append(CutLink(nid, rec.subject, "object", "subject"))
            if rec.target not in inside:
                cut.append(CutLink(nid, rec.target, "object", "target"))
    return Boundary(frozenset(inside), tuple(cut))


def _capture_payload(net: Net, inside: set, kind: str,
                     rewired: list) -> CollapsePayload:
    objects = {nid: copy.deepcopy(net.objects[nid]) for nid in inside if nid in net.objects}
    actions = {nid: copy.deepcopy(net.actions[nid]) for nid in inside if nid in net.actions}
    isa = [(i, c) for i, c in net.isa_edges if i in inside or c in inside]
    return CollapsePayload(kind=kind, objects=objects, actions=actions,
                           isa=isa, rewired=rewired)


def collapse_to_object(net: Net, inside) -> NodeId:
    """Replace a subnet bounded only by actions with one complex object.

    Crossing actions are rewired to the new object; the removed subnet
    is kept on the complex node for expansion.
    """
    boundary = compute_boundary(net, inside)
    inside = set(boundary.inside)
    bad = [cl for cl in boundary.cut if cl.via == "object"]
    if bad:
        raise BoundaryViolation(
            f"boundary crossed via object at {bad[0].inside}->{bad[0].outside}; "
            "a complex object must meet the rest of the net through actions"
        )
    rewired = [(cl.outside, cl.role, cl.inside)
               for cl in sorted(boundary.cut, key=lambda c: (c.outside, c.role))]
    payload = _capture_payload(net, inside, "object", rewired)
    new_id = net.allocate_id()
    record = ObjectRecord(id=new_id, collapse_payload=payload)
    net.objects[new_id] = record
    for aid, role, _orig in rewired:
        act = net.actions[aid]
        if role == "subject":
            act.subject = new_id
            record.outgoing.append(aid)
        else:
            act.target = new_id
            record.incoming.append(aid)
    net.isa_edges = [(i, c) for i, c in net.isa_edges
                     if i not in inside and c not in inside]
    for nid in inside:
        net.objects.pop(nid, None)
        net.actions.pop(nid, None)
    return new_id


def collapse_to_action(net: Net, inside, *, subject_hint: NodeId | None = None,
                       target_hint: NodeId | None = None) -> NodeId:
    """Replace a subnet bounded only by objects with one complex action.

    The complex action's subject is the unique outside initiator and its
    target the unique outside recipient, candidates taken in order of
    the inside actions' ids. More than one candidate on a side without a
    hint raises AmbiguousEndpoints. A single action collapses to itself.
    """
    inside = set(inside)
    if len(inside) == 1:
        only = next(iter(inside))
        if net.is_action(only):
            return only
    boundary = compute_boundary(net, inside)
    bad = [cl for cl in boundary.cut if cl.via == "action"]
    if bad:
        raise BoundaryViolation(
            f"boundary crossed via action at {bad[0].inside}->{bad[0].outside}; "
            "a complex action must meet the rest of the net through objects"
        )
    initiators: list[NodeId] = []
    recipients: list[NodeId] = []
    for aid in sorted(a for a in inside if net.is_action(a)):
        act = net.actions[aid]
        if act.subject is not None and act.subject not in inside \
                and act.subject not in initiators:
            initiators.append(act.subject)
        if act.target not in inside and act.target not in recipients:
            recipients.append(act.target)

    def pick(candidates, hint, side):
        if hint is not None:
            if hint not in candidates:
                raise AmbiguousEndpoints(f"{side} hint {hint} is not a boundary candidate")
            return hint
        if len(candidates) > 1:
            raise AmbiguousEndpoints(f"{len(candidates)} {side} candidates: {candidates}")
        return candidates[0] if candidates else None

    subject = pick(initiators, subject_hint, "subject")
    target = pick(recipients, target_hint, "target")
    if target is None:
        raise AmbiguousEndpoints("no outside recipient to serve as the complex action's target")
    payload = _capture_payload(net, inside, "action", [])
    # detach every crossing link from the outside objects' lists
    for cl in boundary.cut:
        obj = net.objects[cl.outside]
        lst = obj.outgoing if cl.role == "subject" else obj.incoming
        if cl.inside in lst:
            lst.remove(cl.inside)
    net.isa_edges = [(i, c) for i, c in net.isa_edges
                     if i not in inside and c not in inside]
    for nid in inside:
        net.objects.pop(nid, None)
        net.actions.pop(nid, None)
    new_id = net.allocate_id()
    net.actions[new_id] = ActionRecord(
        id=new_id, subject=subject, target=target, collapse_payload=payload,
    )
    if subject is not None:
        net.objects[subject].outgoing.append(new_id)
    net.objects[target].incoming.append(new_id)
    return new_id


def expand(net: Net, complex_id: NodeId) -> set:
    """Reinsert a collapsed subnet with fresh ids and remove the complex node."""
    rec = net.node(complex_id)
    payload = rec.collapse_payload
    if payload is None:
        raise NotCollapsed(f"node {complex_id} holds no collapsed subnet")
    if payload.kind == "object":
        # refuse before touching anything if links were added after collapse
        covered = {(aid, role) for aid, role, _ in payload.rewired}
        for aid in rec.outgoing:
            if (aid, "subject") not in covered:
                raise NotCollapsed(
                    f"action {aid} attached after collapse blocks expansion"
                )
        for aid in rec.incoming:
            if (aid, "target") not in covered:
                raise NotCollapsed(
                    f"action {aid} attached after collapse blocks expansion"
                )
    payload = copy.deepcopy(payload)
    idmap = {old: net.allocate_id()
             for old in sorted(payload.objects.keys() | payload.actions.keys())}

    def remap(nid):
        return idmap.get(nid, nid)

    def remap_nested(nested: CollapsePayload) -> None:
        # ids are never reused, so only references to renumbered outer
        # nodes can appear in idmap; inner-only ids pass through remap
        for obj in nested.objects.values():
            obj.outgoing = [remap(a) for a in obj.outgoing]
            obj.incoming = [remap(a) for a in obj.incoming]
            if obj.collapse_payload is not None:
                remap_nested(obj.collapse_payload)
        for act in nested.actions.values():
            if act.subject is not None:
                act.subject = remap(act.subject)
            act.target = remap(act.target)
            if act.collapse_payload is not None:
                remap_nested(act.collapse_payload)
        nested.isa = [(remap(i), remap(c)) for i, c in nested.isa]
        nested.rewired = [(remap(a), role, remap(o))
                          for a, role, o in nested.rewired]

    for old in sorted(payload.objects):
        obj = payload.objects[old]
        obj.id = idmap[old]
        obj.outgoing = [remap(a) for a in obj.outgoing]
        obj.incoming = [remap(a) for a in obj.incoming]
        if obj.collapse_payload is not None:
            remap_nested(obj.collapse_payload)
        net.objects[obj.id] = obj
    for old in sorted(payload.actions):
        act = payload.actions[old]
        act.id = idmap[old]
        if act.subject is not None:
            act.subject = remap(act.subject)
        act.target = remap(act.target)
        if act.collapse_payload is not None:
            remap_nested(act.collapse_payload)
        net.actions[act.id] = act

    if payload.kind == "object":
        # outside crossing actions point at the complex object; point them back
        for aid, role, orig in payload.rewired:
            act = net.actions.get(aid)
            if act is None:
                raise UnknownNode(f"crossing action {aid} vanished before expansion")
            if role == "subject":
                act.subject = idmap[orig]
            else:
                act.target = idmap[orig]
        del net.objects[complex_id]
    else:
        # wire restored actions back into outside objects' lists
        for old in sorted(payload.actions):
            act = net.actions[idmap[old]]
            if act.subject is not None and act.subject not in idmap.values():
                outside = net.objects.get(act.subject)
                if outside is None:
                    raise UnknownNode(f"outside object {act.subject} vanished before expansion")
                if act.id not in outside.outgoing:
                    outside.outgoing.append(act.id)
            if act.target not in idmap.values():
                outside = net.objects.get(act.target)
                if outside is None:
                    raise UnknownNode(f"outside object {act.target} vanished before expansion")
                if act.id not in outside.incoming:
                    outside.incoming.append(act.id)
        net._erase_action(complex_id)

    for inst, concept in payload.isa:
        net.isa_edges.append((remap(inst), remap(concept)))
    return set(idmap.values())


# ------------------------------------------------------------- matching

def _names(net: Net, nid: NodeId) -> frozenset:
    return frozenset(net.node(nid).properties.keys())


def _compat(pattern: Net, target: Net, p: NodeId, t: NodeId,
            exact: bool, bypass_names: bool) -> bool:
    if pattern.is_object(p) != target.is_object(t):
        return False
    if bypass_names:
        return True
    pn, tn = _names(pattern, p), _names(target, t)
    return pn == tn if exact else pn <= tn


def _consistent(pattern: Net, target: Net, mapping: dict,
                p: NodeId, t: NodeId, exact: bool) -> bool:
    if pattern.is_action(p):
        prec = pattern.actions[p]
        trec = target.actions[t]
        if prec.target in mapping and trec.target != mapping[prec.target]:
            return False
        if prec.subject is None:
            if exact and trec.subject is not None:
                return False
        else:
            if trec.subject is None:
                return False
            if prec.subject in mapping and trec.subject != mapping[prec.subject]:
                return False
    else:
        for q in pattern.actions:
            if q not in mapping:
                continue
            qrec = pattern.actions[q]
            timage = target.actions[mapping[q]]
            if qrec.target == p and timage.target != t:
                return False
            if qrec.subject == p and timage.subject != t:
                return False
    return True


def find_matches(pattern: Net, target: Net, *, anchor: tuple | None = None,
                 exact: bool = False, limit: int | None = None) -> list[dict]:
    """All injective structure-preserving mappings of pattern into target.

    `anchor` pins one pattern node to one target node, bypassing the
    property-name requirement for that pair (the caller vouches for it).
    `exact` demands equal name sets and matching blank subjects, which
    turns the check into exact-structure occurrence testing.
    """
    ids = pattern.node_ids()
    if not ids:
        return [{}]
    if anchor is not None:
        start = anchor[0]
        if start not in pattern.objects and start not in pattern.actions:
            raise UnknownNode(f"anchor {start} is not in the pattern")
    else:
        objs = [i for i in ids if pattern.is_object(i)]
        start = min(objs) if objs else min(ids)
    order = [start]
    seen = {start}
    queue = [start]
    while queue:
        nid = queue.pop(0)
        for nb in _neighbors(pattern, nid):
            if nb not in seen:
                seen.add(nb)
                order.append(nb)
                queue.append(nb)
    for nid in ids:  # disconnected leftovers fall back to full scans
        if nid not in seen:
            order.append(nid)

    results: list[dict] = []
    mapping: dict = {}
    used: set = set()
    target_ids = target.node_ids()

    def candidates(p: NodeId) -> list:
        if anchor is not None and p == anchor[0]:
            return [anchor[1]]
        pools = []
        for q in _neighbors(pattern, p):
            if q not in mapping:
                continue
            w = mapping[q]
            if target.is_object(w):
                wrec = target.objects[w]
                pools.append(set(wrec.outgoing) | set(wrec.incoming))
            else:
                wrec = target.actions[w]
                pool = {wrec.target}
                if wrec.subject is not None:
                    pool.add(wrec.subject)
                pools.append(pool)
        if not pools:
            return target_ids
        merged = set.union(*pools)
        return sorted(merged)

    def extend(k: int) -> None:
        if limit is not None and len(results) >= limit:
            return
        if k == len(order):
            results.append(dict(mapping))
            return
        p = order[k]
        bypass = anchor is not None and p == anchor[0]
        for t in candidates(p):
            if t in used:
                continue
            if (t not in target.objects) and (t not in target.actions):
                continue
            if not _compat(pattern, target, p, t, exact, bypass):
                continue
            if not _consistent(pattern, target, mapping, p, t, exact):
                continue
            mapping[p] = t
            used.add(t)
            extend(k + 1)
            del mapping[p]
            used.discard(t)

    extend(0)
    return results


def match_images(pattern: Net, target: Net, *, exact: bool = False) -> set:
    """Distinct node sets covered by matches; automorphisms collapse."""
    return {frozenset(m.values()) for m in find_matches(pattern, target, exact=exact)}


# ------------------------------------------------------- canonical form

def _rank(colors: dict) -> dict:
    ordered = sorted(set(colors.values()))
    index = {c: i for i, c in enumerate(ordered)}
    return {nid: index[c] for nid, c in colors.items()}


def _refined_classes(pattern: Net) -> dict:
    ids = pattern.node_ids()
    colors = {}
    for nid in ids:
        rec = pattern.node(nid)
        names = tuple(sorted(rec.properties))
        if isinstance(rec, ObjectRecord):
            colors[nid] = ("o", names)
        else:
            colors[nid] = ("a", names, rec.subject is None)
    ranks = _rank(colors)
    for _ in range(len(ids)):
        sig = {}
        for nid in ids:
            rec = pattern.node(nid)
            nb = []
            if isinstance(rec, ObjectRecord):
                nb.extend(("out", ranks[a]) for a in rec.outgoing)
                nb.extend(("in", ranks[a]) for a in rec.incoming)
            else:
                if rec.subject is not None:
                    nb.append(("subj", ranks[rec.subject]))
                nb.append(("tgt", ranks[rec.target]))
            sig[nid] = (ranks[nid], tuple(sorted(nb)))
        new_ranks = _rank(sig)
        if new_ranks == ranks:
            break
        ranks = new_ranks
    return ranks


def _canonical(pattern: Net) -> tuple[str, list]:
    """Canonical encoding plus the node ordering that produced it.

    Isomorphic patterns (same kinds, name sets, wiring, blank-subject
    flags) yield identical strings. Node classes come from iterative
    color refinement; the encoding is minimized over permutations
    within classes, which is exhaustive and fine at pattern scale.
    """
    ids = pattern.node_ids()
    if not ids:
        return "", []
    ranks = _refined_classes(pattern)
    classes: dict[int, list] = {}
    for nid in ids:
        classes.setdefault(ranks[nid], []).append(nid)
    class_lists = [sorted(classes[r]) for r in sorted(classes)]

    def encode(order: list) -> str:
        pos = {nid: i for i, nid in enumerate(order)}
        node_parts = []
        edge_parts = []
        for i, nid in enumerate(order):
            rec = pattern.node(nid)
            kind = "o" if isinstance(rec, ObjectRecord) else "a"
            node_parts.append(kind + "(" + ",".join(sorted(rec.properties)) + ")")
            if kind == "a":
                subj = "-" if rec.subject is None else str(pos[rec.subject])
                edge_parts.append(f"{i}:s{subj}:t{pos[rec.target]}")
        return "|".join(node_parts) + "#" + ";".join(edge_parts)

    best_key = None
    best_order = None
    for perm_combo in itertools.product(
            *[itertools.permutations(cl) for cl in class_lists]):
        order = [nid for group in perm_combo for nid in group]
        key = encode(order)
        if best_key is None or key < best_key:
            best_key = key
            best_order = order
    return best_key, best_order


def canonical_key(pattern: Net) -> str:
    return _canonical(pattern)[0]


# ------------------------------------------------------------- mining

def _connected_subsets(net: Net, max_nodes: int):
    """Every connected node subset of size <= max_nodes, exactly once."""
    ids = sorted(net.node_ids())
    nbrs = {nid: set(_neighbors(net, nid)) for nid in ids}
    results: list[frozenset] = []

    def grow(sub: list, ext: list, root: int, sub_nbh: set) -> None:
        if len(sub) >= max_nodes:
            return
        remaining = list(ext)
        while remaining:
            w = remaining.pop(0)
            fresh = {u for u in nbrs[w]
                     if u > root and u not in sub_nbh and u != w}
            new_ext = sorted(set(remaining) | fresh)
            new_sub = sub + [w]
            results.append(frozenset(new_sub))
            grow(new_sub, new_ext, root, sub_nbh | nbrs[w] | {w})

    for v in ids:
        results.append(frozenset([v]))
        ext0 = sorted(u for u in nbrs[v] if u > v)
        grow([v], ext0, v, nbrs[v] | {v})
    return results


def _pattern_closed(net: Net, nodes: frozenset) -> bool:
    """A valid pattern keeps every member action's target inside."""
    for nid in nodes:
        if net.is_action(nid) and net.actions[nid].target not in nodes:
            return False
    return True


def extract_pattern(net: Net, nodes) -> Net:
    """Value-free copy of a subnet: names and shape kept, values wildcarded.

    Subjects pointing outside the subset are blanked; bookkeeping
    property names are dropped.
    """
    nodes = set(nodes)
    pattern = Net()
    idmap: dict[NodeId, NodeId] = {}
    for nid in sorted(n for n in nodes if net.is_object(n)):
        names = sorted(set(net.objects[nid].properties) - _BOOKKEEPING)
        idmap[nid] = pattern.add_object([(n, Value.unset()) for n in names])
    for nid in sorted(n for n in nodes if net.is_action(n)):
        rec = net.actions[nid]
        names = sorted(set(rec.properties) - _BOOKKEEPING)
        subject = idmap.get(rec.subject) if rec.subject in idmap else None
        idmap[nid] = pattern.add_action(
            subject, idmap[rec.target], None, [(n, Value.unset()) for n in names]
        )
    return pattern


def _rebuild_in_order(pattern: Net, order: list) -> Net:
    """Renumber a pattern so canonical position i gets id i+1."""
    pos = {nid: i + 1 for i, nid in enumerate(order)}
    rebuilt = Net()
    for nid in sorted(order, key=lambda n: pos[n]):
        if pattern.is_object(nid):
            rec = pattern.objects[nid]
            rebuilt.objects[pos[nid]] = ObjectRecord(
                id=pos[nid],
                properties=copy.deepcopy(rec.properties),
            )
    for nid in order:
        if pattern.is_action(nid):
            rec = pattern.actions[nid]
            new = ActionRecord(
                id=pos[nid],
                subject=None if rec.subject is None else pos[rec.subject],
                target=pos[rec.target],
                properties=copy.deepcopy(rec.properties),
            )
            rebuilt.actions[pos[nid]] = new
            if new.subject is not None:
                rebuilt.objects[new.subject].outgoing.append(pos[nid])
            rebuilt.objects[new.target].incoming.append(pos[nid])
    rebuilt.next_id = len(order) + 1
    return rebuilt


@dataclass
class ConceptTemplate:
    """A value-free structural pattern with its occurrence count.

    `root` is the pattern node an instance aligns with when shaping;
    `id` is the concept's node id once registered in a net.
    """

    pattern: Net
    root: NodeId
    support: int = 0
    id: NodeId | None = None
    parent: NodeId | None = None


def mine_concepts(nets, min_support: int = 2, max_pattern_nodes: int = 4):
    """Repeated value-free patterns across the given nets.

    Returns maximal templates only, ordered by support descending and
    canonical form ascending. Support counts distinct occurrence node
    sets whose extracted structure matches the template exactly.
    """
    if min_support < 2:
        raise ValueError("min_support must be at least 2")
    if not 1 <= max_pattern_nodes <= 8:
        raise ValueError("max_pattern_nodes must be between 1 and 8")
    buckets: dict[str, dict] = {}
    for net_i, net in enumerate(nets):
        for sub in _connected_subsets(net, max_pattern_nodes):
            if not _pattern_closed(net, sub):
                continue
            pat = extract_pattern(net, sub)
            key, order = _canonical(pat)
            bucket = buckets.get(key)
            if bucket is None:
                bucket = buckets[key] = {
                    "images": set(),
                    "pattern": _rebuild_in_order(pat, order),
                }
            bucket["images"].add((net_i, sub))
    candidates = {k: b for k, b in buckets.items()
                  if len(b["images"]) >= min_support}

    keys = sorted(candidates)
    kept = []
    for key in keys:
        pat = candidates[key]["pattern"]
        size = len(pat.node_ids())
        contained = False
        for other in keys:
            if other == key:
                continue
            opat = candidates[other]["pattern"]
            if len(opat.node_ids()) < size:
                continue
            if find_matches(pat, opat, limit=1):
                contained = True
                break
        if not contained:
            kept.append(key)

    templates = []
    for key in kept:
        bucket = candidates[key]
        pattern = bucket["pattern"]
        objs = [i for i in pattern.node_ids() if pattern.is_object(i)]
        templates.append(ConceptTemplate(
            pattern=pattern,
            root=min(objs) if objs else min(pattern.node_ids()),
            support=len(bucket["images"]),
        ))
    templates.sort(key=lambda t: (-t.support, canonical_key(t.pattern)))
    return templates


@dataclass(frozen=True)
class Additions:
    """What a specialization adds: property names and attached parts."""

    properties: tuple = ()  # (pattern node id, new property name)
    parts: tuple = ()       # (attach object id, tuple of part property names)


def specialize(concept: ConceptTemplate, additions: Additions) -> ConceptTemplate:
    """Derive a narrower template; every match of the child matches the parent."""
    pattern = copy.deepcopy(concept.pattern)
    for nid, name in additions.properties:
        pattern.set_property(nid, name, Value.unset())
    for attach, part_names in additions.parts:
        part = pattern.add_object([(n, Value.unset()) for n in sorted(part_names)])
        pattern.add_action(attach, part)
    return ConceptTemplate(
        pattern=pattern, root=concept.root, support=0, parent=concept.id,
    )


def register_concept(net: Net, template: ConceptTemplate) -> NodeId:
    """Insert a template's pattern into a net as ordinary concept nodes.

    The returned root id is what is-a edges point at; support and parent
    ride along as bookkeeping properties of the root.
    """
    pattern = template.pattern
    idmap: dict[NodeId, NodeId] = {}
    for pid in sorted(p for p in pattern.node_ids() if pattern.is_object(p)):
        names = sorted(pattern.objects[pid].properties)
        idmap[pid] = net.add_object([(n, Value.unset()) for n in names])
    for pid in sorted(p for p in pattern.node_ids() if pattern.is_action(p)):
        rec = pattern.actions[pid]
        subject = idmap[rec.subject] if rec.subject is not None else None
        idmap[pid] = net.add_action(
            subject, idmap[rec.target], None,
            [(n, Value.unset()) for n in sorted(rec.properties)],
        )
    root = idmap[template.root]
    net.set_property(root, SUPPORT_PROP, Value.num(template.support))
    if template.parent is not None:
        net.set_property(root, PARENT_PROP, Value.ref(template.parent))
    template.id = root
    return root


def concept_of(net: Net, concept_id: NodeId) -> ConceptTemplate:
    """Reconstruct a template from its registered subnet.

    The pattern is the structural connected component around the root;
    is-a edges are not structural links, so instances stay outside.
    """
    if concept_id not in net.objects:
        raise UnknownConcept(f"no concept object {concept_id}")
    component = {concept_id}
    frontier = [concept_id]
    while frontier:
        nid = frontier.pop()
        for nb in _neighbors(net, nid):
            if nb not in component:
                component.add(nb)
                frontier.append(nb)
    pattern = Net()
    idmap: dict[NodeId, NodeId] = {}
    for nid in sorted(n for n in component if net.is_object(n)):
        names = sorted(set(net.objects[nid].properties) - _BOOKKEEPING)
        idmap[nid] = pattern.add_object([(n, Value.unset()) for n in names])
    for nid in sorted(n for n in component if net.is_action(n)):
        rec = net.actions[nid]
        names = sorted(set(rec.properties) - _BOOKKEEPING)
        subject = idmap[rec.subject] if rec.subject is not None else None
        idmap[nid] = pattern.add_action(
            subject, idmap[rec.target], None, [(n, Value.unset()) for n in names]
        )
    root_rec = net.objects[concept_id]
    support = 0
    parent = None
    sp = root_rec.properties.get(SUPPORT_PROP)
    if sp is not None and sp.value.kind is Kind.NUM:
        support = int(sp.value.data)
    pp = root_rec.properties.get(PARENT_PROP)
    if pp is not None and pp.value.kind is Kind.REF:
        parent = pp.value.data
    return ConceptTemplate(
        pattern=pattern, root=idmap[concept_id], support=support,
        id=concept_id, parent=parent,
    )


# ------------------------------------------------------------- shaping

def _action_bindings(pattern: Net, net: Net, mapping: dict, used: set,
                     p: NodeId, t: NodeId):
    """Pairs to bind when action p maps to t, or None if impossible.

    An action is matched as a unit with its endpoints: unmatched pattern
    endpoints are forced onto the image's endpoints, so a matched action
    can never end up wired to an unmatched part.
    """
    prec = pattern.actions[p]
    trec = net.actions[t]
    pairs = [(p, t)]
    forced: dict[NodeId, NodeId] = {}

    def bind(q: NodeId, w: NodeId) -> bool:
        if q in mapping:
            return mapping[q] == w
        if q in forced:
            return forced[q] == w
        if w in used or w in forced.values():
            return False
        if not _compat(pattern, net, q, w, exact=False, bypass_names=False):
            return False
        forced[q] = w
        pairs.append((q, w))
        return True

    if not bind(prec.target, trec.target):
        return None
    if prec.subject is not None:
        if trec.subject is None:
            return None
        if not bind(prec.subject, trec.subject):
            return None
    return pairs


def _max_anchored_match(pattern: Net, root: NodeId, net: Net,
                        instance: NodeId) -> dict:
    """Largest partial match of the pattern with root pinned to instance.

    Backtracking over pattern nodes in breadth-first order from the
    root; each node may be skipped, so the search maximizes the number
    of matched nodes. Deterministic: candidates are tried in id order
    and skipping is tried last.
    """
    order = []
    seen = {root}
    queue = [root]
    while queue:
        nid = queue.pop(0)
        order.append(nid)
        for nb in _neighbors(pattern, nid):
            if nb not in seen:
                seen.add(nb)
                queue.append(nb)
    for nid in pattern.node_ids():
        if nid not in seen:
            order.append(nid)

    best: dict = {}

    def dfs(k: int, mapping: dict, used: set) -> None:
        nonlocal best
        if k == len(order):
            if len(mapping) > len(best):
                best = dict(mapping)
            return
        p = order[k]
        if p in mapping:
            dfs(k + 1, mapping, used)
            return
        pool: set = set()
        for q in _neighbors(pattern, p):
            if q not in mapping:
                continue
            w = mapping[q]
            if net.is_object(w):
                wrec = net.objects[w]
                pool |= set(wrec.outgoing) | set(wrec.incoming)
            else:
                wrec = net.actions[w]
                pool.add(wrec.target)
                if wrec.subject is not None:
                    pool.add(wrec.subject)
        for t in sorted(pool):
            if t in used:
                continue
            if not _compat(pattern, net, p, t, exact=False, bypass_names=False):
                continue
            if not _consistent(pattern, net, mapping, p, t, exact=False):
                continue
            if pattern.is_action(p):
                pairs = _action_bindings(pattern, net, mapping, used, p, t)
                if pairs is None:
                    continue
            else:
                pairs = [(p, t)]
            for q, w in pairs:
                mapping[q] = w
                used.add(w)
            dfs(k + 1, mapping, used)
            for q, w in pairs:
                del mapping[q]
                used.discard(w)
        dfs(k + 1, mapping, used)  # skipping p is always an option

    dfs(0, {root: instance}, {instance})
    if not best:
        best = {root: instance}
    return best


def shape(net: Net, instance: NodeId, concept) -> list:
    """Give an instance the structure its concept promises.

    Pattern nodes with no counterpart around the instance are created
    with inferred provenance and unset values; already present structure
    is never touched, so shaping twice creates nothing.
    """
    if isinstance(concept, int):
        concept = concept_of(net, concept)
    if concept.id is None or (instance, concept.id) not in net.isa_edges:
        raise UnknownConcept(
            f"no is-a edge from {instance} to concept {concept.id}"
        )
    if instance not in net.objects:
        raise UnknownNode(f"no object {instance}")
    pattern = concept.pattern
    mapping = _max_anchored_match(pattern, concept.root, net, instance)
    created: list[NodeId] = []
    for pid in sorted(p for p in pattern.node_ids()
                      if pattern.is_object(p) and p not in mapping):
        names = sorted(pattern.objects[pid].properties)
        nid = net.add_object([(n, Value.unset()) for n in names],
                             provenance=Provenance.INFERRED)
        mapping[pid] = nid
        created.append(nid)
    for pid in sorted(p for p in pattern.node_ids()
                      if pattern.is_action(p) and p not in mapping):
        rec = pattern.actions[pid]
        subject = mapping[rec.subject] if rec.subject is not None else None
        names = sorted(rec.properties)
        nid = net.add_action(subject, mapping[rec.target], None,
                             [(n, Value.unset()) for n in names],
                             provenance=Provenance.INFERRED)
        mapping[pid] = nid
        created.append(nid)
    return created


# ------------------------------------------------------------- queries

class Answer(enum.Enum):
    YES_ASSERTED = "yes-asserted"
    YES_INFERRED = "yes-inferred"
    UNKNOWN = "unknown"


_ANSWER_RANK = {Answer.UNKNOWN: 0, Answer.YES_INFERRED: 1, Answer.YES_ASSERTED: 2}

_OPS = ("==", "!=", "<=", ">=", "<", ">")


@dataclass(frozen=True)
class Predicate:
    node: NodeId
    name: str
    op: str          # comparison operator or "present"
    value: Value | None = None


@dataclass(frozen=True)
class Fragment:
    """A small anchored pattern plus optional value predicates."""

    pattern: Net
    root: NodeId
    predicates: tuple = ()
    source: str = ""


def property_fragment(name: str, op: str | None = None,
                      value: Value | None = None, source: str = "") -> Fragment:
    pattern = Net()
    root = pattern.add_object([])
    pred = Predicate(root, name, op or "present", value)
    return Fragment(pattern, root, (pred,), source)


def part_fragment(part_names, source: str = "") -> Fragment:
    pattern = Net()
    root = pattern.add_object([])
    part = pattern.add_object([(n, Value.unset()) for n in sorted(part_names)])
    pattern.add_action(root, part)
    return Fragment(pattern, root, (), source)


_NAME_TOKEN = re.compile(r"[a-z][a-z0-9_-]*\Z")
_NUM_TOKEN = re.compile(r"-?[0-9]+(\.[0-9]+)?\Z")


def parse_literal(tok: str) -> Value:
    tok = tok.strip()
    if not tok:
        raise MalformedCondition("empty literal")
    if tok == "true":
        return Value.truth(True)
    if tok == "false":
        return Value.truth(False)
    if _NUM_TOKEN.match(tok):
        return Value.num(float(tok))
    if tok.startswith('"') and tok.endswith('"') and len(tok) >= 2:
        return Value.text(tok[1:-1])
    return Value.text(tok)


def parse_fragment(text: str) -> Fragment:
    """Parse the fragment mini-language.

    Forms: `name` (property present), `name OP literal` (value
    predicate), `has name` (connected part carrying that name).
    """
    src = text.strip()
    if src.startswith("has ") or src.startswith("has\t"):
        name = src[4:].strip()
        if not _NAME_TOKEN.match(name):
            raise MalformedCondition(f"bad part name {name!r}")
        return part_fragment((name,), source=src)
    for op in _OPS:
        if op in src:
            name, lit = src.split(op, 1)
            name = name.strip()
            if not _NAME_TOKEN.match(name):
                raise MalformedCondition(f"bad property name {name!r}")
            return property_fragment(name, op, parse_literal(lit), source=src)
    if not _NAME_TOKEN.match(src):
        raise MalformedCondition(f"bad fragment {text!r}")
    return property_fragment(src, source=src)


def _compare(op: str, left: Value, right: Value) -> bool:
    if op == "==":
        return values_equal(left, right)
    if op == "!=":
        return not values_equal(left, right)
    if left.kind is not Kind.NUM or right.kind is not Kind.NUM:
        return False
    table = {"<": left.data < right.data, ">": left.data > right.data,
             "<=": left.data <= right.data, ">=": left.data >= right.data}
    return table[op]


def check_predicate(net: Net, pred: Predicate, image: NodeId):
    """True, False, or None when the referenced property is unset/absent."""
    rec = net.node(image)
    prop = rec.properties.get(pred.name)
    if pred.op == "present":
        if prop is None:
            return None
        inferred = prop.provenance is Provenance.INFERRED
        return True, inferred
    if prop is None or prop.value.is_unset:
        return None
    ok = _compare(pred.op, prop.value, pred.value)
    inferred = prop.provenance is Provenance.INFERRED
    return ok, inferred


def _match_fragment(net: Net, instance: NodeId, frag: Fragment) -> Answer:
    try:
        matches = find_matches(frag.pattern, net, anchor=(frag.root, instance))
    except UnknownNode:
        return Answer.UNKNOWN
    best = Answer.UNKNOWN
    for m in matches:
        witness = True
        inferred = any(net.node(t).provenance is Provenance.INFERRED
                       for t in m.values())
        for pred in frag.predicates:
            res = check_predicate(net, pred, m[pred.node])
            if res is None or res[0] is not True:
                witness = False
                break
            inferred = inferred or res[1]
        if not witness:
            continue
        if not inferred:
            return Answer.YES_ASSERTED
        best = Answer.YES_INFERRED
    return best


def query_has(net: Net, instance: NodeId, fragment) -> Answer:
    """Tri-state structural query with shaping on demand.

    A string fragment uses the mini-language; a bare name is tried both
    as a direct property and as a connected part. When nothing matches
    but the instance carries is-a edges, shaping runs once and the
    query retries.
    """
    if instance not in net.objects:
        return Answer.UNKNOWN
    if isinstance(fragment, str):
        src = fragment.strip()
        if not src.startswith("has ") and not any(op in src for op in _OPS) \
                and _NAME_TOKEN.match(src):
            frags = [property_fragment(src, source=src),
                     part_fragment((src,), source=src)]
        else:
            frags = [parse_fragment(src)]
    else:
        frags = [fragment]

    def best_answer() -> Answer:
        best = Answer.UNKNOWN
        for frag in frags:
            ans = _match_fragment(net, instance, frag)
            if _ANSWER_RANK[ans] > _ANSWER_RANK[best]:
                best = ans
        return best

    answer = best_answer()
    if answer is Answer.UNKNOWN:
        created_any = False
        for inst, cid in list(net.isa_edges):
            if inst != instance:
                continue
            try:
                created_any |= bool(shape(net, instance, cid))
            except KrnError:
                continue
        if created_any:
            answer = best_answer()
    return answer
