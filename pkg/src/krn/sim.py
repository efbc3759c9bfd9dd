"""Inference by modelling: run actions, snapshot states, detect change.

Change detection is deliberately memoryful: it is a pure function of
two snapshots, so without a remembered earlier state there is nothing
to compare against. Snapshots capture only hydrated values and never
trigger hydration, preserving the store's laziness guarantees.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .core import ChangeSet, Net, NodeId, PropertyChange, PropLoad, Value
from .errors import BatchError, FormatError, KrnError, UnknownNode, UnknownScript
from .lexicon import Lexicon
from .script import ExecContext, execute

# The two change classes named by the model; extend via a verb table file.
DEFAULT_VERBS = {
    "position": "moving",
    "colour": "changing-colour",
}


@dataclass(frozen=True)
class Snapshot:
    """Property state at one tick. Treated as immutable once captured."""

    tick: int
    state: dict[tuple[NodeId, str], Value]


class Timeline:
    def __init__(self):
        self.snapshots: list[Snapshot] = []

    def append(self, snap: Snapshot) -> None:
        if self.snapshots and snap.tick <= self.snapshots[-1].tick:
            raise ValueError("snapshot ticks must strictly increase")
        self.snapshots.append(snap)

    def latest(self) -> Snapshot | None:
        return self.snapshots[-1] if self.snapshots else None

    def by_tick(self, tick: int) -> Snapshot:
        for snap in self.snapshots:
            if snap.tick == tick:
                return snap
        raise KrnError(f"no snapshot at tick {tick}")

    def __len__(self) -> int:
        return len(self.snapshots)


def timeline_of(net: Net) -> Timeline:
    if net.timeline is None:
        net.timeline = Timeline()
    return net.timeline


def snapshot(net: Net, timeline: Timeline | None = None) -> Snapshot:
    """Capture all hydrated property values at a fresh tick."""
    state: dict[tuple[NodeId, str], Value] = {}
    for nid in net.node_ids():
        rec = net.node(nid)
        for name, prop in rec.properties.items():
            if prop.load_state is PropLoad.HYDRATED:
                state[(nid, name)] = prop.value
    snap = Snapshot(net.next_tick(), state)
    if timeline is None:
        timeline = timeline_of(net)
    timeline.append(snap)
    return snap


def run_action(net: Net, action_id: NodeId, store=None) -> ChangeSet:
    """Execute one action's script with its own endpoint bindings.

    A stubbed script is hydrated through the given store handle first.
    Snapshots are taken before and after and appended to the net's
    timeline.
    """
    act = net.actions.get(action_id)
    if act is None:
        raise UnknownNode(f"no action {action_id}")
    if act.script.state == "stub":
        if store is None:
            raise UnknownScript(f"action {action_id} script is stubbed and no store given")
        store.hydrate_script(action_id, net)
    if act.script.state != "hydrated":
        raise UnknownScript(f"action {action_id} has no script")
    ast = act.script.ast
    if ast is None:
        from .script import parse

        ast = parse(act.script.text)
        act.script.ast = ast
    tl = timeline_of(net)
    snapshot(net, tl)
    changes = execute(ast, ExecContext(
        net=net, target=act.target, subject=act.subject, self_node=action_id,
    ))
    snapshot(net, tl)
    return changes


def run_pending(net: Net, order: list[NodeId], store=None) -> list[ChangeSet]:
    """Execute actions in the given order, snapshotting around the batch.

    There is no rollback: on failure the completed change sets ride on
    the raised BatchError and earlier effects remain applied.
    """
    tl = timeline_of(net)
    snapshot(net, tl)
    results: list[ChangeSet] = []
    for i, aid in enumerate(order):
        try:
            results.append(run_action(net, aid, store))
        except KrnError as exc:
            raise BatchError(i, exc, results) from exc
    snapshot(net, tl)
    return results


def diff(a: Snapshot, b: Snapshot) -> list[PropertyChange]:
    """Changes from a to b, including appearances and disappearances."""
    changes: list[PropertyChange] = []
    for key in sorted(a.state.keys() | b.state.keys()):
        before = a.state.get(key)
        after = b.state.get(key)
        if before != after:
            changes.append(PropertyChange(key[0], key[1], before, after))
    return changes


def load_verb_table(path: str) -> dict[str, str]:
    """Read `VERB <property-name> <verb-key>` lines on top of the defaults."""
    table = dict(DEFAULT_VERBS)
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3 or parts[0] != "VERB":
                raise FormatError(f"bad verb line {line!r}", lineno)
            table[parts[1]] = parts[2]
    return table


def verb_table_from_env() -> dict[str, str]:
    path = os.environ.get("KRN_VERB_TABLE")
    if path:
        return load_verb_table(path)
    return dict(DEFAULT_VERBS)


def classify_change(
    change: PropertyChange,
    lexicon: Lexicon | None = None,
    lang: str | None = None,
    table: dict[str, str] | None = None,
) -> str | None:
    """Name the change class for a property, if the verb table knows one.

    The verb key itself is the English rendering. When a lexicon and a
    language are given and exactly one node carries the key as its
    English label, that node's label in the requested language is used
    instead; with no labels the key is returned unchanged.
    """
    if table is None:
        table = DEFAULT_VERBS
    key = table.get(change.name)
    if key is None:
        return None
    if lexicon is not None and lang is not None:
        nodes = lexicon.lookup("en", key)
        if len(nodes) == 1:
            from .errors import NoLabel

            try:
                text, _ = lexicon.label_of(next(iter(nodes)), lang)
                return text
            except NoLabel:
                pass
    return key
