"""The self object: goals, anti-goals, and the sense log.

The self is an ordinary object in the net. What makes it special is
bookkeeping layered on top: conditions it wants true (goals) or false
(anti-goals), and an append-only log of every sensed input, which is
the system's only tie to reality. Thinking is triggered by callers;
there is no autonomous loop.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import Net, NodeId, PropertyChange, SensorSignal, Value
from .errors import MalformedCondition
from .reasoning import Fragment, check_predicate, find_matches, parse_fragment
from .sim import Snapshot, diff


@dataclass
class Goal:
    id: int
    polarity: str       # "goal" | "antigoal"
    anchor: NodeId
    fragment: Fragment
    source: str


class SelfModel:
    """Attaches to a net; the net reports every ingested signal here."""

    def __init__(self, net: Net, self_node: NodeId | None = None):
        self.net = net
        if self_node is None:
            self_node = net.add_object([])
        elif self_node not in net.objects:
            raise MalformedCondition(f"self node {self_node} is not a live object")
        self.self_node = self_node
        self.goals: list[Goal] = []
        self.sense_log: list[tuple[int, NodeId, str, SensorSignal]] = []
        self._next_goal = 1
        net.agent = self

    def record_sense(self, tick: int, node: NodeId, name: str,
                     signal: SensorSignal) -> None:
        self.sense_log.append((tick, node, name, signal))


def define_goal(model: SelfModel, polarity: str, anchor: NodeId,
                condition: str) -> int:
    """Store a goal or anti-goal; duplicates are allowed and kept distinct.

    The condition uses the reasoning fragment mini-language, evaluated
    against the anchor node. Goals also land on the self object as
    `goal:<id>` / `antigoal:<id>` text properties so they persist.
    """
    if polarity not in ("goal", "antigoal"):
        raise MalformedCondition(f"bad polarity {polarity!r}")
    fragment = parse_fragment(condition)
    gid = model._next_goal
    model._next_goal += 1
    goal = Goal(gid, polarity, anchor, fragment, condition.strip())
    model.goals.append(goal)
    model.net.set_property(
        model.self_node, f"{polarity}:{gid}",
        Value.text(f"{anchor} {goal.source}"),
    )
    return gid


def _condition_state(net: Net, anchor: NodeId, fragment: Fragment):
    """Three-valued condition check: True, False, or None (undetermined).

    Referenced properties that are absent or unset make the condition
    undetermined; missing structure makes it false.
    """
    if anchor not in net.objects and anchor not in net.actions:
        return None
    try:
        matches = find_matches(fragment.pattern, net, anchor=(fragment.root, anchor))
    except Exception:
        return None
    if not matches:
        return False
    saw_undetermined = False
    for m in matches:
        verdict = True
        for pred in fragment.predicates:
            res = check_predicate(net, pred, m[pred.node])
            if res is None:
                verdict = None
                break
            if res[0] is not True:
                verdict = False
                break
        if verdict is True:
            return True
        if verdict is None:
            saw_undetermined = True
    return None if saw_undetermined else False


def evaluate_goals(model: SelfModel, net: Net) -> list[tuple[int, str]]:
    """Status per goal: satisfied, violated, or undetermined.

    A goal is satisfied when its condition holds; an anti-goal is
    violated when its condition holds.
    """
    results = []
    for goal in model.goals:
        state = _condition_state(net, goal.anchor, goal.fragment)
        if state is None:
            status = "undetermined"
        elif goal.polarity == "goal":
            status = "satisfied" if state else "violated"
        else:
            status = "violated" if state else "satisfied"
        results.append((goal.id, status))
    return results


def compare_with_reality(model: SelfModel, predicted: Snapshot,
                         sensed: Snapshot) -> list[PropertyChange]:
    """Discrepancies between prediction and reality, where reality spoke.

    Reality is authoritative only for properties present in the sensed
    snapshot; everything else is left uncontradicted.
    """
    return [c for c in diff(predicted, sensed) if (c.node, c.name) in sensed.state]


def reality_snapshot(model: SelfModel) -> Snapshot:
    """A snapshot built purely from the sense log: last signal per slot."""
    state: dict[tuple[NodeId, str], Value] = {}
    for _tick, node, name, signal in model.sense_log:
        state[(node, name)] = Value.signal(signal)
    return Snapshot(model.net.next_tick(), state)
