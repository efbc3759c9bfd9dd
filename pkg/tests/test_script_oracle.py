"""Interpreter results against the independent reference evaluator."""

import copy
import random

from krn import ExecContext, Net, Value, apply_undo, execute, nets_equal, parse
from krn.core import Kind
from krn.errors import DivisionByZero, ScriptRuntimeError, TypeMismatch

from oracle_eval import OracleError, gen_expr, gen_safe_script, oracle_eval


def _seeded_net():
    """Net with typed properties on all three roles, plus the environment map."""
    net = Net()
    subject = net.add_object([
        ("count", Value.num(4)), ("level", Value.num(-2.5)),
        ("armed", Value.truth(True)), ("tag", Value.text("green")),
    ])
    target = net.add_object([
        ("position", Value.num(0)), ("mass", Value.num(12.25)),
        ("ready", Value.truth(False)), ("colour", Value.text("black")),
    ])
    action = net.add_action(subject, target, "")
    net.set_property(action, "speed", Value.num(3))
    net.set_property(action, "looping", Value.truth(False))
    env = {}
    for role, nid in (("subject", subject), ("object", target), ("self", action)):
        for name, prop in net.node(nid).properties.items():
            kind = prop.value.kind.value
            env[(role, name)] = (kind, prop.value.data)
    env_names = {
        "num": [(r, n) for (r, n), (k, _) in env.items() if k == "num"],
        "bool": [(r, n) for (r, n), (k, _) in env.items() if k == "bool"],
        "text": [(r, n) for (r, n), (k, _) in env.items() if k == "text"],
    }
    return net, subject, target, action, env, env_names


def _interp_outcome(net, subject, target, action, source):
    ast = parse(f"set object.probe-result = {source};")
    try:
        execute(ast, ExecContext(net, target, subject, action))
    except DivisionByZero:
        return ("error", "divzero")
    except TypeMismatch:
        return ("error", "type")
    except ScriptRuntimeError as exc:
        return ("error", type(exc).__name__)
    value = net.get_property(target, "probe-result")
    net.erase_property(target, "probe-result")
    if value.kind is Kind.NUM:
        return ("num", value.data)
    if value.kind is Kind.BOOL:
        return ("bool", value.data)
    if value.kind is Kind.TEXT:
        return ("text", value.data)
    return ("other", value)


def _oracle_outcome(source, env):
    ast = parse(f"set object.probe-result = {source};")
    expr = ast.statements[0].expr
    try:
        kind, val = oracle_eval(expr, env)
    except OracleError as exc:
        return ("error", exc.kind)
    return (kind, val)


def test_thousand_random_expressions_match_reference_exactly():
    rng = random.Random(90125)
    net, subject, target, action, env, env_names = _seeded_net()
    checked = 0
    for i in range(1000):
        want = rng.choice(["num", "num", "bool", "bool", "text"])
        source = gen_expr(rng, want, rng.randrange(1, 5), env_names)
        got = _interp_outcome(net, subject, target, action, source)
        expected = _oracle_outcome(source, env)
        assert got == expected, f"expr #{i}: {source!r}: {got} != {expected}"
        if got[0] == "num":
            # exact double equality, not approximate
            assert (got[1] == expected[1]) and (repr(got[1]) == repr(expected[1]))
        checked += 1
    assert checked == 1000


def test_hundred_random_scripts_satisfy_undo_property():
    rng = random.Random(5150)
    for i in range(100):
        net, subject, target, action, env, env_names = _seeded_net()
        source = gen_safe_script(rng, env_names)
        ast = parse(source)
        before = copy.deepcopy(net)
        changes = execute(ast, ExecContext(net, target, subject, action))
        apply_undo(net, changes)
        assert nets_equal(net, before), f"script #{i} undo failed:\n{source}"


def test_random_scripts_touch_only_named_properties():
    rng = random.Random(777)
    for _ in range(50):
        net, subject, target, action, env, env_names = _seeded_net()
        source = gen_safe_script(rng, env_names)
        ast = parse(source)
        before = {
            (nid, name): prop.value
            for nid in net.node_ids()
            for name, prop in net.node(nid).properties.items()
        }
        changes = execute(ast, ExecContext(net, target, subject, action))
        touched = {(c.node, c.name) for c in changes}
        after = {
            (nid, name): prop.value
            for nid in net.node_ids()
            for name, prop in net.node(nid).properties.items()
        }
        for key in before.keys() | after.keys():
            if before.get(key) != after.get(key):
                assert key in touched
