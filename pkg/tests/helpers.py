"""Shared fixture builders and random generators for the test suite."""

from __future__ import annotations

import random

from krn import (
    ConceptTemplate,
    Lexicon,
    Net,
    Provenance,
    SensorAddress,
    SensorSignal,
    Value,
    register_concept,
)


# ------------------------------------------------------------ vignettes

def wall_net():
    """A green wall and somebody painting it black."""
    net = Net()
    man = net.add_object([])
    wall = net.add_object([("colour", Value.text("green"))])
    paint = net.add_action(man, wall, 'set object.colour = "black";')
    return net, man, wall, paint


def person_net(leg_length: float, arm_length: float) -> Net:
    """A person with a head, arms, and legs; part sizes vary per person."""
    net = Net()
    person = net.add_object([])
    head = net.add_object([("head", Value.truth(True))])
    arms = net.add_object([("arm", Value.truth(True)), ("length", Value.num(arm_length))])
    legs = net.add_object([("leg", Value.truth(True)), ("length", Value.num(leg_length))])
    net.add_action(person, head)
    net.add_action(person, arms)
    net.add_action(person, legs)
    return net


def person_pattern() -> tuple[Net, int]:
    """The value-free person structure; returns (pattern, root id)."""
    pattern = Net()
    person = pattern.add_object([])
    head = pattern.add_object([("head", Value.unset())])
    arms = pattern.add_object([("arm", Value.unset()), ("length", Value.unset())])
    legs = pattern.add_object([("leg", Value.unset()), ("length", Value.unset())])
    pattern.add_action(person, head)
    pattern.add_action(person, arms)
    pattern.add_action(person, legs)
    return pattern, person


def peter_net():
    """A bare Peter plus a registered man concept; returns (net, peter, concept id)."""
    net = Net()
    peter = net.add_object([])
    pattern, root = person_pattern()
    template = ConceptTemplate(pattern=pattern, root=root, support=2)
    concept_id = register_concept(net, template)
    net.add_isa(peter, concept_id)
    return net, peter, concept_id


def tv_net():
    """A person wired to a 7-node television subnet through press and show.

    Returns (net, inside set, press id, show id, person id).
    """
    net = Net()
    person = net.add_object([("alive", Value.truth(True))])
    button = net.add_object([("button", Value.truth(True))])
    circuit1 = net.add_object([("circuit", Value.num(1))])
    circuit2 = net.add_object([("circuit", Value.num(2))])
    screen = net.add_object([("screen", Value.truth(True))])
    conducts = net.add_action(button, circuit1)
    powers = net.add_action(circuit1, circuit2)
    drives = net.add_action(circuit2, screen)
    press = net.add_action(person, button)
    show = net.add_action(screen, person)
    inside = {button, circuit1, circuit2, screen, conducts, powers, drives}
    return net, inside, press, show, person


def chameleon_signals():
    grey = SensorSignal(SensorAddress.of("eye", "ch1"), b"\x80\x80\x80")
    green = SensorSignal(SensorAddress.of("eye", "ch1"), b"\x00\xff\x00")
    return grey, green


# ------------------------------------------------------- random material

_WORDS = [
    "colour", "position", "length", "width", "mass", "shade", "grip",
    "edge", "leg", "arm", "head", "wing", "tail", "speed", "warmth",
]

_TEXT_POOL = [
    "green", "black", "wood", "leather", 'quo"te', "multi\nline",
    "tab\tseparated", "back\\slash", "émeraude", "緑", "",
]


def rand_name(rng: random.Random, used=None) -> str:
    while True:
        name = rng.choice(_WORDS)
        if rng.random() < 0.4:
            name = f"{name}-{rng.randrange(100)}"
        if used is None or name not in used:
            return name


def rand_value(rng: random.Random, net: Net) -> Value:
    roll = rng.random()
    if roll < 0.35:
        return Value.num(round(rng.uniform(-100, 100), 3))
    if roll < 0.6:
        return Value.text(rng.choice(_TEXT_POOL))
    if roll < 0.75:
        return Value.truth(rng.random() < 0.5)
    if roll < 0.85 and net.objects:
        return Value.ref(rng.choice(sorted(net.objects)))
    if roll < 0.95:
        segs = tuple(rng.choice(["skin", "eye", "ear themal", "p7"])
                     for _ in range(rng.randrange(1, 4)))
        payload = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 6)))
        return Value.signal(SensorSignal(SensorAddress(segs), payload,
                                         rng.randrange(1000)))
    return Value.unset()


_SCRIPT_POOL = [
    'set object.colour = "black";',
    "set object.position = 1 + 2 * 3;",
    'if object.ready == true { set object.state = "go"; } else { set object.state = "wait"; }',
    "set self.speed = 2.5;\nset object.mass = 10 / 4;",
    "",
    "# only a comment\n",
]


def random_net(rng: random.Random, *, max_objects: int = 8,
               with_labels: bool = True) -> tuple[Net, Lexicon]:
    """A randomized net exercising every serializable feature."""
    net = Net()
    lexicon = Lexicon()
    n_objects = rng.randrange(1, max_objects + 1)
    for _ in range(n_objects):
        names: set[str] = set()
        props = []
        for _ in range(rng.randrange(0, 4)):
            name = rand_name(rng, names)
            names.add(name)
            props.append((name, rand_value(rng, net)))
        prov = Provenance.INFERRED if rng.random() < 0.15 else Provenance.ASSERTED
        net.add_object(props, provenance=prov)
    objects = sorted(net.objects)
    for _ in range(rng.randrange(0, max(2, n_objects))):
        target = rng.choice(objects)
        subject = rng.choice(objects) if rng.random() < 0.7 else None
        script = rng.choice(_SCRIPT_POOL) if rng.random() < 0.6 else None
        props = []
        if rng.random() < 0.3:
            props.append((rand_name(rng), rand_value(rng, net)))
        net.add_action(subject, target, script, props)
    # sensed signals through the public path
    for _ in range(rng.randrange(0, 3)):
        oid = rng.choice(objects)
        segs = tuple(rng.choice(["skin", "eye", "nerve-9"]) for _ in range(2))
        net.ingest_signal(oid, rand_name(rng),
                          SensorSignal(SensorAddress(segs), bytes([rng.randrange(256)])))
    # a goal-style reserved property
    if rng.random() < 0.4:
        net.set_property(rng.choice(objects), "goal:1",
                         Value.text("1 colour == black"))
    # occasional erasure so ids are not contiguous
    if len(net.objects) > 2 and rng.random() < 0.5:
        victim = rng.choice(sorted(net.objects))
        net.erase_node(victim)
    live = sorted(net.objects)
    for a, b in zip(live, live[1:]):
        if rng.random() < 0.3:
            net.add_isa(a, b)
    if with_labels and live:
        for _ in range(rng.randrange(0, 4)):
            node = rng.choice(live)
            lang = rng.choice(["en", "fr", "de", "zh-Hant"])
            lexicon.set_label(node, lang, rng.choice(_TEXT_POOL) or "thing")
    return net, lexicon
