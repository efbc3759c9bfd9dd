import random

import pytest

from krn import (
    Additions,
    Net,
    Value,
    canonical_key,
    find_matches,
    match_images,
    mine_concepts,
    register_concept,
    specialize,
)
from krn.errors import BipartiteViolation
from krn.reasoning import _connected_subsets, _pattern_closed, extract_pattern

from helpers import person_net, random_net
from oracle_mining import oracle_mine, same_result


def test_mike_jack_single_maximal_template():
    mike = person_net(leg_length=80, arm_length=70)
    jack = person_net(leg_length=95, arm_length=77)
    templates = mine_concepts([mike, jack], min_support=2, max_pattern_nodes=7)
    assert len(templates) == 1
    template = templates[0]
    assert template.support == 2
    assert len(template.pattern.node_ids()) == 7
    # the template matches each person net (value-free)
    assert find_matches(template.pattern, mike, limit=1)
    assert find_matches(template.pattern, jack, limit=1)


def test_single_net_without_repetition_yields_nothing():
    net = Net()
    a = net.add_object([("seat", Value.text("wood"))])
    b = net.add_object([("wing", Value.num(2))])
    net.add_action(a, b)
    assert mine_concepts([net], min_support=2, max_pattern_nodes=3) == []


def test_two_identical_chairs_in_one_net():
    net = Net()
    for colour in ("red", "blue"):
        net.add_object([("seat", Value.text(colour)), ("legs", Value.num(4))])
    net.add_object([("unrelated", Value.truth(True))])
    templates = mine_concepts([net], min_support=2, max_pattern_nodes=2)
    assert len(templates) == 1
    chair = templates[0]
    assert chair.support == 2
    names = set(chair.pattern.objects[chair.root].properties)
    assert names == {"seat", "legs"}
    assert same_result(templates, oracle_mine([net], 2, 2))


def test_miner_agrees_with_oracle_on_mike_jack():
    mike = person_net(80, 70)
    jack = person_net(95, 77)
    templates = mine_concepts([mike, jack], min_support=2, max_pattern_nodes=4)
    oracle = oracle_mine([mike, jack], 2, 4)
    assert same_result(templates, oracle)


def test_miner_agrees_with_oracle_on_random_nets():
    rng = random.Random(31337)
    cases = 0
    for _ in range(8):
        nets = []
        for _ in range(rng.randrange(1, 3)):
            net, _ = random_net(rng, max_objects=5, with_labels=False)
            if len(net.node_ids()) <= 12:
                nets.append(net)
        if not nets:
            continue
        templates = mine_concepts(nets, min_support=2, max_pattern_nodes=3)
        oracle = oracle_mine(nets, 2, 3)
        assert same_result(templates, oracle)
        cases += 1
    assert cases >= 5


def test_mining_deterministic_order():
    mike = person_net(80, 70)
    jack = person_net(95, 77)
    first = mine_concepts([mike, jack], 2, 3)
    second = mine_concepts([mike, jack], 2, 3)
    assert [canonical_key(t.pattern) for t in first] == \
        [canonical_key(t.pattern) for t in second]
    assert [t.support for t in first] == [t.support for t in second]
    supports = [t.support for t in first]
    assert supports == sorted(supports, reverse=True)


def test_mining_parameter_validation():
    with pytest.raises(ValueError):
        mine_concepts([], min_support=1)
    with pytest.raises(ValueError):
        mine_concepts([], min_support=2, max_pattern_nodes=9)


def test_connected_subset_enumeration_is_exact():
    net = person_net(80, 70)
    subsets = _connected_subsets(net, 3)
    assert len(subsets) == len(set(subsets))
    # cross-check with itertools enumeration
    import itertools

    ids = net.node_ids()
    expected = set()
    for size in (1, 2, 3):
        for combo in itertools.combinations(ids, size):
            sub = frozenset(combo)
            seen = {min(sub)}
            frontier = [min(sub)]
            while frontier:
                nid = frontier.pop()
                rec = net.node(nid)
                if net.is_object(nid):
                    nbrs = set(rec.outgoing) | set(rec.incoming)
                else:
                    nbrs = {rec.target} | ({rec.subject} if rec.subject is not None else set())
                for nb in nbrs & sub:
                    if nb not in seen:
                        seen.add(nb)
                        frontier.append(nb)
            if seen == sub:
                expected.add(sub)
    assert set(subsets) == expected


def test_canonical_key_invariant_under_relabeling():
    net1 = person_net(80, 70)
    # same structure built in a different id order
    net2 = Net()
    legs = net2.add_object([("leg", Value.truth(True)), ("length", Value.num(1))])
    arms = net2.add_object([("arm", Value.truth(True)), ("length", Value.num(2))])
    head = net2.add_object([("head", Value.truth(True))])
    person = net2.add_object([])
    net2.add_action(person, legs)
    net2.add_action(person, head)
    net2.add_action(person, arms)
    p1 = extract_pattern(net1, set(net1.node_ids()))
    p2 = extract_pattern(net2, set(net2.node_ids()))
    assert canonical_key(p1) == canonical_key(p2)
    # and a genuinely different structure gets a different key
    net3 = person_net(80, 70)
    net3.erase_node(2)  # drop the head
    p3 = extract_pattern(net3, set(net3.node_ids()))
    assert canonical_key(p1) != canonical_key(p3)


def test_blanked_subject_patterns_close_over_targets():
    net = person_net(80, 70)
    head_action = min(net.actions)
    head = net.actions[head_action].target
    sub = frozenset({head_action, head})
    assert _pattern_closed(net, sub)
    pattern = extract_pattern(net, sub)
    aid = next(iter(pattern.actions))
    assert pattern.actions[aid].subject is None
    # subject-less pattern action still matches the subjected occurrence
    assert find_matches(pattern, net, limit=1)
    # but an action subset without its target is not a valid pattern
    assert not _pattern_closed(net, frozenset({head_action}))


def test_exact_matching_pins_names_and_blank_subjects():
    net = Net()
    wall = net.add_object([("colour", Value.text("g")), ("height", Value.num(2))])
    net.add_action(None, wall)
    subjected = Net()
    painter = subjected.add_object([])
    wall2 = subjected.add_object([("colour", Value.text("b")), ("height", Value.num(3))])
    subjected.add_action(painter, wall2)

    loose = Net()
    r = loose.add_object([("colour", Value.unset())])
    loose.add_action(None, r)
    # loose semantics: extra names and present subjects are fine
    assert find_matches(loose, net, limit=1)
    assert find_matches(loose, subjected, limit=1)
    # exact semantics: name sets must be equal and blanks must stay blank
    assert find_matches(loose, net, exact=True) == []
    exact_pattern = Net()
    r2 = exact_pattern.add_object([("colour", Value.unset()), ("height", Value.unset())])
    exact_pattern.add_action(None, r2)
    assert find_matches(exact_pattern, net, exact=True)
    assert find_matches(exact_pattern, subjected, exact=True) == []


def test_specialize_adds_property_and_subsumes():
    mike = person_net(80, 70)
    jack = person_net(95, 77)
    human = mine_concepts([mike, jack], 2, 7)[0]
    registry = Net()
    register_concept(registry, human)
    man = specialize(human, Additions(properties=((human.root, "beard"),)))
    assert man.parent == human.id
    assert "beard" in man.pattern.objects[man.root].properties
    # matches of the child are a subset of matches of the parent
    fixture = person_net(80, 70)
    fixture.set_property(1, "beard", Value.truth(True))
    bare = person_net(60, 50)
    for net in (fixture, bare):
        child_images = match_images(man.pattern, net)
        parent_images = match_images(human.pattern, net)
        assert child_images <= parent_images
    assert match_images(man.pattern, bare) == set()
    assert match_images(man.pattern, fixture)


def test_specialize_with_empty_additions_is_distinct_child():
    mike = person_net(80, 70)
    jack = person_net(95, 77)
    human = mine_concepts([mike, jack], 2, 7)[0]
    registry = Net()
    register_concept(registry, human)
    child = specialize(human, Additions())
    assert child is not human
    assert child.parent == human.id
    assert canonical_key(child.pattern) == canonical_key(human.pattern)
    register_concept(registry, child)
    assert child.id != human.id


def test_specialize_part_attachment_and_bipartite_guard():
    mike = person_net(80, 70)
    jack = person_net(95, 77)
    human = mine_concepts([mike, jack], 2, 7)[0]
    winged = specialize(human, Additions(parts=((human.root, ("wing",)),)))
    assert len(winged.pattern.node_ids()) == len(human.pattern.node_ids()) + 2
    assert winged.pattern.validate_bipartite().ok
    some_action = next(iter(human.pattern.actions))
    with pytest.raises(BipartiteViolation):
        specialize(human, Additions(parts=((some_action, ("wing",)),)))
