import pytest

from krn import Lexicon, Value
from krn.errors import BadLanguageTag, NoLabel


def test_shared_labels_within_language():
    lex = Lexicon()
    lex.set_label(1, "en", "flying")
    lex.set_label(2, "en", "flying")
    assert lex.lookup("en", "flying") == {1, 2}


def test_label_fallback_to_english():
    lex = Lexicon()
    lex.set_label(5, "en", "wall")
    assert lex.label_of(5, "fr") == ("wall", "en")


def test_direct_hit_beats_fallback():
    lex = Lexicon()
    lex.set_label(5, "en", "wall")
    lex.set_label(5, "fr", "mur")
    assert lex.label_of(5, "fr") == ("mur", "fr")
    assert lex.label_of(5, "en") == ("wall", "en")


def test_configurable_fallback_chain():
    lex = Lexicon(fallback_chain=("de", "en"))
    lex.set_label(7, "de", "wand")
    lex.set_label(7, "en", "wall")
    assert lex.label_of(7, "fr") == ("wand", "de")


def test_no_label_raises():
    lex = Lexicon()
    with pytest.raises(NoLabel):
        lex.label_of(9, "en")


def test_overwrite_repairs_reverse_index():
    lex = Lexicon()
    lex.set_label(3, "en", "wall")
    lex.set_label(3, "en", "fence")
    assert lex.lookup("en", "wall") == set()
    assert lex.lookup("en", "fence") == {3}
    assert lex.label_of(3, "en") == ("fence", "en")


def test_languages_independent():
    lex = Lexicon()
    lex.set_label(4, "en", "wall")
    lex.set_label(4, "fr", "mur")
    assert lex.lookup("fr", "wall") == set()
    assert lex.lookup("en", "mur") == set()


def test_lookup_is_exact_and_case_sensitive():
    lex = Lexicon()
    lex.set_label(1, "en", "flying")
    assert lex.lookup("en", "Flying") == set()
    assert lex.lookup("en", "unheard-of") == set()


def test_bad_language_tag_rejected():
    lex = Lexicon()
    for bad in ("", "en us", "toolongtag99", "-en"):
        with pytest.raises(BadLanguageTag):
            lex.set_label(1, bad, "x")
    lex.set_label(1, "zh-Hant", "x")  # well-formed compound tag


def test_inverse_consistency():
    lex = Lexicon()
    entries = [(1, "en", "a"), (2, "en", "a"), (2, "fr", "b"), (3, "de", "c")]
    for node, lang, text in entries:
        lex.set_label(node, lang, text)
    for node, lang, _ in entries:
        text, used = lex.label_of(node, lang)
        assert used == lang  # direct hits only here
        assert node in lex.lookup(lang, text)


def test_engine_operations_never_consult_labels():
    """The thinking/communication separation, exercised structurally."""
    from krn import mine_concepts, query_has, run_action
    from helpers import peter_net, person_net, wall_net

    # a full reasoning and simulation pass with a completely empty lexicon
    net, man, wall, paint = wall_net()
    run_action(net, paint)
    assert net.get_property(wall, "colour") == Value.text("black")
    p_net, peter, concept_id = peter_net()
    assert query_has(p_net, peter, "head").value == "yes-inferred"
    templates = mine_concepts([person_net(1, 2), person_net(3, 4)], 2, 7)
    assert len(templates) == 1
