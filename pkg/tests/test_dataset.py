import pytest

from conftest import fixture_path
from klog.dataset import (ATTRIBUTED_LINK, ENTITY_BINARY, ENTITY_VALUE, INTERPRETATION_BINARY, LINK, NUMERIC,
                          CATEGORICAL, Interpretation, build_slices, derive, entity_ids, infer_partition,
                          infer_property_kinds, load_dataset, make_job, output_predicates, parse_facts,
                          slice_episode)
from klog.errors import (ArityMismatch, DuplicateKey, FactParseError, MixedPropertyKind, UnknownTarget,
                         UnorderableKey)
from klog.rules import Atom
from klog.schema import load_domain, parse_domain

MOVIES = """
signature movie(m::self, year::property)::extensional.
signature actor(a::self)::extensional.
signature acts(a::actor, m::movie)::extensional.
"""


def test_listing_interpretation_has_33_atoms(ai_interpretations):
    assert [i.id for i in ai_interpretations] == ["ai"]
    interp = ai_interpretations[0]
    assert len(interp) == 33
    assert len(interp.of("taught_by")) == 7
    assert Atom("ta", ("course24", "person70", "autumn_0304")) in interp.atoms


def test_derived_dataset(ai_dataset):
    interp = ai_dataset.interpretations[0]
    assert len(interp) == 33 + 1 + 6 + 6
    assert ai_dataset.property_kinds == {("has_position", 1): CATEGORICAL, ("n_common_papers", 2): NUMERIC}
    assert ai_dataset.tuple_mode() == "mixed"


def test_entity_ids(ai_dataset):
    atoms = ai_dataset.interpretations[0].atoms
    assert entity_ids(ai_dataset.schema, atoms, "professor") == ["person211", "person407"]


def test_multiple_interpretations(uwcse_schema):
    dataset = load_dataset(uwcse_schema, fixture_path("uwcse_two.facts"))
    assert dataset.ids == ["ai", "graphics"]
    graphics = dataset.get("graphics")
    assert Atom("on_same_course", ("person33", "person310")) in graphics.atoms
    assert dataset.subset(["graphics"]).ids == ["graphics"]


def test_atom_before_header_is_rejected(uwcse_schema):
    with pytest.raises(FactParseError):
        parse_facts("student(person1).\ninterpretation ai.", uwcse_schema)


def test_facts_must_be_ground(uwcse_schema):
    with pytest.raises(FactParseError) as info:
        parse_facts("interpretation ai.\nstudent(X).", uwcse_schema)
    assert info.value.line == 2


def test_repeated_interpretation_id(uwcse_schema):
    with pytest.raises(FactParseError, match="repetida"):
        parse_facts("interpretation ai.\ninterpretation ai.", uwcse_schema)


def test_arity_mismatch(uwcse_schema):
    with pytest.raises(ArityMismatch):
        parse_facts("interpretation ai.\nadvised_by(person1).", uwcse_schema)


def test_duplicate_primary_key(uwcse_schema):
    text = "interpretation ai.\nhas_position(p1,faculty).\nhas_position(p1,affiliate).\n"
    with pytest.raises(DuplicateKey):
        parse_facts(text, uwcse_schema)


def test_mixed_property_kind(uwcse_schema):
    text = "interpretation ai.\nhas_position(p1,faculty).\nhas_position(p2,3).\n"
    interpretations = parse_facts(text, uwcse_schema)
    with pytest.raises(MixedPropertyKind):
        infer_property_kinds(uwcse_schema, interpretations)


def test_job_kinds(uwcse_schema):
    bursi = load_domain(fixture_path("bursi.klog"))
    assert make_job(uwcse_schema, ["advised_by"]).tasks[0].kind == LINK
    assert make_job(uwcse_schema, ["student"]).tasks[0].kind == ENTITY_BINARY
    assert make_job(uwcse_schema, ["has_position"]).tasks[0].kind == ENTITY_VALUE
    assert make_job(uwcse_schema, ["n_common_papers"]).tasks[0].kind == ATTRIBUTED_LINK
    assert make_job(bursi, ["mutagenic"]).tasks[0].kind == INTERPRETATION_BINARY


def test_one_task_per_property(uwcse_schema):
    job = make_job(uwcse_schema, ["advised_by", "has_position"])
    assert [t.name for t in job.tasks] == ["advised_by", "has_position.2"]
    assert job.multitask
    assert job.tasks[1].label_column == 1 and not job.tasks[1].is_binary


def test_unknown_target(uwcse_schema):
    with pytest.raises(UnknownTarget):
        make_job(uwcse_schema, ["teaches"])
    with pytest.raises(UnknownTarget):
        make_job(uwcse_schema, [])


def test_output_predicates_follow_dependents():
    schema = parse_domain("""
    signature p(id::self)::extensional.
    signature t(a::p)::extensional.
    signature u(a::p)::intensional.
    u(X) :- t(X).
    signature v(a::p)::intensional.
    v(X) :- p(X).
    """)
    assert output_predicates(schema, ["t"]) == {"t", "u"}


def test_partition_removes_target_atoms(ai_dataset):
    job = make_job(ai_dataset.schema, ["advised_by"])
    interp = ai_dataset.interpretations[0]
    x, y = infer_partition(ai_dataset.schema, job, interp)
    assert {a.predicate for a in y} == {"advised_by"}
    assert len(y) == 2
    assert x | y == interp.atoms and not x & y


def test_bursi_derivation():
    schema = load_domain(fixture_path("bursi.klog"))
    dataset = load_dataset(schema, fixture_path("bursi.facts"))
    m1, m2 = dataset.interpretations
    assert [a.args for a in m1.of("atm")] == [("a1", "c"), ("a2", "c"), ("a3", "n"), ("a5", "o")]
    assert {a.args for a in m1.of("bnd")} == {("a1", "a2", "aromatic"), ("a2", "a3", "single"),
                                             ("a3", "a5", "double")}
    assert m1.of("fg_fused") == [Atom("fg_fused", ("g1", "g2", 2))]
    assert m1.of("fg_connected") == [Atom("fg_connected", ("g1", "g2", "single"))]
    assert m1.of("fg_linked") == [Atom("fg_linked", ("g2", "g1", "saturated"))]
    assert m2.of("fg_linked") == [Atom("fg_linked", ("h1", "h1", "unsaturated"))]
    assert Atom("mutagenic", ()) in m1.atoms and Atom("mutagenic", ()) not in m2.atoms


def _movies(*extra):
    schema = parse_domain(MOVIES)
    atoms = {Atom("movie", ("m1", 1995)), Atom("movie", ("m2", 1996)), Atom("movie", ("m3", 1997)),
             Atom("actor", ("x",)), Atom("acts", ("x", "m1")), Atom("acts", ("x", "m3"))}
    return schema, Interpretation("imdb", frozenset(atoms | set(extra)))


def test_slices_follow_the_key():
    schema, interp = _movies()
    system = build_slices(schema, interp, "movie")
    assert system.index_set == (1995, 1996, 1997)
    assert system.assignment[Atom("acts", ("x", "m3"))] == 1997
    assert system.assignment[Atom("actor", ("x",))] == 1995
    slices = system.slices()
    assert sum(len(s) for s in slices.values()) == len(interp)
    assert slices[1996] == frozenset({Atom("movie", ("m2", 1996))})
    assert system.frame(1997, 1) == [1996, 1997]
    assert system.frame(1995, 2) == [1995]


def test_slice_episode():
    schema, interp = _movies()
    system = build_slices(schema, interp, "movie")
    y = {a for a in interp.atoms if a.predicate == "acts"}
    x = interp.atoms - y
    inputs, outputs = slice_episode(system, x, y, system.frame(1997, 2), 1997)
    assert outputs == {Atom("acts", ("x", "m3"))}
    assert Atom("acts", ("x", "m1")) in inputs
    assert Atom("movie", ("m3", 1997)) in inputs
    assert not inputs & outputs


def test_slice_key_must_be_orderable():
    schema, interp = _movies(Atom("movie", ("m4", "unknown")))
    with pytest.raises(UnorderableKey):
        build_slices(schema, interp, "movie")


def test_slice_key_must_be_a_property():
    schema, interp = _movies()
    with pytest.raises(UnorderableKey):
        build_slices(schema, interp, "movie", column=1)
