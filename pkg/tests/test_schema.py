import pytest

from conftest import fixture_path
from klog.errors import (DomainSyntaxError, DuplicateSignature, MultipleSelfRef, RoleOnProperty, SchemaError,
                         UnknownEntityType, UnstratifiableProgram)
from klog.schema import (EntityRef, Property, SelfRef, load_domain, parse_domain, pretty_print,
                         validate_schema)


def test_uwcse_signatures(uwcse_schema):
    assert uwcse_schema.names == ["has_position", "advised_by", "student", "professor",
                                  "on_same_course", "on_same_paper", "n_common_papers"]
    assert uwcse_schema.entity_sets == frozenset({"student", "professor"})
    has_position = uwcse_schema["has_position"]
    assert has_position.columns[0].ctype == EntityRef("professor")
    assert has_position.columns[1].ctype == Property()
    assert has_position.identifier_columns == [0]
    assert has_position.property_columns == [1]
    assert uwcse_schema["student"].columns[0].ctype == SelfRef()
    assert uwcse_schema["n_common_papers"].is_intensional
    assert len(uwcse_schema["n_common_papers"].rules) == 1
    assert validate_schema(uwcse_schema) == []


def test_zero_arity_signature():
    schema = parse_domain("signature mutagenic::extensional.")
    sig = schema["mutagenic"]
    assert sig.arity == 0 and sig.relational_arity == 0


def test_roles_default_to_position_and_can_be_shared():
    schema = load_domain(fixture_path("bursi.klog"))
    bnd = schema["bnd"]
    assert [c.role for c in bnd.columns] == ["b", "b", "3"]
    fused = schema["fg_fused"]
    assert [c.role for c in fused.columns[:2]] == ["nil", "nil"]
    assert {r.head.predicate for r in schema.auxiliary_rules} == {"saturation_class"}


@pytest.mark.parametrize("name", ["uwcse.klog", "bursi.klog"])
def test_pretty_print_is_a_fixed_point(name):
    schema = load_domain(fixture_path(name))
    text = pretty_print(schema)
    assert parse_domain(text) == schema
    assert pretty_print(parse_domain(text)) == text


def test_header_prints_roles_only_when_needed(uwcse_schema):
    assert uwcse_schema["advised_by"].header() == \
        "signature advised_by(p1::student, p2::professor)::extensional."


def test_markers_are_optional_and_text_outside_is_ignored():
    text = "texto livre\nbegin_domain.\nsignature student(id::self)::extensional.\nend_domain.\nmais texto"
    assert parse_domain(text).names == ["student"]


def test_syntax_error_reports_location():
    with pytest.raises(DomainSyntaxError) as info:
        parse_domain("signature student(id::self)::extensional.\nsignature prof(id self)::extensional.")
    assert info.value.line == 2
    assert info.value.column == 19


def test_unknown_level():
    with pytest.raises(DomainSyntaxError, match="extensional"):
        parse_domain("signature student(id::self)::derived.")


def test_clause_for_extensional_signature_is_rejected():
    with pytest.raises(DomainSyntaxError):
        parse_domain("signature student(id::self)::extensional.\nstudent(X) :- person(X).")


def test_duplicate_signature():
    with pytest.raises(DuplicateSignature):
        parse_domain("signature s(id::self)::extensional.\nsignature s(id::self)::extensional.")


def test_unknown_entity_type():
    with pytest.raises(UnknownEntityType):
        parse_domain("signature advised_by(p1::student, p2::professor)::extensional.")


@pytest.mark.parametrize("column", ["v@x::property", "v@2::property"])
def test_role_on_property(column):
    with pytest.raises(RoleOnProperty):
        parse_domain(f"signature s(id::self, {column})::extensional.")


def test_multiple_self_columns():
    with pytest.raises(MultipleSelfRef):
        parse_domain("signature s(a::self, b::self)::extensional.")


def test_entity_with_relational_arity_two():
    with pytest.raises(SchemaError, match="EntityArity"):
        parse_domain("signature p(id::self)::extensional.\nsignature s(a::self, b::p)::extensional.")


def test_unstratifiable_domain():
    text = """
    signature p(id::self)::extensional.
    signature q(a::p)::intensional.
    q(X) :- p(X), \\+ r(X).
    r(X) :- p(X), \\+ q(X).
    """
    with pytest.raises(UnstratifiableProgram):
        parse_domain(text)


def test_with_flags(uwcse_schema):
    flagged = uwcse_schema.with_kernel_points(["student"]).with_targets(["advised_by"])
    assert flagged["student"].is_kernel_point and not flagged["professor"].is_kernel_point
    assert flagged["advised_by"].is_target
    with pytest.raises(SchemaError):
        uwcse_schema.with_targets(["nope"])
