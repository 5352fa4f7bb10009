import pytest

from hypflow.automaton import (
    Automaton,
    automaton_to_text,
    build_conetype_automaton,
    build_free_automaton,
    build_freeproduct_automaton,
    load_automaton,
    validate,
)
from hypflow.ball import bfs_ball
from hypflow.errors import InvalidOrder, NondeterministicLabel, ParseError, UnreachableState, ValidationFailed
from hypflow.words import bundled_text


def test_bundled_octagon_has_37_states(octagon_aut):
    assert octagon_aut.state_count == 37
    assert octagon_aut.letter_count == 8
    assert all(t != octagon_aut.initial for _, t, _ in octagon_aut.edges)


def test_bundled_files_round_trip():
    for name in ("octagon", "z4z6"):
        text = bundled_text(f"{name}.aut")
        a = load_automaton(text)
        assert automaton_to_text(a) == text
        assert load_automaton(automaton_to_text(a)) == a


def test_bundled_z4z6_is_the_freeproduct_builder(z4z6_aut):
    built = build_freeproduct_automaton(4, 6)
    assert z4z6_aut.edges == built.edges
    assert z4z6_aut.state_count == built.state_count


def test_nondeterministic_label_rejected():
    text = "generators: a\nstates: 3\ninitial: 0\nedge: 0 1 a\nedge: 0 2 a\n"
    with pytest.raises(NondeterministicLabel):
        load_automaton(text)


def test_unreachable_state_rejected():
    text = "generators: a\nstates: 3\ninitial: 0\nedge: 0 1 a\n"
    with pytest.raises(UnreachableState):
        load_automaton(text)


def test_parse_error_location():
    text = "generators: a\nstates: 2\ninitial: 0\nedge: 0 1 b\n"
    with pytest.raises(ParseError) as err:
        load_automaton(text)
    assert err.value.line == 4 and err.value.column is not None


def test_incoming_edge_to_initial_gets_fresh_start():
    text = "generators: a\nstates: 2\ninitial: 0\nedge: 0 1 a\nedge: 1 0 a^-1\n"
    a = load_automaton(text)
    assert a.state_count == 3
    assert all(t != a.initial for _, t, _ in a.edges)
    assert a.path_counts(4) == [1, 1, 1, 1, 1]


def test_validate_octagon_radius_8(octagon_aut, octagon):
    report = validate(octagon_aut, octagon, 8)
    assert report.ok, report
    assert report.path_counts == report.sphere_sizes


def test_validate_z4z6_radius_8(z4z6_aut, z4z6):
    report = validate(z4z6_aut, z4z6, 8)
    assert report.ok, report


def test_deleted_edge_breaks_bijection(z4z6_aut, z4z6):
    edges = z4z6_aut.edges[:-1]
    broken = Automaton(z4z6_aut.state_count, z4z6_aut.initial, edges, z4z6_aut.generator_names)
    report = validate(broken, z4z6, 6)
    assert not report.condition3_ok
    assert report.counterexample is not None
    ball = bfs_ball(z4z6, 6)
    assert ball.distance(report.counterexample) == len(report.counterexample)
    assert broken.run(report.counterexample) is None


def test_freeproduct_builder_counts(z4z6):
    a = build_freeproduct_automaton(4, 6)
    assert a.path_counts(8) == bfs_ball(z4z6, 8).sizes
    assert a.path_counts(0) == [1]
    assert build_freeproduct_automaton(2, 2).path_counts(8) == [1] + [2] * 8
    with pytest.raises(InvalidOrder):
        build_freeproduct_automaton(1, 3)


def test_free_automaton_counts():
    assert build_free_automaton(2).path_counts(5) == [1, 4, 12, 36, 108, 324]


def test_conetype_z4z6_same_language(z4z6):
    cone = build_conetype_automaton(z4z6, 4)
    ref = build_freeproduct_automaton(4, 6)
    for n in range(9):
        assert {tuple(w) for w in cone.paths(n)[0].tolist()} == {tuple(w) for w in ref.paths(n)[0].tolist()}


def test_conetype_octagon_k5(octagon, octagon_aut):
    a = build_conetype_automaton(octagon, 5, check_radius=8)
    assert a.path_counts(8) == bfs_ball(octagon, 8).sizes
    assert a.state_count == octagon_aut.state_count


def test_conetype_octagon_k4_is_the_bundled_machine(octagon, octagon_aut):
    a = build_conetype_automaton(octagon, 4, check_radius=None)
    assert a.edges == octagon_aut.edges


def test_conetype_below_half_length_fails_validation(octagon):
    with pytest.raises(ValidationFailed) as err:
        build_conetype_automaton(octagon, 3, check_radius=6)
    assert not err.value.report.ok
