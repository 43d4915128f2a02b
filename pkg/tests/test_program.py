from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from eventgraph.counterfactual import CandidateEvent
from eventgraph.events import EventKind
from eventgraph.program import (
    OPCODES,
    Context,
    ExecError,
    Kind,
    Program,
    ProgramError,
    Token,
    exec_program,
    parse_token,
)

from fixtures.make_fixtures import hand_scene


@pytest.fixture(scope="module")
def ctx() -> Context:
    return Context.of(hand_scene())


def run(ctx, prog):
    return exec_program(prog, ctx)


def test_opcode_inventory():
    listed = """objects events all_events filter_color filter_material filter_shape filter_moving
    filter_stationary filter_in filter_out filter_collision filter_before filter_after filter_order start end
    first last get_frame count exist unique belong_to query_color query_material query_shape get_counterfact
    get_col_partner negate""".split()
    assert OPCODES == set(listed)


def test_lenient_parse_defers_unknown_opcode_to_execution(ctx):
    prog = Program.parse(["objects", "fly", "count"], strict=False)
    with pytest.raises(ExecError, match="unknown opcode") as info:
        exec_program(prog, ctx)
    assert info.value.index == 1


def test_token_conventions():
    assert parse_token("red") == Token("attr", "red")
    assert parse_token("filter_red") == Token("filter_color", "red")
    assert parse_token("filter_color=red") == Token("filter_color", "red")
    assert parse_token("query_collision_partner") == Token("get_col_partner")
    assert parse_token("filter_start") == Token("start")
    assert parse_token("filter_order=second") == Token("filter_order", "second")
    for bad in ("fly", "filter_color=cube", "filter_order", "filter_order=tenth", "filter_moving=x"):
        with pytest.raises(ProgramError):
            parse_token(bad)


def test_program_round_trip():
    p = Program.parse("objects filter_color=red unique query_shape")
    assert Program.parse(str(p)) == p


def test_counting_and_attributes(ctx):
    assert run(ctx, ["events", "filter_collision", "count"]).data == 4
    assert run(ctx, ["objects", "metal", "filter_material", "count"]).data == 3
    assert run(ctx, ["objects", "filter_color=yellow", "unique", "query_shape"]).render() == "sphere"
    assert run(ctx, ["objects", "filter_color=green", "unique", "get_col_partner"]).data == ("o1", "o3")
    assert run(ctx, ["events", "filter_out", "count"]).data == 1
    assert run(ctx, ["events", "filter_in", "count"]).data == 6


def test_attribute_filter_pops_attribute_of_matching_type(ctx):
    with pytest.raises(ExecError, match="not a material"):
        run(ctx, ["objects", "red", "filter_material"])


def test_temporal_filters_and_order(ctx):
    first = run(ctx, ["events", "filter_collision", "first"])
    assert first.kind is Kind.EVENT and first.data.tick == 20
    assert run(ctx, ["events", "filter_collision", "filter_order=third", "get_frame"]).data == 30
    assert run(ctx, ["events", "filter_collision", "last", "get_frame"]).data == 40
    before = ["events", "filter_collision", "events", "filter_collision", "last", "filter_before", "count"]
    assert run(ctx, before).data == 3
    assert run(ctx, ["events", "filter_collision", "start", "filter_after", "count"]).data == 4
    assert run(ctx, ["events", "end", "filter_before", "filter_out", "count"]).data == 1


def test_motion_filters(ctx):
    assert run(ctx, ["objects", "filter_moving"]).data == ("o0", "o5")
    assert run(ctx, ["objects", "filter_stationary", "count"]).data == 4
    assert run(ctx, ["objects", "filter_moving=50", "count"]).data == 2


def test_kind_filter_forms(ctx):
    exact = run(ctx, ["events", "objects", "filter_color=red", "unique",
                      "objects", "filter_color=blue", "unique", "filter_collision"])
    assert [e.id for e in exact.data] == ["collision:o0:o1:30"]
    any_of = run(ctx, ["events", "objects", "filter_color=green", "unique", "filter_collision", "count"])
    assert any_of.data == 2
    desc = run(ctx, ["objects", "filter_color=blue", "unique", "objects", "filter_color=yellow", "unique",
                     "filter_collision"])
    assert desc.kind is Kind.DESCRIPTION
    assert desc.data == CandidateEvent(EventKind.COLLISION, frozenset({"o1", "o3"}))
    assert run(ctx, ["objects", "filter_color=gray", "unique", "filter_in"]).render() == "enter:o4"


def test_belong_to_and_negate(ctx):
    prog = ["objects", "filter_color=green", "unique", "objects", "filter_color=red", "unique",
            "get_col_partner", "belong_to"]
    assert run(ctx, prog).data is False
    assert run(ctx, prog + ["negate"]).data is True


def test_counterfact_op(ctx):
    observed = ["events", "objects", "filter_color=red", "unique", "objects", "filter_color=blue", "unique",
                "filter_collision", "unique"]
    assert run(ctx, observed + ["objects", "filter_color=green", "unique", "get_counterfact"]).data is False
    assert run(ctx, observed + ["objects", "filter_color=gray", "unique", "get_counterfact"]).data is True
    emergent = ["objects", "filter_color=blue", "unique", "objects", "filter_color=yellow", "unique",
                "filter_collision", "objects", "filter_color=green", "unique", "get_counterfact"]
    assert run(ctx, emergent).data is True
    off = Context.of(hand_scene(), emergent=False)
    assert exec_program(emergent, off).data is False


@pytest.mark.parametrize(
    "prog,msg",
    [
        (["count"], "underflow"),
        (["objects", "unique"], "size 6"),
        (["objects", "objects"], "2 values"),
        (["objects", "filter_collision"], "event-set below"),
        (["events", "filter_order=99"], "order 99"),
        (["objects", "query_color"], "expected object"),
    ],
)
def test_execution_errors_name_the_op(ctx, prog, msg):
    with pytest.raises(ExecError, match=msg) as info:
        run(ctx, prog)
    assert info.value.index <= len(prog)


@given(st.lists(st.sampled_from(sorted(OPCODES | {"red", "metal", "cube", "filter_order=first"})), max_size=8))
def test_random_programs_either_answer_or_raise_exec_error(ctx, tokens):
    try:
        v = run(ctx, Program.parse(tokens, strict=False))
    except ExecError:
        return
    v.render()
