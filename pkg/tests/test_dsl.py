import pytest

from roboscript import dsl


def texts(tokens):
    return [t.text for t in tokens]


def test_vocabulary_is_closed_and_small():
    assert len(dsl.VOCABULARY) <= 100
    assert len({t.text for t in dsl.VOCABULARY}) == len(dsl.VOCABULARY)
    assert dsl.EOS in dsl.VOCABULARY


def test_tokenize_move_call():
    toks = dsl.tokenize("move ( apple .x , apple .y , 1 , 0 )")
    assert texts(toks) == ["move", "(", "apple", ".x", ",", "apple", ".y",
                           ",", "1", ",", "0", ")", "<eos>"]


def test_tokenize_empty_is_just_eos():
    assert dsl.tokenize("") == [dsl.EOS]
    assert dsl.detokenize([dsl.EOS]) == ""


def test_tokenize_unknown_word():
    with pytest.raises(dsl.LexError):
        dsl.tokenize("flask")


def test_single_token_round_trip():
    for tok in dsl.VOCABULARY:
        if tok.kind == dsl.K_EOS:
            continue
        assert dsl.detokenize(dsl.tokenize(tok.text)) == tok.text


def test_comments_are_skipped():
    toks = dsl.tokenize("# push the orange\nsolve")
    assert texts(toks) == ["solve", "<eos>"]


def test_parse_arrange_body():
    prog = dsl.parse_text("require px_apple == px_orange\nsolve", dsl.ARRANGE)
    assert prog.task == dsl.ARRANGE
    assert prog.referenced_classes == {"apple", "orange"}
    assert prog.placed_classes == {"apple", "orange"}
    assert isinstance(prog.body[0], dsl.Require)
    assert isinstance(prog.body[1], dsl.Solve)


def test_parse_malformed_move():
    with pytest.raises(dsl.DslSyntaxError):
        dsl.parse_text("move ( 1 , )", dsl.MANIPULATION)


def test_task_mismatch_is_syntax_error():
    with pytest.raises(dsl.DslSyntaxError):
        dsl.parse_text("require px_apple == 0.5\nsolve", dsl.MANIPULATION)
    with pytest.raises(dsl.DslSyntaxError):
        dsl.parse_text("move ( 0 , 0 , 1 , 0 )", dsl.ARRANGE)
    with pytest.raises(dsl.DslSyntaxError):
        dsl.parse_text("let t0 = px_apple", dsl.MANIPULATION)


def test_parse_requires_eos_termination():
    toks = dsl.tokenize("solve")[:-1]
    with pytest.raises(dsl.DslSyntaxError):
        dsl.parse(toks, dsl.ARRANGE)


def test_if_else_and_for_parse():
    text = ("let t0 = 0\n"
            "if apple .x >= 0\n"
            "  move ( 1 , apple .y , 0.05 , 0 )\n"
            "else\n"
            "  move ( -1 , apple .y , 0.05 , 0 )\n"
            "end\n"
            "for 3\n"
            "  let t0 = t0 + 0.25\n"
            "end")
    prog = dsl.parse_text(text, dsl.MANIPULATION)
    kinds = [type(s).__name__ for s in prog.body]
    assert kinds == ["Let", "If", "For"]
    assert prog.body[2].count == 3
    assert prog.referenced_classes == {"apple"}
    assert prog.placed_classes == frozenset()


def test_for_count_must_be_integer_literal_in_range():
    with pytest.raises(dsl.DslSyntaxError):
        dsl.parse_text("for 0.5\nend", dsl.MANIPULATION)
    with pytest.raises(dsl.DslSyntaxError):
        dsl.parse_text("for 180\nend", dsl.MANIPULATION)
    prog = dsl.parse_text("for 100\nend", dsl.MANIPULATION)
    assert prog.body[0].count == 100


def test_bare_class_token_is_error():
    with pytest.raises(dsl.DslSyntaxError):
        dsl.parse_text("let t0 = apple", dsl.MANIPULATION)


def test_unary_minus_and_precedence():
    prog = dsl.parse_text("let t0 = - apple .x + 0.5 * 2", dsl.MANIPULATION)
    let = prog.body[0]
    assert isinstance(let.expr, dsl.Binary) and let.expr.op == "+"
    assert isinstance(let.expr.left, dsl.Unary)
    assert isinstance(let.expr.right, dsl.Binary) and let.expr.right.op == "*"


def test_detokenize_round_trip_on_fragments():
    fragments = [
        "require px_apple == ( px_orange + px_banana ) / 2",
        "move ( hypot ( 1 , 2 ) , atan2 ( 0 , 1 ) , 0.05 , 90 )",
        "let t3 = min ( apple .w , apple .h )",
        "grip ( on )",
    ]
    for frag in fragments:
        toks = dsl.tokenize(frag)
        assert dsl.detokenize(toks) == frag
        assert dsl.tokenize(dsl.detokenize(toks)) == toks


def test_pretty_format_reparses_equivalently():
    text = "require px_apple == 0.5\nrequire py_apple == 0.5\nsolve"
    prog = dsl.parse_text(text, dsl.ARRANGE)
    pretty = dsl.format_program(prog, instruction="place the apple")
    assert pretty.startswith("# place the apple\n")
    again = dsl.parse_text(pretty, dsl.ARRANGE)
    assert again.body == prog.body


def test_token_ids_align_with_vocabulary():
    assert dsl.TOKEN_IDS["<eos>"] == len(dsl.VOCABULARY) - 1
    for i, tok in enumerate(dsl.VOCABULARY):
        assert dsl.TOKEN_IDS[tok.text] == i
