"""Lexer/parser/printer behavior, including full round-trip properties."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from idvault.query_language import (
    BooleanValue,
    EnumValue,
    IntValue,
    LexError,
    ListValue,
    ObjectValue,
    Operation,
    OpType,
    ParseError,
    QueryDocument,
    Selection,
    StringValue,
    Token,
    TokenKind,
    VariableDef,
    VariableRef,
    parse,
    print_document,
    tokenize,
)

from .helpers import random_document

CREATE_USER_LISTING = """\
mutation createUser(
 $input: createUserInput
) {
 createUser(
  input: $input
 ) {
    user {
      username
      email
    }
  }
}
"""

LOGIN_LISTING = """\
mutation Login(
 $input: UsersPermissionsLoginInput!
 ) {
  login(
   input: $input
  ) {
    jwt
    user {
      username
      email
    }
  }
}
"""


class TestTokenize:
    def test_mutation_login_prefix(self):
        tokens = tokenize("mutation Login(")
        assert [(t.kind, t.text) for t in tokens[:3]] == [
            (TokenKind.NAME, "mutation"),
            (TokenKind.NAME, "Login"),
            (TokenKind.PUNCT, "("),
        ]
        assert tokens[-1].kind is TokenKind.EOF

    def test_empty_source_is_just_eof(self):
        tokens = tokenize("")
        assert len(tokens) == 1 and tokens[0].kind is TokenKind.EOF

    def test_unterminated_string_reports_line_one(self):
        with pytest.raises(LexError) as err:
            tokenize('"unterminated')
        assert err.value.line == 1

    def test_commas_and_comments_are_ignored(self):
        tokens = tokenize("a, b # trailing comment\nc")
        assert [t.text for t in tokens[:-1]] == ["a", "b", "c"]

    def test_positions_are_one_based_and_non_decreasing(self):
        tokens = tokenize("query Q {\n  a(x: 1)\n}")
        positions = [(t.line, t.column) for t in tokens]
        assert positions[0] == (1, 1)
        assert positions == sorted(positions)

    def test_dollar_and_bang_have_own_kinds(self):
        kinds = [t.kind for t in tokenize("$x: Int!")[:-1]]
        assert kinds == [TokenKind.DOLLAR, TokenKind.NAME, TokenKind.PUNCT, TokenKind.NAME, TokenKind.BANG]

    def test_string_escapes_decode(self):
        token = tokenize(r'"a\"b\\c\ndA"')[0]
        assert token.text == 'a"b\\c\ndA'

    def test_illegal_character_position(self):
        with pytest.raises(LexError) as err:
            tokenize("query @ {")
        assert (err.value.line, err.value.column) == (1, 7)

    def test_block_strings_rejected(self):
        with pytest.raises(LexError):
            tokenize('"""block"""')

    def test_leading_zero_numbers_rejected(self):
        with pytest.raises(LexError):
            tokenize("f(a: 0123)")


class TestParseListings:
    def test_create_user_listing_shape(self):
        doc = parse(CREATE_USER_LISTING)
        assert len(doc.operations) == 1
        op = doc.operations[0]
        assert op.op_type is OpType.MUTATION
        assert op.name == "createUser"
        assert op.variable_defs == (VariableDef("input", "createUserInput", non_null=False),)
        (root,) = op.selection_set
        assert root.field_name == "createUser"
        assert root.arguments == (("input", VariableRef("input")),)
        (user,) = root.selection_set
        assert user.field_name == "user"
        assert [s.field_name for s in user.selection_set] == ["username", "email"]

    def test_login_listing_shape(self):
        doc = parse(LOGIN_LISTING)
        op = doc.operations[0]
        assert op.op_type is OpType.MUTATION
        assert op.name == "Login"
        assert op.variable_defs == (VariableDef("input", "UsersPermissionsLoginInput", non_null=True),)
        (login,) = op.selection_set
        assert login.field_name == "login"
        assert login.arguments == (("input", VariableRef("input")),)
        assert [s.field_name for s in login.selection_set] == ["jwt", "user"]
        user = login.selection_set[1]
        assert [s.field_name for s in user.selection_set] == ["username", "email"]


class TestParse:
    def test_shorthand_is_anonymous_query(self):
        doc = parse("{ a { b } }")
        op = doc.operations[0]
        assert op.op_type is OpType.QUERY and op.name is None and op.variable_defs == ()

    def test_empty_selection_set_rejected(self):
        with pytest.raises(ParseError):
            parse("{ }")

    def test_alias_parses(self):
        doc = parse("{ x: y }")
        sel = doc.operations[0].selection_set[0]
        assert sel.alias == "x" and sel.field_name == "y"

    def test_undeclared_variable_rejected_with_position(self):
        with pytest.raises(ParseError) as err:
            parse("query Q { f(a: $ghost) }")
        assert "$ghost" in str(err.value)
        assert err.value.line == 1 and err.value.column == 17

    def test_duplicate_variables_rejected(self):
        with pytest.raises(ParseError):
            parse("query Q($a: Int, $a: Int) { f(x: $a) }")

    def test_duplicate_arguments_rejected(self):
        with pytest.raises(ParseError):
            parse("{ f(a: 1, a: 2) }")

    def test_int_outside_64_bit_range_rejected(self):
        parse("{ f(a: 9223372036854775807) }")
        with pytest.raises(ParseError):
            parse("{ f(a: 9223372036854775808) }")
        with pytest.raises(ParseError):
            parse("{ f(a: -9223372036854775809) }")

    def test_error_carries_expected_and_found(self):
        with pytest.raises(ParseError) as err:
            parse("query Q { f(a } }")
        message = str(err.value)
        assert "expected" in message and "'}'" in message

    def test_multiple_operations_parse(self):
        doc = parse("query A { x } mutation B { y }")
        assert [op.name for op in doc.operations] == ["A", "B"]

    def test_value_variants(self):
        doc = parse('{ f(a: 1, b: 1.5, c: "s", d: true, e: null, g: RED, h: [1, 2], i: {x: 1}) }')
        args = dict(doc.operations[0].selection_set[0].arguments)
        assert args["a"] == IntValue(1)
        assert args["c"] == StringValue("s")
        assert args["d"] == BooleanValue(True)
        assert args["g"] == EnumValue("RED")
        assert args["h"] == ListValue((IntValue(1), IntValue(2)))
        assert args["i"] == ObjectValue((("x", IntValue(1)),))

    def test_subscription_keyword_rejected(self):
        with pytest.raises(ParseError):
            parse("subscription S { x }")


class TestPrint:
    def test_anonymous_query_prints_canonically(self):
        assert print_document(parse("{a{b}}")) == "query { a { b } }"

    def test_alias_prints(self):
        assert print_document(parse("{ x: y }")) == "query { x: y }"

    def test_login_listing_round_trips(self):
        doc = parse(LOGIN_LISTING)
        assert parse(print_document(doc)) == doc

    def test_create_user_listing_round_trips(self):
        doc = parse(CREATE_USER_LISTING)
        assert parse(print_document(doc)) == doc

    def test_variable_defs_print(self):
        text = print_document(parse("mutation M($a: Int!, $b: String) { f(x: $a, y: $b) }"))
        assert text == "mutation M($a: Int!, $b: String) { f(x: $a, y: $b) }"


class TestRoundTripProperties:
    def test_seeded_corpus_round_trips(self):
        rng = random.Random(20260808)
        for _ in range(500):
            doc = random_document(rng)
            assert parse(print_document(doc)) == doc

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=200, deadline=None)
    def test_generated_documents_round_trip(self, seed):
        doc = random_document(random.Random(seed))
        printed = print_document(doc)
        assert parse(printed) == doc

    @given(st.text(max_size=40))
    @settings(max_examples=300, deadline=None)
    def test_tokenizer_is_total_or_positioned(self, source):
        try:
            tokens = tokenize(source)
        except LexError as err:
            assert err.line >= 1 and err.column >= 1
        else:
            assert tokens[-1].kind is TokenKind.EOF

    def test_purity_same_input_same_output(self):
        source = "query Q($a: Int) { f(x: $a) { y } }"
        assert tokenize(source) == tokenize(source)
        assert parse(source) == parse(source)


class TestErrorPositions:
    @pytest.mark.parametrize(
        "source, line, column",
        [
            ("query Q { f(a: %) }", 1, 16),
            ("{\n  f\n  &\n}", 3, 3),
            ('{ f(a: "oops) }', 1, 8),
        ],
    )
    def test_injected_illegal_token_position(self, source, line, column):
        with pytest.raises(LexError) as err:
            tokenize(source)
        assert (err.value.line, err.value.column) == (line, column)
