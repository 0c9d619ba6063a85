"""RoboScript: the closed token vocabulary, grammar, and parser.

Programs are short function bodies over scene objects. Two dialects share
one grammar: arrange bodies declare placement constraints and call the
solver; manipulation bodies drive the robot with move/grip. The whole
vocabulary is closed and small (99 tokens including EOS) so a softmax head
of width <= 100 can emit any program.

Grammar (EBNF; statements are keyword-initiated, so no separator token is
needed — text form conventionally puts one statement per line):

    program   := stmt* EOS
    stmt      := "let" local "=" expr
               | "require" expr rel expr        (arrange only)
               | "solve"                        (arrange only)
               | "move" "(" expr "," expr "," expr "," expr ")"   (manip only)
               | "grip" "(" ("on" | "off") ")"                    (manip only)
               | "if" expr cmp expr stmt* ("else" stmt*)? "end"
               | "for" int_literal stmt* "end"
    rel       := "==" | "<=" | ">="
    cmp       := rel | "<" | ">"
    expr      := term (("+" | "-") term)*
    term      := unary (("*" | "/") unary)*
    unary     := "-" unary | primary
    primary   := literal | local | placement_var
               | class attribute
               | builtin "(" expr ("," expr)* ")"
               | "(" expr ")"
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .scene import CLASS_NAMES

KEYWORDS = ("let", "if", "else", "for", "require", "solve", "move", "grip",
            "on", "off", "end")
ATTRIBUTES = (".x", ".y", ".w", ".h", ".d")
BUILTINS = ("sin", "cos", "atan2", "hypot", "abs", "min", "max", "value")
OPERATORS = ("+", "-", "*", "/", "==", "<=", ">=", "<", ">", "(", ")", ",", "=")
LITERALS = (-1.0, -0.9, -0.75, -0.5, -0.25, 0.0, 0.05, 0.1, 0.15, 0.25, 0.5,
            0.75, 0.9, 1.0, 2.0, 3.0, 4.0, 90.0, 100.0, 180.0)
LOCALS = tuple(f"t{i}" for i in range(10))
PLACEMENT_VARS = tuple(f"p{axis}_{cls}" for cls in CLASS_NAMES for axis in "xy")
EOS_TEXT = "<eos>"

K_KEYWORD = "keyword"
K_CLASS = "class"
K_ATTR = "attr"
K_BUILTIN = "builtin"
K_OP = "op"
K_NUM = "num"
K_LOCAL = "local"
K_PLACE = "place"
K_EOS = "eos"


def _literal_text(v: float) -> str:
    if v == int(v):
        return str(int(v))
    return repr(v)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    value: float | None = None

    def __repr__(self):
        return f"Token({self.text!r})"


def _build_registry():
    tokens = []
    tokens += [Token(K_KEYWORD, t) for t in KEYWORDS]
    tokens += [Token(K_CLASS, t) for t in CLASS_NAMES]
    tokens += [Token(K_ATTR, t) for t in ATTRIBUTES]
    tokens += [Token(K_BUILTIN, t) for t in BUILTINS]
    tokens += [Token(K_OP, t) for t in OPERATORS]
    tokens += [Token(K_NUM, _literal_text(v), v) for v in LITERALS]
    tokens += [Token(K_LOCAL, t) for t in LOCALS]
    tokens += [Token(K_PLACE, t) for t in PLACEMENT_VARS]
    tokens.append(Token(K_EOS, EOS_TEXT))
    by_text = {t.text: t for t in tokens}
    assert len(by_text) == len(tokens), "token text forms must be unique"
    assert len(tokens) <= 100, f"vocabulary too large: {len(tokens)}"
    return tuple(tokens), by_text


VOCABULARY, _BY_TEXT = _build_registry()
EOS = _BY_TEXT[EOS_TEXT]
TOKEN_IDS = {t.text: i for i, t in enumerate(VOCABULARY)}

ARRANGE = "arrange"
MANIPULATION = "manipulation"


class LexError(Exception):
    def __init__(self, position: int, lexeme: str):
        super().__init__(f"unknown lexeme {lexeme!r} at token position {position}")
        self.position = position
        self.lexeme = lexeme


class DslSyntaxError(Exception):
    def __init__(self, position: int, expected: str, found: str):
        super().__init__(f"at token {position}: expected {expected}, found {found!r}")
        self.position = position
        self.expected = expected
        self.found = found


def token(text: str) -> Token:
    """Registry lookup by exact text form."""
    try:
        return _BY_TEXT[text]
    except KeyError:
        raise LexError(-1, text)


def tokenize(text: str) -> list[Token]:
    """Whitespace-separated lexing against the closed registry.

    '#' starts a comment through end of line. The result always ends with
    EOS; detokenize(tokenize(t)) differs from t only in whitespace.
    """
    out = []
    for line in text.splitlines():
        body = line.split("#", 1)[0]
        for lexeme in body.split():
            tok = _BY_TEXT.get(lexeme)
            if tok is None or tok.kind == K_EOS:
                raise LexError(len(out), lexeme)
            out.append(tok)
    out.append(EOS)
    return out


def detokenize(tokens) -> str:
    """Canonical single-space-joined text form; EOS renders as nothing."""
    return " ".join(t.text for t in tokens if t.kind != K_EOS)


# --- AST ---------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float

@dataclass(frozen=True)
class LocalRef:
    name: str

@dataclass(frozen=True)
class PlaceRef:
    axis: str        # "x" or "y"
    class_name: str

@dataclass(frozen=True)
class AttrRef:
    class_name: str
    attr: str        # one of x y w h d

@dataclass(frozen=True)
class Unary:
    op: str
    operand: object

@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object

@dataclass(frozen=True)
class Call:
    func: str
    args: tuple

@dataclass(frozen=True)
class Let:
    name: str
    expr: object

@dataclass(frozen=True)
class Require:
    lhs: object
    relation: str
    rhs: object

@dataclass(frozen=True)
class Solve:
    pass

@dataclass(frozen=True)
class MoveStmt:
    x: object
    y: object
    z: object
    r: object

@dataclass(frozen=True)
class GripStmt:
    engaged: bool

@dataclass(frozen=True)
class If:
    lhs: object
    relation: str
    rhs: object
    then_body: tuple
    else_body: tuple

@dataclass(frozen=True)
class For:
    count: int
    body: tuple


@dataclass(frozen=True)
class Program:
    task: str
    body: tuple
    referenced_classes: frozenset
    placed_classes: frozenset = field(default_factory=frozenset)
    tokens: tuple = ()


_REQUIRE_RELS = ("==", "<=", ">=")
_IF_RELS = ("==", "<=", ">=", "<", ">")


class _Parser:
    """Single-pass recursive descent; one token of lookahead."""

    def __init__(self, tokens, task):
        self.tokens = list(tokens)
        self.pos = 0
        self.task = task
        self.classes = set()
        self.placed = set()

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, expected: str):
        raise DslSyntaxError(self.pos, expected, self.peek().text)

    def expect(self, text: str) -> Token:
        if self.peek().text != text:
            self.fail(repr(text))
        return self.advance()

    def parse_program(self) -> Program:
        if not self.tokens or self.tokens[-1].kind != K_EOS:
            raise DslSyntaxError(len(self.tokens), "EOS-terminated token list",
                                 "<missing EOS>")
        body = self.parse_block(stop={EOS_TEXT})
        self.expect(EOS_TEXT)
        if self.pos != len(self.tokens):
            self.fail("end of input")
        return Program(
            task=self.task,
            body=body,
            referenced_classes=frozenset(self.classes),
            placed_classes=frozenset(self.placed),
            tokens=tuple(self.tokens),
        )

    def parse_block(self, stop) -> tuple:
        stmts = []
        while self.peek().text not in stop:
            stmts.append(self.parse_stmt())
        return tuple(stmts)

    def parse_stmt(self):
        tok = self.peek()
        if tok.text == "let":
            return self.parse_let()
        if tok.text == "require":
            if self.task != ARRANGE:
                self.fail("a manipulation statement ('require' is arrange-only)")
            return self.parse_require()
        if tok.text == "solve":
            if self.task != ARRANGE:
                self.fail("a manipulation statement ('solve' is arrange-only)")
            self.advance()
            return Solve()
        if tok.text == "move":
            if self.task != MANIPULATION:
                self.fail("an arrange statement ('move' is manipulation-only)")
            return self.parse_move()
        if tok.text == "grip":
            if self.task != MANIPULATION:
                self.fail("an arrange statement ('grip' is manipulation-only)")
            return self.parse_grip()
        if tok.text == "if":
            return self.parse_if()
        if tok.text == "for":
            return self.parse_for()
        self.fail("a statement keyword")

    def parse_let(self):
        self.expect("let")
        name = self.peek()
        if name.kind != K_LOCAL:
            self.fail("a local variable t0..t9")
        self.advance()
        self.expect("=")
        return Let(name.text, self.parse_expr())

    def parse_require(self):
        self.expect("require")
        lhs = self.parse_expr()
        rel = self.peek()
        if rel.text not in _REQUIRE_RELS:
            self.fail("one of ==, <=, >=")
        self.advance()
        rhs = self.parse_expr()
        return Require(lhs, rel.text, rhs)

    def parse_move(self):
        self.expect("move")
        self.expect("(")
        args = [self.parse_expr()]
        for _ in range(3):
            self.expect(",")
            args.append(self.parse_expr())
        self.expect(")")
        return MoveStmt(*args)

    def parse_grip(self):
        self.expect("grip")
        self.expect("(")
        state = self.peek()
        if state.text not in ("on", "off"):
            self.fail("'on' or 'off'")
        self.advance()
        self.expect(")")
        return GripStmt(state.text == "on")

    def parse_if(self):
        self.expect("if")
        lhs = self.parse_expr()
        rel = self.peek()
        if rel.text not in _IF_RELS:
            self.fail("a comparison operator")
        self.advance()
        rhs = self.parse_expr()
        then_body = self.parse_block(stop={"else", "end"})
        else_body = ()
        if self.peek().text == "else":
            self.advance()
            else_body = self.parse_block(stop={"end"})
        self.expect("end")
        return If(lhs, rel.text, rhs, then_body, else_body)

    def parse_for(self):
        self.expect("for")
        count = self.peek()
        if count.kind != K_NUM or count.value != int(count.value) \
                or not 1 <= count.value <= 100:
            self.fail("a literal loop count in 1..100")
        self.advance()
        body = self.parse_block(stop={"end"})
        self.expect("end")
        return For(int(count.value), body)

    def parse_expr(self):
        node = self.parse_term()
        while self.peek().text in ("+", "-"):
            op = self.advance().text
            node = Binary(op, node, self.parse_term())
        return node

    def parse_term(self):
        node = self.parse_unary()
        while self.peek().text in ("*", "/"):
            op = self.advance().text
            node = Binary(op, node, self.parse_unary())
        return node

    def parse_unary(self):
        if self.peek().text == "-":
            self.advance()
            return Unary("-", self.parse_unary())
        return self.parse_primary()

    def parse_primary(self):
        tok = self.peek()
        if tok.kind == K_NUM:
            self.advance()
            return Num(tok.value)
        if tok.kind == K_LOCAL:
            self.advance()
            return LocalRef(tok.text)
        if tok.kind == K_PLACE:
            if self.task != ARRANGE:
                self.fail("a manipulation expression (placement variables are arrange-only)")
            self.advance()
            axis, cls = tok.text[1], tok.text[3:]
            self.classes.add(cls)
            self.placed.add(cls)
            return PlaceRef(axis, cls)
        if tok.kind == K_CLASS:
            self.advance()
            attr = self.peek()
            if attr.kind != K_ATTR:
                self.fail("an attribute (.x .y .w .h .d)")
            self.advance()
            self.classes.add(tok.text)
            return AttrRef(tok.text, attr.text[1:])
        if tok.kind == K_BUILTIN:
            self.advance()
            self.expect("(")
            args = [self.parse_expr()]
            while self.peek().text == ",":
                self.advance()
                args.append(self.parse_expr())
            self.expect(")")
            return Call(tok.text, tuple(args))
        if tok.text == "(":
            self.advance()
            node = self.parse_expr()
            self.expect(")")
            return node
        self.fail("an expression")


def parse(tokens, task: str) -> Program:
    """Parse an EOS-terminated token list into a Program for the given task.

    Any failure here is exactly what evaluation counts as a malformed
    program.
    """
    if task not in (ARRANGE, MANIPULATION):
        raise ValueError(f"unknown task {task!r}")
    return _Parser(tokens, task).parse_program()


def parse_text(text: str, task: str) -> Program:
    return parse(tokenize(text), task)


def _format_stmt(stmt, indent: int, lines: list):
    pad = "  " * indent
    if isinstance(stmt, Let):
        lines.append(f"{pad}let {stmt.name} = {format_expr(stmt.expr)}")
    elif isinstance(stmt, Require):
        lines.append(f"{pad}require {format_expr(stmt.lhs)} {stmt.relation} "
                     f"{format_expr(stmt.rhs)}")
    elif isinstance(stmt, Solve):
        lines.append(f"{pad}solve")
    elif isinstance(stmt, MoveStmt):
        args = " , ".join(format_expr(e) for e in (stmt.x, stmt.y, stmt.z, stmt.r))
        lines.append(f"{pad}move ( {args} )")
    elif isinstance(stmt, GripStmt):
        lines.append(f"{pad}grip ( {'on' if stmt.engaged else 'off'} )")
    elif isinstance(stmt, If):
        lines.append(f"{pad}if {format_expr(stmt.lhs)} {stmt.relation} "
                     f"{format_expr(stmt.rhs)}")
        for s in stmt.then_body:
            _format_stmt(s, indent + 1, lines)
        if stmt.else_body:
            lines.append(f"{pad}else")
            for s in stmt.else_body:
                _format_stmt(s, indent + 1, lines)
        lines.append(f"{pad}end")
    elif isinstance(stmt, For):
        lines.append(f"{pad}for {_literal_text(float(stmt.count))}")
        for s in stmt.body:
            _format_stmt(s, indent + 1, lines)
        lines.append(f"{pad}end")
    else:
        raise TypeError(f"not a statement: {stmt!r}")


def format_expr(node) -> str:
    if isinstance(node, Num):
        return _literal_text(node.value)
    if isinstance(node, LocalRef):
        return node.name
    if isinstance(node, PlaceRef):
        return f"p{node.axis}_{node.class_name}"
    if isinstance(node, AttrRef):
        return f"{node.class_name} .{node.attr}"
    if isinstance(node, Unary):
        return f"- {format_expr(node.operand)}"
    if isinstance(node, Binary):
        return (f"( {format_expr(node.left)} {node.op} "
                f"{format_expr(node.right)} )")
    if isinstance(node, Call):
        args = " , ".join(format_expr(a) for a in node.args)
        return f"{node.func} ( {args} )"
    raise TypeError(f"not an expression: {node!r}")


def format_program(program: Program, instruction: str | None = None) -> str:
    """Pretty text form: one statement per line, the instruction as a
    leading comment (the .rsc file layout)."""
    lines = []
    if instruction is not None:
        lines.append(f"# {instruction}")
    for stmt in program.body:
        _format_stmt(stmt, 0, lines)
    return "\n".join(lines) + "\n"
