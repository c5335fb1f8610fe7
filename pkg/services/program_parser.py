import re
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Union

from services.program_model import (
    ALWAYS,
    ActivationGuard,
    BlockId,
    Branch,
    EventKind,
    MemoryEvent,
    Order,
    Program,
    ProgramBuilder,
    ViewKind,
    statement_tree,
)
from services.validator import ValidationReport, validate_program

DEFAULT_BLOCK_SIZE = 8
DEFAULT_MAX_IF_DEPTH = 4
DEFAULT_MAX_LOOP_BOUND = 16

PARAM_RE = re.compile(r"\$([A-Za-z_]\w*)")
TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
    |(?P<nl>\n)
    |(?P<comment>//[^\n]*)
    |(?P<access>[A-Za-z_]\w*-[IUFiuf]\d+(?=\s*\[))
    |(?P<range>\.\.)
    |(?P<number>[0-9]+(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?)
    |(?P<param>\$[A-Za-z_]\w*)
    |(?P<op>==|!=|\+=|-=|&=|\|=|\^=|[=;{}()\[\]+\-,])
    |(?P<ident>[A-Za-z_]\w*)
    """,
    re.VERBOSE,
)
RMW_OPS = {"+=": "+", "-=": "-", "&=": "&", "|=": "|", "^=": "^"}
PREFIXES = ("atomic", "tear")


class ProgramSyntaxError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        self.detail = message
        super().__init__(f"{line}:{column}: {message}" if line else message)


class ParameterError(ValueError):
    pass


class InvalidProgramError(ValueError):
    def __init__(self, report: ValidationReport):
        self.report = report
        super().__init__("Programme invalide: " + "; ".join(str(v) for v in report.violations))


@dataclass(frozen=True)
class SourceProgram:
    text: str
    params: Dict[str, Union[int, float]] = field(default_factory=dict)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


def expand_params(src: SourceProgram, bindings: Optional[Mapping[str, Union[int, float]]] = None) -> SourceProgram:
    values = dict(src.params)
    values.update(bindings or {})

    def _substitute(match: re.Match) -> str:
        name = match.group(1)
        if name not in values:
            raise ParameterError(f"Paramètre non lié: ${name}")
        return str(values[name])

    return SourceProgram(PARAM_RE.sub(_substitute, src.text), {})


def tokenize(text: str) -> List[Token]:
    tokens = []
    line, line_start, position = 1, 0, 0
    while position < len(text):
        match = TOKEN_RE.match(text, position)
        if not match:
            raise ProgramSyntaxError(f"caractère inattendu {text[position]!r}", line, position - line_start + 1)
        kind = match.lastgroup
        if kind == "nl":
            line += 1
            line_start = match.end()
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, match.group(), line, position - line_start + 1))
        position = match.end()
    tokens.append(Token("eof", "", line, position - line_start + 1))
    return tokens


class ProgramParser:
    def __init__(
        self,
        max_if_depth: int = DEFAULT_MAX_IF_DEPTH,
        max_loop_bound: int = DEFAULT_MAX_LOOP_BOUND,
        default_block_size: int = DEFAULT_BLOCK_SIZE,
        logger: Optional[Callable[[str], None]] = None,
    ):
        self.max_if_depth = max_if_depth
        self.max_loop_bound = max_loop_bound
        self.default_block_size = default_block_size
        self._logger = logger
        self._tokens: List[Token] = []
        self._pos = 0
        self._builder: Optional[ProgramBuilder] = None

    def _log(self, message: str) -> None:
        if self._logger:
            self._logger(message)

    def parse(self, src: Union[SourceProgram, str], validate: bool = True) -> Program:
        if isinstance(src, str):
            src = SourceProgram(src)
        if src.params:
            src = expand_params(src)
        self._tokens = tokenize(src.text)
        self._pos = 0
        leftover = next((t for t in self._tokens if t.kind == "param"), None)
        if leftover:
            raise ParameterError(f"Paramètre non lié: {leftover.text} (ligne {leftover.line})")

        blocks = []
        while self._peek().text == "var":
            blocks.append(self._block_declaration())
        if not blocks:
            raise self._error("au moins un bloc 'var x = new SharedArrayBuffer(n);' est attendu")
        self._builder = ProgramBuilder(blocks)
        while self._peek().kind != "eof":
            self._thread()
        program = self._builder.build()
        self._log(f"Programme analysé: {len(program.threads)} threads, {len(program.events)} événements")
        if validate:
            report = validate_program(program)
            if not report.ok:
                raise InvalidProgramError(report)
        return program

    # -- token helpers -------------------------------------------------
    def _peek(self, offset: int = 0) -> Token:
        return self._tokens[min(self._pos + offset, len(self._tokens) - 1)]

    def _next(self) -> Token:
        token = self._peek()
        self._pos += 1
        return token

    def _error(self, message: str, token: Optional[Token] = None) -> ProgramSyntaxError:
        token = token or self._peek()
        return ProgramSyntaxError(message, token.line, token.column)

    def _expect(self, text: str) -> Token:
        token = self._next()
        if token.text != text:
            found = token.text or "fin de fichier"
            raise self._error(f"'{text}' attendu, trouvé '{found}'", token)
        return token

    def _expect_kind(self, kind: str, what: str) -> Token:
        token = self._next()
        if token.kind != kind:
            raise self._error(f"{what} attendu, trouvé '{token.text or 'fin de fichier'}'", token)
        return token

    # -- grammar -------------------------------------------------------
    def _block_declaration(self) -> BlockId:
        self._expect("var")
        name = self._expect_kind("ident", "nom de bloc").text
        self._expect("=")
        self._expect("new")
        self._expect("SharedArrayBuffer")
        self._expect("(")
        size = self.default_block_size
        if self._peek().kind == "number":
            size = self._int(self._next())
        self._expect(")")
        self._expect(";")
        return BlockId(name, size)

    def _thread(self) -> None:
        keyword = self._next()
        if keyword.text != "Thread":
            raise self._error(f"'Thread' attendu, trouvé '{keyword.text}'", keyword)
        name_token = self._expect_kind("ident", "nom de thread")
        try:
            self._builder.add_thread(name_token.text)
        except ValueError as exc:
            raise self._error(str(exc), name_token) from exc
        self._expect("{")
        self._statements(name_token.text, ALWAYS, {}, 0)
        self._expect("}")

    def _statements(self, thread: str, guard: ActivationGuard, env: Dict[str, int], depth: int) -> None:
        while self._peek().text != "}":
            if self._peek().kind == "eof":
                raise self._error("'}' attendu avant la fin de fichier")
            self._statement(thread, guard, env, depth)

    def _body(self, thread: str, guard: ActivationGuard, env: Dict[str, int], depth: int) -> None:
        self._expect("{")
        self._statements(thread, guard, env, depth)
        self._expect("}")

    def _statement(self, thread: str, guard: ActivationGuard, env: Dict[str, int], depth: int) -> None:
        token = self._peek()
        if token.text == "if":
            self._if(thread, guard, env, depth)
        elif token.text == "for":
            self._for(thread, guard, env, depth)
        elif token.text == "while":
            raise self._error("boucle non bornée: seules les boucles 'for (i in a..b)' sont acceptées", token)
        else:
            self._access_statement(thread, guard, env)

    def _if(self, thread: str, guard: ActivationGuard, env: Dict[str, int], depth: int) -> None:
        token = self._expect("if")
        if depth + 1 > self.max_if_depth:
            raise self._error(f"profondeur de 'if' supérieure à {self.max_if_depth}", token)
        self._expect("(")
        order, tear = self._prefixes()
        block, view, index = self._access(env)
        op_token = self._next()
        if op_token.text not in ("==", "!="):
            raise self._error("'==' ou '!=' attendu dans la condition", op_token)
        constant = self._value(env)
        self._expect(")")
        read = self._add(thread, EventKind.READ, order, block, index, view, tear, guard)
        control = self._builder.add_control_var(read.id, op_token.text, constant)
        self._body(thread, guard.extended(control.id, True), env, depth + 1)
        if self._peek().text == "else":
            self._next()
            self._body(thread, guard.extended(control.id, False), env, depth + 1)

    def _for(self, thread: str, guard: ActivationGuard, env: Dict[str, int], depth: int) -> None:
        token = self._expect("for")
        self._expect("(")
        var = self._expect_kind("ident", "variable de boucle").text
        self._expect("in")
        lower = self._int_value(env)
        self._expect("..")
        if self._peek().text == ")":
            raise self._error("boucle non bornée: borne supérieure manquante", token)
        upper = self._int_value(env)
        self._expect(")")
        if upper - lower > self.max_loop_bound:
            raise self._error(f"boucle de {upper - lower} itérations, maximum {self.max_loop_bound}", token)
        start = self._pos
        end = start
        for value in range(lower, upper):
            self._pos = start
            self._body(thread, guard, {**env, var: value}, depth)
            end = self._pos
        if upper <= lower:
            # Zero iterations: skip the body without emitting events.
            self._skip_body()
            end = self._pos
        self._pos = end

    def _skip_body(self) -> None:
        self._expect("{")
        level = 1
        while level:
            token = self._next()
            if token.kind == "eof":
                raise self._error("'}' attendu avant la fin de fichier", token)
            if token.text == "{":
                level += 1
            elif token.text == "}":
                level -= 1

    def _access_statement(self, thread: str, guard: ActivationGuard, env: Dict[str, int]) -> None:
        order, tear = self._prefixes()
        if self._peek().text == "print":
            self._next()
            self._expect("(")
            block, view, index = self._access(env)
            self._expect(")")
            self._expect(";")
            self._add(thread, EventKind.READ, order, block, index, view, tear, guard)
            return
        if self._peek().kind != "access":
            raise self._error(f"instruction inattendue '{self._peek().text or 'fin de fichier'}'")
        block, view, index = self._access(env)
        op_token = self._next()
        if op_token.text == "=":
            value = self._value(env)
            self._expect(";")
            self._add(thread, EventKind.WRITE, order, block, index, view, tear, guard, payload=value)
        elif op_token.text in RMW_OPS:
            value = self._value(env)
            self._expect(";")
            self._add(
                thread, EventKind.RMW, order, block, index, view, tear, guard,
                payload=value, modify_op=RMW_OPS[op_token.text],
            )
        else:
            raise self._error(f"'=' ou opérateur composé attendu, trouvé '{op_token.text}'", op_token)

    def _prefixes(self):
        order, tear = Order.UNORDERED, False
        while self._peek().text in PREFIXES:
            if self._next().text == "atomic":
                order = Order.SEQ_CST
            else:
                tear = True
        return order, tear

    def _access(self, env: Dict[str, int]):
        token = self._expect_kind("access", "accès 'bloc-VUE[index]'")
        block, view_label = token.text.rsplit("-", 1)
        try:
            self._builder.block(block)
        except KeyError as exc:
            raise self._error(f"bloc non déclaré {block}", token) from exc
        try:
            view = ViewKind.parse(view_label)
        except ValueError as exc:
            raise self._error(str(exc), token) from exc
        self._expect("[")
        index = self._int_value(env)
        if self._peek().text == "+":
            self._next()
            index += self._int_value(env)
        self._expect("]")
        return block, view, index

    def _int_value(self, env: Dict[str, int]) -> int:
        token = self._next()
        if token.kind == "number":
            return self._int(token)
        if token.kind == "ident" and token.text in env:
            return env[token.text]
        raise self._error(f"entier ou variable de boucle attendu, trouvé '{token.text}'", token)

    def _value(self, env: Dict[str, int]) -> Union[int, float]:
        sign = 1
        if self._peek().text == "-":
            self._next()
            sign = -1
        token = self._next()
        if token.kind == "number":
            text = token.text
            number = float(text) if any(c in text for c in ".eE") else int(text)
            return sign * number
        if token.kind == "ident" and token.text in env:
            return sign * env[token.text]
        raise self._error(f"valeur attendue, trouvé '{token.text}'", token)

    def _int(self, token: Token) -> int:
        if not token.text.isdigit():
            raise self._error(f"entier attendu, trouvé '{token.text}'", token)
        return int(token.text)

    def _add(self, thread, kind, order, block, index, view, tear, guard, payload=None, modify_op=None) -> MemoryEvent:
        return self._builder.add_event(
            thread, kind, order, block, index, view,
            tear=tear, guard=guard, payload=payload, modify_op=modify_op,
        )


def parse(src: Union[SourceProgram, str], validate: bool = True, **options) -> Program:
    return ProgramParser(**options).parse(src, validate=validate)


def _format_number(value) -> str:
    if isinstance(value, float) and value.is_integer():
        return repr(value)
    return str(value)


def _emit_access(event: MemoryEvent) -> tuple[str, str]:
    prefix = ("atomic " if event.order is Order.SEQ_CST else "") + ("tear " if event.tear else "")
    return prefix, event.access_text


def _emit_nodes(nodes: list, indent: int, lines: List[str]) -> None:
    pad = "  " * indent
    for node in nodes:
        if isinstance(node, Branch):
            prefix, access = _emit_access(node.condition)
            control = node.control_var
            lines.append(f"{pad}if ({prefix}{access} {control.op} {_format_number(control.constant)}) {{")
            _emit_nodes(node.then_nodes, indent + 1, lines)
            if node.else_nodes:
                lines.append(f"{pad}}} else {{")
                _emit_nodes(node.else_nodes, indent + 1, lines)
            lines.append(f"{pad}}}")
            continue
        prefix, access = _emit_access(node)
        if node.kind is EventKind.READ:
            lines.append(f"{pad}{prefix}print({access});")
        elif node.kind is EventKind.WRITE:
            lines.append(f"{pad}{prefix}{access} = {_format_number(node.payload)};")
        else:
            lines.append(f"{pad}{prefix}{access} {node.modify_op}= {_format_number(node.payload)};")


def emit_source(p: Program) -> str:
    """Render a program back to source text; parsing the result yields an equivalent program."""
    lines = [f"var {b.name} = new SharedArrayBuffer({b.size_bytes});" for b in p.blocks]
    for thread in p.threads:
        lines.append("")
        lines.append(f"Thread {thread.name} {{")
        _emit_nodes(statement_tree(p, thread.events), 1, lines)
        lines.append("}")
    return "\n".join(lines) + "\n"
