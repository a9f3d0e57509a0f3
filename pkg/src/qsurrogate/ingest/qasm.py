"""Parser and printer for a small OpenQASM 2.0 subset.

Only state-preparation programs are accepted: one ``qreg``, gates from
:data:`GATE_ARITY`, no custom gate definitions, no classical registers or
measurement. Angle expressions support decimal literals, ``pi``, unary
minus, ``+ - * /`` and parentheses.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from ..simulator import apply_matrix, apply_single, zero_state

# name -> (number of angle parameters, number of qubit operands)
GATE_ARITY: dict[str, tuple[int, int]] = {
    "h": (0, 1),
    "x": (0, 1),
    "y": (0, 1),
    "z": (0, 1),
    "s": (0, 1),
    "sdg": (0, 1),
    "t": (0, 1),
    "tdg": (0, 1),
    "rx": (1, 1),
    "ry": (1, 1),
    "rz": (1, 1),
    "u": (3, 1),
    "u3": (3, 1),
    "cx": (0, 2),
    "cz": (0, 2),
}

_MAX_DEPTH = 64


class QasmError(ValueError):
    """Parse error carrying a 1-based line and column."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class GateStatement:
    name: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()


@dataclass
class QasmProgram:
    n_qubits: int
    statements: list[GateStatement] = field(default_factory=list)
    qreg_name: str = "q"

    def __post_init__(self) -> None:
        for st in self.statements:
            if st.name not in GATE_ARITY:
                raise ValueError(f"unsupported gate {st.name!r}")
            if any(not 0 <= q < self.n_qubits for q in st.qubits):
                raise ValueError(f"operand out of range in {st}")


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"[^"\n]*")
  | (?P<sym>[;,\[\]()+\-*/])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(source: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise QasmError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, source: str):
        self.toks = _tokenize(source)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, message: str, tok: _Tok | None = None) -> QasmError:
        tok = tok or self.tok
        return QasmError(message, tok.line, tok.col)

    def advance(self) -> _Tok:
        tok = self.tok
        if tok.kind != "eof":
            self.i += 1
        return tok

    def expect(self, text: str) -> _Tok:
        if self.tok.text != text or self.tok.kind == "string":
            shown = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {shown!r}")
        return self.advance()

    def expect_kind(self, kind: str, what: str) -> _Tok:
        if self.tok.kind != kind:
            shown = self.tok.text or "end of input"
            raise self.error(f"expected {what}, found {shown!r}")
        return self.advance()

    # -- program -------------------------------------------------------

    def program(self) -> QasmProgram:
        self.expect("OPENQASM")
        version = self.expect_kind("number", "version number")
        if version.text not in ("2.0", "2"):
            raise self.error(f"unsupported OpenQASM version {version.text}", version)
        self.expect(";")
        if self.tok.text == "include":
            self.advance()
            inc = self.expect_kind("string", "include file name")
            if inc.text != '"qelib1.inc"':
                raise self.error(f"unsupported include {inc.text}", inc)
            self.expect(";")

        qreg_name: str | None = None
        n_qubits = 0
        statements: list[GateStatement] = []
        while self.tok.kind != "eof":
            tok = self.tok
            if tok.kind != "ident":
                raise self.error(f"expected a statement, found {tok.text!r}")
            word = tok.text
            if word == "qreg":
                if qreg_name is not None:
                    raise self.error("only one qreg is supported")
                if statements:
                    raise self.error("qreg must precede gate statements")
                self.advance()
                qreg_name = self.expect_kind("ident", "register name").text
                self.expect("[")
                size_tok = self.expect_kind("number", "register size")
                if not size_tok.text.isdigit() or int(size_tok.text) < 1:
                    raise self.error("register size must be a positive integer", size_tok)
                n_qubits = int(size_tok.text)
                if n_qubits > 30:
                    raise self.error("register too large for dense simulation", size_tok)
                self.expect("]")
                self.expect(";")
            elif word in ("creg", "measure", "barrier", "reset", "if", "gate", "opaque"):
                raise self.error(f"{word!r} statements are not supported")
            elif word in GATE_ARITY:
                if qreg_name is None:
                    raise self.error("gate statement before qreg declaration")
                statements.append(self.gate(qreg_name, n_qubits))
            else:
                raise self.error(f"unsupported gate {word!r}")
        if qreg_name is None:
            raise self.error("missing qreg declaration")
        return QasmProgram(n_qubits, statements, qreg_name)

    def gate(self, qreg_name: str, n_qubits: int) -> GateStatement:
        name_tok = self.advance()
        name = name_tok.text
        n_params, n_ops = GATE_ARITY[name]
        params: list[float] = []
        if self.tok.text == "(":
            self.advance()
            if self.tok.text != ")":
                params.append(self.angle())
                while self.tok.text == ",":
                    self.advance()
                    params.append(self.angle())
            self.expect(")")
        if len(params) != n_params:
            raise self.error(f"gate {name!r} takes {n_params} parameter(s), got {len(params)}", name_tok)
        qubits = [self.operand(qreg_name, n_qubits)]
        while self.tok.text == ",":
            self.advance()
            qubits.append(self.operand(qreg_name, n_qubits))
        if len(qubits) != n_ops:
            raise self.error(f"gate {name!r} takes {n_ops} qubit(s), got {len(qubits)}", name_tok)
        if len(set(qubits)) != len(qubits):
            raise self.error(f"repeated qubit operand in {name!r}", name_tok)
        self.expect(";")
        return GateStatement(name, tuple(qubits), tuple(params))

    def operand(self, qreg_name: str, n_qubits: int) -> int:
        reg = self.expect_kind("ident", "qubit operand")
        if reg.text != qreg_name:
            raise self.error(f"unknown register {reg.text!r}", reg)
        self.expect("[")
        idx_tok = self.expect_kind("number", "qubit index")
        if not idx_tok.text.isdigit():
            raise self.error("qubit index must be an integer", idx_tok)
        idx = int(idx_tok.text)
        if idx >= n_qubits:
            raise self.error(f"qubit index {idx} out of range for {qreg_name}[{n_qubits}]", idx_tok)
        self.expect("]")
        return idx

    # -- expressions ---------------------------------------------------

    def angle(self) -> float:
        start = self.tok
        value = self.expr(0)
        if not math.isfinite(value):
            raise self.error("angle expression is not finite", start)
        return value

    def expr(self, depth: int) -> float:
        value = self.term(depth)
        while self.tok.text in ("+", "-"):
            op = self.advance().text
            rhs = self.term(depth)
            value = value + rhs if op == "+" else value - rhs
        return value

    def term(self, depth: int) -> float:
        value = self.unary(depth)
        while self.tok.text in ("*", "/"):
            op_tok = self.advance()
            rhs = self.unary(depth)
            if op_tok.text == "*":
                value = value * rhs
            else:
                if rhs == 0:
                    raise self.error("division by zero", op_tok)
                value = value / rhs
        return value

    def unary(self, depth: int) -> float:
        if depth > _MAX_DEPTH:
            raise self.error("expression nested too deeply")
        if self.tok.text == "-":
            self.advance()
            return -self.unary(depth + 1)
        if self.tok.text == "+":
            self.advance()
            return self.unary(depth + 1)
        return self.atom(depth)

    def atom(self, depth: int) -> float:
        tok = self.tok
        if tok.kind == "number":
            self.advance()
            return float(tok.text)
        if tok.kind == "ident" and tok.text == "pi":
            self.advance()
            return math.pi
        if tok.text == "(":
            self.advance()
            value = self.expr(depth + 1)
            self.expect(")")
            return value
        raise self.error(f"expected an angle expression, found {tok.text or 'end of input'!r}")


def parse_qasm(source: str) -> QasmProgram:
    """Parse ``source``; raises :class:`QasmError` with a position on failure."""
    return _Parser(source).program()


def _fmt(x: float) -> str:
    return repr(float(x))


def print_qasm(program: QasmProgram) -> str:
    """Emit text that :func:`parse_qasm` maps back to an identical program."""
    reg = program.qreg_name
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg {reg}[{program.n_qubits}];"]
    for st in program.statements:
        head = st.name
        if st.params:
            head += "(" + ",".join(_fmt(p) for p in st.params) + ")"
        ops = ",".join(f"{reg}[{q}]" for q in st.qubits)
        lines.append(f"{head} {ops};")
    return "\n".join(lines) + "\n"


# -- gate matrices -------------------------------------------------------

_SQ2 = 1 / math.sqrt(2)


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array(
        [
            [c, -np.exp(1j * lam) * s],
            [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
        ]
    )


def _rx(t: float) -> np.ndarray:
    c, s = math.cos(t / 2), math.sin(t / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def _ry(t: float) -> np.ndarray:
    c, s = math.cos(t / 2), math.sin(t / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _rz(t: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])


_FIXED_1Q = {
    "h": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]]),
    "z": np.diag([1, -1]).astype(complex),
    "s": np.diag([1, 1j]),
    "sdg": np.diag([1, -1j]),
    "t": np.diag([1, np.exp(0.25j * math.pi)]),
    "tdg": np.diag([1, np.exp(-0.25j * math.pi)]),
}

CX_MATRIX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
CZ_MATRIX = np.diag([1, 1, 1, -1]).astype(complex)


def statement_matrix(st: GateStatement) -> np.ndarray:
    """2x2 or 4x4 matrix of a statement (4x4 in (qubits[0], qubits[1]) order)."""
    if st.name in _FIXED_1Q:
        return _FIXED_1Q[st.name]
    if st.name == "rx":
        return _rx(st.params[0])
    if st.name == "ry":
        return _ry(st.params[0])
    if st.name == "rz":
        return _rz(st.params[0])
    if st.name in ("u", "u3"):
        return u3_matrix(*st.params)
    if st.name == "cx":
        return CX_MATRIX
    if st.name == "cz":
        return CZ_MATRIX
    raise ValueError(f"unsupported gate {st.name!r}")


def to_feature_state(program: QasmProgram) -> np.ndarray:
    """Simulate ``U(x)|0...0>`` for the program."""
    psi = zero_state(program.n_qubits)
    for st in program.statements:
        mat = statement_matrix(st)
        if len(st.qubits) == 1:
            psi = apply_single(psi, mat, st.qubits[0])
        else:
            psi = apply_matrix(psi, mat, st.qubits)
    return psi
