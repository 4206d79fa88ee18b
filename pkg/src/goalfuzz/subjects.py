"""Built-in instrumented demo subjects."""

from __future__ import annotations

from .feedback import BuiltinSubject, SubjectException, Tracer

EUCLID_UNITS = (
    "parse-args", "format-error", "entry", "x-zero", "swap",
    "mod-test", "div-by-zero", "return-y", "recurse",
)
MAX_RECURSION = 10_000


def _euclid_program(data: bytes, t: Tracer) -> int:
    t.cover("parse-args")
    t.step()
    if not (data.startswith(b"euclid(") and data.endswith(b")")):
        raise SubjectException("FormatError")
    t.step()
    args = data[len(b"euclid("):-1].split(b",")
    if len(args) != 2 or not all(a.isdigit() for a in args):
        t.cover("format-error")
        raise SubjectException("FormatError")
    t.step(2)
    return _euclid(int(args[0]), int(args[1]), t)


def _euclid(x: int, y: int, t: Tracer) -> int:
    # Iterative form of the recursive original; ``depth`` mirrors its stack.
    # The missing ``y == 0`` guard is the deliberate division-by-zero bug.
    depth = 0
    while True:
        if depth >= MAX_RECURSION:
            raise SubjectException("StackOverflow")
        t.cover("entry")
        t.step()
        if x == 0:
            t.cover("x-zero")
            t.step()
            return 1
        t.step()
        if x < y:
            t.cover("swap")
            t.step(3)
            x, y = y, x
        t.cover("mod-test")
        t.step()
        if y == 0:
            t.cover("div-by-zero")
            raise SubjectException("DivisionByZero")
        if x % y == 0:
            t.cover("return-y")
            t.step()
            return y
        t.cover("recurse")
        t.step()
        x, y = y, x % y
        depth += 1


def euclid_subject() -> BuiltinSubject:
    # Statement budget: a little above the longest run reachable with
    # three-digit arguments (consecutive Fibonacci numbers, ~100 statements).
    return BuiltinSubject("euclid", EUCLID_UNITS, _euclid_program, default_timeout=150)


# --- JSON reader and flattener ----------------------------------------------

JSON_UNITS = (
    "read", "whitespace", "value", "object", "object-empty", "object-member",
    "object-comma", "array", "array-empty", "array-element", "array-comma",
    "string", "string-escape", "escape-unicode", "number", "number-negative",
    "number-fraction", "number-exponent", "literal-true", "literal-false",
    "literal-null", "syntax-error", "trailing-data", "flatten-object",
    "flatten-array", "flatten-leaf", "flatten-empty",
)
MAX_NESTING = 64
_SIMPLE_ESCAPES = {ord('"'): '"', ord("\\"): "\\", ord("/"): "/", ord("b"): "\b",
                   ord("f"): "\f", ord("n"): "\n", ord("r"): "\r", ord("t"): "\t"}


class _Reader:
    def __init__(self, data: bytes, t: Tracer):
        self.s = data
        self.i = 0
        self.t = t

    def fail(self):
        self.t.cover("syntax-error")
        raise SubjectException("JSONSyntaxError")

    def peek(self) -> int | None:
        return self.s[self.i] if self.i < len(self.s) else None

    def expect(self, byte: bytes):
        self.t.step()
        if not self.s.startswith(byte, self.i):
            self.fail()
        self.i += len(byte)

    def ws(self):
        start = self.i
        while self.peek() in (0x20, 0x09, 0x0A, 0x0D):
            self.t.step()
            self.i += 1
        if self.i > start:
            self.t.cover("whitespace")

    def value(self, depth: int):
        t = self.t
        t.cover("value")
        t.step()
        if depth > MAX_NESTING:
            raise SubjectException("StackOverflow")
        c = self.peek()
        if c == ord("{"):
            return self.object(depth)
        if c == ord("["):
            return self.array(depth)
        if c == ord('"'):
            return self.string()
        if c is not None and (c == ord("-") or 0x30 <= c <= 0x39):
            return self.number()
        for word, unit, val in ((b"true", "literal-true", True),
                                (b"false", "literal-false", False),
                                (b"null", "literal-null", None)):
            if self.s.startswith(word, self.i):
                t.cover(unit)
                t.step()
                self.i += len(word)
                return val
        self.fail()

    def object(self, depth: int) -> dict:
        t = self.t
        t.cover("object")
        self.expect(b"{")
        self.ws()
        out = {}
        if self.peek() == ord("}"):
            t.cover("object-empty")
            self.i += 1
            return out
        while True:
            t.cover("object-member")
            self.ws()
            if self.peek() != ord('"'):
                self.fail()
            key = self.string()
            self.ws()
            self.expect(b":")
            self.ws()
            out[key] = self.value(depth + 1)
            self.ws()
            if self.peek() == ord(","):
                t.cover("object-comma")
                t.step()
                self.i += 1
                continue
            self.expect(b"}")
            return out

    def array(self, depth: int) -> list:
        t = self.t
        t.cover("array")
        self.expect(b"[")
        self.ws()
        out = []
        if self.peek() == ord("]"):
            t.cover("array-empty")
            self.i += 1
            return out
        while True:
            t.cover("array-element")
            self.ws()
            out.append(self.value(depth + 1))
            self.ws()
            if self.peek() == ord(","):
                t.cover("array-comma")
                t.step()
                self.i += 1
                continue
            self.expect(b"]")
            return out

    def string(self) -> str:
        t = self.t
        t.cover("string")
        self.expect(b'"')
        chars = []
        while True:
            t.step()
            c = self.peek()
            if c is None or c < 0x20:
                self.fail()
            self.i += 1
            if c == ord('"'):
                return "".join(chars)
            if c != ord("\\"):
                chars.append(chr(c))
                continue
            t.cover("string-escape")
            e = self.peek()
            self.i += 1
            if e in _SIMPLE_ESCAPES:
                chars.append(_SIMPLE_ESCAPES[e])
            elif e == ord("u"):
                t.cover("escape-unicode")
                # Defect: the four code-unit characters are taken without
                # checking that they exist or that they are hex digits.
                if self.i + 4 > len(self.s):
                    raise SubjectException("StringIndexOutOfBounds")
                digits = self.s[self.i:self.i + 4]
                try:
                    chars.append(chr(int(digits, 16)))
                except ValueError:
                    raise SubjectException("NumberFormatException") from None
                t.step(4)
                self.i += 4
            else:
                self.fail()

    def number(self):
        t = self.t
        t.cover("number")
        start = self.i
        if self.peek() == ord("-"):
            t.cover("number-negative")
            self.i += 1
        if not self._digits():
            self.fail()
        is_float = False
        if self.peek() == ord("."):
            t.cover("number-fraction")
            self.i += 1
            is_float = True
            if not self._digits():
                self.fail()
        if self.peek() in (ord("e"), ord("E")):
            t.cover("number-exponent")
            self.i += 1
            is_float = True
            if self.peek() in (ord("+"), ord("-")):
                self.i += 1
            if not self._digits():
                self.fail()
        text = self.s[start:self.i]
        return float(text) if is_float else int(text)

    def _digits(self) -> bool:
        start = self.i
        while (c := self.peek()) is not None and 0x30 <= c <= 0x39:
            self.t.step()
            self.i += 1
        return self.i > start


def _flatten(value, t: Tracer) -> dict:
    out = {}
    stack = [("", value)]
    while stack:
        prefix, v = stack.pop()
        t.step()
        if isinstance(v, dict) and v:
            t.cover("flatten-object")
            for key in reversed(list(v)):
                stack.append((f"{prefix}.{key}" if prefix else key, v[key]))
        elif isinstance(v, list) and v:
            t.cover("flatten-array")
            for k in range(len(v) - 1, -1, -1):
                stack.append((f"{prefix}[{k}]", v[k]))
        elif isinstance(v, (dict, list)):
            t.cover("flatten-empty")
            out[prefix] = v
        else:
            t.cover("flatten-leaf")
            out[prefix] = v
    return out


def _json_flatten_program(data: bytes, t: Tracer) -> dict:
    t.cover("read")
    reader = _Reader(data, t)
    reader.ws()
    value = reader.value(0)
    reader.ws()
    if reader.i != len(data):
        t.cover("trailing-data")
        reader.fail()
    return _flatten(value, t)


def json_flatten_subject() -> BuiltinSubject:
    return BuiltinSubject("json", JSON_UNITS, _json_flatten_program, default_timeout=5000)


BUILTIN_SUBJECTS = {
    "euclid": euclid_subject,
    "json": json_flatten_subject,
}
