"""Reader and writer for line-oriented system definition files.

A file has up to four sections::

    [system]
    states = [x1, x2]
    inputs = [u1, u2]
    f  = ["x2", "0"]
    g1 = ["0", "1"]
    g2 = ["1", "0"]

    [constants]
    names = [a]

    [candidate]
    phi1 = "x1"

    [options]
    seed = 0x5EED
    float = false

Expressions are double-quoted; names may be bare.  A bracketed list may span
several lines.  ``#`` starts a comment outside quotes.
"""

from dataclasses import dataclass, field
from typing import Optional

from ..symrat import Chart, ExprSyntaxError, ParseError, UndeclaredIdentifier, parse_expr, print_expr
from ..flatness.model import DimensionMismatch, FlatCandidate, SystemModel

SECTIONS = {
    "system": {"states", "inputs", "f", "g1", "g2"},
    "constants": {"names"},
    "candidate": {"phi1", "phi2"},
    "options": {"seed", "float"},
}


class SysFileError(ParseError):
    def __init__(self, msg, line=None, column=None, path=None):
        self.line = line
        self.column = column
        self.path = path
        where = ":".join(str(p) for p in (path, line, column) if p is not None)
        super().__init__("%s: %s" % (where, msg) if where else msg)


@dataclass
class Item:
    text: str
    quoted: bool
    line: int
    column: int


@dataclass
class Entry:
    key: str
    value: object          # Item or list of Item
    line: int
    column: int


@dataclass
class SystemFile:
    sys: SystemModel
    candidate: Optional[FlatCandidate] = None
    seed: Optional[int] = None
    float_mode: bool = False
    path: Optional[str] = None
    entries: dict = field(default_factory=dict, repr=False)


def _strip_comment(line):
    quoted = False
    for i, c in enumerate(line):
        if c == '"':
            quoted = not quoted
        elif c == "#" and not quoted:
            return line[:i]
    return line


def _scan_items(text, line, col0, path):
    """Split the inside of a list (or a scalar) into items, tracking positions."""
    items = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c.isspace() or c == ",":
            i += 1
            continue
        if c == '"':
            j = text.find('"', i + 1)
            if j < 0:
                raise SysFileError("unterminated string", line, col0 + i + 1, path)
            items.append(Item(text[i + 1:j], True, line, col0 + i + 2))
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in ',"':
                j += 1
            items.append(Item(text[i:j], False, line, col0 + i + 1))
            i = j
        k = i
        while k < n and text[k].isspace():
            k += 1
        if k < n and text[k] != ",":
            raise SysFileError("expected ',' between list items", line, col0 + k + 1, path)
    return items


def _read_entries(text, path=None):
    sections = {}
    current = None
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        lineno = i + 1
        raw = _strip_comment(lines[i])
        i += 1
        s = raw.strip()
        if not s:
            continue
        if s.startswith("["):
            if not s.endswith("]"):
                raise SysFileError("malformed section header", lineno, 1, path)
            name = s[1:-1].strip()
            if name not in SECTIONS:
                raise SysFileError("unknown section [%s]" % name, lineno, raw.index("[") + 1, path)
            if name in sections:
                raise SysFileError("duplicate section [%s]" % name, lineno, 1, path)
            current = sections[name] = {}
            continue
        if "=" not in s:
            raise SysFileError("expected 'key = value'", lineno, len(raw) - len(raw.lstrip()) + 1, path)
        if current is None:
            raise SysFileError("entry outside of a section", lineno, 1, path)
        key, _, rest = raw.partition("=")
        key = key.strip()
        kcol = raw.index(key) + 1 if key else 1
        name = next(k for k, v in sections.items() if v is current)
        if key not in SECTIONS[name]:
            raise SysFileError("unknown key %r in [%s]" % (key, name), lineno, kcol, path)
        if key in current:
            raise SysFileError("duplicate key %r" % key, lineno, kcol, path)
        vcol = len(raw) - len(rest)
        stripped = rest.lstrip()
        vcol += len(rest) - len(stripped)
        if stripped.startswith("["):
            # gather until the closing bracket, possibly over several lines
            chunks = []
            body, col, ln = stripped[1:], vcol + 1, lineno
            while True:
                close = _find_close(body)
                if close is not None:
                    if body[close + 1:].strip():
                        raise SysFileError("unexpected text after ']'", ln, col + close + 2, path)
                    chunks.append((body[:close], ln, col))
                    break
                chunks.append((body, ln, col))
                if i >= len(lines):
                    raise SysFileError("unterminated list", lineno, vcol + 1, path)
                body, col, ln = _strip_comment(lines[i]), 0, i + 1
                i += 1
            items = []
            for chunk, ln, col in chunks:
                items += _scan_items(chunk, ln, col, path)
            current[key] = Entry(key, items, lineno, kcol)
        else:
            items = _scan_items(stripped.rstrip(), lineno, vcol, path)
            if len(items) != 1:
                raise SysFileError("expected a single value for %r" % key, lineno, vcol + 1, path)
            current[key] = Entry(key, items[0], lineno, kcol)
    return sections


def _find_close(body):
    quoted = False
    for k, c in enumerate(body):
        if c == '"':
            quoted = not quoted
        elif c == "]" and not quoted:
            return k
    return None


def _names(entry, path):
    if not isinstance(entry.value, list):
        raise SysFileError("%r must be a list" % entry.key, entry.line, entry.column, path)
    out = []
    for it in entry.value:
        if not it.text.isidentifier():
            raise SysFileError("%r is not a valid name" % it.text, it.line, it.column, path)
        out.append(it.text)
    return out


def _expr(item, chart, path):
    try:
        return parse_expr(item.text, chart)
    except ExprSyntaxError as exc:
        col = item.column + exc.position
        raise SysFileError("syntax error: expected one of %s" % ", ".join(exc.expected),
                           item.line, col, path) from None
    except UndeclaredIdentifier as exc:
        col = item.column + (exc.position or 0)
        err = UndeclaredIdentifier(exc.name, exc.position)
        err.line, err.column = item.line, col
        err.args = ("%s:%d:%d: undeclared identifier %r" % (path or "<input>", item.line, col, exc.name),)
        raise err from None
    except ParseError:
        raise
    except Exception as exc:
        raise SysFileError(str(exc), item.line, item.column, path) from None


def parse_system_text(text, path=None):
    sec = _read_entries(text, path)
    if "system" not in sec:
        raise SysFileError("missing [system] section", None, None, path)
    s = sec["system"]
    for key in ("states", "inputs", "f", "g1", "g2"):
        if key not in s:
            raise SysFileError("missing key %r in [system]" % key, None, None, path)
    states = _names(s["states"], path)
    inputs = _names(s["inputs"], path)
    if len(inputs) != 2:
        e = s["inputs"]
        raise DimensionMismatch("%s:%d: exactly 2 inputs required, got %d"
                                % (path or "<input>", e.line, len(inputs)))
    consts = _names(sec["constants"]["names"], path) if "names" in sec.get("constants", {}) else []
    try:
        chart = Chart(states, consts)
    except ValueError as exc:
        raise SysFileError(str(exc), s["states"].line, s["states"].column, path) from None
    comps = {}
    for key in ("f", "g1", "g2"):
        e = s[key]
        if not isinstance(e.value, list):
            raise SysFileError("%r must be a list" % key, e.line, e.column, path)
        if len(e.value) != len(states):
            raise DimensionMismatch("%s:%d: %s has %d entries for %d states"
                                    % (path or "<input>", e.line, key, len(e.value), len(states)))
        comps[key] = [_expr(it, chart, path) for it in e.value]
    try:
        sys = SystemModel(states, inputs, comps["f"], comps["g1"], comps["g2"], consts)
    except DimensionMismatch as exc:
        raise DimensionMismatch("%s: %s" % (path or "<input>", exc)) from None
    cand = None
    if "candidate" in sec and "phi1" in sec["candidate"]:
        c = sec["candidate"]
        phis = []
        for key in ("phi1", "phi2"):
            if key in c:
                if isinstance(c[key].value, list):
                    raise SysFileError("%r must be a single expression" % key, c[key].line, c[key].column, path)
                phis.append(_expr(c[key].value, chart, path))
        cand = FlatCandidate(*phis)
    seed, float_mode = None, False
    opts = sec.get("options", {})
    if "seed" in opts:
        it = opts["seed"].value
        try:
            seed = int(it.text, 0)
        except (ValueError, AttributeError):
            raise SysFileError("seed must be an integer", opts["seed"].line, opts["seed"].column, path) from None
    if "float" in opts:
        it = opts["float"].value
        if getattr(it, "text", None) not in ("true", "false"):
            raise SysFileError("float must be true or false", opts["float"].line, opts["float"].column, path)
        float_mode = it.text == "true"
    return SystemFile(sys, cand, seed, float_mode, path, sec)


def load_system(path):
    """Read and validate a system file; returns a :class:`SystemFile`."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise SysFileError("cannot read file: %s" % exc.strerror, None, None, str(path)) from None
    return parse_system_text(text, str(path))


def _list(key, items, quote):
    body = ['"%s"' % x if quote else x for x in items]
    one = "%s = [%s]" % (key, ", ".join(body))
    if len(one) <= 80:
        return one
    return "%s = [\n%s\n]" % (key, ",\n".join("    " + b for b in body))


def format_system(sys, candidate=None, seed=None, float_mode=None, title=None):
    """Render ``sys`` in the system-file format (read back by ``parse_system_text``)."""
    out = []
    if title:
        out += ["# " + line for line in title.splitlines()]
        out.append("")
    out.append("[system]")
    out.append(_list("states", sys.states, False))
    out.append(_list("inputs", sys.inputs, False))
    for key in ("f", "g1", "g2"):
        out.append(_list(key, [print_expr(e) for e in getattr(sys, key)], True))
    if sys.constants:
        out += ["", "[constants]", _list("names", sys.constants, False)]
    if candidate is not None:
        out += ["", "[candidate]"]
        for key, phi in zip(("phi1", "phi2"), candidate):
            out.append('%s = "%s"' % (key, print_expr(phi)))
    if seed is not None or float_mode is not None:
        out += ["", "[options]"]
        if seed is not None:
            out.append("seed = %#x" % seed)
        if float_mode is not None:
            out.append("float = %s" % ("true" if float_mode else "false"))
    return "\n".join(out) + "\n"
