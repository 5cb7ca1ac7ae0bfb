"""Report trees and their two renderings.

A report is a nested structure of dicts, lists, strings, ints, bools and None.
The machine format writes one ``dotted.path = value`` line per leaf; list
elements use their index as path component.  ``parse_machine`` inverts
``format_machine`` exactly.
"""

import re

_INT = re.compile(r"-?\d+$")


def _quote(s):
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def _unquote(s):
    out = []
    i = 1
    while i < len(s) - 1:
        c = s[i]
        if c == "\\":
            nxt = s[i + 1]
            out.append("\n" if nxt == "n" else nxt)
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


def _leaf(v):
    if v is None:
        return "none"
    if v is True:
        return "true"
    if v is False:
        return "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return _quote(v)
    raise TypeError("unsupported report value %r" % (v,))


def _flatten(node, prefix, out):
    if isinstance(node, dict):
        if not node:
            out.append((prefix, "{}"))
        for k, v in node.items():
            if "." in k or not k:
                raise ValueError("bad report key %r" % k)
            _flatten(v, "%s.%s" % (prefix, k) if prefix else k, out)
    elif isinstance(node, (list, tuple)):
        if not node:
            out.append((prefix, "[]"))
        for i, v in enumerate(node):
            _flatten(v, "%s.%d" % (prefix, i), out)
    else:
        out.append((prefix, _leaf(node)))


def format_machine(report):
    lines = []
    _flatten(report, "", lines)
    return "".join("%s = %s\n" % kv for kv in lines)


def _parse_leaf(s):
    if s == "none":
        return None
    if s == "true":
        return True
    if s == "false":
        return False
    if s == "{}":
        return {}
    if s == "[]":
        return []
    if s.startswith('"'):
        return _unquote(s)
    if _INT.match(s):
        return int(s)
    raise ValueError("cannot parse value %r" % s)


def _listify(node):
    if isinstance(node, dict):
        node = {k: _listify(v) for k, v in node.items()}
        if node and all(_INT.match(k) for k in node):
            idx = sorted(node, key=int)
            if [int(k) for k in idx] == list(range(len(idx))):
                return [node[k] for k in idx]
    return node


def parse_machine(text):
    root = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        path, sep, value = line.partition(" = ")
        if not sep:
            raise ValueError("malformed line %r" % line)
        keys = path.split(".")
        node = root
        for k in keys[:-1]:
            node = node.setdefault(k, {})
        node[keys[-1]] = _parse_leaf(value)
    return _listify(root)


def _text(node, indent, out):
    pad = "  " * indent
    if isinstance(node, dict):
        for k, v in node.items():
            if isinstance(v, (dict, list)) and v and not _is_flat_list(v):
                out.append("%s%s:" % (pad, k))
                _text(v, indent + 1, out)
            else:
                out.append("%s%s: %s" % (pad, k, _inline(v)))
    else:
        for i, v in enumerate(node):
            if isinstance(v, (dict, list)) and v and not _is_flat_list(v):
                out.append("%s- [%d]" % (pad, i))
                _text(v, indent + 1, out)
            else:
                out.append("%s- %s" % (pad, _inline(v)))


def _is_flat_list(v):
    return isinstance(v, list) and all(not isinstance(x, (dict, list)) for x in v)


def _inline(v):
    if isinstance(v, list):
        return "(" + ", ".join(_inline(x) for x in v) + ")"
    if isinstance(v, dict):
        return "{}"
    if isinstance(v, str):
        return v
    return _leaf(v)


def format_text(report):
    out = []
    _text(report, 0, out)
    return "\n".join(out) + "\n"
