"""Plain-text netlist format.

One whitespace-separated statement per line, ``#`` starts a comment::

    input  <name>
    output <name>
    gate   <id> <KIND> <out_net> <in_net>...
    word   <name> <bit0> <bit1>...        # LSB first
    tag    <gate_id> <instance_tag>
    inst   <tag> <approximate|deterministic> <op_type> <arch_id>

Net ids are assigned in order of first appearance, so serializing with
:func:`serialize_netlist` (inputs, outputs, words, gates by id, tags, insts)
and re-parsing reproduces the netlist exactly; parsing an arbitrary
statement order yields a structurally equal netlist.  Gates without a
``tag`` line default to tag ``u``; missing ``inst`` entries are filled in
as deterministic glue so that minimal hand-written files stay valid.
"""

from __future__ import annotations

from .errors import ParseError
from .netlist import GateKind, Instance, Netlist, NetlistBuilder


def parse_netlist(text: str) -> Netlist:
    b = NetlistBuilder()
    gates = {}          # id -> (kind, out, ins, line)
    tags = {}           # gate id -> tag
    order = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        toks = raw.split("#", 1)[0].split()
        if not toks:
            continue
        kw, args = toks[0], toks[1:]
        if kw == "input":
            if len(args) != 1:
                raise ParseError("input takes one name", lineno)
            b.pi(args[0])
        elif kw == "output":
            if len(args) != 1:
                raise ParseError("output takes one name", lineno)
            b.po(b.net(args[0]))
        elif kw == "gate":
            if len(args) < 3:
                raise ParseError("gate needs id, kind and output", lineno)
            gid = _int(args[0], lineno)
            try:
                kind = GateKind[args[1].upper()]
            except KeyError:
                raise ParseError(f"unknown gate kind {args[1]!r}", lineno) from None
            if gid in gates:
                raise ParseError(f"duplicate gate id {gid}", lineno)
            out = b.net(args[2])
            ins = tuple(b.net(a) for a in args[3:])
            gates[gid] = (kind, out, ins, lineno)
            order.append(gid)
        elif kw == "word":
            if len(args) < 2:
                raise ParseError("word needs a name and at least one bit", lineno)
            b.word(args[0], [b.net(a) for a in args[1:]])
        elif kw == "tag":
            if len(args) != 2:
                raise ParseError("tag takes gate id and instance tag", lineno)
            tags[_int(args[0], lineno)] = args[1]
        elif kw == "inst":
            if len(args) != 4:
                raise ParseError("inst takes tag, kind, op_type, arch_id", lineno)
            if args[1] not in ("approximate", "deterministic"):
                raise ParseError(f"bad instance kind {args[1]!r}", lineno)
            b.instances[args[0]] = Instance(args[1], args[2], args[3])
        else:
            raise ParseError(f"unknown statement {kw!r}", lineno)
    for gid in tags:
        if gid not in gates:
            raise ParseError(f"tag for unknown gate id {gid}")
    from .netlist import Gate
    for gid in order:
        kind, out, ins, _ = gates[gid]
        tag = tags.get(gid, "u")
        b.gates.append(Gate(gid, kind, ins, out, tag))
        if tag not in b.instances:
            b.instances[tag] = Instance("deterministic", "-", "-")
    return b.build()


def _int(tok, lineno):
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"expected an integer, got {tok!r}", lineno) from None


def serialize_netlist(nl: Netlist) -> str:
    """Deterministic canonical text for a netlist (round-trip identity)."""
    name = nl.net_names.__getitem__
    lines = [f"input {name(n)}" for n in nl.inputs]
    lines += [f"output {name(n)}" for n in nl.outputs]
    for w, bits in nl.words.items():
        lines.append(f"word {w} " + " ".join(name(b) for b in bits))
    for g in nl.gates:
        parts = [f"gate {g.id} {g.kind.name} {name(g.output)}"]
        parts += [name(i) for i in g.inputs]
        lines.append(" ".join(parts))
    lines += [f"tag {g.id} {g.tag}" for g in nl.gates]
    for tag in sorted(nl.instances):
        e = nl.instances[tag]
        lines.append(f"inst {tag} {e.kind_label} {e.op_type} {e.arch_id}")
    return "\n".join(lines) + "\n"


def read_netlist(path) -> Netlist:
    with open(path, encoding="utf-8") as f:
        return parse_netlist(f.read())


def write_netlist(nl: Netlist, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write(serialize_netlist(nl))
