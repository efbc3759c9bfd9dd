"""Batch and REPL front end.

One command per line (or several separated by `;`); output is plain
text, one fact per line, with stable ordering so sessions can be
compared byte for byte. The REPL is the batch interpreter reading
interactively; there is no separate code path.
"""

from __future__ import annotations

import argparse
import re
import shlex
import sys

from . import agent, reasoning, sim, store
from .core import Kind, Net, Value
from .errors import CommandError, KrnError, NoLabel
from .lexicon import Lexicon

_NAME_RE = re.compile(r"[a-z][a-z0-9_-]*\Z")
_NUM_RE = re.compile(r"-?[0-9]+(\.[0-9]+)?\Z")
_ID_RE = re.compile(r"#?[0-9]+\Z")

ANSWER_TEXT = {
    reasoning.Answer.YES_ASSERTED: "yes (asserted)",
    reasoning.Answer.YES_INFERRED: "yes (inferred)",
    reasoning.Answer.UNKNOWN: "unknown",
}


class Session:
    def __init__(self):
        self.net = Net()
        self.lexicon = Lexicon()
        self.symbols: dict[str, int] = {}
        self.model: agent.SelfModel | None = None
        self.verb_table = sim.verb_table_from_env()

    def reset(self) -> None:
        self.net = Net()
        self.lexicon = Lexicon()
        self.symbols = {}
        self.model = None

    # -- name handling --

    def resolve(self, tok: str) -> int:
        if _ID_RE.match(tok):
            return int(tok.lstrip("#"))
        if tok in self.symbols:
            return self.symbols[tok]
        hits = self.lexicon.lookup("en", tok)
        if not hits:
            hits = set()
            for (lang, text), nodes in self.lexicon.reverse.items():
                if text == tok:
                    hits |= nodes
        if len(hits) == 1:
            return next(iter(hits))
        if len(hits) > 1:
            raise CommandError(f"name {tok!r} is ambiguous: {sorted(hits)}")
        raise CommandError(f"unknown name {tok!r}")

    def bind(self, name: str, nid: int) -> None:
        if not _NAME_RE.match(name):
            raise CommandError(f"bad name {name!r}")
        self.symbols[name] = nid
        self.lexicon.set_label(nid, "en", name)

    def display(self, nid: int) -> str:
        for name in sorted(self.symbols):
            if self.symbols[name] == nid:
                return name
        try:
            text, _ = self.lexicon.label_of(nid, "en")
            return text
        except NoLabel:
            return f"#{nid}"


def parse_value(tok: str) -> Value:
    if tok == "true":
        return Value.truth(True)
    if tok == "false":
        return Value.truth(False)
    if tok == "unset":
        return Value.unset()
    if tok.startswith("ref:"):
        return Value.ref(int(tok[4:]))
    if _NUM_RE.match(tok):
        return Value.num(float(tok))
    return Value.text(tok)


def render_value(v: Value | None) -> str:
    if v is None:
        return "-"
    if v.kind is Kind.NUM:
        if float(v.data).is_integer() and abs(v.data) < 1e15:
            return str(int(v.data))
        return repr(v.data)
    if v.kind is Kind.TEXT:
        return v.data
    if v.kind is Kind.BOOL:
        return "true" if v.data else "false"
    if v.kind is Kind.REF:
        return f"#{v.data}"
    if v.kind is Kind.SIGNAL:
        sig = v.data
        return f"signal({sig.origin.render()}, {len(sig.payload)}B)"
    return "unset"


def split_commands(line: str) -> list[str]:
    """Split on top-level semicolons, respecting single and double quotes."""
    parts: list[str] = []
    buf: list[str] = []
    quote: str | None = None
    for c in line:
        if quote:
            buf.append(c)
            if c == quote:
                quote = None
        elif c in "'\"":
            quote = c
            buf.append(c)
        elif c == ";":
            parts.append("".join(buf))
            buf = []
        else:
            buf.append(c)
    parts.append("".join(buf))
    return [p.strip() for p in parts if p.strip()]


def _props_from_args(args: list[str]) -> list[tuple[str, Value]]:
    props = []
    for arg in args:
        if "=" not in arg:
            raise CommandError(f"expected key=value, got {arg!r}")
        key, raw = arg.split("=", 1)
        props.append((key, parse_value(raw)))
    return props


def _change_lines(session: Session, changes) -> list[str]:
    lines = []
    for ch in changes:
        verb = sim.classify_change(ch, table=session.verb_table)
        suffix = f" ({verb})" if verb else ""
        lines.append(
            f"{session.display(ch.node)}.{ch.name}: "
            f"{render_value(ch.before)} -> {render_value(ch.after)}{suffix}"
        )
    return lines or ["no changes"]


def _take_as_name(args: list[str]) -> tuple[list[str], str | None]:
    if len(args) >= 2 and args[-2] == "as":
        return args[:-2], args[-1]
    return args, None


def run_command(session: Session, text: str) -> list[str]:
    """Execute one command and return its rendered output lines."""
    try:
        tokens = shlex.split(text, posix=True)
    except ValueError as exc:
        raise CommandError(f"cannot parse command: {exc}") from None
    if not tokens:
        return []
    verb, args = tokens[0], tokens[1:]

    if verb == "new":
        session.reset()
        return ["new net"]

    if verb == "load":
        if len(args) != 1:
            raise CommandError("usage: load <path>")
        with store.open(args[0]) as handle:
            net, lexicon = handle.load_full()
        session.net = net
        session.lexicon = lexicon
        session.symbols = {}
        session.model = None
        return [f"loaded {len(net.objects)} objects, {len(net.actions)} actions"]

    if verb == "save":
        if len(args) != 1:
            raise CommandError("usage: save <path>")
        store.save(session.net, session.lexicon, args[0])
        return [f"saved {args[0]}"]

    if verb == "obj":
        if not args:
            raise CommandError("usage: obj <name> [k=v ...]")
        name = args[0]
        nid = session.net.add_object(_props_from_args(args[1:]))
        session.bind(name, nid)
        return [f"obj {name} #{nid}"]

    if verb == "act":
        args, as_name = _take_as_name(args)
        if len(args) < 2:
            raise CommandError("usage: act <subject|-> <target> [script='...'] [k=v ...] [as <name>]")
        subject = None if args[0] == "-" else session.resolve(args[0])
        target = session.resolve(args[1])
        script = None
        props = []
        for arg in args[2:]:
            if arg.startswith("script="):
                script = arg[len("script="):]
            else:
                props.extend(_props_from_args([arg]))
        nid = session.net.add_action(subject, target, script, props)
        if as_name:
            session.bind(as_name, nid)
            return [f"act {as_name} #{nid}"]
        return [f"act #{nid}"]

    if verb in ("set", "show"):
        if not args or "." not in args[0]:
            raise CommandError(f"usage: {verb} <obj>.<prop> ...")
        owner_tok, prop = args[0].split(".", 1)
        nid = session.resolve(owner_tok)
        if verb == "set":
            if len(args) != 2:
                raise CommandError("usage: set <obj>.<prop> <value>")
            value = parse_value(args[1])
            session.net.set_property(nid, prop, value)
            return [f"{session.display(nid)}.{prop} = {render_value(value)}"]
        return [render_value(session.net.get_property(nid, prop))]

    if verb == "run":
        if len(args) != 1:
            raise CommandError("usage: run <action>")
        changes = sim.run_action(session.net, session.resolve(args[0]))
        return _change_lines(session, changes)

    if verb == "runs":
        if not args:
            raise CommandError("usage: runs <a1> <a2> ...")
        ids = [session.resolve(a) for a in args]
        results = sim.run_pending(session.net, ids)
        lines = []
        for changes in results:
            lines.extend(_change_lines(session, changes) if changes else [])
        return lines or ["no changes"]

    if verb == "snap":
        snap = sim.snapshot(session.net)
        return [f"snapshot {snap.tick}"]

    if verb == "diff":
        if len(args) != 2:
            raise CommandError("usage: diff <tick1> <tick2>")
        tl = sim.timeline_of(session.net)
        a = tl.by_tick(int(args[0]))
        b = tl.by_tick(int(args[1]))
        return _change_lines(session, sim.diff(a, b))

    if verb == "collapse-obj":
        args, as_name = _take_as_name(args)
        if not args:
            raise CommandError("usage: collapse-obj <ids...> as <name>")
        inside = {session.resolve(a) for a in args}
        nid = reasoning.collapse_to_object(session.net, inside)
        if as_name:
            session.bind(as_name, nid)
            return [f"collapse-obj {as_name} #{nid}"]
        return [f"collapse-obj #{nid}"]

    if verb == "collapse-act":
        args, as_name = _take_as_name(args)
        if not args:
            raise CommandError("usage: collapse-act <ids...> [as <name>]")
        inside = {session.resolve(a) for a in args}
        nid = reasoning.collapse_to_action(session.net, inside)
        if as_name:
            session.bind(as_name, nid)
            return [f"collapse-act {as_name} #{nid}"]
        return [f"collapse-act #{nid}"]

    if verb == "expand":
        if len(args) != 1:
            raise CommandError("usage: expand <id>")
        nid = session.resolve(args[0])
        created = reasoning.expand(session.net, nid)
        return [f"expanded #{nid}: {len(created)} nodes"]

    if verb == "mine":
        min_support = 2
        max_nodes = 4
        paths = []
        it = iter(args)
        for arg in it:
            if arg == "--min-support":
                min_support = int(next(it, "2"))
            elif arg == "--max-nodes":
                max_nodes = int(next(it, "4"))
            else:
                paths.append(arg)
        if not paths:
            raise CommandError("usage: mine [--min-support N] [--max-nodes K] <paths...>")
        nets = []
        for path in paths:
            with store.open(path) as handle:
                net, _ = handle.load_full()
            nets.append(net)
        templates = reasoning.mine_concepts(nets, min_support, max_nodes)
        if not templates:
            return ["no templates"]
        return [
            f"template {i}: support {t.support}, {len(t.pattern.node_ids())} nodes"
            for i, t in enumerate(templates, start=1)
        ]

    if verb == "isa":
        if len(args) != 2:
            raise CommandError("usage: isa <instance> <concept>")
        inst = session.resolve(args[0])
        concept = session.resolve(args[1])
        session.net.add_isa(inst, concept)
        return [f"isa #{inst} #{concept}"]

    if verb == "shape":
        if len(args) != 1:
            raise CommandError("usage: shape <instance>")
        inst = session.resolve(args[0])
        created: list[int] = []
        for i, cid in list(session.net.isa_edges):
            if i == inst:
                created.extend(reasoning.shape(session.net, inst, cid))
        return [f"shaped {args[0]}: {len(created)} new nodes"]

    if verb == "has":
        if len(args) < 2:
            raise CommandError("usage: has <instance> <fragment>")
        inst = session.resolve(args[0])
        fragment = " ".join(args[1:])
        answer = reasoning.query_has(session.net, inst, fragment)
        return [ANSWER_TEXT[answer]]

    if verb == "label":
        if len(args) != 3:
            raise CommandError("usage: label <node> <lang> <text>")
        nid = session.resolve(args[0])
        session.lexicon.set_label(nid, args[1], args[2])
        return [f"label #{nid} {args[1]} {args[2]}"]

    if verb == "say":
        lang = "en"
        rest = []
        it = iter(args)
        for arg in it:
            if arg == "--lang":
                lang = next(it, "en")
            else:
                rest.append(arg)
        if len(rest) != 1:
            raise CommandError("usage: say <node> [--lang L]")
        nid = session.resolve(rest[0])
        text, used = session.lexicon.label_of(nid, lang)
        return [f"{text} ({used})"]

    if verb in ("goal", "antigoal"):
        if not args:
            raise CommandError(f"usage: {verb} <node>.<condition> | {verb} <node> has <name>")
        if "." in args[0]:
            anchor_tok, first = args[0].split(".", 1)
            source = " ".join([first] + list(args[1:]))
        else:
            anchor_tok = args[0]
            source = " ".join(args[1:])
        if not source:
            raise CommandError("goal needs a condition")
        anchor = session.resolve(anchor_tok)
        if session.model is None:
            session.model = agent.SelfModel(session.net)
        gid = agent.define_goal(session.model, verb, anchor, source)
        return [f"{verb} {gid}"]

    if verb == "goals":
        if session.model is None or not session.model.goals:
            return ["no goals"]
        lines = []
        statuses = dict(agent.evaluate_goals(session.model, session.net))
        for goal in session.model.goals:
            lines.append(f"goal {goal.id} ({goal.polarity}): {statuses[goal.id]}")
        return lines

    if verb == "compare":
        if session.model is None:
            return ["no discrepancies"]
        tl = sim.timeline_of(session.net)
        predicted = tl.latest()
        if predicted is None:
            return ["no snapshots"]
        sensed = agent.reality_snapshot(session.model)
        changes = agent.compare_with_reality(session.model, predicted, sensed)
        if not changes:
            return ["no discrepancies"]
        return _change_lines(session, changes)

    raise CommandError(f"unknown command {verb!r}")


def run_lines(lines, out=None) -> int:
    """Interpret lines in a fresh session; returns the exit status."""
    if out is None:
        out = sys.stdout
    session = Session()
    for raw in lines:
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        for command in split_commands(line):
            try:
                for rendered in run_command(session, command):
                    print(rendered, file=out)
            except (KrnError, OSError, ValueError) as exc:
                print(f"error: {type(exc).__name__}: {exc}", file=out)
                return 1
    return 0


def _repl(session: Session) -> int:
    status = 0
    while True:
        try:
            line = input("krn> ")
        except EOFError:
            print()
            return status
        except KeyboardInterrupt:
            print()
            return status
        for command in split_commands(line.strip()):
            if not command or command.startswith("#"):
                continue
            try:
                for rendered in run_command(session, command):
                    print(rendered)
            except (KrnError, OSError, ValueError) as exc:
                print(f"error: {type(exc).__name__}: {exc}")
                status = 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="krn",
        description="Bipartite object/action knowledge net engine.",
    )
    parser.add_argument("script", nargs="?",
                        help="command file to run ('-' for stdin); REPL if omitted on a tty")
    parser.add_argument("--format", choices=["plain"], default="plain",
                        help="output format (plain is the only one)")
    args = parser.parse_args(argv)

    if args.script and args.script != "-":
        with open(args.script, encoding="utf-8") as fh:
            return run_lines(fh.readlines())
    if args.script == "-" or not sys.stdin.isatty():
        return run_lines(sys.stdin.readlines())
    return _repl(Session())


if __name__ == "__main__":
    raise SystemExit(main())
