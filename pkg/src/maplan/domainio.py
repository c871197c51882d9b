"""Reading and writing problems and plans.

Problem files use a small s-expression dialect (see ``docs/format.md``)::

    (problem logistics-mini
      (:objects A B - location p1 - package)
      (:predicates (pkg-at ?p - package ?l - location) (truck-at ?l - location))
      (:agent truck
        (:action move :parameters (?from - location ?to - location)
           :pre ((truck-at ?from)) :eff ((truck-at ?to) !(truck-at ?from))))
      (:init (truck-at A) (pkg-at p1 A))
      (:goal (pkg-at p1 B)))

Schema actions are grounded over type-compatible objects in lexicographic
order and labelled ``<agent>.<name>_<arg>_...``.  Ground actions declared
without ``:parameters`` keep their label verbatim.
"""
from __future__ import annotations

import csv
import io
import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import InconsistentTerms, ParseError, PlanError, TypeMismatch
from .model import EPS, EPS_LABEL, Agent, GroundAction, JointAction, Plan, Problem, State, bits

_TOKEN = re.compile(r"\s+|;[^\n]*|\(|\)|[^\s();]+")


@dataclass
class Sym:
    text: str
    line: int
    col: int


@dataclass
class SList:
    items: list
    line: int
    col: int


def read_sexpr(text: str):
    """Parse ``text`` into nested ``SList``/``Sym`` nodes; exactly one top form."""
    stack: list[SList] = [SList([], 1, 1)]
    line, line_start = 1, 0
    for m in _TOKEN.finditer(text):
        tok = m.group()
        col = m.start() - line_start + 1
        if tok[0].isspace() or tok[0] == ";":
            nl = tok.count("\n")
            if nl:
                line += nl
                line_start = m.start() + tok.rfind("\n") + 1
            continue
        if tok == "(":
            node = SList([], line, col)
            stack[-1].items.append(node)
            stack.append(node)
        elif tok == ")":
            if len(stack) == 1:
                raise ParseError("unbalanced ')'", line, col)
            stack.pop()
        else:
            stack[-1].items.append(Sym(tok, line, col))
    if len(stack) != 1:
        raise ParseError("unterminated '('", stack[-1].line, stack[-1].col)
    forms = stack[0].items
    if len(forms) != 1:
        raise ParseError(f"expected one top-level form, found {len(forms)}", 1, 1)
    return forms[0]


def _pos(node):
    return node.line, node.col


def _sym(node, what="symbol") -> str:
    if not isinstance(node, Sym):
        raise ParseError(f"expected {what}", *_pos(node))
    return node.text


def _list(node, what="list") -> SList:
    if not isinstance(node, SList):
        raise ParseError(f"expected {what}", *_pos(node))
    return node


def _typed_list(items: list) -> list[tuple[str, str, Sym]]:
    """``a b - t c`` -> [(a, t), (b, t), (c, object)]."""
    out, pending = [], []
    i = 0
    while i < len(items):
        node = items[i]
        name = _sym(node, "name")
        if name == "-":
            if i + 1 >= len(items):
                raise ParseError("type expected after '-'", *_pos(node))
            typ = _sym(items[i + 1], "type")
            out.extend((n, typ, nd) for n, nd in pending)
            pending = []
            i += 2
            continue
        pending.append((name, node))
        i += 1
    out.extend((n, "object", nd) for n, nd in pending)
    return out


@dataclass
class _Schema:
    name: str
    params: list[tuple[str, str]]
    pre: list
    eff: list
    node: SList


@dataclass
class DomainSpec:
    """Un-grounded contents of a problem file."""

    name: str
    types: set[str] = field(default_factory=lambda: {"object"})
    objects: dict[str, str] = field(default_factory=dict)
    predicates: dict[str, list[str]] = field(default_factory=dict)
    raw_atoms: list[str] = field(default_factory=list)
    agents: list[tuple[str, list[_Schema]]] = field(default_factory=list)
    init: list = field(default_factory=list)
    goal: list = field(default_factory=list)

    def objects_of(self, typ: str) -> list[str]:
        if typ == "object":
            return sorted(self.objects)
        return sorted(o for o, t in self.objects.items() if t == typ)


def _parse_action(node: SList) -> _Schema:
    items = node.items
    name = _sym(items[1], "action label") if len(items) > 1 else None
    if name is None:
        raise ParseError("action needs a label", *_pos(node))
    if name == EPS_LABEL:
        raise ParseError(f"{EPS_LABEL!r} is reserved for the empty action", *_pos(items[1]))
    params: list[tuple[str, str]] = []
    pre, eff = [], []
    i = 2
    while i < len(items):
        key = _sym(items[i], "keyword")
        if i + 1 >= len(items):
            raise ParseError(f"value expected after {key}", *_pos(items[i]))
        val = _list(items[i + 1], f"list after {key}")
        if key == ":parameters":
            params = [(n, t) for n, t, _ in _typed_list(val.items)]
            for n, _ in params:
                if not n.startswith("?"):
                    raise ParseError(f"parameter {n!r} must start with '?'", *_pos(val))
        elif key in (":pre", ":precondition"):
            pre = val.items
        elif key in (":eff", ":effect"):
            eff = val.items
        else:
            raise ParseError(f"unknown action keyword {key}", *_pos(items[i]))
        i += 2
    return _Schema(name, params, pre, eff, node)


def parse_spec(text: str) -> DomainSpec:
    top = _list(read_sexpr(text), "(problem ...)")
    if not top.items or _sym(top.items[0]) != "problem":
        raise ParseError("file must start with (problem ...)", *_pos(top))
    rest = top.items[1:]
    name = "problem"
    if rest and isinstance(rest[0], Sym):
        name = rest[0].text
        rest = rest[1:]
    spec = DomainSpec(name)
    for sec in rest:
        sec = _list(sec, "section")
        if not sec.items:
            raise ParseError("empty section", *_pos(sec))
        head = _sym(sec.items[0], "section keyword")
        body = sec.items[1:]
        if head == ":types":
            spec.types.update(_sym(b, "type") for b in body)
        elif head == ":objects":
            for obj, typ, nd in _typed_list(body):
                if typ not in spec.types:
                    raise TypeMismatch(f"unknown type {typ!r}", *_pos(nd))
                if obj in spec.objects:
                    raise ParseError(f"object {obj!r} declared twice", *_pos(nd))
                spec.objects[obj] = typ
        elif head == ":predicates":
            for p in body:
                p = _list(p, "predicate declaration")
                pname = _sym(p.items[0], "predicate name")
                ptypes = [t for _, t, _ in _typed_list(p.items[1:])]
                for t in ptypes:
                    if t not in spec.types:
                        raise TypeMismatch(f"unknown type {t!r} in predicate {pname}", *_pos(p))
                spec.predicates[pname] = ptypes
        elif head == ":atoms":
            for b in body:
                a = _sym(b, "atom")
                if a.startswith("!"):
                    raise ParseError("atom names may not start with '!'", *_pos(b))
                if a not in spec.raw_atoms:
                    spec.raw_atoms.append(a)
        elif head == ":agent":
            if not body:
                raise ParseError("agent needs a name", *_pos(sec))
            aname = _sym(body[0], "agent name")
            if any(aname == n for n, _ in spec.agents):
                raise ParseError(f"agent {aname!r} declared twice", *_pos(body[0]))
            acts = []
            for b in body[1:]:
                b = _list(b, "(:action ...)")
                if not b.items or _sym(b.items[0]) != ":action":
                    raise ParseError("expected (:action ...)", *_pos(b))
                acts.append(_parse_action(b))
            spec.agents.append((aname, acts))
        elif head == ":init":
            spec.init = body
        elif head == ":goal":
            spec.goal = body
        else:
            raise ParseError(f"unknown section {head}", *_pos(sec))
    if not spec.agents:
        raise ParseError("problem declares no agents", *_pos(top))
    return spec


class _Grounder:
    def __init__(self, spec: DomainSpec):
        self.spec = spec
        names = list(spec.raw_atoms)
        for pred, types in spec.predicates.items():
            pools = [spec.objects_of(t) for t in types]
            for combo in itertools.product(*pools):
                names.append(atom_name(pred, combo))
        seen = set()
        self.atoms = [n for n in names if not (n in seen or seen.add(n))]
        self.index = {n: i for i, n in enumerate(self.atoms)}

    def literal(self, node, binding: dict[str, str] | None = None) -> tuple[int, bool]:
        binding = binding or {}
        negated = False
        if isinstance(node, Sym) and node.text.startswith("!"):
            if node.text == "!":
                raise ParseError("'!' must prefix an atom", *_pos(node))
            return self._atom_of(Sym(node.text[1:], node.line, node.col), binding), True
        if isinstance(node, SList) and node.items and isinstance(node.items[0], Sym) and node.items[0].text == "not":
            if len(node.items) != 2:
                raise ParseError("(not ...) takes one atom", *_pos(node))
            return self._atom_of(node.items[1], binding), True
        return self._atom_of(node, binding), negated

    def _atom_of(self, node, binding) -> int:
        if isinstance(node, Sym):
            if node.text in self.index and node.text not in self.spec.predicates:
                return self.index[node.text]
            if self.spec.predicates.get(node.text) == []:
                return self.index[node.text]
            raise ParseError(f"unknown atom {node.text!r}", *_pos(node))
        if not node.items:
            raise ParseError("empty literal", *_pos(node))
        pred = _sym(node.items[0], "predicate")
        if pred not in self.spec.predicates:
            raise ParseError(f"unknown predicate {pred!r}", *_pos(node))
        types = self.spec.predicates[pred]
        args = node.items[1:]
        if len(args) != len(types):
            raise TypeMismatch(f"{pred} expects {len(types)} arguments, got {len(args)}", *_pos(node))
        ground = []
        for arg, typ in zip(args, types):
            name = _sym(arg, "argument")
            if name.startswith("?"):
                if name not in binding:
                    raise ParseError(f"unbound parameter {name}", *_pos(arg))
                obj = binding[name]
            else:
                obj = name
            if obj not in self.spec.objects:
                raise ParseError(f"unknown object {obj!r}", *_pos(arg))
            if typ != "object" and self.spec.objects[obj] != typ:
                raise TypeMismatch(
                    f"{obj} has type {self.spec.objects[obj]}, {pred} expects {typ}", *_pos(arg)
                )
            ground.append(obj)
        return self.index[atom_name(pred, ground)]

    def term_masks(self, nodes, binding=None, what="term set") -> tuple[int, int]:
        pos = neg = 0
        nodes = list(nodes)
        i = 0
        while i < len(nodes):
            nd = nodes[i]
            i += 1
            if isinstance(nd, Sym) and nd.text == "!":
                if i >= len(nodes) or not isinstance(nodes[i], SList):
                    raise ParseError("'!' must prefix an atom", *_pos(nd))
                atom, negated = self.literal(nodes[i], binding)[0], True
                i += 1
            else:
                atom, negated = self.literal(nd, binding)
            if negated:
                neg |= 1 << atom
            else:
                pos |= 1 << atom
        if pos & neg:
            names = [self.atoms[a] for a in bits(pos & neg)]
            raise InconsistentTerms(f"inconsistent {what}: {', '.join(names)} both true and false")
        return pos, neg

    def check_param_types(self, schema: _Schema, agent: str):
        for pname, ptype in schema.params:
            if ptype not in self.spec.types:
                raise TypeMismatch(f"unknown type {ptype!r} for {pname} in {agent}.{schema.name}", *_pos(schema.node))

    def ground_actions(self, agent: str, schemas: list[_Schema]) -> list[GroundAction]:
        out = []
        for sc in schemas:
            self.check_param_types(sc, agent)
            if not sc.params:
                pre = self.term_masks(sc.pre, None, f"precondition of {sc.name}")
                eff = self.term_masks(sc.eff, None, f"effect of {sc.name}")
                out.append(GroundAction(sc.name, *pre, *eff))
                continue
            pools = [self.spec.objects_of(t) for _, t in sc.params]
            for combo in itertools.product(*pools):
                binding = {p: o for (p, _), o in zip(sc.params, combo)}
                try:
                    pre = self.term_masks(sc.pre, binding)
                    eff = self.term_masks(sc.eff, binding)
                except InconsistentTerms:
                    continue
                out.append(GroundAction(f"{agent}.{atom_name(sc.name, combo)}", *pre, *eff))
        return out


def atom_name(pred: str, args: Sequence[str]) -> str:
    return "_".join([pred, *args]) if args else pred


def ground(spec: DomainSpec) -> Problem:
    g = _Grounder(spec)
    agents = [Agent(name, tuple(g.ground_actions(name, schemas))) for name, schemas in spec.agents]
    init = State(*g.term_masks(spec.init, None, "initial state"))
    goal = State(*g.term_masks(spec.goal, None, "goal"))
    try:
        return Problem.build(g.atoms, agents, init, goal, spec.name)
    except PlanError as exc:
        raise ParseError(str(exc)) from exc


def parse_problem(text: str) -> Problem:
    return ground(parse_spec(text))


def load_problem(path) -> Problem:
    with open(path, encoding="utf-8") as fh:
        return parse_problem(fh.read())


def _terms_text(problem: Problem, pos: int, neg: int) -> str:
    return " ".join([problem.atoms[a] for a in bits(pos)] + ["!" + problem.atoms[a] for a in bits(neg)])


def format_problem(problem: Problem) -> str:
    """Ground-form text that re-parses to an equal problem."""
    lines = [f"(problem {problem.name}"]
    lines.append("  (:atoms " + " ".join(problem.atoms) + ")")
    for ag in problem.agents:
        lines.append(f"  (:agent {ag.name}")
        for a in ag.actions:
            pre = _terms_text(problem, a.pre_pos, a.pre_neg)
            eff = _terms_text(problem, a.eff_pos, a.eff_neg)
            lines.append(f"    (:action {a.label} :pre ({pre}) :eff ({eff}))")
        lines[-1] += ")"
    lines.append("  (:init " + _terms_text(problem, problem.init.pos, problem.init.neg) + ")")
    lines.append("  (:goal " + _terms_text(problem, problem.goal.pos, problem.goal.neg) + "))")
    return "\n".join(lines) + "\n"


def serialize_plan(plan: Plan, problem: Problem | None = None) -> str:
    """CSV: a header of agent names, then one row per step (labels or ``eps``)."""
    if problem is not None:
        header = [ag.name for ag in problem.agents]
    else:
        header = [f"agent{i}" for i in range(plan.agent_count)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for j in plan.steps:
        w.writerow([p.label for p in j.parts])
    return buf.getvalue()


def parse_plan(text: str, problem: Problem) -> Plan:
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r]
    n = problem.n_agents
    if not rows:
        raise PlanError("plan file has no header")
    header, body = rows[0], rows[1:]
    if len(header) != n:
        raise PlanError(f"header has {len(header)} columns, problem has {n} agents")
    names = [ag.name for ag in problem.agents]
    if [h.strip() for h in header] != names:
        raise PlanError(f"header {header} does not match agents {names}")
    steps = []
    for lineno, row in enumerate(body, 2):
        if len(row) != n:
            raise PlanError(f"line {lineno}: {len(row)} columns, expected {n}")
        parts = []
        for a, cell in enumerate(row):
            label = cell.strip()
            if label == EPS_LABEL:
                parts.append(EPS)
                continue
            act = problem.agents[a].by_label.get(label)
            if act is None:
                raise PlanError(f"line {lineno}: unknown action label {label!r} for agent {names[a]}")
            parts.append(act)
        steps.append(JointAction(parts))
    return Plan(tuple(steps), n)


def plan_from_labels(problem: Problem, rows: Iterable[Sequence[str]]) -> Plan:
    """Build a plan from rows of labels (``eps`` for idle)."""
    steps = [JointAction([problem.action(l) for l in r]) for r in rows]
    return Plan(tuple(steps), problem.n_agents)
