"""The (m, d, s) grading of parameter-dependent boundary operators.

A small expression language describes compositions of graded atoms, and the
evaluator returns the grade of the result together with the trace-expansion
template it implies.

Grammar (whitespace is insignificant)::

    expr     := term (COMPOSE term)*          COMPOSE is '∘' or '@'
    term     := modifier* primary
    modifier := ('xn' | 'dn' | 'dlam') '^' INT
    primary  := ATOM grade? | 'gamma0' | 'γ0' | '(' expr ')'
    ATOM     := 'P' | 'G' | 'T' | 'K' | 'Q'
    grade    := '[' INT ',' INT ',' INT ']'

An atom without brackets has grade (0, 0, 0).  Columns in error messages are
1-based.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from fractions import Fraction

KINDS = ("psdo_interior", "psdo_boundary", "trace0", "poisson", "sgo0")
ATOM_KIND = {"P": "psdo_interior", "Q": "psdo_boundary", "T": "trace0", "K": "poisson", "G": "sgo0"}
KERNEL_KINDS = ("trace0", "poisson", "sgo0")


class ParseError(ValueError):
    def __init__(self, message: str, column: int):
        super().__init__(f"column {column}: {message}")
        self.column = column


class GradingError(ValueError):
    pass


# ---------------------------------------------------------------------------
# syntax

@dataclass(frozen=True)
class Atom:
    name: str
    grade: tuple[int, int, int]
    column: int


@dataclass(frozen=True)
class Modified:
    op: str
    power: int
    arg: object
    column: int


@dataclass(frozen=True)
class Compose:
    left: object
    right: object
    column: int


_TOKEN = re.compile(
    r"\s*(?:(?P<num>-?\d+)|(?P<mod>xn|dn|dlam)|(?P<gamma>gamma0|γ0)|(?P<atom>[PGTKQ])"
    r"|(?P<op>[∘@])|(?P<punct>[\[\],()^]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    out = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            col = pos + 1 + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[col - 1]!r}", col)
        kind = m.lastgroup
        start = m.start(kind)
        out.append((kind, m.group(kind), start + 1))
        pos = m.end()
    out.append(("end", "", len(text) + 1))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None, value=None, what=""):
        tok = self.toks[self.i]
        if (kind and tok[0] != kind) or (value and tok[1] != value):
            found = "end of input" if tok[0] == "end" else repr(tok[1])
            raise ParseError(f"expected {what or value or kind}, found {found}", tok[2])
        self.i += 1
        return tok

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op":
            col = self.take("op")[2]
            node = Compose(node, self.term(), col)
        return node

    def term(self):
        tok = self.peek()
        if tok[0] == "mod":
            self.take()
            self.take("punct", "^")
            power = int(self.take("num", what="integer exponent")[1])
            if power < 0:
                raise ParseError("exponent must be >= 0", tok[2])
            return Modified(tok[1], power, self.term(), tok[2])
        return self.primary()

    def primary(self):
        tok = self.peek()
        if tok[0] == "gamma":
            self.take()
            return Atom("gamma0", (0, 0, 0), tok[2])
        if tok[0] == "atom":
            self.take()
            grade = (0, 0, 0)
            if self.peek()[1] == "[":
                self.take()
                vals = [int(self.take("num", what="integer")[1])]
                for _ in range(2):
                    self.take("punct", ",")
                    vals.append(int(self.take("num", what="integer")[1]))
                self.take("punct", "]")
                grade = tuple(vals)
            return Atom(tok[1], grade, tok[2])
        if tok[1] == "(":
            self.take()
            node = self.expr()
            self.take("punct", ")")
            return node
        found = "end of input" if tok[0] == "end" else repr(tok[1])
        raise ParseError(f"expected an operator atom, found {found}", tok[2])


def parse_expr(text: str):
    p = _Parser(text)
    node = p.expr()
    tok = p.peek()
    if tok[0] != "end":
        raise ParseError(f"unexpected {tok[1]!r}", tok[2])
    return node


def dump_tree(node) -> str:
    if isinstance(node, Atom):
        return f"{node.name}{list(node.grade)}" if node.name != "gamma0" else "gamma0"
    if isinstance(node, Modified):
        return f"{node.op}^{node.power}({dump_tree(node.arg)})"
    return f"({dump_tree(node.left)} ∘ {dump_tree(node.right)})"


# ---------------------------------------------------------------------------
# grades

@dataclass(frozen=True)
class GradeClass:
    m: int
    d: int
    s: int
    kind: str
    strongly_polyhomogeneous: bool = False
    transmission: bool = True
    holomorphic_mu: bool = True
    gamma0: bool = False
    rule: str = "atom"
    # extra summands, e.g. the -G+(P) G-(P') part of P+ P'+
    corrections: tuple["GradeClass", ...] = ()

    @property
    def degree(self) -> int:
        return self.m + self.d + self.s

    @property
    def triple(self) -> tuple[int, int, int]:
        return (self.m, self.d, self.s)

    def as_json(self) -> dict:
        out = {"kind": self.kind, "m": self.m, "d": self.d, "s": self.s, "degree": self.degree,
               "rule": self.rule, "strongly_polyhomogeneous": self.strongly_polyhomogeneous}
        if self.corrections:
            out["corrections"] = [c.as_json() for c in self.corrections]
        return out


def atom_grade(name: str, grade=(0, 0, 0), **flags) -> GradeClass:
    m, d, s = grade
    if name == "gamma0":
        return GradeClass(0, 0, 0, "trace0", gamma0=True, **flags)
    kind = ATOM_KIND[name]
    if kind == "psdo_interior":
        if (m, d) != (0, 0):
            raise GradingError("interior psdo symbols are graded (0,0,s); got m,d != 0")
        if s > 0:
            raise GradingError(f"composition table needs s <= 0 where P enters; got s={s}")
    return GradeClass(m, d, s, kind, **flags)


def embeddings(g: GradeClass) -> tuple[str, tuple[GradeClass, GradeClass]]:
    """(m,d,s) sits in the intersection (s <= 0) or the sum (s >= 0) of (m+s,d,0) and (m,d+s,0)."""
    a = replace(g, m=g.m + g.s, s=0, rule="embedding", corrections=())
    b = replace(g, d=g.d + g.s, s=0, rule="embedding", corrections=())
    return ("intersection" if g.s <= 0 else "sum"), (a, b)


def _need_s_nonpositive(g: GradeClass, rule: str):
    if g.kind == "psdo_interior" and g.s > 0:
        raise GradingError(f"rule {rule}: P enters with s={g.s} > 0")


def _compose_main(L: GradeClass, R: GradeClass) -> GradeClass:
    kl, kr = L.kind, R.kind
    m2, d2, s2 = L.m + R.m, L.d + R.d, L.s + R.s
    sp = L.strongly_polyhomogeneous and R.strongly_polyhomogeneous
    tr = L.transmission and R.transmission

    def out(m, d, s, kind, rule, **kw):
        return GradeClass(m, d, s, kind, strongly_polyhomogeneous=sp, transmission=tr, rule=rule, **kw)

    if kl == "trace0" and kr == "psdo_interior":
        _need_s_nonpositive(R, "i/ii")
        if L.gamma0:
            return out(0, 0, R.s, "trace0", "ii")
        return out(L.m, L.d, s2, "trace0", "i")
    if kl == "psdo_interior" and kr == "poisson":
        _need_s_nonpositive(L, "iii")
        return out(R.m, R.d, s2, "poisson", "iii")
    if kl == "psdo_interior" and kr == "sgo0":
        _need_s_nonpositive(L, "iv")
        return out(R.m, R.d, s2, "sgo0", "iv")
    if kl == "sgo0" and kr == "psdo_interior":
        _need_s_nonpositive(R, "v")
        return out(L.m, L.d, s2, "sgo0", "v")
    if kl == "sgo0" and kr == "sgo0":
        return out(m2, d2, s2 + 1, "sgo0", "vi")
    if kl == "poisson" and kr == "trace0":
        return out(m2, d2, s2, "sgo0", "vii")
    if kl == "trace0" and kr == "sgo0":
        if L.gamma0:
            return out(R.m, R.d, R.s + 1, "trace0", "ix")
        return out(m2, d2, s2 + 1, "trace0", "viii")
    if kl == "sgo0" and kr == "poisson":
        return out(m2, d2, s2 + 1, "poisson", "viii")
    if kl == "trace0" and kr == "poisson":
        if L.gamma0:
            return out(R.m, R.d, R.s + 1, "psdo_boundary", "xi")
        return out(m2, d2, s2 + 1, "psdo_boundary", "x")
    if kl == "psdo_boundary" and kr == "trace0":
        return out(m2, d2, s2, "trace0", "xii")
    if kl == "poisson" and kr == "psdo_boundary":
        return out(m2, d2, s2, "poisson", "xii")
    if kl == "psdo_boundary" and kr == "psdo_boundary":
        return out(m2, d2, s2, "psdo_boundary", "xiii")
    if kl == "psdo_interior" and kr == "psdo_interior":
        _need_s_nonpositive(L, "xiv")
        _need_s_nonpositive(R, "xiv")
        # P+ P'+ = (PP')+ - G+(P) G-(P'), the s.g.o. part graded by rule vi
        gp = GradeClass(0, 0, L.s - 1, "sgo0")
        gm = GradeClass(0, 0, R.s - 1, "sgo0")
        corr = replace(_compose_main(gp, gm), rule="xiv")
        return out(0, 0, s2, "psdo_interior", "xiv", corrections=(corr,))
    raise GradingError(f"composition table has no row for {kl} ∘ {kr}")


def compose(L: GradeClass, R: GradeClass) -> GradeClass:
    main = _compose_main(replace(L, corrections=()), replace(R, corrections=()))
    extra = list(main.corrections)
    for c in L.corrections:
        extra.append(compose(c, replace(R, corrections=())))
        for c2 in R.corrections:
            extra.append(compose(c, c2))
    for c2 in R.corrections:
        extra.append(compose(replace(L, corrections=()), c2))
    return replace(main, corrections=tuple(extra))


def apply_modifier(op: str, power: int, g: GradeClass) -> GradeClass:
    if power == 0:
        return g
    if op in ("xn", "dn"):
        if g.kind not in KERNEL_KINDS:
            raise GradingError(f"{op}^{power} needs a symbol-kernel (trace, Poisson or s.g.o.), got {g.kind}")
        shift = -power if op == "xn" else power
        new = replace(g, s=g.s + shift, rule=f"{op}-shift")
    else:
        if g.kind == "psdo_interior":
            new = replace(g, s=g.s - 2 * power, rule="dlam")
        else:
            new = replace(g, d=g.d - power, s=g.s - power, rule="dlam")
    return replace(new, corrections=tuple(apply_modifier(op, power, c) for c in g.corrections))


def grade(node) -> GradeClass:
    if isinstance(node, str):
        node = parse_expr(node)
    if isinstance(node, Atom):
        return atom_grade(node.name, node.grade)
    if isinstance(node, Modified):
        return apply_modifier(node.op, node.power, grade(node.arg))
    return compose(grade(node.left), grade(node.right))


def shift_grade(g: GradeClass, j: int = 0, jp: int = 0) -> GradeClass:
    """x^j d^jp applied to a symbol-kernel lowers s by j and raises it by jp."""
    return apply_modifier("dn", jp, apply_modifier("xn", j, g))


# ---------------------------------------------------------------------------
# templates

@dataclass
class ExpansionTemplate:
    variable: str
    power_start: Fraction
    power_step: Fraction
    log_start: Fraction | None
    k0: int | None = None
    zero_indices: tuple[int, ...] = ()
    locality: list = field(default_factory=list)
    notes: tuple[str, ...] = ()

    def power_exponents(self, count: int) -> list[Fraction]:
        return [self.power_start - i * self.power_step for i in range(count)]

    def log_exponents(self, count: int) -> list[Fraction]:
        if self.log_start is None:
            return []
        return [self.log_start - i * self.power_step for i in range(count)]

    def as_json(self) -> dict:
        def num(x):
            if x is None:
                return None
            return int(x) if x.denominator == 1 else float(x)

        return {
            "variable": self.variable,
            "power_start": num(self.power_start),
            "power_step": num(self.power_step),
            "log_start": num(self.log_start),
            "k0": self.k0,
            "zero_indices": list(self.zero_indices),
            "locality": self.locality,
            "notes": list(self.notes),
        }


def predict_trace_shape(g: GradeClass, n: int, depth: int = 4) -> ExpansionTemplate:
    """Trace expansion in mu = (-lam)^(1/2): powers mu^(m+d+s+n-1-j), logs mu^(d+s-k) log mu."""
    if g.kind not in ("sgo0", "psdo_boundary"):
        raise GradingError(f"trace shape is defined for s.g.o. and boundary psdo grades, not {g.kind}")
    notes = []
    if g.s > 0:
        # both summands of the sum embedding share m+d+s; their log starts are d and d+s
        notes.append("s > 0: embedded as (m+s,d,0) + (m,d+s,0)")
    pstart = Fraction(g.m + g.d + g.s + n - 1)
    lstart = None if g.strongly_polyhomogeneous else Fraction(g.d + g.s)
    loc = [{"index": j, "term": "power", "exponent": int(pstart) - j, "tag": "local"} for j in range(depth)]
    if lstart is not None:
        for k in range(depth):
            loc.append({"index": k, "term": "log", "exponent": int(lstart) - k, "tag": "local"})
            loc.append({"index": k, "term": "log_constant", "exponent": int(lstart) - k, "tag": "nonlocal"})
    return ExpansionTemplate("mu", pstart, Fraction(1), lstart, None, (), loc, tuple(notes))


def k0_value(l: int, mprime: int, tangential: bool) -> int:
    return mprime + l + 1 if tangential else l + 1


def predict_perturbation_shape(l: int, mprime: int, tangential: bool, r: int, n: int,
                               eta_variant: bool = False, depth: int = 6) -> ExpansionTemplate:
    """Template for the trace of a resolvent-power difference under a perturbation vanishing to order l.

    Exponents of (-lam) are (m' - k)/2 - r (eta variant: (m' + 1 - k)/2 - r), k >= -n.
    """
    bound = Fraction(n + mprime + (1 if eta_variant else 0), 2)
    if not r > bound:
        raise GradingError(f"r={r} too small: need r > {bound} for trace-class terms")
    k0 = k0_value(l, mprime, tangential)
    shift = mprime + (1 if eta_variant else 0)

    def expo(k):
        return Fraction(shift - k, 2) - r

    zero = []
    for k in range(-n, l - n + 1):
        odd = (k - mprime + n) % 2 == 1
        if odd != eta_variant:
            zero.append(k)
    loc = []
    for k in range(-n, max(k0, 0) + depth):
        entry = {"k": k, "exponent": float(expo(k)) if expo(k).denominator != 1 else int(expo(k))}
        if k < k0:
            entry["difference_power"] = "zero" if k in zero else "local"
            entry["difference_log"] = None
        else:
            entry["difference_power"] = None
            entry["difference_log"] = "local"
            entry["difference_log_constant"] = "nonlocal"
        # effect on the coefficients of the full (unperturbed + difference) expansion
        if k >= 0:
            entry["full_log"] = "invariant-under-perturbation" if k < k0 else "locally-perturbed"
            entry["full_log_constant"] = "locally-perturbed" if k < k0 else "nonlocal"
        else:
            entry["full_power"] = "invariant-under-perturbation" if k in zero else "locally-perturbed"
        loc.append(entry)
    notes = ("nonlocal difference coefficients begin at exponent %s" % expo(k0),)
    return ExpansionTemplate("minus_lambda", expo(-n), Fraction(1, 2), expo(k0), k0, tuple(zero), loc, notes)


def invariant_log_indices(template: ExpansionTemplate) -> list[int]:
    return [e["k"] for e in template.locality if e.get("full_log") == "invariant-under-perturbation"]


def predict(text: str, n: int) -> dict:
    """Parse, grade and template an expression (the CLI ``predict`` payload)."""
    g = grade(parse_expr(text))
    out = {"grade": g.as_json()}
    if g.kind in ("sgo0", "psdo_boundary"):
        out["template"] = predict_trace_shape(g, n).as_json()
    else:
        out["template"] = None
    return out
