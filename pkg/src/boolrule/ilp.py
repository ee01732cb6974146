"""ILP formulations for optimal depth-one rules, plus LP-file export.

One model per root operator.  Variables: b_i / nb_i select a feature or its
negation, etaP_r / etaN_r flag misclassified rows, q_r picks the active side
of the not-equal constraint for Choose, and k is the integer parameter of
the parameterized operators.  The objective is the class-weighted error
count plus the literal-count regularizer.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .bitvec import BitMatrix, BitVector
from .data import ClassWeights
from .formula import AND, ATLEAST, ATMOST, CHOOSE, OR, OPERATOR_KINDS, PARAMETERIZED
from .oracle import DepthOneSolution

from itertools import combinations


class IlpError(ValueError):
    pass


@dataclass
class Variable:
    name: str
    kind: str                  # "binary" | "integer"
    lo: int = 0
    hi: int = 1
    role: str = ""             # b | nb | etaP | etaN | q | k
    index: int = -1            # feature or row index for its role

    def __eq__(self, other):
        return (isinstance(other, Variable) and self.name == other.name
                and self.kind == other.kind and self.lo == other.lo
                and self.hi == other.hi)


@dataclass
class Constraint:
    name: str
    coeffs: dict               # variable name -> coefficient
    sense: str                 # "<=" | ">=" | "=="
    rhs: float
    tag: str = ""              # pos | neg | card | coupling | minlit
    row: int = -1              # sample index within its class, for pos/neg
    lo_hint: Optional[float] = None   # known bounds on the LHS expression
    hi_hint: Optional[float] = None
    # shape of this constraint after error-variable elimination:
    # None = unchanged (minus eta terms), "eq" = becomes an equality,
    # "drop" = removed entirely.
    no_eta: Optional[str] = None
    no_eta_lo: Optional[float] = None
    no_eta_hi: Optional[float] = None

    def __eq__(self, other):
        return (isinstance(other, Constraint) and self.name == other.name
                and self.coeffs == other.coeffs and self.sense == other.sense
                and self.rhs == other.rhs)


@dataclass
class IlpModel:
    operator: str
    variables: list
    constraints: list
    objective: dict            # variable name -> coefficient (minimize)
    max_literals: int
    min_literals: int
    lam: float
    weights: ClassWeights
    X: Optional[BitMatrix] = None
    y: Optional[BitVector] = None
    pos_rows: list = field(default_factory=list)   # original row indices
    neg_rows: list = field(default_factory=list)

    @property
    def num_features(self) -> int:
        return sum(1 for v in self.variables if v.role == "b")

    def variable(self, name: str) -> Variable:
        return next(v for v in self.variables if v.name == name)

    def __eq__(self, other):
        return (isinstance(other, IlpModel)
                and self.variables == other.variables
                and self.constraints == other.constraints
                and self.objective == other.objective)


def build_ilp(X: BitMatrix, y: BitVector, operator: str, max_literals: int,
              lam: float = 0.0, weights: Optional[ClassWeights] = None,
              min_literals: int = 0) -> IlpModel:
    """Build the depth-one ILP for one operator over binarized data."""
    if operator not in OPERATOR_KINDS:
        raise IlpError(f"unknown operator {operator!r}")
    if max_literals < 1:
        raise IlpError("max_literals must be at least 1")
    if min_literals > max_literals:
        raise IlpError("min_literals exceeds max_literals")
    n_p = y.popcount()
    n_n = y.n - n_p
    if n_p == 0 or n_n == 0:
        raise IlpError("both classes must be present")
    if weights is None:
        from .data import class_weights
        weights = class_weights(y)
    m = X.num_cols
    mp = max_literals
    pos_rows = [r for r in range(y.n) if y[r]]
    neg_rows = [r for r in range(y.n) if not y[r]]

    variables = []
    for i in range(m):
        variables.append(Variable(f"b_{i}", "binary", role="b", index=i))
    for i in range(m):
        variables.append(Variable(f"nb_{i}", "binary", role="nb", index=i))
    for r in range(n_p):
        variables.append(Variable(f"etaP_{r}", "binary", role="etaP", index=r))
    for r in range(n_n):
        variables.append(Variable(f"etaN_{r}", "binary", role="etaN", index=r))
    if operator == CHOOSE:
        for r in range(n_n):
            variables.append(Variable(f"q_{r}", "binary", role="q", index=r))
    parameterized = operator in PARAMETERIZED
    if parameterized:
        variables.append(Variable("k", "integer", 0, mp, role="k"))

    def row_coeffs(row: int, swap: bool) -> dict:
        # literal-true count on the row:  X(b - nb) + |nb|  (swapped for And)
        coeffs = {}
        for i in range(m):
            a = (X.columns[i] >> row) & 1
            cb = (1 - a) if swap else a
            cn = a if swap else (1 - a)
            if cb:
                coeffs[f"b_{i}"] = 1.0
            if cn:
                coeffs[f"nb_{i}"] = 1.0
        return coeffs

    constraints = []
    swap = operator == AND
    if operator in (OR, AND):
        # De Morgan: And over complemented indicator counts is an Or,
        # with the classes trading places.
        ge_rows, ge_tag = (neg_rows, "neg") if swap else (pos_rows, "pos")
        le_rows, le_tag = (pos_rows, "pos") if swap else (neg_rows, "neg")
        ge_eta = "etaN" if swap else "etaP"
        le_eta = "etaP" if swap else "etaN"
        for idx, row in enumerate(ge_rows):
            coeffs = row_coeffs(row, swap)
            coeffs[f"{ge_eta}_{idx}"] = 1.0
            constraints.append(Constraint(
                f"ge_{idx}", coeffs, ">=", 1.0, tag=ge_tag, row=idx,
                lo_hint=0.0, hi_hint=mp + 1.0,
                no_eta_lo=0.0, no_eta_hi=float(mp)))
        for idx, row in enumerate(le_rows):
            coeffs = row_coeffs(row, swap)
            coeffs[f"{le_eta}_{idx}"] = -float(mp)
            constraints.append(Constraint(
                f"le_{idx}", coeffs, "<=", 0.0, tag=le_tag, row=idx,
                lo_hint=-float(mp), hi_hint=float(mp), no_eta="eq"))
    elif operator == ATLEAST:
        for idx, row in enumerate(pos_rows):
            coeffs = row_coeffs(row, False)
            coeffs[f"etaP_{idx}"] = float(mp)
            coeffs["k"] = -1.0
            constraints.append(Constraint(
                f"ge_{idx}", coeffs, ">=", 0.0, tag="pos", row=idx,
                lo_hint=-float(mp), hi_hint=2.0 * mp,
                no_eta_lo=-float(mp), no_eta_hi=float(mp)))
        for idx, row in enumerate(neg_rows):
            coeffs = row_coeffs(row, False)
            coeffs[f"etaN_{idx}"] = -float(mp + 1)
            coeffs["k"] = -1.0
            constraints.append(Constraint(
                f"le_{idx}", coeffs, "<=", -1.0, tag="neg", row=idx,
                lo_hint=-(mp + 1.0), hi_hint=float(mp),
                no_eta_lo=-float(mp), no_eta_hi=float(mp) - 1.0))
    elif operator == ATMOST:
        for idx, row in enumerate(pos_rows):
            coeffs = row_coeffs(row, False)
            coeffs[f"etaP_{idx}"] = -float(mp)
            coeffs["k"] = -1.0
            constraints.append(Constraint(
                f"le_{idx}", coeffs, "<=", 0.0, tag="pos", row=idx,
                lo_hint=-2.0 * mp, hi_hint=float(mp),
                no_eta_lo=-float(mp), no_eta_hi=0.0))
        for idx, row in enumerate(neg_rows):
            coeffs = row_coeffs(row, False)
            coeffs[f"etaN_{idx}"] = float(mp + 1)
            coeffs["k"] = -1.0
            constraints.append(Constraint(
                f"ge_{idx}", coeffs, ">=", 1.0, tag="neg", row=idx,
                lo_hint=-float(mp), hi_hint=mp + 1.0,
                no_eta_lo=-float(mp) + 1.0, no_eta_hi=float(mp)))

    if operator == CHOOSE:
        for idx, row in enumerate(pos_rows):
            base = row_coeffs(row, False)
            ge = dict(base)
            ge["etaP_" + str(idx)] = float(mp)
            ge["k"] = -1.0
            constraints.append(Constraint(
                f"posge_{idx}", ge, ">=", 0.0, tag="pos", row=idx,
                lo_hint=-float(mp), hi_hint=2.0 * mp, no_eta="eq"))
            le = dict(base)
            le["etaP_" + str(idx)] = -float(mp)
            le["k"] = -1.0
            constraints.append(Constraint(
                f"posle_{idx}", le, "<=", 0.0, tag="pos", row=idx,
                lo_hint=-2.0 * mp, hi_hint=float(mp),
                no_eta="drop"))
        for idx, row in enumerate(neg_rows):
            base = row_coeffs(row, False)
            ge = dict(base)
            ge[f"etaN_{idx}"] = float(mp + 1)
            ge[f"q_{idx}"] = float(mp + 1)
            ge["k"] = -1.0
            constraints.append(Constraint(
                f"negge_{idx}", ge, ">=", 1.0, tag="neg", row=idx,
                lo_hint=-float(mp), hi_hint=2.0 * mp + 2.0,
                no_eta_lo=-float(mp), no_eta_hi=2.0 * mp + 1.0))
            le = dict(base)
            le[f"etaN_{idx}"] = -float(mp + 1)
            le[f"q_{idx}"] = float(mp + 1)
            le["k"] = -1.0
            constraints.append(Constraint(
                f"negle_{idx}", le, "<=", float(mp), tag="neg", row=idx,
                lo_hint=-(mp + 1.0), hi_hint=2.0 * mp + 1.0,
                no_eta_lo=-float(mp), no_eta_hi=2.0 * mp + 1.0))

    if parameterized:
        coupling = {"k": 1.0}
        for i in range(m):
            coupling[f"b_{i}"] = -1.0
            coupling[f"nb_{i}"] = -1.0
        constraints.append(Constraint(
            "k_coupling", coupling, "<=", 0.0, tag="coupling",
            lo_hint=-float(mp), hi_hint=float(mp)))

    card = {}
    for i in range(m):
        card[f"b_{i}"] = 1.0
        card[f"nb_{i}"] = 1.0
    constraints.append(Constraint("cardinality", dict(card), "<=",
                                  float(max_literals), tag="card",
                                  lo_hint=0.0, hi_hint=float(2 * m)))
    if min_literals > 0:
        constraints.append(Constraint("min_literals", dict(card), ">=",
                                      float(min_literals), tag="minlit",
                                      lo_hint=0.0, hi_hint=float(max_literals)))

    objective = {}
    for r in range(n_p):
        objective[f"etaP_{r}"] = weights.w_p
    for r in range(n_n):
        objective[f"etaN_{r}"] = weights.w_n
    if lam:
        for i in range(m):
            objective[f"b_{i}"] = lam
            objective[f"nb_{i}"] = lam

    return IlpModel(operator, variables, constraints, objective,
                    max_literals, min_literals, lam, weights, X, y,
                    pos_rows, neg_rows)


# ---------------------------------------------------------------------------
# LP-file export and re-import

def _format_terms(coeffs: dict, order: list) -> str:
    parts = []
    for name in order:
        if name not in coeffs:
            continue
        c = coeffs[name]
        if c == 0:
            continue
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        mag_s = repr(mag)  # shortest exact float text, so parsing round-trips
        if not parts and sign == "+":
            parts.append(f"{mag_s} {name}" if mag != 1 else name)
        else:
            parts.append(f"{sign} " + (f"{mag_s} {name}" if mag != 1 else name))
    return " ".join(parts) if parts else "0 " + order[0]


def export_lp(model: IlpModel) -> str:
    """Serialize to CPLEX LP format with deterministic ordering."""
    order = [v.name for v in model.variables]
    lines = ["Minimize", " obj: " + _format_terms(model.objective, order),
             "Subject To"]
    sense_map = {"<=": "<=", ">=": ">=", "==": "="}
    for c in model.constraints:
        lines.append(f" {c.name}: " + _format_terms(c.coeffs, order)
                     + f" {sense_map[c.sense]} {c.rhs!r}")
    integers = [v for v in model.variables if v.kind == "integer"]
    if integers:
        lines.append("Bounds")
        for v in integers:
            lines.append(f" {v.lo:g} <= {v.name} <= {v.hi:g}")
    lines.append("Binaries")
    binaries = [v.name for v in model.variables if v.kind == "binary"]
    for i in range(0, len(binaries), 8):
        lines.append(" " + " ".join(binaries[i:i + 8]))
    if integers:
        lines.append("Generals")
        lines.append(" " + " ".join(v.name for v in integers))
    lines.append("End")
    return "\n".join(lines) + "\n"


_TERM = re.compile(r"([+-]?)\s*(\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)?\s*([A-Za-z_][A-Za-z0-9_]*)")


def _parse_expr(text: str) -> dict:
    coeffs = {}
    for sign, mag, name in _TERM.findall(text):
        c = float(mag) if mag else 1.0
        if sign == "-":
            c = -c
        if c != 0:
            coeffs[name] = coeffs.get(name, 0.0) + c
    return coeffs


def parse_lp(text: str) -> IlpModel:
    """Read back an LP file written by :func:`export_lp`."""
    section = None
    objective = {}
    constraints = []
    binaries = []
    generals = []
    bounds = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        lowered = line.lower()
        if lowered in ("minimize", "subject to", "bounds", "binaries",
                       "generals", "end"):
            section = lowered
            continue
        if section == "minimize":
            body = line.split(":", 1)[1] if ":" in line else line
            objective.update(_parse_expr(body))
        elif section == "subject to":
            name, body = line.split(":", 1)
            m = re.search(r"(<=|>=|=)\s*([+-]?\d+(?:\.\d+)?)\s*$", body)
            if not m:
                raise IlpError(f"cannot parse constraint line: {line!r}")
            sense = {"<=": "<=", ">=": ">=", "=": "=="}[m.group(1)]
            rhs = float(m.group(2))
            constraints.append(Constraint(name.strip(),
                                          _parse_expr(body[:m.start()]),
                                          sense, rhs))
        elif section == "bounds":
            m = re.match(r"([+-]?\d+(?:\.\d+)?)\s*<=\s*(\w+)\s*<=\s*([+-]?\d+(?:\.\d+)?)",
                         line)
            if m:
                bounds[m.group(2)] = (int(float(m.group(1))), int(float(m.group(3))))
        elif section == "binaries":
            binaries.extend(line.split())
        elif section == "generals":
            generals.extend(line.split())
    variables = [Variable(n, "binary") for n in binaries]
    for n in generals:
        lo, hi = bounds.get(n, (0, 1))
        variables.append(Variable(n, "integer", lo, hi))
    # drop coefficient-0 placeholder emitted for empty objectives
    objective = {k: v for k, v in objective.items() if v != 0}
    model = IlpModel("?", variables, constraints, objective, 0, 0, 0.0,
                     ClassWeights(1.0, 1.0))
    return model


# ---------------------------------------------------------------------------
# Exhaustive evaluation of the model's feasible assignments (test oracle)

def _lhs(coeffs: dict, assignment: dict) -> float:
    return sum(c * assignment.get(name, 0) for name, c in coeffs.items())


def _satisfied(con: Constraint, assignment: dict) -> bool:
    v = _lhs(con.coeffs, assignment)
    if con.sense == "<=":
        return v <= con.rhs + 1e-9
    if con.sense == ">=":
        return v >= con.rhs - 1e-9
    return abs(v - con.rhs) <= 1e-9


def exhaustive_ilp_solve(model: IlpModel) -> DepthOneSolution:
    """Enumerate feasible decision assignments; minimal etas are implied.

    For each choice of included literals (and k), each sample's error
    variable is set to 0 when its row constraints can be satisfied
    (choosing q freely for Choose), else 1.
    """
    m = model.num_features
    mp = model.max_literals
    parameterized = model.operator in PARAMETERIZED
    by_row: dict = {}
    hard = []
    for con in model.constraints:
        if con.tag in ("pos", "neg"):
            by_row.setdefault((con.tag, con.row), []).append(con)
        else:
            hard.append(con)

    indicators = [f"b_{i}" for i in range(m)] + [f"nb_{i}" for i in range(m)]
    best = None
    best_key = None
    for l in range(model.min_literals, mp + 1):
        for chosen in combinations(range(2 * m), l):
            assignment = {indicators[j]: 1 for j in chosen}
            k_values = range(min(l, mp) + 1) if parameterized else (None,)
            for k in k_values:
                if k is not None:
                    assignment["k"] = k
                if not all(_satisfied(c, assignment) for c in hard):
                    continue
                cost = model.lam * l
                for (tag, _row), cons in by_row.items():
                    eta_role = "etaP" if tag == "pos" else "etaN"
                    eta_name = next(n for c in cons for n in c.coeffs
                                    if n.startswith(eta_role))
                    ok = False
                    q_name = next((n for c in cons for n in c.coeffs
                                   if n.startswith("q_")), None)
                    for q in ((0, 1) if q_name else (0,)):
                        trial = dict(assignment)
                        if q_name:
                            trial[q_name] = q
                        if all(_satisfied(c, trial) for c in cons):
                            ok = True
                            break
                    if not ok:
                        cost += (model.weights.w_p if tag == "pos"
                                 else model.weights.w_n)
                lits = tuple(sorted(
                    (j % m, j >= m) for j in chosen))
                key = (cost, l, lits)
                if best is None or cost < best_key[0] - 1e-12:
                    best_key = key
                    best = DepthOneSolution(lits, model.operator, k,
                                            cost, cost - model.lam * l)
    return best
