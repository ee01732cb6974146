"""Penalty-method QUBO conversion of the depth-one ILP, plus an annealer.

Inequalities become squared equality penalties after adding binary-encoded
integer slacks sized from each constraint's known LHS range.  Two variants:

* with_eta keeps the misclassification indicators; sample penalties carry
  the class weight so violating a row costs the same as flagging it.
* without_eta deletes the indicators and softens the sample constraints
  directly, which squares (and so overweights) multi-unit violations.

Structural constraints (cardinality, k coupling, minimum literals) stay
hard in both variants via a large penalty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .formula import AND, ATLEAST, ATMOST, CHOOSE, OR, PARAMETERIZED
from .ilp import IlpModel
from .oracle import DepthOneSolution, predict_counts, weighted_error_bits
from .bitvec import mask_for
from .formula import _count_planes, _compare_counts

WITH_ETA = "with_eta"
WITHOUT_ETA = "without_eta"
MODES = (WITH_ETA, WITHOUT_ETA)


class QuboError(ValueError):
    pass


def slack_coefficients(span: int) -> list:
    """Binary encoding of an integer in [0, span], top coefficient trimmed
    so the encoded maximum is exactly span."""
    if span < 0:
        raise QuboError("negative slack span")
    if span == 0:
        return []
    bits = math.ceil(math.log2(span + 1))
    coeffs = [1 << b for b in range(bits - 1)]
    coeffs.append(span - ((1 << (bits - 1)) - 1))
    return coeffs


@dataclass
class PenaltyTerm:
    weight: float
    coeffs: dict           # variable name -> coefficient
    target: float          # weight * (sum - target)^2
    label: str = ""


@dataclass
class QuboModel:
    names: list
    linear: dict
    quadratic: dict        # (i, j) with i < j
    offset: float
    terms: list            # PenaltyTerm list, the pre-expansion form
    linear_obj: dict       # name -> coefficient, the non-penalty part
    mode: str
    source: Optional[IlpModel] = None
    index: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {n: i for i, n in enumerate(self.names)}

    @property
    def num_variables(self) -> int:
        return len(self.names)

    def energy(self, x: np.ndarray) -> float:
        e = self.offset
        for i, c in self.linear.items():
            if x[i]:
                e += c
        for (i, j), c in self.quadratic.items():
            if x[i] and x[j]:
                e += c
        return e

    def penalized_energy(self, x: np.ndarray) -> float:
        """Recompute the energy from the unexpanded terms; this is an
        independent route used to cross-check the quadratic expansion."""
        e = 0.0
        for name, c in self.linear_obj.items():
            if x[self.index[name]]:
                e += c
        for t in self.terms:
            s = sum(c for n, c in t.coeffs.items() if x[self.index[n]])
            e += t.weight * (s - t.target) ** 2
        return e

    def to_arrays(self):
        n = self.num_variables
        h = np.zeros(n)
        for i, c in self.linear.items():
            h[i] = c
        s = np.zeros((n, n))
        for (i, j), c in self.quadratic.items():
            s[i, j] += c
            s[j, i] += c
        return h, s


def _add_square(linear, quadratic, index, weight, coeffs, target):
    names = [n for n, c in coeffs.items() if c != 0]
    offset = weight * target * target
    for a in names:
        ia = index[a]
        ca = coeffs[a]
        linear[ia] = linear.get(ia, 0.0) + weight * ca * (ca - 2.0 * target)
    for p in range(len(names)):
        for qn in range(p + 1, len(names)):
            i, j = index[names[p]], index[names[qn]]
            if i > j:
                i, j = j, i
            key = (i, j)
            quadratic[key] = (quadratic.get(key, 0.0)
                              + 2.0 * weight * coeffs[names[p]] * coeffs[names[qn]])
    return offset


def ilp_to_qubo(model: IlpModel, mode: str = WITH_ETA, l1: float = 1.0,
                l2: Optional[float] = None) -> QuboModel:
    if mode not in MODES:
        raise QuboError(f"unknown mode {mode!r}")
    if l2 is None:
        l2 = 100.0 * l1 * max(model.weights.w_p, model.weights.w_n) * model.y.n
    with_eta = mode == WITH_ETA
    mp = model.max_literals
    parameterized = model.operator in PARAMETERIZED

    names = []
    for v in model.variables:
        if v.role in ("b", "nb"):
            names.append(v.name)
    if with_eta:
        names.extend(v.name for v in model.variables
                     if v.role in ("etaP", "etaN"))
    names.extend(v.name for v in model.variables if v.role == "q")
    k_coeffs = {}
    if parameterized:
        for b, c in enumerate(slack_coefficients(mp)):
            names.append(f"k[{b}]")
            k_coeffs[f"k[{b}]"] = float(c)

    terms = []
    linear_obj = {}
    for name, c in model.objective.items():
        if not with_eta and (name.startswith("etaP") or name.startswith("etaN")):
            continue
        linear_obj[name] = l1 * c

    slack_id = 0
    pending = []              # (weight, coeffs with slack, target, label)
    for con in model.constraints:
        soft = con.tag in ("pos", "neg")
        if soft and not with_eta and con.no_eta == "drop":
            continue
        coeffs = {}
        for n, c in con.coeffs.items():
            if n == "k":
                for kn, kc in k_coeffs.items():
                    coeffs[kn] = coeffs.get(kn, 0.0) + c * kc
            elif not with_eta and (n.startswith("etaP") or n.startswith("etaN")):
                continue
            else:
                coeffs[n] = coeffs.get(n, 0.0) + c
        if soft:
            weight = l1 * (model.weights.w_p if con.tag == "pos"
                           else model.weights.w_n)
        else:
            weight = l2
        if soft and not with_eta and con.no_eta == "eq":
            pending.append((weight, coeffs, con.rhs, con.name))
            continue
        if con.sense == "==":
            pending.append((weight, coeffs, con.rhs, con.name))
            continue
        if soft and not with_eta:
            lo, hi = con.no_eta_lo, con.no_eta_hi
        else:
            lo, hi = con.lo_hint, con.hi_hint
        if lo is None or hi is None:
            raise QuboError(f"constraint {con.name} lacks range hints")
        # the LHS must land in [low, up]; anchor the squared penalty at the
        # smaller-magnitude bound and let the slack absorb the window
        if con.sense == ">=":
            low, up = con.rhs, hi
        else:
            low, up = lo, con.rhs
        span = int(round(up - low))
        anchor = low if abs(low) <= abs(up) else up
        sign = -1.0 if anchor == low else 1.0
        for c in slack_coefficients(span):
            sn = f"s{slack_id}"
            slack_id += 1
            names.append(sn)
            coeffs[sn] = sign * c
        pending.append((weight, coeffs, float(anchor), con.name))

    index = {n: i for i, n in enumerate(names)}
    linear = {}
    quadratic = {}
    offset = 0.0
    for name, c in linear_obj.items():
        linear[index[name]] = linear.get(index[name], 0.0) + c
    for weight, coeffs, target, label in pending:
        offset += _add_square(linear, quadratic, index, weight, coeffs, target)
        terms.append(PenaltyTerm(weight, coeffs, target, label))
    linear = {i: c for i, c in linear.items() if c != 0}
    quadratic = {k: c for k, c in quadratic.items() if c != 0}
    return QuboModel(names, linear, quadratic, offset, terms, linear_obj,
                     mode, model, index)


# ---------------------------------------------------------------------------
# Annealer

_KERNEL = None


def _kernel():
    global _KERNEL
    if _KERNEL is None:
        from numba import njit

        @njit(cache=True)
        def run(h, indptr, indices, data, betas, scales, num_reads, sweeps,
                seed):
            # couplings in symmetric CSR form: only nonzero neighbors are
            # touched when a flip is accepted
            n = h.shape[0]
            best_x = np.zeros((num_reads, n), dtype=np.int8)
            best_e = np.empty(num_reads)
            np.random.seed(seed)
            for read in range(num_reads):
                x = (np.random.random(n) < 0.5).astype(np.int8)
                f = h.copy()
                e = 0.0
                for i in range(n):
                    if x[i]:
                        e += h[i]
                        for idx in range(indptr[i], indptr[i + 1]):
                            f[indices[idx]] += data[idx]
                            if x[indices[idx]]:
                                e += 0.5 * data[idx]
                be = e
                bx = x.copy()
                for sweep in range(sweeps):
                    beta = betas[sweep] * scales[read]
                    for i in range(n):
                        de = f[i] if x[i] == 0 else -f[i]
                        # acceptance below exp(-46) ~ 1e-20: skip the draw
                        if de > 0.0 and de * beta > 46.0:
                            continue
                        if de <= 0.0 or np.random.random() < np.exp(-de * beta):
                            old = x[i]
                            x[i] = 1 - old
                            delta = 1.0 if old == 0 else -1.0
                            e += de
                            for idx in range(indptr[i], indptr[i + 1]):
                                f[indices[idx]] += data[idx] * delta
                            if e < be:
                                be = e
                                bx[:] = x
                # zero-temperature quench: greedy single flips to a local min
                improved = True
                passes = 0
                while improved and passes < 64:
                    improved = False
                    passes += 1
                    for i in range(n):
                        de = f[i] if x[i] == 0 else -f[i]
                        if de < 0.0:
                            old = x[i]
                            x[i] = 1 - old
                            delta = 1.0 if old == 0 else -1.0
                            e += de
                            for idx in range(indptr[i], indptr[i + 1]):
                                f[indices[idx]] += data[idx] * delta
                            improved = True
                    if e < be:
                        be = e
                        bx[:] = x
                best_e[read] = be
                best_x[read] = bx
            return best_x, best_e

        _KERNEL = run
    return _KERNEL


def anneal_schedule(qubo: QuboModel, num_sweeps: int,
                    num_cycles: int = 20) -> np.ndarray:
    """Cyclic inverse-temperature ladder.

    Penalty QUBOs separate scales: constraint weights dwarf the objective
    coefficients, so single flips between feasible configurations must pass
    through a constraint-violation barrier.  Each cycle spends most of its
    sweeps where that barrier is passable (beta around 1/weight), letting
    the walk hop between configurations, then cools so the visited
    configuration registers at its true (penalty-free) energy.  Reheating
    turns one read into many quasi-independent samples.
    """
    if qubo.terms:
        barrier = max(t.weight for t in qubo.terms)
    else:
        mags = [abs(c) for c in qubo.linear.values()]
        mags += [abs(c) for c in qubo.quadratic.values()]
        barrier = max(mags) if mags else 1.0
    mags = [abs(c) for c in qubo.linear.values()]
    mags += [abs(c) for c in qubo.quadratic.values()]
    cold = max(min(mags) if mags else 1.0, 1e-12)
    lo, hi = 0.3 / barrier, 5.0 / barrier
    per = max(num_sweeps // num_cycles, 2)
    n_walk = max(int(per * 0.6), 1)
    n_cool = per - n_walk
    walk = lo * (hi / lo) ** (np.arange(n_walk) / max(n_walk - 1, 1))
    beta_cold = max(10.0 / cold, 100.0 * hi)
    cool = hi * (beta_cold / hi) ** (np.arange(1, n_cool + 1) / max(n_cool, 1))
    cycle = np.concatenate([walk, cool])
    return np.tile(cycle, num_cycles + 1)[:num_sweeps]


def qubo_anneal(qubo: QuboModel, num_reads: int = 100,
                num_sweeps: int = 2000, seed: int = 0):
    """Best-of-num_reads single-flip Metropolis annealing on a cyclic
    inverse-temperature ladder sized from the coefficient magnitudes.

    Returns (states, energies) sorted best first; energies include the
    model offset.
    """
    h, s = qubo.to_arrays()
    n = qubo.num_variables
    if n == 0:
        return np.zeros((1, 0), dtype=np.int8), np.array([qubo.offset])
    betas = anneal_schedule(qubo, num_sweeps)
    # per-read jitter so the ensemble covers a range of effective schedules
    rng = np.random.default_rng(seed)
    scales = 2.0 ** rng.uniform(-1.0, 1.0, size=num_reads)
    scales[0] = 1.0
    rows, cols = np.nonzero(s)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    states, energies = _kernel()(h, indptr, cols.astype(np.int64),
                                 s[rows, cols], betas, scales, num_reads,
                                 num_sweeps, seed & 0x7FFFFFFF)
    order = np.argsort(energies, kind="stable")
    return states[order], energies[order] + qubo.offset


def decode(state: np.ndarray, qubo: QuboModel) -> DepthOneSolution:
    """Map an annealer state back to a depth-one rule and score it on the
    model's data.  The reported objective is recomputed from the data, so
    an infeasible or error-flag-cheating state cannot claim a better value
    than it earns."""
    model = qubo.source
    if model is None or model.X is None:
        raise QuboError("model carries no data to decode against")
    m = model.num_features
    conflicts = []
    lits = []
    for i in range(m):
        pos = state[qubo.index[f"b_{i}"]]
        neg = state[qubo.index[f"nb_{i}"]]
        if pos and neg:
            conflicts.append(i)
        elif pos:
            lits.append((i, False))
        elif neg:
            lits.append((i, True))
    k = None
    if model.operator in PARAMETERIZED:
        k = 0
        for b, c in enumerate(slack_coefficients(model.max_literals)):
            k += c * int(state[qubo.index[f"k[{b}]"]])
    literal_count = len(lits) + 2 * len(conflicts)
    feasible = (not conflicts
                and model.min_literals <= literal_count <= model.max_literals
                and (k is None or k <= literal_count))
    mask = mask_for(model.y.n)
    cols = []
    for f, negd in lits:
        col = model.X.columns[f]
        cols.append((~col) & mask if negd else col)
    op = model.operator
    if op in (OR, AND):
        acc = 0
        if op == OR:
            for c in cols:
                acc |= c
            pred = acc
        else:
            pred = mask
            for c in cols:
                pred &= c
    else:
        planes = _count_planes(cols)
        gt, eq = _compare_counts(planes, k, mask)
        pred = predict_counts(gt, eq, mask, op)
    err = weighted_error_bits(pred, model.y.bits, mask, model.weights)
    obj = err + model.lam * literal_count
    return DepthOneSolution(tuple(sorted(lits)), op, k, obj, err,
                            feasible=feasible, conflicts=tuple(conflicts))


def solve_qubo(model: IlpModel, mode: str = WITH_ETA, num_reads: int = 100,
               num_sweeps: int = 2000, seed: int = 0) -> DepthOneSolution:
    """Convert, anneal, and decode; returns the best feasible decoded
    solution, falling back to the lowest-energy state if none decode
    feasibly."""
    qubo = ilp_to_qubo(model, mode)
    states, _ = qubo_anneal(qubo, num_reads, num_sweeps, seed)
    best = None
    for state in states:
        sol = decode(state, qubo)
        if sol.feasible and (best is None or sol.objective < best.objective):
            best = sol
    if best is None:
        best = decode(states[0], qubo)
    return best


def export_qubo(qubo: QuboModel) -> str:
    """Coordinate text format: a header with the size and constant offset,
    then one `i j value` line per nonzero entry (diagonal = linear)."""
    lines = [f"# qubo {qubo.num_variables} offset {qubo.offset!r}"]
    entries = [(i, i, c) for i, c in sorted(qubo.linear.items())]
    entries += [(i, j, c) for (i, j), c in sorted(qubo.quadratic.items())]
    entries.sort()
    for i, j, c in entries:
        lines.append(f"{i} {j} {c!r}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Closed-form variable counts

def count_qubo_variables(m: int, n: int, n_p: int, max_literals: int,
                         operator: str, mode: str = WITH_ETA) -> int:
    """Number of binary variables in the penalty-form QUBO for a depth-one
    model over m features and n samples (n_p positive)."""
    if mode not in MODES:
        raise QuboError(f"unknown mode {mode!r}")
    n_n = n - n_p
    mp = max_literals
    kb = math.ceil(math.log2(mp + 1))       # bits for k and mp-span slacks
    wide = math.ceil(math.log2(2 * mp + 1))
    narrow = math.ceil(math.log2(mp)) if mp > 1 else 0
    if mode == WITH_ETA:
        if operator in (OR, AND):
            return 2 * m + n + kb * (n + 1)
        if operator in (ATLEAST, ATMOST):
            return 2 * m + n + wide * n_p + kb * n_n + 3 * kb
        if operator == CHOOSE:
            return 2 * m + n + n_n + 2 * n * narrow + 3 * kb
    else:
        if operator == OR:
            return 2 * m + kb + narrow * n_p
        if operator == AND:
            return 2 * m + kb + narrow * n_n
        if operator in (ATLEAST, ATMOST):
            return 2 * m + 3 * kb + kb * n_p + narrow * n_n
        if operator == CHOOSE:
            return 2 * m + n_n + 3 * kb + kb * n
    raise QuboError(f"unknown operator {operator!r}")
