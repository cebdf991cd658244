"""Emptiness of tree-constraint automata, with checkable certificates.

Nonemptiness is decided on the finite type algebra: the automaton accepts
some data word iff a run from an initial to a final state can be followed by
a noncontracting loop at that final state over the same tuple type.  The
reachability half only needs tuple types (a small graph); the loop half
saturates composite pair types from the final state until a noncontracting
one closes the loop.  Every positive verdict is backed by a concrete
certificate: a prefix run plus a stretching loop, rechecked before it is
reported.
"""

from __future__ import annotations

import json
import time
from collections import deque
from dataclasses import dataclass, field

from .algebra import TypeContext
from .automata import (
    Config,
    ConstraintAutomaton,
    Run,
    RunType,
    check_run,
    run_from_json,
    run_to_json,
)
from .errors import InternalCheckFailed, ParseError, PreconditionViolated
from .mcat import (
    OrderType,
    induced_iso_pair,
    is_noncontracting_pair,
    mcat_nodes,
    pair_type,
    stretch_leq,
    tuple_type,
)
from .realize import (
    extend_realization,
    extend_to_composite,
    lift_run,
    realize_tuple,
    stretch_upper_bound,
    widen_run_gaps,
)
from .words import (
    EPSILON,
    ConstantSet,
    Word,
    incomparable_left,
    insert_gap,
    is_constant_prefix,
    prefix_leq,
    strict_prefix,
)

TypeSet = set  # of RunType


@dataclass
class Certificate:
    """Concrete nonemptiness witness: a prefix run reaching a final state and
    a stretching loop starting exactly at its last configuration."""

    prefix_run: Run
    loop_run: Run

    def to_json(self) -> dict:
        return {
            "prefix_run": run_to_json(self.prefix_run),
            "loop_run": run_to_json(self.loop_run),
        }

    @staticmethod
    def from_json(data: dict) -> "Certificate":
        try:
            return Certificate(
                run_from_json(data["prefix_run"]), run_from_json(data["loop_run"])
            )
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed certificate JSON: {exc}") from exc


def save_certificate(cert: Certificate, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cert.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_certificate(path: str) -> Certificate:
    with open(path, encoding="utf-8") as fh:
        return Certificate.from_json(json.load(fh))


@dataclass
class EmptinessResult:
    empty: bool
    certificate: Certificate | None
    stats: dict = field(default_factory=dict)


# -- certificate checking -----------------------------------------------------


def check_certificate(aut: ConstraintAutomaton, cert: Certificate):
    """Validate a certificate against the automaton.

    Returns (ok, reason); malformed input yields (False, reason) rather than
    raising."""
    try:
        prefix, loop = cert.prefix_run, cert.loop_run
        if not prefix or not loop:
            return False, "runs must be nonempty configuration sequences"
        for c in prefix + loop:
            if len(c.values) != aut.dim:
                return False, f"configuration arity {len(c.values)} differs from dimension {aut.dim}"
            if c.state not in aut.states:
                return False, f"state {c.state!r} not declared"
        if prefix[0].state not in aut.initial:
            return False, f"prefix starts in non-initial state {prefix[0].state!r}"
        if not check_run(aut, prefix):
            return False, "prefix run violates the transition guards"
        if not check_run(aut, loop):
            return False, "loop run violates the transition guards"
        if prefix[-1] != loop[0]:
            return False, "loop does not start at the prefix's last configuration"
        if loop[0].state not in aut.final:
            return False, f"junction state {loop[0].state!r} is not final"
        if len(loop) < 2:
            return False, "loop must take at least one step"
        if not stretch_leq(loop[0], loop[-1], aut.constants):
            return False, "loop end is not stretch-above the loop start"
        return True, "ok"
    except Exception as exc:  # malformed words, arities, etc.
        return False, f"malformed certificate: {exc}"


# -- stretchify ---------------------------------------------------------------


@dataclass(frozen=True)
class ProblemPair:
    low: Word
    high: Word
    deficiency: int
    kind: str  # "L", "R", or "D"


def problem_pairs(first: Config, last: Config, constants: ConstantSet) -> list[ProblemPair]:
    """Interval pairs of the start tree that the loop shrinks, classified by
    where the endpoint's image lies (left, right, or comparable)."""
    h = induced_iso_pair(first.values, last.values, constants)
    if h is None:
        raise PreconditionViolated("loop endpoints have different tuple types")
    nodes = mcat_nodes(first.values, constants)
    out = []
    for u1 in nodes:
        for u2 in nodes:
            if not strict_prefix(u1, u2):
                continue
            d = (len(u2) - len(u1)) - (len(h[u2]) - len(h[u1]))
            if d <= 0:
                continue
            if incomparable_left(u2, h[u2]):
                kind = "L"
            elif incomparable_left(h[u2], u2):
                kind = "R"
            else:
                kind = "D"
            out.append(ProblemPair(u1, u2, d, kind))
    return out


def _measure(pairs: list[ProblemPair], nodes: list[Word]) -> tuple:
    """Well-founded progress measure: multisets (descending) of endpoint
    potentials, compared lexicographically D, then L, then R."""
    ordered = sorted(nodes)
    rank = {u: i for i, u in enumerate(ordered)}
    k = len(ordered)
    depth = {u: sum(1 for v in ordered if strict_prefix(v, u)) for u in ordered}
    phi_d = sorted((k - depth[p.high] for p in pairs if p.kind == "D"), reverse=True)
    phi_l = sorted((k - rank[p.high] for p in pairs if p.kind == "L"), reverse=True)
    phi_r = sorted((rank[p.high] for p in pairs if p.kind == "R"), reverse=True)
    return (tuple(phi_d), tuple(phi_l), tuple(phi_r))


def stretchify(run: Run, constants: ConstantSet) -> Run:
    """Turn a noncontracting loop into a stretching loop of the same type by
    inserting gaps; the result is pointwise stretch-above the input."""
    if not run:
        raise PreconditionViolated("empty run")
    first, last = run[0], run[-1]
    if first.state != last.state:
        raise PreconditionViolated("loop endpoints have different states")
    if induced_iso_pair(first.values, last.values, constants) is None:
        raise PreconditionViolated("loop endpoints have different tuple types")
    if not is_noncontracting_pair(first.values, last.values, constants):
        raise PreconditionViolated("loop is contracting")
    out = list(run)
    nodes0 = mcat_nodes(first.values, constants)
    pairs0 = problem_pairs(first, last, constants)
    max_d = max((p.deficiency for p in pairs0), default=0)
    cap = 4 * len(nodes0) * len(nodes0) * (max_d + 2) + 64
    prev = None
    for _ in range(cap):
        first, last = out[0], out[-1]
        if stretch_leq(first, last, constants):
            return out
        h = induced_iso_pair(first.values, last.values, constants)
        nodes = mcat_nodes(first.values, constants)
        pairs = problem_pairs(first, last, constants)
        measure = _measure(pairs, nodes)
        if prev is not None and not measure < prev:
            raise InternalCheckFailed("stretchify progress measure did not decrease")
        prev = measure
        for kind, pick in (("L", min), ("R", max), ("D", min)):
            bucket = [p for p in pairs if p.kind == kind]
            if bucket:
                u2 = pick(p.high for p in bucket)
                d = max(p.deficiency for p in bucket if p.high == u2)
                at = h[u2]
                if is_constant_prefix(at, constants):
                    raise InternalCheckFailed("gap point inside the constant skeleton")
                out = [
                    Config(c.state, tuple(insert_gap(at, d, v) for v in c.values))
                    for c in out
                ]
                break
        else:
            raise InternalCheckFailed("non-stretching loop without problem pairs")
    raise InternalCheckFailed("stretchify exceeded its iteration cap")


# -- saturation ---------------------------------------------------------------


def _one_step_index(aut: ConstraintAutomaton, ctx: TypeContext):
    """Per source state: (first-restriction, second-restriction, type, target)
    of every one-step run type, in declared transition order."""
    index: dict[str, list[tuple[int, int, int, str]]] = {}
    for t in aut.transitions:
        for tid in ctx.types_for_guard(t.guard, aut.dim):
            fr = ctx.first_restriction_id(tid)
            er = ctx.second_restriction_id(tid)
            index.setdefault(t.source, []).append((fr, er, tid, t.target))
    return index


def saturate(one_step: TypeSet, constants: ConstantSet) -> TypeSet:
    """Least set containing the one-step types and closed under composition
    with them on the right; equals the types of all runs of length >= 1."""
    result, _ = _saturate_with_witnesses(one_step, constants)
    return result


def _saturate_with_witnesses(one_step: TypeSet, constants: ConstantSet):
    ctx = TypeContext.get(constants)
    index: dict[tuple[str, int], list[tuple[int, str, RunType]]] = {}
    for rt in sorted(one_step, key=lambda r: (r.start, r.end, r.typ.root)):
        tid = ctx.intern(rt.typ)
        fr = ctx.first_restriction_id(tid)
        index.setdefault((rt.start, fr), []).append((tid, rt.end, rt))
    seen: dict[RunType, tuple] = {}
    queue: deque[RunType] = deque()
    for rt in sorted(one_step, key=lambda r: (r.start, r.end, r.typ.root)):
        if rt not in seen:
            seen[rt] = (None, rt)
            queue.append(rt)
    while queue:
        cur = queue.popleft()
        cur_id = ctx.intern(cur.typ)
        er = ctx.second_restriction_id(cur_id)
        for tid, target, step_rt in index.get((cur.end, er), []):
            for comp in ctx.compose_ids(cur_id, tid):
                new = RunType(cur.start, ctx.type_of(comp), target)
                if new not in seen:
                    seen[new] = (cur, step_rt)
                    queue.append(new)
    return set(seen), seen


# -- emptiness ----------------------------------------------------------------


def _reach_graph(aut: ConstraintAutomaton, ctx: TypeContext, index):
    """BFS over (state, tuple type) pairs from all initial seeds."""
    seeds = [
        (q, rho)
        for q in aut.initial
        for rho in ctx.tuple_universe(aut.dim)
    ]
    parent: dict[tuple, tuple | None] = {}
    order: list[tuple] = []
    queue = deque()
    for s in seeds:
        if s not in parent:
            parent[s] = None
            order.append(s)
            queue.append(s)
    while queue:
        q, rho = queue.popleft()
        for fr, er, tid, target in index.get(q, []):
            if fr != rho:
                continue
            node = (target, er)
            if node not in parent:
                parent[node] = ((q, rho), tid)
                order.append(node)
                queue.append(node)
    return parent, order


def _targeted_search(ctx: TypeContext, index, start_state: str, start_fr: int, accept):
    """Saturate composite loop candidates from one (state, tuple type) seed,
    stopping at the first hit of `accept((composite_id, state))`."""
    parent: dict[tuple[int, str], tuple] = {}
    queue: deque[tuple[int, str]] = deque()
    expansions = 0
    for fr, er, tid, target in index.get(start_state, []):
        if fr != start_fr:
            continue
        node = (tid, target)
        if node not in parent:
            parent[node] = (None, tid)
            if accept(node):
                return node, parent, expansions
            queue.append(node)
    while queue:
        comp_id, state = queue.popleft()
        er = ctx.second_restriction_id(comp_id)
        for fr, er2, tid, target in index.get(state, []):
            if fr != er:
                continue
            expansions += 1
            for comp in ctx.compose_ids(comp_id, tid):
                node = (comp, target)
                if node not in parent:
                    parent[node] = ((comp_id, state), tid)
                    if accept(node):
                        return node, parent, expansions
                    queue.append(node)
    return None, parent, expansions


def _chain(node, parent):
    """Reconstruct [(step_type_id, composite_id, target_state), ...]."""
    steps = []
    while node is not None:
        prev, step_tid = parent[node]
        steps.append((step_tid, node[0], node[1]))
        node = prev
    steps.reverse()
    return steps


def _realize_gap(n: int) -> int:
    return max(4, 2 ** (2 * n))


def _realize_loop_run(
    aut: ConstraintAutomaton, ctx: TypeContext, start_state: str, start_rho: int, steps
) -> Run:
    constants = aut.constants
    gap = _realize_gap(aut.dim)
    start = Config(start_state, realize_tuple(ctx.type_of(start_rho), constants, gap))
    run: Run = [start]
    for k, (step_tid, comp_tid, target_state) in enumerate(steps):
        run = widen_run_gaps(run, constants, gap)
        if k == 0:
            z = extend_realization(run[-1].values, ctx.type_of(step_tid), constants)
        else:
            z = extend_to_composite(
                run[0].values,
                run[-1].values,
                ctx.type_of(step_tid),
                ctx.type_of(comp_tid),
                constants,
            )
        run.append(Config(target_state, z))
    return run


def _realize_reach_run(
    aut: ConstraintAutomaton, ctx: TypeContext, seed, parent_map
) -> Run:
    constants = aut.constants
    gap = _realize_gap(aut.dim)
    # backtrack the (state, tuple-type) path
    path = []
    node = seed
    while parent_map[node] is not None:
        prev, tid = parent_map[node]
        path.append((tid, node[0]))
        node = prev
    path.reverse()
    start_state, start_rho = node
    run: Run = [Config(start_state, realize_tuple(ctx.type_of(start_rho), constants, gap))]
    for tid, target_state in path:
        run = widen_run_gaps(run, constants, gap)
        z = extend_realization(run[-1].values, ctx.type_of(tid), constants)
        run.append(Config(target_state, z))
    return run


def _assemble_certificate(
    aut: ConstraintAutomaton, reach_run: Run, loop_run: Run
) -> Certificate:
    constants = aut.constants
    junction_lo = reach_run[-1]
    cup = stretch_upper_bound(junction_lo, loop_run[0], constants)
    lifted_loop = lift_run(loop_run, cup, "forward", aut)
    stretching_loop = stretchify(lifted_loop, constants)
    junction = stretching_loop[0]
    prefix = lift_run(reach_run, junction, "backward", aut)
    cert = Certificate(prefix, stretching_loop)
    ok, reason = check_certificate(aut, cert)
    if not ok:
        raise InternalCheckFailed(f"constructed certificate failed its check: {reason}")
    return cert


def decide_emptiness(aut: ConstraintAutomaton) -> EmptinessResult:
    """Full emptiness decision with statistics and certificate construction."""
    t0 = time.perf_counter()
    ctx = TypeContext.get(aut.constants)
    index = _one_step_index(aut, ctx)
    one_step_count = sum(len(v) for v in index.values())
    parent, order = _reach_graph(aut, ctx, index)
    final = set(aut.final)
    expansions_total = 0
    loops_tried = 0
    for node in order:
        state, rho = node
        if state not in final:
            continue
        loops_tried += 1

        def accept(n):
            comp_id, target = n
            return (
                target == state
                and ctx.second_restriction_id(comp_id) == rho
                and ctx.noncontracting_id(comp_id)
            )

        hit, loop_parent, expansions = _targeted_search(ctx, index, state, rho, accept)
        expansions_total += expansions
        if hit is None:
            continue
        reach_run = _realize_reach_run(aut, ctx, node, parent)
        loop_steps = _chain(hit, loop_parent)
        loop_run = _realize_loop_run(aut, ctx, state, rho, loop_steps)
        cert = _assemble_certificate(aut, reach_run, loop_run)
        stats = {
            "one_step_types": one_step_count,
            "pair_types": len(ctx.pair_universe(aut.dim)),
            "loop_searches": loops_tried,
            "saturation_expansions": expansions_total,
            "wall_seconds": round(time.perf_counter() - t0, 6),
        }
        return EmptinessResult(False, cert, stats)
    stats = {
        "one_step_types": one_step_count,
        "pair_types": len(ctx.pair_universe(aut.dim)),
        "loop_searches": loops_tried,
        "saturation_expansions": expansions_total,
        "wall_seconds": round(time.perf_counter() - t0, 6),
    }
    return EmptinessResult(True, None, stats)


def is_empty(aut: ConstraintAutomaton):
    """(empty?, certificate-or-None); the certificate is self-checked."""
    res = decide_emptiness(aut)
    return res.empty, res.certificate


def build_certificate(
    aut: ConstraintAutomaton, reach_type: RunType, loop_type: RunType
) -> Certificate:
    """Concrete certificate for a reach type and a noncontracting loop type
    that together witness nonemptiness."""
    ctx = TypeContext.get(aut.constants)
    if reach_type.start not in aut.initial:
        raise PreconditionViolated("reach type must start in an initial state")
    if reach_type.end not in aut.final or loop_type.start != reach_type.end:
        raise PreconditionViolated("loop must sit at the reach type's final state")
    if loop_type.start != loop_type.end:
        raise PreconditionViolated("loop type must start and end in the same state")
    loop_id = ctx.intern(loop_type.typ)
    reach_id = ctx.intern(reach_type.typ)
    if ctx.second_restriction_id(reach_id) != ctx.first_restriction_id(loop_id):
        raise PreconditionViolated("reach and loop types disagree on the junction type")
    if not ctx.noncontracting_id(loop_id):
        raise PreconditionViolated("loop type is contracting")
    index = _one_step_index(aut, ctx)

    rho = ctx.first_restriction_id(loop_id)
    hit, loop_parent, _ = _targeted_search(
        ctx, index, loop_type.start, rho, lambda n: n == (loop_id, loop_type.end)
    )
    if hit is None:
        raise PreconditionViolated("loop type is not realized by any run")
    loop_run = _realize_loop_run(
        aut, ctx, loop_type.start, rho, _chain(hit, loop_parent)
    )

    reach_fr = ctx.first_restriction_id(reach_id)
    identity = ctx.identity_pair_id(reach_fr)
    if reach_id == identity and reach_type.start == reach_type.end:
        reach_run = [
            Config(
                reach_type.start,
                realize_tuple(ctx.type_of(reach_fr), aut.constants, _realize_gap(aut.dim)),
            )
        ]
    else:
        hit2, reach_parent, _ = _targeted_search(
            ctx, index, reach_type.start, reach_fr, lambda n: n == (reach_id, reach_type.end)
        )
        if hit2 is None:
            raise PreconditionViolated("reach type is not realized by any run")
        reach_run = _realize_loop_run(
            aut, ctx, reach_type.start, reach_fr, _chain(hit2, reach_parent)
        )
    return _assemble_certificate(aut, reach_run, loop_run)
