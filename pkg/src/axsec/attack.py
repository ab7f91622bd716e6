"""Bottom-up Trojan insertion: architecture characterization, cost ranking,
budget checking, rare-net trigger construction and stealth verification.

The trigger is an AND over q rare-net literals chosen from profiled
activity, preferring nets inside high-scoring instances and, by default,
nets whose input-word cones are pairwise disjoint: the witness assignment
then composes word-wise from trace cycles that realized each rare value,
and the firing probability under independent uniform inputs is the product
of the per-literal rarities.  Insertion is fail-closed: a netlist is only
emitted together with a replayed, verified witness.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .arith import ArchParams, gen_module
from .errors import (BadParams, NoRareNets, NoWitness, SignatureMismatch,
                     UnitMismatch, WouldViolateTiming)
from .netlist import GateKind, Netlist, NetlistBuilder
from .scoap import ScoapReport, scoap
from .sim import (ActivityReport, VectorStream, activity_profile,
                  error_profile, eval_vector, exhaustive_bits, iter_traces,
                  power_proxy, rare_nets, simulate)
from .sta import DelayModel, critical_delay, slacks


def _stream_key(stream):
    if isinstance(stream, VectorStream):
        return (stream.n_vectors, stream.seed, stream.mode, stream.rho)
    return ("bits", id(stream))


@dataclass(frozen=True)
class CostWeights:
    """Priority weights of the selection cost: accuracy+power vs rare
    nets."""

    w_ap: float = 0.5
    w_r: float = 0.5

    def __post_init__(self):
        if self.w_ap < 0 or self.w_r < 0:
            raise BadParams("weights must be non-negative")


@dataclass(frozen=True)
class ModuleSpec:
    """Characterization of one architecture under a fixed stream."""

    params: ArchParams
    e_norm: float        # MRED against the exact operator
    p_norm: float        # power proxy ratio vs the exact architecture
    rare_count: int
    r_norm: float        # rare nets / total nets
    scoap_summary: int   # max cc1 among rare nets (0 when none)
    stream_key: tuple = ()


def characterize(params: ArchParams, stream, theta: float = 0.01) -> ModuleSpec:
    """Measure one architecture's error, relative power and rare-net profile
    on the given stream, against the exact architecture as baseline."""
    nl = gen_module(params)
    err = error_profile(nl, params, stream)
    act = activity_profile(nl, stream)
    base_nl = gen_module(ArchParams(params.op_type, "exact", params.width))
    base = power_proxy(base_nl, activity_profile(base_nl, stream))
    proxy = power_proxy(nl, act, base)
    rare = rare_nets(act, theta)
    sc = scoap(nl)
    summary = max((int(sc.cc1[n]) for n, _ in rare), default=0)
    return ModuleSpec(params, err.mred, proxy.ratio, len(rare),
                      len(rare) / nl.n_nets, summary, _stream_key(stream))


def attack_score(spec: ModuleSpec, weights: CostWeights = CostWeights()) -> float:
    """Selection cost: error gained plus power saved, plus rare-net supply;
    higher means a more attractive host."""
    return (weights.w_ap * (spec.e_norm + (1.0 - spec.p_norm))
            + weights.w_r * spec.r_norm)


def rank_candidates(specs, weights: CostWeights = CostWeights()):
    """Specs ordered by descending attack score (ties by label)."""
    return sorted(specs, key=lambda s: (-attack_score(s, weights),
                                        s.params.label(), s.params.op_type))


@dataclass(frozen=True)
class BudgetConstraints:
    """Declared composed-netlist budgets and admissible slacks."""

    e_prime: float
    p_prime: float
    delta_e: float
    delta_p: float

    def __post_init__(self):
        if self.delta_e <= 0 or self.delta_p <= 0:
            raise BadParams("budget slacks must be positive")


@dataclass(frozen=True)
class BudgetCheck:
    e_margin: float
    p_margin: float
    ok: bool


def check_budget(selected, composed_error: float, composed_power: float,
                 budget: BudgetConstraints, stream_key=None) -> BudgetCheck:
    """Composed measurements against the sum of module norms: passes when
    both excesses stay strictly inside the declared slacks."""
    if stream_key is not None:
        for s in selected:
            if s.stream_key != stream_key:
                raise UnitMismatch(
                    f"spec {s.params.label()} was characterized under "
                    f"{s.stream_key}, composition used {stream_key}")
    e_margin = budget.delta_e - (composed_error - sum(s.e_norm for s in selected))
    p_margin = budget.delta_p - (composed_power - sum(s.p_norm for s in selected))
    return BudgetCheck(e_margin, p_margin, e_margin > 0 and p_margin > 0)


# ---------------------------------------------------------------------------
# insertion


@dataclass(frozen=True)
class AttackConfig:
    q: int = 4
    theta: float = 0.01
    scoap_ceiling: int = 50
    witness_budget: int = 10 ** 6
    payload: str = "leak"            # or "corrupt"
    secret_word: str | None = None   # required for leak
    stream: object = None            # the stream behind the activity report
    trace_vectors: int = 20_000      # realization trace length (same stream
                                     # family as the profile, extended)
    clock: float | None = None       # reject insertions beyond this period
    model: DelayModel | None = None
    instance_scores: dict | None = None
    require_disjoint: bool = True
    seed: int = 0


@dataclass(frozen=True)
class HTInstance:
    """Ground truth of one inserted Trojan (hidden from detection runs)."""

    trigger_nets: tuple      # ((net, required_value), ...)
    q: int
    payload_kind: str
    payload_word: str
    payload_bits: tuple      # replaced bit positions of payload_word
    witness: tuple           # sorted ((input word, value), ...)
    host_instances: tuple    # fresh tags carrying trigger/payload gates
    tap_instances: tuple     # tags whose nets the trigger taps (informative)
    trigger_net: int

    def witness_dict(self):
        return dict(self.witness)


def _and_tree(b, nets, tag):
    layer = list(nets)
    while len(layer) > 1:
        nxt = [b.gate(GateKind.AND, (layer[i], layer[i + 1]), tag=tag)
               for i in range(0, len(layer) - 1, 2)]
        if len(layer) % 2:
            nxt.append(layer[-1])
        layer = nxt
    return layer[0]


def _replace_output(b, old, new):
    # the new net takes over every output/word position of the old one;
    # gates that read the old net keep reading the pre-payload value
    b.outputs = [new if n == old else n for n in b.outputs]
    for w, bits in b.words.items():
        b.words[w] = [new if n == old else n for n in bits]


def _fires(nl, witness, taps):
    vals = eval_vector(nl, witness)
    return all(vals[n] == v for n, v in taps)


def insert_trojan(nl: Netlist, activity: ActivityReport,
                  testability: ScoapReport | None, config: AttackConfig):
    """Insert a rare-net-triggered combinational payload.

    Returns (infected netlist, :class:`HTInstance`).  Raises
    :class:`NoRareNets`, :class:`NoWitness` or :class:`WouldViolateTiming`;
    on any failure nothing is emitted.
    """
    if config.stream is None:
        raise BadParams("config.stream must carry the profiling stream")
    if testability is None:
        testability = scoap(nl)
    rare = rare_nets(activity, config.theta)
    if len(rare) < config.q:
        raise NoRareNets(f"{len(rare)} rare nets at theta={config.theta}, "
                         f"need {config.q}")
    ceiling = config.scoap_ceiling
    cand = [(n, v) for n, v in rare
            if testability.cc0[n] <= ceiling and testability.cc1[n] <= ceiling]

    # trace pass: realized cycles per candidate plus input values per cycle;
    # rarity is judged on the profile but realization may use a longer run
    # of the same stream family
    trace = config.stream
    if isinstance(trace, VectorStream) and config.trace_vectors > trace.n_vectors:
        trace = VectorStream(config.trace_vectors, trace.seed, trace.mode,
                             trace.rho)
    times: dict[tuple, list[int]] = {}
    vals_at: dict[int, dict] = {}
    in_words = nl.input_words()
    for start, tr in iter_traces(nl, trace):
        wv = {w: tr.word_values(bits) for w, bits in in_words}
        for c in cand:
            lst = times.setdefault(c, [])
            if len(lst) >= 64:
                continue
            hits = np.nonzero(tr.bits(c[0]) == c[1])[0]
            for t in hits[:64 - len(lst)]:
                t = start + int(t)
                lst.append(t)
                if t not in vals_at:
                    vals_at[t] = {w: int(wv[w][t - start]) for w, _ in in_words}
    cand = [c for c in cand if times[c]]
    if len(cand) < config.q:
        raise NoRareNets(
            f"{len(cand)} usable trigger candidates (testable and realized "
            f"in the trace), need {config.q}")

    sup = {c: frozenset(nl.input_word_support([c[0]])) for c in cand}
    p_rare = {(n, v): float(activity.p1[n]) if v else 1.0 - float(activity.p1[n])
              for n, v in cand}
    scores = config.instance_scores or {}

    def preference(c):
        g = nl.driver(c[0])
        s = scores.get(g.tag, 0.0) if g is not None else 0.0
        return (-s, p_rare[c], c[0])

    order = sorted(cand, key=preference)
    groups = []  # each: dict(words=frozenset, taps=[...], times=[...])
    for c in order:
        if sum(len(g["taps"]) for g in groups) == config.q:
            break
        if not sup[c]:
            continue
        hit = [g for g in groups if g["words"] & sup[c]]
        if not hit:
            groups.append({"words": sup[c], "taps": [c],
                           "times": sorted(times[c])})
            continue
        if config.require_disjoint:
            continue
        common = set(times[c])
        for g in hit:
            common &= set(g["times"])
        if not common:
            continue
        merged = {"words": sup[c].union(*(g["words"] for g in hit)),
                  "taps": [t for g in hit for t in g["taps"]] + [c],
                  "times": sorted(common)}
        groups = [g for g in groups if g not in hit] + [merged]
    taps = [t for g in groups for t in g["taps"]]
    if len(taps) < config.q:
        raise NoWitness(f"only {len(taps)} composable trigger taps of "
                        f"{config.q} requested")

    witness = _find_witness(nl, groups, taps, vals_at, config)

    # build the infected copy
    b = NetlistBuilder(nl)
    tap_tags = [nl.driver(n).tag for n, _ in taps if nl.driver(n) is not None]
    host = min(Counter(tap_tags).most_common(),
               key=lambda kv: (-kv[1], kv[0]))[0] if tap_tags else "u"
    k = 0
    while f"{host}.g{k}" in b.instances:
        k += 1
    fresh = f"{host}.g{k}"
    entry = nl.instances[host]
    b.instance(fresh, entry.kind_label, entry.op_type, entry.arch_id)
    lits = [n if v else b.gate(GateKind.NOT, (n,), tag=fresh)
            for n, v in taps]
    trig = _and_tree(b, lits, fresh)

    out_word = nl.output_words()[0][0]
    out_nets = list(nl.words[out_word])
    if config.payload == "leak":
        if not config.secret_word or config.secret_word not in nl.words:
            raise BadParams("leak payload needs an existing secret_word")
        secret = nl.words[config.secret_word]
        bits = tuple(range(min(len(secret), len(out_nets))))
        for i in bits:
            mux = b.gate(GateKind.MUX2, (trig, out_nets[i], secret[i]),
                         tag=fresh)
            _replace_output(b, out_nets[i], mux)
    elif config.payload == "corrupt":
        bits = (len(out_nets) - 1,)
        x = b.gate(GateKind.XOR, (out_nets[bits[0]], trig), tag=fresh)
        _replace_output(b, out_nets[bits[0]], x)
    else:
        raise BadParams(f"unknown payload {config.payload!r}")
    infected = b.build()

    if config.clock is not None:
        model = config.model or DelayModel()
        if critical_delay(infected, model) > config.clock:
            raise WouldViolateTiming(
                f"critical delay {critical_delay(infected, model):.3f} "
                f"exceeds clock {config.clock}")

    # fail-closed: the witness must fire the built trigger
    tvals = eval_vector(infected, witness)
    if tvals[trig] != 1:
        raise NoWitness("witness does not fire the assembled trigger")

    ht = HTInstance(tuple(taps), config.q, config.payload, out_word, bits,
                    tuple(sorted(witness.items())), (fresh,),
                    tuple(sorted(set(tap_tags))), trig)
    return infected, ht


def _find_witness(nl, groups, taps, vals_at, config):
    """Input word assignment that sets every tap to its rare value."""
    def compose(pick):
        wv = {}
        for g, t in zip(groups, pick):
            for w in g["words"]:
                wv[w] = vals_at[t][w]
        return wv

    # trace-composed assignments: earliest realized cycles first
    first = compose([g["times"][0] for g in groups])
    if _fires(nl, first, taps):
        return first
    tried = 1
    for g in groups:
        for t in g["times"][1:8]:
            w = compose([t if x is g else x["times"][0] for x in groups])
            tried += 1
            if _fires(nl, w, taps):
                return w

    # randomized packed search
    rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0x717)))
    in_words = nl.input_words()
    left = max(config.witness_budget - tried, 0)
    chunk = 1 << 14
    while left > 0:
        n = min(chunk, left)
        left -= n
        bits = {w: rng.integers(0, 2, size=(n, len(b)), dtype=np.uint8)
                for w, b in in_words}
        tr = simulate(nl, bits)
        fire = np.ones(n, bool)
        for net, val in taps:
            fire &= tr.bits(net) == val
        idx = np.nonzero(fire)[0]
        if idx.size:
            t = int(idx[0])
            return {w: int(tr.word_values(b)[t]) for w, b in in_words}

    # exhaustive for small input spaces
    total_bits = sum(len(b) for _, b in in_words)
    if total_bits <= 20:
        tr = simulate(nl, exhaustive_bits(nl))
        fire = np.ones(tr.n_vectors, bool)
        for net, val in taps:
            fire &= tr.bits(net) == val
        idx = np.nonzero(fire)[0]
        if idx.size:
            t = int(idx[0])
            return {w: int(tr.word_values(b)[t]) for w, b in in_words}
        raise NoWitness("trigger conjunction is unsatisfiable")
    raise NoWitness(f"no witness within {config.witness_budget} trials")


# ---------------------------------------------------------------------------
# stealth


@dataclass(frozen=True)
class StealthReport:
    error_delta: float
    power_delta_fraction: float
    trigger_rate: float
    min_slack: float | None = None


def _signature(nl):
    return ([(w, len(b)) for w, b in nl.input_words()],
            [(w, len(b)) for w, b in nl.output_words()])


def _mred_terms(nl, reference):
    ows = dict(nl.output_words())
    if callable(reference):
        name = next(iter(ows))
        return [(name, ows[name], reference)]
    return [(w, ows[w], fn) for w, fn in reference.items()]


def verify_stealth(clean: Netlist, infected: Netlist, ht: HTInstance,
                   reference, stream, clock: float | None = None,
                   model: DelayModel | None = None) -> StealthReport:
    """Differential stealth measurement of an insertion.

    ``reference`` is a callable on input word arrays (single output word) or
    a dict of per-output-word callables; error_delta is the infected-minus-
    clean difference of MRED against it.  trigger_rate counts cycles where
    every trigger literal holds.
    """
    if _signature(clean) != _signature(infected):
        raise SignatureMismatch("clean and infected netlists disagree on "
                                "primary I/O words")
    terms = _mred_terms(clean, reference)
    srel = {0: 0.0, 1: 0.0}
    fires = 0
    total = 0
    chunks = zip(iter_traces(clean, stream), iter_traces(infected, stream))
    for (_, tc), (_, ti) in chunks:
        for who, tr in ((0, tc), (1, ti)):
            wv = {w: tr.word_values(b) for w, b in tr.netlist.input_words()}
            for name, bits, fn in terms:
                got = tr.word_values(tr.netlist.words[name])
                exp = np.asarray(fn(wv), np.int64)
                d = np.abs(got - exp)
                srel[who] += float((d / np.maximum(exp, 1)).sum())
        fire = np.ones(ti.n_vectors, bool)
        for net, val in ht.trigger_nets:
            fire &= ti.bits(net) == val
        fires += int(fire.sum())
        total += ti.n_vectors
    denom = total * len(terms)
    error_delta = srel[1] / denom - srel[0] / denom
    p_clean = power_proxy(clean, activity_profile(clean, stream))
    p_inf = power_proxy(infected, activity_profile(infected, stream), p_clean)
    min_slack = None
    if clock is not None:
        s = slacks(infected, model or DelayModel(), clock)
        min_slack = float(np.min(s[np.isfinite(s)]))
    return StealthReport(error_delta, p_inf.ratio - 1.0, fires / total,
                         min_slack)
