"""Command-line front end: seeded experiments with machine-readable output.

Every emitted file carries a header block (tool version, configuration
echo, seed), and identical configurations produce byte-identical output.
Exit codes: 0 on success, 1 when a check or verification suite fails,
2 on usage or validation errors.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
from fractions import Fraction

import numpy as np

from . import __version__, graphstate, growth, optics, qcore, rusgate

CSV_COLUMNS = [
    "p_s", "p_i", "p_f", "L0", "N0", "N0_float", "slope", "slope_float",
    "intercept", "intercept_float", "M", "M_float", "N_bond", "N_bond_float",
    "source", "trials", "quantity", "mean", "stderr", "counters", "flags",
]


class ValidationError(Exception):
    pass


def _frac_cell(x) -> tuple[str, str]:
    if x is None or x == "":
        return "", ""
    f = Fraction(x)
    return f"{f.numerator}/{f.denominator}", repr(float(f))


def _parse_probs(cfg) -> growth.GateProbabilities:
    try:
        return growth.GateProbabilities(
            Fraction(str(cfg["ps"])), Fraction(str(cfg["pi"])), Fraction(str(cfg["pf"])))
    except (ValueError, ZeroDivisionError, TypeError) as exc:
        raise ValidationError(f"invalid probabilities: {exc}") from None


_NON_EXPERIMENT_KEYS = ("out", "config", "func")


def _config_echo(cfg: dict) -> dict:
    return {k: v for k, v in sorted(cfg.items())
            if v is not None and k not in _NON_EXPERIMENT_KEYS}


def _header_lines(cfg: dict) -> list[str]:
    echo = json.dumps(_config_echo(cfg), separators=(",", ":"), default=str)
    return [f"# rusim {__version__}",
            f"# config: {echo}",
            f"# seed: {cfg.get('seed')}"]


def _emit(cfg: dict, rows: list[dict], out_stream, columns=None):
    """Write rows as CSV (with # header lines) or as a JSON document."""
    columns = columns or CSV_COLUMNS
    if cfg.get("format", "csv") == "json":
        doc = {
            "meta": {"tool": "rusim", "version": __version__,
                     "seed": cfg.get("seed"),
                     "config": _config_echo(cfg)},
            "rows": rows,
        }
        out_stream.write(json.dumps(doc, indent=2, sort_keys=True, default=str))
        out_stream.write("\n")
    else:
        lines = _header_lines(cfg)
        lines.append(",".join(columns))
        for row in rows:
            lines.append(",".join(str(row.get(c, "")) for c in columns))
        out_stream.write("\n".join(lines) + "\n")


def _report_row(report: growth.CostReport, **extra) -> dict:
    row = {
        "p_s": str(report.probs.ps), "p_i": str(report.probs.pi),
        "p_f": str(report.probs.pf), "L0": report.L0,
        "source": "analytic", "trials": "", "quantity": "", "mean": "",
        "stderr": "", "counters": "", "flags": "",
    }
    for name, value in (("N0", report.N0), ("slope", report.slope),
                        ("intercept", report.intercept), ("M", report.M),
                        ("N_bond", report.N_bond)):
        row[name], row[f"{name}_float"] = _frac_cell(value)
    row.update(extra)
    return row


def _stat_rows(probs: growth.GateProbabilities, stats: growth.SimStats,
               L0="") -> list[dict]:
    rows = []
    counters = ";".join(f"{k}={v}" for k, v in sorted(stats.counters.items()))
    for name in sorted(stats.quantities):
        s = stats.quantities[name]
        rows.append({
            "p_s": str(probs.ps), "p_i": str(probs.pi), "p_f": str(probs.pf),
            "L0": L0, "source": "mc", "trials": stats.trials,
            "quantity": name, "mean": repr(s.mean), "stderr": repr(s.stderr),
            "counters": counters, "flags": "",
        })
    return rows


# ---------------------------------------------------------------------------
# mub-check

def _correction_dict(corr: rusgate.Correction) -> dict:
    return {
        "global_phase": f"{corr.global_phase.real:+.12f}{corr.global_phase.imag:+.12f}j",
        "phi1": round(corr.phi1, 12),
        "phi2": round(corr.phi2, 12),
        "apply_cz": corr.apply_cz,
    }


def cmd_mub_check(cfg: dict, out) -> int:
    angles = rusgate.AngleSet(
        float(cfg["theta1"]), float(cfg["theta2"]), float(cfg["vartheta1"]),
        float(cfg["vartheta2"]), float(cfg["xi1"]), float(cfg["xi2"]))
    pb = rusgate.photon_basis_from_angles(angles)
    make = rusgate.rus_pair_basis if cfg["basis"] == "rus" else rusgate.bell_pair_basis
    basis = make(pb)
    closed_form = rusgate.mub_constraint_holds(angles)
    direct = rusgate.is_mutually_unbiased(basis)
    states = []
    for k, st in enumerate(basis.states, start=1):
        entry = {
            "state": k,
            "branch": str(basis.branch[k - 1]),
            "amplitudes": [f"{a.real:+.12f}{a.imag:+.12f}j" for a in st.amps],
            "concurrence": round(qcore.concurrence(st), 12),
        }
        if basis.corrections is not None:
            entry["correction"] = _correction_dict(basis.corrections[k - 1])
        states.append(entry)
    ok = closed_form and direct and (closed_form == direct)
    doc = {
        "meta": {"tool": "rusim", "version": __version__,
                 "config": _config_echo(cfg)},
        "angles": dict(zip(
            ("theta1", "theta2", "vartheta1", "vartheta2", "xi1", "xi2"),
            angles.as_tuple())),
        "constraint_holds": closed_form,
        "directly_unbiased": direct,
        "verdicts_agree": closed_form == direct,
        "states": states,
        "passed": ok,
    }
    if cfg.get("format") == "json":
        out.write(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")
    else:
        out.write("\n".join(_header_lines(cfg)) + "\n")
        out.write(f"closed-form constraint: {'holds' if closed_form else 'violated'}\n")
        out.write(f"direct amplitude check: {'unbiased' if direct else 'biased'}\n")
        for entry in states:
            out.write(f"state {entry['state']} [{entry['branch']}] "
                      f"concurrence={entry['concurrence']}\n")
            out.write("  amplitudes: " + " ".join(entry["amplitudes"]) + "\n")
            if "correction" in entry:
                c = entry["correction"]
                out.write(f"  correction: phase={c['global_phase']} "
                          f"phi1={c['phi1']} phi2={c['phi2']} cz={c['apply_cz']}\n")
        out.write(f"result: {'PASS' if ok else 'FAIL'}\n")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# gate

def _apparatus_kernel(apparatus: str):
    """Precomputed map occupation -> per-source-basis amplitude for one photon pair."""
    kets = [qcore.basis_state((2, 2), (i, j), rusgate.PHOTON_LABELS)
            for i in range(2) for j in range(2)]
    kernel: dict[tuple[int, ...], np.ndarray] = {}
    for idx, ket in enumerate(kets):
        if apparatus == "multiport":
            fock = optics.scatter(optics.dualrail_input(ket), optics.dft4())
        else:
            fock = optics.beamsplitter_apparatus(ket)
        for occ, amp in fock.terms.items():
            kernel.setdefault(occ, np.zeros(4, dtype=np.complex128))[idx] = amp
    occs = sorted(kernel)
    stack = np.stack([kernel[o] for o in occs])
    return occs, stack


def run_gate_trials(trials: int, apparatus: str, eta: float, seed,
                    max_rounds: int = 64, resolving: bool = True) -> dict:
    """Run full gate loops on random inputs; per-attempt and per-trial stats."""
    rng = np.random.default_rng(seed)
    loss = optics.LossModel(eta)
    basis = rusgate.rus_pair_basis(
        rusgate.photon_basis_from_angles(rusgate.AngleSet.reference()))
    classify = (optics.classify_multiport if apparatus == "multiport"
                else optics.classify_bs)
    kernel = _apparatus_kernel(apparatus) if apparatus != "ideal" else None
    att_counts = {"success": 0, "insurance": 0, "failure": 0}
    trial_counts = {"success": 0, "failure": 0, "timeout": 0}
    rounds_success: list[int] = []
    fidelities: list[float] = []
    for _ in range(trials):
        src = qcore.random_state((2, 2), rng)
        target = rusgate.reference_gate_output(src)
        current = src
        done = False
        for rounds in range(1, max_rounds + 1):
            if apparatus == "ideal":
                if eta < 1.0 and rng.random() > eta * eta:
                    att_counts["failure"] += 1
                    trial_counts["failure"] += 1
                    done = True
                    break
                rec = rusgate.measure_pair(rusgate.encode(current), basis, rng)
                outcome_index, post = rec.outcome_index, rec.post_state
            else:
                occs, stack = kernel
                c = current.amps
                vecs = stack * c[np.newaxis, :]
                probs = np.einsum("oi,oi->o", vecs, vecs.conj()).real
                o = int(np.searchsorted(np.cumsum(probs), rng.random() * probs.sum()))
                o = min(o, len(occs) - 1)
                occ = occs[o]
                counts = tuple(int(rng.binomial(n, loss.eta)) if n else 0
                               for n in occ)
                if not resolving:
                    counts = tuple(min(1, cnt) for cnt in counts)
                outcome = classify(optics.DetectionPattern(counts, resolving))
                if outcome is optics.Outcome.FAILURE:
                    att_counts["failure"] += 1
                    trial_counts["failure"] += 1
                    done = True
                    break
                outcome_index = outcome.value
                post = qcore.pure((2, 2), vecs[o] / np.linalg.norm(vecs[o]),
                                  rusgate.SOURCE_LABELS)
            corr = basis.correction_for(outcome_index)
            corrected = corr.undo_local(post)
            if basis.branch[outcome_index - 1] is rusgate.Branch.SUCCESS:
                att_counts["success"] += 1
                trial_counts["success"] += 1
                rounds_success.append(rounds)
                fidelities.append(abs(target.overlap(corrected)) ** 2)
                done = True
                break
            att_counts["insurance"] += 1
            current = corrected
        if not done:
            trial_counts["timeout"] += 1
    attempts = sum(att_counts.values())
    return {
        "attempts": attempts,
        "attempt_fractions": {k: v / attempts for k, v in att_counts.items()},
        "trials": trial_counts,
        "mean_rounds_success": (float(np.mean(rounds_success))
                                if rounds_success else float("nan")),
        "mean_fidelity": (float(np.mean(fidelities)) if fidelities else float("nan")),
        "min_fidelity": (float(np.min(fidelities)) if fidelities else float("nan")),
    }


def cmd_gate(cfg: dict, out) -> int:
    stats = run_gate_trials(int(cfg["trials"]), cfg["apparatus"],
                            float(cfg["eta"]), int(cfg["seed"]),
                            int(cfg["max_rounds"]),
                            resolving=not cfg.get("threshold", False))
    rows = []
    base = {"p_s": "", "p_i": "", "p_f": "", "L0": "", "source": "mc",
            "trials": cfg["trials"], "counters": "", "flags": ""}
    for branch, frac in sorted(stats["attempt_fractions"].items()):
        rows.append({**base, "quantity": f"attempt_{branch}_fraction",
                     "mean": repr(frac), "stderr": ""})
    for name in ("mean_rounds_success", "mean_fidelity", "min_fidelity"):
        rows.append({**base, "quantity": name, "mean": repr(stats[name]),
                     "stderr": ""})
    counters = ";".join(f"{k}={v}" for k, v in sorted(stats["trials"].items()))
    rows.append({**base, "quantity": "trial_outcomes", "mean": "",
                 "stderr": "", "counters": counters})
    _emit(cfg, rows, out)
    return 0


# ---------------------------------------------------------------------------
# multiport-map

def cmd_multiport_map(cfg: dict, out) -> int:
    u = optics.dft4()
    basis = rusgate.rus_pair_basis(
        rusgate.photon_basis_from_angles(rusgate.AngleSet.reference()))
    mapping = []
    for k, st in enumerate(basis.states, start=1):
        fock = optics.scatter(optics.dualrail_input(st), u)
        terms = {str(occ): f"{a.real:+.12f}{a.imag:+.12f}j"
                 for occ, a in sorted(fock.terms.items())}
        mapping.append({"state": k, "branch": str(basis.branch[k - 1]),
                        "modes": terms})
    patterns = {str(pair): str(outcome)
                for pair, outcome in sorted(optics._MULTIPORT_PAIRS.items())}
    doc = {
        "meta": {"tool": "rusim", "version": __version__},
        "unitary": [[f"{u.matrix[m, n].real:+.6f}{u.matrix[m, n].imag:+.6f}j"
                     for n in range(4)] for m in range(4)],
        "basis_to_modes": mapping,
        "pattern_outcomes": patterns,
    }
    if cfg.get("format") == "json":
        out.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    else:
        out.write("\n".join(_header_lines(cfg)) + "\n")
        out.write("mode unitary (rows = outputs):\n")
        for row in doc["unitary"]:
            out.write("  " + " ".join(row) + "\n")
        for entry in mapping:
            out.write(f"state {entry['state']} [{entry['branch']}]:\n")
            for occ, amp in entry["modes"].items():
                out.write(f"  {occ}: {amp}\n")
        out.write("pattern -> outcome:\n")
        for pair, name in patterns.items():
            out.write(f"  ports {pair}: {name}\n")
    return 0


# ---------------------------------------------------------------------------
# cost / table1 / grow / bond

def cmd_cost(cfg: dict, out) -> int:
    probs = _parse_probs(cfg)
    L0 = int(cfg["L0"]) if cfg.get("L0") else growth.min_L0(probs)
    try:
        report = growth.CostReport.evaluate(probs, L0)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    rows = [_report_row(report)]
    if cfg.get("L"):
        n_at = growth.cost_at(probs, L0, Fraction(str(cfg["L"])))
        frac, flt = _frac_cell(n_at)
        rows.append({**rows[0], "quantity": f"N({cfg['L']})",
                     "mean": flt, "flags": f"N_at_L={frac}"})
    _emit(cfg, rows, out)
    return 0


def cmd_table1(cfg: dict, out) -> int:
    rows = []
    for row in growth.table1_report():
        flags = ""
        if row.mismatches:
            printed = ";".join(
                f"printed_{k}={row.printed[k]}" for k in row.mismatches)
            flags = f"discrepancy:{'+'.join(row.mismatches)};{printed}"
        rows.append(_report_row(row.report, flags=flags))
    _emit(cfg, rows, out)
    return 0


def cmd_grow(cfg: dict, out) -> int:
    probs = _parse_probs(cfg)
    L0 = int(cfg["L0"]) if cfg.get("L0") else growth.min_L0(probs)
    target = int(cfg["L"]) if cfg.get("L") else 8 * L0
    report = growth.CostReport.evaluate(probs, L0)
    stats = growth.mc_chain_growth(probs, L0, target, int(cfg["trials"]),
                                   int(cfg["seed"]), threads=cfg.get("threads"))
    rows = [_report_row(report)] + _stat_rows(probs, stats, L0=L0)
    _emit(cfg, rows, out)
    return 0


def cmd_bond(cfg: dict, out) -> int:
    probs = _parse_probs(cfg)
    L0 = int(cfg["L0"]) if cfg.get("L0") else growth.min_L0(probs)
    report = growth.CostReport.evaluate(probs, L0)
    stats = growth.mc_bond(probs, int(cfg["trials"]), int(cfg["seed"]),
                           threads=cfg.get("threads"))
    rows = [_report_row(report)] + _stat_rows(probs, stats, L0=L0)
    _emit(cfg, rows, out)
    if cfg.get("emit_graph"):
        rng = np.random.default_rng(int(cfg["seed"]))
        ga = graphstate.new_plus_chain(8, start=1)
        gb = graphstate.new_plus_chain(8, start=9)
        g, _ = graphstate.fig4_vertical_bond(ga, gb, 1, 9, probs, rng)
        with open(cfg["emit_graph"], "w") as fh:
            fh.write(graphstate.serialize(g))
    return 0


# ---------------------------------------------------------------------------
# oracle-verify

def _verify_graph_rules(max_chain: int, n_random: int, seed, fault: bool) -> tuple[int, int]:
    rng = np.random.default_rng(seed)
    checked = failed = 0

    def oracle_check(g, measured, v, pauli, outcome):
        nonlocal checked, failed
        verts = g.vertices()
        state = graphstate.to_statevector(g)
        res = qcore.project(state, [verts.index(v)],
                            qcore.pauli_eigenstate(pauli, outcome))
        if res.post_state is None:
            return
        got = graphstate.to_statevector(measured)
        ref = res.post_state
        if fault and checked == 0:
            ref = qcore.apply(qcore.PAULI_Z, ref, [0])
        checked += 1
        if not qcore.equal_up_to_global_phase(got, ref, 1e-9):
            failed += 1

    for n in range(2, max_chain + 1):
        g = graphstate.new_plus_chain(n)
        for v in g.vertices():
            for outcome in (1, -1):
                oracle_check(g, graphstate.measure_z(g, v, outcome), v, "Z", outcome)
                oracle_check(g, graphstate.measure_y(g, v, outcome), v, "Y", outcome)
                for sp in sorted(g.neighbors(v)):
                    oracle_check(g, graphstate.measure_x(g, v, sp, outcome),
                                 v, "X", outcome)
    import itertools
    pool = [qcore.PAULI_I, qcore.PAULI_X, qcore.PAULI_Z, qcore.S_GATE,
            qcore.HADAMARD, graphstate.SQRT_IY]
    for _ in range(n_random):
        n = int(rng.integers(2, 8))
        verts = list(range(1, n + 1))
        edges = [e for e in itertools.combinations(verts, 2) if rng.random() < 0.4]
        frames = {v: pool[int(rng.integers(len(pool)))]
                  for v in verts if rng.random() < 0.5}
        g = graphstate.GraphState.from_edges(verts, edges, frames)
        v = verts[int(rng.integers(n))]
        pauli = "XYZ"[int(rng.integers(3))]
        outcome = 1 if rng.random() < 0.5 else -1
        try:
            if pauli == "Z":
                measured = graphstate.measure_z(g, v, outcome)
            elif pauli == "Y":
                measured = graphstate.measure_y(g, v, outcome)
            else:
                measured = graphstate.measure_x(g, v, None, outcome)
        except qcore.ImpossibleOutcomeError:
            continue
        oracle_check(g, measured, v, pauli, outcome)
    return checked, failed


def _verify_fig4(seed) -> tuple[int, int]:
    rng = np.random.default_rng(seed)
    ga = graphstate.new_plus_chain(4, start=1)
    gb = graphstate.new_plus_chain(4, start=11)
    merged, cost = graphstate.fig4_vertical_bond(ga, gb, 1, 11, (1.0, 0.0, 0.0), rng)
    state = graphstate.to_statevector(graphstate.merge(ga, gb))
    verts = [1, 2, 3, 4, 11, 12, 13, 14]

    def project(state, verts, v, pauli):
        res = qcore.project(state, [verts.index(v)], qcore.pauli_eigenstate(pauli, 1))
        return res.require_state(), [w for w in verts if w != v]

    state, verts = project(state, verts, 2, "X")
    state, verts = project(state, verts, 12, "X")
    state = qcore.apply(qcore.HADAMARD, state, [verts.index(3)])
    state = qcore.apply(qcore.HADAMARD, state, [verts.index(13)])
    state = qcore.apply(qcore.cz_matrix(), state, [verts.index(3), verts.index(13)])
    state, verts = project(state, verts, 13, "X")
    state, verts = project(state, verts, 3, "X")
    ok = (qcore.equal_up_to_global_phase(
        graphstate.to_statevector(merged), state, 1e-9)
        and cost.consumed_per_chain == 3)
    return 1, 0 if ok else 1


def _verify_optics(n_inputs: int, seed) -> tuple[int, int]:
    rng = np.random.default_rng(seed)
    basis = rusgate.rus_pair_basis(
        rusgate.photon_basis_from_angles(rusgate.AngleSet.reference()))
    checked = failed = 0
    for _ in range(n_inputs):
        src = qcore.random_state((2, 2), rng)
        enc = rusgate.encode(src)
        reference = {}
        for k, st in enumerate(basis.states, start=1):
            reference[k] = qcore.project(enc, [2, 3], st).require_state()
        for conds, classify in (
            (optics.multiport_conditionals(enc), optics.classify_multiport),
            (optics.bs_conditionals(enc), optics.classify_bs),
        ):
            for occ, vec in conds.items():
                pattern = optics.DetectionPattern(occ, resolving=True)
                outcome = classify(pattern)
                post = qcore.pure((2, 2), vec.reshape(-1) / np.linalg.norm(vec))
                checked += 1
                if not qcore.equal_up_to_global_phase(
                        post, reference[outcome.value], 1e-9):
                    failed += 1
    return checked, failed


def cmd_oracle_verify(cfg: dict, out) -> int:
    seed = int(cfg["seed"])
    fault = bool(cfg.get("inject_fault"))
    suites = []
    checked, failed = _verify_graph_rules(int(cfg["max_n"]), 50, seed, fault)
    suites.append(("graph-rules-vs-statevector", checked, failed))
    checked, failed = _verify_fig4(seed)
    suites.append(("vertical-bond-vs-statevector", checked, failed))
    checked, failed = _verify_optics(20, seed)
    suites.append(("apparatus-vs-projection", checked, failed))
    any_failed = False
    lines = _header_lines(cfg)
    for name, checked, failed in suites:
        status = "PASS" if failed == 0 else "FAIL"
        any_failed |= failed > 0
        lines.append(f"{name}: {status} ({checked - failed}/{checked} checks)")
    lines.append("result: " + ("FAIL" if any_failed else "PASS"))
    out.write("\n".join(lines) + "\n")
    return 1 if any_failed else 0


# ---------------------------------------------------------------------------
# parser plumbing

_DEFAULTS = {
    "mub-check": {"theta1": np.pi / 4, "theta2": np.pi / 4, "vartheta1": 0.0,
                  "vartheta2": 0.0, "xi1": 0.0, "xi2": -np.pi / 2,
                  "basis": "rus", "format": "text"},
    "gate": {"trials": 2000, "apparatus": "ideal", "eta": 1.0, "seed": 1,
             "max_rounds": 64, "threshold": False, "format": "csv"},
    "multiport-map": {"format": "text"},
    "cost": {"format": "csv"},
    "table1": {"format": "csv"},
    "grow": {"trials": 10000, "seed": 1, "format": "csv"},
    "bond": {"trials": 10000, "seed": 1, "format": "csv"},
    "oracle-verify": {"max_n": 5, "seed": 1, "format": "text"},
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rusim",
        description="Repeat-until-success gate and cluster-growth simulator")
    parser.add_argument("--version", action="version", version=f"rusim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON file with defaults (flags win)")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=["csv", "json", "text"])
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)

    p = sub.add_parser("mub-check", help="validate a measurement-basis angle set")
    for name in ("theta1", "theta2", "vartheta1", "vartheta2", "xi1", "xi2"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--basis", choices=["rus", "bell"])
    add_common(p)

    p = sub.add_parser("gate", help="run full gate loops and report statistics")
    p.add_argument("--trials", type=int)
    p.add_argument("--apparatus", choices=["ideal", "multiport", "beamsplitter"])
    p.add_argument("--eta", type=float)
    p.add_argument("--max-rounds", dest="max_rounds", type=int)
    p.add_argument("--threshold", action="store_const", const=True,
                   help="use non-number-resolving detectors")
    add_common(p)

    p = sub.add_parser("multiport-map", help="print the multiport mode mapping")
    add_common(p)

    for name, helptext in (("cost", "analytic overhead for one parameter set"),
                           ("grow", "Monte Carlo chain growth vs analytic"),
                           ("bond", "Monte Carlo vertical bond vs analytic")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--ps")
        p.add_argument("--pi")
        p.add_argument("--pf")
        p.add_argument("--L0", type=int)
        p.add_argument("--L", type=int)
        if name != "cost":
            p.add_argument("--trials", type=int)
        if name == "bond":
            p.add_argument("--emit-graph", dest="emit_graph")
        add_common(p)

    p = sub.add_parser("table1", help="published parameter rows, recomputed")
    add_common(p)

    p = sub.add_parser("oracle-verify", help="run the cross-verification suites")
    p.add_argument("--max-n", dest="max_n", type=int)
    p.add_argument("--inject-fault", dest="inject_fault", action="store_const",
                   const=True, help="deliberately corrupt one check (self-test)")
    add_common(p)
    return parser


_HANDLERS = {
    "mub-check": cmd_mub_check,
    "gate": cmd_gate,
    "multiport-map": cmd_multiport_map,
    "cost": cmd_cost,
    "table1": cmd_table1,
    "grow": cmd_grow,
    "bond": cmd_bond,
    "oracle-verify": cmd_oracle_verify,
}


def merge_config(args: argparse.Namespace) -> dict:
    cfg = dict(_DEFAULTS[args.command])
    path = getattr(args, "config", None)
    if path:
        with open(path) as fh:
            file_cfg = json.load(fh)
        if not isinstance(file_cfg, dict):
            raise ValidationError("--config must contain a JSON object")
        cfg.update(file_cfg)
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        cfg[key] = value
    cfg["command"] = args.command
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = merge_config(args)
        required = {"cost": ("ps", "pi", "pf"), "grow": ("ps", "pi", "pf"),
                    "bond": ("ps", "pi", "pf")}
        for key in required.get(args.command, ()):
            if cfg.get(key) is None:
                raise ValidationError(f"--{key} is required for {args.command}")
        buf = io.StringIO()
        code = _HANDLERS[args.command](cfg, buf)
        if cfg.get("out"):
            with open(cfg["out"], "w") as fh:
                fh.write(buf.getvalue())
        else:
            sys.stdout.write(buf.getvalue())
        return code
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
