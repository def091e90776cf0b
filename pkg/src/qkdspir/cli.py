"""Command-line front end: ``run``, ``analyze`` and ``plan``.

Exit codes: 0 success, 1 usage error, 2 data error. Every artifact embeds the
seed, a config digest and the tool version, and is byte-for-byte reproducible.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from typing import Dict, List, Optional, Sequence

from . import __version__, analyzer, b2, planner, xorpir
from .bits import as_bits, encode_hex
from .orchestrator import (
    B2,
    LINKS,
    XOR,
    AdversarySpec,
    RunConfig,
    TranscriptError,
    fixed_inputs,
    random_inputs,
    read_transcript,
    run_batch,
    write_transcript,
)
from .qkd import QkdModelParams

TOOL = "qkdspir"
EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
MODES = ("correctness", "user-privacy", "db-privacy", "secrecy", "bounds")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- config -------------------------------------------------------------------

_RUN_KEYS = {"protocol", "size", "entry_bits", "links", "inputs", "adversary", "seed", "trials"}
_LINK_FIELDS = {"p_abort", "p_mismatch", "p_leak"}


def load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise DataError(f"config: cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"config: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise DataError("config: top level must be an object")
    return obj


def _link_params(raw: dict) -> Dict[str, QkdModelParams]:
    """``links`` may hold a ``default`` entry plus per-link overrides."""
    if not isinstance(raw, dict):
        raise DataError("config field 'links' must be an object")
    unknown = set(raw) - set(LINKS) - {"default"}
    if unknown:
        raise DataError(f"config field 'links.{sorted(unknown)[0]}' is not a link; use {LINKS} or default")
    out = {}
    for link in LINKS:
        merged = dict(raw.get("default", {}))
        merged.update(raw.get(link, {}))
        bad = set(merged) - _LINK_FIELDS
        if bad:
            raise DataError(f"config field 'links.{link}.{sorted(bad)[0]}' is unknown")
        try:
            out[link] = QkdModelParams(**{k: float(v) for k, v in merged.items()})
        except (TypeError, ValueError) as exc:
            raise DataError(f"config field 'links.{link}': {exc}") from exc
    return out


def _adversary(raw: Optional[dict]) -> AdversarySpec:
    if not raw or raw.get("role", "none") == "none":
        return AdversarySpec()
    if raw.get("role") != "user":
        raise DataError("config field 'adversary.role' must be none or user (dishonest data centres are library-only)")
    qs = raw.get("queries")
    if not isinstance(qs, list) or len(qs) != 2:
        raise DataError("config field 'adversary.queries' must be a list of two bit strings")
    try:
        pair = tuple(as_bits(q) for q in qs)
    except (TypeError, ValueError) as exc:
        raise DataError(f"config field 'adversary.queries': {exc}") from exc
    return AdversarySpec.user(queries=pair)


def build_run_config(raw: dict, seed: Optional[int]) -> RunConfig:
    unknown = set(raw) - _RUN_KEYS
    if unknown:
        raise DataError(f"config field '{sorted(unknown)[0]}' is unknown")
    protocol = raw.get("protocol", B2)
    try:
        size = int(raw.get("size", 2))
        entry_bits = int(raw.get("entry_bits", 1))
    except (TypeError, ValueError) as exc:
        raise DataError(f"config field 'size'/'entry_bits' must be integers: {exc}") from exc
    cfg = RunConfig(
        protocol=protocol,
        size=size,
        entry_bits=entry_bits,
        links=_link_params(raw.get("links", {})),
        adversary=_adversary(raw.get("adversary")),
        seed=int(seed if seed is not None else raw.get("seed", 0)),
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise DataError(f"config: {exc}") from exc
    return cfg


def _inputs(raw: dict, cfg: RunConfig):
    """Returns (generator, description) for the ``inputs`` block."""
    spec = raw.get("inputs", {"mode": "random"})
    mode = spec.get("mode", "random")
    if mode == "random":
        return random_inputs(cfg), {"mode": "random"}
    if mode != "fixed":
        raise DataError(f"config field 'inputs.mode' must be random or fixed, got {mode!r}")
    try:
        w = as_bits(spec["w"]).reshape(cfg.n, cfg.entry_bits)
    except KeyError as exc:
        raise DataError("config field 'inputs.w' is required for fixed inputs") from exc
    except (TypeError, ValueError) as exc:
        raise DataError(f"config field 'inputs.w': need {cfg.n * cfg.entry_bits} bits ({exc})") from exc
    x_raw = spec.get("x")
    try:
        if cfg.protocol == B2:
            x = b2.CubeIndex(*(int(c) for c in x_raw))
            x.validate(cfg.size)
            desc_x = list(x.coords())
        else:
            x = as_bits(x_raw, cfg.n) if isinstance(x_raw, str) else xorpir.selector(cfg.n, int(x_raw))
            desc_x = encode_hex(x)
    except (TypeError, ValueError) as exc:
        raise DataError(f"config field 'inputs.x': {exc}") from exc
    return fixed_inputs(w, x), {"mode": "fixed", "w": encode_hex(w), "x": desc_x}


# -- output -------------------------------------------------------------------


def _emit(text: str, out: Optional[str]) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()[:16]


# -- run ------------------------------------------------------------------------


def cmd_run(args) -> int:
    raw = load_json(args.config) if args.config else {}
    if args.protocol:
        raw["protocol"] = args.protocol
    cfg = build_run_config(raw, args.seed)
    trials = args.trials if args.trials is not None else raw.get("trials", 1)
    if not isinstance(trials, int) or trials < 1:
        raise DataError("config field 'trials' must be a positive integer")
    inputs, inputs_desc = _inputs(raw, cfg)
    try:
        records = run_batch(cfg, trials, inputs, seed=cfg.seed)
    except ValueError as exc:
        raise DataError(f"config field 'adversary.queries': {exc}") from exc
    header = {
        "tool": TOOL,
        "version": __version__,
        "seed": cfg.seed,
        "config_digest": cfg.digest(),
        "config": cfg.describe(),
        "inputs": inputs_desc,
        "trials": trials,
    }
    if args.out is None or args.out == "-":
        write_transcript(sys.stdout, records, header)
    else:
        write_transcript(args.out, records, header)
    return EXIT_OK


# -- analyze ----------------------------------------------------------------


def _load(path: str):
    try:
        return read_transcript(path)
    except OSError as exc:
        raise DataError(f"transcript: cannot read {path}: {exc.strerror}") from exc
    except TranscriptError as exc:
        raise DataError(f"transcript {path}: {exc}") from exc


def _params_from_header(header: dict) -> Dict[str, QkdModelParams]:
    links = header.get("config", {}).get("links")
    if links is None:
        return {k: QkdModelParams() for k in LINKS}
    return _link_params(links)


def _input_key(rec, with_w: bool):
    x = tuple(rec.x.coords()) if rec.protocol == B2 else encode_hex(rec.x)
    return (x, encode_hex(rec.w)) if with_w else x


def _grouped_advantage(records, party: str, bound: float, group_by_w: bool) -> dict:
    """Compare the feature distribution of each input group with the largest group."""
    if not group_by_w:
        ws = {encode_hex(r.w) for r in records}
        if len(ws) != 1:
            return {"applicable": False, "reason": "needs a fixed database across runs (or --paired)", "pass": None}
    groups: Dict[object, list] = {}
    for r in records:
        groups.setdefault(_input_key(r, group_by_w), []).append(r)
    if len(groups) < 2:
        return {"applicable": False, "reason": "needs at least two distinct inputs (or --paired)", "pass": None}
    ordered = sorted(groups.values(), key=len, reverse=True)
    base = ordered[0]
    worst, smallest = 0.0, len(base)
    for other in ordered[1:]:
        worst = max(worst, analyzer.empirical_advantage(base, other, party))
        smallest = min(smallest, len(other))
    margin = analyzer.hoeffding_margin(smallest)
    verdict = analyzer._verdict(worst, bound, margin)
    return {"applicable": True, "groups": len(groups), "smallest_group": smallest, **verdict}


def _paired_advantage(a, b, party: str, bound: float) -> dict:
    n = min(len(a), len(b))
    adv = analyzer.empirical_advantage(a[:n], b[:n], party)
    return {"applicable": True, "paired_runs": n, **analyzer._verdict(adv, bound, analyzer.hoeffding_margin(n))}


def _db_privacy_exact(records) -> dict:
    """Check the query pair each data centre actually received."""
    cache: Dict[tuple, bool] = {}
    checked = noncompliant = 0
    first_bad = None
    for rec in records:
        if rec.q1_tilde is None or rec.q2_tilde is None:
            continue
        key = (rec.protocol, rec.size, encode_hex(rec.q1_tilde), encode_hex(rec.q2_tilde))
        if key not in cache:
            if rec.protocol == B2:
                rep = analyzer.db_privacy_check(
                    b2.B2Query.from_bits(rec.q1_tilde, rec.size), b2.B2Query.from_bits(rec.q2_tilde, rec.size),
                    rec.size)
            else:
                rep = analyzer.xor_privacy_check(rec.q1_tilde, rec.q2_tilde)
            cache[key] = rep.compliant
        checked += 1
        if not cache[key]:
            noncompliant += 1
            if first_bad is None:
                first_bad = rec.trial
    return {"records_checked": checked, "distinct_query_pairs": len(cache), "noncompliant": noncompliant,
            "first_noncompliant_trial": first_bad, "pass": noncompliant == 0}


def analyze_records(header: dict, records, mode: str, paired=None) -> dict:
    if not records:
        raise DataError("transcript: contains no run records")
    params = _params_from_header(header)
    eps_cor = max(p.eps_cor for p in params.values())
    eps = max(p.eps for p in params.values())
    targets = analyzer.security_targets(eps_cor, eps)
    report = {
        "tool": TOOL,
        "version": __version__,
        "seed": header.get("seed"),
        "config_digest": header.get("config_digest"),
        "mode": mode,
        "runs": len(records),
        "targets": targets,
    }
    if mode == "bounds":
        report["bounds"] = analyzer.check_theorem_bounds(records, params, paired=paired)
        report["pass"] = report["bounds"]["pass"]
        return report
    if mode == "correctness":
        n = len(records)
        failures = sum(1 for r in records if r.correct() is False)
        aborted = sum(1 for r in records if r.aborted)
        verdict = analyzer._verdict(failures / n, targets["correctness"], analyzer.hoeffding_margin(n))
        report["checks"] = {"correctness": {"failures": failures, "aborted": aborted,
                                            "failure_rate": failures / n, **verdict}}
    elif mode == "db-privacy":
        checks = {"exact_query_pairs": _db_privacy_exact(records)}
        if paired:
            checks["user_eve"] = _paired_advantage(records, paired, "user_eve", targets["db_privacy"])
        report["checks"] = checks
    elif mode == "user-privacy":
        checks = {}
        for party in ("dc1_eve", "dc2_eve"):
            if paired:
                checks[party] = _paired_advantage(records, paired, party, targets["user_privacy"])
            else:
                checks[party] = _grouped_advantage(records, party, targets["user_privacy"], group_by_w=False)
        report["checks"] = checks
    elif mode == "secrecy":
        if paired:
            checks = {"eve": _paired_advantage(records, paired, "eve", targets["protocol_secrecy"])}
        else:
            checks = {"eve": _grouped_advantage(records, "eve", targets["protocol_secrecy"], group_by_w=True)}
        report["checks"] = checks
    else:
        raise UsageError(f"unknown mode {mode!r}")
    applicable = [c["pass"] for c in report["checks"].values() if c.get("pass") is not None]
    # None when no check applies to this transcript.
    report["pass"] = all(applicable) if applicable else None
    return report


def cmd_analyze(args) -> int:
    header, records = _load(args.transcript)
    paired = None
    if args.paired:
        _, paired = _load(args.paired)
    report = analyze_records(header, records, args.mode, paired)
    if args.format == "csv":
        raise UsageError("analyze reports are JSON only")
    _emit(_dump(report), args.out)
    return EXIT_OK


# -- plan -------------------------------------------------------------------


def _plan_stats(raw: dict):
    try:
        stats = planner.BlockStats(**raw["stats"])
        eps = planner.EpsilonBudget(**raw["eps"])
        return planner.key_length(stats, eps)
    except KeyError as exc:
        raise DataError(f"config field {exc.args[0]!r} is required for key length") from exc
    except (TypeError, ValueError) as exc:
        raise DataError(f"config field 'stats'/'eps': {exc}") from exc


def cmd_plan(args) -> int:
    raw = load_json(args.config) if args.config else {}
    unknown = set(raw) - {"protocol", "n", "entry_bits", "scenario", "per_link_budget", "inter_dc_budget",
                          "stats", "eps", "curve"}
    if unknown:
        raise DataError(f"config field '{sorted(unknown)[0]}' is unknown")
    opts = {k: v for k, v in raw.items()}
    for name in ("protocol", "n", "entry_bits", "scenario", "per_link_budget", "inter_dc_budget"):
        val = getattr(args, name)
        if val is not None:
            opts[name] = val
    if args.curve:
        opts["curve"] = args.curve
    protocol = opts.get("protocol", B2)
    if protocol not in (B2, XOR):
        raise DataError(f"field 'protocol' must be b2 or xor, got {protocol!r}")
    explicit = "n" in opts or "entry_bits" in opts
    if "scenario" in opts and explicit:
        raise UsageError("give either --scenario or explicit --n/--entry-bits, not both")
    result: dict = {"tool": TOOL, "version": __version__, "seed": None, "protocol": protocol}
    result["config_digest"] = _digest(opts)

    if "curve" in opts:
        budgets = _budgets(opts)
        if budgets is None:
            raise UsageError("--curve needs --per-link-budget and --inter-dc-budget")
        grid = _grid(opts["curve"])
        rows = planner.feasibility_curve(protocol, *budgets, grid)
        if args.format == "csv":
            _emit(planner.curve_csv(rows), args.out)
        else:
            result.update({"per_link_budget": budgets[0], "inter_dc_budget": budgets[1],
                           "columns": list(planner.CURVE_COLUMNS), "curve": rows})
            _emit(_dump(result), args.out)
        return EXIT_OK

    rows = []
    if "scenario" in opts:
        try:
            scen = [planner.scenario(opts["scenario"])]
        except ValueError as exc:
            raise DataError(f"field 'scenario': {exc}") from exc
        for s in scen:
            rows.append({"scenario": s.name, "n": s.n, "entry_bits": s.entry_bits})
    elif explicit:
        try:
            rows.append({"n": int(opts["n"]), "entry_bits": int(opts.get("entry_bits", 1))})
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError("fields 'n' and 'entry_bits' must be positive integers") from exc
    elif "stats" not in opts:
        rows = [{"scenario": s.name, "n": s.n, "entry_bits": s.entry_bits} for s in planner.scenario_presets()]
    budgets = _budgets(opts)
    for row in rows:
        try:
            cost = planner.comm_cost(protocol, row["n"], row["entry_bits"])
        except ValueError as exc:
            raise DataError(f"fields 'n'/'entry_bits': {exc}") from exc
        if protocol == B2:
            row["m"] = planner.cube_side(row["n"])
        row["per_link_cost"] = cost.per_link_bits
        row["inter_dc_cost"] = cost.inter_dc_key_bits
        if budgets is not None:
            row["L_max"] = planner.max_entry_size(protocol, row["n"], *budgets)
    if "stats" in opts or "eps" in opts:
        result["key_length"] = _plan_stats(opts)
    result["rows"] = rows
    if args.format == "csv":
        cols = ["scenario", "n", "entry_bits", "m", "per_link_cost", "inter_dc_cost", "L_max"]
        cols = [c for c in cols if any(c in r for r in rows)]
        lines = [",".join(cols)] + [",".join(str(r.get(c, "")) for c in cols) for r in rows]
        _emit("\n".join(lines) + "\n", args.out)
    else:
        _emit(_dump(result), args.out)
    return EXIT_OK


def _budgets(opts):
    if "per_link_budget" not in opts and "inter_dc_budget" not in opts:
        return None
    try:
        pl, idc = int(opts["per_link_budget"]), int(opts["inter_dc_budget"])
    except KeyError as exc:
        raise UsageError(f"budget {exc.args[0]!r} missing; give both budgets") from exc
    except (TypeError, ValueError) as exc:
        raise DataError("fields 'per_link_budget'/'inter_dc_budget' must be integers") from exc
    if pl < 0 or idc < 0:
        raise DataError("budgets must be non-negative")
    return pl, idc


def _grid(spec) -> List[int]:
    """``lo:hi:points`` (log-spaced) or a comma list of n values."""
    try:
        if isinstance(spec, list):
            return sorted(int(v) for v in spec)
        if ":" in spec:
            lo, hi, pts = (int(float(v)) for v in spec.split(":"))
            return planner.log_grid(lo, hi, pts)
        return sorted(int(float(v)) for v in spec.split(","))
    except ValueError as exc:
        raise DataError(f"field 'curve': expected lo:hi:points or a comma list ({exc})") from exc


# -- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog=TOOL, description="SPIR over QKD-style key channels: simulate, analyze, plan.")
    p.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    run = sub.add_parser("run", help="execute a seeded batch and write a transcript")
    run.add_argument("--config", help="JSON run config")
    run.add_argument("--seed", type=int)
    run.add_argument("--trials", type=int)
    run.add_argument("--protocol", choices=(B2, XOR))
    run.add_argument("--out")
    run.set_defaults(func=cmd_run)

    an = sub.add_parser("analyze", help="check a transcript against the security conditions")
    an.add_argument("transcript")
    an.add_argument("--mode", choices=MODES, default="bounds")
    an.add_argument("--paired", help="second transcript with different inputs")
    an.add_argument("--out")
    an.add_argument("--format", choices=("json",), default="json")
    an.set_defaults(func=cmd_analyze)

    pl = sub.add_parser("plan", help="costs, key length, L_max and feasibility curves")
    pl.add_argument("--config", help="JSON planner inputs")
    pl.add_argument("--scenario")
    pl.add_argument("--protocol", choices=(B2, XOR))
    pl.add_argument("--n", type=int)
    pl.add_argument("--entry-bits", dest="entry_bits", type=int)
    pl.add_argument("--per-link-budget", dest="per_link_budget", type=int)
    pl.add_argument("--inter-dc-budget", dest="inter_dc_budget", type=int)
    pl.add_argument("--curve", help="n grid: lo:hi:points or comma list")
    pl.add_argument("--out")
    pl.add_argument("--format", choices=("json", "csv"), default="json")
    pl.set_defaults(func=cmd_plan)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
