"""Command-line entry point: ``polarot <command> ...``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.  Every option may
also come from a JSON file given with ``--settings``; flags on the command
line win.  Indices in all reports are 1-based.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
import warnings
from typing import Any

from . import __version__
from .autgroup import (
    BitPermutation,
    centralizer_auts,
    enumerate_aut,
    induced_index_perm,
    is_automorphism,
)
from .channel import ChannelParams, db_to_linear
from .construct import default_gamma, good_bad_sets, mi_profile, reliability_order
from .optimize import InfeasibleError, OtSelection, inner_topk, outer_search
from .polar_core import build_transform
from .privacy import MinEntropyGapInput, key_budget
from .reliability import ReliabilityQuery, cp_upper, mc_hash_input_error, union_bound_prefix
from .wire import ProtocolError, dumps

log = logging.getLogger("polarot")

SCHEMA = 1


class UsageError(Exception):
    """Bad or missing option; maps to exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# (dest, default) pairs filled after merging the settings file
DEFAULTS: dict[str, dict[str, Any]] = {
    "construct": {},
    "aut": {},
    "optimize": {"max_perms": None},
    "rate": {"eps_s": 1e-6, "eps_p": 1e-6, "eps_sw": 1e-6, "v": 0.0},
    "simulate": {"delta": 1e-6, "trials": 1000},
    "cp-bound": {},
    "ot": {"choice": 0, "session": 0},
}


def _snr_opts(p):
    p.add_argument("--snr-db", type=float)
    p.add_argument("--snr", type=float, help="linear SNR (1/noise variance)")


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="polarot", description=__doc__.splitlines()[0])
    top.add_argument("--version", action="version", version=__version__)
    top.add_argument("--log-level", default=os.environ.get("OT_LOG", "WARNING"))
    top.add_argument("--settings", metavar="FILE", help="JSON file with option defaults")
    sub = top.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("construct", help="GA bit-channel profile as CSV")
    p.add_argument("--n", type=int)
    _snr_opts(p)
    p.add_argument("--gamma", type=float)
    p.add_argument("--out")

    p = sub.add_parser("aut", help="automorphisms of T for m stages")
    p.add_argument("--m", type=int)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--list", action="store_true", default=None)
    g.add_argument("--check", metavar="FILE")
    g.add_argument("--centralizer", metavar="FILE")
    p.add_argument("--out")

    p = sub.add_parser("optimize", help="search sigma and the cross-cut selection")
    p.add_argument("--n", type=int)
    _snr_opts(p)
    p.add_argument("--k", type=int)
    p.add_argument("--max-perms", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--involutions", action="store_true", default=None,
                   help="only consider involutive sigma (needed by `ot run`)")
    p.add_argument("--out", help="also write the selection file here")

    p = sub.add_parser("rate", help="key-length budget for one selection")
    p.add_argument("--n", type=int)
    _snr_opts(p)
    p.add_argument("--k", type=int)
    p.add_argument("--sigma", metavar="FILE", help="permutation file")
    p.add_argument("--selection", metavar="FILE", help="selection file from optimize")
    p.add_argument("--eps-s", type=float)
    p.add_argument("--eps-p", type=float)
    p.add_argument("--eps-sw", type=float)
    p.add_argument("--v", type=float, help="information-density variance")
    p.add_argument("--c-eps", type=float)
    p.add_argument("--psi-mean", type=float)
    p.add_argument("--out")

    p = sub.add_parser("simulate", help="Monte-Carlo hash-input error with a CP bound")
    p.add_argument("--selection", metavar="FILE")
    _snr_opts(p)
    p.add_argument("--trials", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = sub.add_parser("cp-bound", help="Clopper-Pearson upper limit")
    p.add_argument("--k", type=int)
    p.add_argument("--m", type=int, help="number of trials")
    p.add_argument("--delta", type=float)

    p = sub.add_parser("ot", help="run the OT protocol")
    ot_sub = p.add_subparsers(dest="ot_command", parser_class=_Parser)
    r = ot_sub.add_parser("run")
    r.add_argument("--role", choices=("alice", "bob"))
    g = r.add_mutually_exclusive_group()
    g.add_argument("--connect", metavar="HOST:PORT")
    g.add_argument("--listen", metavar="HOST:PORT")
    g.add_argument("--loopback", action="store_true", default=None)
    r.add_argument("--config", metavar="FILE", help="session config or selection file")
    _snr_opts(r)
    r.add_argument("--ell", type=int, help="key length when --config is a selection file")
    r.add_argument("--choice", type=int, choices=(0, 1))
    r.add_argument("--messages", metavar="FILE")
    r.add_argument("--seed", type=int)
    r.add_argument("--peer-seed", type=int, help="other party's seed (loopback only)")
    r.add_argument("--session", type=int)
    r.add_argument("--transcript", metavar="FILE")
    r.add_argument("--out")
    return top


def parse_config(argv: list[str] | None = None, settings: dict | None = None) -> argparse.Namespace:
    """Parse flags, fill unset options from the settings file, then apply defaults."""
    ns = build_parser().parse_args(argv)
    if ns.command is None:
        raise UsageError("a command is required")
    if settings is None and ns.settings:
        try:
            with open(ns.settings, encoding="utf-8") as fh:
                settings = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"settings: cannot read {ns.settings}: {exc}") from None
    for key, val in (settings or {}).items():
        dest = key.replace("-", "_")
        if not hasattr(ns, dest):
            raise UsageError(f"settings: unknown field {key!r} for {ns.command}")
        if getattr(ns, dest) is None:
            setattr(ns, dest, val)
    for dest, val in DEFAULTS.get(ns.command, {}).items():
        if getattr(ns, dest, None) is None:
            setattr(ns, dest, val)
    _validate(ns)
    return ns


def _need(ns, *fields):
    for f in fields:
        if getattr(ns, f, None) is None:
            raise UsageError(f"--{f.replace('_', '-')} is required")


def _stages(n: int) -> int:
    if n is None or n < 1 or n & (n - 1):
        raise UsageError(f"--n must be a power of two, got {n}")
    return n.bit_length() - 1


def _resolve_snr(ns, required: bool = True):
    if getattr(ns, "snr", None) is not None and getattr(ns, "snr_db", None) is not None:
        raise UsageError("give only one of --snr and --snr-db")
    if getattr(ns, "snr_db", None) is not None:
        ns.snr = db_to_linear(float(ns.snr_db))
    if ns.snr is None and required:
        raise UsageError("--snr or --snr-db is required")
    if ns.snr is not None and not ns.snr > 0:
        raise UsageError("--snr must be positive")


def _validate(ns):
    c = ns.command
    if c in ("construct", "optimize", "rate") and ns.n is not None:
        ns.m = _stages(ns.n)
    if c == "construct":
        _need(ns, "n")
        _resolve_snr(ns)
    elif c == "aut":
        _need(ns, "m")
        if not ns.list and not ns.check and not ns.centralizer:
            ns.list = True
    elif c == "optimize":
        _need(ns, "n", "k")
        _resolve_snr(ns)
        sampled = ns.m > 8 or (ns.max_perms is not None and ns.max_perms < math.factorial(ns.m))
        if sampled and ns.seed is None:
            raise UsageError("--seed is required when permutations are sampled")
    elif c == "rate":
        if ns.selection is None:
            _need(ns, "n", "k", "sigma")
        _resolve_snr(ns, required=ns.selection is None)
    elif c == "simulate":
        _need(ns, "selection", "seed", "trials", "delta")
        _resolve_snr(ns, required=False)
        if ns.trials < 1:
            raise UsageError("--trials must be at least 1")
    elif c == "cp-bound":
        _need(ns, "k", "m", "delta")
        if not 0 <= ns.k <= ns.m or not 0 < ns.delta < 1:
            raise UsageError("need 0 <= k <= m and 0 < delta < 1")
    elif c == "ot":
        if ns.ot_command != "run":
            raise UsageError("usage: polarot ot run ...")
        _need(ns, "config", "seed")
        if not ns.loopback:
            _need(ns, "role")
            if not (ns.connect or ns.listen):
                raise UsageError("one of --connect, --listen or --loopback is required")
        elif ns.peer_seed is None:
            raise UsageError("--peer-seed is required with --loopback")
        _resolve_snr(ns, required=False)


# ---------------------------------------------------------------------------
# reports


def _provenance(ns) -> dict:
    skip = {"out", "transcript", "settings", "log_level"}
    cfg = {k: v for k, v in sorted(vars(ns).items()) if k not in skip}
    digest = hashlib.sha256(dumps(cfg).encode()).hexdigest()
    return {"version": __version__, "command": ns.command, "seed": getattr(ns, "seed", None),
            "config_sha256": digest}


def _json_report(ns, body: dict) -> str:
    return dumps({"schema": SCHEMA, "provenance": _provenance(ns), **body}) + "\n"


def _csv_report(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def emit_report(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _read_json(path: str, what: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"{what}: cannot read {path}: {exc}") from None


# ---------------------------------------------------------------------------
# commands


def cmd_construct(ns) -> None:
    prof = mi_profile(ns.m, ns.snr)
    gamma = default_gamma(prof.n) if ns.gamma is None else ns.gamma
    sets = good_bad_sets(prof, gamma)
    rank = {i: t + 1 for t, i in enumerate(reliability_order(prof).order_real)}
    good, bad = set(sets.good), set(sets.bad)
    rows = [
        [i + 1, format(i, f"0{ns.m}b") if ns.m else "", float(prof.I[i]), float(prof.Z[i]),
         int(i in good), int(i in bad), rank[i]]
        for i in range(prof.n)
    ]
    emit_report(_csv_report(["paper_index", "binary_label", "I", "Z", "in_good", "in_bad", "rank"],
                            rows), ns.out)


def _perm_entry(t: int, sigma: BitPermutation) -> dict:
    pi = induced_index_perm(sigma)
    n = pi.n
    return {
        "index": t,
        "sigma": list(sigma.sigma),
        "label": sigma.label(),
        "pi_cycles": pi.cycles_one_based(drop_fixed=True),
        "order": pi.order,
        "quality_order": [pi(c) + 1 for c in range(n - 1, -1, -1)],
    }


def _load_perm(path: str, m: int) -> BitPermutation:
    obj = _read_json(path, "permutation file")
    try:
        sigma = BitPermutation.from_json(obj)
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"permutation file: {exc}") from None
    if sigma.m != m:
        raise UsageError(f"permutation file has m={sigma.m}, expected {m}")
    return sigma


def cmd_aut(ns) -> None:
    if ns.check:
        sigma = _load_perm(ns.check, ns.m)
        T = build_transform(ns.m)
        body = {"m": ns.m, **_perm_entry(1, sigma),
                "automorphism": is_automorphism(induced_index_perm(sigma).matrix(), T)}
    elif ns.centralizer:
        sigma = _load_perm(ns.centralizer, ns.m)
        body = {"m": ns.m, "sigma": list(sigma.sigma),
                "centralizer": [_perm_entry(t + 1, tau)
                                for t, tau in enumerate(centralizer_auts(sigma))]}
    else:
        body = {"m": ns.m, "perms": [_perm_entry(t + 1, s) for t, s in enumerate(enumerate_aut(ns.m))]}
    emit_report(_json_report(ns, body), ns.out)


def cmd_optimize(ns) -> None:
    res = outer_search(ns.m, ns.snr, ns.k, ns.max_perms, seed=ns.seed or 0,
                       involutions_only=bool(ns.involutions))
    sel = res.best.to_json(snr=ns.snr)
    body = {**sel, "evaluated": res.evaluated, "feasible": res.feasible}
    if ns.out:
        emit_report(dumps(sel) + "\n", ns.out)
    emit_report(_json_report(ns, body), None)


def _load_selection(path: str) -> tuple[OtSelection, dict]:
    obj = _read_json(path, "selection file")
    if "selection" in obj:
        obj = {**obj["selection"], "snr": obj.get("snr")}
    try:
        return OtSelection.from_json(obj), obj
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"selection file: {exc}") from None


def cmd_rate(ns) -> None:
    if ns.selection:
        sel, obj = _load_selection(ns.selection)
        if ns.snr is None:
            if obj.get("snr") is None:
                raise UsageError("--snr or --snr-db is required")
            ns.snr = float(obj["snr"])
        m = sel.sigma.m
        prof = mi_profile(m, ns.snr)
        if ns.k is not None and ns.k != sel.k:
            sel = inner_topk(sel.sigma, prof, ns.k)
        else:
            sel = inner_topk(sel.sigma, prof, sel.k) if math.isnan(sel.s) else sel
    else:
        prof = mi_profile(ns.m, ns.snr)
        sel = inner_topk(_load_perm(ns.sigma, ns.m), prof, ns.k)
    gap = None
    if ns.c_eps is None and ns.psi_mean is not None:
        gap = MinEntropyGapInput(ns.psi_mean, ns.eps_s, float(sel.k))
    budget = key_budget(sel.good_sel, sel.pi, prof, eps_s=ns.eps_s, eps_p=ns.eps_p,
                        eps_sw=ns.eps_sw, V=ns.v, c_eps=ns.c_eps, gap=gap)
    body = {"ell": budget.ell, "ell_swc": budget.ell_swc, "ell_net": budget.ell_net,
            "rate": budget.rate, "leakage": budget.leakage, "c_eps": budget.c_eps,
            "beta_n": budget.beta_n, "s": sel.s, "good_sel": [i + 1 for i in sel.good_sel],
            "bad_sel": [i + 1 for i in sel.bad_sel]}
    emit_report(_json_report(ns, body), ns.out)


def cmd_simulate(ns) -> None:
    sel, obj = _load_selection(ns.selection)
    if ns.snr is None:
        if obj.get("snr") is None:
            raise UsageError("--snr or --snr-db is required")
        ns.snr = float(obj["snr"])
    params = ChannelParams(ns.snr, ns.seed)
    res = mc_hash_input_error(sel, params, ns.trials, ns.seed, ns.delta)
    prof = mi_profile(sel.sigma.m, ns.snr)
    ub = union_bound_prefix(ReliabilityQuery(sel.good_sel, sel.bad_sel), prof)
    emit_report(_csv_report(["trials", "errors", "p_hat", "cp_upper", "union_bound"],
                            [[res.trials, res.errors, res.p_hat, res.cp_upper, ub]]), ns.out)


def cmd_cp_bound(ns) -> None:
    emit_report(format(cp_upper(ns.k, ns.m, ns.delta), ".17g") + "\n", None)


def _load_session(ns):
    from .otproto import SelectionError, SessionConfig

    obj = _read_json(ns.config, "config")
    try:
        if "selection" not in obj:
            sel = OtSelection.from_json(obj)
            snr = ns.snr if ns.snr is not None else obj.get("snr")
            if snr is None:
                raise UsageError("--snr or --snr-db is required for a bare selection file")
            ell = sel.k if ns.ell is None else ns.ell
            return SessionConfig(sel.sigma.m, float(snr), sel, ell)
        if ns.snr is not None:
            obj = {**obj, "snr": ns.snr}
        if ns.ell is not None:
            obj = {**obj, "ell": ns.ell}
        return SessionConfig.from_json(obj)
    except (KeyError, TypeError, SelectionError) as exc:
        raise UsageError(f"config: {exc}") from None


def cmd_ot(ns) -> None:
    from .otproto import SessionInputs, run_session

    config = _load_session(ns)
    messages = None
    if ns.messages:
        obj = _read_json(ns.messages, "messages")
        messages = (obj["m0"], obj["m1"])
    if ns.loopback:
        inputs = SessionInputs(ns.seed, ns.peer_seed, ns.choice, messages, ns.session)
        out = run_session("loopback", "both", config, inputs)
    else:
        if ns.role == "alice":
            inputs = SessionInputs(alice_seed=ns.seed, messages=messages, session=ns.session)
        else:
            inputs = SessionInputs(bob_seed=ns.seed, choice=ns.choice, session=ns.session)
        addr = ns.listen or ns.connect

        def ready(port):
            print(f"listening on port {port}", file=sys.stderr, flush=True)

        out = run_session("tcp", ns.role, config, inputs, addr=addr, listen=bool(ns.listen),
                          ready=ready)
    if ns.transcript:
        emit_report("".join(line + "\n" for line in out.transcript), ns.transcript)
    body: dict = {"frames": len(out.transcript)}
    if out.alice is not None:
        body["alice"] = {"m0": out.alice.m0.tolist(), "m1": out.alice.m1.tolist()}
    if out.bob is not None:
        body["bob"] = {"choice": out.bob.choice, "message": out.bob.message.tolist()}
    if out.alice is not None and out.bob is not None:
        body["success"] = out.success
    emit_report(_json_report(ns, body), ns.out)


COMMANDS = {
    "construct": cmd_construct,
    "aut": cmd_aut,
    "optimize": cmd_optimize,
    "rate": cmd_rate,
    "simulate": cmd_simulate,
    "cp-bound": cmd_cp_bound,
    "ot": cmd_ot,
}


def main(argv: list[str] | None = None) -> int:
    try:
        ns = parse_config(argv)
    except UsageError as exc:
        print(f"polarot: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=str(ns.log_level).upper(), format="%(levelname)s %(message)s")
    logging.captureWarnings(True)
    warnings.simplefilter("default")
    try:
        COMMANDS[ns.command](ns)
    except UsageError as exc:
        print(f"polarot: error: {exc}", file=sys.stderr)
        return 2
    except (InfeasibleError, ProtocolError, OSError, ValueError) as exc:
        print(f"polarot: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
