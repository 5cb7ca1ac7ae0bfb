"""Command line front end: ``flatcheck <command> <file> [options]``.

Exit codes: 0 affirmative, 1 certified negative, 2 inconclusive, 3 input error.
"""

import argparse
import os
import sys as _sys

from ..diffgeo import (DEFAULT_SEED, EvaluationFailed, InternalInconsistency, Sampler, SolveFailed,
                       StraighteningFailed)
from ..flatness import (DimensionMismatch, FlatCandidate, NoInputInfluence, NonAffineFeedback,
                        NotAccessible, NotFlatWithinBound, RankLadderViolation, candidate_sequence,
                        check_theorem1, second_component, triangular_transform, verify_flat_output)
from ..symrat import ParseError, print_expr
from .report import format_machine, format_text, parse_machine
from .sysfile import SysFileError, SystemFile, format_system, load_system, parse_system_text

__all__ = ["main", "run", "load_system", "parse_system_text", "format_system", "format_machine",
           "format_text", "parse_machine", "SysFileError", "SystemFile", "EXIT_OK", "EXIT_NEGATIVE",
           "EXIT_INCONCLUSIVE", "EXIT_INPUT"]

EXIT_OK, EXIT_NEGATIVE, EXIT_INCONCLUSIVE, EXIT_INPUT = 0, 1, 2, 3
COMMANDS = ("verify", "theorem1", "normalform", "candidates", "complete")


class InputError(Exception):
    pass


def format_form(w):
    terms = []
    for name, c in w.items():
        s = print_expr(c)
        if s == "1":
            t = "d" + name
        elif s == "-1":
            t = "-d" + name
        elif " + " not in s and " - " not in s:
            t = "%s*d%s" % (s, name)
        else:
            t = "(%s)*d%s" % (s, name)
        terms.append(t)
    if not terms:
        return "0"
    out = terms[0]
    for t in terms[1:]:
        out += " - " + t[1:] if t.startswith("-") else " + " + t
    return out


def _index(idx):
    return {"K": list(idx.K), "R": list(idx.R), "d": idx.d, "n": idx.n}


def _candidate(sf, args, need_two=True):
    cand = sf.candidate
    phis = list(cand) if cand is not None else []
    if args.phi1 is not None:
        phis = [sf.sys.parse(args.phi1)] + phis[1:]
    if len(phis) < (2 if need_two else 1):
        raise InputError("a candidate with %s is required (use [candidate] or --phi1)"
                         % ("phi1 and phi2" if need_two else "phi1"))
    return FlatCandidate(*phis)


def _cand_report(phi):
    return {"phi%d" % (i + 1): print_expr(p) for i, p in enumerate(phi)}


def cmd_verify(sf, args, sampler):
    phi = _candidate(sf, args)
    out = {"candidate": _cand_report(phi)}
    try:
        phi.check(sf.sys, sampler)
        idx = verify_flat_output(sf.sys, phi, sampler)
    except (NotFlatWithinBound, NoInputInfluence) as exc:
        out["status"] = "not_certified"
        out["reason"] = str(exc)
        return out, EXIT_NEGATIVE
    out["status"] = "flat"
    out.update(_index(idx))
    return out, EXIT_OK


def _ladder_report(res):
    levels = []
    for lv in res.ladder.levels:
        item = {"A": list(lv.A), "rank_P": lv.rank_P}
        if lv.Q is not None:
            item["rank_Q"] = lv.rank_Q
            item["integrable"] = lv.integrable
            item["Q"] = [format_form(w) for w in lv.Q.generators]
        levels.append(item)
    return levels


def cmd_theorem1(sf, args, sampler):
    phi = _candidate(sf, args)
    out = {"candidate": _cand_report(phi)}
    try:
        res = check_theorem1(sf.sys, phi, sampler)
    except (NotFlatWithinBound, NoInputInfluence) as exc:
        out["status"] = "not_certified"
        out["reason"] = str(exc)
        return out, EXIT_NEGATIVE
    out["status"] = "integrable" if res.verdict else "not_integrable"
    out["index"] = _index(res.index)
    out["levels"] = _ladder_report(res)
    out["failing"] = [list(a) for a in res.failing]
    return out, (EXIT_OK if res.verdict else EXIT_NEGATIVE)


def cmd_normalform(sf, args, sampler):
    out, code = cmd_theorem1(sf, args, sampler)
    if code != EXIT_OK:
        return out, code
    phi = _candidate(sf, args)
    nf = triangular_transform(sf.sys, phi, sampler=sampler)
    names = nf.znames
    out["zmap"] = [{"z": z, "expr": print_expr(e)} for z, e in zip(names, nf.zmap)]
    out["feedback"] = {
        "replaced_input": nf.replaced_input,
        "kept_input": nf.kept_input,
        nf.vnames[0]: print_expr(nf.feedback[0]),
        nf.vnames[1]: print_expr(nf.feedback[1]),
    }
    rows = []
    for i, (a, b) in sorted(nf.rows.items()):
        rows.append({"row": i, "a": print_expr(a), "b": print_expr(b),
                     "a_vars": [z for z in names if a.depends_on(z)],
                     "b_vars": [z for z in names if b.depends_on(z)]})
    out["rows"] = rows
    out["row_condition"] = "each row i depends on z(i+1) through a_i or through b_i"
    out["violations"] = nf.violations(sampler)
    top = FlatCandidate(*nf.top)
    out["system"] = format_system(nf.transformed, top, title="triangular normal form of %s"
                                  % os.path.basename(sf.path or "<input>"))
    if getattr(args, "output", None):
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(out["system"])
    return out, (EXIT_OK if not out["violations"] else EXIT_INCONCLUSIVE)


def cmd_candidates(sf, args, sampler):
    out = {}
    try:
        rep = candidate_sequence(sf.sys, sampler)
    except NotAccessible as exc:
        out["status"] = "not_accessible"
        out["reason"] = str(exc)
        return out, EXIT_NEGATIVE
    out["status"] = "ok"
    out["steps"] = [{"i": s.index, "rule": s.rule, "rank": s.rank, "involutive": s.involutive}
                    for s in rep.steps]
    out["case"] = rep.case
    out["terminal_corank"] = rep.terminal_corank
    out["p"] = rep.p
    out["pool"] = [print_expr(h) for h in rep.pool]
    out["candidates"] = [print_expr(h) for h in rep.candidates]
    return out, EXIT_OK


def cmd_complete(sf, args, sampler):
    out = {}
    try:
        phi1 = _candidate(sf, args, need_two=False).phi1
        out["phi1_source"] = "given"
    except InputError:
        rep = candidate_sequence(sf.sys, sampler)
        if not rep.candidates:
            raise StraighteningFailed("candidate search produced no functions")
        phi1 = rep.candidates[0]
        out["phi1_source"] = "candidates"
    out["phi1"] = print_expr(phi1)
    res = second_component(sf.sys, phi1, sampler)
    lin = res.linearization
    out["k1"] = res.k1
    out["replaced_input"] = res.replaced_input
    out["prolonged"] = {"n": res.prolonged.n, "ranks": list(lin.ranks), "involutive": list(lin.involutive)}
    if not res.found:
        out["status"] = "refuted"
        out["reason"] = "%s is not part of any x-flat output (%s)" % (out["phi1"], lin.diagnostic)
        return out, EXIT_NEGATIVE
    out["prolonged"]["kappa"] = list(lin.kappa)
    out["phi2"] = print_expr(res.phi.phi2)
    try:
        idx = verify_flat_output(sf.sys, res.phi, sampler)
    except (NotFlatWithinBound, NoInputInfluence) as exc:
        out["status"] = "unverified"
        out["reason"] = str(exc)
        return out, EXIT_INCONCLUSIVE
    out["status"] = "found"
    out["index"] = _index(idx)
    return out, EXIT_OK


HANDLERS = {"verify": cmd_verify, "theorem1": cmd_theorem1, "normalform": cmd_normalform,
            "candidates": cmd_candidates, "complete": cmd_complete}


def run(command, sf, args):
    """Run ``command`` on a loaded system file; returns (report, exit code)."""
    seed = args.seed if args.seed is not None else (sf.seed if sf.seed is not None else DEFAULT_SEED)
    sampler = Sampler(seed, force_float=bool(args.float or sf.float_mode))
    head = {"command": command, "file": sf.path or "<input>", "seed": "%#x" % seed,
            "mode": "float" if sampler.force_float else "exact"}
    try:
        body, code = HANDLERS[command](sf, args, sampler)
    except InputError as exc:
        body, code = {"status": "input_error", "reason": str(exc)}, EXIT_INPUT
    except ParseError as exc:
        body, code = {"status": "input_error", "reason": str(exc)}, EXIT_INPUT
    except StraighteningFailed as exc:
        body = {"status": "inconclusive", "reason": str(exc),
                "found": [print_expr(h) for h in exc.found], "missing": exc.missing}
        code = EXIT_INCONCLUSIVE
    except (RankLadderViolation, EvaluationFailed, SolveFailed, InternalInconsistency,
            NonAffineFeedback) as exc:
        body, code = {"status": "inconclusive", "reason": "%s: %s" % (type(exc).__name__, exc)}, \
            EXIT_INCONCLUSIVE
    report = dict(head)
    report["result"] = body
    report["warnings"] = list(sampler.warnings)
    if sampler.warnings and code in (EXIT_OK, EXIT_NEGATIVE):
        code = EXIT_INCONCLUSIVE
    report["exit_code"] = code
    return report, code


def render(report, fmt):
    if fmt == "machine":
        return format_machine(report)
    system = None
    if isinstance(report.get("result"), dict) and "system" in report["result"]:
        report = dict(report)
        report["result"] = dict(report["result"])
        system = report["result"].pop("system")
    text = format_text(report)
    if system:
        text += "\n" + system
    return text


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(_sys.stderr)
        self.exit(EXIT_INPUT, "%s: error: %s\n" % (self.prog, message))


def _seed(text):
    try:
        return int(text, 16)
    except ValueError:
        raise argparse.ArgumentTypeError("seed must be hexadecimal, got %r" % text) from None


def build_parser():
    p = _Parser(prog="flatcheck", description="Triangular normal form and flat-output analysis "
                "for two-input control-affine systems.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("file", nargs="?", help="system definition file")
    p.add_argument("--phi1", help="first output component (overrides the file)")
    p.add_argument("--seed", type=_seed, help="random seed for generic points, hexadecimal")
    p.add_argument("--format", choices=("text", "machine"), default="text")
    p.add_argument("--float", action="store_true", help="decide ranks in floating point")
    p.add_argument("--output", "-o", help="normalform: write the transformed system here")
    p.add_argument("--all", metavar="DIR", help="run the command on every *.sys file in DIR")
    return p


def _run_file(path, args):
    try:
        sf = load_system(path)
    except (ParseError, DimensionMismatch) as exc:
        report = {"command": args.command, "file": str(path),
                  "result": {"status": "input_error", "reason": str(exc)}, "exit_code": EXIT_INPUT}
        return report, EXIT_INPUT
    return run(args.command, sf, args)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if (args.file is None) == (args.all is None):
        parser.error("give exactly one of FILE or --all DIR")
    if args.all is not None:
        try:
            files = sorted(f for f in os.listdir(args.all) if f.endswith(".sys"))
        except OSError as exc:
            parser.error("cannot list %s: %s" % (args.all, exc.strerror))
        code = EXIT_OK
        chunks = []
        batch = {"command": args.command, "files": []}
        for name in files:
            report, c = _run_file(os.path.join(args.all, name), args)
            code = max(code, c)
            batch["files"].append(report)
            chunks.append("== %s ==\n%s" % (name, render(report, "text")))
        _sys.stdout.write(format_machine(batch) if args.format == "machine" else "\n".join(chunks))
        return code
    report, code = _run_file(args.file, args)
    out = render(report, args.format)
    _sys.stdout.write(out)
    if code == EXIT_INPUT:
        _sys.stderr.write("flatcheck: %s\n" % report["result"]["reason"])
    return code
