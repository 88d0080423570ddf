"""Command-line driver: ``sspbound {parse|bound|simulate|certify}``.

Exit codes: 0 success, 1 no certificate / failed verification / unreliable
estimate, 2 input error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .frontend import SMDPError, load_model
from .oracle import Policy, SimEstimate, simulate
from .semantics import ModelIR, format_number
from .solve import SCHEMA, BoundCertificate, NoCertificate, SolverConfig, synthesize, verify_certificate

EXIT_OK, EXIT_NO_CERT, EXIT_INPUT, EXIT_IO = 0, 1, 2, 3


class InputError(Exception):
    pass


@dataclass
class Report:
    command: str
    model: str
    summary: dict
    status: str = "ok"
    certificates: list[dict] = field(default_factory=list)
    estimates: list[dict] = field(default_factory=list)
    messages: list[str] = field(default_factory=list)
    audit: list[str] = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    schema: int = SCHEMA

    def to_dict(self) -> dict:
        return {
            "schema": self.schema, "command": self.command, "model": self.model, "summary": dict(self.summary),
            "status": self.status, "certificates": list(self.certificates), "estimates": list(self.estimates),
            "messages": list(self.messages), "audit": list(self.audit), "timings": dict(self.timings),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Report":
        if d.get("schema") != SCHEMA:
            raise ValueError(f"unsupported report schema {d.get('schema')!r}")
        return cls(d["command"], d["model"], dict(d["summary"]), d["status"], list(d["certificates"]),
                   list(d["estimates"]), list(d["messages"]), list(d["audit"]), dict(d["timings"]), d["schema"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)

    def to_text(self) -> str:
        s = self.summary
        lines = [f"model: {self.model}  {s['text']}"]
        for c in self.certificates:
            at = c.get("value_at_init")
            at_text = "" if at is None else f"   (at x0: {format_number(at)})"
            lines.append(f"{c['problem']} {c['side']} bound: {c['bound_expr']}{at_text}")
        for e in self.estimates:
            se = "null" if e["stderr"] is None else format_number(e["stderr"])
            lines.append(f"simulate {e['policy']}: mean {format_number(e['mean'])}  stderr {se}  "
                         f"truncated {format_number(e['truncated_fraction'])}  trials {e['trials']}  seed {e['seed']}")
        lines += list(self.messages)
        lines += [f"audit: {a}" for a in self.audit]
        if self.timings:
            lines.append("time: " + ", ".join(f"{k} {v * 1000:.0f} ms" for k, v in self.timings.items()))
        return "\n".join(lines)


def model_summary(model: ModelIR) -> dict:
    return {
        "text": model.summary(),
        "X": len(model.program_vars), "R": len(model.sampling_vars), "k": model.k,
        "program_vars": list(model.program_vars),
        "init": None if model.init is None else [format_number(v) for v in model.init],
    }


def parse_init(text: str | None, model: ModelIR) -> ModelIR:
    """Apply ``k=v,...`` overrides to the model's initial valuation."""
    if not text:
        return model
    values = dict(zip(model.program_vars, model.init)) if model.init is not None else {}
    for item in text.split(","):
        name, sep, val = item.partition("=")
        name = name.strip()
        if not sep or name not in model.program_vars:
            raise InputError(f"bad --init entry {item!r}; expected var=value with var in {', '.join(model.program_vars)}")
        try:
            values[name] = Fraction(val.strip())
        except (ValueError, ZeroDivisionError):
            raise InputError(f"bad number {val!r} in --init") from None
    missing = [v for v in model.program_vars if v not in values]
    if missing:
        raise InputError(f"no initial value for {', '.join(missing)}")
    return model.with_init([values[v] for v in model.program_vars])


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise OSError(f"cannot read {path}: {e.strerror or e}") from e


def _load(path: str) -> ModelIR:
    return load_model(_read(path))


def cmd_parse(args) -> tuple[int, Report]:
    model = _load(args.model)
    report = Report("parse", args.model, model_summary(model))
    report.audit.extend(model.notes)
    return EXIT_OK, report


def cmd_bound(args) -> tuple[int, Report]:
    model = parse_init(args.init, _load(args.model))
    report = Report("bound", args.model, model_summary(model))
    sides = ("upper", "lower") if args.side == "both" else (args.side,)
    code = EXIT_OK
    for side in sides:
        t0 = time.perf_counter()
        try:
            # the strategy only matters where some block must be chosen
            cert = synthesize(model, side, args.problem, args.lower_strategy, cfg=SolverConfig(seed=args.seed))
        except NoCertificate as e:
            report.messages.append(f"{side}: no linear certificate ({e})")
            report.status = "no-certificate"
            code = EXIT_NO_CERT
            continue
        finally:
            report.timings[side] = time.perf_counter() - t0
        report.certificates.append(cert.to_dict())
        report.audit.extend(a for a in cert.audit if a not in report.audit)
        if cert.exact:
            report.audit.append(f"{side}: coefficients snapped to rationals and verified exactly")
        if not cert.verified:
            report.messages.append(f"{side}: verification failed: " + "; ".join(cert.failures))
            report.status = "verification-failed"
            code = EXIT_NO_CERT
    return code, report


def cmd_simulate(args) -> tuple[int, Report]:
    model = parse_init(args.init, _load(args.model))
    report = Report("simulate", args.model, model_summary(model))
    try:
        policy = Policy.parse(args.policy)
        policy.check(model)
    except ValueError as e:
        raise InputError(str(e)) from None
    if model.init is None:
        raise InputError("model has no initial valuation; pass --init")
    if args.trials < 1 or args.step_cap < 1:
        raise InputError("--trials and --step-cap must be at least 1")
    t0 = time.perf_counter()
    est = simulate(model, policy, args.trials, args.seed, args.step_cap, workers=args.workers)
    report.timings["simulate"] = time.perf_counter() - t0
    report.estimates.append(est.to_dict())
    if not est.reliable:
        report.status = "unreliable"
        report.messages.append(
            f"unreliable: {100 * est.truncated_fraction:.2f}% of trials hit the step cap (policy may not terminate)")
        return EXIT_NO_CERT, report
    return EXIT_OK, report


def _certificates_in(doc) -> list[dict]:
    if isinstance(doc, dict) and "certificates" in doc:
        return list(doc["certificates"])
    if isinstance(doc, list):
        return doc
    return [doc]


def cmd_certify(args) -> tuple[int, Report]:
    model = _load(args.model)
    report = Report("certify", args.model, model_summary(model))
    text = _read(args.certificate)
    try:
        certs = [BoundCertificate.from_dict(d) for d in _certificates_in(json.loads(text))]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError, ZeroDivisionError) as e:
        raise InputError(f"malformed certificate JSON: {e}") from None
    if not certs:
        raise InputError("no certificate in file")
    code = EXIT_OK
    for cert in certs:
        if tuple(cert.variables) != model.program_vars:
            raise InputError(f"certificate variables {list(cert.variables)} do not match model {list(model.program_vars)}")
        t0 = time.perf_counter()
        rep = verify_certificate(model, cert)
        report.timings[f"verify {cert.side}"] = time.perf_counter() - t0
        cert.verified, cert.failures = rep.passed, rep.failures
        report.certificates.append(cert.to_dict())
        if rep.passed:
            report.messages.append(f"{cert.problem} {cert.side}: all conditions hold")
        else:
            code = EXIT_NO_CERT
            report.status = "verification-failed"
            report.messages.extend(f"{cert.problem} {cert.side}: {f}" for f in rep.failures)
    return code, report


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sspbound", description="Linear bounds on expected total reward of succinct MDPs.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("model", help="path to a .smdp model")
        sp.add_argument("--format", choices=("text", "json"), default="text")
        sp.add_argument("--out", help="write the report here instead of stdout")

    sp = sub.add_parser("parse", help="check a model and print its summary")
    common(sp)
    sp.set_defaults(func=cmd_parse)

    sp = sub.add_parser("bound", help="synthesize and verify bound certificates")
    common(sp)
    sp.add_argument("--side", choices=("upper", "lower", "both"), default="both")
    sp.add_argument("--problem", choices=("sup", "inf"), default="sup")
    sp.add_argument("--init", help="initial valuation override, e.g. x=5,y=0")
    sp.add_argument("--lower-strategy", choices=("fixed", "motzkin"), default="fixed")
    sp.add_argument("--seed", type=int, default=0, help="seed for the random restarts of the Motzkin search")
    sp.set_defaults(func=cmd_bound)

    sp = sub.add_parser("simulate", help="Monte Carlo estimate under a fixed policy")
    common(sp)
    sp.add_argument("--policy", default="always:1", help="always:L or uniform")
    sp.add_argument("--init", help="initial valuation override, e.g. x=5,y=0")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--trials", type=int, default=100_000)
    sp.add_argument("--step-cap", type=int, default=10**6)
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("certify", help="re-check a certificate JSON against a model")
    common(sp)
    sp.add_argument("certificate", help="certificate or bound report JSON")
    sp.set_defaults(func=cmd_certify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        code, report = args.func(args)
    except SMDPError as e:
        for d in e.diagnostics:
            print(str(d), file=sys.stderr)
        return EXIT_INPUT
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    text = report.to_json() if args.format == "json" else report.to_text()
    if args.out:
        try:
            Path(args.out).write_text(text + "\n", encoding="utf-8")
        except OSError as e:
            print(f"error: cannot write {args.out}: {e.strerror or e}", file=sys.stderr)
            return EXIT_IO
    else:
        print(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
