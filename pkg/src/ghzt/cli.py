"""Command-line interface: ``ghzt {run,verify,table,audit,hinton}``.

Exit codes: 0 success, 1 assertion or verification failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

from .errors import GHZTError
from .protocol import ProtocolConfig, matrix_from_json, parse_bit, run_protocol
from .qstate import DensityMatrix
from .resource import MessageState, Mode, random_message
from .verify import fidelity_audit, regen_table, verify_corrections
from .viz import build_hinton, render_blocks, render_text

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
FIDELITY_BAR = 1 - 1e-8
SWEEP_M = (3, 4, 5)
SWEEP_N = (1, 2)
SWEEP_MAX_QUBITS = 18


class UsageError(Exception):
    pass


def parse_allocation(spec: str | None, n: int) -> dict[int, list[int]] | None:
    """``"1:0,2:1"`` -> participant 1 holds message qubit 0, participant 2 holds 1.

    Unlisted message qubits stay with participant 0.
    """
    if not spec:
        return None
    owner: dict[int, int] = {}
    for item in spec.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            p, j = (int(x) for x in item.split(":"))
        except ValueError:
            raise UsageError(f"bad allocation entry {item!r}; expected participant:qubit")
        if not 0 <= j < n:
            raise UsageError(f"message qubit {j} out of range for n={n}")
        if j in owner:
            raise UsageError(f"message qubit {j} allocated twice")
        owner[j] = p
    alloc: dict[int, list[int]] = {}
    for j in range(n):
        alloc.setdefault(owner.get(j, 0), []).append(j)
    return alloc


def parse_withheld(items) -> frozenset[int]:
    bits = set()
    for item in items or ():
        for tok in item.split(","):
            if tok.strip():
                try:
                    bits.add(parse_bit(tok))
                except ValueError:
                    raise UsageError(f"bad classical bit {tok!r}; expected c<k>")
    return frozenset(bits)


def default_seed() -> int:
    raw = os.environ.get("GHZT_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"GHZT_SEED must be an integer, got {raw!r}")


def make_config(args, m=None, n=None) -> ProtocolConfig:
    m = args.m if m is None else m
    n = args.n if n is None else n
    seed = args.seed if args.seed is not None else default_seed()
    mode = Mode(args.mode)
    alloc = parse_allocation(args.allocation, n)
    if alloc and mode is Mode.STANDARD and set(alloc) != {0}:
        mode = Mode.DISTRIBUTED
    return ProtocolConfig(
        m=m,
        n=n,
        mode=mode,
        receiver=args.receiver,
        allocation=alloc,
        seed=seed,
        withheld_bits=parse_withheld(getattr(args, "withhold", None)),
    )


def _emit(text: str, path: str | None):
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _load_message(args, n: int, seed: int) -> MessageState:
    if getattr(args, "message", None):
        msg = MessageState.from_json(Path(args.message).read_text())
        if msg.n != n:
            raise UsageError(f"message file has n={msg.n}, expected {n}")
        return msg
    return random_message(n, seed)


# --------------------------------------------------------------------------
# subcommands


def cmd_run(args) -> int:
    config = make_config(args)
    message = _load_message(args, config.n, config.seed)
    transcript, fid = run_protocol(config, message)
    if args.output:
        Path(args.output).write_text(transcript.to_json() + "\n", encoding="utf-8")
    certified = fid >= FIDELITY_BAR and not transcript.missing
    if args.format == "json":
        sys.stdout.write(transcript.to_json() + "\n")
    else:
        for b in transcript.missing:
            print(f"MissingClassicalBit: c{b}")
        bits = "".join(str(transcript.bits[b]) for b in sorted(transcript.bits))
        print(f"m={config.m} n={config.n} mode={config.mode.value} receiver={config.receiver}")
        print(f"bits: {bits}")
        print(f"fidelity: {fid:.9f}")
    if certified or args.no_assert:
        return EXIT_OK
    if args.format != "json":
        print("teleportation not certified", file=sys.stderr)
    return EXIT_FAIL


def cmd_verify(args) -> int:
    ms = (args.m,) if args.m is not None else SWEEP_M
    ns = (args.n,) if args.n is not None else SWEEP_N
    reports = []
    for m in ms:
        for n in ns:
            if args.m is None or args.n is None:
                if m * n + n > SWEEP_MAX_QUBITS:
                    continue
            config = make_config(args, m, n)
            reports.append(verify_corrections(config))
    if args.format == "json":
        _emit(json.dumps([r.to_dict() for r in reports], indent=2), args.output)
    else:
        lines = []
        for r in reports:
            c = r.config
            lines.append(
                f"m={c.m} n={c.n} mode={c.mode.value} receiver={c.receiver}: {r.summary()}"
            )
            for pattern in r.failures[:10]:
                lines.append(f"  failed branch {pattern}")
        _emit("\n".join(lines), args.output)
    return EXIT_OK if all(r.ok for r in reports) else EXIT_FAIL


def cmd_table(args) -> int:
    config = make_config(args)
    table = regen_table(config, args.stage)
    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        cols = ["bell_bits", "controller_bits", "state", "rotation"]
        writer.writerow(cols)
        for row in table.to_dict()["rows"]:
            writer.writerow([row[c] for c in cols])
        _emit(buf.getvalue(), args.output)
    else:
        _emit(table.render(args.format), args.output)
    return EXIT_OK


def cmd_audit(args) -> int:
    config = make_config(args)
    report = fidelity_audit(config, args.trials, config.seed, workers=args.workers)
    data = report.to_dict()
    if args.output:
        Path(args.output).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
    if args.plot:
        from .plotting import audit_figure

        audit_figure(
            report.fidelities,
            args.plot,
            title=f"m={config.m} n={config.n} {config.mode.value}",
        )
    if args.format == "json":
        sys.stdout.write(json.dumps(data, indent=2) + "\n")
    elif args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["trial", "fidelity"])
        for k, f in enumerate(report.fidelities):
            writer.writerow([k, repr(f)])
        sys.stdout.write(buf.getvalue())
    else:
        print(f"m={config.m} n={config.n} mode={config.mode.value} trials={report.trials}")
        print(f"min fidelity:  {report.min:.9f}")
        print(f"mean fidelity: {report.mean:.9f}")
        print(f"max fidelity:  {report.max:.9f}")
    return EXIT_OK


def _hinton_sources(args):
    if args.source:
        data = json.loads(Path(args.source).read_text())
        message = MessageState.from_dict(data["message"])
        result = [e for e in data["events"] if e["type"] == "result"][-1]
        rho_out = DensityMatrix(matrix_from_json(result["rho_out"]), validate=False)
    else:
        config = make_config(args)
        message = _load_message(args, config.n, config.seed)
        transcript, _ = run_protocol(config, message)
        rho_out = transcript.output
    rho_in = DensityMatrix.from_state(message.amplitudes)
    return [("rho_in", build_hinton(rho_in)), ("rho_out", build_hinton(rho_out))]


def cmd_hinton(args) -> int:
    blocks = _hinton_sources(args)
    fmt = args.format
    if fmt in ("png", "pdf"):
        if not args.output:
            raise UsageError(f"--format {fmt} needs -o/--output")
        from .plotting import hinton_figure

        hinton_figure(blocks, args.output)
    elif fmt == "svg":
        _emit(render_blocks(blocks), args.output)
    elif fmt == "json":
        data = {
            name: {
                "labels": list(d.basis_labels),
                "max_magnitude": d.max_magnitude,
                "re": d.signed("re").tolist(),
                "im": d.signed("im").tolist(),
            }
            for name, d in blocks
        }
        _emit(json.dumps(data, indent=2, ensure_ascii=False), args.output)
    else:
        text = "\n\n".join(f"{name}\n{render_text(d, args.width)}" for name, d in blocks)
        _emit(text, args.output)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _config_flags(p: argparse.ArgumentParser, require_size: bool = True):
    p.add_argument("-m", type=int, default=None if not require_size else 3, help="participants (>= 3)")
    p.add_argument("-n", type=int, default=None if not require_size else 1, help="message qubits (>= 1)")
    p.add_argument("--mode", choices=[m.value for m in Mode], default="standard")
    p.add_argument("--receiver", type=int, default=None, help="receiving participant (default m-1)")
    p.add_argument("--allocation", default=None, help='message-qubit holders, e.g. "0:0,1:1"')
    p.add_argument("--seed", type=int, default=None, help="default: $GHZT_SEED or 0")
    p.add_argument("--withhold", action="append", default=None, help="bits never forwarded, e.g. c2")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ghzt", description="Controlled teleportation over multipartite GHZ resources."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute one protocol run")
    _config_flags(p)
    p.add_argument("--message", help="message state JSON file")
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.add_argument("-o", "--output", help="write the transcript JSON here")
    p.add_argument("--no-assert", action="store_true", help="exit 0 even if fidelity < 1")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="check the receiver corrections on every branch")
    _config_flags(p, require_size=False)
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("table", help="regenerate the measurement/correction table")
    _config_flags(p)
    p.add_argument("--stage", choices=["pre", "post"], default="post")
    p.add_argument("--format", choices=["text", "md", "json", "csv"], default="text")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("audit", help="fidelity statistics over random messages")
    _config_flags(p)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--format", choices=["text", "json", "csv"], default="text")
    p.add_argument("-o", "--output", help="write the JSON report here")
    p.add_argument("--plot", help="write a matplotlib figure (png/pdf/svg) here")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("hinton", help="Hinton diagrams of rho_in and rho_out")
    _config_flags(p)
    p.add_argument("--from", dest="source", help="transcript JSON from `ghzt run -o`")
    p.add_argument("--message", help="message state JSON file")
    p.add_argument("--format", choices=["svg", "text", "json", "png", "pdf"], default="svg")
    p.add_argument("--width", type=int, default=None, help="text columns per panel")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_hinton)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "trials", 1) < 1:
        parser.error("--trials must be >= 1")
    try:
        return args.func(args)
    except (UsageError, GHZTError, ValueError, KeyError, OSError) as exc:
        print(f"ghzt {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
