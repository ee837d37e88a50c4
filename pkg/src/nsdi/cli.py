"""Command-line entry point: ``nsdi <command> ...``.

Exit codes: 0 success, 1 domain violation, 2 I/O or parse error, 3 budget
exceeded.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import formats
from .devices import Device, validate
from .ensembles import BudgetExceeded, CompleteExtension, build_complete_extension
from .formats import FormatError
from .norms import CcdState, ideal_state, ns_norm_ccd, security_report, with_abort
from .polytope import nonlocality_cost, nonlocality_fraction
from .squash import (QUANTIFIERS, BoundCurve, BoundOptions, compute_curve, family_device,
                     lower_convex_hull, nsq_upper)

EXIT_OK, EXIT_DOMAIN, EXIT_IO, EXIT_BUDGET = 0, 1, 2, 3
FAMILIES = ("iso", "hrw-a", "hrw-b", "hrw-c", "hrw-d")
MAX_DENOMINATOR = 10**6


class DomainError(ValueError):
    pass


def _emit(obj) -> None:
    print(json.dumps(obj, indent=1, default=formats.number_to_json))


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as ex:
        raise FormatError(f"cannot write {path}: {ex}") from ex


def _exact_device(device: Device) -> Device:
    """Rational copy of a device; float input is rounded to nearby fractions."""
    if device.exact:
        return device
    ex = device.as_exact(MAX_DENOMINATOR)
    if not validate(ex).valid:
        raise DomainError("float device does not round to a valid rational device; "
                          "give probabilities as strings")
    return ex


def _require_valid(device: Device) -> None:
    rep = validate(device)
    if not rep.valid:
        raise DomainError(f"device is not a valid non-signaling box (max violation {rep.worst_violation:.3g})")


# --------------------------------------------------------------------------
# commands


def cmd_validate(args) -> int:
    device = formats.load_device(args.device, check_norm=False)
    rep = validate(device)
    _emit({"valid": rep.valid, "normalized": rep.normalized, "nonsignaling": rep.nonsignaling,
           "max_violation": rep.worst_violation, "exact": device.exact})
    print("valid" if rep.valid else f"invalid (max violation {rep.worst_violation:.6g})")
    return EXIT_OK if rep.valid else EXIT_DOMAIN


def _options(args) -> BoundOptions:
    return BoundOptions(restarts=args.restarts, seed=args.seed, top_k=args.top_k,
                        dice_mix=args.dice_mix)


def cmd_bound(args) -> int:
    if (args.family is None) == (args.device is None):
        raise DomainError("give exactly one of --family and --device")
    opts = _options(args)
    if args.family is not None:
        grid = formats.parse_grid(args.grid)
        for g in grid:
            try:
                family_device(args.family, g)
            except ValueError as ex:
                raise DomainError(f"{args.family} is undefined at {float(g):g}: {ex}") from ex
        curve = compute_curve(args.family, grid, opts, threads=args.threads)
    else:
        device = _exact_device(formats.load_device(args.device))
        _require_valid(device)
        b = nsq_upper(device, opts=opts)
        curve = BoundCurve("device", [0], {q: np.array([b.values[q]]) for q in QUANTIFIERS},
                           certified=[b.certified_zero], meta={"points": [b.meta]})
        finite = [q for q in QUANTIFIERS if not np.isnan(curve.series[q]).any()]
        lower_convex_hull(curve, finite)
        if b.certified_zero:
            curve.lch[0] = 0.0
    overlay = formats.read_overlay(args.overlay) if args.overlay else None
    _write(args.out, formats.curve_csv(curve, overlay))
    if args.gnuplot:
        _write(args.gnuplot, formats.gnuplot_script(args.out or "bound.csv", overlay is not None,
                                                    args.family or args.device))
    if args.report:
        report = {
            "family": args.family, "device": args.device, "grid": [str(g) for g in curve.grid],
            "options": vars(opts),
            "certified_zero": [bool(c) for c in curve.certified],
            "points": curve.meta["points"],
        }
        _write(args.report, json.dumps(report, indent=1, default=str) + "\n")
    return EXIT_OK


def cmd_ce(args) -> int:
    device = _exact_device(formats.load_device(args.device))
    _require_valid(device)
    resume = None
    if args.resume:
        try:
            resume = json.loads(Path(args.resume).read_text())
        except (OSError, json.JSONDecodeError) as ex:
            raise FormatError(f"cannot read checkpoint {args.resume}: {ex}") from ex
    note = None
    try:
        ce = build_complete_extension(device, budget=args.budget, resume=resume)
        partial = False
    except BudgetExceeded as ex:
        ce = CompleteExtension(device, ex.found, {"scanned": ex.checkpoint["next_index"]})
        partial = True
        cp_path = args.checkpoint or (args.out + ".checkpoint.json")
        _write(cp_path, json.dumps(ex.checkpoint, indent=1) + "\n")
        note = f"budget exhausted; resume with --resume {cp_path}"
    except ValueError as ex:
        if "checkpoint" in str(ex):
            raise FormatError(str(ex)) from ex
        raise DomainError(str(ex)) from ex
    doc = formats.ce_to_dict(ce, partial, note)
    if args.reference is not None:
        doc["summary"]["reference_Z"] = args.reference
        doc["summary"]["matches_reference"] = ce.z_size == args.reference
    _write(args.out, json.dumps(doc, indent=1) + "\n")
    print(json.dumps(doc["summary"]))
    return EXIT_BUDGET if partial else EXIT_OK


def cmd_security(args) -> int:
    state = formats.load_ccd(args.ccd)
    try:
        state.check()
    except ValueError as ex:
        raise DomainError(str(ex)) from ex
    p_abort = Fraction(args.p_abort) if args.p_abort is not None else Fraction(0)
    if not 0 <= p_abort <= 1:
        raise DomainError("--p-abort must lie in [0, 1]")
    rep = security_report(state, p_abort)
    out = rep.as_dict()
    if args.abort_branch and p_abort:
        out["eps_security_with_abort_branch"] = float(
            ns_norm_ccd(with_abort(state, p_abort), with_abort(ideal_state(state), p_abort)))
    _emit(out)
    return EXIT_OK


def _load_for_norm(path) -> CcdState:
    doc = formats._read_json(path)
    if "classical_vars" in doc:
        return formats.ccd_from_dict(doc)
    dev = formats.device_from_dict(doc)
    # a device is a cc-d state with trivial classical registers, read with
    # its joint input as z and joint output as e
    n_in = int(np.prod(dev.input_sizes))
    n_out = int(np.prod(dev.output_sizes))
    return CcdState(dev.probs.reshape(n_in, 1, 1, 1, n_out))


def cmd_norm(args) -> int:
    a, b = _load_for_norm(args.a), _load_for_norm(args.b)
    if a.probs.shape != b.probs.shape:
        raise DomainError("the two inputs have different alphabets")
    for s in (a, b):
        try:
            s.check()
        except ValueError as ex:
            raise DomainError(str(ex)) from ex
    v = ns_norm_ccd(a, b)
    _emit({"ns_norm": float(v), "exact": str(v) if a.exact and b.exact else None})
    return EXIT_OK


def cmd_fraction(args) -> int:
    device = formats.load_device(args.device)
    if device.shape != ((2, 2), (2, 2)):
        raise DomainError("non-locality fraction is implemented for (2,2,2,2) devices")
    _require_valid(device)
    res = nonlocality_fraction(device)
    _emit({"C": float(res.value), "C_exact": str(res.value) if device.exact else None,
           "cost": float(nonlocality_cost(device)), "vertex": res.vertex,
           "witness": {l: formats.number_to_json(w) if isinstance(w, Fraction) else float(w)
                       for l, w in zip(res.witness.labels, res.witness.weights)}})
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nsdi", description="Non-signaling device-independent key bounds.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check normalization and non-signaling of a device")
    p.add_argument("device")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("bound", help="upper bounds on the key rate along a family or for one device")
    p.add_argument("--family", choices=FAMILIES)
    p.add_argument("--device")
    p.add_argument("--grid", default="0:0.25:0.005")
    p.add_argument("--out")
    p.add_argument("--overlay")
    p.add_argument("--gnuplot")
    p.add_argument("--report")
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--top-k", type=int, default=3)
    p.add_argument("--dice-mix", action="store_true")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("ce", help="enumerate minimal ensembles (complete extension)")
    p.add_argument("--device", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--budget", type=int)
    p.add_argument("--resume")
    p.add_argument("--checkpoint")
    p.add_argument("--reference", type=int, help="expected |Z| recorded in the summary")
    p.set_defaults(func=cmd_ce)

    p = sub.add_parser("security", help="secrecy, correctness and security of a cc-d state")
    p.add_argument("--ccd", required=True)
    p.add_argument("--p-abort")
    p.add_argument("--abort-branch", action="store_true")
    p.set_defaults(func=cmd_security)

    p = sub.add_parser("norm", help="distance between two cc-d states or devices")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(func=cmd_norm)

    p = sub.add_parser("fraction", help="non-locality fraction of a (2,2,2,2) device")
    p.add_argument("--device", required=True)
    p.set_defaults(func=cmd_fraction)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, OSError) as ex:
        print(f"error: {ex}", file=sys.stderr)
        return EXIT_IO
    except (DomainError, ValueError) as ex:
        print(f"error: {ex}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
