"""Command line front end: ``fairhedge {validate,hedge,oracle,perturb,asymptotics,example}``.

Exit status: 0 success, 2 invalid input, 3 numerical failure or failed
validation, 4 unexpected internal error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import fixtures, modelfile
from .errors import ModelError, NumericalError
from .hedging import fs_decompose, interest_rate_fair_price
from .market import adapted_to_mapping
from .numeraire import build_numeraire
from .oracle import check_against_recursion, solve_global
from .perturbation import VARIANTS, asymptotic_corrections, build_family, finite_difference_validate, select_variant, stability_sweep

EXIT_OK, EXIT_INPUT, EXIT_VALIDATION, EXIT_INTERNAL = 0, 2, 3, 4
ORACLE_TOL = 1e-8
REFERENCE_TOL = 1e-9


# ----------------------------------------------------------------------
# rendering

def _num(x, digits):
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return json.dumps(str(x))
    return format(x, f".{digits}g")


def render_machine(obj) -> str:
    """Deterministic JSON text: sorted keys, 17 significant digits."""

    def emit(o, indent):
        pad = "  " * indent
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f'{pad}  {json.dumps(str(k))}: {emit(o[k], indent + 1)}' for k in sorted(o)]
            return "{\n" + ",\n".join(items) + f"\n{pad}}}"
        if isinstance(o, (list, tuple)):
            return "[" + ", ".join(emit(v, indent) for v in o) + "]"
        if isinstance(o, (bool, np.bool_)):
            return "true" if o else "false"
        if o is None:
            return "null"
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            return _num(o, 17)
        return json.dumps(str(o))

    return emit(obj, 0) + "\n"


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "yes" if v else "no"
    if isinstance(v, (float, np.floating)):
        return _num(v, 6)
    if isinstance(v, (list, tuple)):
        return " ".join(_cell(x) for x in v)
    return "-" if v is None else str(v)


def render_table(report: dict) -> str:
    lines = [f"command: {report['command']}", f"input sha256: {report['input_digest']}"]
    for section, body in report["outputs"].items():
        lines.append("")
        lines.append(f"[{section}]")
        rows = []

        def walk(prefix, o):
            if isinstance(o, dict):
                for k, v in o.items():
                    walk(f"{prefix}.{k}" if prefix else str(k), v)
            else:
                rows.append((prefix, _cell(o)))

        walk("", body)
        width = max((len(k) for k, _ in rows), default=0)
        lines.extend(f"  {k.ljust(width)}  {v}" for k, v in rows)
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------
# inputs

def _load(args):
    path = Path(args.model)
    if not path.exists() and path.suffix == ".json" and path.stem in fixtures.MODELS and path.parent == Path("."):
        tree, H = fixtures.MODELS[path.stem]()
        model = modelfile.Model(tree, H)
    else:
        model = modelfile.load_model(path)
    eta, label = model.eta, "model file" if model.eta is not None else "bank"
    choice = getattr(args, "numeraire", None)
    if choice is not None:
        if choice in fixtures.GENERATORS:
            eta, label = fixtures.GENERATORS[choice](model.tree), choice
        else:
            eta, label = modelfile.load_generator(model.tree, choice), str(choice)
    if eta is None:
        eta = model.tree.predictable()
    rate = getattr(args, "rate", None)
    if rate is None:
        rate = model.rate
    elif not rate >= 0:
        raise ModelError(f"rate must be non-negative, got {rate!r}")
    return model, eta, label, rate


def _digest(model, eta, extra=()) -> str:
    doc = modelfile.to_document(modelfile.Model(model.tree, model.H, eta, model.rate))
    blob = json.dumps([doc, list(extra)], sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _eps_list(text):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ModelError(f"cannot parse eps list {text!r}") from None
    if not vals:
        raise ModelError("eps list is empty")
    return vals


def _fixture_reference(model, label):
    """Known values for the built-in trinomial market, or None."""
    tree, H = fixtures.trinomial()
    same = (
        model.tree.horizon == 1 and model.tree.assets == 1 and model.tree.n_leaves == 3
        and np.array_equal(model.tree.prices[1], tree.prices[1])
        and np.array_equal(model.tree.prices[0], tree.prices[0])
        and np.allclose(model.tree.cond_prob[1], tree.cond_prob[1], rtol=0, atol=1e-15)
        and np.array_equal(model.H, H)
    )
    if not same:
        return None
    if label == "bank":
        return {"published": fixtures.BANK_VALUES}
    if label == "half-share":
        return {"published": fixtures.PUBLISHED_HALF_SHARE}
    return None


def _compare(published, V0, xi1):
    xi_ref, V0_ref = (float(Fraction(x)) for x in published)
    return {
        "xi_published": xi_ref,
        "xi_recomputed": xi1,
        "V0_published": V0_ref,
        "V0_recomputed": V0,
        "match": abs(xi1 - xi_ref) <= REFERENCE_TOL and abs(V0 - V0_ref) <= REFERENCE_TOL,
    }


# ----------------------------------------------------------------------
# commands

def cmd_validate(args):
    model, eta, label, rate = _load(args)
    build_numeraire(model.tree, eta)
    t = model.tree
    return model, eta, {
        "model": {
            "horizon": t.horizon,
            "assets": t.assets,
            "nodes": len(t.nodes),
            "leaves": t.n_leaves,
            "numeraire": label,
            "rate": rate,
            "valid": True,
        }
    }


def cmd_hedge(args):
    model, eta, label, rate = _load(args)
    tree = model.tree
    spec = build_numeraire(tree, eta)
    dec = fs_decompose(tree, spec, model.H)
    out = {
        "summary": {"V0": dec.V0, "numeraire": label},
        "xi": dec.xi.to_mapping(tree),
        "V": adapted_to_mapping(tree, dec.V),
        "L": adapted_to_mapping(tree, dec.L),
        "N": adapted_to_mapping(tree, spec.N),
        "diagnostics": dict(sorted(dec.diagnostics.items())),
    }
    ref = _fixture_reference(model, label)
    if ref is not None:
        out["reference"] = _compare(ref["published"], dec.V0, float(dec.xi[1][0, 0]))
    if rate is not None:
        V0r, xir = interest_rate_fair_price(tree, model.H, rate)
        out["interest_rate"] = {
            "rate": rate,
            "V0": V0r,
            "xi": xir.to_mapping(tree),
            "V0_minus_numeraire_V0": V0r - dec.V0,
        }
    return model, eta, out


def cmd_oracle(args):
    model, eta, label, rate = _load(args)
    tree = model.tree
    spec = build_numeraire(tree, eta)
    sol = solve_global(tree, spec, model.H)
    dec = fs_decompose(tree, spec, model.H)
    cmp = check_against_recursion(tree, spec, model.H, dec, sol)
    out = {
        "oracle": {"V0": sol.V0, "rss": sol.rss, "replicable": sol.replicable, "rank": sol.rank,
                   "normal_residual": sol.normal_residual, "numeraire": label},
        "oracle_xi": sol.xi.to_mapping(tree),
        "recursion": {"V0": dec.V0},
        "recursion_xi": dec.xi.to_mapping(tree),
        "comparison": {
            "V0_deviation": cmp.V0_deviation,
            "xi_deviation": cmp.xi_deviation,
            "max_deviation": cmp.max_deviation,
            "recursion_objective": cmp.recursion_objective,
            "oracle_objective": cmp.oracle_objective,
            "tolerance": args.tol,
            "agree": cmp.max_deviation <= args.tol,
        },
    }
    return model, eta, out, not out["comparison"]["agree"]


def cmd_perturb(args):
    model, eta, label, rate = _load(args)
    tree = model.tree
    family = build_family(tree, eta)
    eps = _eps_list(args.eps)
    rep = stability_sweep(tree, family, model.H, eps)
    out = {
        "family": {"numeraire": label, "eps_lower": family.eps_lower, "eps_upper": family.eps_upper},
        "deviations": {k: {_num(e, 6): float(v) for e, v in zip(rep.eps, vals)} for k, vals in rep.deviations.items()},
        "orders": dict(rep.orders, overall=rep.order),
        "monotone": rep.monotone,
    }
    return model, eta, out


def cmd_asymptotics(args):
    model, eta, label, rate = _load(args)
    tree = model.tree
    family = build_family(tree, eta)
    eps = _eps_list(args.eps)
    if args.ctilde_variant == "auto":
        corr = select_variant(tree, family, model.H, eps)
        report = corr.validation
    else:
        corr = asymptotic_corrections(tree, family, model.H, args.ctilde_variant)
        report = finite_difference_validate(tree, family, model.H, corr, eps)
        corr.validation, corr.trusted = report, report.ok
    out = {
        "corrections": {"V0_prime": corr.V0_prime, "residual_drift": corr.residual_drift,
                        "variant": corr.variant, "requested": args.ctilde_variant,
                        "trusted": corr.trusted, "numeraire": label},
        "xi_prime": corr.xi_prime.to_mapping(tree),
        "L_prime": adapted_to_mapping(tree, corr.L_prime),
        "validation": {
            q: {"deviation": {_num(e, 6): float(v) for e, v in zip(report.eps, report.deviations[q])},
                "orders": [float(o) for o in report.orders[q]],
                "passed": report.passed[q]}
            for q in report.deviations
        },
    }
    return model, eta, out, not report.ok


def cmd_example(args):
    tree, H = fixtures.MODELS[args.name]()
    eta = fixtures.GENERATORS[args.numeraire](tree) if args.numeraire else None
    text = modelfile.dumps(modelfile.Model(tree, H, eta, args.rate))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return None


COMMANDS = {
    "validate": cmd_validate,
    "hedge": cmd_hedge,
    "oracle": cmd_oracle,
    "perturb": cmd_perturb,
    "asymptotics": cmd_asymptotics,
    "example": cmd_example,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairhedge", description="Fair prices and hedges under a tradable numeraire.")
    sub = parser.add_subparsers(dest="command", required=True)

    def model_cmd(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--model", required=True, help="model file (JSON)")
        p.add_argument("--numeraire", help="generator file or built-in name: " + ", ".join(fixtures.GENERATORS))
        p.add_argument("--format", choices=("table", "machine"), default="table")
        return p

    model_cmd("validate", "check a model file")
    p = model_cmd("hedge", "fair price, strategy and residual martingale")
    p.add_argument("--rate", type=float, help="also report the constant-rate price (one period)")
    p = model_cmd("oracle", "compare the recursion with the global least-squares solution")
    p.add_argument("--tol", type=float, default=ORACLE_TOL)
    p = model_cmd("perturb", "stability sweep over a numeraire family 1 + eps N'")
    p.add_argument("--eps", default="1e-1,1e-2,1e-3,1e-4")
    p = model_cmd("asymptotics", "first-order corrections checked against finite differences")
    p.add_argument("--eps", default="1e-3,1e-4")
    p.add_argument("--ctilde-variant", choices=("auto",) + VARIANTS, default="auto")

    p = sub.add_parser("example", help="write a built-in model file")
    p.add_argument("name", choices=sorted(fixtures.MODELS))
    p.add_argument("--numeraire", choices=sorted(fixtures.GENERATORS))
    p.add_argument("--rate", type=float)
    p.add_argument("--out")
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        result = COMMANDS[args.command](args)
        if result is None:
            return EXIT_OK
        model, eta, outputs, *flag = result
        failed = bool(flag and flag[0])
        report = {
            "command": " ".join(["fairhedge"] + argv),
            "input_digest": _digest(model, eta, [args.command] + sorted(
                f"{k}={v}" for k, v in vars(args).items() if k not in ("model", "numeraire", "format", "command"))),
            "outputs": outputs,
        }
        text = render_machine(report) if args.format == "machine" else render_table(report)
        sys.stdout.write(text)
        return EXIT_VALIDATION if failed else EXIT_OK
    except ModelError as exc:
        print(f"fairhedge: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"fairhedge: numerical error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001
        print(f"fairhedge: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
