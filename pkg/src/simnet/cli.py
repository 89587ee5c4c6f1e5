"""Command line over network bundles: validate, compile, infer,
recommend, evaluate, transform-multi.

Every subcommand is a thin adapter around the library. Exit codes are a
scripting contract: 0 success, 1 the model is invalid or inconsistent
(or the evidence impossible), 2 usage or IO trouble. --format json
output is canonical (sorted keys, trimmed floats, trailing newline) and
therefore byte-identical across runs on the same input.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from typing import Optional, Sequence

import numpy as np

from .bundle import (
    BundleError,
    CompiledModel,
    canonical_dumps,
    compile_bundle,
    load_bundle,
    network_id,
)
from .core import ImpossibleEvidenceError
from .decision import CostModel, inferential_loss, recommend_features
from .inference import Differential, Evidence, posterior
from .multidisease import AssessedNetwork, star_transform, transform_multihyp

EXIT_OK = 0
EXIT_MODEL = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """Bad arguments or unreadable input files (exit 2)."""


class ModelError(Exception):
    """The bundle or the evidence cannot be used (exit 1)."""


def _emit(text: str) -> None:
    sys.stdout.write(text)


def _warn(compiled: CompiledModel) -> None:
    for w in compiled.warnings:
        print(f"warning: {w}", file=sys.stderr)


def _read_text(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}")


def _read_json(path: str):
    text = _read_text(path)
    try:
        return json.loads(text)
    except ValueError as exc:
        raise UsageError(f"{path}: not valid JSON ({exc})")


def _compile(path: str) -> CompiledModel:
    text = _read_text(path)
    try:
        return compile_bundle(load_bundle(text))
    except BundleError as exc:
        raise ModelError(str(exc))


def _consistent(path: str) -> CompiledModel:
    compiled = _compile(path)
    if not compiled.verdict.is_consistent:
        raise ModelError(
            f"the network is inconsistent: {compiled.verdict.witness.describe()}"
        )
    return compiled


def _parse_observations(pairs, compiled: CompiledModel) -> Evidence:
    km = compiled.model.map
    seen: list[str] = []
    observations: list[tuple[str, str]] = []
    for raw in pairs or ():
        feature, sep, instance = raw.partition("=")
        if not sep or not feature or not instance:
            raise UsageError(f"--observe takes FEATURE=INSTANCE, got {raw!r}")
        if feature == km.distinguished or not km.has_variable(feature):
            raise UsageError(f"unknown feature {feature!r}")
        if instance not in km.variable(feature).instances:
            raise UsageError(f"{feature!r} has no instance {instance!r}")
        if feature in seen:
            raise UsageError(f"{feature!r} observed twice")
        seen.append(feature)
        observations.append((feature, instance))
    return Evidence(tuple(observations))


def _fmt_p(p: float) -> str:
    if 0.0 < p < 5e-5:
        return "0.00+"
    return f"{p:.4f}"


def _render(rows) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = [
        "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
        for row in rows
    ]
    return "\n".join(lines) + "\n"


def _repairs_json(verdict):
    return [{"edge": list(e), "arc": list(a)} for e, a in verdict.repairs]


def _invalid_report(exc: ModelError, fmt: str) -> int:
    diagnostics = str(exc).splitlines()
    if fmt == "json":
        _emit(canonical_dumps({"diagnostics": diagnostics, "status": "invalid"}))
    else:
        _emit("\n".join(diagnostics) + "\n")
    return EXIT_MODEL


def _status_report(compiled: CompiledModel, fmt: str) -> int:
    verdict = compiled.verdict
    nid = network_id(compiled.bundle)
    if fmt == "json":
        payload = {
            "status": verdict.status,
            "network_id": nid,
            "name": compiled.bundle.name,
            "warnings": list(compiled.warnings),
        }
        if not verdict.is_consistent:
            payload["witness"] = verdict.witness.describe()
            payload["repairs"] = _repairs_json(verdict)
        _emit(canonical_dumps(payload))
    else:
        lines = [
            f"network: {compiled.bundle.name} ({nid})",
            f"status: {verdict.status}",
        ]
        if not verdict.is_consistent:
            lines.append(f"witness: {verdict.witness.describe()}")
            lines.extend(
                f"repair: local map ({e[0]},{e[1]}): add arc {a[0]}->{a[1]}"
                for e, a in verdict.repairs
            )
        lines.extend(f"warning: {w}" for w in compiled.warnings)
        _emit("\n".join(lines) + "\n")
    return EXIT_OK if verdict.is_consistent else EXIT_MODEL


def cmd_validate(args) -> int:
    try:
        compiled = _compile(args.bundle)
    except ModelError as exc:
        return _invalid_report(exc, args.format)
    return _status_report(compiled, args.format)


def cmd_compile(args) -> int:
    try:
        compiled = _compile(args.bundle)
    except ModelError as exc:
        return _invalid_report(exc, args.format)
    if not compiled.verdict.is_consistent:
        return _status_report(compiled, args.format)
    bundle = compiled.bundle
    km = compiled.model.map
    payload = {
        "network_id": network_id(bundle),
        "name": bundle.name,
        "distinguished": bundle.distinguished,
        "hypotheses": list(bundle.hypotheses),
        "variables": [
            {"name": v.name, "instances": list(v.instances)} for v in bundle.variables
        ],
        "arcs": sorted(list(a) for a in km.arcs),
        "similarity_edges": [list(e) for e in bundle.network.graph.edges],
        "clusters": [list(c) for c in compiled.clusters.clusters],
        "warnings": list(compiled.warnings),
    }
    if args.format == "json":
        _emit(canonical_dumps(payload))
        return EXIT_OK
    lines = [
        f"network: {bundle.name} ({payload['network_id']})",
        f"distinguished: {bundle.distinguished}",
        "hypotheses: " + ", ".join(bundle.hypotheses),
        f"arcs: {len(payload['arcs'])}",
        f"clusters ({len(payload['clusters'])}):",
    ]
    lines.extend("  " + ", ".join(c) for c in payload["clusters"])
    lines.extend(f"warning: {w}" for w in compiled.warnings)
    _emit("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_infer(args) -> int:
    compiled = _consistent(args.bundle)
    evidence = _parse_observations(args.observe, compiled)
    try:
        diff = posterior(compiled.model, evidence)
    except ImpossibleEvidenceError as exc:
        raise ModelError(str(exc))
    _warn(compiled)
    if args.format == "json":
        payload = {
            "posterior": [{"hypothesis": l, "p": p} for l, p in diff.ranked]
        }
        _emit(canonical_dumps(payload))
    else:
        rows = [
            (str(rank), label, _fmt_p(p))
            for rank, (label, p) in enumerate(diff.ranked, start=1)
        ]
        _emit(_render(rows))
    return EXIT_OK


def cmd_recommend(args) -> int:
    compiled = _consistent(args.bundle)
    bundle = compiled.bundle
    if bundle.utilities is None:
        raise ModelError("the bundle declares no utilities; recommend needs them")
    if args.limit is not None and args.limit < 1:
        raise UsageError("--limit must be a positive integer")
    evidence = _parse_observations(args.observe, compiled)
    costs = bundle.costs if bundle.costs is not None else CostModel()
    recs = recommend_features(
        compiled.model,
        evidence,
        bundle.utilities,
        costs,
        limit=args.limit,
        network=bundle.network,
    )
    _warn(compiled)
    if args.format == "json":
        payload = [
            {"feature": r.feature, "voc": r.voc, "cost": r.cost, "net": r.net}
            for r in recs
        ]
        _emit(canonical_dumps(payload))
        return EXIT_OK
    if not recs:
        _emit("nothing worth observing\n")
        return EXIT_OK
    rows = [("feature", "voc", "cost", "net")]
    rows.extend(
        (r.feature, f"{r.voc:.4f}", f"{r.cost:.4f}", f"{r.net:.4f}") for r in recs
    )
    _emit(_render(rows))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    compiled = _consistent(args.bundle)
    bundle = compiled.bundle
    if bundle.utilities is None:
        raise ModelError("the bundle declares no utilities; evaluate needs them")
    cases_doc = _read_json(args.cases)
    if (
        not isinstance(cases_doc, dict)
        or set(cases_doc) != {"cases"}
        or not isinstance(cases_doc["cases"], list)
    ):
        raise UsageError(f'{args.cases}: expected {{"cases": [...]}}')
    gold_doc = _read_json(args.gold)
    if not isinstance(gold_doc, dict):
        raise UsageError(f"{args.gold}: expected an object keyed by case name")

    results: list[tuple[str, float]] = []
    for k, case in enumerate(cases_doc["cases"]):
        if (
            not isinstance(case, dict)
            or not isinstance(case.get("name"), str)
            or not isinstance(case.get("observations"), dict)
        ):
            raise UsageError(f"{args.cases}: case {k} needs a name and observations")
        name = case["name"]
        try:
            evidence = Evidence(
                tuple((str(f), str(i)) for f, i in case["observations"].items())
            )
            model_diff = posterior(compiled.model, evidence)
        except ImpossibleEvidenceError as exc:
            raise ModelError(f"case {name!r}: {exc}")
        except ValueError as exc:
            raise UsageError(f"case {name!r}: {exc}")
        gold_case = gold_doc.get(name)
        if not isinstance(gold_case, dict):
            raise UsageError(f"{args.gold}: no gold differential for case {name!r}")
        try:
            gold_diff = Differential(
                tuple((h, float(gold_case[h])) for h in bundle.hypotheses)
            )
        except KeyError as exc:
            raise UsageError(
                f"{args.gold}: case {name!r} is missing hypothesis {exc.args[0]!r}"
            )
        except (TypeError, ValueError) as exc:
            raise UsageError(f"{args.gold}: case {name!r}: {exc}")
        results.append((name, inferential_loss(gold_diff, model_diff, bundle.utilities)))

    if not results:
        raise UsageError(f"{args.cases}: no cases to evaluate")
    losses = np.array([loss for _, loss in results], dtype=float)
    mean = float(losses.mean())
    sd = float(losses.std())
    _warn(compiled)
    if args.format == "json":
        payload = {
            "cases": [{"name": n, "loss": l} for n, l in results],
            "mean": mean,
            "sd": sd,
        }
        _emit(canonical_dumps(payload))
        return EXIT_OK
    rows = [("case", "loss")]
    rows.extend((n, f"{l:.4f}") for n, l in results)
    rows.append(("mean", f"{mean:.4f}"))
    rows.append(("sd", f"{sd:.4f}"))
    _emit(_render(rows))
    return EXIT_OK


def cmd_transform_multi(args) -> int:
    compiled = _consistent(args.bundle)
    bundle = compiled.bundle
    if args.normal not in bundle.hypotheses:
        raise UsageError(f"--normal {args.normal!r} is not a hypothesis of the bundle")
    try:
        assessed = AssessedNetwork(bundle.network, compiled.model)
        star = star_transform(assessed, normal=args.normal)
        multi = transform_multihyp(star, normal=args.normal)
    except ValueError as exc:
        raise ModelError(str(exc))
    km = multi.model.map
    tables = {}
    for v in km.variables:
        t = multi.model.table(v.name)
        tables[v.name] = {
            "parents": list(t.parents),
            "rows": [[float(x) for x in row] for row in np.asarray(t.rows)],
        }
    document = {
        "metadata": {
            "name": bundle.name,
            "version": bundle.version,
            "description": f"independent-disease map around {multi.normal_label!r}",
        },
        "normal": multi.normal_label,
        "diseases": list(multi.diseases),
        "variables": [
            {"name": v.name, "instances": list(v.instances)} for v in km.variables
        ],
        "arcs": sorted(list(a) for a in km.arcs),
        "tables": tables,
        "assumed_assertions": list(multi.assumed_assertions),
    }
    text = canonical_dumps(document)
    _warn(compiled)
    if args.output:
        try:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise UsageError(f"cannot write {args.output}: {exc.strerror or exc}")
        lines = [f"wrote {args.output}", "diseases: " + ", ".join(multi.diseases)]
        lines.extend(f"assumed: {a}" for a in multi.assumed_assertions)
        _emit("\n".join(lines) + "\n")
    else:
        _emit(text)
    return EXIT_OK


def _add_format(parser) -> None:
    parser.add_argument(
        "--format",
        choices=("table", "json"),
        default="table",
        help="output style (json is canonical and byte-stable)",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simnet",
        description="diagnostic toolkit for similarity-network bundles",
    )
    parser.add_argument(
        "--seed",
        type=int,
        default=None,
        help="seed the shared random generators before running",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check structure and consistency")
    p.add_argument("bundle", help="path to a bundle document")
    _add_format(p)
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("compile", help="build the global model and report its shape")
    p.add_argument("bundle", help="path to a bundle document")
    _add_format(p)
    p.set_defaults(handler=cmd_compile)

    p = sub.add_parser("infer", help="posterior differential under observations")
    p.add_argument("bundle", help="path to a bundle document")
    p.add_argument(
        "--observe",
        action="append",
        metavar="FEATURE=INSTANCE",
        default=[],
        help="observed finding; repeatable",
    )
    _add_format(p)
    p.set_defaults(handler=cmd_infer)

    p = sub.add_parser("recommend", help="features worth observing next")
    p.add_argument("bundle", help="path to a bundle document")
    p.add_argument(
        "--observe",
        action="append",
        metavar="FEATURE=INSTANCE",
        default=[],
        help="observed finding; repeatable",
    )
    p.add_argument("--limit", type=int, default=None, help="most valuable N only")
    _add_format(p)
    p.set_defaults(handler=cmd_recommend)

    p = sub.add_parser(
        "evaluate", help="inferential loss against gold differentials"
    )
    p.add_argument("bundle", help="path to a bundle document")
    p.add_argument("--cases", required=True, help="case file with observations")
    p.add_argument("--gold", required=True, help="gold differentials by case name")
    _add_format(p)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser(
        "transform-multi",
        help="rewrite a star-shaped network over independent binary diseases",
    )
    p.add_argument("bundle", help="path to a bundle document")
    p.add_argument(
        "--normal",
        default="NORMAL",
        help="hypothesis at the centre of the star (default NORMAL)",
    )
    p.add_argument("-o", "--output", default=None, help="write the document here")
    p.set_defaults(handler=cmd_transform_multi)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if isinstance(exc.code, int):
            return exc.code
        return EXIT_OK if exc.code is None else EXIT_USAGE
    if args.seed is not None:
        random.seed(args.seed)
        np.random.seed(args.seed % (2**32))
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
