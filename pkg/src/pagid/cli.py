"""Command-line front end.

Every pipeline stage is a subcommand of ``pagc``: graph validation and
transforms, separation queries, skeleton discovery, identification,
calculus/adjustment checks, witness construction, estimand evaluation and
model generation.  Exit codes: 0 on success, 1 on a domain-level negative
result (identification Fail, rule not applicable), 2 on usage or parse
errors.  ``--json`` switches any subcommand to structured output.
"""

from __future__ import annotations

import json
import os
import random
import sys

import click

from . import oracle as oc
from .fci import distribution_oracle, fci as run_fci, graph_oracle
from .graph import (
    ARROW,
    CIRCLE,
    GraphClass,
    TAIL,
    MixedGraph,
    ParseError,
    format_graph,
    parse_graph,
    validate,
)
from .identify import (
    ExchangeFail,
    FailCertificate,
    adjustment_check,
    calculus_check,
    causal_relation,
    format_estimand,
    hedge_witness,
    parse_estimand,
    scidp,
    sidp,
)
from .manipulate import format_manipulated, manipulate
from .represent import canonical_isadmg, enumerate_mags, mag_of, marginalize_latents
from .separate import d_separated, id_separated, open_walk, walk_nodes

_CLASSES = {c.value: c for c in GraphClass}


def _fail(msg: str, code: int = 2):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _load_graph(path: str) -> MixedGraph:
    try:
        with open(path) as fh:
            return parse_graph(fh.read())
    except (OSError, ParseError, ValueError) as exc:
        _fail(str(exc))


def _split(value: str) -> list[str]:
    return sorted({x for x in (value or "").split(",") if x})


def _graph_json(g: MixedGraph) -> dict:
    return {
        "nodes": {v: k.value for v, k in g.nodes.items()},
        "edges": sorted(
            f"{e.a} {e.mark_a.value}-{e.mark_b.value} {e.b}" for e in g.edges
        ),
    }


_DOT_HEAD = {TAIL: "none", ARROW: "normal", CIRCLE: "odot"}


def _dot(g: MixedGraph) -> str:
    lines = ["digraph g {", "  edge [dir=both];"]
    shapes = {"input": "box", "selection": "diamond", "latent": "ellipse"}
    for v, k in g.nodes.items():
        attrs = f' [shape={shapes[k.value]}]' if k.value in shapes else ""
        lines.append(f'  "{v}"{attrs};')
    for e in sorted(g.edges):
        lines.append(
            f'  "{e.a}" -> "{e.b}" [arrowtail={_DOT_HEAD[e.mark_a]},'
            f" arrowhead={_DOT_HEAD[e.mark_b]}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def _emit_graph(g: MixedGraph, as_json: bool, as_dot: bool, out=None):
    if as_json:
        text = json.dumps({"schema": 1, "graph": _graph_json(g)}, sort_keys=True)
    elif as_dot:
        text = _dot(g).rstrip("\n")
    else:
        text = format_graph(g).rstrip("\n")
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        click.echo(text)


def _seed(value):
    env = os.environ.get("PAGC_SEED")
    if env is not None:
        return int(env)
    return value


@click.group()
def main():
    """Causal identification from partial ancestral graphs."""


def graph_option(f):
    return click.option("--graph", "graph_file", required=True,
                        type=click.Path(exists=True, dir_okay=False))(f)


json_option = click.option("--json", "as_json", is_flag=True)
dot_option = click.option("--dot", "as_dot", is_flag=True)


@main.command("validate")
@graph_option
@click.option("--class", "cls", type=click.Choice(sorted(_CLASSES)),
              default="raw", show_default=True)
@json_option
def validate_cmd(graph_file, cls, as_json):
    """Check a graph against the invariants of a graph class."""
    g = _load_graph(graph_file)
    problems = validate(g, _CLASSES[cls])
    if as_json:
        click.echo(json.dumps(
            {"schema": 1, "valid": not problems, "problems": problems},
            sort_keys=True))
    else:
        for p in problems:
            click.echo(p)
        if not problems:
            click.echo("valid")
    sys.exit(0 if not problems else 1)


@main.command("mag")
@graph_option
@json_option
@dot_option
@click.option("--out", type=click.Path(dir_okay=False))
def mag_cmd(graph_file, as_json, as_dot, out):
    """Project a represented graph onto its maximal ancestral graph."""
    g = _load_graph(graph_file)
    try:
        _emit_graph(mag_of(g), as_json, as_dot, out)
    except ValueError as exc:
        _fail(str(exc))


@main.command("canonical")
@graph_option
@json_option
@dot_option
@click.option("--out", type=click.Path(dir_okay=False))
def canonical_cmd(graph_file, as_json, as_dot, out):
    """Canonical represented graph of a maximal ancestral graph."""
    g = _load_graph(graph_file)
    try:
        _emit_graph(canonical_isadmg(g), as_json, as_dot, out)
    except ValueError as exc:
        _fail(str(exc))


@main.command("marginalize")
@graph_option
@click.option("--nodes", default="", help="latent nodes to remove (default all)")
@json_option
@dot_option
@click.option("--out", type=click.Path(dir_okay=False))
def marginalize_cmd(graph_file, nodes, as_json, as_dot, out):
    """Eliminate latent nodes from a represented graph."""
    g = _load_graph(graph_file)
    drop = _split(nodes) or None
    try:
        _emit_graph(marginalize_latents(g, drop), as_json, as_dot, out)
    except (ValueError, KeyError) as exc:
        _fail(str(exc))


@main.command("manipulate")
@graph_option
@click.option("--soft", default="")
@click.option("--hard", default="")
@click.option("--class", "cls", type=click.Choice(sorted(_CLASSES)), default=None)
@json_option
def manipulate_cmd(graph_file, soft, hard, cls, as_json):
    """Apply soft and hard manipulations and print the result."""
    g = _load_graph(graph_file)
    try:
        mg = manipulate(g, _split(soft), _split(hard),
                        _CLASSES[cls] if cls else None)
    except ValueError as exc:
        _fail(str(exc))
    if as_json:
        click.echo(json.dumps({
            "schema": 1,
            "graph": _graph_json(mg.graph),
            "soft": sorted(mg.soft_targets),
            "hard": sorted(mg.hard_targets),
        }, sort_keys=True))
    else:
        click.echo(format_manipulated(mg).rstrip("\n"))


@main.command("sep")
@graph_option
@click.option("--soft", default="")
@click.option("--hard", default="")
@click.option("--a", "a_set", required=True)
@click.option("--b", "b_set", required=True)
@click.option("--c", "c_set", default="")
@click.option("--mode", type=click.Choice(["id", "d"]), default="id",
              show_default=True)
@click.option("--explain", is_flag=True)
@json_option
def sep_cmd(graph_file, soft, hard, a_set, b_set, c_set, mode, explain, as_json):
    """Separation query, optionally after manipulation."""
    g = _load_graph(graph_file)
    try:
        mg = manipulate(g, _split(soft), _split(hard)) if (soft or hard) else g
        A, B, C = _split(a_set), _split(b_set), _split(c_set)
        if mode == "id":
            sep = id_separated(mg, A, B, C)
        else:
            sep = d_separated(mg, A, B, C)
    except (ValueError, KeyError) as exc:
        _fail(str(exc))
    walk = None
    if explain and not sep and mode == "id":
        w = open_walk(mg, A, B, C)
        walk = walk_nodes(w) if w else None
    if as_json:
        click.echo(json.dumps(
            {"schema": 1, "separated": sep, "walk": walk}, sort_keys=True))
    else:
        click.echo("separated" if sep else "connected")
        if walk:
            click.echo("walk: " + " ".join(walk))
    sys.exit(0)


@main.command("fci")
@click.option("--oracle", "oracle_spec", required=True,
              help="graph:FILE or scm:FILE")
@click.option("--out", type=click.Path(dir_okay=False))
@click.option("--trace", is_flag=True)
@json_option
@dot_option
def fci_cmd(oracle_spec, out, trace, as_json, as_dot):
    """Recover a partial graph from an independence oracle."""
    kind, _, path = oracle_spec.partition(":")
    if kind not in ("graph", "scm") or not path:
        _fail("--oracle must be graph:FILE or scm:FILE")
    try:
        if kind == "graph":
            orc = graph_oracle(_load_graph(path))
        else:
            with open(path) as fh:
                orc = distribution_oracle(oc.parse_scm(fh.read()))
        log = [] if trace else None
        p = run_fci(orc, trace=log)
    except (OSError, ValueError) as exc:
        _fail(str(exc))
    if trace and not as_json:
        for line in log:
            click.echo(line, err=True)
    if as_json:
        payload = {"schema": 1, "graph": _graph_json(p)}
        if trace:
            payload["trace"] = log
        click.echo(json.dumps(payload, sort_keys=True))
        if out:
            with open(out, "w") as fh:
                fh.write(format_graph(p))
    else:
        _emit_graph(p, False, as_dot, out)


def _emit_estimand(res, as_json, extra=None):
    failed = isinstance(res, (FailCertificate, ExchangeFail))
    if as_json:
        payload = {"schema": 1, "ok": not failed}
        payload["certificate" if failed else "estimand"] = (
            str(res) if failed else format_estimand(res)
        )
        payload.update(extra or {})
        click.echo(json.dumps(payload, sort_keys=True))
    else:
        click.echo(str(res) if failed else format_estimand(res))
    sys.exit(1 if failed else 0)


@main.command("sidp")
@graph_option
@click.option("--a", "a_set", required=True)
@click.option("--b", "b_set", required=True)
@click.option("--class", "cls", type=click.Choice(sorted(_CLASSES)), default=None)
@json_option
def sidp_cmd(graph_file, a_set, b_set, cls, as_json):
    """Identify the kernel of A under hard manipulation of B."""
    g = _load_graph(graph_file)
    try:
        res = sidp(g, _split(a_set), _split(b_set),
                   _CLASSES[cls] if cls else None)
    except (ValueError, KeyError) as exc:
        _fail(str(exc))
    _emit_estimand(res, as_json)


@main.command("scidp")
@graph_option
@click.option("--a", "a_set", required=True)
@click.option("--b", "b_set", required=True)
@click.option("--c", "c_set", default="")
@click.option("--class", "cls", type=click.Choice(sorted(_CLASSES)), default=None)
@json_option
def scidp_cmd(graph_file, a_set, b_set, c_set, cls, as_json):
    """Identify the kernel of A given C under hard manipulation of B."""
    g = _load_graph(graph_file)
    try:
        res = scidp(g, _split(a_set), _split(b_set), _split(c_set),
                    _CLASSES[cls] if cls else None)
    except (ValueError, KeyError) as exc:
        _fail(str(exc))
    _emit_estimand(res, as_json)


@main.command("calculus")
@graph_option
@click.option("--rule", type=click.IntRange(1, 3), required=True)
@click.option("--a", "a_set", required=True)
@click.option("--b", "b_set", required=True)
@click.option("--c", "c_set", default="")
@click.option("--d", "d_set", default="")
@json_option
def calculus_cmd(graph_file, rule, a_set, b_set, c_set, d_set, as_json):
    """Check whether a calculus rule applies."""
    g = _load_graph(graph_file)
    try:
        ok = calculus_check(g, rule, _split(a_set), _split(b_set),
                            _split(c_set), _split(d_set))
    except (ValueError, KeyError) as exc:
        _fail(str(exc))
    if as_json:
        click.echo(json.dumps({"schema": 1, "applies": ok}, sort_keys=True))
    else:
        click.echo("applies" if ok else "does not apply")
    sys.exit(0 if ok else 1)


@main.command("adjust")
@graph_option
@click.option("--a", "a_set", required=True)
@click.option("--b", "b_set", required=True)
@click.option("--c", "c_set", default="")
@click.option("--d", "d_set", default="")
@click.option("--j0", default="")
@click.option("--j1", default="")
@click.option("--h", "h_set", default="")
@json_option
def adjust_cmd(graph_file, a_set, b_set, c_set, d_set, j0, j1, h_set, as_json):
    """Check the adjustment criterion and print the formula on success."""
    g = _load_graph(graph_file)
    try:
        ok, est = adjustment_check(
            g, _split(a_set), _split(b_set), _split(c_set), _split(d_set),
            _split(j0), _split(j1), _split(h_set))
    except (ValueError, KeyError) as exc:
        _fail(str(exc))
    if as_json:
        click.echo(json.dumps({
            "schema": 1, "applies": ok,
            "estimand": format_estimand(est) if ok else None,
        }, sort_keys=True))
    else:
        click.echo(format_estimand(est) if ok else "does not apply")
    sys.exit(0 if ok else 1)


@main.command("relation")
@graph_option
@click.option("--source", required=True)
@click.option("--target", required=True)
@click.option("--kind", type=click.Choice(
    ["direct", "total", "confounding", "sel_ancestor"]), required=True)
@json_option
def relation_cmd(graph_file, source, target, kind, as_json):
    """Single-pair causal relation over every represented graph."""
    g = _load_graph(graph_file)
    try:
        verdict = causal_relation(g, source, target, kind)
    except (ValueError, KeyError) as exc:
        _fail(str(exc))
    if as_json:
        click.echo(json.dumps({"schema": 1, "verdict": verdict},
                              sort_keys=True))
    else:
        click.echo(verdict)


@main.command("hedge-witness")
@graph_option
@click.option("--a", "a_set", required=True)
@click.option("--b", "b_set", required=True)
@json_option
def hedge_cmd(graph_file, a_set, b_set, as_json):
    """Run identification and, on Fail, construct a verified hedge."""
    g = _load_graph(graph_file)
    A, B = _split(a_set), _split(b_set)
    try:
        res = sidp(g, A, B)
    except (ValueError, KeyError) as exc:
        _fail(str(exc))
    if not isinstance(res, FailCertificate):
        if as_json:
            click.echo(json.dumps(
                {"schema": 1, "identifiable": True}, sort_keys=True))
        else:
            click.echo("identifiable: " + format_estimand(res))
        sys.exit(1)
    try:
        mag, wit, h = hedge_witness(g, A, B, res)
    except ValueError as exc:
        _fail(str(exc), code=1)
    if as_json:
        click.echo(json.dumps({
            "schema": 1,
            "identifiable": False,
            "certificate": str(res),
            "witness": _graph_json(wit),
            "hedge": {"H": sorted(h.H), "Hprime": sorted(h.Hprime),
                      "R": sorted(h.R)},
        }, sort_keys=True))
    else:
        click.echo(str(res))
        click.echo("witness:")
        click.echo(format_graph(wit).rstrip("\n"))
        click.echo("hedge: H={%s} H'={%s} R={%s}" % (
            ",".join(sorted(h.H)), ",".join(sorted(h.Hprime)),
            ",".join(sorted(h.R))))
    sys.exit(0)


@main.command("eval")
@click.option("--scm", "scm_file", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--estimand", "estimand_file", required=True,
              help="file with an estimand expression, or - for stdin")
@click.option("--zero-rows", type=click.Choice(["error", "uniform"]),
              default="error", show_default=True)
@json_option
def eval_cmd(scm_file, estimand_file, zero_rows, as_json):
    """Evaluate an estimand against a model's observed distribution."""
    try:
        with open(scm_file) as fh:
            scm = oc.parse_scm(fh.read())
        if estimand_file == "-":
            text = sys.stdin.read()
        else:
            with open(estimand_file) as fh:
                text = fh.read()
        est = parse_estimand(text)
        if isinstance(est, FailCertificate):
            _fail("cannot evaluate a failure certificate")
        qv = oc.observational_kernel(scm)
        k = oc.eval_estimand(est, qv, scm, zero_rows=zero_rows)
    except (OSError, ValueError) as exc:
        _fail(str(exc))
    if as_json:
        click.echo(json.dumps(
            {"schema": 1, "kernel": oc.format_kernel(k)}, sort_keys=True))
    else:
        click.echo(oc.format_kernel(k).rstrip("\n"))


@main.command("enumerate-mags")
@graph_option
@click.option("--membership", type=click.Choice(["all", "copag"]),
              default="all", show_default=True)
@click.option("--limit", type=int, default=1 << 16, show_default=True)
@json_option
def enumerate_cmd(graph_file, membership, limit, as_json):
    """All maximal ancestral graphs refining the circle marks of a graph."""
    g = _load_graph(graph_file)
    try:
        ms = enumerate_mags(
            g, limit=limit,
            membership=None if membership == "all" else membership)
    except ValueError as exc:
        _fail(str(exc))
    if as_json:
        click.echo(json.dumps(
            {"schema": 1, "count": len(ms),
             "graphs": [_graph_json(m) for m in ms]}, sort_keys=True))
    else:
        for i, m in enumerate(ms):
            if i:
                click.echo("")
            click.echo(format_graph(m).rstrip("\n"))


@main.command("random-scm")
@graph_option
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--domain", type=int, default=2, show_default=True)
@click.option("--no-positivity", is_flag=True)
def random_scm_cmd(graph_file, seed, domain, no_positivity):
    """Generate a reproducible random model for a graph."""
    g = _load_graph(graph_file)
    try:
        scm = oc.random_scm(g, random.Random(_seed(seed)), domain=domain,
                            positivity=not no_positivity)
    except ValueError as exc:
        _fail(str(exc))
    click.echo(oc.format_scm(scm).rstrip("\n"))


def _kernels_agree(got, want):
    """Equality up to extra context variables the estimand carries along;
    they must not affect the value."""
    if set(want.outputs) != set(got.outputs):
        return False
    if not set(want.context) <= set(got.context):
        return False
    names = got.context + got.outputs
    for ctx in oc._assignments(got.domains, got.context):
        for out in oc._assignments(got.domains, got.outputs):
            a = dict(zip(names, ctx + out))
            if got.value(a) != want.value(a):
                return False
    return True


@main.command("pipeline")
@click.option("--scm", "scm_file", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--a", "a_set", required=True)
@click.option("--b", "b_set", required=True)
@json_option
def pipeline_cmd(scm_file, a_set, b_set, as_json):
    """End to end: discover the partial graph from the model, identify,
    evaluate, and compare against the model's own interventional kernel."""
    try:
        with open(scm_file) as fh:
            scm = oc.parse_scm(fh.read())
        A, B = _split(a_set), _split(b_set)
        p = run_fci(distribution_oracle(scm))
        res = sidp(p, A, B)
        report = {"schema": 1, "graph": _graph_json(p)}
        if isinstance(res, FailCertificate):
            mag, wit, h = hedge_witness(p, A, B, res)
            report.update({
                "verdict": "FAIL-CERTIFIED",
                "certificate": str(res),
                "hedge": {"H": sorted(h.H), "Hprime": sorted(h.Hprime),
                          "R": sorted(h.R)},
            })
        else:
            qv = oc.observational_kernel(scm)
            got = oc.eval_estimand(res, qv, scm)
            want = oc.interventional_kernel(scm, B, outputs=sorted(got.outputs))
            match = _kernels_agree(got, want)
            report.update({
                "verdict": "MATCH" if match else "MISMATCH",
                "estimand": format_estimand(res),
            })
    except (OSError, ValueError) as exc:
        _fail(str(exc))
    if as_json:
        click.echo(json.dumps(report, sort_keys=True))
    else:
        for key in ("verdict", "certificate", "estimand"):
            if key in report:
                click.echo(f"{key}: {report[key]}")
        if "hedge" in report:
            h = report["hedge"]
            click.echo("hedge: H={%s} H'={%s} R={%s}" % (
                ",".join(h["H"]), ",".join(h["Hprime"]), ",".join(h["R"])))
    sys.exit(0 if report["verdict"] == "MATCH" else 1)


if __name__ == "__main__":
    main()
