"""Scenario-driven command line front end.

A scenario is a JSON document describing one moment functional, a list of
magic unitaries, and the checks to run against them.  Reports are written
as JSON (deterministic byte-for-byte for a fixed scenario) next to a
human-readable summary on stdout.

Exit codes: 0 all checks passed, 1 at least one check failed, 2 malformed
input.  Tolerance resolution: --tol flag, then the QEXCH_TOL environment
variable, then the scenario file, then 1e-8.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import algebra, cumulants, exchangeability, magic

ENV_TOL = "QEXCH_TOL"
DEFAULT_TOL = 1e-8

KNOWN_CHECKS = (
    "relations",
    "quantum_invariance",
    "classical_invariance",
    "e_invariance",
    "factorization",
    "freeness",
    "collapse_lemma",
    "crossing_sum",
    "counterexample",
)


class ScenarioError(Exception):
    """Malformed scenario input; the message names the offending field."""


def _fail(field, message):
    raise ScenarioError(f"{field}: {message}")


def _parse_complex(value, field):
    if isinstance(value, (int, float)):
        return complex(value)
    if (
        isinstance(value, (list, tuple))
        and len(value) == 2
        and all(isinstance(x, (int, float)) for x in value)
    ):
        return complex(value[0], value[1])
    _fail(field, f"expected a number or [re, im] pair, got {value!r}")


def _parse_matrix(value, field, dim=None):
    """Matrix as nested rows of complex scalars, or {'diag': [...]}."""
    if isinstance(value, dict):
        if set(value) != {"diag"}:
            _fail(field, f"matrix object supports only the 'diag' key, got {sorted(value)}")
        diag = [_parse_complex(x, f"{field}.diag[{i}]") for i, x in enumerate(value["diag"])]
        mat = np.diag(diag).astype(complex)
    elif isinstance(value, list):
        rows = []
        for r, row in enumerate(value):
            if not isinstance(row, list):
                _fail(field, f"row {r} is not a list")
            rows.append([_parse_complex(x, f"{field}[{r}][{c}]") for c, x in enumerate(row)])
        mat = np.array(rows, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            _fail(field, f"expected a square matrix, got shape {mat.shape}")
    else:
        _fail(field, "expected a matrix (list of rows) or {'diag': [...]}")
    if dim is not None and mat.shape[0] != dim:
        _fail(field, f"expected a {dim}x{dim} matrix, got {mat.shape[0]}x{mat.shape[0]}")
    return mat


def _require(obj, key, field, types=None):
    if key not in obj:
        _fail(f"{field}.{key}", "missing required field")
    value = obj[key]
    if types is not None and not isinstance(value, types):
        _fail(f"{field}.{key}", f"unexpected type {type(value).__name__}")
    return value


def build_functional(spec, field="functional"):
    if not isinstance(spec, dict):
        _fail(field, "must be an object")
    kind = _require(spec, "kind", field, str)
    if kind == "cumulant":
        b_dim = int(spec.get("b_dim", 1))
        table = _require(spec, "cumulants", field, dict)
        kappa = {}
        for order, value in table.items():
            try:
                n = int(order)
            except ValueError:
                _fail(f"{field}.cumulants", f"order {order!r} is not an integer")
            if isinstance(value, list) and len(value) == b_dim and b_dim > 1:
                kappa[n] = [_parse_complex(v, f"{field}.cumulants[{order}][{t}]")
                            for t, v in enumerate(value)]
            else:
                kappa[n] = [_parse_complex(value, f"{field}.cumulants[{order}]")] * b_dim
        max_order = spec.get("max_order")
        spec_obj = cumulants.CumulantSpec(
            kappa, b_dim=b_dim, max_order=None if max_order is None else int(max_order)
        )
        return cumulants.CumulantMomentFunctional(spec_obj)
    if kind == "concrete":
        dim = int(_require(spec, "dim", field, int))
        density = _parse_matrix(_require(spec, "density", field), f"{field}.density", dim)
        b_choice = spec.get("b", "scalar")
        if b_choice == "scalar":
            sub = algebra.scalar_subalgebra(density)
        elif b_choice == "diagonal":
            sub = algebra.pinching_subalgebra([[x] for x in range(dim)])
        elif isinstance(b_choice, dict) and "blocks" in b_choice:
            sub = algebra.pinching_subalgebra(b_choice["blocks"])
        else:
            _fail(f"{field}.b", f"expected 'scalar', 'diagonal', or {{'blocks': ...}}, got {b_choice!r}")
        ctx = algebra.AlgebraContext(algebra.State(density), sub)
        elements = _require(spec, "elements", field, list)
        mats = [
            _parse_matrix(e, f"{field}.elements[{t}]", dim) for t, e in enumerate(elements)
        ]
        return algebra.ConcreteMomentFunctional(ctx, mats)
    _fail(f"{field}.kind", f"unknown functional kind {kind!r}")


def build_unitary(spec, seed, field):
    if not isinstance(spec, dict):
        _fail(field, "must be an object")
    kind = _require(spec, "kind", field, str)
    if kind == "permutation":
        sigma = _require(spec, "sigma", field, list)
        d = int(spec.get("d", 1))
        try:
            return magic.from_permutation(sigma, d=d)
        except ValueError as exc:
            _fail(f"{field}.sigma", str(exc))
    if kind in ("block_pair", "block_chain"):
        d = int(_require(spec, "d", field, int))
        if "projections" in spec:
            qs = [
                magic.ensure_projection(_parse_matrix(m, f"{field}.projections[{t}]", d))
                for t, m in enumerate(spec["projections"])
            ]
        elif "seeds" in spec:
            qs = [
                magic.random_projection(d, int(spec.get("rank", 1)), (seed, int(s)))
                for s in spec["seeds"]
            ]
        else:
            _fail(field, "needs 'projections' or 'seeds'")
        if kind == "block_pair" and len(qs) != 2:
            _fail(field, f"block_pair needs exactly 2 projections, got {len(qs)}")
        if "r" in spec and int(spec["r"]) != len(qs):
            _fail(f"{field}.r", f"r={spec['r']} but {len(qs)} projections were given")
        return magic.block_chain(qs)
    _fail(f"{field}.kind", f"unknown unitary kind {kind!r}")


def load_scenario(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"scenario file: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario file: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ScenarioError("scenario: top level must be an object")
    for key in ("name", "functional", "checks"):
        if key not in doc:
            _fail(key, "missing required field")
    if "tolerance" in doc and not isinstance(doc["tolerance"], (int, float)):
        _fail("tolerance", f"expected a number, got {type(doc['tolerance']).__name__}")
    if not isinstance(doc["checks"], list):
        _fail("checks", "must be a list")
    for pos, check in enumerate(doc["checks"]):
        if not isinstance(check, dict) or "name" not in check:
            _fail(f"checks[{pos}]", "each check is an object with a 'name'")
        if check["name"] not in KNOWN_CHECKS:
            _fail(f"checks[{pos}].name", f"unknown check {check['name']!r}")
    return doc


def _record(name, params, residual, passed):
    return {
        "name": name,
        "params": params,
        "residual": float(residual),
        "pass": bool(passed),
    }


def _worst_note(report):
    w = report.worst
    if w is None:
        return ""
    return f"worst tuple n={w.n} i={tuple(map(int, w.indices))}"


def run_scenario(doc, tol, seed):
    """Execute every check; returns (report dict, summary lines)."""
    mf = build_functional(doc["functional"])
    unitaries = []
    for pos, uspec in enumerate(doc.get("unitaries", [])):
        label = f"{uspec.get('kind', '?')}#{pos}"
        unitaries.append((label, build_unitary(uspec, seed, f"unitaries[{pos}]")))

    records = []
    lines = []

    def add(name, params, residual, passed, note=""):
        records.append(_record(name, params, residual, passed))
        verdict = "PASS" if passed else "FAIL"
        extra = f"  ({note})" if note else ""
        target = f" [{params['unitary']}]" if "unitary" in params else ""
        lines.append(f"{name}{target}: residual={residual:.3e} {verdict}{extra}")

    for pos, check in enumerate(doc["checks"]):
        name = check["name"]
        field = f"checks[{pos}]"
        if name == "relations":
            for label, u in unitaries:
                rep = magic.verify_relations(u, tol=tol)
                add(name, {"unitary": label}, rep.max_residual, rep.passed)
        elif name == "quantum_invariance":
            n_max = int(check.get("n_max", 4))
            for label, u in unitaries:
                rep = exchangeability.check_quantum_invariance(
                    mf, u, n_max=n_max, tol=tol, seed=seed
                )
                add(
                    name,
                    {"unitary": label, "n_max": n_max},
                    rep.max_residual,
                    rep.passed,
                    note=_worst_note(rep),
                )
        elif name == "classical_invariance":
            n_max = int(check.get("n_max", 4))
            k = int(check.get("k", max((u.k for _, u in unitaries), default=2)))
            rep = exchangeability.check_classical_exchangeability(
                mf, k, n_max=n_max, tol=tol, seed=seed
            )
            add(name, {"k": k, "n_max": n_max}, rep.max_residual, rep.passed,
                note=_worst_note(rep))
        elif name == "e_invariance":
            n_max = int(check.get("n_max", 3))
            rng = np.random.default_rng(seed)
            decorations = [mf.random_coeff(rng) for _ in range(max(0, n_max - 1))]
            for label, u in unitaries:
                rep = exchangeability.check_E_invariance(
                    mf, u, decorations=decorations, n_max=n_max, tol=tol, seed=seed
                )
                add(name, {"unitary": label, "n_max": n_max}, rep.max_residual,
                    rep.passed, note=_worst_note(rep))
        elif name == "factorization":
            variables = tuple(check.get("vars", [1, 2, 3]))
            l = int(check.get("l", 1))
            trials = int(check.get("trials", 5))
            rng = np.random.default_rng(seed)
            worst = 0.0
            try:
                for _ in range(trials):
                    polys = [
                        exchangeability._random_polynomial(mf, rng) for _ in variables
                    ]
                    worst = max(
                        worst,
                        exchangeability.check_factorization(mf, variables, polys, l, tol=tol),
                    )
            except ValueError as exc:
                _fail(field, str(exc))
            add(name, {"vars": list(variables), "l": l, "trials": trials},
                worst, worst <= tol)
        elif name == "freeness":
            variables = tuple(check.get("vars", [1, 2]))
            n_max = int(check.get("n_max", 4))
            rep = exchangeability.check_freeness(
                mf, variables, n_max=n_max, tol=tol, seed=seed
            )
            add(name, {"vars": list(variables), "n_max": n_max},
                max(rep.centered_max, rep.mixed_max), rep.passed,
                note="criteria agree" if rep.consistent else "criteria DISAGREE")
        elif name == "collapse_lemma":
            n_max = int(check.get("n_max", 4))
            from .partitions import enumerate_noncrossing

            for label, u in unitaries:
                worst = 0.0
                eye = np.eye(u.d)
                for n in range(1, n_max + 1):
                    for pi in enumerate_noncrossing(n):
                        sums = magic.collapse_sum_all(u, pi)
                        ind = magic.kernel_indicator(pi, u.k)
                        target = ind[..., None, None] * eye
                        dev = np.linalg.norm(
                            (sums - target).reshape(-1, u.d * u.d), axis=1
                        ).max()
                        worst = max(worst, float(dev))
                add(name, {"unitary": label, "n_max": n_max}, worst, worst <= tol)
        elif name == "crossing_sum":
            d = int(check.get("d", 2))
            s = int(check.get("s", 2))
            variant = check.get("variant", "plain")
            pairs = int(check.get("pairs", 20))
            ok = True
            worst_gap = 0.0
            for t in range(pairs):
                if t % 2 == 0:
                    p, q = magic.noncommuting_projection_pair(d, (seed, t))
                    _, dist = exchangeability.crossing_sum_probe(p, q, s, variant)
                    ok = ok and dist > 1e-4
                    worst_gap = max(worst_gap, 0.0 if dist > 1e-4 else 1e-4 - dist)
                else:
                    p = magic.random_projection(d, 1, (seed, t))
                    _, dist = exchangeability.crossing_sum_probe(p, p, s, variant)
                    ok = ok and dist <= 1e-10
                    worst_gap = max(worst_gap, dist if dist > 1e-10 else 0.0)
            add(name, {"d": d, "s": s, "variant": variant, "pairs": pairs},
                worst_gap, ok)
        elif name == "counterexample":
            n = int(check.get("n", 3))
            try:
                rep = exchangeability.finite_counterexample(n)
            except ValueError as exc:
                _fail(field, str(exc))
            add(name, {"n": n, "psi_u11": str(rep.psi_u11),
                       "psi_u11_u21": str(rep.psi_u11_u21)},
                0.0 if rep.passed else 1.0, rep.passed)

    all_pass = all(r["pass"] for r in records)
    report = {
        "scenario": doc["name"],
        "seed": seed,
        "tolerance": tol,
        "checks": records,
        "pass": all_pass,
    }
    return report, lines


def _resolve_tolerance(args, doc):
    if args.tol is not None:
        return float(args.tol)
    env = os.environ.get(ENV_TOL)
    if env is not None:
        try:
            return float(env)
        except ValueError as exc:
            raise ScenarioError(f"{ENV_TOL}: not a number ({env!r})") from exc
    if doc is not None and "tolerance" in doc:
        return float(doc["tolerance"])
    return DEFAULT_TOL


def _resolve_seed(args, doc):
    if args.seed is not None:
        return int(args.seed)
    if doc is not None and "seed" in doc:
        return int(doc["seed"])
    return 0


def _emit(args, report, lines):
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.report:
        Path(args.report).write_text(text)
    if args.format == "json":
        sys.stdout.write(text)
    else:
        for line in lines:
            print(line)
        print("overall:", "PASS" if report["pass"] else "FAIL")


def _load_spec_argument(value, field):
    """Inline JSON or a path to a JSON file."""
    candidate = Path(value)
    if candidate.exists():
        value = candidate.read_text()
    try:
        return json.loads(value)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{field}: not valid JSON or a readable file ({exc})")


def cmd_verify(args):
    doc = load_scenario(args.scenario)
    tol = _resolve_tolerance(args, doc)
    seed = _resolve_seed(args, doc)
    if args.report is None:
        args.report = Path(args.scenario).stem + ".report.json"
    report, lines = run_scenario(doc, tol, seed)
    _emit(args, report, lines)
    return 0 if report["pass"] else 1


def cmd_check_magic(args):
    spec = _load_spec_argument(args.unitary, "unitary")
    tol = _resolve_tolerance(args, None)
    seed = _resolve_seed(args, None)
    u = build_unitary(spec, seed, "unitary")
    rep = magic.verify_relations(u, tol=tol)
    report = {
        "check": "relations",
        "k": u.k,
        "d": u.d,
        "residuals": {k: float(v) for k, v in rep.residuals.items()},
        "residual": rep.max_residual,
        "pass": rep.passed,
    }
    if args.format == "json":
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        print(rep.summary())
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return 0 if rep.passed else 1


def cmd_cumulants(args):
    spec = _load_spec_argument(args.functional, "functional")
    mf = build_functional(spec, "functional")
    n = args.n
    if n < 1:
        raise ScenarioError("--n: must be >= 1")
    table = cumulants.moments_to_cumulants(mf, (1,) * n)
    rows = []
    for order in range(1, n + 1):
        moment = mf.scalar_moment((1,) * order)
        kn = table[order]
        kappa_scalar = complex(np.trace(kn)) / kn.shape[0]
        rows.append((order, moment, kappa_scalar))
    if args.format == "json":
        payload = [
            {"order": o, "moment": [m.real, m.imag], "kappa": [k.real, k.imag]}
            for o, m, k in rows
        ]
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(f"{'n':>3s} {'moment m_n':>24s} {'cumulant kappa_n':>24s}")
        for o, m, k in rows:
            print(f"{o:3d} {m.real:24.12g} {k.real:24.12g}")
    return 0


def cmd_collapse(args):
    from .partitions import Partition

    spec = _load_spec_argument(args.unitary, "unitary")
    seed = _resolve_seed(args, None)
    u = build_unitary(spec, seed, "unitary")
    try:
        blocks = json.loads(args.pi)
        i_tuple = tuple(json.loads(args.i))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"--pi/--i: invalid JSON ({exc})")
    pi = Partition(len(i_tuple), blocks)
    value = magic.interval_collapse_sum(u, i_tuple, pi)
    expected = magic.collapse_expected(i_tuple, pi)
    target = np.eye(u.d) if expected else np.zeros((u.d, u.d))
    residual = float(np.linalg.norm(value - target))
    tol = _resolve_tolerance(args, None)
    print(f"collapse sum for i={i_tuple}, pi={[list(b) for b in pi.blocks]}:")
    with np.printoptions(precision=6, suppress=True):
        print(value)
    print(f"ker i >= pi: {expected}  (target {'identity' if expected else 'zero'})")
    print(f"residual: {residual:.3e}  {'PASS' if residual <= tol else 'FAIL'}")
    return 0 if residual <= tol else 1


def cmd_counterexample(args):
    try:
        rep = exchangeability.finite_counterexample(args.n)
    except ValueError as exc:
        raise ScenarioError(f"--n: {exc}")
    print(rep.summary())
    return 0 if rep.passed else 1


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=None, help="residual tolerance")
    common.add_argument("--seed", type=int, default=None, help="sampling seed")
    common.add_argument("--report", default=None, help="path for the JSON report")
    common.add_argument(
        "--format", choices=("json", "text"), default="text", help="stdout format"
    )
    parser = argparse.ArgumentParser(
        prog="qexch",
        description="numerical checks for quantum-permutation symmetry and freeness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", parents=[common], help="run a scenario file")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("check-magic", parents=[common], help="verify the defining relations")
    p.add_argument("unitary", help="unitary spec: inline JSON or a file path")
    p.set_defaults(func=cmd_check_magic)

    p = sub.add_parser("cumulants", parents=[common], help="print a moment/cumulant table")
    p.add_argument("functional", help="functional spec: inline JSON or a file path")
    p.add_argument("--n", type=int, default=4, help="highest order to print")
    p.set_defaults(func=cmd_cumulants)

    p = sub.add_parser("collapse", parents=[common], help="print one collapse sum")
    p.add_argument("unitary", help="unitary spec: inline JSON or a file path")
    p.add_argument("--pi", required=True, help='blocks as JSON, e.g. "[[1,2],[3,4]]"')
    p.add_argument("--i", required=True, help='index tuple as JSON, e.g. "[1,1,2,2]"')
    p.set_defaults(func=cmd_collapse)

    p = sub.add_parser("counterexample", parents=[common], help="run the column model")
    p.add_argument("--n", type=int, default=3)
    p.set_defaults(func=cmd_counterexample)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad usage, which matches the contract
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
