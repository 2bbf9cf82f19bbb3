"""Command-line front end: run one analysis task and emit a JSON report (and CSV plot data for sweeps).

Every task is a dict-shaped config; subcommand flags and ``bellgap run
CONFIG.json`` both build that dict and hand it to :func:`run`. Reports are
serialized with sorted keys and no timestamps so identical configs give
byte-identical output.

Exit codes: 0 clean, 1 unparsable input, 2 contract violation in the
inputs, 3 inequality violation found while ``--fail-on-violation`` is set.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from . import classical as cl
from . import lhv
from . import linalg as la
from . import quantum as qm
from . import search
from . import source as src
from .errors import BellgapError, ContractError, ParseError
from .scenario import DICHOTOMIC, Sign, dichotomic_conditions, event_prob

SCHEMA = 1
TASKS = ("check-lhv", "check-classical", "check-quantum", "werner", "noisy",
         "source-audit", "search", "scan")
DEFAULT_TOL = 1e-10

EXIT_OK, EXIT_PARSE, EXIT_CONTRACT, EXIT_VIOLATION = 0, 1, 2, 3


# input helpers

def load_json(path: str | Path) -> Any:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ParseError(f"{p}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{p}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _require(cfg: dict, key: str, task: str) -> Any:
    if key not in cfg or cfg[key] is None:
        raise ParseError(f"task {task!r} requires field {key!r}")
    return cfg[key]


def _float(text: str, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"cannot read {what} from {text!r}") from None


def parse_state(spec: str) -> qm.DensityOperator:
    """Named state or path to a state JSON file.

    Names: ``singlet``, ``werner:D:PHI``, ``noisy:BETA`` (noisy singlet),
    ``product-example``.
    """
    parts = spec.split(":")
    name = parts[0].lower()
    if name == "singlet" and len(parts) == 1:
        return qm.singlet()
    if name == "werner" and len(parts) == 3:
        d = int(_float(parts[1], "Werner dimension"))
        return qm.werner_state(d, _float(parts[2], "Werner parameter"))
    if name == "noisy" and len(parts) == 2:
        return qm.noisy_singlet(_float(parts[1], "noise parameter"))
    if name == "product-example" and len(parts) == 1:
        return search.product_example()[0]
    if spec.endswith(".json"):
        return qm.DensityOperator.from_json(load_json(spec))
    raise ParseError(f"unknown state {spec!r}; use singlet, werner:D:PHI, noisy:BETA, "
                     "product-example or a .json file")


_AXES = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}


def parse_direction(text: str) -> np.ndarray:
    t = text.strip().lower()
    neg = t.startswith("-")
    t = t.lstrip("+-")
    if t in _AXES:
        v = np.array(_AXES[t])
    else:
        vals = [_float(x, "direction component") for x in t.split(",")]
        if len(vals) != 3:
            raise ParseError(f"direction {text!r} needs three components")
        v = np.array(vals)
        n = np.linalg.norm(v)
        if n == 0.0:
            raise ParseError("direction is the zero vector")
        v = v / n
    return -v if neg else v


def parse_observable(spec: str, d: int) -> np.ndarray:
    """``x``/``-z``/``spin:nx,ny,nz`` for qubits, ``diag:v1,...`` for any d, or a JSON matrix file."""
    if spec.endswith(".json"):
        return qm.ObservableOp(la.matrix_from_json(load_json(spec))).matrix
    if spec.startswith("diag:"):
        vals = [_float(x, "diagonal entry") for x in spec[5:].split(",")]
        return qm.ObservableOp(np.diag(vals).astype(np.complex128)).matrix
    body = spec[5:] if spec.startswith("spin:") else spec
    if d != 2:
        raise ContractError(f"spin observable {spec!r} needs a qubit, got d={d}")
    return qm.spin_observable(parse_direction(body)).matrix


def parse_grid(text: str | None) -> list[float] | None:
    """``a,b,c`` or ``start:stop:num``; an empty string is the empty grid."""
    if text is None:
        return None
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ParseError(f"grid {text!r} must be start:stop:num")
        a, b = _float(parts[0], "grid start"), _float(parts[1], "grid stop")
        n = int(_float(parts[2], "grid size"))
        return [float(x) for x in np.linspace(a, b, n)]
    return [_float(x, "grid value") for x in text.split(",")]


def _file_digest(path: str) -> str:
    try:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None


def inputs_digest(cfg: dict) -> str:
    """SHA-256 over the canonical config plus the bytes of every referenced file."""
    payload = {k: v for k, v in cfg.items() if k not in ("out", "csv", "fail_on_violation")}
    files = {}
    for key in ("model", "config", "source", "state", "a1", "b1", "b2", "a2"):
        val = cfg.get(key)
        if isinstance(val, str) and val.endswith(".json"):
            files[key] = _file_digest(val)
    blob = json.dumps({"config": payload, "files": files}, sort_keys=True, default=_jsonable)
    return hashlib.sha256(blob.encode()).hexdigest()


# report serialization

def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, Sign):
        return x.value
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _clean(x):
    """Replace non-finite floats (not valid JSON) by strings."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (float, np.floating)) and not math.isfinite(float(x)):
        return str(float(x))
    return x


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2, default=_jsonable) + "\n"


@dataclass
class Outcome:
    results: dict
    violation: bool


# task handlers

def _tol(cfg: dict) -> float:
    return float(cfg.get("tol", DEFAULT_TOL))


def task_check_lhv(cfg: dict) -> Outcome:
    data = load_json(_require(cfg, "model", "check-lhv"))
    sign = Sign.parse(cfg.get("sign", "minus"))
    tol = _tol(cfg)
    if not isinstance(data, dict):
        raise ParseError("LHV model JSON must be an object")
    if "p1" in data:
        model = lhv.ConditionalLhvModel.from_json(data)
        corr_model = lhv.induced_correlation_model(model)
        mu = lhv.induced_mu(model)
        out = {"kind": "conditional", "condition21": lhv.condition21_value(mu, sign)}
        if model.grid1 == DICHOTOMIC and model.grid2 == DICHOTOMIC:
            b = lhv.dichotomic_mu_bounds(mu)
            out["cv_expression"] = lhv.cv_expression(mu)
            out["mu_bounds"] = {"lhs": b.lhs, "bound_w": b.bound_w, "bound_www": b.bound_www}
            v = dichotomic_conditions(lhv.lhv_joint(model, 2, 1), lhv.lhv_joint(model, 2, 2), sign)
            out["dichotomic_condition"] = {"holds": v.holds, "which": v.which, "p21": v.p21, "p22": v.p22}
    else:
        corr_model = lhv.CorrelationLhvModel.from_json(data)
        out = {"kind": "correlation"}
    chk = lhv.theorem1_check(corr_model, sign)
    q = lhv.correlation_quad(corr_model)
    out.update({"condition8": chk.condition8, "slack": chk.slack, "consistent": chk.consistent,
                "correlations": {"c11": q.c11, "c12": q.c12, "c21": q.c21, "c22": q.c22},
                "second_moment_gap": lhv.second_moment_gap(corr_model, sign)})
    return Outcome(out, chk.slack < -tol)


def task_check_classical(cfg: dict) -> Outcome:
    data = load_json(_require(cfg, "config", "check-classical"))
    if not isinstance(data, dict):
        raise ParseError("classical config JSON must be an object")
    for key in ("pi", "a1", "b1", "b2"):
        _require(data, key, "check-classical")
    pi = cl.ClassicalState(data["pi"])
    a1, b1, b2 = (cl.ClassicalObservable(data[k]) for k in ("a1", "b1", "b2"))
    audit = cl.classical_bell_audit(pi, a1, b1, b2)
    out = {"c11": audit.c11, "c12": audit.c12, "c22": audit.c22, "slack": audit.slack}
    out["same_outcome_prob_ideal"] = event_prob(cl.ideal_joint(pi, b1, b1), "eq")
    return Outcome(out, audit.slack < -_tol(cfg))


def _default_triple(d: int) -> tuple[str, str, str]:
    if d == 2:
        return "z", "z", "x"
    first = ",".join(["1", "-1"] + ["0"] * (d - 2))
    last = ",".join(["0"] * (d - 2) + ["1", "-1"])
    return f"diag:{first}", f"diag:{first}", f"diag:{last}"


def _triple(cfg: dict, d: int) -> tuple[np.ndarray, ...]:
    return tuple(parse_observable(str(cfg.get(k) or dflt), d)
                 for k, dflt in zip(("a1", "b1", "b2"), _default_triple(d)))


def task_check_quantum(cfg: dict) -> Outcome:
    rho = parse_state(str(_require(cfg, "state", "check-quantum")))
    sign = Sign.parse(cfg.get("sign", "minus"))
    d = rho.dims[0]
    a1, b1, b2 = _triple(cfg, d)
    a2 = parse_observable(str(cfg["a2"]), d) if cfg.get("a2") else b1
    out = {
        "c11": qm.correlation(rho, a1, b1), "c12": qm.correlation(rho, a1, b2),
        "c21": qm.correlation(rho, a2, b1), "c22": qm.correlation(rho, a2, b2),
        "a2_equals_b1": bool(np.allclose(a2, b1)),
    }
    out["slack"] = (1.0 + sign.factor * out["c22"]) - abs(out["c11"] - out["c12"])
    out["chsh"] = qm.chsh(rho, a1, a2, b1, b2)
    return Outcome(out, out["slack"] < -_tol(cfg))


def _werner_observable(d: int, direction: np.ndarray) -> np.ndarray:
    if d == 2:
        return qm.spin_observable(direction).matrix
    return np.diag([1.0, -1.0] + [0.0] * (d - 2)).astype(np.complex128)


def task_werner(cfg: dict) -> Outcome:
    d = int(cfg.get("d", 2))
    direction = parse_direction(str(cfg.get("direction", "z")))
    obs = _werner_observable(d, direction)
    grid = parse_grid(cfg.get("phi_grid"))
    trials = int(cfg.get("trials", 0))
    seed = int(cfg.get("seed", 0))
    tol = _tol(cfg)

    def point(phi: float) -> dict:
        w = qm.werner_state(d, phi)
        row = {"phi": phi, "correlation": qm.correlation(w, obs, obs)}
        if trials > 0:
            row["min_slack"] = search.never_violates_scan(w, trials, seed).min_slack
        return row

    if grid is not None:
        rows = [point(phi) for phi in grid]
        cols = ["phi", "correlation"] + (["min_slack"] if trials > 0 else [])
        out = {"d": d, "sweep": {"parameter": "phi", "columns": cols,
                                 "rows": [[r[c] for c in cols] for r in rows]}}
        viol = any(r.get("min_slack", 0.0) < -tol for r in rows)
    else:
        out = {"d": d, **point(float(cfg.get("phi", 0.0)))}
        viol = out.get("min_slack", 0.0) < -tol
    return Outcome(out, viol)


def task_noisy(cfg: dict) -> Outcome:
    direction = parse_direction(str(cfg.get("direction", "z")))
    obs = qm.spin_observable(direction).matrix
    grid = parse_grid(cfg.get("beta_grid"))
    trials = int(cfg.get("trials", 0))
    seed = int(cfg.get("seed", 0))
    tol = _tol(cfg)

    def point(beta: float) -> dict:
        ns = qm.noisy_state(qm.singlet_vector(), beta)
        probs = qm.conditional_outcome_probs(beta, direction)
        row = {"beta": beta, "correlation": qm.correlation(ns.state, obs, obs),
               "same": probs["same"], "different": probs["different"]}
        if trials > 0:
            row["min_slack"] = search.never_violates_scan(ns.state, trials, seed).min_slack
        return row

    ns0 = qm.noisy_state(qm.singlet_vector(), 0.0)
    head = {"gamma": ns0.gamma, "beta_max": ns0.beta_max}
    if grid is not None:
        rows = [point(b) for b in grid]
        cols = ["beta", "correlation", "same", "different"] + (["min_slack"] if trials > 0 else [])
        out = {**head, "sweep": {"parameter": "beta", "columns": cols,
                                 "rows": [[r[c] for c in cols] for r in rows]}}
        viol = any(r.get("min_slack", 0.0) < -tol for r in rows)
    else:
        out = {**head, **point(float(_require(cfg, "beta", "noisy")))}
        viol = out.get("min_slack", 0.0) < -tol
    return Outcome(out, viol)


def task_source_audit(cfg: dict) -> Outcome:
    rho = parse_state(str(_require(cfg, "state", "source-audit")))
    sign = Sign.parse(cfg.get("sign", "minus"))
    seed = int(cfg.get("seed", 0))
    restarts = int(cfg.get("restarts", 64))
    out: dict = {}
    if cfg.get("source"):
        r = src.SourceOperator.from_json(load_json(cfg["source"]))
        if r.direction is src.Direction.LEFT:
            r, rho = src.mirror_source(r), src.swapped_state(rho)
            out["mirrored"] = True
    else:
        ext = src.find_positive_extension(rho, int(cfg.get("iters", 500)))
        out["extension"] = {"found": ext.found, "marginal_residual": ext.marginal_residual,
                            "iterations": ext.iterations, "support_dim": ext.support_dim}
        if not ext.found:
            return Outcome(out, False)
        r = ext.r
    out["source_residual"] = src.source_residual(r, rho)
    out["verify_source"] = src.verify_source(r, rho)
    verdict = src.tensor_positivity(r.matrix, r.dims, restarts=restarts, seed=seed)
    out["tensor_positivity"] = {"status": verdict.status, "min_value": verdict.min_value,
                                "restart": verdict.restart}
    if rho.dims[0] == rho.dims[1]:
        out["property39"] = src.property39_check(r, rho)
    sigma = src.sigma_of(r)
    out["sigma_min_eigenvalue"] = float(la.eigvalsh(la.hermitize(sigma, 1e-9))[-1])
    out["sigma_psd"] = la.is_psd(la.hermitize(sigma, 1e-9))
    viol = False
    if out["verify_source"]:
        d = rho.dims[1]
        _, b1, b2 = _triple(cfg, d)
        a2 = parse_observable(str(cfg["a2"]), rho.dims[0]) if cfg.get("a2") else b1
        out["condition32"] = src.condition32(r, rho, a2, b2, sign, b1=b1)
        viol = out["condition32"] < -_tol(cfg)
    return Outcome(out, viol)


def _search_json(rep: search.SearchReport) -> dict:
    out = rep.to_json()
    out["reevaluated_slack"] = rep.reevaluate()
    return out


def task_search(cfg: dict) -> Outcome:
    sign = Sign.parse(cfg.get("sign", "minus"))
    seed = int(cfg.get("seed", 0))
    restarts = int(cfg.get("restarts", 64))
    family = cfg.get("separable")
    if family:
        rep = search.find_separable_violation(seed, restarts, str(family), sign)
        out = _search_json(rep)
        audit = search.classical_embedding(rep)
        out["classical_embedding_slack"] = audit.slack
    else:
        rho = parse_state(str(_require(cfg, "state", "search")))
        rep = search.minimize_bell_slack(rho, sign, restarts, seed, not cfg.get("full_ball", False))
        out = _search_json(rep)
    return Outcome(out, rep.best_slack < -_tol(cfg))


def task_scan(cfg: dict) -> Outcome:
    rho = parse_state(str(_require(cfg, "state", "scan")))
    sign = Sign.parse(cfg.get("sign", "minus"))
    res = search.never_violates_scan(rho, int(cfg.get("trials", 10_000)), int(cfg.get("seed", 0)), sign)
    out = {"min_slack": res.min_slack, "trials": res.trials, "argmin_trial": res.argmin}
    return Outcome(out, res.min_slack < -_tol(cfg))


HANDLERS: dict[str, Callable[[dict], Outcome]] = {
    "check-lhv": task_check_lhv,
    "check-classical": task_check_classical,
    "check-quantum": task_check_quantum,
    "werner": task_werner,
    "noisy": task_noisy,
    "source-audit": task_source_audit,
    "search": task_search,
    "scan": task_scan,
}


def tolerance_set(cfg: dict) -> dict:
    return {
        "violation": _tol(cfg),
        "hermitian": la.HERMITIAN_TOL,
        "jacobi_offdiag": la.JACOBI_TOL,
        "source_marginal": src.MARGINAL_TOL,
        "witness": src.WITNESS_TOL,
        "extension_residual": src.EXTENSION_TOL,
        "nelder_mead": search.NM_TOL,
    }


def run(config: dict) -> tuple[dict, int]:
    """Execute one task config; returns (report, exit code). Raises BellgapError on bad input."""
    if not isinstance(config, dict):
        raise ParseError("config must be a JSON object")
    schema = config.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise ParseError(f"unsupported config schema {schema!r}")
    task = config.get("task")
    if task not in HANDLERS:
        raise ParseError(f"field 'task' must be one of {list(TASKS)}, got {task!r}")
    cfg = {k: v for k, v in config.items() if v is not None}
    cfg.setdefault("seed", 0)
    outcome = HANDLERS[task](cfg)
    report = {
        "schema": SCHEMA,
        "task": task,
        "version": __version__,
        "seed": int(cfg["seed"]),
        "inputs_digest": inputs_digest(cfg),
        "tolerances": tolerance_set(cfg),
        "results": outcome.results,
        "violation": bool(outcome.violation),
    }
    code = EXIT_VIOLATION if outcome.violation and cfg.get("fail_on_violation") else EXIT_OK
    return report, code


def emit_plot_data(report: dict) -> str:
    """CSV (header row plus one row per grid point) from a sweep report."""
    sweep = report.get("results", {}).get("sweep") if isinstance(report, dict) else None
    if not sweep:
        raise ContractError("report does not come from a sweep task")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(sweep["columns"])
    for row in sweep["rows"]:
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARSE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, restarts: bool = False, trials: bool = False) -> None:
    p.add_argument("--sign", choices=("minus", "plus"), default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--tol", type=float, default=None, help="violation tolerance")
    p.add_argument("--fail-on-violation", action="store_true", default=None)
    p.add_argument("--out", default=None, help="write the report here instead of stdout")
    if restarts:
        p.add_argument("--restarts", type=int, default=None)
    if trials:
        p.add_argument("--trials", type=int, default=None)


def _observable_flags(p: argparse.ArgumentParser) -> None:
    for name in ("a1", "a2", "b1", "b2"):
        p.add_argument(f"--{name}", default=None,
                       help="x, -z, spin:nx,ny,nz, diag:v1,..,vd or a matrix .json file")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bellgap", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"bellgap {__version__}")
    sub = parser.add_subparsers(dest="task", required=True, parser_class=_Parser)

    p = sub.add_parser("check-lhv", help="sufficient condition vs Bell slack for an LHV model")
    p.add_argument("model")
    _common(p)

    p = sub.add_parser("check-classical", help="Bell slack audit of a classical configuration")
    p.add_argument("config")
    _common(p)

    p = sub.add_parser("check-quantum", help="correlations and slack for a state and observables")
    p.add_argument("--state", required=True)
    _observable_flags(p)
    _common(p)

    p = sub.add_parser("werner", help="Werner-state correlations, optionally swept over phi")
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--phi", type=float, default=None)
    p.add_argument("--phi-grid", default=None, help="a,b,c or start:stop:num")
    p.add_argument("--direction", default=None)
    p.add_argument("--csv", default=None, help="write sweep plot data here")
    _common(p, trials=True)

    p = sub.add_parser("noisy", help="noisy-singlet correlations, optionally swept over beta")
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--beta-grid", default=None, help="a,b,c or start:stop:num")
    p.add_argument("--direction", default=None)
    p.add_argument("--csv", default=None, help="write sweep plot data here")
    _common(p, trials=True)

    p = sub.add_parser("source-audit", help="audit a source operator, or search for a positive extension")
    p.add_argument("--state", required=True)
    p.add_argument("--source", default=None, help="source operator .json; omitted: run the extension finder")
    p.add_argument("--iters", type=int, default=None)
    _observable_flags(p)
    _common(p, restarts=True)

    p = sub.add_parser("search", help="multi-start search for the most negative Bell slack")
    p.add_argument("--state", default=None)
    p.add_argument("--separable", choices=search.SEPARABLE_FAMILIES, default=None,
                   help="search two-qubit separable states of this family instead")
    p.add_argument("--full-ball", action="store_true", default=None,
                   help="allow non-projective qubit observables")
    _common(p, restarts=True)

    p = sub.add_parser("scan", help="random-observable scan for the minimum Bell slack")
    p.add_argument("--state", required=True)
    _common(p, trials=True)

    p = sub.add_parser("run", help="run a task described by a JSON config")
    p.add_argument("config_file")
    p.add_argument("--out", default=None)
    p.add_argument("--fail-on-violation", action="store_true", default=None)

    p = sub.add_parser("plot-data", help="CSV plot data from a saved sweep report")
    p.add_argument("report")
    p.add_argument("--out", default=None)
    return parser


def _write(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.task == "plot-data":
            _write(emit_plot_data(load_json(args.report)), args.out)
            return EXIT_OK
        if args.task == "run":
            config = load_json(args.config_file)
            if not isinstance(config, dict):
                raise ParseError(f"{args.config_file}: config must be a JSON object")
            for key in ("out", "fail_on_violation"):
                if getattr(args, key) is not None:
                    config[key] = getattr(args, key)
        else:
            config = {k: v for k, v in vars(args).items() if v is not None}
            config["schema"] = SCHEMA
        report, code = run(config)
        _write(dumps(report), config.get("out"))
        if config.get("csv"):
            Path(config["csv"]).write_text(emit_plot_data(report))
        return code
    except ParseError as exc:
        print(f"bellgap: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except BellgapError as exc:
        print(f"bellgap: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
