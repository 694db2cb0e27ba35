"""Command-line experiment runner.

    qchaos run --config cfg.json [--seed N] [--out path]
    qchaos list
    qchaos validate --config cfg.json

Exit status: 0 on success, 2 for configuration errors, 3 for runtime or
numerical failures. Results go to the output file only; progress goes to
stderr.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import os
import sys
import time
from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from . import __version__, chaosdiag, concentration, dqc1, kickedtop, rmt, tomography
from .qcore import haar_unitary, hermitian_basis, random_pure_state, spawn_streams, spin_operators

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class ResultTable:
    columns: list[str]
    rows: list[list[Any]] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for r in self.rows:
            if len(r) != len(self.columns):
                raise ValueError(f"row {r} does not match header {self.columns}")


@dataclass(frozen=True)
class Experiment:
    summary: str
    required: tuple[str, ...]
    defaults: dict[str, Any]
    run: Callable[[dict[str, Any], int, Callable[[str], None]], ResultTable]


def load_schema(name: str) -> dict:
    return json.loads(resources.files("qchaos").joinpath("schemas", name).read_text(encoding="utf-8"))


def worker_count() -> int:
    raw = os.environ.get("QCHAOS_THREADS", "")
    try:
        return max(1, int(raw)) if raw else min(4, os.cpu_count() or 1)
    except ValueError:
        raise ConfigError(f"QCHAOS_THREADS must be an integer, got {raw!r}") from None


def parallel_map(fn: Callable, items: Iterable) -> list:
    """Ordered map over independent items; each item carries its own rng stream."""
    items = list(items)
    n = worker_count()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _f(x: Any) -> Any:
    """Numpy scalars to Python scalars for emission."""
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


# -- experiments ----------------------------------------------------------------------------


def _otoc_exact(p, seed, progress):
    nq, k0 = int(p["nqubits"]), float(p["kappa0"])
    if nq not in (3, 4):
        raise ConfigError("params.nqubits must be 3 or 4")
    dense = chaosdiag.kicked_top_otoc(kickedtop.KickedTopParams(nq, k0), int(p["n_max"]))
    rows = []
    for n in range(1, int(p["n_max"]) + 1):
        rows.append([n, chaosdiag.otoc_exact_small(nq, k0, n), dense.values[n]])
    return ResultTable(["n", "otoc_closed", "otoc_dense"], rows)


def _otoc_scan(p, seed, progress):
    rows = []
    for k0 in p["kappa0"]:
        s = chaosdiag.kicked_top_otoc(kickedtop.KickedTopParams(int(p["two_j"]), float(k0)), int(p["n_max"]))
        rows += [[float(k0), int(n), v] for n, v in zip(s.times, s.values)]
        progress(f"kappa0={k0} done")
    return ResultTable(["kappa0", "n", "otoc"], rows)


def _echo_averaged(p, seed, progress):
    s = chaosdiag.kicked_top_echo_averaged(int(p["two_j"]), float(p["kappa0"]), float(p["delta_kappa0"]), int(p["n_max"]))
    if s.closed_form is None:
        return ResultTable(["n", "echo"], [[int(n), v] for n, v in zip(s.times, s.values)])
    return ResultTable(["n", "echo", "echo_closed"], [list(r) for r in zip(s.times, s.values, s.closed_form)])


def _echo_state(p, seed, progress):
    s = chaosdiag.echo_state(
        p["state"], float(p["kappa0"]), float(p["delta_kappa0"]), int(p["n_max"]),
        int(p["two_j"]), float(p["theta"]), float(p["phi"]),
    )
    return ResultTable(["n", "echo", "one_minus_echo"], [[int(n), v, 1 - v] for n, v in zip(s.times, s.values)])


def _policy(p, dim: int) -> tomography.UnitaryPolicy:
    return tomography.UnitaryPolicy(
        p["policy"], dim, kappa0=p.get("kappa0"), kappa0_vec=p.get("kappa0_vec"), beta=float(p["beta"])
    )


def _checkpoints(p) -> list[int]:
    cps = p.get("checkpoints") or [p["n_steps"]]
    return sorted({int(c) for c in cps})


def _tomography_fidelity(p, seed, progress):
    d, n_steps = int(p["dim"]), int(p["n_steps"])
    basis = hermitian_basis(d, 2.0)
    o0 = spin_operators(d - 1).jx
    sigma = float(p["sigma"]) if p.get("sigma") is not None else 0.01 * np.sqrt(np.trace(o0 @ o0).real)
    policy, cps = _policy(p, d), _checkpoints(p)

    def one(rng):
        obs = tomography.evolve_observables(o0, tomography.generate_sequence(policy, n_steps, rng), basis)
        psi = random_pure_state(d, rng)
        ens = tomography.simulate_record(np.outer(psi, psi.conj()), obs, basis, sigma, rng)
        out = []
        for k, spectrum in tomography.information_trace(obs, sigma, cps):
            part = tomography.MeasurementEnsemble(obs[:k], ens.record[:k], sigma, ens.r_true)
            est = tomography.estimate_state(part, basis, projection=p["projection"])
            out.append((est.fidelity, spectrum.fisher_information, spectrum.shannon_entropy, spectrum.rank))
        return out

    res = np.array(parallel_map(one, spawn_streams(seed, int(p["n_states"]))))
    progress(f"{len(res)} states reconstructed")
    rows = []
    for i, k in enumerate(cps):
        f = res[:, i, 0]
        rows.append([k, f.mean(), f.min(), res[:, i, 1].mean(), res[:, i, 2].mean(), int(res[:, i, 3].min())])
    return ResultTable(["step", "mean_fidelity", "min_fidelity", "fisher_information", "entropy", "rank"], rows)


def _tomography_info(p, seed, progress):
    d, n_steps = int(p["dim"]), int(p["n_steps"])
    basis = hermitian_basis(d, 2.0)
    o0 = spin_operators(d - 1).jx
    rng = np.random.default_rng(seed)
    obs = tomography.evolve_observables(o0, tomography.generate_sequence(_policy(p, d), n_steps, rng), basis)
    ceiling = float(np.log(d * d - 1))
    rows = [
        [k, s.fisher_information, s.shannon_entropy, s.rank, ceiling]
        for k, s in tomography.information_trace(obs, float(p["sigma"]), _checkpoints(p))
    ]
    return ResultTable(["step", "fisher_information", "entropy", "rank", "entropy_ceiling"], rows)


def _rmt_compare(p, seed, progress):
    D, N = int(p["D"]), int(p["N"])
    d = int(round(np.sqrt(D + 1)))
    jx = spin_operators(d - 1).jx
    # Gell-Mann scale: Tr(C^-1) = 2 N Tr(O0^2)
    trace = float(p["trace"]) if p.get("trace") is not None else 2 * N * float(np.trace(jx @ jx).real)
    rows = [
        ["fi_mp", rmt.predict_fi_mp(D, N, trace, float(p["ridge"]))],
        ["entropy_mp", rmt.predict_entropy_mp(D, N)],
        ["entropy_pt", rmt.predict_entropy_pt(d)],
        ["fi_pt", rmt.predict_fi_pt(d, trace)],
    ]
    return ResultTable(["quantity", "value"], rows)


def _dqc1_trace(p, seed, progress):
    dim, reps = int(p["dim"]), int(p["repetitions"])
    u = haar_unitary(dim, np.random.default_rng(seed))
    exact = dqc1.dqc1_trace(u, alpha=float(p["alpha"]))
    rows = []
    for i, shots in enumerate(p["shots"]):
        est = dqc1.repeated_estimates(u, int(shots), reps, seed + 1 + i, alpha=float(p["alpha"]))
        err = est - exact.re_estimate
        rows.append([int(shots), exact.re_estimate, float(np.mean(np.abs(err))), float(np.sqrt(np.mean(err**2))),
                     1 / (float(p["alpha"]) * np.sqrt(int(shots)))])
    return ResultTable(["shots", "exact", "mean_abs_error", "rms_error", "stderr_theory"], rows)


def _dqc1_otoc(p, seed, progress):
    two_j, n_max = int(p["two_j"]), int(p["n_max"])
    u = kickedtop.floquet(kickedtop.KickedTopParams(two_j, float(p["kappa0"])))
    w = np.diag(np.exp(-1j * float(p["phi_w"]) * spin_operators(two_j).m))
    oracle = chaosdiag.otoc_unitary_series(u, w, w, n_max)
    shots = p.get("shots")
    streams = spawn_streams(seed, n_max + 1)
    rows = []
    un = np.eye(two_j + 1, dtype=complex)
    for n in range(n_max + 1):
        if n:
            un = un @ u
        row = [n, dqc1.dqc1_otoc(w, w, un).re_estimate, oracle[n]]
        if shots:
            row.append(dqc1.dqc1_otoc(w, w, un, shots=int(shots), rng=streams[n]).re_estimate)
        rows.append(row)
    cols = ["n", "dqc1_exact", "chaosdiag"] + (["dqc1_shots"] if shots else [])
    return ResultTable(cols, rows)


def _dqc1_fidelity(p, seed, progress):
    dim = int(p["dim"])
    rng = np.random.default_rng(seed)
    u = haar_unitary(dim, rng)
    psis = [random_pure_state(dim, r) for r in spawn_streams(seed + 1, int(p["n_states"]))]
    rows = []
    for pr in p["p"]:
        fs = np.array([dqc1.dqc1_gate_fidelity(u, float(pr), psi) for psi in psis])
        rows.append([float(pr), fs.mean(), fs.std(ddof=1), dqc1.dqc1_gate_fidelity(u, float(pr))])
    return ResultTable(["p", "mean_fidelity", "std_fidelity", "haar_average"], rows)


def _concentration_sphere(p, seed, progress):
    fn, sampler, eps = p["function"], p["sampler"], float(p["epsilon"])
    ns = [int(n) for n in p["n"]]
    eta = concentration.FUNCTIONS.get(fn)
    if eta is None:
        raise ConfigError(f"params.function must be one of {tuple(concentration.FUNCTIONS)}")

    def one(args):
        n, rng = args
        return concentration.empirical_deviation(fn, sampler, n, eps, int(p["trials"]), rng)

    probs = parallel_map(one, zip(ns, spawn_streams(seed, len(ns))))
    rows = [[n, pr, concentration.levy_bound(n, eps, eta, float(p["levy_k"]))] for n, pr in zip(ns, probs)]
    return ResultTable(["n", "probability", "levy_bound"], rows)


def _bipartite(p, seed, progress):
    d_a = int(p["d_a"])
    d_bs = [int(x) for x in p["d_b"]]

    def one(args):
        d_b, rng = args
        return concentration.bipartite_typicality(d_a, d_b, int(p["trials"]), p["sampler"], rng)

    stats = parallel_map(one, zip(d_bs, spawn_streams(seed, len(d_bs))))
    rows = [
        [d_a, d_b, s.mean_entropy, concentration.page_entropy(d_a, d_b), s.std_entropy, s.mean_trace_distance, s.fannes_violations]
        for d_b, s in zip(d_bs, stats)
    ]
    return ResultTable(
        ["d_a", "d_b", "mean_entropy", "page_entropy", "std_entropy", "mean_trace_distance", "fannes_violations"], rows
    )


def _quasispecies(p, seed, progress):
    n, mu = int(p["n"]), float(p["mu"])
    rng = np.random.default_rng(seed)
    a = rng.uniform(1.0, 2.0, n)
    q = (1 - mu) * np.eye(n) + mu / (n - 1) * (1 - np.eye(n))
    sys_ = concentration.quasispecies_equilibrium(a, q)
    dense = float(np.max(np.linalg.eigvals(sys_.W).real))
    fit = concentration.random_fitness_concentration(a, int(p["trials"]), rng, sys_.lambda_max)
    return ResultTable(
        ["lambda_max", "lambda_dense", "iterations", "mean_abs_fitness_gap", "median_abs_fitness_gap"],
        [[sys_.lambda_max, dense, sys_.iterations, fit.mean_abs, fit.median_abs]],
    )


EXPERIMENTS: dict[str, Experiment] = {
    "otoc-exact": Experiment("closed-form vs dense OTOC for 3/4-qubit tops", ("nqubits", "kappa0", "n_max"), {}, _otoc_exact),
    "otoc-scan": Experiment("dense OTOC over a kick-strength grid", ("two_j", "kappa0", "n_max"), {}, _otoc_scan),
    "echo-averaged": Experiment(
        "state-averaged Loschmidt echo", ("two_j", "kappa0", "delta_kappa0", "n_max"), {}, _echo_averaged
    ),
    "echo-state": Experiment(
        "Loschmidt echo of one initial state",
        ("state", "kappa0", "delta_kappa0", "n_max"),
        {"two_j": 3, "theta": 0.0, "phi": 0.0},
        _echo_state,
    ),
    "tomography-fidelity": Experiment(
        "mean reconstruction fidelity over random pure states",
        ("dim", "policy", "n_steps", "n_states"),
        {"sigma": None, "projection": "constrained", "checkpoints": None, "beta": 1.4},
        _tomography_fidelity,
    ),
    "tomography-info": Experiment(
        "Fisher information, entropy and rank along one record",
        ("dim", "policy", "n_steps"),
        {"sigma": 1.0, "checkpoints": None, "beta": 1.4},
        _tomography_info,
    ),
    "rmt-compare": Experiment("random-matrix information predictions", ("D", "N"), {"ridge": 0.0, "trace": None}, _rmt_compare),
    "dqc1-trace": Experiment(
        "shot-noise scaling of DQC1 trace estimates",
        ("dim", "shots", "repetitions"),
        {"alpha": 1.0},
        _dqc1_trace,
    ),
    "dqc1-otoc": Experiment("DQC1 OTOC on a kicked top", ("two_j", "kappa0", "n_max"), {"shots": None, "phi_w": np.pi / 2}, _dqc1_otoc),
    "dqc1-fidelity": Experiment("gate fidelity under depolarizing noise", ("dim", "p", "n_states"), {}, _dqc1_fidelity),
    "concentration-sphere": Experiment(
        "deviation probability vs dimension",
        ("n", "epsilon", "trials"),
        {"function": "x1", "sampler": "uniform", "levy_k": concentration.LEVY_K},
        _concentration_sphere,
    ),
    "bipartite-typicality": Experiment(
        "entanglement of random bipartite pure states", ("d_a", "d_b", "trials"), {"sampler": "haar"}, _bipartite
    ),
    "quasispecies": Experiment("quasispecies equilibrium and fitness concentration", ("n",), {"mu": 0.01, "trials": 1000}, _quasispecies),
}


# -- config and emission ----------------------------------------------------------------------


def load_config(path: str | Path) -> dict[str, Any]:
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return validate_config(cfg)


def validate_config(cfg: Any) -> dict[str, Any]:
    if isinstance(cfg, dict):
        for key in ("experiment", "seed"):
            if key not in cfg:
                raise ConfigError(f"missing required field {key!r}")
    try:
        jsonschema.validate(cfg, load_schema("config.schema.json"))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(x) for x in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None
    name = cfg["experiment"]
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; run 'qchaos list'")
    params = cfg.get("params", {})
    missing = [k for k in EXPERIMENTS[name].required if k not in params]
    if missing:
        raise ConfigError(f"experiment {name!r} is missing parameter(s): {', '.join('params.' + k for k in missing)}")
    return cfg


def run_experiment(cfg: dict[str, Any], progress: Callable[[str], None] | None = None) -> ResultTable:
    cfg = validate_config(copy.deepcopy(cfg))
    exp = EXPERIMENTS[cfg["experiment"]]
    params = {**exp.defaults, **cfg.get("params", {})}
    progress = progress or (lambda msg: None)
    t0 = time.perf_counter()
    table = exp.run(params, int(cfg["seed"]), progress)
    table.rows = [[_f(x) for x in r] for r in table.rows]
    table.__post_init__()
    table.metadata = {
        "experiment": cfg["experiment"],
        "version": __version__,
        "seed": int(cfg["seed"]),
        "columns": table.columns,
        "config": cfg,
    }
    # wall time breaks byte reproducibility, so it is opt-in
    if cfg.get("record_timing"):
        table.metadata["wall_time_s"] = time.perf_counter() - t0
    return table


def _fmt(x: Any) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def render_csv(table: ResultTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for r in table.rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def render_json(table: ResultTable) -> str:
    doc = {"metadata": table.metadata, "rows": [dict(zip(table.columns, r)) for r in table.rows]}
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def emit_table(table: ResultTable, path: str | Path, fmt: str) -> None:
    if fmt not in ("csv", "json"):
        raise ConfigError(f"format must be 'csv' or 'json', got {fmt!r}")
    text = render_csv(table) if fmt == "csv" else render_json(table)
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def _resolve_output(cfg: dict[str, Any], out: str | None) -> tuple[Path, str]:
    target = out or cfg.get("output")
    if not target:
        raise ConfigError("no output path: set 'output' in the config or pass --out")
    path = Path(target)
    fmt = cfg.get("format") or ("json" if path.suffix.lower() == ".json" else "csv")
    if not path.parent.exists() or not os.access(path.parent, os.W_OK):
        raise ConfigError(f"output directory {path.parent} does not exist or is not writable")
    return path, fmt


# -- entry point ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qchaos", description="Quantum-chaos numerical experiments.")
    ap.add_argument("--version", action="version", version=f"qchaos {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--out", help="override the config output path")
    run.add_argument("--quiet", action="store_true", help="suppress progress on stderr")
    sub.add_parser("list", help="list experiments")
    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("--config", required=True)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for name, exp in EXPERIMENTS.items():
            print(f"{name:22s} {exp.summary}  [requires: {', '.join(exp.required)}]")
        return EXIT_OK
    try:
        cfg = load_config(args.config)
        if args.command == "validate":
            print(f"{args.config}: ok ({cfg['experiment']})")
            return EXIT_OK
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be nonnegative")
            cfg["seed"] = args.seed
        path, fmt = _resolve_output(cfg, args.out)
        cfg["output"], cfg["format"] = str(path), fmt

        def progress(msg: str) -> None:
            if not args.quiet:
                print(f"[{cfg['experiment']}] {msg}", file=sys.stderr, flush=True)

        worker_count()
        progress("started")
        table = run_experiment(cfg, progress)
        emit_table(table, path, fmt)
        progress(f"wrote {len(table.rows)} rows to {path}")
        return EXIT_OK
    except (ArithmeticError, RuntimeError, OSError, np.linalg.LinAlgError) as exc:
        print(f"qchaos: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, KeyError, TypeError) as exc:
        # ConfigError and invalid parameter values surfaced by the modules
        print(f"qchaos: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
